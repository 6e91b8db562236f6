//! Monthly time-series containers and the basic transforms applied before
//! modelling: differencing and its exact inverse, correlograms, min-max
//! scaling and chronological train/test splitting.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Months since year 0, used for index arithmetic.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(12) as i32;
        let month = ordinal.rem_euclid(12) as u32 + 1;
        Self { year, month }
    }

    pub fn add_months(&self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: &YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }

    /// Parses `YYYY-MM` or `YYYY-MM-DD`. The day, when present, is ignored
    /// beyond validating that it is a number.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed date `{text}`"));
        let mut parts = text.trim().split('-');
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Self::new(year, month).map_err(|_| bad())
    }

    /// ISO date of the first day of the month.
    pub fn iso_date(&self) -> String {
        format!("{:04}-{:02}-01", self.year, self.month)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("`{name}` at index {i}"))),
        None => Ok(()),
    }
}

/// Evenly spaced monthly observations of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    start: YearMonth,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InsufficientData(format!("series `{name}` is empty")));
        }
        check_finite(&name, &values)?;
        Ok(Self { name, start, values })
    }

    /// Convenience constructor for unlabeled data starting at 2000-01.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new("series", YearMonth { year: 2000, month: 1 }, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, index: usize) -> YearMonth {
        self.start.add_months(index as i64)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn slice(&self, range: Range<usize>) -> Result<TimeSeries> {
        if range.end > self.len() || range.start >= range.end {
            return Err(Error::InsufficientData(format!(
                "slice {range:?} of series with {} values",
                self.len()
            )));
        }
        Ok(TimeSeries {
            name: self.name.clone(),
            start: self.date_at(range.start),
            values: self.values[range].to_vec(),
        })
    }

    /// First `⌈fraction·n⌉` observations and the remainder.
    pub fn split(&self, train_fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
        let cut = split_point(self.len(), train_fraction)?;
        Ok((self.slice(0..cut)?, self.slice(cut..self.len())?))
    }
}

/// Column-aligned monthly table of named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    start: YearMonth,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(start: YearMonth, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::InsufficientData("table has no columns".into()));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InsufficientData("table has no rows".into()));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            check_finite(name, col)?;
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidParameter(format!("duplicate column `{name}`")));
            }
        }
        Ok(Self { start, names, columns })
    }

    /// Inner-joins series on their common monthly span.
    pub fn from_series(series: &[TimeSeries]) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InsufficientData("no series to join".into()));
        }
        let start = series.iter().map(|s| s.start()).max().unwrap();
        let end = series.iter().map(|s| s.end()).min().unwrap();
        if end < start {
            return Err(Error::InsufficientData("series spans do not overlap".into()));
        }
        let n = (start.months_until(&end) + 1) as usize;
        let columns = series
            .iter()
            .map(|s| {
                let off = s.start().months_until(&start) as usize;
                s.values()[off..off + n].to_vec()
            })
            .collect();
        let names = series.iter().map(|s| s.name().to_string()).collect();
        Table::new(start, names, columns)
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.nrows() as i64 - 1)
    }

    pub fn nrows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column_by_name(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn series(&self, index: usize) -> TimeSeries {
        TimeSeries {
            name: self.names[index].clone(),
            start: self.start,
            values: self.columns[index].clone(),
        }
    }

    pub fn series_by_name(&self, name: &str) -> Result<TimeSeries> {
        Ok(self.series(self.index_of(name)?))
    }

    pub fn date_at(&self, index: usize) -> YearMonth {
        self.start.add_months(index as i64)
    }

    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    /// Subset of columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Table> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            cols.push(self.column_by_name(name)?.to_vec());
        }
        Table::new(self.start, names.iter().map(|s| s.to_string()).collect(), cols)
    }

    pub fn slice_rows(&self, range: Range<usize>) -> Result<Table> {
        if range.end > self.nrows() || range.start >= range.end {
            return Err(Error::InsufficientData(format!(
                "row slice {range:?} of table with {} rows",
                self.nrows()
            )));
        }
        Ok(Table {
            start: self.date_at(range.start),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
        })
    }

    pub fn split(&self, train_fraction: f64) -> Result<(Table, Table)> {
        let cut = split_point(self.nrows(), train_fraction)?;
        Ok((self.slice_rows(0..cut)?, self.slice_rows(cut..self.nrows())?))
    }

    /// Row-major `n × k` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.columns[j][i])
    }
}

/// A series differenced `order` times, carrying what is needed to invert.
///
/// Each level stores the rounding residue of every subtraction, which lets
/// [`integrate`] rebuild the original values bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSeries {
    name: String,
    base_start: YearMonth,
    order: usize,
    head: Vec<f64>,
    values: Vec<f64>,
    residues: Vec<Vec<f64>>,
}

impl DiffSeries {
    /// Builds a differenced series from raw parts (e.g. forecast increments).
    /// The residues are taken as zero.
    pub fn from_parts(
        name: impl Into<String>,
        base_start: YearMonth,
        order: usize,
        head: Vec<f64>,
        values: Vec<f64>,
    ) -> Self {
        let n = values.len();
        let residues = (1..=order).map(|k| vec![0.0; n + order - k]).collect();
        Self {
            name: name.into(),
            base_start,
            order,
            head,
            values,
            residues,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The differenced values as a series dated from `base_start + order`.
    pub fn to_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(
            format!("{}.d{}", self.name, self.order),
            self.base_start.add_months(self.order as i64),
            self.values.clone(),
        )
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn difference_once(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut diffs = Vec::with_capacity(x.len().saturating_sub(1));
    let mut residues = Vec::with_capacity(x.len().saturating_sub(1));
    for w in x.windows(2) {
        let (s, e) = two_sum(w[1], -w[0]);
        diffs.push(s);
        residues.push(e);
    }
    (diffs, residues)
}

/// Plain `d`-th differences of a slice, without inversion bookkeeping.
pub fn diff_values(x: &[f64], d: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    for _ in 0..d {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    cur
}

/// Applies `Δ^d`.
pub fn difference(series: &TimeSeries, d: usize) -> Result<DiffSeries> {
    if d >= series.len() {
        return Err(Error::InsufficientData(format!(
            "cannot difference {} values {d} times",
            series.len()
        )));
    }
    let mut cur = series.values().to_vec();
    let mut residues = Vec::with_capacity(d);
    for _ in 0..d {
        let (next, res) = difference_once(&cur);
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("difference overflow at index {i}")));
        }
        residues.push(res);
        cur = next;
    }
    Ok(DiffSeries {
        name: series.name().to_string(),
        base_start: series.start(),
        order: d,
        head: series.values()[..d].to_vec(),
        values: cur,
        residues,
    })
}

/// Inverts [`difference`]. `integrate(difference(s, d)) == s` exactly.
pub fn integrate(diff: &DiffSeries) -> Result<TimeSeries> {
    let d = diff.order;
    if diff.head.len() != d || diff.residues.len() != d {
        return Err(Error::MissingHead { order: d });
    }
    // first value of every intermediate level, recomputed with the same
    // rounded arithmetic that produced the stored levels
    let mut level_heads = Vec::with_capacity(d);
    let mut cur = diff.head.clone();
    for _ in 0..d {
        level_heads.push(cur[0]);
        cur = difference_once(&cur).0;
    }
    let mut level = diff.values.clone();
    for k in (0..d).rev() {
        let res = &diff.residues[k];
        if res.len() != level.len() {
            return Err(Error::ShapeMismatch(format!(
                "level {} has {} residues for {} values",
                k + 1,
                res.len(),
                level.len()
            )));
        }
        let mut prev = Vec::with_capacity(level.len() + 1);
        prev.push(level_heads[k]);
        for (i, (&s, &e)) in level.iter().zip(res).enumerate() {
            let (u, f) = two_sum(prev[i], s);
            prev.push(u + (f + e));
        }
        level = prev;
    }
    TimeSeries::new(diff.name.clone(), diff.base_start, level)
}

/// Continues the levels of `history` using `d`-th difference increments.
///
/// Used to map forecasts of a differenced model back to levels.
pub fn undifference(history: &[f64], d: usize, increments: &[f64]) -> Result<Vec<f64>> {
    if history.len() < d {
        return Err(Error::InsufficientData(format!(
            "need {d} history values to undo {d} differences"
        )));
    }
    // last value of each level 0..d-1
    let tail = &history[history.len() - d..history.len()];
    let mut last = Vec::with_capacity(d);
    let mut cur = tail.to_vec();
    for _ in 0..d {
        last.push(*cur.last().unwrap());
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut out = Vec::with_capacity(increments.len());
    for &inc in increments {
        let mut value = inc;
        for k in (0..d).rev() {
            value += last[k];
            last[k] = value;
        }
        out.push(value);
    }
    Ok(out)
}

/// Which correlogram to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelogramKind {
    Acf,
    Pacf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub kind: CorrelogramKind,
    pub lags: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Half-width of the 95% band, `1.96/√n`.
    pub confidence_bound: f64,
}

impl Correlogram {
    pub fn significant_lags(&self) -> Vec<usize> {
        self.lags
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| c.abs() > self.confidence_bound)
            .map(|(l, _)| *l)
            .collect()
    }
}

/// Sample autocorrelations for lags `0..=max_lag`, using the biased
/// (divisor `n`) autocovariance.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {max_lag} lags"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c0 == 0.0 || c0 <= (scale * 1e-13).powi(2) * n as f64 {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let ck: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum();
        out.push(ck / c0);
    }
    Ok(out)
}

/// Partial autocorrelations for lags `1..=max_lag` (Durbin-Levinson).
pub fn partial_autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let rho = autocorrelations(x, max_lag)?;
    Ok(durbin_levinson(&rho, max_lag))
}

pub(crate) fn durbin_levinson(rho: &[f64], max_lag: usize) -> Vec<f64> {
    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let num = rho[k] - (0..k - 1).map(|j| phi[j] * rho[k - 1 - j]).sum::<f64>();
        let den = 1.0 - (0..k - 1).map(|j| phi[j] * rho[j + 1]).sum::<f64>();
        let pkk = if den.abs() < 1e-300 { 0.0 } else { num / den };
        let mut next = vec![0.0; k];
        for j in 0..k - 1 {
            next[j] = phi[j] - pkk * phi[k - 2 - j];
        }
        next[k - 1] = pkk;
        phi = next;
        pacf.push(pkk);
    }
    pacf
}

pub fn acf_pacf(series: &TimeSeries, max_lag: usize, kind: CorrelogramKind) -> Result<Correlogram> {
    if max_lag < 1 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    let x = series.values();
    let coefficients = match kind {
        CorrelogramKind::Acf => autocorrelations(x, max_lag)?[1..].to_vec(),
        CorrelogramKind::Pacf => partial_autocorrelations(x, max_lag)?,
    };
    Ok(Correlogram {
        kind,
        lags: (1..=max_lag).collect(),
        coefficients,
        confidence_bound: 1.96 / (x.len() as f64).sqrt(),
    })
}

/// Affine map of a range onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::DegenerateSeries("constant values cannot be scaled".into()));
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }
}

pub fn minmax_scale(series: &TimeSeries) -> Result<(TimeSeries, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(series.values())?;
    let values = series.values().iter().map(|&v| scaler.transform(v)).collect();
    Ok((TimeSeries::new(series.name(), series.start(), values)?, scaler))
}

/// Number of leading rows assigned to the training side: `⌈fraction·n⌉`.
pub fn split_point(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    // tolerance absorbs representation error such as 0.7 * 10 = 7.000000000000001
    let cut = (n as f64 * train_fraction - 1e-9).ceil().max(0.0) as usize;
    if cut == 0 || cut >= n {
        return Err(Error::InsufficientData(format!(
            "split of {n} rows at {train_fraction} leaves an empty partition"
        )));
    }
    Ok(cut)
}

/// Chronological split of any row sequence. No shuffling.
pub fn chrono_split<T: Clone>(rows: &[T], train_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    let cut = split_point(rows.len(), train_fraction)?;
    Ok((rows[..cut].to_vec(), rows[cut..].to_vec()))
}
