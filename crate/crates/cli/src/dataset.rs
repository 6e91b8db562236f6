//! FRED-style CSV ingestion: one `DATE,<name>` file per variable, joined on
//! month.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tsecon::{Table, YearMonth};

use crate::error::{io_err, CliError, CliResult};

pub const MIN_ROWS: usize = 24;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SourceMeta {
    pub variable: String,
    /// File path or URL.
    pub origin: String,
    pub retrieved_utc: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub table: Table,
    pub sources: Vec<SourceMeta>,
}

impl Dataset {
    pub fn start(&self) -> YearMonth {
        self.table.start()
    }

    pub fn end(&self) -> YearMonth {
        self.table.end()
    }

    pub fn nrows(&self) -> usize {
        self.table.nrows()
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> CliResult<Dataset> {
        for n in names {
            if self.table.index_of(n).is_err() {
                return Err(CliError::UnknownVariable(n.to_string()));
            }
        }
        let table = self.table.select(names).map_err(|e| CliError::Stage { stage: "select".into(), source: e })?;
        let sources = self.sources.iter().filter(|s| names.contains(&s.variable.as_str())).cloned().collect();
        Ok(Dataset { table, sources })
    }
}

/// One parsed file: variable name and monthly observations in order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub name: String,
    pub start: YearMonth,
    pub values: Vec<f64>,
}

/// Parses CSV text with a `DATE,<name>` header. FRED's `.` marker is
/// reported as missing, with every affected date.
pub fn parse_series_csv(text: &str, path: &Path) -> CliResult<RawSeries> {
    let bad = |message: String| CliError::MalformedCsv { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 {
        return Err(bad(format!("expected 2 columns, header has {}", headers.len())));
    }
    let date_col = headers[0].to_ascii_lowercase();
    if date_col != "date" && date_col != "observation_date" {
        return Err(bad(format!("first column must be DATE, found `{}`", &headers[0])));
    }
    let name = headers[1].to_string();
    if name.is_empty() {
        return Err(bad("value column has no name".into()));
    }
    let mut rows: Vec<(YearMonth, String, Option<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad(format!("row {} has {} fields", i + 2, rec.len())));
        }
        let date = YearMonth::parse(&rec[0]).map_err(|_| bad(format!("row {}: bad date `{}`", i + 2, &rec[0])))?;
        let value = match &rec[1] {
            "." | "" => None,
            v => Some(v.parse::<f64>().map_err(|_| bad(format!("row {}: bad number `{v}`", i + 2)))?),
        };
        rows.push((date, rec[0].to_string(), value));
    }
    if rows.is_empty() {
        return Err(bad("no observations".into()));
    }
    let missing: Vec<String> = rows.iter().filter(|r| r.2.is_none()).map(|r| r.1.clone()).collect();
    if !missing.is_empty() {
        return Err(CliError::MissingValues { path: path.to_path_buf(), dates: missing });
    }
    for w in rows.windows(2) {
        if w[1].0 != w[0].0.add_months(1) {
            return Err(CliError::DateGap { path: path.to_path_buf(), before: w[0].1.clone(), after: w[1].1.clone() });
        }
    }
    Ok(RawSeries { name, start: rows[0].0, values: rows.into_iter().map(|r| r.2.unwrap()).collect() })
}

/// Inner join on month of several series, in input order.
pub fn join_series(series: Vec<RawSeries>, sources: Vec<SourceMeta>) -> CliResult<Dataset> {
    let mut seen = BTreeMap::new();
    for s in &series {
        if seen.insert(s.name.clone(), ()).is_some() {
            return Err(CliError::DuplicateVariable(s.name.clone()));
        }
    }
    if series.is_empty() {
        return Err(CliError::TooFewRows { rows: 0, min: MIN_ROWS });
    }
    let start = series.iter().map(|s| s.start).max().unwrap();
    let end = series.iter().map(|s| s.start.add_months(s.values.len() as i64 - 1)).min().unwrap();
    let rows = start.months_until(&end) + 1;
    if rows < MIN_ROWS as i64 {
        return Err(CliError::TooFewRows { rows: rows.max(0) as usize, min: MIN_ROWS });
    }
    let names = series.iter().map(|s| s.name.clone()).collect();
    let columns = series
        .iter()
        .map(|s| {
            let off = s.start.months_until(&start) as usize;
            s.values[off..off + rows as usize].to_vec()
        })
        .collect();
    let table = Table::new(start, names, columns).map_err(|e| CliError::Stage { stage: "ingest".into(), source: e })?;
    Ok(Dataset { table, sources })
}

/// Reads and joins CSV files. Variables may be renamed through `rename`
/// (header name → new name).
pub fn ingest_csv(paths: &[PathBuf], rename: &BTreeMap<String, String>) -> CliResult<Dataset> {
    let mut series = Vec::with_capacity(paths.len());
    let mut sources = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut s = parse_series_csv(&text, path)?;
        if let Some(n) = rename.get(&s.name) {
            s.name = n.clone();
        }
        sources.push(SourceMeta { variable: s.name.clone(), origin: path.display().to_string(), retrieved_utc: None });
        series.push(s);
    }
    join_series(series, sources)
}

/// Writes one `DATE,<name>` file per column.
pub fn write_series_csv(dataset: &Dataset, dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let t = &dataset.table;
    let mut out = Vec::new();
    for (j, name) in t.names().iter().enumerate() {
        let mut text = format!("DATE,{name}\n");
        for (i, v) in t.column(j).iter().enumerate() {
            text.push_str(&format!("{},{v}\n", t.date_at(i).iso_date()));
        }
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, text).map_err(io_err(&path))?;
        out.push(path);
    }
    Ok(out)
}
