//! Pipeline configuration in a flat `[section]` / `key = value` format.
//! The grammar is documented in the README.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tsecon::ml::{default_grid, Hyper, ModelKind, SvrLoss, DEFAULT_SVR_EPSILON};
use tsecon::YearMonth;

use crate::error::{io_err, CliError, CliResult};

/// Differencing order per variable: chosen by repeated ADF tests, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOverride {
    Auto,
    Fixed(usize),
}

/// A regressor name with the number of differences applied before use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformed {
    pub name: String,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggles {
    pub arima: bool,
    pub arimax: bool,
    pub garch: bool,
    pub cointegration: bool,
    pub varx: bool,
    pub ml: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { arima: true, arimax: true, garch: true, cointegration: true, varx: true, ml: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub knn: Vec<Hyper>,
    pub ridge: Vec<Hyper>,
    pub svr: Vec<Hyper>,
    pub ann: Vec<Hyper>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            knn: default_grid(ModelKind::Knn),
            ridge: default_grid(ModelKind::Ridge),
            svr: default_grid(ModelKind::Svr),
            ann: default_grid(ModelKind::Ann),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub files: Vec<PathBuf>,
    pub rename: BTreeMap<String, String>,
    pub fetch_ids: Vec<String>,
    pub fetch_start: YearMonth,
    pub fetch_end: YearMonth,
    pub target: String,
    /// Predictors; empty means every non-target column.
    pub variables: Vec<String>,
    pub differencing: BTreeMap<String, DiffOverride>,
    pub max_differences: usize,
    pub train_fraction: f64,
    pub folds: usize,
    pub horizon: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub toggles: Toggles,
    pub acf_lags: usize,
    pub ljung_box_lags: usize,
    pub arima_p_max: usize,
    pub arima_q_max: usize,
    pub arimax_exog: Vec<Transformed>,
    pub garch_candidates: Vec<(usize, usize)>,
    pub garch_fit_fraction: f64,
    pub coint_pair: (String, String),
    pub johansen_vars: Vec<String>,
    pub johansen_lags: usize,
    pub varx_vars: Vec<String>,
    pub varx_max_lag: usize,
    pub irf_horizon: usize,
    pub irf_boot_reps: usize,
    pub pca_components: usize,
    pub grids: Grids,
    pub extender_p_max: usize,
    pub extender_q_max: usize,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = |name: &str, d| Transformed { name: name.into(), d };
        Self {
            files: Vec::new(),
            rename: BTreeMap::new(),
            fetch_ids: Vec::new(),
            fetch_start: YearMonth::new(1976, 6).unwrap(),
            fetch_end: YearMonth::new(2018, 12).unwrap(),
            target: "hous_st".into(),
            variables: Vec::new(),
            differencing: BTreeMap::new(),
            max_differences: 3,
            train_fraction: 0.8,
            folds: 18,
            horizon: 12,
            seed: 42,
            output: PathBuf::from("out"),
            toggles: Toggles::default(),
            acf_lags: 36,
            ljung_box_lags: 12,
            arima_p_max: 3,
            arima_q_max: 3,
            arimax_exog: vec![t("mortgR", 0), t("pvt_house_comp", 1), t("income", 2), t("sec_conL", 2), t("real_estL", 2)],
            garch_candidates: vec![(1, 1), (2, 1), (1, 2), (2, 2)],
            garch_fit_fraction: 0.9,
            coint_pair: ("hous_st".into(), "pvt_house_comp".into()),
            johansen_vars: strings(&["hous_st", "house_supply", "mortgR", "pvt_house_comp"]),
            johansen_lags: 3,
            varx_vars: strings(&["hous_st", "house_supply", "mortgR", "pvt_house_comp"]),
            varx_max_lag: 6,
            irf_horizon: 6,
            irf_boot_reps: 500,
            pca_components: 6,
            grids: Grids::default(),
            extender_p_max: 3,
            extender_q_max: 3,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for f in &mut cfg.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| CliError::Config { line: line_no, message };
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            if seen.insert((section.clone(), key.to_string()), line_no).is_some() {
                return Err(err(format!("duplicate key `{key}` in [{section}]")));
            }
            cfg.apply(&section, key, value).map_err(err)?;
        }
        cfg.validate().map_err(|m| CliError::Config { line: 0, message: m })?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        match (section, key) {
            ("data", "files") => self.files = list(value).into_iter().map(PathBuf::from).collect(),
            ("data", "target") => self.target = value.to_string(),
            ("data", "variables") => self.variables = list(value),
            ("rename", from) => {
                self.rename.insert(from.to_string(), value.to_string());
            }
            ("fetch", "ids") => self.fetch_ids = list(value),
            ("fetch", "start") => self.fetch_start = month(value)?,
            ("fetch", "end") => self.fetch_end = month(value)?,
            ("differencing", "max") => self.max_differences = num(value)?,
            ("differencing", var) => {
                let o = if value.eq_ignore_ascii_case("auto") { DiffOverride::Auto } else { DiffOverride::Fixed(num(value)?) };
                self.differencing.insert(var.to_string(), o);
            }
            ("pipeline", "train_fraction") => self.train_fraction = num(value)?,
            ("pipeline", "folds") => self.folds = num(value)?,
            ("pipeline", "horizon") => self.horizon = num(value)?,
            ("pipeline", "seed") => self.seed = num(value)?,
            ("pipeline", "output") => self.output = PathBuf::from(value),
            ("models", m) => {
                let on = boolean(value)?;
                match m {
                    "arima" => self.toggles.arima = on,
                    "arimax" => self.toggles.arimax = on,
                    "garch" => self.toggles.garch = on,
                    "cointegration" => self.toggles.cointegration = on,
                    "varx" => self.toggles.varx = on,
                    "ml" => self.toggles.ml = on,
                    _ => return Err(format!("unknown model toggle `{m}`")),
                }
            }
            ("diagnostics", "acf_lags") => self.acf_lags = num(value)?,
            ("diagnostics", "ljung_box_lags") => self.ljung_box_lags = num(value)?,
            ("arima", "p_max") => self.arima_p_max = num(value)?,
            ("arima", "q_max") => self.arima_q_max = num(value)?,
            ("arimax", "exog") => {
                self.arimax_exog = list(value)
                    .into_iter()
                    .map(|item| match item.split_once(':') {
                        Some((n, d)) => Ok(Transformed { name: n.trim().into(), d: num(d.trim())? }),
                        None => Ok(Transformed { name: item, d: 0 }),
                    })
                    .collect::<Result<_, String>>()?
            }
            ("garch", "candidates") => self.garch_candidates = list(value).iter().map(|s| pair(s)).collect::<Result<_, _>>()?,
            ("garch", "fit_fraction") => self.garch_fit_fraction = num(value)?,
            ("cointegration", "pair") => {
                let v = list(value);
                if v.len() != 2 {
                    return Err("cointegration pair needs exactly two names".into());
                }
                self.coint_pair = (v[0].clone(), v[1].clone());
            }
            ("cointegration", "johansen_vars") => self.johansen_vars = list(value),
            ("cointegration", "johansen_lags") => self.johansen_lags = num(value)?,
            ("varx", "variables") => self.varx_vars = list(value),
            ("varx", "max_lag") => self.varx_max_lag = num(value)?,
            ("varx", "irf_horizon") => self.irf_horizon = num(value)?,
            ("varx", "boot_reps") => self.irf_boot_reps = num(value)?,
            ("ml", "pca_components") => self.pca_components = num(value)?,
            ("ml", "extender_p_max") => self.extender_p_max = num(value)?,
            ("ml", "extender_q_max") => self.extender_q_max = num(value)?,
            ("ml", "knn_k") => self.grids.knn = nums::<usize>(value)?.into_iter().map(|k| Hyper::Knn { k }).collect(),
            ("ml", "ridge_lambda") => {
                self.grids.ridge = nums::<f64>(value)?.into_iter().map(|lambda| Hyper::Ridge { lambda }).collect()
            }
            ("ml", "svr") => {
                self.grids.svr = list(value).iter().map(|s| svr_point(s)).collect::<Result<_, _>>()?;
            }
            ("ml", "ann") => {
                self.grids.ann = list(value).iter().map(|s| ann_point(s)).collect::<Result<_, _>>()?;
            }
            (s, k) => return Err(format!("unknown key `{k}` in [{s}]")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.garch_fit_fraction > 0.0 && self.garch_fit_fraction < 1.0) {
            return Err(format!("garch fit_fraction must lie in (0, 1), got {}", self.garch_fit_fraction));
        }
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if self.folds == 0 {
            return Err("folds must be at least 1".into());
        }
        if self.pca_components == 0 {
            return Err("pca_components must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical text of every setting, hashed into the manifest.
    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid number `{value}`"))
}

fn nums<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    list(value).iter().map(|s| num(s)).collect()
}

fn boolean(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean `{value}`")),
    }
}

fn month(value: &str) -> Result<YearMonth, String> {
    YearMonth::parse(value).map_err(|e| e.to_string())
}

fn pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `p:q`, found `{s}`"))?;
    Ok((num(a.trim())?, num(b.trim())?))
}

/// `C:loss` or `C:loss:epsilon`.
fn svr_point(s: &str) -> Result<Hyper, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(format!("expected `C:loss[:epsilon]`, found `{s}`"));
    }
    let loss = match parts[1].to_ascii_lowercase().as_str() {
        "l1" => SvrLoss::L1,
        "l2" => SvrLoss::L2,
        other => return Err(format!("unknown SVR loss `{other}`")),
    };
    let epsilon = if parts.len() == 3 { num(parts[2])? } else { DEFAULT_SVR_EPSILON };
    Ok(Hyper::Svr { c: num(parts[0])?, loss, epsilon })
}

/// `size:decay`.
fn ann_point(s: &str) -> Result<Hyper, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `size:decay`, found `{s}`"))?;
    Ok(Hyper::Ann { hidden: num(a.trim())?, decay: num(b.trim())? })
}
