//! Download of FRED per-series CSV files. Nothing here touches the network
//! unless a live `Fetcher` is passed in.

use std::path::Path;

use tsecon::YearMonth;

use crate::dataset::{join_series, parse_series_csv, Dataset, SourceMeta};
use crate::error::{io_err, CliError, CliResult};

pub const FRED_CSV_ENDPOINT: &str = "https://fred.stlouisfed.org/graph/fredgraph.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait Fetcher {
    fn get(&self, url: &str) -> CliResult<HttpResponse>;
}

/// Refuses every request.
#[derive(Debug, Clone, Copy, Default)]
pub struct Offline;

impl Fetcher for Offline {
    fn get(&self, _url: &str) -> CliResult<HttpResponse> {
        Err(CliError::NetworkDisabled)
    }
}

#[cfg(feature = "net")]
#[derive(Debug, Clone, Copy, Default)]
pub struct HttpFetcher;

#[cfg(feature = "net")]
impl Fetcher for HttpFetcher {
    fn get(&self, url: &str) -> CliResult<HttpResponse> {
        let http = |message: String| CliError::Http { url: url.to_string(), message };
        match ureq::get(url).call() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string().map_err(|e| http(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::StatusCode(status)) => Ok(HttpResponse { status, body: String::new() }),
            Err(e) => Err(http(e.to_string())),
        }
    }
}

/// The live fetcher when built with the `net` feature.
pub fn default_fetcher() -> Box<dyn Fetcher> {
    #[cfg(feature = "net")]
    {
        Box::new(HttpFetcher)
    }
    #[cfg(not(feature = "net"))]
    {
        Box::new(Offline)
    }
}

pub fn series_url(id: &str, start: YearMonth, end: YearMonth) -> String {
    format!("{FRED_CSV_ENDPOINT}?id={id}&cosd={}&coed={}", start.iso_date(), end.iso_date())
}

/// Downloads every series, stores each raw response under `raw_dir`, and joins
/// them. Any failure aborts before a dataset is built.
pub fn fetch_fred(
    ids: &[String],
    start: YearMonth,
    end: YearMonth,
    raw_dir: &Path,
    fetcher: &dyn Fetcher,
    offline: bool,
) -> CliResult<Dataset> {
    if offline {
        return Err(CliError::NetworkDisabled);
    }
    std::fs::create_dir_all(raw_dir).map_err(io_err(raw_dir))?;
    let mut series = Vec::with_capacity(ids.len());
    let mut sources = Vec::with_capacity(ids.len());
    for id in ids {
        let url = series_url(id, start, end);
        let resp = fetcher.get(&url)?;
        if resp.status == 404 || resp.status == 400 {
            return Err(CliError::UnknownSeries(id.clone()));
        }
        if resp.status != 200 {
            return Err(CliError::Http { url, message: format!("status {}", resp.status) });
        }
        let head = resp.body.lines().next().unwrap_or("");
        if !head.contains(',') || head.trim_start().starts_with('<') {
            return Err(CliError::UnknownSeries(id.clone()));
        }
        let path = raw_dir.join(format!("{id}.csv"));
        std::fs::write(&path, &resp.body).map_err(io_err(&path))?;
        let s = parse_series_csv(&resp.body, &path)?;
        sources.push(SourceMeta {
            variable: s.name.clone(),
            origin: url,
            retrieved_utc: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        });
        series.push(s);
    }
    join_series(series, sources)
}
