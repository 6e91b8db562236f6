use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsecon_cli::config::Toggles;
use tsecon_cli::dataset::{ingest_csv, write_series_csv, Dataset};
use tsecon_cli::fetch::{default_fetcher, fetch_fred};
use tsecon_cli::report::{num, ArtifactWriter, CsvText};
use tsecon_cli::synth::{synth_dataset, SYNTH_MONTHS};
use tsecon_cli::{run_pipeline, CliError, CliResult, PipelineConfig};

#[derive(Parser)]
#[command(name = "tsecon", version, about = "Econometric and ML forecasting pipeline for monthly series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Refuse all network access.
    #[arg(long)]
    offline: bool,
    /// Use the bundled synthetic dataset instead of configured files.
    #[arg(long)]
    synthetic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Arima,
    Arimax,
    Garch,
    Cointegration,
    Varx,
    Ml,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and join CSV files into one aligned table.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Input files (default: `[data] files` from the config).
        files: Vec<PathBuf>,
    },
    /// Download series from FRED, then ingest them.
    Fetch {
        #[command(flatten)]
        common: Common,
        /// Series ids (default: `[fetch] ids` from the config).
        ids: Vec<String>,
    },
    /// Differencing search and residual diagnostics only.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
    /// One model family after the diagnostics.
    Fit {
        #[arg(value_enum)]
        model: Model,
        #[command(flatten)]
        common: Common,
    },
    /// The complete workflow.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
    /// Write the synthetic dataset as one CSV file per variable.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = SYNTH_MONTHS)]
        months: usize,
    },
}

fn load_config(common: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_data(cfg: &PipelineConfig, common: &Common) -> CliResult<Dataset> {
    if common.synthetic {
        return Ok(synth_dataset(cfg.seed, SYNTH_MONTHS));
    }
    if !cfg.files.is_empty() {
        return ingest_csv(&cfg.files, &cfg.rename);
    }
    if !cfg.fetch_ids.is_empty() {
        let raw = cfg.output.join("raw");
        return fetch_fred(&cfg.fetch_ids, cfg.fetch_start, cfg.fetch_end, &raw, default_fetcher().as_ref(), common.offline);
    }
    Err(CliError::Config { line: 0, message: "no input: set `[data] files`, `[fetch] ids`, or pass --synthetic".into() })
}

fn write_table(data: &Dataset, cfg: &PipelineConfig) -> CliResult<()> {
    let t = &data.table;
    let mut header = vec!["month".to_string()];
    header.extend(t.names().iter().cloned());
    let mut csv = CsvText::new(&header);
    for i in 0..t.nrows() {
        let mut row = vec![t.date_at(i).to_string()];
        row.extend(t.row(i).into_iter().map(num));
        csv.row(&row);
    }
    let mut w = ArtifactWriter::create(&cfg.output)?;
    w.write("dataset.csv", &csv.into_string())?;
    println!("{} rows x {} variables, {} to {}", t.nrows(), t.ncols(), data.start(), data.end());
    Ok(())
}

fn pipeline(cfg: PipelineConfig, common: &Common) -> CliResult<()> {
    let data = load_data(&cfg, common)?;
    let outcome = run_pipeline(&cfg, &data, &cfg.output)?;
    for r in &outcome.evaluation {
        println!("{:<11} mape={:.4} percent_bias={:.4}", r.model, r.mape, r.percent_bias);
    }
    println!("artifacts written to {}", cfg.output.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest { common, files } => {
            let mut cfg = load_config(&common)?;
            if !files.is_empty() {
                cfg.files = files;
            }
            let data = load_data(&cfg, &common)?;
            write_table(&data, &cfg)
        }
        Command::Fetch { common, ids } => {
            let mut cfg = load_config(&common)?;
            if !ids.is_empty() {
                cfg.fetch_ids = ids;
            }
            let raw = cfg.output.join("raw");
            let data = fetch_fred(&cfg.fetch_ids, cfg.fetch_start, cfg.fetch_end, &raw, default_fetcher().as_ref(), common.offline)?;
            write_table(&data, &cfg)
        }
        Command::Diagnose { common } => {
            let mut cfg = load_config(&common)?;
            cfg.toggles = Toggles { arima: false, arimax: false, garch: false, cointegration: false, varx: false, ml: false };
            pipeline(cfg, &common)
        }
        Command::Fit { model, common } => {
            let mut cfg = load_config(&common)?;
            let mut t = Toggles { arima: false, arimax: false, garch: false, cointegration: false, varx: false, ml: false };
            match model {
                Model::Arima => t.arima = true,
                Model::Arimax => t.arimax = true,
                Model::Garch => t.garch = true,
                Model::Cointegration => t.cointegration = true,
                Model::Varx => t.varx = true,
                Model::Ml => t.ml = true,
            }
            cfg.toggles = t;
            pipeline(cfg, &common)
        }
        Command::Pipeline { common } => {
            let cfg = load_config(&common)?;
            pipeline(cfg, &common)
        }
        Command::Synth { common, months } => {
            let cfg = load_config(&common)?;
            let data = synth_dataset(cfg.seed, months);
            let files = write_series_csv(&data, &cfg.output)?;
            println!("wrote {} files to {}", files.len(), cfg.output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
