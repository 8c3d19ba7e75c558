//! Command-line front end: reads a run configuration, executes pipeline
//! stages and writes JSON/CSV artifacts plus a manifest.

pub mod config;
pub mod output;
pub mod pipeline;

use std::fs::File;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use contagion_core::ingest::{write_country_map, write_panel};
use contagion_core::synthetic::bundled_panel;

use config::{resolve_seed, RunConfig};
use output::Artifacts;
use pipeline::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] contagion_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input or configuration, 2 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "contagion",
    version,
    about = "Systemic-risk networks from default-probability panels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Args)]
pub struct Opts {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Results directory (default: config `output_dir`, else ./results)
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    /// Master seed; overrides CONTAGION_SEED and the config file
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Panel CSV, overriding the config
    #[arg(long, global = true)]
    pub panel: Option<PathBuf>,
    /// Country map CSV, overriding the config
    #[arg(long, global = true)]
    pub countries: Option<PathBuf>,
    /// Partial-correlation threshold for the latent-model adjacency
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Significance level for partial correlations and tests
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Annealing sweeps
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Descriptive statistics by bank and country
    Summarize,
    /// Partial correlations, significance masks and threshold adjacency
    Pcorr,
    /// Pairwise CoRisk matrices and CoRisk in/out time series
    Corisk,
    /// CoRisk-distance graphs, minimum spanning arborescences, fragility, sources
    Mst,
    /// Centrality tables and net-CoRisk graphs
    Centrality,
    /// Fit the latent position model
    LpmFit,
    /// Latent-space systemic-risk index per institution and period
    RiskIndex,
    /// Paired t-tests on vectorized CoRisk matrices
    TestTtest,
    /// Bootstrap tests for an increase in Kendall's tau
    TestKendall,
    /// Run every stage
    Pipeline,
    /// Write the bundled synthetic panel and country map to --outdir
    GenerateSynthetic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Summarize => "summarize",
            Command::Pcorr => "pcorr",
            Command::Corisk => "corisk",
            Command::Mst => "mst",
            Command::Centrality => "centrality",
            Command::LpmFit => "lpm-fit",
            Command::RiskIndex => "risk-index",
            Command::TestTtest => "test-ttest",
            Command::TestKendall => "test-kendall",
            Command::Pipeline => "pipeline",
            Command::GenerateSynthetic => "generate-synthetic",
        }
    }
}

type Stage = fn(&Context, &mut Artifacts) -> Result<(), CliError>;

fn stages(cmd: Command) -> Vec<Stage> {
    use pipeline::*;
    match cmd {
        Command::Summarize => vec![summarize_stage],
        Command::Pcorr => vec![pcorr_stage],
        Command::Corisk => vec![corisk_stage],
        Command::Mst => vec![mst_stage],
        Command::Centrality => vec![centrality_stage],
        Command::LpmFit => vec![lpm_fit_stage],
        Command::RiskIndex => vec![risk_index_stage],
        Command::TestTtest => vec![ttest_stage],
        Command::TestKendall => vec![kendall_stage],
        Command::Pipeline => vec![
            summarize_stage,
            pcorr_stage,
            corisk_stage,
            mst_stage,
            centrality_stage,
            lpm_fit_stage,
            risk_index_stage,
            ttest_stage,
            kendall_stage,
        ],
        Command::GenerateSynthetic => vec![],
    }
}

/// Merge config file, environment and flags into the effective configuration.
pub fn effective_config(opts: &Opts) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.seed = resolve_seed(cfg.seed, opts.seed)?;
    if let Some(p) = &opts.panel {
        cfg.input.panel = Some(std::path::absolute(p).unwrap_or_else(|_| p.clone()));
    }
    if let Some(p) = &opts.countries {
        cfg.input.countries = Some(std::path::absolute(p).unwrap_or_else(|_| p.clone()));
    }
    if let Some(t) = opts.threshold {
        cfg.pcorr.threshold = t;
    }
    if let Some(a) = opts.alpha {
        cfg.pcorr.alpha = a;
        cfg.stats.alpha = a;
    }
    if let Some(k) = opts.iterations {
        cfg.lpm.iterations = k;
    }
    let outdir = opts
        .outdir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| cfg.base.join(d)));
    Ok((cfg, outdir))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, outdir) = effective_config(&cli.opts)?;
    let outdir = outdir.unwrap_or_else(|| PathBuf::from("results"));
    if cli.command == Command::GenerateSynthetic {
        return generate_synthetic(cfg.seed, &outdir);
    }
    cfg.validate()?;
    let ctx = Context::load(cfg)?;
    let mut art = Artifacts::new(&outdir);
    for stage in stages(cli.command) {
        stage(&ctx, &mut art)?;
    }
    art.write_manifest(cli.command.name(), &ctx.cfg, ctx.inputs())
}

fn generate_synthetic(seed: u64, outdir: &std::path::Path) -> Result<(), CliError> {
    let io = |path: PathBuf| {
        move |source| CliError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(outdir).map_err(io(outdir.to_path_buf()))?;
    let (panel, countries) = bundled_panel(seed)?;
    let p = outdir.join("panel.csv");
    write_panel(&panel, File::create(&p).map_err(io(p.clone()))?)?;
    let c = outdir.join("countries.csv");
    write_country_map(&countries, File::create(&c).map_err(io(c.clone()))?)?;
    Ok(())
}
