use std::path::{Path, PathBuf};

use contagion_core::corisk::OutVariant;
use contagion_core::ingest::{default_periods, validate_periods, PeriodSpec, DEFAULT_PD_FLOOR};
use contagion_core::lpm::{AnnealSchedule, PeriodAggregate};
use contagion_core::pcorr::{DEFAULT_ALPHA, DEFAULT_THRESHOLD};
use contagion_core::stats::DEFAULT_RESAMPLES;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SEED_ENV: &str = "CONTAGION_SEED";

/// Everything a run depends on. The output directory is deliberately not part
/// of it, so the hash identifies results independently of where they land.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default = "default_periods")]
    pub periods: Vec<PeriodSpec>,
    #[serde(default)]
    pub pcorr: PcorrConfig,
    #[serde(default)]
    pub corisk: CoriskConfig,
    #[serde(default)]
    pub netmetrics: NetConfig,
    #[serde(default)]
    pub lpm: LpmConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    /// Results directory, relative to the config file.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub panel: Option<PathBuf>,
    pub countries: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Log,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcorrConfig {
    pub alpha: f64,
    pub threshold: f64,
    pub ridge: f64,
    pub transform: Transform,
    /// Floor applied to PDs before logs; `None` makes zero PDs an error.
    pub pd_floor: Option<f64>,
}

impl Default for PcorrConfig {
    fn default() -> Self {
        PcorrConfig {
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_THRESHOLD,
            ridge: 0.0,
            transform: Transform::Log,
            pd_floor: Some(DEFAULT_PD_FLOOR),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoriskConfig {
    pub variant: OutVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityGraph {
    #[default]
    Mst,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub centrality_graph: CentralityGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpmConfig {
    pub iterations: usize,
    pub c: f64,
    pub r: f64,
    pub proposal_sd: f64,
    pub aggregate: PeriodAggregate,
}

impl Default for LpmConfig {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        LpmConfig {
            iterations: s.iterations,
            c: s.c,
            r: s.r,
            proposal_sd: s.proposal_sd,
            aggregate: PeriodAggregate::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub greater: String,
    pub lesser: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KendallLevel {
    #[default]
    Country,
    Bank,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KendallConfig {
    /// Baseline period; defaults to the first period.
    pub pre: Option<String>,
    /// Comparison periods, pooled; defaults to the second period.
    pub post: Vec<String>,
    pub level: KendallLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub alpha: f64,
    pub resamples: usize,
    /// Paired CoRisk comparisons; empty means every later period against the
    /// one before it.
    pub ttest: Vec<Comparison>,
    pub kendall: KendallConfig,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            alpha: DEFAULT_ALPHA,
            resamples: DEFAULT_RESAMPLES,
            ttest: Vec::new(),
            kendall: KendallConfig::default(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            input: InputConfig::default(),
            periods: default_periods(),
            pcorr: PcorrConfig::default(),
            corisk: CoriskConfig::default(),
            netmetrics: NetConfig::default(),
            lpm: LpmConfig::default(),
            stats: StatsConfig::default(),
            output_dir: None,
            base: PathBuf::new(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    /// Parse a TOML config. Relative input paths are later resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        cfg.base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(cfg)
    }

    /// Field-level checks that need no file access.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.pcorr;
        if !(p.threshold > 0.0 && p.threshold < 1.0) {
            return Err(invalid(format!(
                "pcorr.threshold: threshold out of (0,1): {}",
                p.threshold
            )));
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(invalid(format!(
                "pcorr.alpha: alpha out of (0,1): {}",
                p.alpha
            )));
        }
        if !(p.ridge >= 0.0 && p.ridge.is_finite()) {
            return Err(invalid(format!(
                "pcorr.ridge: must be non-negative, got {}",
                p.ridge
            )));
        }
        if let Some(f) = p.pd_floor {
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid(format!(
                    "pcorr.pd_floor: must lie in (0,1), got {f}"
                )));
            }
        }
        self.schedule()
            .validate()
            .map_err(|e| invalid(format!("lpm: {e}")))?;
        let s = &self.stats;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return Err(invalid(format!(
                "stats.alpha: alpha out of (0,1): {}",
                s.alpha
            )));
        }
        if s.resamples < 2 {
            return Err(invalid(format!(
                "stats.resamples: need at least 2, got {}",
                s.resamples
            )));
        }
        validate_periods(&self.periods).map_err(|e| invalid(format!("periods: {e}")))?;
        let known = |name: &str, field: &str| {
            if self.periods.iter().any(|p| p.name == name) {
                Ok(())
            } else {
                Err(invalid(format!("{field}: unknown period {name:?}")))
            }
        };
        for c in &s.ttest {
            known(&c.greater, "stats.ttest.greater")?;
            known(&c.lesser, "stats.ttest.lesser")?;
        }
        if let Some(pre) = &s.kendall.pre {
            known(pre, "stats.kendall.pre")?;
        }
        for post in &s.kendall.post {
            known(post, "stats.kendall.post")?;
        }
        Ok(())
    }

    fn input_path(&self, p: Option<&Path>, field: &str, what: &str) -> Result<PathBuf, CliError> {
        let p = p.ok_or_else(|| {
            invalid(format!(
                "{field}: no {what} given (use --config or a path flag)"
            ))
        })?;
        let full = if p.is_relative() {
            self.base.join(p)
        } else {
            p.to_path_buf()
        };
        if !full.is_file() {
            return Err(invalid(format!(
                "{field}: {} does not exist",
                full.display()
            )));
        }
        Ok(full)
    }

    pub fn panel_path(&self) -> Result<PathBuf, CliError> {
        self.input_path(self.input.panel.as_deref(), "input.panel", "panel CSV")
    }

    pub fn countries_path(&self) -> Result<PathBuf, CliError> {
        self.input_path(
            self.input.countries.as_deref(),
            "input.countries",
            "country map",
        )
    }

    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            iterations: self.lpm.iterations,
            c: self.lpm.c,
            r: self.lpm.r,
            proposal_sd: self.lpm.proposal_sd,
            seed: contagion_core::seed::derive(self.seed, "lpm"),
        }
    }

    /// Paired t-test comparisons, defaulting to consecutive periods.
    pub fn comparisons(&self) -> Vec<Comparison> {
        if !self.stats.ttest.is_empty() {
            return self.stats.ttest.clone();
        }
        self.periods
            .windows(2)
            .map(|w| Comparison {
                greater: w[1].name.clone(),
                lesser: w[0].name.clone(),
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed precedence: command-line flag, then environment, then config file.
pub fn resolve_seed(cfg_seed: u64, flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{SEED_ENV}: not an unsigned integer: {v:?}"))),
        Err(_) => Ok(cfg_seed),
    }
}
