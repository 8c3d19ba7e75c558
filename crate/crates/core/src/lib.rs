//! Systemic-risk analysis of default-probability panels: partial-correlation
//! networks, CoRisk contagion measures, CoRisk-distance spanning trees with
//! centrality analysis, and a dynamic latent position model fitted by
//! simulated annealing.

pub mod corisk;
pub mod error;
pub mod ingest;
pub mod lpm;
pub mod netmetrics;
pub mod pcorr;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
