//! Seeded synthetic data: sparse-precision Gaussians, a two-cluster latent
//! space instance, and the bundled bank panel.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{default_periods, CountryEntry, CountryMap, Institution, PanelSeries};
use crate::lpm::{distance, LatentConfiguration};
use crate::seed;

/// Random sparse precision matrix: each pair is an edge with probability
/// `p_edge`, off-diagonals are `±U(lo, hi)`, and each diagonal entry is the
/// row's absolute off-diagonal sum plus `margin` (strict diagonal dominance).
pub fn sparse_precision(
    n: usize,
    p_edge: f64,
    lo: f64,
    hi: f64,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_edge) {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let v = sign * rng.random_range(lo..hi);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| p[(i, j)].abs()).sum();
        p[(i, i)] = s + margin;
    }
    p
}

/// Draw `n_obs` rows from `N(0, precision^{-1})`.
pub fn sample_from_precision(
    precision: &DMatrix<f64>,
    n_obs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let n = precision.nrows();
    let chol = precision.clone().cholesky().ok_or(Error::SingularMatrix)?;
    // P = L L^T, so x = L^{-T} e has covariance P^{-1}
    let lt = chol.l().transpose();
    let e = DMatrix::from_fn(n, n_obs, |_, _| StandardNormal.sample(rng));
    let x = lt.solve_upper_triangular(&e).ok_or(Error::SingularMatrix)?;
    Ok(x.transpose())
}

/// True partial correlations implied by a precision matrix.
pub fn precision_partials(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            -p[(i, j)] / (p[(i, i)] * p[(j, j)]).sqrt()
        }
    })
}

/// Two-cluster latent space test instance.
#[derive(Debug, Clone)]
pub struct TwoClusterInstance {
    /// N x T responses.
    pub y: DMatrix<f64>,
    pub x: Vec<DMatrix<bool>>,
    /// Cluster label per node (0 or 1).
    pub labels: Vec<usize>,
}

/// `n` nodes split evenly into two clusters with responses `-8 ± 0.1` and
/// `-2 ± 0.1`; edges appear independently per period with probability
/// `p_in` inside a cluster and `p_out` across.
pub fn two_cluster(
    n: usize,
    periods: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> TwoClusterInstance {
    let mut rng = seed::rng(seed::derive(seed, "two-cluster"));
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    let centre = [-8.0, -2.0];
    let y = DMatrix::from_fn(n, periods, |i, _| {
        centre[labels[i]] + rng.random_range(-0.1..=0.1)
    });
    let x = (0..periods)
        .map(|_| {
            let mut m = DMatrix::from_element(n, n, false);
            for i in 0..n {
                for j in i + 1..n {
                    let p = if labels[i] == labels[j] { p_in } else { p_out };
                    let e = rng.random_bool(p);
                    m[(i, j)] = e;
                    m[(j, i)] = e;
                }
            }
            m
        })
        .collect();
    TwoClusterInstance { y, x, labels }
}

/// Mean latent distance between clusters divided by mean distance within,
/// pooling same-period pairs over all periods.
pub fn cluster_distance_ratio(cfg: &LatentConfiguration, labels: &[usize]) -> f64 {
    let (mut inter, mut ni, mut intra, mut na) = (0.0, 0usize, 0.0, 0usize);
    for t in 0..cfg.periods() {
        for i in 0..cfg.n() {
            for j in i + 1..cfg.n() {
                let d = distance(cfg.z(i, t), cfg.z(j, t));
                if labels[i] == labels[j] {
                    intra += d;
                    na += 1;
                } else {
                    inter += d;
                    ni += 1;
                }
            }
        }
    }
    (inter / ni as f64) / (intra / na as f64)
}

const COUNTRIES: [(&str, usize); 12] = [
    ("AT", 1),
    ("BE", 1),
    ("CH", 2),
    ("DE", 3),
    ("DK", 2),
    ("ES", 3),
    ("FR", 4),
    ("GB", 5),
    ("IE", 1),
    ("IT", 4),
    ("NL", 2),
    ("SE", 3),
];

/// Per-period (mean log PD, edge probability, innovation scale).
const REGIMES: [(f64, f64, f64); 4] = [
    (-7.0, 0.08, 0.04),
    (-4.8, 0.2, 0.08),
    (-4.3, 0.25, 0.07),
    (-5.6, 0.12, 0.05),
];

const AR_PHI: f64 = 0.6;

fn business_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// The bundled demonstration panel: 31 banks in 12 countries, business days
/// over the four default periods. Log PDs follow a per-bank offset plus a
/// regime mean and an AR(1) whose innovations are drawn from a regime-specific
/// sparse precision matrix.
pub fn bundled_panel(seed: u64) -> Result<(PanelSeries, CountryMap)> {
    let periods = default_periods();
    let mut institutions = Vec::new();
    let mut countries = CountryMap::new();
    for (code, count) in COUNTRIES {
        for k in 1..=count {
            let ticker = format!("{code}{k:02}");
            let name = format!("Synthetic Bank {code}{k:02}");
            countries.insert(
                ticker.clone(),
                CountryEntry {
                    country: code.to_string(),
                    name: Some(name.clone()),
                },
            );
            let mut inst = Institution::new(ticker);
            inst.name = name;
            inst.country = Some(code.to_string());
            institutions.push(inst);
        }
    }
    let n = institutions.len();
    let mut rng = seed::rng(seed::derive(seed, "bundled-panel"));
    let offsets: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.5 * z
        })
        .collect();
    let mut dates = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut state = vec![0.0; n];
    for (period, &(mean, p_edge, scale)) in periods.iter().zip(REGIMES.iter()) {
        let days = business_days(period.start, period.end);
        let precision = sparse_precision(n, p_edge, 0.3, 0.6, 0.5, &mut rng);
        let innovations = sample_from_precision(&precision, days.len(), &mut rng)?;
        for (r, d) in days.iter().enumerate() {
            for i in 0..n {
                state[i] = AR_PHI * state[i] + scale * innovations[(r, i)];
                let pd = (mean + offsets[i] + state[i]).exp().clamp(1e-6, 1.0);
                // six significant digits keep the CSV compact and round-trip exactly
                rows.push(format!("{pd:.5e}").parse().expect("formatted float"));
            }
            dates.push(*d);
        }
    }
    let values = DMatrix::from_row_slice(dates.len(), n, &rows);
    Ok((PanelSeries::new(dates, institutions, values)?, countries))
}
