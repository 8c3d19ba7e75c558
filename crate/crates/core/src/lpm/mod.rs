//! Dynamic latent position model for node-level log default probabilities.
//!
//! Each institution `i` has a position `z_i(t)` in the plane for every period
//! `t`. Conditionally on the positions and the period graphs `x(t)`, the log
//! PD `y_i(t)` is Gaussian around the similarity-weighted mean of its graph
//! neighbours, with similarity `eta_ij = 1 / distance`. Positions carry a
//! Gaussian random-walk prior across periods. The fit maximises the
//! pseudo-posterior (product of full conditionals times the prior) by
//! simulated annealing; see [`anneal`].

mod anneal;

pub use anneal::{anneal, AnnealResult, AnnealSchedule, Annealer, FitJson, IncrementalObjective};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor added to latent distances so that `eta` stays finite.
pub const DISTANCE_FLOOR: f64 = 1e-6;
/// Guard added to the full-conditional precision of every node.
pub const CONDITIONAL_EPS: f64 = 0.001;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Similarity between two latent positions.
pub fn eta(a: Point, b: Point) -> f64 {
    1.0 / (distance(a, b) + DISTANCE_FLOOR)
}

/// Log density of `N(mean, var)` at `x`.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

/// Log density of the standard bivariate normal centred at `mean`.
pub fn log_normal2_pdf(z: Point, mean: Point) -> f64 {
    let (dx, dy) = (z[0] - mean[0], z[1] - mean[1]);
    -LN_2PI - 0.5 * (dx * dx + dy * dy)
}

/// Observed data plus latent positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfiguration {
    /// N x T log default probabilities.
    y: DMatrix<f64>,
    /// One symmetric N x N adjacency per period.
    x: Vec<DMatrix<bool>>,
    /// Positions, period-major: `z[t * n + i]`.
    z: Vec<Point>,
    neighbours: Vec<Vec<Vec<usize>>>,
}

impl LatentConfiguration {
    pub fn new(y: DMatrix<f64>, x: Vec<DMatrix<bool>>, z: Vec<Point>) -> Result<Self> {
        let (n, t) = y.shape();
        if n < 1 || t < 1 {
            return Err(Error::Dimension("y must be at least 1x1".into()));
        }
        if x.len() != t {
            return Err(Error::Dimension(format!(
                "{} adjacency slices for {t} periods",
                x.len()
            )));
        }
        if z.len() != n * t {
            return Err(Error::Dimension(format!(
                "{} positions for {n}x{t}",
                z.len()
            )));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite y value {v}")));
        }
        if z.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite latent coordinate".into()));
        }
        let mut neighbours = Vec::with_capacity(t);
        for (s, xs) in x.iter().enumerate() {
            if xs.shape() != (n, n) {
                return Err(Error::Dimension(format!("adjacency {s} is not {n}x{n}")));
            }
            for i in 0..n {
                if xs[(i, i)] {
                    return Err(Error::InvalidInput(format!(
                        "self-loop at node {i}, period {s}"
                    )));
                }
                for j in i + 1..n {
                    if xs[(i, j)] != xs[(j, i)] {
                        return Err(Error::InvalidInput(format!(
                            "adjacency {s} not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
            neighbours.push(
                (0..n)
                    .map(|i| (0..n).filter(|&j| xs[(i, j)]).collect())
                    .collect(),
            );
        }
        Ok(LatentConfiguration {
            y,
            x,
            z,
            neighbours,
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn periods(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.y[(i, t)]
    }

    pub fn y_matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn adjacency(&self) -> &[DMatrix<bool>] {
        &self.x
    }

    pub fn z(&self, i: usize, t: usize) -> Point {
        self.z[t * self.n() + i]
    }

    pub fn set_z(&mut self, i: usize, t: usize, p: Point) {
        let n = self.n();
        self.z[t * n + i] = p;
    }

    pub fn positions(&self) -> &[Point] {
        &self.z
    }

    /// Positions grouped by period: `out[t][i]`.
    pub fn positions_by_period(&self) -> Vec<Vec<Point>> {
        self.z.chunks(self.n()).map(|c| c.to_vec()).collect()
    }

    pub fn neighbours(&self, i: usize, t: usize) -> &[usize] {
        &self.neighbours[t][i]
    }
}

/// Mean and variance of the full conditional of `y_i(t)`, with `eps` added to
/// the precision.
pub fn full_conditional_params_eps(
    cfg: &LatentConfiguration,
    i: usize,
    t: usize,
    eps: f64,
) -> (f64, f64) {
    let zi = cfg.z(i, t);
    let (mut a, mut b) = (0.0, 0.0);
    for &j in cfg.neighbours(i, t) {
        let e = eta(zi, cfg.z(j, t));
        a += e;
        b += e * cfg.y(j, t);
    }
    (b / (a + eps), 1.0 / (a + eps))
}

pub fn full_conditional_params(cfg: &LatentConfiguration, i: usize, t: usize) -> (f64, f64) {
    full_conditional_params_eps(cfg, i, t, CONDITIONAL_EPS)
}

/// Log of the product of all full conditionals.
pub fn log_pseudo_likelihood(cfg: &LatentConfiguration) -> f64 {
    let mut total = 0.0;
    for t in 0..cfg.periods() {
        for i in 0..cfg.n() {
            let (mu, nu) = full_conditional_params(cfg, i, t);
            total += log_normal_pdf(cfg.y(i, t), mu, nu);
        }
    }
    total
}

/// Standard normal on first-period positions, standard normal innovations after.
pub fn log_prior(cfg: &LatentConfiguration) -> f64 {
    let mut total = 0.0;
    for t in 0..cfg.periods() {
        for i in 0..cfg.n() {
            let mean = if t == 0 { [0.0, 0.0] } else { cfg.z(i, t - 1) };
            total += log_normal2_pdf(cfg.z(i, t), mean);
        }
    }
    total
}

pub fn log_pseudo_posterior(cfg: &LatentConfiguration) -> f64 {
    log_pseudo_likelihood(cfg) + log_prior(cfg)
}

/// Latent systemic-risk index: inverse mean latent distance to graph
/// neighbours, `values[(i, t)]`; zero for isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskIndex {
    pub values: DMatrix<f64>,
}

pub fn risk_index(cfg: &LatentConfiguration) -> RiskIndex {
    let (n, periods) = (cfg.n(), cfg.periods());
    let values = DMatrix::from_fn(n, periods, |i, t| {
        let nb = cfg.neighbours(i, t);
        if nb.is_empty() {
            return 0.0;
        }
        let zi = cfg.z(i, t);
        let mean = nb.iter().map(|&j| distance(zi, cfg.z(j, t))).sum::<f64>() / nb.len() as f64;
        1.0 / (mean + DISTANCE_FLOOR)
    });
    RiskIndex { values }
}

/// How a period's daily log PDs collapse to one value per institution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodAggregate {
    #[default]
    Mean,
    Last,
}

/// Build the N x T response matrix from per-period log-PD matrices
/// (rows = dates, columns = institutions).
pub fn period_response(per_period: &[DMatrix<f64>], agg: PeriodAggregate) -> Result<DMatrix<f64>> {
    let Some(first) = per_period.first() else {
        return Err(Error::Dimension("no periods".into()));
    };
    let n = first.ncols();
    let mut y = DMatrix::zeros(n, per_period.len());
    for (t, m) in per_period.iter().enumerate() {
        if m.ncols() != n || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "period {t} has shape {:?}",
                m.shape()
            )));
        }
        for i in 0..n {
            y[(i, t)] = match agg {
                PeriodAggregate::Mean => m.column(i).mean(),
                PeriodAggregate::Last => m[(m.nrows() - 1, i)],
            };
        }
    }
    Ok(y)
}

/// Rigidly align `target` onto `reference` (rotation, optional reflection and
/// translation) by least squares. For comparing separate runs only.
pub fn procrustes_align(reference: &[Point], target: &[Point]) -> Result<Vec<Point>> {
    if reference.len() != target.len() || reference.is_empty() {
        return Err(Error::Dimension(
            "point sets must be non-empty and equal length".into(),
        ));
    }
    let centre = |pts: &[Point]| {
        let k = pts.len() as f64;
        [
            pts.iter().map(|p| p[0]).sum::<f64>() / k,
            pts.iter().map(|p| p[1]).sum::<f64>() / k,
        ]
    };
    let (cr, ct) = (centre(reference), centre(target));
    let mut best: Option<(f64, Vec<Point>)> = None;
    for flip in [1.0, -1.0] {
        // target reflected across the x-axis when flip = -1
        let tc: Vec<Point> = target
            .iter()
            .map(|p| [p[0] - ct[0], flip * (p[1] - ct[1])])
            .collect();
        let (mut dot, mut cross) = (0.0, 0.0);
        for (a, r) in tc.iter().zip(reference) {
            let r = [r[0] - cr[0], r[1] - cr[1]];
            dot += a[0] * r[0] + a[1] * r[1];
            cross += a[0] * r[1] - a[1] * r[0];
        }
        let theta = cross.atan2(dot);
        let (s, c) = theta.sin_cos();
        let aligned: Vec<Point> = tc
            .iter()
            .map(|a| [c * a[0] - s * a[1] + cr[0], s * a[0] + c * a[1] + cr[1]])
            .collect();
        let sse: f64 = aligned
            .iter()
            .zip(reference)
            .map(|(a, r)| (a[0] - r[0]).powi(2) + (a[1] - r[1]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, aligned));
        }
    }
    Ok(best.expect("two candidates").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg_pair(y: [f64; 2], d: f64) -> LatentConfiguration {
        LatentConfiguration::new(
            DMatrix::from_column_slice(2, 1, &y),
            vec![DMatrix::from_fn(2, 2, |i, j| i != j)],
            vec![[0.0, 0.0], [d, 0.0]],
        )
        .unwrap()
    }

    pub(crate) fn random_cfg(
        n: usize,
        periods: usize,
        p_edge: f64,
        seed: u64,
    ) -> LatentConfiguration {
        let mut rng = crate::seed::rng(seed);
        let y = DMatrix::from_fn(n, periods, |_, _| -5.0 + rng.random_range(-2.0..2.0));
        let x = (0..periods)
            .map(|_| {
                let mut m = DMatrix::from_element(n, n, false);
                for i in 0..n {
                    for j in i + 1..n {
                        let e = rng.random_bool(p_edge);
                        m[(i, j)] = e;
                        m[(j, i)] = e;
                    }
                }
                m
            })
            .collect();
        let z = (0..n * periods)
            .map(|_| {
                [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        LatentConfiguration::new(y, x, z).unwrap()
    }

    #[test]
    fn eta_values() {
        assert!((eta([0.0, 0.0], [3.0, 4.0]) - 1.0 / (5.0 + 1e-6)).abs() < 1e-15);
        assert!((eta([0.0, 0.0], [3.0, 4.0]) - 0.19999996).abs() < 1e-8);
        assert!((eta([1.0, 1.0], [1.0, 1.0]) - 1e6).abs() < 1e-6);
        assert!((eta([0.0, 0.0], [1.0, 0.0]) - 0.999999).abs() < 1e-9);
    }

    #[test]
    fn conditional_one_neighbour() {
        // eta = 2 at distance 0.5 - floor
        let cfg = cfg_pair([0.0, 3.0], 0.5 - DISTANCE_FLOOR);
        let (mu, nu) = full_conditional_params(&cfg, 0, 0);
        assert!((mu - 6.0 / 2.001).abs() < 1e-9);
        assert!((nu - 1.0 / 2.001).abs() < 1e-9);
    }

    #[test]
    fn conditional_isolated() {
        let cfg = LatentConfiguration::new(
            DMatrix::from_column_slice(2, 1, &[-4.0, -3.0]),
            vec![DMatrix::from_element(2, 2, false)],
            vec![[0.0, 0.0], [1.0, 0.0]],
        )
        .unwrap();
        let (mu, nu) = full_conditional_params(&cfg, 0, 0);
        assert_eq!(mu, 0.0);
        assert!((nu - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn conditional_two_neighbours() {
        // node 0 at origin, neighbours at unit distance (minus floor) with y = 1 and 3
        let cfg = LatentConfiguration::new(
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0]),
            vec![DMatrix::from_fn(3, 3, |i, j| (i == 0) ^ (j == 0))],
            vec![
                [0.0, 0.0],
                [1.0 - DISTANCE_FLOOR, 0.0],
                [0.0, 1.0 - DISTANCE_FLOOR],
            ],
        )
        .unwrap();
        let (mu, _) = full_conditional_params(&cfg, 0, 0);
        assert!((mu - 4.0 / 2.001).abs() < 1e-9);
        let (mu0, _) = full_conditional_params_eps(&cfg, 0, 0, 0.0);
        assert!((mu0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_likelihood_pair() {
        let cfg = cfg_pair([0.0, 0.0], 1.0 - DISTANCE_FLOOR);
        let want = 2.0 * -0.5 * (2.0 * std::f64::consts::PI / 1.001).ln();
        assert!((log_pseudo_likelihood(&cfg) - want).abs() < 1e-9);
        assert!((want - -1.83688).abs() < 1e-5);
    }

    #[test]
    fn closer_neighbours_raise_density_at_mode() {
        // y = 0 keeps the mode exact despite eps
        let far = cfg_pair([0.0, 0.0], 1.0);
        let near = cfg_pair([0.0, 0.0], 0.5);
        assert!(log_pseudo_likelihood(&near) > log_pseudo_likelihood(&far));
    }

    // naive triple loop over t, i, j without neighbour lists
    fn naive_likelihood(cfg: &LatentConfiguration) -> f64 {
        let mut total = 0.0;
        for t in 0..cfg.periods() {
            for i in 0..cfg.n() {
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..cfg.n() {
                    if cfg.adjacency()[t][(i, j)] {
                        let d = ((cfg.z(i, t)[0] - cfg.z(j, t)[0]).powi(2)
                            + (cfg.z(i, t)[1] - cfg.z(j, t)[1]).powi(2))
                        .sqrt();
                        let e = 1.0 / (d + 1e-6);
                        a += e;
                        b += e * cfg.y(j, t);
                    }
                }
                let prec = a + 0.001;
                let mu = b / prec;
                total += 0.5 * (prec / (2.0 * std::f64::consts::PI)).ln()
                    - 0.5 * prec * (cfg.y(i, t) - mu).powi(2);
            }
        }
        total
    }

    #[test]
    fn pseudo_likelihood_matches_naive() {
        for seed in 0..10 {
            let cfg = random_cfg(8, 3, 0.5, seed);
            assert!(
                (log_pseudo_likelihood(&cfg) - naive_likelihood(&cfg)).abs()
                    < 1e-12 * naive_likelihood(&cfg).abs().max(1.0)
            );
        }
    }

    #[test]
    fn prior_values() {
        let one = LatentConfiguration::new(
            DMatrix::from_element(1, 1, 0.0),
            vec![DMatrix::from_element(1, 1, false)],
            vec![[0.0, 0.0]],
        )
        .unwrap();
        assert!((log_prior(&one) + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        let two = LatentConfiguration::new(
            DMatrix::from_element(1, 2, 0.0),
            vec![DMatrix::from_element(1, 1, false); 2],
            vec![[0.0, 0.0], [0.0, 0.0]],
        )
        .unwrap();
        assert!((log_prior(&two) + 2.0 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        let mut moved = two.clone();
        moved.set_z(0, 1, [0.3, -0.1]);
        assert!(log_prior(&moved) < log_prior(&two));
    }

    #[test]
    fn posterior_is_sum() {
        let cfg = random_cfg(6, 2, 0.5, 3);
        assert_eq!(
            log_pseudo_posterior(&cfg),
            log_pseudo_likelihood(&cfg) + log_prior(&cfg)
        );
    }

    #[test]
    fn posterior_permutation_invariant() {
        let cfg = random_cfg(7, 3, 0.5, 4);
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let n = 7;
        let y = DMatrix::from_fn(n, 3, |i, t| cfg.y(perm[i], t));
        let x = cfg
            .adjacency()
            .iter()
            .map(|m| DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]))
            .collect();
        let z = (0..3)
            .flat_map(|t| (0..n).map(move |i| (i, t)))
            .map(|(i, t)| cfg.z(perm[i], t))
            .collect();
        let relabelled = LatentConfiguration::new(y, x, z).unwrap();
        assert!((log_pseudo_posterior(&cfg) - log_pseudo_posterior(&relabelled)).abs() < 1e-10);
    }

    #[test]
    fn risk_index_cases() {
        let cfg = LatentConfiguration::new(
            DMatrix::from_element(4, 1, -5.0),
            vec![DMatrix::from_fn(4, 4, |i, j| {
                i != j && (i == 0 || j == 0) && i.max(j) < 3
            })],
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [9.0, 9.0]],
        )
        .unwrap();
        let r = risk_index(&cfg);
        assert!((r.values[(0, 0)] - 0.5).abs() < 1e-6);
        assert_eq!(r.values[(3, 0)], 0.0);

        let tight = LatentConfiguration::new(
            DMatrix::from_element(3, 1, -5.0),
            vec![DMatrix::from_fn(3, 3, |i, j| (i == 0) ^ (j == 0))],
            vec![[0.0, 0.0], [0.1, 0.0], [0.0, -0.1]],
        )
        .unwrap();
        assert!((risk_index(&tight).values[(0, 0)] - 10.0).abs() < 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn risk_index_rigid_invariance(seed in 0u64..200, angle in 0.0f64..std::f64::consts::TAU, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
            let cfg = random_cfg(6, 2, 0.6, seed);
            let (s, c) = angle.sin_cos();
            let z: Vec<Point> = cfg.positions().iter().map(|p| [c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy]).collect();
            let moved = LatentConfiguration::new(cfg.y_matrix().clone(), cfg.adjacency().to_vec(), z).unwrap();
            let (a, b) = (risk_index(&cfg), risk_index(&moved));
            for (u, v) in a.values.iter().zip(b.values.iter()) {
                proptest::prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_asymmetric_adjacency() {
        let mut x = DMatrix::from_element(2, 2, false);
        x[(0, 1)] = true;
        assert!(
            LatentConfiguration::new(DMatrix::zeros(2, 1), vec![x], vec![[0.0; 2]; 2]).is_err()
        );
    }

    #[test]
    fn period_response_modes() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, -3.0, -4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[-5.0, -6.0]);
        let mean = period_response(&[a.clone(), b.clone()], PeriodAggregate::Mean).unwrap();
        assert_eq!(mean[(0, 0)], -2.0);
        assert_eq!(mean[(1, 0)], -3.0);
        assert_eq!(mean[(1, 1)], -6.0);
        let last = period_response(&[a, b], PeriodAggregate::Last).unwrap();
        assert_eq!(last[(0, 0)], -3.0);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let reference: Vec<Point> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [-1.0, 1.5]];
        let (s, c) = 0.7f64.sin_cos();
        let target: Vec<Point> = reference
            .iter()
            .map(|p| [c * p[0] - s * p[1] + 3.0, -(s * p[0] + c * p[1]) - 1.0])
            .collect();
        let aligned = procrustes_align(&reference, &target).unwrap();
        for (a, r) in aligned.iter().zip(&reference) {
            assert!((a[0] - r[0]).abs() < 1e-12 && (a[1] - r[1]).abs() < 1e-12);
        }
    }
}
