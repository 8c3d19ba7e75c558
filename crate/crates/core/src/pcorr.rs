//! Partial correlation networks.
//!
//! Partial correlations come from the inverse of the (optionally ridged)
//! Pearson correlation matrix: `rho_ij|S = -p_ij / sqrt(p_ii p_jj)`.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrMatrix {
    pub rho: DMatrix<f64>,
    pub n_obs: usize,
    pub significant: Option<DMatrix<bool>>,
}

impl PartialCorrMatrix {
    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    pub fn mask(&self) -> Result<&DMatrix<bool>> {
        self.significant.as_ref().ok_or(Error::MaskUnset)
    }

    /// Number of significant unordered pairs.
    pub fn significant_pairs(&self) -> Result<usize> {
        let m = self.mask()?;
        let n = m.nrows();
        Ok((0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)])
            .count())
    }

    pub fn to_json(&self, tickers: &[String]) -> PartialCorrJson {
        let n = self.n();
        PartialCorrJson {
            tickers: tickers.to_vec(),
            rho: rows(&self.rho),
            significant: self.significant.as_ref().map(|m| {
                (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)]).collect())
                    .collect()
            }),
            n_obs: self.n_obs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialCorrJson {
    pub tickers: Vec<String>,
    pub rho: Vec<Vec<f64>>,
    pub significant: Option<Vec<Vec<bool>>>,
    pub n_obs: usize,
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Pearson correlation of the columns of `y` (rows are observations).
pub fn correlation_matrix(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = y.shape();
    if n < 3 {
        return Err(Error::TooSmall {
            what: "rows",
            needed: 3,
            found: n,
        });
    }
    let mut centred = y.clone();
    let mut scale = vec![0.0; p];
    for j in 0..p {
        let mut col = centred.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        let max_abs = y.column(j).amax().max(1.0);
        if ss.sqrt() <= 1e-12 * max_abs * (n as f64).sqrt() {
            return Err(Error::ConstantColumn { column: j });
        }
        scale[j] = ss.sqrt();
    }
    let mut r = centred.transpose() * &centred;
    for i in 0..p {
        for j in 0..p {
            r[(i, j)] /= scale[i] * scale[j];
        }
    }
    symmetrize(&mut r);
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..p {
            r[(i, j)] = r[(i, j)].clamp(-1.0, 1.0);
        }
    }
    Ok(r)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Partial correlations from a correlation matrix and its sample size.
pub fn partial_from_correlation(
    corr: &DMatrix<f64>,
    n_obs: usize,
    ridge: f64,
) -> Result<PartialCorrMatrix> {
    if ridge.is_nan() || ridge < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let p = corr.nrows();
    let mut a = corr.clone();
    for i in 0..p {
        a[(i, i)] += ridge;
    }
    let chol = a.cholesky().ok_or(Error::SingularMatrix)?;
    // condition guard: cholesky succeeds on numerically singular matrices
    let diag_min = (0..p)
        .map(|i| chol.l_dirty()[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if diag_min < 1e-7 {
        return Err(Error::SingularMatrix);
    }
    let prec = chol.inverse();
    let mut rho = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            rho[(i, j)] = if i == j {
                1.0
            } else {
                (-prec[(i, j)] / (prec[(i, i)] * prec[(j, j)]).sqrt()).clamp(-1.0, 1.0)
            };
        }
    }
    symmetrize(&mut rho);
    Ok(PartialCorrMatrix {
        rho,
        n_obs,
        significant: None,
    })
}

/// Partial correlation matrix of the columns of `y`; `ridge` is added to the
/// diagonal of the correlation matrix before inversion.
pub fn partial_correlation(y: &DMatrix<f64>, ridge: f64) -> Result<PartialCorrMatrix> {
    let corr = correlation_matrix(y)?;
    partial_from_correlation(&corr, y.nrows(), ridge)
}

/// Two-sided p-value of a partial correlation with `df = n_obs - N` degrees
/// of freedom (`n - 2` less the `N - 2` conditioning variables).
pub fn partial_p_value(rho: f64, df: f64) -> f64 {
    let r2 = rho * rho;
    if r2 >= 1.0 {
        return 0.0;
    }
    let t = rho.abs() * (df / (1.0 - r2)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

pub fn significance_mask(pc: &PartialCorrMatrix, alpha: f64) -> Result<PartialCorrMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha out of (0,1): {alpha}")));
    }
    let n = pc.n();
    let df = pc.n_obs as i64 - n as i64;
    if df <= 0 {
        return Err(Error::NonPositiveDf { df });
    }
    let df = df as f64;
    let mut mask = DMatrix::from_element(n, n, false);
    for i in 0..n {
        for j in i + 1..n {
            let sig = partial_p_value(pc.rho[(i, j)], df) < alpha;
            mask[(i, j)] = sig;
            mask[(j, i)] = sig;
        }
    }
    Ok(PartialCorrMatrix {
        significant: Some(mask),
        ..pc.clone()
    })
}

/// Undirected binary graph from thresholding |rho|.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencySnapshot {
    pub x: DMatrix<bool>,
    pub threshold: f64,
}

impl AdjacencySnapshot {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| (i + 1..n).filter(|&j| self.x[(i, j)]).count())
            .sum()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.x[(i, j)])
    }
}

pub fn adjacency(pc: &PartialCorrMatrix, threshold: f64) -> Result<AdjacencySnapshot> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let n = pc.n();
    let x = DMatrix::from_fn(n, n, |i, j| i != j && pc.rho[(i, j)].abs() > threshold);
    Ok(AdjacencySnapshot { x, threshold })
}

pub fn density(adj: &AdjacencySnapshot) -> f64 {
    let n = adj.n();
    adj.edge_count() as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identical_and_negated_columns() {
        let mut y = sample(20, 3, 1);
        y.set_column(1, &y.column(0).clone_owned());
        let neg = -y.column(0).clone_owned();
        y.set_column(2, &neg);
        let r = correlation_matrix(&y).unwrap();
        assert!((r[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((r[(0, 2)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_named() {
        let mut y = sample(10, 3, 2);
        y.column_mut(2).fill(0.3);
        assert!(matches!(
            correlation_matrix(&y),
            Err(Error::ConstantColumn { column: 2 })
        ));
    }

    #[test]
    fn correlation_matches_covariance_ratio() {
        let y = sample(50, 3, 3);
        let r = correlation_matrix(&y).unwrap();
        let n = y.nrows() as f64;
        let mean = |j: usize| y.column(j).sum() / n;
        let cov = |a: usize, b: usize| {
            let (ma, mb) = (mean(a), mean(b));
            (0..y.nrows())
                .map(|k| (y[(k, a)] - ma) * (y[(k, b)] - mb))
                .sum::<f64>()
                / (n - 1.0)
        };
        for a in 0..3 {
            for b in 0..3 {
                let want = cov(a, b) / (cov(a, a) * cov(b, b)).sqrt();
                assert!((r[(a, b)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equicorrelated_three() {
        let corr = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let pc = partial_from_correlation(&corr, 100, 0.0).unwrap();
        // (r - r^2) / (1 - r^2) = r / (1 + r)
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((pc.rho[(i, j)] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_gives_zero_partials() {
        let pc = partial_from_correlation(&DMatrix::identity(4, 4), 10, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(pc.rho[(i, j)], want);
            }
        }
    }

    // Residual-correlation oracle: regress i and j on the other columns, correlate residuals.
    fn residual_partial(y: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        let (n, p) = y.shape();
        let others: Vec<usize> = (0..p).filter(|&k| k != i && k != j).collect();
        let mut design = DMatrix::from_element(n, others.len() + 1, 1.0);
        for (c, &k) in others.iter().enumerate() {
            design.set_column(c + 1, &y.column(k));
        }
        let resid = |col: usize| {
            let target = y.column(col).clone_owned();
            let beta = design
                .clone()
                .svd(true, true)
                .solve(&target, 1e-14)
                .unwrap();
            target - &design * beta
        };
        let (ri, rj) = (resid(i), resid(j));
        ri.dot(&rj) / (ri.norm() * rj.norm())
    }

    #[test]
    fn matches_regression_residual_oracle() {
        let base = sample(200, 5, 4);
        // induce dependence
        let mix = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                1.0
            } else if j < i {
                0.4
            } else {
                0.0
            }
        });
        let y = base * mix;
        let pc = partial_correlation(&y, 0.0).unwrap();
        for i in 0..5 {
            for j in i + 1..5 {
                let want = residual_partial(&y, i, j);
                assert!((pc.rho[(i, j)] - want).abs() < 1e-8, "{i},{j}");
            }
        }
    }

    #[test]
    fn singular_without_ridge() {
        let mut y = sample(30, 3, 5);
        let s = y.column(0) + y.column(1);
        y.set_column(2, &s);
        assert!(matches!(
            partial_correlation(&y, 0.0),
            Err(Error::SingularMatrix)
        ));
        assert!(partial_correlation(&y, 0.1).is_ok());
    }

    #[test]
    fn significance_cases() {
        let mut rho = DMatrix::identity(5, 5);
        rho[(0, 1)] = 0.99;
        rho[(1, 0)] = 0.99;
        let pc = PartialCorrMatrix {
            rho,
            n_obs: 100,
            significant: None,
        };
        let m = significance_mask(&pc, 0.05).unwrap();
        let mask = m.mask().unwrap();
        assert!(mask[(0, 1)] && mask[(1, 0)]);
        assert!(!mask[(2, 3)]);
        assert!((0..5).all(|i| !mask[(i, i)]));
        assert_eq!(m.significant_pairs().unwrap(), 1);

        let small = PartialCorrMatrix { n_obs: 5, ..pc };
        assert!(matches!(
            significance_mask(&small, 0.05),
            Err(Error::NonPositiveDf { df: 0 })
        ));
    }

    #[test]
    fn zero_rho_p_value_is_one() {
        assert!((partial_p_value(0.0, 50.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjacency_rules() {
        let mut rho = DMatrix::identity(3, 3);
        rho[(0, 1)] = 0.09;
        rho[(1, 0)] = 0.09;
        rho[(0, 2)] = -0.3;
        rho[(2, 0)] = -0.3;
        let pc = PartialCorrMatrix {
            rho,
            n_obs: 10,
            significant: None,
        };
        let a = adjacency(&pc, 0.1).unwrap();
        assert!(!a.x[(0, 1)]);
        assert!(a.x[(0, 2)] && a.x[(2, 0)]);
        assert!(!a.x[(0, 0)]);
        let err = adjacency(&pc, 1.5).unwrap_err();
        assert!(err.to_string().contains("threshold out of (0,1)"));
    }

    #[test]
    fn density_values() {
        let full = AdjacencySnapshot {
            x: DMatrix::from_fn(4, 4, |i, j| i != j),
            threshold: 0.1,
        };
        assert_eq!(density(&full), 1.0);
        let empty = AdjacencySnapshot {
            x: DMatrix::from_element(4, 4, false),
            threshold: 0.1,
        };
        assert_eq!(density(&empty), 0.0);
        let mut x = DMatrix::from_element(31, 31, false);
        let mut placed = 0;
        'outer: for i in 0..31 {
            for j in i + 1..31 {
                if placed == 232 {
                    break 'outer;
                }
                x[(i, j)] = true;
                x[(j, i)] = true;
                placed += 1;
            }
        }
        let g = AdjacencySnapshot { x, threshold: 0.1 };
        assert!((density(&g) - 232.0 / 465.0).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn partials_bounded_and_symmetric(seed in 0u64..500) {
            let y = sample(40, 6, seed);
            let pc = partial_correlation(&y, 0.0).unwrap();
            for i in 0..6 {
                proptest::prop_assert_eq!(pc.rho[(i, i)], 1.0);
                for j in 0..6 {
                    proptest::prop_assert_eq!(pc.rho[(i, j)], pc.rho[(j, i)]);
                    proptest::prop_assert!(pc.rho[(i, j)].abs() <= 1.0);
                }
            }
        }

        #[test]
        fn adjacency_monotone_in_threshold(seed in 0u64..200, lo in 0.01f64..0.5, gap in 0.0f64..0.4) {
            let pc = partial_correlation(&sample(40, 6, seed), 0.0).unwrap();
            let a = adjacency(&pc, lo).unwrap();
            let b = adjacency(&pc, lo + gap).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    proptest::prop_assert!(!b.x[(i, j)] || a.x[(i, j)]);
                }
            }
        }
    }
}
