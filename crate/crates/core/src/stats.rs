//! One-sided paired t-tests and bootstrap tests for an increase in Kendall's tau.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 200;

/// Direction of a one-sided test. `Greater` means the first sample (or the
/// post period) is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    #[default]
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    pub alternative: Alternative,
    pub alpha: f64,
    pub decision: bool,
    pub seed: Option<u64>,
}

fn one_sided_p(t: f64, df: f64, alt: Alternative) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    let p = match alt {
        Alternative::Greater => dist.sf(t),
        Alternative::Less => dist.cdf(t),
    };
    p.clamp(0.0, 1.0)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha out of (0,1): {alpha}")))
    }
}

/// Paired t-test on `d = a - b`, df = n - 1.
pub fn paired_t_test(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::TooSmall {
            what: "pairs",
            needed: 2,
            found: a.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite paired difference".into()));
    }
    let (m, var) = mean_var(&d);
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "paired differences have zero variance".into(),
        ));
    }
    let n = d.len() as f64;
    let t = m / (var / n).sqrt();
    let p = one_sided_p(t, n - 1.0, alternative);
    Ok(TestResult {
        test: "paired_t".into(),
        statistic: t,
        p_value: p,
        df: Some(n - 1.0),
        resamples: None,
        alternative,
        alpha,
        decision: p < alpha,
        seed: None,
    })
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite inputs")
}

fn tie_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

// stable merge sort on y, returning the number of inversions
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b by Knight's O(n log n) algorithm. `Ok(None)` when either
/// vector is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooSmall {
            what: "observations",
            needed: 2,
            found: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite value in Kendall input".into(),
        ));
    }
    let n = x.len() as u64;
    let n0 = n * (n - 1) / 2;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));
    let n1 = tie_pairs(&pairs, |a, b| a.0 == b.0);
    let n3 = tie_pairs(&pairs, |a, b| a == b);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tie_pairs(&ys, |a, b| a == b);
    if n1 == n0 || n2 == n0 {
        return Ok(None);
    }
    let num = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    Ok(Some((num / den).clamp(-1.0, 1.0)))
}

fn bootstrap_taus(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::Rng;
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooSmall {
            what: "observations",
            needed: 2,
            found: x.len(),
        });
    }
    let n = x.len();
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let mut taus = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = seed::rng(seed::derive_indexed(seed, "kendall-bootstrap", r as u64));
        for k in 0..n {
            let s = rng.random_range(0..n);
            bx[k] = x[s];
            by[k] = y[s];
        }
        match kendall_tau(&bx, &by)? {
            Some(t) => taus.push(t),
            None => {
                return Err(Error::Degenerate(format!(
                    "resample {r} has a constant column; tau undefined"
                )))
            }
        }
    }
    Ok(taus)
}

/// Resample `(x, y)` rows jointly `resamples` times in each period and test
/// whether the post-period tau exceeds the pre-period tau (Welch t-test).
/// Replicate `r` of both periods uses the same derived seed.
pub fn bootstrap_tau_increase(
    pre_x: &[f64],
    pre_y: &[f64],
    post_x: &[f64],
    post_y: &[f64],
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if resamples < 2 {
        return Err(Error::TooSmall {
            what: "resamples",
            needed: 2,
            found: resamples,
        });
    }
    let pre = bootstrap_taus(pre_x, pre_y, resamples, seed)?;
    let post = bootstrap_taus(post_x, post_y, resamples, seed)?;
    let (m1, v1) = mean_var(&pre);
    let (m2, v2) = mean_var(&post);
    let (s1, s2) = (v1 / pre.len() as f64, v2 / post.len() as f64);
    let se2 = s1 + s2;
    if se2 <= 0.0 {
        return Err(Error::Degenerate(
            "bootstrap tau samples have zero variance".into(),
        ));
    }
    let t = (m2 - m1) / se2.sqrt();
    let df = se2 * se2 / (s1 * s1 / (pre.len() as f64 - 1.0) + s2 * s2 / (post.len() as f64 - 1.0));
    let p = one_sided_p(t, df, Alternative::Greater);
    Ok(TestResult {
        test: "bootstrap_kendall_welch".into(),
        statistic: t,
        p_value: p,
        df: Some(df),
        resamples: Some(resamples),
        alternative: Alternative::Greater,
        alpha,
        decision: p < alpha,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    // O(n^2) pair enumeration
    fn tau_b_naive(x: &[f64], y: &[f64]) -> Option<f64> {
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let sx = (x[i] - x[j]).signum() as i64 * (x[i] != x[j]) as i64;
                let sy = (y[i] - y[j]).signum() as i64 * (y[i] != y[j]) as i64;
                match (sx, sy) {
                    (0, 0) => {}
                    (0, _) => tx += 1,
                    (_, 0) => ty += 1,
                    _ if sx == sy => c += 1,
                    _ => d += 1,
                }
            }
        }
        let den = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
        (den > 0.0).then(|| (c - d) as f64 / den)
    }

    #[test]
    fn paired_examples() {
        let r = paired_t_test(
            &[1.0, 1.0, -2.0],
            &[0.0, 0.0, 0.0],
            Alternative::Greater,
            0.05,
        )
        .unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.5).abs() < 1e-12);
        assert!(!r.decision);
        assert_eq!(r.df, Some(2.0));
        assert!(matches!(
            paired_t_test(&[1.0, 2.0], &[1.0, 2.0], Alternative::Greater, 0.05),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn paired_known_value() {
        // d = [1, 2, 3, 4]: mean 2.5, sd sqrt(5/3), t = 3.872983, df 3
        let r = paired_t_test(
            &[2.0, 4.0, 6.0, 8.0],
            &[1.0, 2.0, 3.0, 4.0],
            Alternative::Greater,
            0.05,
        )
        .unwrap();
        assert!((r.statistic - 3.872_983_346_207_417).abs() < 1e-12);
        // scipy.stats.t.sf(3.872983346207417, 3)
        assert!((r.p_value - 0.015_233_145_831_085_489).abs() < 1e-9);
        assert!(r.decision);
    }

    #[test]
    fn kendall_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), Some(1.0));
        assert_eq!(kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let t = kendall_tau(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&x, &[2.0; 4]).unwrap(), None);
    }

    #[test]
    fn kendall_matches_naive_with_ties() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..300 {
            let n = rng.random_range(2..40);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let fast = kendall_tau(&x, &y).unwrap();
            let slow = tau_b_naive(&x, &y);
            match (fast, slow) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{a} vs {b}"),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn paired_antisymmetric(a in proptest::collection::vec(-10.0f64..10.0, 3..30), shift in proptest::collection::vec(-1.0f64..1.0, 30)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            if let (Ok(r1), Ok(r2)) = (paired_t_test(&a, &b, Alternative::Greater, 0.05), paired_t_test(&b, &a, Alternative::Greater, 0.05)) {
                proptest::prop_assert!((r1.statistic + r2.statistic).abs() < 1e-9 * r1.statistic.abs().max(1.0));
                proptest::prop_assert!((0.0..=1.0).contains(&r1.p_value));
            }
        }

        #[test]
        fn kendall_monotone_invariant(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40)) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let gy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0).collect();
            let a = kendall_tau(&x, &y).unwrap();
            let b = kendall_tau(&fx, &gy).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => proptest::prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => proptest::prop_assert!(false),
            }
        }
    }

    #[test]
    fn bootstrap_detects_increase() {
        let mut rng = crate::seed::rng(8);
        let n = 300;
        let pre_x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let pre_y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let post_x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let post_y: Vec<f64> = post_x.iter().map(|v| v * 2.0 + 1.0).collect();
        let r = bootstrap_tau_increase(
            &pre_x,
            &pre_y,
            &post_x,
            &post_y,
            DEFAULT_RESAMPLES,
            0.05,
            42,
        )
        .unwrap();
        assert!(r.decision);
        assert_eq!(r.resamples, Some(200));
        let again = bootstrap_tau_increase(
            &pre_x,
            &pre_y,
            &post_x,
            &post_y,
            DEFAULT_RESAMPLES,
            0.05,
            42,
        )
        .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn bootstrap_identical_periods() {
        let mut rng = crate::seed::rng(9);
        let x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + e
            })
            .collect();
        let r = bootstrap_tau_increase(&x, &y, &x, &y, DEFAULT_RESAMPLES, 0.05, 3).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.decision);
    }
}
