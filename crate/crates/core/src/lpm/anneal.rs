use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{eta, log_normal2_pdf, risk_index, LatentConfiguration, Point, CONDITIONAL_EPS};
use crate::error::{Error, Result};
use crate::seed;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cooling schedule `tau_k = c * exp(-r * k / K)` plus proposal spread and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub iterations: usize,
    pub c: f64,
    pub r: f64,
    pub proposal_sd: f64,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            iterations: 100_000,
            c: 100.0,
            r: 9.21,
            proposal_sd: 1.0,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidSchedule(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "r must be positive, got {}",
                self.r
            )));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "proposal_sd must be positive, got {}",
                self.proposal_sd
            )));
        }
        Ok(())
    }

    pub fn temperature(&self, k: usize) -> f64 {
        self.c * (-self.r * k as f64 / self.iterations as f64).exp()
    }
}

fn log_conditional(y: f64, a: f64, b: f64) -> f64 {
    // log N(y; b/prec, 1/prec) with prec = a + eps
    let prec = a + CONDITIONAL_EPS;
    let d = y - b / prec;
    0.5 * (prec.ln() - LN_2PI) - 0.5 * prec * d * d
}

/// Cached per-term pieces of the pseudo-posterior so that moving a single
/// position costs O(degree) instead of O(N^2 T).
#[derive(Debug, Clone)]
pub struct IncrementalObjective {
    n: usize,
    // indexed t * n + i
    a: Vec<f64>,
    b: Vec<f64>,
    lik: Vec<f64>,
    prior: Vec<f64>,
    total: f64,
    // scratch for the pending proposal: (index, a, b, lik)
    touched: Vec<(usize, f64, f64, f64)>,
    prior_new: [(usize, f64); 2],
}

impl IncrementalObjective {
    pub fn new(cfg: &LatentConfiguration) -> Self {
        let (n, periods) = (cfg.n(), cfg.periods());
        let mut a = vec![0.0; n * periods];
        let mut b = vec![0.0; n * periods];
        let mut lik = vec![0.0; n * periods];
        let mut prior = vec![0.0; n * periods];
        for t in 0..periods {
            for i in 0..n {
                let k = t * n + i;
                let zi = cfg.z(i, t);
                for &j in cfg.neighbours(i, t) {
                    let e = eta(zi, cfg.z(j, t));
                    a[k] += e;
                    b[k] += e * cfg.y(j, t);
                }
                lik[k] = log_conditional(cfg.y(i, t), a[k], b[k]);
                let mean = if t == 0 { [0.0, 0.0] } else { cfg.z(i, t - 1) };
                prior[k] = log_normal2_pdf(zi, mean);
            }
        }
        let total = lik.iter().sum::<f64>() + prior.iter().sum::<f64>();
        IncrementalObjective {
            n,
            a,
            b,
            lik,
            prior,
            total,
            touched: Vec::new(),
            prior_new: [(usize::MAX, 0.0); 2],
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Objective change if `z_i(t)` moved to `p`. Leaves the proposal pending
    /// for [`IncrementalObjective::commit`].
    pub fn delta(&mut self, cfg: &LatentConfiguration, i: usize, t: usize, p: Point) -> f64 {
        let n = self.n;
        let old = cfg.z(i, t);
        let ki = t * n + i;
        let yi = cfg.y(i, t);
        self.touched.clear();
        let mut delta = 0.0;
        let (mut ai, mut bi) = (0.0, 0.0);
        for &j in cfg.neighbours(i, t) {
            let zj = cfg.z(j, t);
            let (e_new, e_old) = (eta(p, zj), eta(old, zj));
            ai += e_new;
            bi += e_new * cfg.y(j, t);
            let kj = t * n + j;
            let aj = self.a[kj] + (e_new - e_old);
            let bj = self.b[kj] + (e_new - e_old) * yi;
            let lj = log_conditional(cfg.y(j, t), aj, bj);
            delta += lj - self.lik[kj];
            self.touched.push((kj, aj, bj, lj));
        }
        let li = log_conditional(yi, ai, bi);
        delta += li - self.lik[ki];
        self.touched.push((ki, ai, bi, li));

        let mean = if t == 0 { [0.0, 0.0] } else { cfg.z(i, t - 1) };
        let pi = log_normal2_pdf(p, mean);
        delta += pi - self.prior[ki];
        self.prior_new[0] = (ki, pi);
        self.prior_new[1] = (usize::MAX, 0.0);
        if t + 1 < cfg.periods() {
            let kn = ki + n;
            let pn = log_normal2_pdf(cfg.z(i, t + 1), p);
            delta += pn - self.prior[kn];
            self.prior_new[1] = (kn, pn);
        }
        delta
    }

    /// Apply the pending proposal whose delta was `delta`.
    pub fn commit(&mut self, delta: f64) {
        for &(k, a, b, l) in &self.touched {
            self.a[k] = a;
            self.b[k] = b;
            self.lik[k] = l;
        }
        for &(k, v) in &self.prior_new {
            if k != usize::MAX {
                self.prior[k] = v;
            }
        }
        self.total += delta;
    }
}

/// Stateful annealer; [`anneal`] drives it for the full schedule.
#[derive(Debug, Clone)]
pub struct Annealer {
    cfg: LatentConfiguration,
    objective: IncrementalObjective,
    schedule: AnnealSchedule,
    rng: ChaCha8Rng,
    sweep: usize,
    pub proposed: u64,
    pub accepted: u64,
}

impl Annealer {
    pub fn new(cfg: LatentConfiguration, schedule: AnnealSchedule) -> Result<Self> {
        schedule.validate()?;
        let objective = IncrementalObjective::new(&cfg);
        if !objective.total().is_finite() {
            return Err(Error::NonFiniteObjective {
                sweep: 0,
                node: 0,
                period: 0,
                value: objective.total(),
            });
        }
        let rng = seed::rng(seed::derive(schedule.seed, "lpm-proposals"));
        Ok(Annealer {
            cfg,
            objective,
            schedule,
            rng,
            sweep: 0,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn config(&self) -> &LatentConfiguration {
        &self.cfg
    }

    pub fn objective(&self) -> f64 {
        self.objective.total()
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweep
    }

    /// One Metropolis step on `z_i(t)` at temperature `tau`; true if accepted.
    pub fn step(&mut self, i: usize, t: usize, tau: f64) -> Result<bool> {
        let sd = self.schedule.proposal_sd;
        let old = self.cfg.z(i, t);
        let nx: f64 = StandardNormal.sample(&mut self.rng);
        let ny: f64 = StandardNormal.sample(&mut self.rng);
        let p = [old[0] + sd * nx, old[1] + sd * ny];
        let u: f64 = self.rng.random();
        let delta = self.objective.delta(&self.cfg, i, t, p);
        if !delta.is_finite() {
            return Err(Error::NonFiniteObjective {
                sweep: self.sweep,
                node: i,
                period: t,
                value: delta,
            });
        }
        self.proposed += 1;
        // u in [0,1): ln 0 = -inf is always below a finite threshold
        if u.ln() < delta / tau {
            self.objective.commit(delta);
            self.cfg.set_z(i, t, p);
            self.accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// One systematic sweep over every position, periods outermost.
    pub fn sweep(&mut self) -> Result<()> {
        let tau = self.schedule.temperature(self.sweep);
        for t in 0..self.cfg.periods() {
            for i in 0..self.cfg.n() {
                self.step(i, t, tau)?;
            }
        }
        self.sweep += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AnnealResult {
    /// Best configuration seen at a sweep boundary.
    pub best: LatentConfiguration,
    pub best_objective: f64,
    pub initial_objective: f64,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
    /// Running maximum of `trace`, seeded with the initial objective.
    pub best_trace: Vec<f64>,
    pub proposed: u64,
    pub accepted: u64,
}

impl AnnealResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Serialized fit. `z[t][i]` and `risk_index[t][i]` are period-major.
#[derive(Debug, Clone, Serialize)]
pub struct FitJson {
    pub tickers: Vec<String>,
    pub periods: Vec<String>,
    pub z: Vec<Vec<Point>>,
    pub objective_trace: Vec<f64>,
    pub best_trace: Vec<f64>,
    pub initial_objective: f64,
    pub best_objective: f64,
    pub acceptance_rate: f64,
    pub risk_index: Vec<Vec<f64>>,
    pub seed: u64,
    pub schedule: AnnealSchedule,
}

impl AnnealResult {
    pub fn to_json(
        &self,
        tickers: &[String],
        periods: &[String],
        schedule: &AnnealSchedule,
    ) -> FitJson {
        let r = risk_index(&self.best);
        FitJson {
            tickers: tickers.to_vec(),
            periods: periods.to_vec(),
            z: self.best.positions_by_period(),
            objective_trace: self.trace.clone(),
            best_trace: self.best_trace.clone(),
            initial_objective: self.initial_objective,
            best_objective: self.best_objective,
            acceptance_rate: self.acceptance_rate(),
            risk_index: (0..self.best.periods())
                .map(|t| r.values.column(t).iter().copied().collect())
                .collect(),
            seed: schedule.seed,
            schedule: *schedule,
        }
    }

    /// `sweep,temperature,objective,best_objective`, one row per sweep.
    pub fn write_trace_csv<W: std::io::Write>(
        &self,
        schedule: &AnnealSchedule,
        w: W,
    ) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["sweep", "temperature", "objective", "best_objective"])?;
        for (k, (obj, best)) in self.trace.iter().zip(&self.best_trace).enumerate() {
            wtr.write_record([
                (k + 1).to_string(),
                schedule.temperature(k).to_string(),
                obj.to_string(),
                best.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Maximise the log pseudo-posterior by simulated annealing. Without `init`
/// the positions start from independent standard bivariate normal draws.
pub fn anneal(
    y: nalgebra::DMatrix<f64>,
    x: Vec<nalgebra::DMatrix<bool>>,
    schedule: &AnnealSchedule,
    init: Option<Vec<Point>>,
) -> Result<AnnealResult> {
    schedule.validate()?;
    let z = match init {
        Some(z) => z,
        None => {
            let mut rng = seed::rng(seed::derive(schedule.seed, "lpm-init"));
            (0..y.len())
                .map(|_| {
                    [
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    ]
                })
                .collect()
        }
    };
    let cfg = LatentConfiguration::new(y, x, z)?;
    let mut annealer = Annealer::new(cfg, *schedule)?;
    let initial_objective = annealer.objective();
    let mut best = annealer.config().clone();
    let mut best_objective = initial_objective;
    let mut trace = Vec::with_capacity(schedule.iterations);
    let mut best_trace = Vec::with_capacity(schedule.iterations);
    for _ in 0..schedule.iterations {
        annealer.sweep()?;
        let obj = annealer.objective();
        if obj > best_objective {
            best_objective = obj;
            best = annealer.config().clone();
        }
        trace.push(obj);
        best_trace.push(best_objective);
    }
    Ok(AnnealResult {
        best,
        best_objective,
        initial_objective,
        trace,
        best_trace,
        proposed: annealer.proposed,
        accepted: annealer.accepted,
    })
}
