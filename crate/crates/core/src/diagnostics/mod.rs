//! Monte Carlo estimators for the moment and continuity functionals of the
//! approximating solutions, plus the deterministic checks that accompany them.
//!
//! Replicas run in parallel on the rayon pool. Replica `r` of every level is
//! driven by the stream `(master_seed, r)`, so different mollification levels
//! share their noise (common random numbers) and every estimate is a pure
//! function of the master seed, independent of the worker count.

mod ks;
mod norms;

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSpec, CoefficientTable};
use crate::heat_kernel::{kernel_lp_integral, KernelConfig};
use crate::rng::RandomStream;
use crate::solver::{check_test_function, pairing, GridSpec, InitialCondition, Simulation};
use crate::stable_noise::StableNoiseSpec;
use crate::stats::{fit_line, quantile, Estimate};
use crate::{Error, Result};

pub use ks::{ks_bootstrap_ci, ks_distance};
pub use norms::{lp_norm_p, lp_norm_p_full, spatial_modulus, spatial_modulus_of_state};

/// Parameter regime of an `(α, p)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `p ∈ (α, 2]`: measure-valued limit, moments still meaningful per level.
    #[serde(rename = "theorem-2.4")]
    MeasureValued,
    /// `α ∈ (1, 5/3)` and `p ∈ (α, 5/3)`: function-valued limit with uniform moments.
    #[serde(rename = "theorem-2.5")]
    FunctionValued,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::MeasureValued => "theorem-2.4",
            Regime::FunctionValued => "theorem-2.5",
        }
    }

    /// The narrowest regime containing `(alpha, p)`.
    pub fn classify(alpha: f64, p: f64) -> Result<Self> {
        if !(p > alpha && p <= 2.0) {
            return Err(Error::domain(format!(
                "p = {p} outside (alpha = {alpha}, 2]"
            )));
        }
        if alpha < 5.0 / 3.0 && p < 5.0 / 3.0 {
            Ok(Regime::FunctionValued)
        } else {
            Ok(Regime::MeasureValued)
        }
    }

    /// Whether `(alpha, p)` satisfies this regime's hypotheses.
    pub fn admits(self, alpha: f64, p: f64) -> bool {
        match self {
            Regime::MeasureValued => p > alpha && p <= 2.0,
            Regime::FunctionValued => {
                alpha > 1.0 && alpha < 5.0 / 3.0 && p > alpha && p < 5.0 / 3.0
            }
        }
    }
}

/// A simulation setup; the mollification level is chosen per call.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub grid: GridSpec,
    pub noise: StableNoiseSpec,
    pub ic: InitialCondition,
    pub coeff: CoefficientSpec,
    pub master_seed: u64,
}

impl Experiment {
    pub fn simulation(&self, n: u32) -> Result<Simulation<CoefficientTable>> {
        Simulation::new(&self.grid, &self.ic, &self.coeff.at_level(n), &self.noise)
    }

    /// Runs replicas `0..replicas` at level `n`, mapping each to a value;
    /// results come back in replica order.
    pub fn map_replicas<T, F>(
        &self,
        n: u32,
        replicas: usize,
        per_replica: F,
    ) -> Result<Vec<Result<T>>>
    where
        T: Send,
        F: Fn(&Simulation<CoefficientTable>, u64) -> Result<T> + Sync,
    {
        let sim = self.simulation(n)?;
        Ok((0..replicas as u64)
            .into_par_iter()
            .map(|r| per_replica(&sim, r))
            .collect())
    }
}

/// Survivors of a replica batch, with the count of exploded replicas.
fn split_explosions<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let mut ok = Vec::with_capacity(results.len());
    let mut exploded = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::Explosion { .. }) => exploded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((ok, exploded))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupMoment {
    pub n: u32,
    pub p: f64,
    pub estimate: Estimate,
    pub explosions: usize,
    pub regime: Regime,
}

/// `E[max_j ||u_{t_j}||_p^p]` over `replicas` paths at level `n`.
pub fn estimate_sup_moment(exp: &Experiment, p: f64, n: u32, replicas: usize) -> Result<SupMoment> {
    let regime = Regime::classify(exp.noise.alpha, p)?;
    let dx = exp.grid.dx();
    let results = exp.map_replicas(n, replicas, |sim, r| {
        let mut sup: f64 = 0.0;
        sim.run(exp.master_seed, r, |_, u| {
            sup = sup.max(lp_norm_p(u, p, dx))
        })?;
        Ok(sup)
    })?;
    let (values, explosions) = split_explosions(results)?;
    Ok(SupMoment {
        n,
        p,
        estimate: Estimate::from_samples(&values),
        explosions,
        regime,
    })
}

/// Converts time lags (multiples of `dt`, at most `T`) to step counts.
pub fn lags_to_steps(grid: &GridSpec, deltas: &[f64]) -> Result<Vec<usize>> {
    deltas
        .iter()
        .map(|&d| {
            if !(d >= 0.0) || d > grid.horizon * (1.0 + 1e-12) {
                return Err(Error::config(format!(
                    "delta = {d} outside [0, T = {}]",
                    grid.horizon
                )));
            }
            let steps = (d / grid.dt()).round();
            if (steps * grid.dt() - d).abs() > 1e-9 * grid.dt().max(d) {
                return Err(Error::config(format!(
                    "delta = {d} is not a multiple of dt = {}",
                    grid.dt()
                )));
            }
            Ok(steps as usize)
        })
        .collect()
}

/// Per-path temporal moduli `max_{t_j ≤ T−δ} max_{1 ≤ h ≤ δ/dt} ||u_{j+h} − u_j||_p^p`
/// for each lag (in steps), streamed over the path with a ring buffer.
pub struct TemporalModulusTracker {
    lags: Vec<usize>,
    horizon_steps: usize,
    p: f64,
    dx: f64,
    window: VecDeque<Vec<f64>>,
    moduli: Vec<f64>,
    scratch: Vec<f64>,
}

impl TemporalModulusTracker {
    pub fn new(lags: &[usize], grid: &GridSpec, p: f64) -> Self {
        Self {
            lags: lags.to_vec(),
            horizon_steps: grid.nt,
            p,
            dx: grid.dx(),
            window: VecDeque::new(),
            moduli: vec![0.0; lags.len()],
            scratch: vec![0.0; grid.nx],
        }
    }

    pub fn observe(&mut self, j: usize, u: &[f64]) {
        let depth = self.lags.iter().copied().max().unwrap_or(0);
        if depth == 0 {
            return;
        }
        // window holds u_{j-1}, u_{j-2}, ... most recent first
        for (back, past) in self.window.iter().enumerate() {
            let h = back + 1;
            let start = j - h;
            for ((d, a), b) in self.scratch.iter_mut().zip(u).zip(past) {
                *d = a - b;
            }
            let incr = lp_norm_p(&self.scratch, self.p, self.dx);
            for (k, &lag) in self.lags.iter().enumerate() {
                if h <= lag && start + lag <= self.horizon_steps {
                    self.moduli[k] = self.moduli[k].max(incr);
                }
            }
        }
        if self.window.len() == depth {
            self.window.pop_back();
        }
        self.window.push_front(u.to_vec());
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulusEstimate {
    /// Lag (time units) or shift (length units).
    pub offset: f64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusReport {
    pub n: u32,
    pub p: f64,
    pub entries: Vec<ModulusEstimate>,
    pub explosions: usize,
}

/// `E[sup_{t ≤ T−δ} sup_{h ≤ δ} ||u_{t+h} − u_t||_p^p]` for each `δ` in `deltas`.
pub fn temporal_modulus(
    exp: &Experiment,
    p: f64,
    n: u32,
    deltas: &[f64],
    replicas: usize,
) -> Result<ModulusReport> {
    let lags = lags_to_steps(&exp.grid, deltas)?;
    let results = exp.map_replicas(n, replicas, |sim, r| {
        let mut tracker = TemporalModulusTracker::new(&lags, &exp.grid, p);
        sim.run(exp.master_seed, r, |j, u| tracker.observe(j, u))?;
        Ok(tracker.moduli().to_vec())
    })?;
    let (rows, explosions) = split_explosions(results)?;
    Ok(ModulusReport {
        n,
        p,
        entries: column_estimates(deltas, &rows),
        explosions,
    })
}

/// Monte Carlo mean of [`spatial_modulus`] at the final time.
pub fn spatial_modulus_estimate(
    exp: &Experiment,
    p: f64,
    n: u32,
    shifts: &[f64],
    replicas: usize,
) -> Result<ModulusReport> {
    let grid = exp.grid;
    let results = exp.map_replicas(n, replicas, |sim, r| {
        let mut last = Vec::new();
        sim.run(exp.master_seed, r, |j, u| {
            if j == grid.nt {
                last = u.to_vec();
            }
        })?;
        spatial_modulus_of_state(&last, grid.dx(), p, shifts)
    })?;
    let (rows, explosions) = split_explosions(results)?;
    Ok(ModulusReport {
        n,
        p,
        entries: column_estimates(shifts, &rows),
        explosions,
    })
}

fn column_estimates(offsets: &[f64], rows: &[Vec<f64>]) -> Vec<ModulusEstimate> {
    offsets
        .iter()
        .enumerate()
        .map(|(k, &offset)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            ModulusEstimate {
                offset,
                estimate: Estimate::from_samples(&col),
            }
        })
        .collect()
}

/// `⟨u_T, ψ⟩` per replica at level `n`. Any explosion is an error, since the
/// samples of different levels are compared replica by replica.
pub fn pairing_samples(exp: &Experiment, n: u32, replicas: usize, psi: &[f64]) -> Result<Vec<f64>> {
    check_test_function(psi, &exp.grid)?;
    let dx = exp.grid.dx();
    let nt = exp.grid.nt;
    exp.map_replicas(n, replicas, |sim, r| {
        let mut value = 0.0;
        sim.run(exp.master_seed, r, |j, u| {
            if j == nt {
                value = pairing(u, psi, dx);
            }
        })?;
        Ok(value)
    })?
    .into_iter()
    .collect()
}

/// KS distance between consecutive mollification levels with a bootstrap CI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsLink {
    pub n_lo: u32,
    pub n_hi: u32,
    pub ks: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 400;
pub const BOOTSTRAP_LEVEL: f64 = 0.90;

/// KS distances of `⟨u_T, ψ⟩` between consecutive entries of `levels`.
pub fn ks_chain(
    exp: &Experiment,
    levels: &[u32],
    replicas: usize,
    psi: &[f64],
) -> Result<Vec<KsLink>> {
    if levels.len() < 2 {
        return Err(Error::config("ks chain needs at least two levels"));
    }
    let samples = levels
        .iter()
        .map(|&n| pairing_samples(exp, n, replicas, psi))
        .collect::<Result<Vec<_>>>()?;
    levels
        .windows(2)
        .zip(samples.windows(2))
        .enumerate()
        .map(|(k, (ns, s))| {
            let ks = ks_distance(&s[0], &s[1])?;
            let mut stream = RandomStream::auxiliary(exp.master_seed, k as u64);
            let (ci_lo, ci_hi) = ks_bootstrap_ci(
                &s[0],
                &s[1],
                BOOTSTRAP_RESAMPLES,
                BOOTSTRAP_LEVEL,
                &mut stream,
            )?;
            Ok(KsLink {
                n_lo: ns[0],
                n_hi: ns[1],
                ks,
                ci_lo,
                ci_hi,
            })
        })
        .collect()
}

/// Outcome of comparing the first and last links of a KS chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainVerdict {
    /// Last distance smaller and the bootstrap intervals are disjoint.
    Separated,
    /// Last distance smaller but the intervals overlap.
    Inconclusive,
    /// Last distance not smaller.
    NotDecreasing,
}

pub fn chain_verdict(first: &KsLink, last: &KsLink) -> ChainVerdict {
    if !(last.ks < first.ks) {
        ChainVerdict::NotDecreasing
    } else if last.ci_hi < first.ci_lo {
        ChainVerdict::Separated
    } else {
        ChainVerdict::Inconclusive
    }
}

/// Admissible exponents `β` with `1 − 1/p < β < 3/(2p) − 1/2`; `None` when the
/// interval is empty, which happens exactly for `p ≥ 5/3`.
pub fn beta_window(p: f64) -> Result<Option<(f64, f64)>> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("beta window needs p > 1, got {p}")));
    }
    // width (5 − 3p)/(2p) decides emptiness without cancellation
    if !(5.0 - 3.0 * p > 0.0) {
        return Ok(None);
    }
    Ok(Some(((p - 1.0) / p, (3.0 - p) / (2.0 * p))))
}

/// `∫_s^t (t−r)^{β−1}(r−s)^{−β} dr = π / sin(βπ)` for `β ∈ (0, 1)`.
pub fn factorization_constant(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta = {beta} must lie in (0, 1)")));
    }
    Ok(PI / (beta * PI).sin())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub rms_residual: f64,
    /// `∫|G_t(L/2, y)|^p dy` at each input time.
    pub values: Vec<f64>,
}

/// Log-log slope of `t ↦ ∫|G_t(L/2, y)|^p dy`.
pub fn kernel_decay_fit(cfg: &KernelConfig, p: f64, times: &[f64]) -> Result<DecayFit> {
    if times.len() < 3 {
        return Err(Error::config(format!(
            "decay fit needs >= 3 times, got {}",
            times.len()
        )));
    }
    let x = 0.5 * cfg.length;
    let values = times
        .iter()
        .map(|&t| kernel_lp_integral(cfg, t, x, p))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&lx, &ly);
    Ok(DecayFit {
        slope: fit.slope,
        rms_residual: fit.rms_residual,
        values,
    })
}

/// Uniform-in-`n` check: the largest level estimate may exceed the
/// across-level mean by at most `sigmas` combined standard errors, where the
/// combined error of level `k` is `√(se_k² + Σ_i se_i²/m²)`.
pub fn uniform_bound_holds(estimates: &[Estimate], sigmas: f64) -> bool {
    let m = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.mean).sum::<f64>() / m;
    let var_mean = estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / (m * m);
    estimates
        .iter()
        .all(|e| e.mean - mean <= sigmas * (e.stderr * e.stderr + var_mean).sqrt())
}

/// Whether moduli listed for decreasing lags are non-increasing within
/// `sigmas` standard errors of each consecutive difference.
pub fn non_increasing_within(entries: &[Estimate], sigmas: f64) -> bool {
    entries.windows(2).all(|w| {
        let se = (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt();
        w[1].mean <= w[0].mean + sigmas * se
    })
}

/// Percentile interval of a bootstrap sample.
pub(crate) fn percentile_interval(mut values: Vec<f64>, level: f64) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    (quantile(&values, tail), quantile(&values, 1.0 - tail))
}

#[cfg(test)]
mod tests;
