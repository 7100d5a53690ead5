//! Truncated α-stable space-time noise.
//!
//! The Lévy measure is
//!
//! ```text
//! ν_α(dz) = (c₊ z^{−α−1} 1_{(0,K]}(z) + c₋ (−z)^{−α−1} 1_{[−K,0)}(z)) dz,   c₊ + c₋ = 1
//! ```
//!
//! and the noise is the compensated integral `L_α(dt,dx) = ∫ z Ñ(dt,dx,dz)`.
//! Over a space-time cell of measure `m` the increment is sampled as a
//! compound Poisson sum of the jumps with `eps < |z| ≤ K`, minus their
//! compensator, plus (optionally) a Gaussian surrogate for the jumps with
//! `|z| ≤ eps`.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;
use crate::solver::GridSpec;
use crate::{Error, Result};

/// Treatment of the infinitely many jumps below the cutoff `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    Drop,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableNoiseSpec {
    /// Stability index, in `(1, 2)`.
    pub alpha: f64,
    /// Jump truncation level `K`.
    #[serde(rename = "K")]
    pub truncation: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Small-jump cutoff, in `(0, K]`.
    pub eps: f64,
    pub small_jump_mode: SmallJumpMode,
}

impl StableNoiseSpec {
    /// Symmetric noise with `eps = K/100` and Gaussian small-jump closure.
    pub fn symmetric(alpha: f64, truncation: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            truncation,
            c_plus: 0.5,
            c_minus: 0.5,
            eps: 1e-2 * truncation,
            small_jump_mode: SmallJumpMode::Gaussian,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::config(format!(
                "alpha = {} must lie in (1, 2)",
                self.alpha
            )));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::config(format!(
                "K = {} must be > 0",
                self.truncation
            )));
        }
        if !(self.eps > 0.0 && self.eps <= self.truncation) {
            return Err(Error::config(format!(
                "eps = {} must lie in (0, K = {}]",
                self.eps, self.truncation
            )));
        }
        if !(self.c_plus >= 0.0 && self.c_minus >= 0.0)
            || (self.c_plus + self.c_minus - 1.0).abs() > 1e-12
        {
            return Err(Error::config(format!(
                "c_plus = {} and c_minus = {} must be >= 0 and sum to 1",
                self.c_plus, self.c_minus
            )));
        }
        Ok(())
    }

    /// Density of `ν_α` at `z ≠ 0`.
    pub fn levy_density(&self, z: f64) -> f64 {
        let a = z.abs();
        if a == 0.0 || a > self.truncation {
            return 0.0;
        }
        let side = if z > 0.0 { self.c_plus } else { self.c_minus };
        side * a.powf(-self.alpha - 1.0)
    }
}

/// `∫ |z|^p ν_α(dz) = K^{p−α}/(p−α)`, finite only for `p > α`.
pub fn measure_abs_moment(spec: &StableNoiseSpec, p: f64) -> Result<f64> {
    if !(p > spec.alpha) {
        return Err(Error::domain(format!(
            "p = {p} must exceed alpha = {}: the moment diverges at the origin",
            spec.alpha
        )));
    }
    Ok(spec.truncation.powf(p - spec.alpha) / (p - spec.alpha))
}

/// `ν_α({eps < |z| ≤ K}) = (eps^{−α} − K^{−α})/α`.
pub fn big_jump_intensity(spec: &StableNoiseSpec) -> f64 {
    if spec.eps >= spec.truncation {
        return 0.0;
    }
    (spec.eps.powf(-spec.alpha) - spec.truncation.powf(-spec.alpha)) / spec.alpha
}

/// Big-jump intensity split as `(positive side, negative side)`.
pub fn side_intensities(spec: &StableNoiseSpec) -> (f64, f64) {
    let total = big_jump_intensity(spec);
    (spec.c_plus * total, spec.c_minus * total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompensationConstants {
    /// Mean of the big jumps per unit cell measure; subtracted to compensate.
    pub mean_big: f64,
    /// Variance of the jumps with `|z| ≤ eps` per unit cell measure.
    pub var_small: f64,
}

pub fn compensation_constants(spec: &StableNoiseSpec) -> CompensationConstants {
    let a = spec.alpha;
    let mean_big = if spec.eps >= spec.truncation {
        0.0
    } else {
        (spec.c_plus - spec.c_minus) * (spec.eps.powf(1.0 - a) - spec.truncation.powf(1.0 - a))
            / (a - 1.0)
    };
    CompensationConstants {
        mean_big,
        var_small: spec.eps.powf(2.0 - a) / (2.0 - a),
    }
}

/// Inverse CDF of the big-jump magnitude law on `(eps, K]`: `u = 0` gives
/// `eps` and `u = 1` gives `K`.
pub fn jump_magnitude(spec: &StableNoiseSpec, u: f64) -> f64 {
    let a = spec.alpha;
    let lo = spec.eps.powf(-a);
    let hi = spec.truncation.powf(-a);
    let z = (lo - u * (lo - hi)).powf(-1.0 / a);
    z.clamp(spec.eps, spec.truncation)
}

/// Per-cell sampler for a fixed cell measure.
#[derive(Clone, Debug)]
pub struct CellSampler {
    spec: StableNoiseSpec,
    jumps: Option<Poisson<f64>>,
    compensator: f64,
    small_sd: f64,
}

impl CellSampler {
    pub fn new(spec: &StableNoiseSpec, cell_measure: f64) -> Result<Self> {
        spec.validate()?;
        if !(cell_measure > 0.0) {
            return Err(Error::config(format!(
                "cell measure {cell_measure} must be > 0"
            )));
        }
        let rate = big_jump_intensity(spec) * cell_measure;
        let jumps = if rate > 0.0 {
            Some(Poisson::new(rate).map_err(|e| Error::config(format!("poisson rate: {e}")))?)
        } else {
            None
        };
        let consts = compensation_constants(spec);
        let small_sd = match spec.small_jump_mode {
            SmallJumpMode::Gaussian => (consts.var_small * cell_measure).sqrt(),
            SmallJumpMode::Drop => 0.0,
        };
        Ok(Self {
            spec: *spec,
            jumps,
            compensator: consts.mean_big * cell_measure,
            small_sd,
        })
    }

    /// One compensated increment. Draw order: jump count, then (sign, magnitude)
    /// per jump, then the Gaussian closure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut total = 0.0;
        if let Some(jumps) = &self.jumps {
            let count = jumps.sample(rng) as u64;
            for _ in 0..count {
                let positive = rng.random::<f64>() < self.spec.c_plus;
                // 1 − U lies in (0, 1], so magnitudes land in (eps, K].
                let z = jump_magnitude(&self.spec, 1.0 - rng.random::<f64>());
                total += if positive { z } else { -z };
            }
        }
        total -= self.compensator;
        if self.small_sd > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            total += self.small_sd * g;
        }
        total
    }

    pub fn fill_row<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64]) {
        for v in row.iter_mut() {
            *v = self.sample(rng);
        }
    }
}

/// Compensated increments `ΔL_{j,i}` for time step `j` and interior cell `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrementField {
    pub steps: usize,
    pub cells: usize,
    pub cell_measure: f64,
    values: Vec<f64>,
}

impl NoiseIncrementField {
    pub fn row(&self, step: usize) -> &[f64] {
        &self.values[step * self.cells..(step + 1) * self.cells]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Samples the whole field row by row (time-major) from `stream`.
///
/// [`crate::solver::solve_path`] draws rows in the same order, so the field
/// sampled here is the one a path with the same stream is driven by.
pub fn sample_increment_field(
    spec: &StableNoiseSpec,
    grid: &GridSpec,
    stream: &mut RandomStream,
) -> Result<NoiseIncrementField> {
    grid.validate()?;
    let cell_measure = grid.dt() * grid.dx();
    let sampler = CellSampler::new(spec, cell_measure)?;
    let mut values = vec![0.0; grid.nt * grid.nx];
    for row in values.chunks_mut(grid.nx) {
        sampler.fill_row(stream, row);
    }
    Ok(NoiseIncrementField {
        steps: grid.nt,
        cells: grid.nx,
        cell_measure,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, k: f64, eps: f64) -> StableNoiseSpec {
        StableNoiseSpec {
            alpha,
            truncation: k,
            c_plus: 0.5,
            c_minus: 0.5,
            eps,
            small_jump_mode: SmallJumpMode::Gaussian,
        }
    }

    #[test]
    fn validation() {
        assert!(spec(1.0, 1.0, 0.01).validate().is_err());
        assert!(spec(2.0, 1.0, 0.01).validate().is_err());
        assert!(spec(1.5, 1.0, 2.0).validate().is_err());
        assert!(spec(1.5, 1.0, 0.0).validate().is_err());
        let mut s = spec(1.5, 1.0, 0.01);
        s.c_plus = 0.7;
        assert!(s.validate().is_err());
        assert!(spec(1.5, 1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn abs_moment_closed_forms() {
        let s = spec(1.5, 1.0, 0.01);
        assert!((measure_abs_moment(&s, 1.8).unwrap() - 10.0 / 3.0).abs() < 1e-12);
        assert!((measure_abs_moment(&s, 1.7).unwrap() - 1.0 / 0.2).abs() < 1e-12);
        let s2 = spec(1.5, 2.0, 0.01);
        assert!((measure_abs_moment(&s2, 2.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(measure_abs_moment(&s, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn intensities() {
        assert_eq!(big_jump_intensity(&spec(1.5, 1.0, 1.0)), 0.0);
        assert!((big_jump_intensity(&spec(1.5, 1.0, 0.01)) - 666.0).abs() < 1e-9);
        assert!((big_jump_intensity(&spec(1.5, 1.0, 0.25)) - 7.0 / 1.5).abs() < 1e-12);
        let mut s = spec(1.5, 1.0, 0.25);
        s.c_plus = 0.8;
        s.c_minus = 0.2;
        let (p, m) = side_intensities(&s);
        assert!((p - 0.8 * 7.0 / 1.5).abs() < 1e-12 && (m - 0.2 * 7.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn compensation() {
        assert_eq!(compensation_constants(&spec(1.5, 1.0, 0.01)).mean_big, 0.0);
        let mut s = spec(1.5, 1.0, 0.01);
        s.c_plus = 1.0;
        s.c_minus = 0.0;
        let c = compensation_constants(&s);
        assert!((c.mean_big - 18.0).abs() < 1e-12);
        assert!((c.var_small - 0.2).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_endpoints() {
        let s = spec(1.5, 1.0, 0.01);
        assert!((jump_magnitude(&s, 0.0) - 0.01).abs() < 1e-15);
        assert!((jump_magnitude(&s, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_field_is_zero() {
        let mut s = spec(1.5, 1.0, 1.0);
        s.small_jump_mode = SmallJumpMode::Drop;
        let grid = GridSpec::new(1.0, 7, 0.1, 5).unwrap();
        let mut stream = RandomStream::for_replica(3, 0);
        let f = sample_increment_field(&s, &grid, &mut stream).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.values().len(), 35);
    }

    #[test]
    fn field_is_deterministic() {
        let s = spec(1.3, 1.0, 0.01);
        let grid = GridSpec::new(1.0, 15, 0.1, 20).unwrap();
        let a = sample_increment_field(&s, &grid, &mut RandomStream::for_replica(9, 4)).unwrap();
        let b = sample_increment_field(&s, &grid, &mut RandomStream::for_replica(9, 4)).unwrap();
        assert_eq!(a, b);
        let c = sample_increment_field(&s, &grid, &mut RandomStream::for_replica(9, 5)).unwrap();
        assert_ne!(a, c);
    }
}
