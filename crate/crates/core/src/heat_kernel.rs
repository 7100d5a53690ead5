//! Dirichlet heat kernel of `∂_t = ½∂²ₓ` on `[0, L]`.
//!
//! The kernel is the alternating image series
//!
//! ```text
//! G_t(x, y) = Σ_k [P_t(y − x + 2kL) − P_t(y + x + 2kL)],   P_t(z) = e^{−z²/2t} / √(2πt)
//! ```
//!
//! truncated at `|k| ≤ k_max(t)` where every omitted Gaussian term is below
//! the configured tolerance.

use std::f64::consts::PI;

use crate::quadrature::trapezoid;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    /// Domain length `L`.
    pub length: f64,
    /// Absolute bound on the first omitted image term.
    pub tol: f64,
    /// Smallest time at which the series may be evaluated.
    pub t_floor: f64,
}

impl KernelConfig {
    pub const DEFAULT_TOL: f64 = 1e-12;

    /// Default tolerance and `t_floor = 1e-6·L²`.
    pub fn new(length: f64) -> Result<Self> {
        Self::with_tolerance(length, Self::DEFAULT_TOL, 1e-6 * length * length)
    }

    pub fn with_tolerance(length: f64, tol: f64, t_floor: f64) -> Result<Self> {
        let cfg = Self {
            length,
            tol,
            t_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config(format!(
                "length must be > 0, got {}",
                self.length
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.t_floor > 0.0) {
            return Err(Error::config(format!(
                "t_floor must be > 0, got {}",
                self.t_floor
            )));
        }
        Ok(())
    }

    /// Number of image pairs kept on each side at time `t`.
    ///
    /// Beyond distance `d*` from the source a single normalized Gaussian term
    /// is below `tol`; `d*² = 2t·ln(1/(tol·√(2πt)))` (clamped at zero). Every
    /// image with `|k| > k_max` sits at least `d*` away from any point of `[0, L]`.
    pub fn image_cutoff(&self, t: f64) -> usize {
        let l = self.length;
        let log_ratio = (1.0 / (self.tol * (2.0 * PI * t).sqrt())).ln().max(0.0);
        let reach = (2.0 * t * log_ratio).sqrt();
        ((l + reach) / (2.0 * l)).ceil() as usize + 1
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= self.t_floor) {
            return Err(Error::domain(format!(
                "kernel time {t} below t_floor {}",
                self.t_floor
            )));
        }
        Ok(())
    }

    fn check_position(&self, name: &str, x: f64) -> Result<f64> {
        let slack = 1e-12 * self.length;
        if !(x >= -slack && x <= self.length + slack) {
            return Err(Error::domain(format!(
                "{name} = {x} outside [0, {}]",
                self.length
            )));
        }
        Ok(x.clamp(0.0, self.length))
    }
}

/// `G_t(x, y)` by the truncated image series.
///
/// Exactly symmetric in `(x, y)` and exactly zero when either point lies on
/// the boundary.
pub fn eval_kernel(cfg: &KernelConfig, t: f64, x: f64, y: f64) -> Result<f64> {
    cfg.check_time(t)?;
    let x = cfg.check_position("x", x)?;
    let y = cfg.check_position("y", y)?;
    Ok(kernel_unchecked(cfg, t, cfg.image_cutoff(t), x, y))
}

fn kernel_unchecked(cfg: &KernelConfig, t: f64, cutoff: usize, x: f64, y: f64) -> f64 {
    let l = cfg.length;
    if x <= 0.0 || x >= l || y <= 0.0 || y >= l {
        return 0.0;
    }
    let gauss = |z: f64| (-z * z / (2.0 * t)).exp();
    // |y − x| makes the direct images, hence the whole sum, symmetric in (x, y).
    let d = (y - x).abs();
    let s = x + y;
    let mut sum = gauss(d) - gauss(s);
    for k in 1..=cutoff {
        let shift = 2.0 * k as f64 * l;
        let direct = gauss(d + shift) + gauss(d - shift);
        let reflected = gauss(s + shift) + gauss(s - shift);
        sum += direct - reflected;
    }
    sum / (2.0 * PI * t).sqrt()
}

/// Kernel values `G_t(x_i, x_j)` on the uniform grid of `nodes` points
/// (boundary included), row-major.
pub fn kernel_matrix(cfg: &KernelConfig, t: f64, nodes: usize) -> Result<Vec<f64>> {
    cfg.check_time(t)?;
    if nodes < 3 {
        return Err(Error::config(format!(
            "grid needs at least 3 nodes, got {nodes}"
        )));
    }
    let dx = cfg.length / (nodes - 1) as f64;
    let cutoff = cfg.image_cutoff(t);
    let mut m = vec![0.0; nodes * nodes];
    for i in 0..nodes {
        for j in i..nodes {
            let g = kernel_unchecked(cfg, t, cutoff, i as f64 * dx, j as f64 * dx);
            m[i * nodes + j] = g;
            m[j * nodes + i] = g;
        }
    }
    Ok(m)
}

/// Deterministic term of the mild form: `x ↦ ∫₀^L G_t(x, y) f(y) dy` by the
/// composite trapezoid rule on the grid carrying `f` (boundary nodes included).
pub fn apply_semigroup(cfg: &KernelConfig, t: f64, f: &[f64]) -> Result<Vec<f64>> {
    let nodes = f.len();
    if nodes < 3 {
        return Err(Error::config(format!(
            "grid needs at least 3 nodes, got {nodes}"
        )));
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    if t < 0.0 {
        return Err(Error::domain(format!("negative time {t}")));
    }
    let kernel = kernel_matrix(cfg, t, nodes)?;
    let dx = cfg.length / (nodes - 1) as f64;
    let mut out = vec![0.0; nodes];
    for i in 1..nodes - 1 {
        let row = &kernel[i * nodes..(i + 1) * nodes];
        let acc: f64 = row[1..nodes - 1]
            .iter()
            .zip(&f[1..nodes - 1])
            .map(|(g, v)| g * v)
            .sum();
        out[i] = acc * dx;
    }
    Ok(out)
}

/// `∫₀^L |G_t(x, y)|^p dy`, by a trapezoid rule resolving the `√t` scale.
pub fn kernel_lp_integral(cfg: &KernelConfig, t: f64, x: f64, p: f64) -> Result<f64> {
    cfg.check_time(t)?;
    if !(p >= 1.0) {
        return Err(Error::domain(format!("exponent p = {p} must be >= 1")));
    }
    if !(x > 0.0 && x < cfg.length) {
        return Err(Error::domain(format!(
            "x = {x} must be interior to (0, {})",
            cfg.length
        )));
    }
    let cells = ((40.0 * cfg.length / t.sqrt()).ceil() as usize).max(400);
    let dy = cfg.length / cells as f64;
    let cutoff = cfg.image_cutoff(t);
    let values: Vec<f64> = (0..=cells)
        .map(|j| {
            kernel_unchecked(cfg, t, cutoff, x, j as f64 * dy)
                .abs()
                .powf(p)
        })
        .collect();
    Ok(trapezoid(&values, dy))
}

/// Sup-norm defect `max_{x,z} |Σ_y G_s(x,y)G_t(y,z)Δy − G_{s+t}(x,z)|` on a
/// uniform grid of `nodes` points.
pub fn semigroup_defect(cfg: &KernelConfig, s: f64, t: f64, nodes: usize) -> Result<f64> {
    let gs = kernel_matrix(cfg, s, nodes)?;
    let gt = kernel_matrix(cfg, t, nodes)?;
    let gst = kernel_matrix(cfg, s + t, nodes)?;
    let dx = cfg.length / (nodes - 1) as f64;
    let mut worst: f64 = 0.0;
    for i in 0..nodes {
        let row = &gs[i * nodes..(i + 1) * nodes];
        let mut composed = vec![0.0; nodes];
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (c, b) in composed.iter_mut().zip(&gt[j * nodes..(j + 1) * nodes]) {
                *c += a * b;
            }
        }
        for (k, c) in composed.iter().enumerate() {
            worst = worst.max((c * dx - gst[i * nodes + k]).abs());
        }
    }
    Ok(worst)
}

/// A priori bound for [`semigroup_defect`].
///
/// The integrand in `y` extends to a smooth `2L`-periodic function, so the
/// trapezoid error is the aliasing term `~exp(−2π²·min(s,t)/Δy²)`. Series
/// truncation contributes at most `tol` per kernel value over `L/Δy` nodes;
/// rounding is charged at `1e-12` relative to the peak kernel value.
pub fn semigroup_defect_bound(cfg: &KernelConfig, s: f64, t: f64, nodes: usize) -> f64 {
    let dx = cfg.length / (nodes - 1) as f64;
    let peak = |t: f64| 1.0 / (2.0 * PI * t).sqrt();
    let aliasing = 2.0 * (-2.0 * PI * PI * s.min(t) / (dx * dx)).exp();
    (aliasing + 1e-12) * peak(s) * peak(t) * cfg.length
        + 2.0 * cfg.length * cfg.tol * (peak(s) + peak(t))
        + 1e-12 * peak(s + t)
}
