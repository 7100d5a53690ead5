//! Noise coefficients `φ` and their Lipschitz mollifications
//!
//! ```text
//! φⁿ(u) = ∫ P_{1/n}(u − v) [(φ(v) ∧ n) ∨ (−n)] dv = E[clamp(φ(u + ξ), −n, n)],   ξ ~ N(0, 1/n)
//! ```
//!
//! The Gaussian expectation is computed with tanh-sinh panels on
//! `ξ ∈ [−10σ, 10σ]`, split at every point where the clamped integrand is not
//! smooth (the family's own kinks and the clamp crossings `φ = ±n`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::TanhSinh;
use crate::{Error, Result};

/// Gaussian window half-width in standard deviations; the omitted mass is below 1e-22.
const WINDOW: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientFamily {
    /// `u ↦ a + b·u`
    Linear { a: f64, b: f64 },
    /// `u ↦ |u|^beta`, `beta ∈ (0, 1]`
    Power { beta: f64 },
    /// `u ↦ √(u⁺)`
    SqrtPos,
    /// `u ↦ √((u ∧ 1)⁺ · (1 − u)⁺)`
    Stepstone,
    /// `u ↦ c`
    Constant { c: f64 },
    /// Piecewise-linear through `points` (sorted by abscissa), constant beyond the ends.
    Tabulated { points: Vec<[f64; 2]> },
}

impl CoefficientFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power { beta } if !(*beta > 0.0 && *beta <= 1.0) => Err(Error::config(format!(
                "power exponent beta = {beta} must lie in (0, 1]"
            ))),
            Self::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::config(
                        "tabulated coefficient needs at least 2 points",
                    ));
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::config(
                        "tabulated coefficient abscissae must be strictly increasing",
                    ));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config("tabulated coefficient values must be finite"));
                }
                Ok(())
            }
            Self::Linear { a, b } if !(a.is_finite() && b.is_finite()) => Err(Error::config(
                "linear coefficient parameters must be finite",
            )),
            Self::Constant { c } if !c.is_finite() => {
                Err(Error::config("constant coefficient must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// The raw coefficient `φ(u)`.
    pub fn raw(&self, u: f64) -> f64 {
        match self {
            Self::Linear { a, b } => a + b * u,
            Self::Power { beta } => u.abs().powf(*beta),
            Self::SqrtPos => u.max(0.0).sqrt(),
            Self::Stepstone => (u.clamp(0.0, 1.0) * (1.0 - u).max(0.0)).sqrt(),
            Self::Constant { c } => *c,
            Self::Tabulated { points } => interpolate(points, u),
        }
    }

    /// Whether the raw family is globally Lipschitz.
    pub fn is_lipschitz(&self) -> bool {
        match self {
            Self::Linear { .. } | Self::Constant { .. } | Self::Tabulated { .. } => true,
            Self::Power { beta } => *beta == 1.0,
            Self::SqrtPos | Self::Stepstone => false,
        }
    }

    /// A constant `C` with `|φ(u)| ≤ C(1 + |u|)` for all `u`.
    pub fn growth_constant(&self) -> f64 {
        match self {
            Self::Linear { a, b } => a.abs().max(b.abs()),
            // |u|^β ≤ 1 + |u| for β ∈ (0, 1]
            Self::Power { .. } | Self::SqrtPos => 1.0,
            Self::Stepstone => 0.5,
            Self::Constant { c } => c.abs(),
            Self::Tabulated { points } => points.iter().map(|p| p[1].abs()).fold(0.0, f64::max),
        }
    }

    /// Points where `φ` itself is not smooth.
    fn kinks(&self) -> Vec<f64> {
        match self {
            Self::Power { .. } | Self::SqrtPos => vec![0.0],
            Self::Stepstone => vec![0.0, 1.0],
            Self::Tabulated { points } => points.iter().map(|p| p[0]).collect(),
            _ => Vec::new(),
        }
    }

    /// Points where `φ(v) = ±level`, i.e. where clamping introduces a kink.
    fn clamp_crossings(&self, level: f64) -> Vec<f64> {
        match self {
            Self::Linear { a, b } if *b != 0.0 => vec![(level - a) / b, (-level - a) / b],
            Self::Power { beta } => {
                let r = level.powf(1.0 / beta);
                vec![-r, r]
            }
            Self::SqrtPos => vec![level * level],
            Self::Tabulated { points } => {
                let mut out = Vec::new();
                for w in points.windows(2) {
                    let ([x0, y0], [x1, y1]) = (w[0], w[1]);
                    for target in [level, -level] {
                        if (y0 - target) * (y1 - target) < 0.0 {
                            out.push(x0 + (target - y0) * (x1 - x0) / (y1 - y0));
                        }
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

fn interpolate(points: &[[f64; 2]], u: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if u <= first[0] {
        return first[1];
    }
    if u >= last[0] {
        return last[1];
    }
    let idx = points.partition_point(|p| p[0] <= u);
    let ([x0, y0], [x1, y1]) = (points[idx - 1], points[idx]);
    y0 + (u - x0) * (y1 - y0) / (x1 - x0)
}

/// A noise coefficient at mollification level `n` (`n = 0` is the raw `φ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    #[serde(default)]
    pub n: u32,
    /// Quadrature nodes per panel.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    64
}

impl CoefficientSpec {
    pub fn new(family: CoefficientFamily, n: u32) -> Self {
        Self {
            family,
            n,
            nodes: default_nodes(),
        }
    }

    pub fn at_level(&self, n: u32) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.nodes < 4 {
            return Err(Error::config(format!(
                "quadrature nodes = {} too few",
                self.nodes
            )));
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        if self.n == 0 {
            return self.family.raw(u);
        }
        Mollifier::new(self).value(u)
    }
}

/// Evaluates `φⁿ` and its derivative with a fixed panel rule.
pub struct Mollifier<'a> {
    family: &'a CoefficientFamily,
    level: f64,
    sigma: f64,
    rule: TanhSinh,
    breaks: Vec<f64>,
}

impl<'a> Mollifier<'a> {
    pub fn new(spec: &'a CoefficientSpec) -> Self {
        assert!(spec.n >= 1, "mollifier needs n >= 1");
        let level = spec.n as f64;
        let mut breaks = spec.family.kinks();
        breaks.extend(spec.family.clamp_crossings(level));
        breaks.retain(|b| b.is_finite());
        Self {
            family: &spec.family,
            level,
            sigma: 1.0 / level.sqrt(),
            rule: TanhSinh::with_nodes(spec.nodes),
            breaks,
        }
    }

    fn panels(&self, u: f64) -> Vec<f64> {
        // Width-2 panels keep the Gaussian bulk resolved; kinks add further breaks.
        let mut pts: Vec<f64> = (0..=10).map(|i| -WINDOW + 2.0 * i as f64).collect();
        for b in &self.breaks {
            let s = (b - u) / self.sigma;
            if s > -WINDOW && s < WINDOW {
                pts.push(s);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn clamped(&self, v: f64) -> f64 {
        self.family.raw(v).clamp(-self.level, self.level)
    }

    pub fn value(&self, u: f64) -> f64 {
        if let CoefficientFamily::Constant { c } = self.family {
            return c.clamp(-self.level, self.level);
        }
        let norm = 1.0 / (2.0 * PI).sqrt();
        let v = self.rule.integrate_panels(&self.panels(u), |s| {
            self.clamped(u + self.sigma * s) * norm * (-0.5 * s * s).exp()
        });
        v.clamp(-self.level, self.level)
    }

    /// `(φⁿ(u), φⁿ'(u))`, the derivative by `d/du E[g(u+σS)] = E[g(u+σS)·S]/σ`.
    pub fn value_and_slope(&self, u: f64) -> (f64, f64) {
        if let CoefficientFamily::Constant { c } = self.family {
            return (c.clamp(-self.level, self.level), 0.0);
        }
        let norm = 1.0 / (2.0 * PI).sqrt();
        let panels = self.panels(u);
        let mut value = 0.0;
        let mut slope = 0.0;
        for w in panels.windows(2) {
            self.rule.for_each_node(w[0], w[1], |s, weight| {
                let g = self.clamped(u + self.sigma * s) * weight * norm * (-0.5 * s * s).exp();
                value += g;
                slope += g * s;
            });
        }
        (value.clamp(-self.level, self.level), slope / self.sigma)
    }
}

/// Anything the solver can evaluate as `φⁿ(u)`.
pub trait NoiseCoefficient: Sync {
    fn value(&self, u: f64) -> f64;
}

impl NoiseCoefficient for CoefficientSpec {
    fn value(&self, u: f64) -> f64 {
        self.eval(u)
    }
}

/// `φⁿ` tabulated on `[−range, range]` for cubic Hermite interpolation with
/// node spacing `σ/32`, falling back to direct quadrature outside the table.
/// For `n = 0` the raw family is evaluated directly.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    spec: CoefficientSpec,
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CoefficientTable {
    pub const DEFAULT_RANGE: f64 = 64.0;

    pub fn new(spec: &CoefficientSpec) -> Result<Self> {
        Self::with_range(spec, Self::DEFAULT_RANGE)
    }

    pub fn with_range(spec: &CoefficientSpec, range: f64) -> Result<Self> {
        spec.validate()?;
        let mut table = Self {
            spec: spec.clone(),
            lo: -range,
            step: 1.0,
            values: Vec::new(),
            slopes: Vec::new(),
        };
        if spec.n == 0 {
            return Ok(table);
        }
        let sigma = 1.0 / (spec.n as f64).sqrt();
        let cells = (2.0 * range / (sigma / 32.0)).ceil() as usize;
        table.step = 2.0 * range / cells as f64;
        let moll = Mollifier::new(spec);
        let (values, slopes) = (0..=cells)
            .map(|i| moll.value_and_slope(-range + i as f64 * table.step))
            .unzip();
        table.values = values;
        table.slopes = slopes;
        Ok(table)
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }
}

impl NoiseCoefficient for CoefficientTable {
    fn value(&self, u: f64) -> f64 {
        if self.values.is_empty() {
            return self.spec.family.raw(u);
        }
        let pos = (u - self.lo) / self.step;
        if !(pos >= 0.0 && pos < (self.values.len() - 1) as f64) {
            return self.spec.eval(u);
        }
        let i = pos as usize;
        let s = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

/// Finite-difference Lipschitz scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    pub slope: f64,
    /// False for a raw (`n = 0`) non-Lipschitz family: the scan then grows
    /// without bound under refinement and the value is not a constant.
    pub reliable: bool,
}

pub fn lipschitz_estimate(
    spec: &CoefficientSpec,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<LipschitzEstimate> {
    if !(hi > lo) || samples < 2 {
        return Err(Error::config(format!(
            "lipschitz scan needs a nonempty range and >= 2 samples, got [{lo}, {hi}] x {samples}"
        )));
    }
    let h = (hi - lo) / (samples - 1) as f64;
    let values = sample_coefficient(spec, lo, h, samples);
    let slope = values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0, f64::max);
    Ok(LipschitzEstimate {
        slope,
        reliable: spec.n >= 1 || spec.family.is_lipschitz(),
    })
}

fn sample_coefficient(spec: &CoefficientSpec, lo: f64, h: f64, samples: usize) -> Vec<f64> {
    let at = |i: usize| lo + i as f64 * h;
    if spec.n == 0 {
        (0..samples).map(|i| spec.family.raw(at(i))).collect()
    } else {
        let m = Mollifier::new(spec);
        (0..samples).map(|i| m.value(at(i))).collect()
    }
}

/// Constants `(eps_n, C)` with `|φⁿ(u)| ≤ eps_n + C(1 + |u|)` on a probe range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthConstants {
    pub eps_n: f64,
    pub c: f64,
}

/// `C` is the family's analytic growth constant; `eps_n` is the smallest
/// offset making the bound hold on 401 probe points of `[lo, hi]`.
pub fn linear_growth_constants(
    spec: &CoefficientSpec,
    lo: f64,
    hi: f64,
) -> Result<GrowthConstants> {
    if !(hi >= lo) {
        return Err(Error::config(format!("empty probe range [{lo}, {hi}]")));
    }
    let samples = 401;
    let h = (hi - lo) / (samples - 1) as f64;
    let c = spec.family.growth_constant();
    let values = sample_coefficient(spec, lo, h, samples);
    let eps_n = values
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() - c * (1.0 + (lo + i as f64 * h).abs()))
        .fold(0.0, f64::max);
    Ok(GrowthConstants { eps_n, c })
}

/// The built-in families used by the convergence checks.
pub fn builtin_families() -> Vec<(&'static str, CoefficientFamily)> {
    vec![
        ("linear", CoefficientFamily::Linear { a: 1.0, b: 2.0 }),
        ("power", CoefficientFamily::Power { beta: 0.5 }),
        ("sqrt_pos", CoefficientFamily::SqrtPos),
        ("stepstone", CoefficientFamily::Stepstone),
        ("constant", CoefficientFamily::Constant { c: 0.5 }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: CoefficientFamily, n: u32) -> CoefficientSpec {
        CoefficientSpec::new(family, n)
    }

    /// Oracle: dense trapezoid convolution with the Gaussian, independent of the panel rule.
    fn convolve(family: &CoefficientFamily, n: u32, u: f64) -> f64 {
        let level = n as f64;
        let sigma = 1.0 / level.sqrt();
        let m = 400_000;
        let h = 24.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let s = -12.0 + i as f64 * h;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * family.raw(u + sigma * s).clamp(-level, level) * (-0.5 * s * s).exp()
                / (2.0 * PI).sqrt();
        }
        acc * h
    }

    #[test]
    fn raw_families() {
        assert_eq!(CoefficientFamily::SqrtPos.raw(-1.0), 0.0);
        assert_eq!(CoefficientFamily::SqrtPos.raw(4.0), 2.0);
        assert_eq!(CoefficientFamily::Stepstone.raw(0.5), 0.5);
        assert_eq!(CoefficientFamily::Stepstone.raw(2.0), 0.0);
        assert_eq!(CoefficientFamily::Stepstone.raw(-2.0), 0.0);
        assert_eq!(CoefficientFamily::Power { beta: 0.5 }.raw(-9.0), 3.0);
        let tab = CoefficientFamily::Tabulated {
            points: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 0.0]],
        };
        assert_eq!(tab.raw(0.5), 1.0);
        assert_eq!(tab.raw(-5.0), 0.0);
        assert_eq!(tab.raw(1.5), 1.0);
    }

    #[test]
    fn validation() {
        assert!(CoefficientFamily::Power { beta: 1.5 }.validate().is_err());
        assert!(CoefficientFamily::Power { beta: 0.0 }.validate().is_err());
        let bad = CoefficientFamily::Tabulated {
            points: vec![[1.0, 0.0], [0.0, 1.0]],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_is_exact() {
        let s = spec(CoefficientFamily::Constant { c: 0.75 }, 4);
        for u in [-3.0, 0.0, 2.5] {
            assert_eq!(s.eval(u), 0.75);
        }
        // clamp engages when |c| > n
        assert_eq!(
            spec(CoefficientFamily::Constant { c: 7.0 }, 4).eval(0.0),
            4.0
        );
    }

    #[test]
    fn odd_linear_vanishes_at_origin() {
        for n in [1, 4, 16] {
            let v = spec(CoefficientFamily::Linear { a: 0.0, b: 1.0 }, n).eval(0.0);
            assert!(v.abs() < 1e-14, "n={n} v={v}");
        }
    }

    #[test]
    fn power_approaches_raw_at_one() {
        let fam = CoefficientFamily::Power { beta: 0.5 };
        let mut last_err = f64::INFINITY;
        for n in [4, 16, 64] {
            let v = spec(fam.clone(), n).eval(1.0);
            let oracle = convolve(&fam, n, 1.0);
            assert!((v - oracle).abs() < 1e-8, "n={n} v={v} oracle={oracle}");
            let err = (v - 1.0).abs();
            assert!(err < last_err);
            last_err = err;
        }
    }

    #[test]
    fn matches_dense_convolution_for_all_builtins() {
        for (_, fam) in builtin_families() {
            for n in [1, 4, 64] {
                for u in [-1.3, 0.0, 0.4, 1.0, 2.2] {
                    let v = spec(fam.clone(), n).eval(u);
                    let oracle = convolve(&fam, n, u);
                    assert!(
                        (v - oracle).abs() < 1e-7,
                        "{fam:?} n={n} u={u}: {v} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn clamp_bound() {
        let s = spec(CoefficientFamily::Linear { a: 3.0, b: 5.0 }, 2);
        for i in -50..=50 {
            assert!(s.eval(i as f64 * 0.3).abs() <= 2.0);
        }
    }

    #[test]
    fn lipschitz_linear_and_constant() {
        let e = lipschitz_estimate(
            &spec(CoefficientFamily::Linear { a: 1.0, b: -3.0 }, 64),
            -2.0,
            2.0,
            201,
        )
        .unwrap();
        assert!((e.slope - 3.0).abs() < 1e-6, "{}", e.slope);
        let e = lipschitz_estimate(
            &spec(CoefficientFamily::Constant { c: 2.0 }, 4),
            -2.0,
            2.0,
            201,
        )
        .unwrap();
        assert_eq!(e.slope, 0.0);
        assert!(lipschitz_estimate(&spec(CoefficientFamily::SqrtPos, 4), 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn lipschitz_power_finite_and_growing() {
        let fam = CoefficientFamily::Power { beta: 0.5 };
        let a = lipschitz_estimate(&spec(fam.clone(), 16), -2.0, 2.0, 801).unwrap();
        let b = lipschitz_estimate(&spec(fam.clone(), 16), -2.0, 2.0, 1601).unwrap();
        assert!(a.slope.is_finite() && a.reliable);
        assert!((a.slope - b.slope).abs() / b.slope < 0.05);
        let c = lipschitz_estimate(&spec(fam.clone(), 64), -2.0, 2.0, 1601).unwrap();
        assert!(c.slope > b.slope);
        let raw = lipschitz_estimate(&spec(fam, 0), -2.0, 2.0, 1601).unwrap();
        assert!(!raw.reliable);
    }

    #[test]
    fn growth_constants() {
        let g = linear_growth_constants(
            &spec(CoefficientFamily::Constant { c: 0.5 }, 4),
            -10.0,
            10.0,
        )
        .unwrap();
        assert_eq!((g.eps_n, g.c), (0.0, 0.5));
        let g = linear_growth_constants(
            &spec(CoefficientFamily::Linear { a: 1.0, b: 2.0 }, 16),
            -10.0,
            10.0,
        )
        .unwrap();
        assert_eq!(g.c, 2.0);
        assert!(g.eps_n < 1e-9);
        let g = linear_growth_constants(
            &spec(CoefficientFamily::Power { beta: 0.5 }, 16),
            -10.0,
            10.0,
        )
        .unwrap();
        assert_eq!(g.c, 1.0);
        assert!(g.eps_n < 1e-9);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for (_, fam) in builtin_families() {
            let s = spec(fam, 16);
            let table = CoefficientTable::with_range(&s, 8.0).unwrap();
            for i in 0..400 {
                let u = -10.0 + i as f64 * 0.0503;
                let d = (table.value(u) - s.eval(u)).abs();
                assert!(d < 1e-8, "{:?} u={u} diff={d}", s.family);
            }
        }
    }
}
