//! Deterministic quadrature rules shared by the mollifier, the kernel checks
//! and the noise-measure checks.

use std::f64::consts::FRAC_PI_2;

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    /// Negative when the node sits in the left half.
    t: f64,
    /// Distance to the nearer endpoint as a fraction of the interval length.
    edge: f64,
    weight: f64,
}

/// Tanh-sinh (double-exponential) rule on a finite interval.
///
/// Nodes cluster doubly-exponentially at both endpoints, so integrable
/// endpoint singularities and kinks placed on panel boundaries are handled
/// without loss of the exponential convergence rate. Distances to the
/// endpoints are carried separately so nodes next to an endpoint at the
/// origin keep full relative precision.
#[derive(Clone, Debug)]
pub struct TanhSinh {
    nodes: Vec<Node>,
}

impl TanhSinh {
    /// A rule with `2 * half + 1` nodes on `t ∈ [-t_max, t_max]`.
    pub fn new(half: usize, t_max: f64) -> Self {
        assert!(half >= 1 && t_max > 0.0);
        let h = t_max / half as f64;
        let nodes = (-(half as i64)..=half as i64)
            .map(|j| {
                let t = j as f64 * h;
                let s = FRAC_PI_2 * t.sinh();
                // 1/(1 + e^{2|s|}) is (1 - |x|)/2 for x = tanh(s), without cancellation.
                let edge = 1.0 / (1.0 + (2.0 * s.abs()).exp());
                let cosh_s = s.cosh();
                // dx/dt for x in [-1, 1]; halved because the map is onto a unit-length interval.
                let weight = 0.5 * h * FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
                Node { t, edge, weight }
            })
            .filter(|n| n.weight > 0.0 && n.edge > 0.0)
            .collect();
        Self { nodes }
    }

    /// Rule with roughly `count` nodes, suited to bounded integrands.
    pub fn with_nodes(count: usize) -> Self {
        Self::new((count / 2).max(1), 3.5)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut sum = 0.0;
        self.for_each_node(a, b, |x, w| sum += w * f(x));
        sum
    }

    /// Visits every `(abscissa, weight)` pair of the rule mapped onto `[a, b]`.
    pub fn for_each_node<F: FnMut(f64, f64)>(&self, a: f64, b: f64, mut f: F) {
        let width = b - a;
        for node in &self.nodes {
            let x = if node.t <= 0.0 {
                a + width * node.edge
            } else {
                b - width * node.edge
            };
            f(x, node.weight * width);
        }
    }

    /// Integrates across `breaks`, one panel per consecutive pair of points.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }
}

/// Tanh-sinh quadrature refined by halving the step until two successive
/// levels agree to `rel_tol`. Returns the last estimate and whether the
/// tolerance was met.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    rel_tol: f64,
    mut f: F,
) -> (f64, bool) {
    const T_MAX: f64 = 6.0;
    let mut half = 12;
    let mut prev = TanhSinh::new(half, T_MAX).integrate(a, b, &mut f);
    for _ in 0..10 {
        half *= 2;
        let next = TanhSinh::new(half, T_MAX).integrate(a, b, &mut f);
        if (next - prev).abs() <= rel_tol * next.abs() {
            return (next, true);
        }
        prev = next;
    }
    (prev, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_on_linear() {
        let xs: Vec<f64> = (0..11).map(|i| 2.0 + i as f64 * 0.1).collect();
        let v = trapezoid(&xs, 0.1);
        // ∫_0^1 (2 + x) dx = 2.5
        assert!((v - 2.5).abs() < 1e-12);
        assert_eq!(trapezoid(&[3.0], 1.0), 0.0);
    }

    #[test]
    fn tanh_sinh_polynomial_and_singular() {
        let rule = TanhSinh::with_nodes(64);
        let v = rule.integrate(0.0, 2.0, |x| x * x);
        assert!((v - 8.0 / 3.0).abs() < 1e-12, "{v}");
        let v = rule.integrate(0.0, 1.0, |x| x.sqrt());
        assert!((v - 2.0 / 3.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn adaptive_handles_strong_endpoint_singularity() {
        // ∫_0^1 x^{-0.9} dx = 10
        let (v, ok) = integrate_adaptive(0.0, 1.0, 1e-10, |x| x.powf(-0.9));
        assert!(ok);
        assert!((v - 10.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn panels_split_a_kink() {
        let rule = TanhSinh::with_nodes(32);
        let v = rule.integrate_panels(&[-1.0, 0.3, 1.0], |x: f64| (x - 0.3).abs());
        let exact = 0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7;
        assert!((v - exact).abs() < 1e-13);
    }
}
