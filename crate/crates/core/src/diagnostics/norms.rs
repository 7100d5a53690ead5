use crate::solver::PathSample;
use crate::{Error, Result};

/// `||v||_p^p = ∫₀^L |v|^p dx` by the trapezoid rule on interior values,
/// with the zero boundary nodes implied.
pub fn lp_norm_p(values: &[f64], p: f64, dx: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * dx
}

/// Trapezoid `∫|v|^p` over values that include both end nodes.
pub fn lp_norm_p_full(values: &[f64], p: f64, dx: f64) -> f64 {
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    crate::quadrature::trapezoid(&powered, dx)
}

/// `||u_T(· + s) − u_T||_p^p` for each shift `s` (multiples of `dx`), with `u`
/// extended by zero outside `[0, L]`.
pub fn spatial_modulus(path: &PathSample, p: f64, shifts: &[f64]) -> Result<Vec<f64>> {
    spatial_modulus_of_state(path.final_state(), path.grid.dx(), p, shifts)
}

/// [`spatial_modulus`] for a single interior state.
pub fn spatial_modulus_of_state(
    state: &[f64],
    dx: f64,
    p: f64,
    shifts: &[f64],
) -> Result<Vec<f64>> {
    let mut full = Vec::with_capacity(state.len() + 2);
    full.push(0.0);
    full.extend_from_slice(state);
    full.push(0.0);
    let nodes = full.len();
    shifts
        .iter()
        .map(|&s| {
            if !(s >= 0.0) {
                return Err(Error::config(format!("shift {s} must be >= 0")));
            }
            let k = (s / dx).round();
            if (k * dx - s).abs() > 1e-9 * dx.max(s) {
                return Err(Error::config(format!(
                    "shift {s} is not a multiple of dx = {dx}"
                )));
            }
            let k = k as usize;
            let diff: Vec<f64> = (0..nodes)
                .map(|i| full.get(i + k).copied().unwrap_or(0.0) - full[i])
                .collect();
            Ok(lp_norm_p_full(&diff, p, dx))
        })
        .collect()
}
