use rand::Rng;

use super::percentile_interval;
use crate::rng::RandomStream;
use crate::{Error, Result};

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample("ks_distance"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(sorted_ks(&a, &b))
}

fn sorted_ks(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // step past every copy of the smallest remaining value in both samples
        let x = if a[i].total_cmp(&b[j]).is_le() {
            a[i]
        } else {
            b[j]
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Paired percentile bootstrap interval for the KS distance: replica indices
/// are resampled jointly because sample `k` of `a` and of `b` share noise.
pub fn ks_bootstrap_ci(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    level: f64,
    stream: &mut RandomStream,
) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample("ks_bootstrap_ci"));
    }
    if a.len() != b.len() {
        return Err(Error::config("paired bootstrap needs equal sample sizes"));
    }
    let n = a.len();
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for k in 0..n {
            let idx = stream.random_range(0..n);
            ra[k] = a[idx];
            rb[k] = b[idx];
        }
        ra.sort_by(f64::total_cmp);
        rb.sort_by(f64::total_cmp);
        stats.push(sorted_ks(&ra, &rb));
    }
    Ok(percentile_interval(stats, level))
}
