use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::coefficients::CoefficientFamily;
use crate::quadrature::integrate_adaptive;
use crate::solver::solve_path;

fn deterministic_experiment(ic: InitialCondition, family: CoefficientFamily) -> Experiment {
    Experiment {
        grid: GridSpec::new(1.0, 31, 0.1, 40).unwrap(),
        noise: StableNoiseSpec::symmetric(1.3, 1.0).unwrap(),
        ic,
        coeff: CoefficientSpec::new(family, 0),
        master_seed: 17,
    }
}

#[test]
fn lp_norm_basics() {
    assert_eq!(lp_norm_p(&[0.0; 10], 1.5, 0.1), 0.0);
    let nx = 999;
    let dx = 1.0 / (nx + 1) as f64;
    assert!((lp_norm_p(&vec![1.0; nx], 2.0, dx) - 1.0).abs() < 2e-3);
    let sine: Vec<f64> = (1..=nx).map(|i| (PI * i as f64 * dx).sin()).collect();
    assert!((lp_norm_p(&sine, 2.0, dx) - 0.5).abs() < 1e-12);
}

#[test]
fn sup_moment_deterministic_sine() {
    let exp = deterministic_experiment(
        InitialCondition::Sine { k: 1 },
        CoefficientFamily::Constant { c: 0.0 },
    );
    let est = estimate_sup_moment(&exp, 1.5, 0, 8).unwrap();
    let u0 = exp.ic.sample(&exp.grid);
    let expected = lp_norm_p(&u0, 1.5, exp.grid.dx());
    assert_eq!(est.estimate.mean, expected);
    assert_eq!(est.estimate.stderr, 0.0);
    assert_eq!(est.regime, Regime::FunctionValued);
}

#[test]
fn sup_moment_zero_fixed_point() {
    let exp = deterministic_experiment(
        InitialCondition::Zero,
        CoefficientFamily::Linear { a: 0.0, b: 1.0 },
    );
    let est = estimate_sup_moment(&exp, 1.5, 0, 8).unwrap();
    assert_eq!(est.estimate.mean, 0.0);
    assert!(estimate_sup_moment(&exp, 1.2, 0, 8).is_err());
}

#[test]
fn regime_classification() {
    assert_eq!(Regime::classify(1.3, 1.5).unwrap(), Regime::FunctionValued);
    assert_eq!(Regime::classify(1.8, 1.9).unwrap(), Regime::MeasureValued);
    assert!(Regime::classify(1.5, 1.4).is_err());
    assert!(!Regime::FunctionValued.admits(1.8, 1.9));
    assert!(Regime::MeasureValued.admits(1.8, 1.9));
}

#[test]
fn temporal_modulus_zero_lag_and_closed_form() {
    let exp = deterministic_experiment(
        InitialCondition::Sine { k: 1 },
        CoefficientFamily::Constant { c: 0.0 },
    );
    let dt = exp.grid.dt();
    let rep = temporal_modulus(&exp, 2.0, 0, &[0.0, dt, 4.0 * dt], 4).unwrap();
    assert_eq!(rep.entries[0].estimate.mean, 0.0);
    // the path is r^j·sin(πx_i); the largest increment over a lag is the first one
    let g = exp.grid;
    let lam = (1.0 - (PI * g.dx()).cos()) / (g.dx() * g.dx());
    let r = 1.0 / (1.0 + dt * lam);
    for (entry, h) in rep.entries[1..].iter().zip([1, 4]) {
        // ||sin||² on the grid is exactly 1/2
        let expected = (1.0 - r.powi(h)).powi(2) * 0.5;
        assert!(
            (entry.estimate.mean - expected).abs() < 1e-12,
            "{} vs {expected}",
            entry.estimate.mean
        );
    }
    assert!(temporal_modulus(&exp, 2.0, 0, &[1.0], 4).is_err());
    assert!(temporal_modulus(&exp, 2.0, 0, &[0.3 * dt], 4).is_err());
}

#[test]
fn spatial_modulus_cases() {
    let g = GridSpec::new(1.0, 63, 0.05, 20).unwrap();
    let c = CoefficientSpec::new(CoefficientFamily::Constant { c: 0.0 }, 0);
    let path = solve_path(
        &g,
        &InitialCondition::Sine { k: 1 },
        &c,
        &StableNoiseSpec::symmetric(1.5, 1.0).unwrap(),
        1,
        0,
    )
    .unwrap();
    let p = 1.5;
    let out = spatial_modulus(&path, p, &[0.0, g.dx(), 1.0]).unwrap();
    assert_eq!(out[0], 0.0);
    assert!((out[2] - lp_norm_p(path.final_state(), p, g.dx())).abs() < 1e-14);
    // continuum: A^p ∫_0^L |s(x+dx) − s(x)|^p dx with s = sin(π·) extended by zero
    let amp = (-PI * PI * g.horizon / 2.0).exp();
    let dx = g.dx();
    let (cont, _) = integrate_adaptive(0.0, 1.0, 1e-12, |x| {
        let shifted = if x + dx <= 1.0 {
            (PI * (x + dx)).sin()
        } else {
            0.0
        };
        (amp * (shifted - (PI * x).sin())).abs().powf(p)
    });
    assert!((out[1] - cont).abs() / cont < 0.03, "{} vs {cont}", out[1]);
    assert!(spatial_modulus(&path, p, &[-dx]).is_err());
    assert!(spatial_modulus(&path, p, &[0.5 * dx]).is_err());
}

#[test]
fn ks_known_values() {
    let a = [0.1, 0.5, 0.9, 0.3];
    assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
    assert_eq!(ks_distance(&[0.0; 5], &[1.0; 7]).unwrap(), 1.0);
    assert_eq!(ks_distance(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 0.5);
    assert!(matches!(ks_distance(&[], &a), Err(Error::EmptySample(_))));
}

#[test]
fn bootstrap_interval_brackets_statistic() {
    let a: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 0.2).collect();
    let ks = ks_distance(&a, &b).unwrap();
    let mut s = RandomStream::auxiliary(1, 0);
    let (lo, hi) = ks_bootstrap_ci(&a, &b, 200, 0.9, &mut s).unwrap();
    assert!(lo <= ks + 0.05 && ks - 0.05 <= hi && lo <= hi);
}

#[test]
fn beta_window_values() {
    let (lo, hi) = beta_window(1.5).unwrap().unwrap();
    assert_eq!((lo, hi), (1.0 / 3.0, 0.5));
    assert_eq!(beta_window(5.0 / 3.0).unwrap(), None);
    let (lo, hi) = beta_window(1.2).unwrap().unwrap();
    assert!((lo - 1.0 / 6.0).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
    assert!(beta_window(1.0).is_err());
}

#[test]
fn factorization_constant_matches_quadrature() {
    for beta in [0.2, 0.35, 0.5, 0.8] {
        let (s, t) = (0.3, 1.7);
        // split at the midpoint so each singular endpoint sits at the origin
        let half = 0.5 * (t - s);
        let (left, ok1) = integrate_adaptive(0.0, half, 1e-12, |w: f64| {
            (t - s - w).powf(beta - 1.0) * w.powf(-beta)
        });
        let (right, ok2) = integrate_adaptive(0.0, half, 1e-12, |v: f64| {
            v.powf(beta - 1.0) * (t - s - v).powf(-beta)
        });
        assert!(ok1 && ok2);
        let v = left + right;
        let c = factorization_constant(beta).unwrap();
        assert!((v - c).abs() / c < 1e-8, "beta={beta}: {v} vs {c}");
    }
}

#[test]
fn decay_fit_needs_three_times() {
    let cfg = KernelConfig::new(1.0).unwrap();
    assert!(kernel_decay_fit(&cfg, 2.0, &[1e-4, 1e-3]).is_err());
    let fit = kernel_decay_fit(&cfg, 1.0, &[1e-4, 1e-3, 1e-2]).unwrap();
    assert!(fit.slope.abs() < 1e-3);
}

#[test]
fn uniform_bound_rule() {
    let e = |m: f64, se: f64| Estimate {
        mean: m,
        stderr: se,
        count: 100,
    };
    assert!(uniform_bound_holds(
        &[e(1.0, 0.1), e(1.1, 0.1), e(0.95, 0.1)],
        3.0
    ));
    assert!(!uniform_bound_holds(
        &[e(1.0, 0.01), e(2.0, 0.01), e(1.0, 0.01)],
        3.0
    ));
    assert!(non_increasing_within(
        &[e(2.0, 0.1), e(1.0, 0.1), e(1.1, 0.1)],
        2.0
    ));
    assert!(!non_increasing_within(&[e(1.0, 0.01), e(2.0, 0.01)], 2.0));
}

proptest! {
    #[test]
    fn lp_norm_homogeneous(v in proptest::collection::vec(-10.0f64..10.0, 5..40), c in -5.0f64..5.0, p in 1.0f64..3.0) {
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let lhs = lp_norm_p(&scaled, p, 0.1);
        let rhs = c.abs().powf(p) * lp_norm_p(&v, p, 0.1);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn minkowski(pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40), p in 1.0f64..3.0) {
        let u: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let v: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        let w: Vec<f64> = pairs.iter().map(|x| x.0 + x.1).collect();
        let n = |x: &[f64]| lp_norm_p(x, p, 0.05).powf(1.0 / p);
        prop_assert!(n(&w) <= n(&u) + n(&v) + 1e-12);
    }

    #[test]
    fn ks_symmetric_and_bounded(a in proptest::collection::vec(-5.0f64..5.0, 1..60), b in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
        let ab = ks_distance(&a, &b).unwrap();
        let ba = ks_distance(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn beta_window_nonempty_iff_below_five_thirds(p in 1.0001f64..3.0) {
        let w = beta_window(p).unwrap();
        prop_assert_eq!(w.is_some(), p < 5.0 / 3.0);
        if let Some((lo, hi)) = w {
            prop_assert!(lo < hi);
        }
    }
}
