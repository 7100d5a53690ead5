use std::f64::consts::PI;

use proptest::prelude::*;

use stable_heat::coefficients::{CoefficientFamily, CoefficientSpec, Mollifier};
use stable_heat::heat_kernel::{eval_kernel, KernelConfig};
use stable_heat::rng::RandomStream;
use stable_heat::solver::{
    default_test_function, default_test_function_second_derivative, pairing, GridSpec,
    InitialCondition, Stepper,
};
use stable_heat::stable_noise::{sample_increment_field, StableNoiseSpec};

fn family() -> impl Strategy<Value = CoefficientFamily> {
    prop_oneof![
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| CoefficientFamily::Linear { a, b }),
        (0.1..1.0f64).prop_map(|beta| CoefficientFamily::Power { beta }),
        Just(CoefficientFamily::SqrtPos),
        Just(CoefficientFamily::Stepstone),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_symmetric_and_nonnegative(
        t in 1e-4..2.0f64,
        x in 0.0..1.0f64,
        y in 0.0..1.0f64,
    ) {
        let cfg = KernelConfig::new(1.0).unwrap();
        let a = eval_kernel(&cfg, t, x, y).unwrap();
        let b = eval_kernel(&cfg, t, y, x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= -cfg.tol);
    }

    #[test]
    fn noise_field_deterministic_per_stream(
        seed in any::<u64>(),
        replica in 0u64..1000,
        alpha in 1.05..1.95f64,
    ) {
        let spec = StableNoiseSpec::symmetric(alpha, 1.0).unwrap();
        let grid = GridSpec::new(1.0, 7, 0.1, 8).unwrap();
        let draw = |r: u64| {
            let mut s = RandomStream::for_replica(seed, r);
            sample_increment_field(&spec, &grid, &mut s).unwrap()
        };
        let a = draw(replica);
        prop_assert_eq!(&a, &draw(replica));
        let other = draw(replica + 1);
        prop_assert_ne!(a.values(), other.values());
        prop_assert!(a.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mollifier_stable_under_node_doubling(fam in family(), n in 1u32..300, u in -3.0..3.0f64) {
        let coarse = CoefficientSpec::new(fam.clone(), n);
        let fine = CoefficientSpec { nodes: 2 * coarse.nodes, ..coarse.clone() };
        let a = Mollifier::new(&coarse).value(u);
        let b = Mollifier::new(&fine).value(u);
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn mollifier_bounded_by_level(fam in family(), n in 1u32..64, u in -20.0..20.0f64) {
        let spec = CoefficientSpec::new(fam, n);
        prop_assert!(Mollifier::new(&spec).value(u).abs() <= n as f64 + 1e-12);
    }

    /// With no noise, `⟨u_{j+1} − u_j, ψ⟩ = (dt/2)⟨u_{j+1}, ψ''⟩` up to the
    /// second-order discretization error of the Laplacian.
    #[test]
    fn noiseless_weak_form_residual(
        center in 0.3..0.7f64,
        width in 0.2..0.3f64,
        nx in prop::sample::select(vec![63usize, 127]),
    ) {
        let grid = GridSpec::new(1.0, nx, 0.05, 50).unwrap();
        let stepper = Stepper::new(&grid).unwrap();
        let zero_coeff = CoefficientSpec::new(CoefficientFamily::Constant { c: 0.0 }, 0);
        let psi = default_test_function(&grid);
        let psi2 = default_test_function_second_derivative(&grid);
        let dx = grid.dx();
        let mut u = InitialCondition::Bump { center, width }.sample(&grid);
        let zero = vec![0.0; nx];
        let mut worst: f64 = 0.0;
        for _ in 0..grid.nt {
            let before = pairing(&u, &psi, dx);
            stepper.advance(&mut u, &zero, &zero_coeff);
            let residual = pairing(&u, &psi, dx) - before - 0.5 * grid.dt() * pairing(&u, &psi2, dx);
            worst = worst.max(residual.abs());
        }
        // sin³ = (3 sin − sin 3·)/4, so its fourth derivative is bounded by 21π⁴
        let bound = grid.dt() * dx * dx * 21.0 * PI.powi(4) / 24.0;
        prop_assert!(worst <= bound, "{} > {}", worst, bound);
    }
}
