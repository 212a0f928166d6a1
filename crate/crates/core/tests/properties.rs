use std::sync::Arc;

use aggdiff_core::grid::unit_sphere_area;
use aggdiff_core::riesz::angular_weight;
use aggdiff_core::solver::Solver;
use aggdiff_core::special::{gamma, zeta};
use aggdiff_core::{KernelMatrix, ModelParams, Profile, RadialGrid};
use proptest::prelude::*;

fn small_setup() -> &'static KernelMatrix {
    static CELL: std::sync::OnceLock<KernelMatrix> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let p = ModelParams::new(3, 1.25).unwrap();
        let g = Arc::new(RadialGrid::new(10.0, 32, 3).unwrap());
        KernelMatrix::assemble(g, p).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angular_weight_symmetric_and_positive(
        d in 3usize..7,
        frac in 0.05f64..0.95,
        r in 0.01f64..20.0,
        rho in 0.01f64..20.0,
    ) {
        let s = 1.0 + frac * (d as f64 / 2.0 - 1.0);
        let p = ModelParams::new(d, s).unwrap();
        let a = angular_weight(r, rho, &p);
        let b = angular_weight(rho, r, &p);
        prop_assert!(a > 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn far_field_weight_is_point_mass(d in 3usize..6, frac in 0.1f64..0.9, rho in 1e3f64..1e5) {
        // Seen from far away the inner sphere looks like a point.
        let s = 1.0 + frac * (d as f64 / 2.0 - 1.0);
        let p = ModelParams::new(d, s).unwrap();
        let w = angular_weight(1e-3, rho, &p) / unit_sphere_area(d);
        let point = rho.powf(-p.beta()) / p.beta();
        prop_assert!((w / point - 1.0).abs() < 1e-5);
    }

    #[test]
    fn norms_are_homogeneous(values in prop::collection::vec(0.0f64..10.0, 16), k in 0.0f64..5.0, q in 1.0f64..4.0) {
        let g = Arc::new(RadialGrid::new(3.0, 16, 3).unwrap());
        let u = Profile::new(g, values).unwrap();
        let scaled = u.scaled(k).unwrap();
        let lhs = scaled.lp_norm(q).unwrap();
        let rhs = k * u.lp_norm(q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        prop_assert!(u.lp_norm(f64::INFINITY).unwrap() >= 0.0);
    }

    #[test]
    fn potential_is_linear_and_nonnegative(values in prop::collection::vec(0.0f64..5.0, 32), k in 0.0f64..3.0) {
        let kernel = small_setup();
        let u = Profile::new(kernel.grid().clone(), values).unwrap();
        let c = kernel.potential(&u).unwrap();
        let ck = kernel.potential(&u.scaled(k).unwrap()).unwrap();
        for (a, b) in c.values().iter().zip(ck.values()) {
            prop_assert!(*a >= 0.0);
            prop_assert!((b - k * a).abs() <= 1e-12 * (k * a).max(1e-300));
        }
    }

    #[test]
    fn steps_keep_positivity_and_mass(values in prop::collection::vec(0.0f64..3.0, 32), sparse in prop::collection::vec(any::<bool>(), 32)) {
        let kernel = small_setup();
        let v: Vec<f64> = values.iter().zip(&sparse).map(|(v, keep)| if *keep { *v } else { 0.0 }).collect();
        let u = Profile::new(kernel.grid().clone(), v).unwrap();
        let m0 = u.mass();
        let solver = Solver::new(kernel, 0.4).unwrap();
        let mut state = solver.initial_state(u).unwrap();
        for _ in 0..50 {
            state = solver.step(&state, f64::INFINITY).unwrap();
            prop_assert!(state.u.values().iter().all(|x| *x >= 0.0));
        }
        prop_assert!((state.u.mass() - m0).abs() <= 1e-12 * m0.max(1e-300) * 50.0);
    }

    #[test]
    fn zeta_functional_equation(s in 0.05f64..0.95) {
        // ζ(s) = 2^s π^{s-1} sin(πs/2) Γ(1-s) ζ(1-s) checked inside the Borwein range.
        let pi = std::f64::consts::PI;
        let rhs = 2f64.powf(s) * pi.powf(s - 1.0) * (0.5 * pi * s).sin() * gamma(1.0 - s) * zeta(1.0 - s);
        prop_assert!((zeta(s) - rhs).abs() < 1e-12 * zeta(s).abs());
    }

    #[test]
    fn gamma_recurrence(x in 0.1f64..15.0) {
        prop_assert!((gamma(x + 1.0) / (x * gamma(x)) - 1.0).abs() < 1e-13);
    }
}
