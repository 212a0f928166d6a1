use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use aggdiff_core::diagnostics::{
    blowup_margin, free_energy, hls_constant, hls_ratio, moment_rhs, Prediction,
};
use aggdiff_core::steady::{
    calibrate_amplitude, calibrated_steady_state, lm_constant, pohozaev_residual,
    self_consistency_residual, steady_energy, steady_profile,
};
use aggdiff_core::{KernelMatrix, ModelParams, RadialGrid, SteadyState};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    params: ModelParams,
    grid: Arc<RadialGrid>,
    kernel: KernelMatrix,
    steady: SteadyState,
}

fn reference() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| {
        let params = ModelParams::new(3, 1.25).unwrap();
        let grid = Arc::new(RadialGrid::new(60.0, 512, 3).unwrap());
        let kernel = KernelMatrix::assemble(grid.clone(), params).unwrap();
        let steady = calibrated_steady_state(1.0, &kernel).unwrap();
        Setup {
            params,
            grid,
            kernel,
            steady,
        }
    })
}

#[test]
fn lm_power_of_unit_profile() {
    let s = reference();
    let exact = PI * PI / 4.0;
    for lambda in [0.5, 1.0, 2.0] {
        let u = steady_profile(lambda, 1.0, s.grid.clone(), s.params).unwrap();
        assert_relative_eq!(u.lm_power(), exact, max_relative = 1e-3);
        // What is missing is the tail beyond r_max.
        assert_relative_eq!(
            u.lm_power() / (1.0 - u.tail_lm_fraction),
            exact,
            max_relative = 1e-6
        );
    }
}

#[test]
fn calibrated_amplitude_is_scale_free() {
    let s = reference();
    let b1 = s.steady.amplitude;
    // Exact origin potential of the unit profile at λ = 1 gives B in closed form.
    let (d, sv, beta, m) = (3.0, 1.25, 0.5, s.params.m());
    let gamma = |x: f64| statrs::function::gamma::gamma(x);
    let p0 = PI.powf(d / 2.0) * gamma(sv) / gamma((d + 2.0 * sv) / 2.0) / beta;
    let exact = ((m - 1.0) / m * p0).powf(1.0 / (m - 2.0));
    assert_relative_eq!(b1, exact, max_relative = 1e-3);
    for lambda in [0.5, 2.0] {
        let b = calibrate_amplitude(lambda, &s.kernel).unwrap();
        assert_relative_eq!(b, b1, max_relative = 1e-3);
        let ss = calibrated_steady_state(lambda, &s.kernel).unwrap();
        assert_relative_eq!(
            ss.peak() * lambda.powf(s.params.profile_exponent()),
            b1,
            max_relative = 1e-3
        );
    }
}

#[test]
fn self_consistency_and_flat_chemical_potential() {
    let s = reference();
    let r = self_consistency_residual(&s.steady, &s.kernel).unwrap();
    assert!(r < 1e-3, "residual {r}");
    let mu = aggdiff_core::solver::chemical_potential(&s.steady.profile, &s.kernel).unwrap();
    let worst = mu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst / s.steady.potential_at_origin() < 1e-3);
}

#[test]
fn pohozaev_with_negative_control() {
    let s = reference();
    let lm = s.steady.lm_power();
    let r = pohozaev_residual(&s.steady, &s.kernel).unwrap() / lm;
    assert!(r.abs() < 1e-4, "calibrated residual {r}");
    let doubled = steady_profile(1.0, 2.0 * s.steady.amplitude, s.grid.clone(), s.params).unwrap();
    let r2 = pohozaev_residual(&doubled, &s.kernel).unwrap() / doubled.lm_power();
    assert!(r2.abs() > 0.1, "control residual {r2}");
}

#[test]
fn steady_energy_ratio() {
    let s = reference();
    let f = steady_energy(&s.steady, &s.kernel).unwrap();
    assert!(f > 0.0);
    let want = 2.0 * s.params.s() / s.params.beta();
    assert_relative_eq!(f / s.steady.lm_power(), want, max_relative = 1e-4);
    assert_relative_eq!(
        s.steady.lm_power(),
        lm_constant(&s.params, s.steady.amplitude),
        max_relative = 1e-4
    );
}

#[test]
fn energy_along_amplitude_ray() {
    let s = reference();
    let big_s = s.steady.lm_power();
    let m = s.params.m();
    let f1 = free_energy(&s.steady.profile, &s.kernel).unwrap();
    for kappa in [0.5, 0.8, 1.2, 2.0] {
        let u = s.steady.profile.scaled(kappa).unwrap();
        let direct = free_energy(&u, &s.kernel).unwrap();
        let w = 0.5
            * u.values()
                .iter()
                .zip(s.kernel.potential(&u).unwrap().values())
                .zip(s.grid.weights())
                .map(|((a, b), w)| a * b * w)
                .sum::<f64>();
        // Scaling of each piece separately, then the closed form.
        assert_relative_eq!(
            u.integrate(|v| v.powf(m)),
            kappa.powf(m) * big_s,
            max_relative = 1e-12
        );
        let law = kappa.powf(m) * big_s / (m - 1.0) - kappa * kappa * m * big_s / (2.0 * (m - 1.0));
        assert_relative_eq!(
            direct,
            kappa.powf(m) * big_s / (m - 1.0) - w,
            max_relative = 1e-12
        );
        assert_relative_eq!(direct, law, max_relative = 1e-3);
        assert!(direct < f1);
    }
}

#[test]
fn hls_sharpness_and_random_profiles() {
    let s = reference();
    let c = hls_constant(3, 0.5).unwrap();
    assert_relative_eq!(
        hls_ratio(&s.steady.profile, &s.kernel).unwrap(),
        c,
        max_relative = 1e-3
    );

    let coarse = Arc::new(RadialGrid::new(30.0, 128, 3).unwrap());
    let k = KernelMatrix::assemble(coarse.clone(), s.params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100 {
        let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..4))
            .map(|_| {
                (
                    rng.gen_range(0.1..2.0),
                    rng.gen_range(0.0..10.0),
                    rng.gen_range(0.3..3.0),
                )
            })
            .collect();
        let u = aggdiff_core::Profile::from_fn(coarse.clone(), |r| {
            bumps
                .iter()
                .map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp())
                .sum()
        })
        .unwrap();
        let ratio = hls_ratio(&u, &k).unwrap();
        assert!(
            ratio <= c * (1.0 + 1e-8),
            "ratio {ratio} above sharp constant {c}"
        );
    }
}

#[test]
fn moment_rhs_vanishes_at_steady_state() {
    let s = reference();
    let scale = 4.0 * s.params.s() * s.steady.lm_power();
    assert!(moment_rhs(&s.steady.profile, &s.kernel).unwrap().abs() < 1e-3 * scale);
    let over = s.steady.profile.scaled(1.2).unwrap();
    assert!(moment_rhs(&over, &s.kernel).unwrap() < 0.0);
}

#[test]
fn margin_classification() {
    let s = reference();
    let cases = [
        (0.8, Prediction::Global),
        (1.2, Prediction::Blowup),
        (1.0, Prediction::CriticalUnclassified),
    ];
    for (kappa, want) in cases {
        let u0 = s.steady.profile.scaled(kappa).unwrap();
        let margin = blowup_margin(&u0, &s.steady, &s.kernel).unwrap();
        assert_eq!(margin.prediction, want);
        assert_relative_eq!(margin.lm_ratio, kappa, max_relative = 1e-12);
    }
}

#[test]
fn second_pair_identities() {
    let params = ModelParams::new(4, 1.75).unwrap();
    let grid = Arc::new(RadialGrid::new(60.0, 512, 4).unwrap());
    let kernel = KernelMatrix::assemble(grid, params).unwrap();
    let ss = calibrated_steady_state(1.0, &kernel).unwrap();
    assert!(self_consistency_residual(&ss, &kernel).unwrap() < 1e-3);
    let lm = ss.lm_power();
    assert!((pohozaev_residual(&ss, &kernel).unwrap() / lm).abs() < 1e-4);
    assert_relative_eq!(
        steady_energy(&ss, &kernel).unwrap() / lm,
        7.0,
        max_relative = 1e-4
    );
    assert_relative_eq!(
        hls_ratio(&ss.profile, &kernel).unwrap(),
        hls_constant(4, 0.5).unwrap(),
        max_relative = 1e-4
    );
}
