//! Quadrature corrections for the cusp of the spherical-mean kernel.
//!
//! Near the diagonal the spherical mean of `|x - y|^{-β}/β` over the sphere
//! of radius `ρ` behaves like `smooth + a(r) |ρ - r|^α` with `α = 2s - 1`.
//! The midpoint rule misses this term at order `Δr^{1+α}`. The generalized
//! Euler–Maclaurin (Navot) expansion gives the missing piece in closed form.
//! It is added to the diagonal entry.

use std::f64::consts::PI;

use crate::grid::unit_sphere_area;
use crate::params::ModelParams;
use crate::special::{binomial, gamma, zeta, zeta_half};

/// Cusp exponent `α = 2s - 1`.
pub(crate) fn cusp_exponent(params: &ModelParams) -> f64 {
    2.0 * params.s() - 1.0
}

/// Integer exponents give a logarithmic cusp (or none); no correction then.
pub(crate) fn correctable(params: &ModelParams) -> bool {
    let a = cusp_exponent(params);
    (a - a.round()).abs() > 1e-9
}

/// `a(r) r^{d-1}`: the cusp amplitude with the radial factor stripped.
pub(crate) fn cusp_amplitude(params: &ModelParams) -> f64 {
    let d = params.d();
    let beta = params.beta();
    PI.powf((d as f64 - 1.0) / 2.0) * gamma(0.5 - params.s())
        / (gamma(beta / 2.0) * beta * unit_sphere_area(d))
}

/// Midpoint-rule defect of `|x|^α` regularized as `(x² + η²)^{α/2}`.
///
/// `η` is the regularization in units of the grid spacing. At `η = 0` this
/// is `2ζ(-α)`. For small `η` a zeta series is used. For larger `η` the
/// Poisson-summation form with Bessel functions is used.
pub fn midpoint_defect(alpha: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return 2.0 * zeta(-alpha);
    }
    if eta < 0.5 {
        defect_series(alpha, eta)
    } else {
        defect_poisson(alpha, eta)
    }
}

fn defect_series(alpha: f64, eta: f64) -> f64 {
    let eta2 = eta * eta;
    let mut sum = 0.0;
    let mut power = 1.0;
    for k in 0..400 {
        let term = binomial(alpha / 2.0, k) * power * zeta(2.0 * k as f64 - alpha);
        sum += term;
        if k > 2 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        power *= eta2;
    }
    eta.powf(alpha) + 2.0 * sum
        - eta.powf(1.0 + alpha) * PI.sqrt() * gamma(-(1.0 + alpha) / 2.0) / gamma(-alpha / 2.0)
}

fn defect_poisson(alpha: f64, eta: f64) -> f64 {
    let nu = (alpha + 1.0) / 2.0;
    let prefactor = 4.0 * PI.sqrt() / gamma(-alpha / 2.0);
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (PI * kf / eta).powf(-nu) * crate::special::bessel_k(nu, 2.0 * PI * kf * eta);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    prefactor * sum
}

/// Amount added to `K_ii` at radius `r` on a grid with spacing `h`.
pub(crate) fn diagonal_correction(params: &ModelParams, h: f64, r: f64) -> f64 {
    if !correctable(params) {
        return 0.0;
    }
    let alpha = cusp_exponent(params);
    let amp = cusp_amplitude(params) / r.powi(params.d() as i32 - 1);
    -midpoint_defect(alpha, params.epsilon() / h) * h.powf(alpha) * amp
}

/// Coefficient of `u_1` added to the origin potential.
///
/// At `r = 0` the radial integrand is `ρ^α ω_d u(ρ) / β`. The midpoint
/// rule on a grid starting at 0 misses `ζ(-α, 1/2) h^{1+α} g(0)`.
pub(crate) fn origin_correction(params: &ModelParams, h: f64) -> f64 {
    if !correctable(params) || params.epsilon() > 0.0 {
        return 0.0;
    }
    let alpha = cusp_exponent(params);
    -zeta_half(-alpha) * h.powf(1.0 + alpha) * unit_sphere_area(params.d()) / params.beta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Values from 30-digit evaluation of both series forms, cross-checked
    // against a Gaussian-cutoff brute-force sum with Richardson extrapolation.
    const FROZEN: [(f64, f64, f64); 12] = [
        (1.5, 0.0, -0.050_970_403_779_666_07),
        (1.5, 0.01, -0.050_175_081_788_376_895),
        (1.5, 0.3, -0.014_906_738_067_183_078),
        (1.5, 0.5, -0.005_469_012_709_497_061),
        (1.5, 0.8, -0.001_098_383_450_905_503_6),
        (1.5, 2.0, -1.081_296_260_194_580_7e-6),
        (2.5, 0.0, 0.017_033_857_555_700_66),
        (2.5, 0.01, 0.016_991_769_303_157_73),
        (2.5, 0.3, 0.007_640_169_311_561_811),
        (2.5, 0.5, 0.003_288_496_605_061_345),
        (2.5, 0.8, 0.000_781_930_617_462_058_9),
        (2.5, 2.0, 1.126_387_429_814_708e-6),
    ];

    #[test]
    fn frozen_defects() {
        for (alpha, eta, want) in FROZEN {
            assert_relative_eq!(midpoint_defect(alpha, eta), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        for alpha in [1.2, 1.5, 2.5, 3.3] {
            for eta in [0.35, 0.45, 0.55, 0.7] {
                assert_relative_eq!(
                    defect_series(alpha, eta),
                    defect_poisson(alpha, eta),
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn reference_cusp_amplitude() {
        let p = ModelParams::new(3, 1.25).unwrap();
        assert_relative_eq!(cusp_amplitude(&p), -2.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn integer_exponent_skipped() {
        let p = ModelParams::new(5, 1.5).unwrap();
        assert!(!correctable(&p));
        assert_eq!(diagonal_correction(&p, 0.1, 1.0), 0.0);
        assert_eq!(origin_correction(&p, 0.1), 0.0);
    }
}
