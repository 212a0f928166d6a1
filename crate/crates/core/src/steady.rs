//! The steady-state family `U(r) = B (λ / (λ² + r²))^{(d+2s)/2}` and the
//! calibration of its amplitude against a kernel.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{unit_sphere_area, Profile, RadialGrid};
use crate::params::ModelParams;
use crate::quadrature::GaussLegendre;
use crate::riesz::{interaction_energy_with, KernelMatrix};
use crate::special::gamma;

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub params: ModelParams,
    pub lambda: f64,
    /// Density amplitude `B`.
    pub amplitude: f64,
    /// Potential amplitude `(m/(m-1)) B^{m-1}`, the value of the
    /// potential at the origin when `λ = 1`.
    pub potential_amplitude: f64,
    pub profile: Profile,
    /// Fraction of the total mass lying beyond `r_max`.
    pub tail_mass_fraction: f64,
    /// Fraction of `∫ U^m` lying beyond `r_max`.
    pub tail_lm_fraction: f64,
}

impl SteadyState {
    /// `U(0) = B λ^{-(d+2s)/2}`.
    pub fn peak(&self) -> f64 {
        self.amplitude * self.lambda.powf(-self.params.profile_exponent())
    }

    /// Value of the steady potential at the origin, `(m/(m-1)) U(0)^{m-1}`.
    pub fn potential_at_origin(&self) -> f64 {
        self.params.m_ratio() * self.peak().powf(self.params.m() - 1.0)
    }

    /// `∫ U^m` on the grid.
    pub fn lm_power(&self) -> f64 {
        let m = self.params.m();
        self.profile.integrate(|u| u.powf(m))
    }
}

fn shape(params: &ModelParams, lambda: f64, r: f64) -> f64 {
    (lambda / (lambda * lambda + r * r)).powf(params.profile_exponent())
}

/// Renders `U` with the given scale and amplitude on `grid`.
pub fn steady_profile(
    lambda: f64,
    amplitude: f64,
    grid: Arc<RadialGrid>,
    params: ModelParams,
) -> Result<SteadyState> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::NonPositive {
            name: "lambda",
            value: lambda,
        });
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::NonPositive {
            name: "amplitude",
            value: amplitude,
        });
    }
    if grid.d() != params.d() {
        return Err(Error::GridMismatch);
    }
    let r_max = grid.r_max();
    let profile = Profile::from_fn(grid, |r| amplitude * shape(&params, lambda, r))?;
    let m = params.m();
    let tail_mass = tail_integral(&params, lambda, r_max, 1.0);
    let total_mass = tail_integral(&params, lambda, 0.0, 1.0);
    let tail_lm = tail_integral(&params, lambda, r_max, m);
    let total_lm = tail_integral(&params, lambda, 0.0, m);
    Ok(SteadyState {
        params,
        lambda,
        amplitude,
        potential_amplitude: params.m_ratio() * amplitude.powf(m - 1.0),
        profile,
        tail_mass_fraction: tail_mass / total_mass,
        tail_lm_fraction: tail_lm / total_lm,
    })
}

/// `∫_{|x| > r0} U^q dx` for unit amplitude, by Gauss–Legendre after
/// mapping the radial half-line onto a bounded interval.
fn tail_integral(params: &ModelParams, lambda: f64, r0: f64, q: f64) -> f64 {
    let d = params.d() as i32;
    let omega = unit_sphere_area(params.d());
    let f = |r: f64| omega * r.powi(d - 1) * shape(params, lambda, r).powf(q);
    let gl = GaussLegendre::new(96);
    // Split at a point beyond the bulk, then r = a / t² on the far piece.
    let a = r0.max(lambda) * 4.0;
    let near = if a > r0 {
        // Substitution r = r0 + (a - r0) x² concentrates nodes near r0.
        gl.integrate(0.0, 1.0, |x| {
            let r = r0 + (a - r0) * x * x;
            f(r) * 2.0 * (a - r0) * x
        })
    } else {
        0.0
    };
    let far = gl.integrate(0.0, 1.0, |t| {
        if t == 0.0 {
            0.0
        } else {
            f(a / (t * t)) * 2.0 * a / (t * t * t)
        }
    });
    near + far
}

/// Closed form of `∫ U^m` for amplitude `B`, independent of `λ`.
pub fn lm_constant(params: &ModelParams, amplitude: f64) -> f64 {
    let d = params.d() as f64;
    amplitude.powf(params.m()) * PI.powf((d + 1.0) / 2.0) * 2f64.powf(1.0 - d)
        / gamma((d + 1.0) / 2.0)
}

/// Finds `B` such that `(m/(m-1)) U(0)^{m-1}` equals the potential of `U`
/// at the origin. Bisection on `log B`.
pub fn calibrate_amplitude(lambda: f64, kernel: &KernelMatrix) -> Result<f64> {
    let params = *kernel.params();
    if params.epsilon() != 0.0 {
        return Err(Error::RegularizedKernel(params.epsilon()));
    }
    let unit = steady_profile(lambda, 1.0, kernel.grid().clone(), params)?;
    let p0 = kernel.potential_at_origin(&unit.profile)?;
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(Error::Calibration(p0));
    }
    let m = params.m();
    let peak_scale = lambda.powf(-params.profile_exponent());
    // g(B)/B, strictly decreasing in B because m - 2 < 0.
    let g = |log_b: f64| {
        let b = log_b.exp();
        params.m_ratio() * (b * peak_scale).powf(m - 1.0) / b - p0
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return Err(Error::Calibration(p0));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Calibrated steady state at scale `lambda`.
pub fn calibrated_steady_state(lambda: f64, kernel: &KernelMatrix) -> Result<SteadyState> {
    let b = calibrate_amplitude(lambda, kernel)?;
    steady_profile(lambda, b, kernel.grid().clone(), *kernel.params())
}

/// `max_i |(m/(m-1)) U^{m-1} - C| / C(0)` over the grid, where `C` is the
/// kernel potential of `U` and `C(0)` the exact steady potential at 0.
pub fn self_consistency_residual(ss: &SteadyState, kernel: &KernelMatrix) -> Result<f64> {
    let c = kernel.potential(&ss.profile)?;
    let m = ss.params.m();
    let ratio = ss.params.m_ratio();
    let worst = ss
        .profile
        .values()
        .iter()
        .zip(c.values())
        .map(|(u, c)| (ratio * u.powf(m - 1.0) - c).abs())
        .fold(0.0, f64::max);
    Ok(worst / ss.potential_at_origin())
}

/// `∫ U^m - ((d - 2s) / (2d)) ∫ C U`.
pub fn pohozaev_residual(ss: &SteadyState, kernel: &KernelMatrix) -> Result<f64> {
    let c = kernel.potential(&ss.profile)?;
    let d = ss.params.d() as f64;
    let cross = 2.0 * interaction_energy_with(&ss.profile, &c);
    Ok(ss.lm_power() - ss.params.beta() / (2.0 * d) * cross)
}

/// Free energy of the steady state.
pub fn steady_energy(ss: &SteadyState, kernel: &KernelMatrix) -> Result<f64> {
    crate::diagnostics::free_energy(&ss.profile, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (Arc<RadialGrid>, ModelParams) {
        (
            Arc::new(RadialGrid::new(60.0, n, 3).unwrap()),
            ModelParams::new(3, 1.25).unwrap(),
        )
    }

    #[test]
    fn peak_value() {
        let (g, p) = setup(64);
        let ss = steady_profile(0.5, 2.0, g, p).unwrap();
        assert_relative_eq!(ss.peak(), 2.0 * 0.5f64.powf(-2.75), max_relative = 1e-14);
        assert!(ss.profile.values()[0] <= ss.peak());
    }

    #[test]
    fn rejects_bad_scale() {
        let (g, p) = setup(8);
        assert!(steady_profile(0.0, 1.0, g.clone(), p).is_err());
        assert!(steady_profile(1.0, -1.0, g, p).is_err());
    }

    #[test]
    fn lm_constant_reference() {
        let p = ModelParams::new(3, 1.25).unwrap();
        assert_relative_eq!(lm_constant(&p, 1.0), PI * PI / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn tail_integral_total_matches_closed_form() {
        // Total mass: B λ^{(d-2s)/2} (ω/2) Beta(d/2, s).
        for (d, s, lambda) in [(3usize, 1.25f64, 1.0f64), (3, 1.25, 0.5), (4, 1.75, 2.0)] {
            let p = ModelParams::new(d, s).unwrap();
            let dd = d as f64;
            let beta_fn = gamma(dd / 2.0) * gamma(s) / gamma(dd / 2.0 + s);
            let exact = lambda.powf((dd - 2.0 * s) / 2.0) * unit_sphere_area(d) / 2.0 * beta_fn;
            assert_relative_eq!(
                tail_integral(&p, lambda, 0.0, 1.0),
                exact,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                tail_integral(&p, lambda, 0.0, p.m()),
                lm_constant(&p, 1.0),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn calibration_matches_homogeneity_oracle() {
        let (g, p) = setup(128);
        let k = KernelMatrix::assemble(g.clone(), p).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let b = calibrate_amplitude(lambda, &k).unwrap();
            let unit = steady_profile(lambda, 1.0, g.clone(), p).unwrap();
            let p0 = k.potential_at_origin(&unit.profile).unwrap();
            let m = p.m();
            let oracle = ((m - 1.0) / m * p0 * lambda.powf(p.beta() / 2.0)).powf(1.0 / (m - 2.0));
            assert_relative_eq!(b, oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn calibration_rejects_regularized_kernel() {
        let (g, p) = setup(16);
        let k = KernelMatrix::assemble(g, p.regularized(0.1).unwrap()).unwrap();
        assert!(matches!(
            calibrate_amplitude(1.0, &k),
            Err(Error::RegularizedKernel(_))
        ));
    }
}
