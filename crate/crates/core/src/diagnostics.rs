//! Free energy, moments, the sharp HLS constant and the a-priori
//! classification of initial data.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Profile;
use crate::params::ModelParams;
use crate::riesz::{interaction_energy_with, KernelMatrix};
use crate::special::ln_gamma;
use crate::steady::SteadyState;

/// One sampled row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub mass: f64,
    pub lm_norm: f64,
    pub linf: f64,
    pub free_energy: f64,
    pub second_moment: f64,
    /// `-4s ∫ u^m + 2(d - 2s) F(u)`, the predicted `d m₂ / dt`.
    pub moment_rhs: f64,
    /// Discrete `∫ u |∇μ|²`, when the solver provides it.
    pub dissipation: Option<f64>,
}

impl DiagnosticRow {
    /// Row from a density and its already computed potential.
    pub fn from_parts(t: f64, u: &Profile, c: &Profile, params: &ModelParams) -> Self {
        let m = params.m();
        let lm_power = u.integrate(|v| v.powf(m));
        let free_energy = lm_power / (m - 1.0) - interaction_energy_with(u, c);
        Self {
            t,
            mass: u.mass(),
            lm_norm: lm_power.powf(1.0 / m),
            linf: u.sup(),
            free_energy,
            second_moment: u.second_moment(),
            moment_rhs: -4.0 * params.s() * lm_power + 2.0 * params.beta() * free_energy,
            dissipation: None,
        }
    }

    pub fn evaluate(t: f64, u: &Profile, kernel: &KernelMatrix) -> Result<Self> {
        let c = kernel.potential(u)?;
        Ok(Self::from_parts(t, u, &c, kernel.params()))
    }
}

/// `F(u) = ∫ u^m / (m - 1) - ½ ∫ u c`.
pub fn free_energy(u: &Profile, kernel: &KernelMatrix) -> Result<f64> {
    let c = kernel.potential(u)?;
    let m = kernel.params().m();
    Ok(u.integrate(|v| v.powf(m)) / (m - 1.0) - interaction_energy_with(u, &c))
}

/// `∫ |x|² u dx`.
pub fn second_moment(u: &Profile) -> f64 {
    u.second_moment()
}

/// `-4s ∫ u^m + 2(d - 2s) F(u)`.
pub fn moment_rhs(u: &Profile, kernel: &KernelMatrix) -> Result<f64> {
    let params = kernel.params();
    let lm_power = u.integrate(|v| v.powf(params.m()));
    Ok(-4.0 * params.s() * lm_power + 2.0 * params.beta() * free_energy(u, kernel)?)
}

/// Sharp constant of `∫∫ f(x) f(y) |x - y|^{-β} ≤ C ‖f‖_{2d/(2d-β)}²`.
pub fn hls_constant(d: usize, beta: f64) -> Result<f64> {
    let df = d as f64;
    if d == 0 || !(beta > 0.0 && beta < df) {
        return Err(Error::HlsExponent { d, beta });
    }
    let log = 0.5 * beta * PI.ln() + ln_gamma(df / 2.0 - beta / 2.0) - ln_gamma(df - beta / 2.0)
        + (beta / df - 1.0) * (ln_gamma(df / 2.0) - ln_gamma(df));
    Ok(log.exp())
}

/// `2(d - 2s) W(u) / ‖u‖_m²`, bounded above by `hls_constant(d, d - 2s)`.
pub fn hls_ratio(u: &Profile, kernel: &KernelMatrix) -> Result<f64> {
    let c = kernel.potential(u)?;
    let params = kernel.params();
    let norm = u.lp_norm(params.m())?;
    Ok(2.0 * params.beta() * interaction_energy_with(u, &c) / (norm * norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prediction {
    Global,
    Blowup,
    CriticalUnclassified,
}

impl Prediction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Prediction::Global => "Global",
            Prediction::Blowup => "Blowup",
            Prediction::CriticalUnclassified => "CriticalUnclassified",
        }
    }
}

impl std::fmt::Display for Prediction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position of initial data relative to the steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub lm_ratio: f64,
    pub energy_ratio: f64,
    pub initial_energy: f64,
    pub steady_energy: f64,
    pub prediction: Prediction,
}

/// Classifies `u0` by its `L^m` norm relative to the steady state. Only
/// data with energy strictly below the steady energy are classified.
pub fn blowup_margin(u0: &Profile, ss: &SteadyState, kernel: &KernelMatrix) -> Result<Margin> {
    u0.check_grid(ss.profile.grid())?;
    let m = kernel.params().m();
    let lm_ratio = u0.lp_norm(m)? / ss.profile.lp_norm(m)?;
    let initial_energy = free_energy(u0, kernel)?;
    let steady_energy = free_energy(&ss.profile, kernel)?;
    let prediction = if initial_energy < steady_energy && lm_ratio < 1.0 {
        Prediction::Global
    } else if initial_energy < steady_energy && lm_ratio > 1.0 {
        Prediction::Blowup
    } else {
        Prediction::CriticalUnclassified
    };
    Ok(Margin {
        lm_ratio,
        energy_ratio: initial_energy / steady_energy,
        initial_energy,
        steady_energy,
        prediction,
    })
}

/// Centred difference of the second moment against the predicted rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub t: f64,
    pub finite_difference: f64,
    pub rhs: f64,
}

impl MomentCheck {
    pub fn relative_error(&self) -> f64 {
        (self.finite_difference - self.rhs).abs() / self.rhs.abs()
    }
}

/// One check per interior sample.
pub fn moment_identity_checks(rows: &[DiagnosticRow]) -> Vec<MomentCheck> {
    rows.windows(3)
        .map(|w| MomentCheck {
            t: w[1].t,
            finite_difference: (w[2].second_moment - w[0].second_moment) / (w[2].t - w[0].t),
            rhs: w[1].moment_rhs,
        })
        .collect()
}
