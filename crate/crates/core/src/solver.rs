//! Explicit finite-volume integration of the radial gradient flow
//! `u_t = r^{1-d} ∂_r (r^{d-1} u ∂_r μ)` with `μ = (m/(m-1)) u^{m-1} - c`.
//!
//! Edge velocities are `-∂_r μ`. The edge density is the upwind cell value,
//! reconstructed with a minmod-limited slope. Fluxes vanish at both ends
//! of the domain, so the update conserves `Σ u_i w_i` exactly. The time
//! step is capped so that no cell can lose more than a fraction `cfl` of
//! its content in one step, which keeps densities nonnegative.

use std::sync::Arc;

use crate::diagnostics::{DiagnosticRow, Margin};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::params::ModelParams;
use crate::riesz::KernelMatrix;
use crate::steady::{calibrated_steady_state, SteadyState};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `κ` times the calibrated steady state at scale `λ`.
    SteadyMultiple { kappa: f64, lambda: f64 },
    /// `amplitude · exp(-r² / width²)`.
    Gaussian { amplitude: f64, width: f64 },
    /// Cell values, one per grid cell.
    Values(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ModelParams,
    pub r_max: f64,
    pub n: usize,
    pub initial: InitialData,
    pub t_end: f64,
    pub cfl: f64,
    /// Defaults to `1e-10` times the first stable step.
    pub dt_floor: Option<f64>,
    /// Defaults to [`default_blowup_threshold`].
    pub blowup_linf_threshold: Option<f64>,
    pub steady_residual_threshold: f64,
    /// Record a diagnostic row every this many steps.
    pub sample_every: usize,
    /// Keep the full profile every this many rows.
    pub snapshot_every: Option<usize>,
}

impl SimConfig {
    pub fn new(params: ModelParams, r_max: f64, n: usize, initial: InitialData) -> Self {
        Self {
            params,
            r_max,
            n,
            initial,
            t_end: 5.0,
            cfl: 0.4,
            dt_floor: None,
            blowup_linf_threshold: None,
            steady_residual_threshold: 1e-6,
            sample_every: 10,
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 8 {
            return bad(format!("need at least 8 cells, got {}", self.n));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::NonPositive {
                name: "r_max",
                value: self.r_max,
            });
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::NonPositive {
                name: "t_end",
                value: self.t_end,
            });
        }
        for (name, v) in [
            ("dt_floor", self.dt_floor),
            ("blowup_linf_threshold", self.blowup_linf_threshold),
            (
                "steady_residual_threshold",
                Some(self.steady_residual_threshold),
            ),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::NonPositive { name, value: v });
                }
            }
        }
        if self.sample_every == 0 || self.snapshot_every == Some(0) {
            return bad("output cadence must be at least 1".into());
        }
        match &self.initial {
            InitialData::SteadyMultiple { kappa, lambda } => {
                if !(kappa.is_finite() && *kappa >= 0.0) {
                    return bad(format!("kappa must be finite and nonnegative, got {kappa}"));
                }
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::NonPositive {
                        name: "lambda",
                        value: *lambda,
                    });
                }
            }
            InitialData::Gaussian { amplitude, width } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!(
                        "gaussian amplitude must be nonnegative, got {amplitude}"
                    ));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::NonPositive {
                        name: "gaussian width",
                        value: *width,
                    });
                }
            }
            InitialData::Values(v) => {
                if v.len() != self.n {
                    return Err(Error::ProfileLength {
                        expected: self.n,
                        got: v.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n, self.params.d())
    }

    /// Initial density. Steady multiples need the calibrated steady state.
    pub fn initial_profile(
        &self,
        grid: Arc<RadialGrid>,
        steady: Option<&SteadyState>,
    ) -> Result<Profile> {
        match &self.initial {
            InitialData::SteadyMultiple { kappa, .. } => {
                let ss = steady.ok_or_else(|| {
                    Error::Config("steady-multiple initial data needs a steady state".into())
                })?;
                ss.profile.check_grid(&grid)?;
                ss.profile.scaled(*kappa)
            }
            InitialData::Gaussian { amplitude, width } => {
                Profile::from_fn(grid, |r| amplitude * (-(r * r) / (width * width)).exp())
            }
            InitialData::Values(v) => Profile::new(grid, v.clone()),
        }
    }
}

/// Threshold on `‖u‖_∞` that counts as blow-up.
///
/// `10³ ‖u₀‖_∞`, capped at a tenth of the largest density the grid can
/// represent (all the mass in the first cell).
pub fn default_blowup_threshold(u0: &Profile) -> f64 {
    let capacity = u0.mass() / u0.grid().weights()[0];
    (1e3 * u0.sup()).min(0.1 * capacity)
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: Profile,
    pub c: Profile,
    /// Chemical potential; may be negative.
    pub mu: Vec<f64>,
    /// Step actually taken to reach this state (0 for the initial state).
    pub dt_last: f64,
    /// Stable step for the next update, before clipping to `t_end`.
    pub dt_stable: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupCause {
    LinfThreshold,
    DtFloor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalEvent {
    ReachedTEnd { t: f64 },
    BlowupDetected { t: f64, cause: BlowupCause },
    SteadyDetected { t: f64 },
}

impl TerminalEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TerminalEvent::ReachedTEnd { .. } => "ReachedTEnd",
            TerminalEvent::BlowupDetected { .. } => "BlowupDetected",
            TerminalEvent::SteadyDetected { .. } => "SteadyDetected",
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            TerminalEvent::ReachedTEnd { t }
            | TerminalEvent::BlowupDetected { t, .. }
            | TerminalEvent::SteadyDetected { t } => t,
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, TerminalEvent::BlowupDetected { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticRow>,
    pub event: TerminalEvent,
    pub steps: usize,
    pub dt_floor: f64,
    pub blowup_threshold: f64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    /// Present for steady-multiple initial data.
    pub margin: Option<Margin>,
}

impl Trajectory {
    /// Largest `‖u‖_{L^m}` over the sampled rows.
    pub fn sup_lm_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.lm_norm).fold(0.0, f64::max)
    }
}

/// Single-run integrator bound to one kernel.
#[derive(Debug, Clone, Copy)]
pub struct Solver<'a> {
    kernel: &'a KernelMatrix,
    cfl: f64,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

struct Fluxes {
    /// `n + 1` edge fluxes, zero at both ends.
    flux: Vec<f64>,
    /// Edge velocity and mobility on interior edges (index = edge).
    velocity: Vec<f64>,
    mobility: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(kernel: &'a KernelMatrix, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1), got {cfl}")));
        }
        Ok(Self { kernel, cfl })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        self.kernel
    }

    fn params(&self) -> &ModelParams {
        self.kernel.params()
    }

    pub fn initial_state(&self, u: Profile) -> Result<SimState> {
        u.check_grid(self.kernel.grid())?;
        let mut state = self.complete(0.0, u, 0.0);
        state.dt_stable = self.stable_step(&state);
        Ok(state)
    }

    fn complete(&self, t: f64, u: Profile, dt_last: f64) -> SimState {
        let c = self.kernel.potential(&u).expect("grid checked");
        let mu = chemical_potential_from(&u, &c, self.params());
        SimState {
            t,
            u,
            c,
            mu,
            dt_last,
            dt_stable: f64::INFINITY,
        }
    }

    fn fluxes(&self, u: &[f64], mu: &[f64]) -> Fluxes {
        let grid = self.kernel.grid();
        let n = u.len();
        let h = grid.spacing();
        let areas = grid.edge_areas();
        let eps = self.params().epsilon();
        let mut slopes = vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            slopes[i] = minmod(u[i + 1] - u[i], u[i] - u[i - 1]);
        }
        let mut flux = vec![0.0; n + 1];
        let mut velocity = vec![0.0; n + 1];
        let mut mobility = vec![0.0; n + 1];
        for e in 1..n {
            let v = -(mu[e] - mu[e - 1]) / h;
            let mob = if v > 0.0 {
                u[e - 1] + 0.5 * slopes[e - 1]
            } else {
                u[e] - 0.5 * slopes[e]
            };
            let mut f = areas[e] * mob * v;
            if eps > 0.0 {
                f -= eps * areas[e] * (u[e] - u[e - 1]) / h;
            }
            flux[e] = f;
            velocity[e] = v;
            mobility[e] = mob;
        }
        Fluxes {
            flux,
            velocity,
            mobility,
        }
    }

    fn stable_step_from(&self, u: &[f64], fx: &Fluxes) -> f64 {
        let grid = self.kernel.grid();
        let h = grid.spacing();
        let w = grid.weights();
        let m = self.params().m();
        let eps = self.params().epsilon();
        let mut dt = f64::INFINITY;
        let vmax = fx.velocity.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if vmax > 0.0 {
            dt = dt.min(h / vmax);
        }
        let umax = u.iter().copied().fold(0.0, f64::max);
        if umax > 0.0 {
            dt = dt.min(h * h / (2.0 * m * umax.powf(m - 1.0)));
        }
        if eps > 0.0 {
            dt = dt.min(h * h / (2.0 * eps));
        }
        for i in 0..u.len() {
            let outflow = fx.flux[i + 1].max(0.0) + (-fx.flux[i]).max(0.0);
            if outflow > 0.0 {
                dt = dt.min(u[i] * w[i] / outflow);
            }
        }
        self.cfl * dt
    }

    fn stable_step(&self, state: &SimState) -> f64 {
        let fx = self.fluxes(state.u.values(), &state.mu);
        self.stable_step_from(state.u.values(), &fx)
    }

    /// One forward-Euler step, clipped so as not to pass `t_end`.
    pub fn step(&self, state: &SimState, t_end: f64) -> Result<SimState> {
        let u = state.u.values();
        let fx = self.fluxes(u, &state.mu);
        let dt_stable = self.stable_step_from(u, &fx);
        let dt = dt_stable.min(t_end - state.t).max(0.0);
        let w = self.kernel.grid().weights();
        let t = state.t + dt;
        let mut next = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let v = u[i] - dt * (fx.flux[i + 1] - fx.flux[i]) / w[i];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Integrity {
                    t,
                    index: i,
                    value: v,
                });
            }
            next.push(v);
        }
        let profile = Profile::new(self.kernel.grid().clone(), next)?;
        let mut out = self.complete(t, profile, dt);
        out.dt_stable = dt_stable;
        Ok(out)
    }

    /// Discrete `∫ u |∂_r μ|²`, nonnegative by construction.
    pub fn dissipation(&self, state: &SimState) -> f64 {
        let fx = self.fluxes(state.u.values(), &state.mu);
        let grid = self.kernel.grid();
        let h = grid.spacing();
        (1..state.u.len())
            .map(|e| grid.edge_areas()[e] * fx.mobility[e] * fx.velocity[e] * fx.velocity[e] * h)
            .sum()
    }

    /// `max_i (u_i / max u) |μ_i - μ̄|`, with `μ̄` the mass-weighted mean,
    /// relative to the diffusive part of `μ` at the peak.
    pub fn steady_residual(&self, state: &SimState) -> f64 {
        let u = state.u.values();
        let umax = state.u.sup();
        let mass = state.u.mass();
        if umax == 0.0 || mass == 0.0 {
            return 0.0;
        }
        let w = self.kernel.grid().weights();
        let mean: f64 = u
            .iter()
            .zip(&state.mu)
            .zip(w)
            .map(|((u, mu), w)| u * mu * w)
            .sum::<f64>()
            / mass;
        let scale = self.params().m_ratio() * umax.powf(self.params().m() - 1.0);
        u.iter()
            .zip(&state.mu)
            .map(|(u, mu)| u / umax * (mu - mean).abs())
            .fold(0.0, f64::max)
            / scale
    }

    fn row(&self, state: &SimState) -> DiagnosticRow {
        let mut row = DiagnosticRow::from_parts(state.t, &state.u, &state.c, self.params());
        row.dissipation = Some(self.dissipation(state));
        row
    }
}

/// `(m/(m-1)) u^{m-1} - c`.
pub fn chemical_potential(u: &Profile, kernel: &KernelMatrix) -> Result<Vec<f64>> {
    let c = kernel.potential(u)?;
    Ok(chemical_potential_from(u, &c, kernel.params()))
}

fn chemical_potential_from(u: &Profile, c: &Profile, params: &ModelParams) -> Vec<f64> {
    let m = params.m();
    let ratio = params.m_ratio();
    u.values()
        .iter()
        .zip(c.values())
        .map(|(u, c)| ratio * u.powf(m - 1.0) - c)
        .collect()
}

/// Builds the grid and kernel, calibrates if needed, and integrates.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = Arc::new(config.grid()?);
    let kernel = KernelMatrix::assemble(grid.clone(), config.params)?;
    let steady = match config.initial {
        InitialData::SteadyMultiple { lambda, .. } => {
            let ss = if config.params.epsilon() == 0.0 {
                calibrated_steady_state(lambda, &kernel)?
            } else {
                let plain = KernelMatrix::assemble(grid.clone(), config.params.regularized(0.0)?)?;
                calibrated_steady_state(lambda, &plain)?
            };
            Some(ss)
        }
        _ => None,
    };
    run_with(config, &kernel, steady.as_ref())
}

/// Integrates with a prebuilt kernel. `steady` is required for
/// steady-multiple initial data and is used for the margin report.
pub fn run_with(
    config: &SimConfig,
    kernel: &KernelMatrix,
    steady: Option<&SteadyState>,
) -> Result<Trajectory> {
    config.validate()?;
    if kernel.params() != &config.params {
        return Err(Error::Config(
            "kernel parameters differ from the config".into(),
        ));
    }
    let grid = kernel.grid().clone();
    if grid.len() != config.n || grid.r_max() != config.r_max {
        return Err(Error::GridMismatch);
    }
    let u0 = config.initial_profile(grid, steady)?;
    let margin = match (&config.initial, steady) {
        (InitialData::SteadyMultiple { .. }, Some(ss)) => {
            Some(crate::diagnostics::blowup_margin(&u0, ss, kernel)?)
        }
        _ => None,
    };
    let mut traj = run_from(config, kernel, u0)?;
    traj.margin = margin;
    Ok(traj)
}

/// Integrates from an explicit initial profile.
pub fn run_from(config: &SimConfig, kernel: &KernelMatrix, u0: Profile) -> Result<Trajectory> {
    let solver = Solver::new(kernel, config.cfl)?;
    let threshold = config
        .blowup_linf_threshold
        .unwrap_or_else(|| default_blowup_threshold(&u0));
    let mut state = solver.initial_state(u0)?;
    let dt_floor = config.dt_floor.unwrap_or(if state.dt_stable.is_finite() {
        1e-10 * state.dt_stable
    } else {
        0.0
    });
    let snapshot = |s: &SimState| Snapshot {
        t: s.t,
        values: s.u.values().to_vec(),
    };
    let mut rows = vec![solver.row(&state)];
    let mut snapshots = Vec::new();
    if config.snapshot_every.is_some() {
        snapshots.push(snapshot(&state));
    }
    let mut steps = 0usize;
    let event = loop {
        if state.t >= config.t_end {
            break TerminalEvent::ReachedTEnd { t: state.t };
        }
        state = solver.step(&state, config.t_end)?;
        steps += 1;
        let cause = if state.u.sup() > threshold {
            Some(BlowupCause::LinfThreshold)
        } else if state.dt_stable < dt_floor {
            Some(BlowupCause::DtFloor)
        } else {
            None
        };
        if let Some(cause) = cause {
            rows.push(solver.row(&state));
            break TerminalEvent::BlowupDetected { t: state.t, cause };
        }
        if steps.is_multiple_of(config.sample_every) || state.t >= config.t_end {
            let row = solver.row(&state);
            let prev = *rows.last().expect("initial row");
            rows.push(row);
            if let Some(every) = config.snapshot_every {
                if (rows.len() - 1) % every == 0 {
                    snapshots.push(snapshot(&state));
                }
            }
            let rate = (row.lm_norm - prev.lm_norm).abs() / ((row.t - prev.t) * row.lm_norm);
            if row.mass > 0.0
                && rate < config.steady_residual_threshold
                && solver.steady_residual(&state) < config.steady_residual_threshold
            {
                break TerminalEvent::SteadyDetected { t: state.t };
            }
        }
    };
    if config.snapshot_every.is_some() && snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(snapshot(&state));
    }
    Ok(Trajectory {
        rows,
        event,
        steps,
        dt_floor,
        blowup_threshold: threshold,
        snapshots,
        final_state: state,
        margin: None,
    })
}

/// Largest increase of the free energy between consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationReport {
    pub max_positive_jump: f64,
    pub initial_energy: f64,
}

impl DissipationReport {
    /// Jumps within `rel_slack · |F(u₀)|` pass.
    pub fn passes(&self, rel_slack: f64) -> bool {
        self.max_positive_jump <= rel_slack * self.initial_energy.abs()
    }
}

pub fn energy_dissipation_check(traj: &Trajectory) -> DissipationReport {
    let max_positive_jump = traj
        .rows
        .windows(2)
        .map(|w| (w[1].free_energy - w[0].free_energy).max(0.0))
        .fold(0.0, f64::max);
    DissipationReport {
        max_positive_jump,
        initial_energy: traj.rows.first().map_or(0.0, |r| r.free_energy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_kernel(n: usize) -> KernelMatrix {
        let p = ModelParams::new(3, 1.25).unwrap();
        let g = Arc::new(RadialGrid::new(20.0, n, 3).unwrap());
        KernelMatrix::assemble(g, p).unwrap()
    }

    #[test]
    fn minmod_cases() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-3.0, -2.0), -2.0);
        assert_eq!(minmod(1.0, -1.0), 0.0);
        assert_eq!(minmod(0.0, 5.0), 0.0);
    }

    #[test]
    fn zero_state_is_fixed() {
        let k = small_kernel(32);
        let solver = Solver::new(&k, 0.4).unwrap();
        let s0 = solver
            .initial_state(Profile::zeros(k.grid().clone()))
            .unwrap();
        let s1 = solver.step(&s0, 1.0).unwrap();
        assert_eq!(s1.u.values(), s0.u.values());
        assert_eq!(s1.t, 1.0);
    }

    #[test]
    fn chemical_potential_without_attraction() {
        let p = ModelParams::new(3, 1.25).unwrap();
        let g = Arc::new(RadialGrid::new(5.0, 16, 3).unwrap());
        let k = KernelMatrix::zero(g.clone(), p).unwrap();
        let u = Profile::from_fn(g, |r| (-r).exp()).unwrap();
        let mu = chemical_potential(&u, &k).unwrap();
        for (mu, u) in mu.iter().zip(u.values()) {
            approx::assert_relative_eq!(*mu, 12.0 * u.powf(1.0 / 11.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        let p = ModelParams::new(3, 1.25).unwrap();
        let init = InitialData::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        };
        let ok = SimConfig::new(p, 10.0, 32, init.clone());
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.cfl = 1.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.n = 4;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.dt_floor = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.initial = InitialData::Values(vec![1.0; 3]);
        assert!(c.validate().is_err());
        let mut c = ok;
        c.initial = InitialData::SteadyMultiple {
            kappa: -1.0,
            lambda: 1.0,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn step_never_crosses_t_end() {
        let k = small_kernel(32);
        let solver = Solver::new(&k, 0.4).unwrap();
        let u = Profile::from_fn(k.grid().clone(), |r| (-r * r).exp()).unwrap();
        let mut s = solver.initial_state(u).unwrap();
        while s.t < 0.05 {
            s = solver.step(&s, 0.05).unwrap();
        }
        assert_eq!(s.t, 0.05);
    }
}
