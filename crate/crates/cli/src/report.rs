//! CSV renderings shared by several commands.

use aggdiff_core::solver::{chemical_potential, Trajectory};
use aggdiff_core::{KernelMatrix, Result, SteadyState};

use crate::output::{num, Csv};

/// `r, u, c, mu` for a steady profile under `kernel`.
pub fn steady_profile_csv(ss: &SteadyState, kernel: &KernelMatrix) -> Result<Csv> {
    let c = kernel.potential(&ss.profile)?;
    let mu = chemical_potential(&ss.profile, kernel)?;
    let mut csv = Csv::new(&["r", "u", "c", "mu"]);
    for (((r, u), c), mu) in ss
        .profile
        .grid()
        .centers()
        .iter()
        .zip(ss.profile.values())
        .zip(c.values())
        .zip(&mu)
    {
        csv.row([num(*r), num(*u), num(*c), num(*mu)]);
    }
    Ok(csv)
}

/// One row per sample. `lm_ratio` is relative to `steady_lm` when given.
pub fn trajectory_csv(traj: &Trajectory, steady_lm: Option<f64>) -> Csv {
    let mut csv = Csv::new(&[
        "t",
        "mass",
        "lm_norm",
        "linf",
        "free_energy",
        "second_moment",
        "moment_rhs",
        "dissipation",
        "lm_ratio",
    ]);
    for row in &traj.rows {
        let ratio = steady_lm.map_or(String::new(), |s| num(row.lm_norm / s));
        csv.row([
            num(row.t),
            num(row.mass),
            num(row.lm_norm),
            num(row.linf),
            num(row.free_energy),
            num(row.second_moment),
            num(row.moment_rhs),
            row.dissipation.map_or(String::new(), num),
            ratio,
        ]);
    }
    csv
}

/// Long format `t, r, u`.
pub fn snapshots_csv(traj: &Trajectory, centers: &[f64]) -> Csv {
    let mut csv = Csv::new(&["t", "r", "u"]);
    for snap in &traj.snapshots {
        for (r, u) in centers.iter().zip(&snap.values) {
            csv.row([num(snap.t), num(*r), num(*u)]);
        }
    }
    csv
}

pub fn events_csv(traj: &Trajectory, steady_lm: Option<f64>) -> Csv {
    let mut csv = Csv::new(&[
        "event",
        "t_star",
        "cause",
        "steps",
        "sup_lm_ratio",
        "blowup_threshold",
        "dt_floor",
    ]);
    let cause = match traj.event {
        aggdiff_core::solver::TerminalEvent::BlowupDetected { cause, .. } => match cause {
            aggdiff_core::solver::BlowupCause::LinfThreshold => "linf_threshold",
            aggdiff_core::solver::BlowupCause::DtFloor => "dt_floor",
        },
        _ => "",
    };
    csv.row([
        traj.event.name().to_string(),
        num(traj.event.time()),
        cause.to_string(),
        traj.steps.to_string(),
        steady_lm.map_or(String::new(), |s| num(traj.sup_lm_norm() / s)),
        num(traj.blowup_threshold),
        num(traj.dt_floor),
    ]);
    csv
}
