//! Concurrent runs over a list of steady-state multiples.

use rayon::prelude::*;

use aggdiff_core::diagnostics::{blowup_margin, Margin, Prediction};
use aggdiff_core::solver::{run_from, InitialData, SimConfig, TerminalEvent, Trajectory};
use aggdiff_core::{KernelMatrix, SteadyState};

use crate::output::{num, Csv};

#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub kappa: f64,
    pub margin: Margin,
    /// `Err` holds the message of a scheme integrity failure.
    pub outcome: Result<Trajectory, String>,
    /// Inside the exclusion band around the critical amplitude.
    pub excluded: bool,
}

impl ScanEntry {
    pub fn observed(&self) -> &'static str {
        match &self.outcome {
            Ok(t) => t.event.name(),
            Err(_) => "IntegrityFailure",
        }
    }

    /// `None` when the entry does not count towards pass/fail.
    pub fn agrees(&self) -> Option<bool> {
        if self.excluded || self.margin.prediction == Prediction::CriticalUnclassified {
            return None;
        }
        let Ok(traj) = &self.outcome else {
            return Some(false);
        };
        Some(match self.margin.prediction {
            Prediction::Global => !traj.event.is_blowup(),
            Prediction::Blowup => traj.event.is_blowup(),
            Prediction::CriticalUnclassified => unreachable!(),
        })
    }

    pub fn m2_strictly_decreasing(&self) -> bool {
        self.outcome.as_ref().is_ok_and(|t| {
            t.rows
                .windows(2)
                .all(|w| w[1].second_moment < w[0].second_moment)
        })
    }
}

/// Runs `κ U` for every `κ` concurrently, sharing the kernel read-only.
/// `base` supplies everything but the initial data.
pub fn run_scan(
    kappas: &[f64],
    margin_band: f64,
    base: &SimConfig,
    kernel: &KernelMatrix,
    steady: &SteadyState,
) -> aggdiff_core::Result<Vec<ScanEntry>> {
    kappas
        .par_iter()
        .map(|&kappa| {
            let mut config = base.clone();
            config.initial = InitialData::SteadyMultiple {
                kappa,
                lambda: steady.lambda,
            };
            config.validate()?;
            let u0 = steady.profile.scaled(kappa)?;
            let margin = blowup_margin(&u0, steady, kernel)?;
            let outcome = match run_from(&config, kernel, u0) {
                Ok(mut traj) => {
                    traj.margin = Some(margin);
                    Ok(traj)
                }
                Err(e @ aggdiff_core::Error::Integrity { .. }) => Err(e.to_string()),
                Err(e) => return Err(e),
            };
            Ok(ScanEntry {
                kappa,
                margin,
                outcome,
                excluded: (kappa - 1.0).abs() < margin_band,
            })
        })
        .collect()
}

pub fn dichotomy_csv(entries: &[ScanEntry], steady_lm: f64) -> Csv {
    let mut csv = Csv::new(&[
        "kappa",
        "lm_ratio",
        "energy_ratio",
        "predicted",
        "observed",
        "t_star",
        "sup_lm_ratio",
        "m2_decreasing",
        "agrees",
    ]);
    for e in entries {
        let (t_star, sup) = match &e.outcome {
            Ok(t) => (num(t.event.time()), num(t.sup_lm_norm() / steady_lm)),
            Err(_) => (String::new(), String::new()),
        };
        let agrees = match e.agrees() {
            Some(true) => "yes",
            Some(false) => "no",
            None => "excluded",
        };
        csv.row([
            num(e.kappa),
            num(e.margin.lm_ratio),
            num(e.margin.energy_ratio),
            e.margin.prediction.to_string(),
            e.observed().to_string(),
            t_star,
            sup,
            e.m2_strictly_decreasing().to_string(),
            agrees.to_string(),
        ]);
    }
    csv
}

pub fn is_reached_end(traj: &Trajectory) -> bool {
    matches!(traj.event, TerminalEvent::ReachedTEnd { .. })
}
