//! Implementations of the four subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use serde_json::json;

use aggdiff_core::diagnostics::{hls_constant, hls_ratio, moment_rhs};
use aggdiff_core::riesz::{default_cache_dir, load_or_assemble};
use aggdiff_core::solver::{run_with, InitialData, SimConfig};
use aggdiff_core::steady::{
    calibrated_steady_state, lm_constant, pohozaev_residual, self_consistency_residual,
    steady_energy, steady_profile,
};
use aggdiff_core::{KernelMatrix, ModelParams, RadialGrid, SteadyState};

use crate::config::{pick, pick_opt, require, FileConfig};
use crate::error::{CliError, CliResult, EXIT_FAILURE};
use crate::manifest::Manifest;
use crate::output::{num, Csv};
use crate::report::{events_csv, snapshots_csv, steady_profile_csv, trajectory_csv};
use crate::scan::{dichotomy_csv, run_scan};
use crate::verify::{self, Bound, Check, Lab, VerifySettings};
use crate::{DichotomyArgs, ModelArgs, RunArgs, SimulateArgs, SteadyArgs, VerifyArgs};

/// Model and grid settings after merging flags, file and defaults.
struct Model {
    file: FileConfig,
    params: ModelParams,
    lambda: f64,
    r_max: f64,
    n: usize,
    out: PathBuf,
    cache_dir: PathBuf,
}

impl Model {
    fn resolve(args: &ModelArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let d = require(args.d, &file, "d")?;
        let s = require(args.s, &file, "s")?;
        let epsilon = pick(args.epsilon, &file, "epsilon", 0.0)?;
        let params = ModelParams::with_epsilon(d, s, epsilon)?;
        let lambda = pick(args.lambda, &file, "lambda", 1.0)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CliError::usage(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let r_max = pick(args.rmax, &file, "rmax", 60.0)?;
        let n = pick(args.n, &file, "n", 512)?;
        // Validates r_max and n.
        RadialGrid::new(r_max, n, d)?;
        let out = pick(args.out.clone(), &file, "out", PathBuf::from("."))?;
        Ok(Self {
            file,
            params,
            lambda,
            r_max,
            n,
            out,
            cache_dir: default_cache_dir(),
        })
    }

    fn grid(&self) -> CliResult<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(
            self.r_max,
            self.n,
            self.params.d(),
        )?))
    }

    fn kernel(&self, params: ModelParams) -> CliResult<KernelMatrix> {
        Ok(load_or_assemble(
            self.grid()?,
            params,
            Some(&self.cache_dir),
        )?)
    }

    /// Kernel for `params` and the calibrated steady state, which always
    /// uses the unregularized kernel.
    fn kernel_and_steady(&self) -> CliResult<(KernelMatrix, SteadyState)> {
        let kernel = self.kernel(self.params)?;
        let steady = if self.params.epsilon() == 0.0 {
            calibrated_steady_state(self.lambda, &kernel)?
        } else {
            let plain = self.kernel(self.params.regularized(0.0)?)?;
            calibrated_steady_state(self.lambda, &plain)?
        };
        Ok((kernel, steady))
    }

    fn settings_json(&self) -> serde_json::Value {
        json!({
            "d": self.params.d(),
            "s": self.params.s(),
            "epsilon": self.params.epsilon(),
            "m": self.params.m(),
            "lambda": self.lambda,
            "r_max": self.r_max,
            "n": self.n,
        })
    }

    fn manifest(&self, command: &str) -> Manifest {
        let mut m = Manifest::new(command);
        m.settings = self.settings_json();
        m.kernel_cache_dir = Some(self.cache_dir.display().to_string());
        m
    }
}

fn write_csv(csv: &Csv, dir: &Path, name: &str, manifest: &mut Manifest) -> CliResult<()> {
    let path = csv
        .write(dir, name)
        .with_context(|| format!("writing {}", dir.join(name).display()))?;
    manifest.record(path);
    Ok(())
}

fn finish(mut manifest: Manifest, dir: &Path, start: Instant, code: i32) -> CliResult<i32> {
    manifest.exit_code = code;
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    manifest.write(dir)?;
    Ok(code)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check_csv(checks: &[Check]) -> Csv {
    let mut csv = Csv::new(&["check", "value", "bound", "limit", "pass"]);
    for c in checks {
        let (bound, limit) = match c.bound {
            Bound::AtMost(l) => ("le", num(l)),
            Bound::AtLeast(l) => ("ge", num(l)),
            Bound::Holds => ("holds", String::new()),
        };
        csv.row([
            c.name.clone(),
            num(c.value),
            bound.into(),
            limit,
            c.pass.to_string(),
        ]);
    }
    csv
}

pub fn steady(args: &SteadyArgs) -> CliResult<i32> {
    let start = Instant::now();
    let model = Model::resolve(&args.model)?;
    let plain_params = model.params.regularized(0.0)?;
    let kernel = model.kernel(plain_params)?;
    let ss = calibrated_steady_state(model.lambda, &kernel)?;
    let params = plain_params;
    let lm = ss.lm_power();

    let mut checks = vec![
        Check::at_most(
            "self_consistency_residual",
            self_consistency_residual(&ss, &kernel)?,
            1e-2,
        ),
        Check::at_most(
            "pohozaev_rel_residual",
            (pohozaev_residual(&ss, &kernel)? / lm).abs(),
            1e-3,
        ),
        Check::at_most(
            "energy_ratio_rel_dev",
            rel(
                steady_energy(&ss, &kernel)? / lm,
                2.0 * params.s() / params.beta(),
            ),
            1e-2,
        ),
        Check::at_most(
            "hls_ratio_rel_dev",
            rel(
                hls_ratio(&ss.profile, &kernel)?,
                hls_constant(params.d(), params.beta())?,
            ),
            1e-2,
        ),
        Check::at_most(
            "lm_closed_form_rel_dev",
            rel(lm, lm_constant(&params, ss.amplitude)),
            1e-3,
        ),
        Check::at_most(
            "moment_rhs_rel",
            moment_rhs(&ss.profile, &kernel)?.abs() / (4.0 * params.s() * lm),
            1e-2,
        ),
    ];
    let mut amplitudes = vec![];
    for factor in [0.5, 2.0] {
        let other = calibrated_steady_state(model.lambda * factor, &kernel)?;
        checks.push(Check::at_most(
            format!("lambda_x{factor}_lm_rel_dev"),
            rel(other.lm_power(), lm),
            1e-3,
        ));
        amplitudes.push((model.lambda * factor, other.amplitude));
    }
    let all_pass = checks.iter().all(|c| c.pass);

    let mut manifest = model.manifest("steady");
    // The written potential uses the regularized kernel when one was asked for.
    let profile_csv = if model.params.epsilon() > 0.0 {
        let reg = model.kernel(model.params)?;
        let ss_reg = steady_profile(ss.lambda, ss.amplitude, reg.grid().clone(), model.params)?;
        steady_profile_csv(&ss_reg, &reg)?
    } else {
        steady_profile_csv(&ss, &kernel)?
    };
    write_csv(
        &profile_csv,
        &model.out,
        "steady_profile.csv",
        &mut manifest,
    )?;
    write_csv(
        &check_csv(&checks),
        &model.out,
        "identity_report.csv",
        &mut manifest,
    )?;

    println!(
        "lambda = {}  B = {:.12e}  A = {:.12e}",
        ss.lambda, ss.amplitude, ss.potential_amplitude
    );
    for (l, b) in &amplitudes {
        println!("  calibrated B at lambda = {l}: {b:.12e}");
    }
    println!(
        "tail beyond r_max: mass fraction {:.3e}, L^m fraction {:.3e}",
        ss.tail_mass_fraction, ss.tail_lm_fraction
    );
    for c in &checks {
        println!(
            "  [{}] {} = {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value
        );
    }
    manifest.results = json!({
        "amplitude": ss.amplitude,
        "potential_amplitude": ss.potential_amplitude,
        "tail_mass_fraction": ss.tail_mass_fraction,
        "tail_lm_fraction": ss.tail_lm_fraction,
        "amplitude_by_lambda": amplitudes,
        "all_checks_pass": all_pass,
    });
    finish(
        manifest,
        &model.out,
        start,
        if all_pass { 0 } else { EXIT_FAILURE },
    )
}

struct Run {
    t_end: f64,
    cfl: f64,
    dt_floor: Option<f64>,
    linf_max: Option<f64>,
    sample_every: usize,
}

impl Run {
    fn resolve(args: &RunArgs, file: &FileConfig) -> CliResult<Self> {
        Ok(Self {
            t_end: pick(args.tend, file, "tend", 5.0)?,
            cfl: pick(args.cfl, file, "cfl", 0.4)?,
            dt_floor: pick_opt(args.dtfloor, file, "dtfloor")?,
            linf_max: pick_opt(args.linfmax, file, "linfmax")?,
            sample_every: pick(args.sample_every, file, "sample_every", 10)?,
        })
    }

    fn apply(&self, config: &mut SimConfig) {
        config.t_end = self.t_end;
        config.cfl = self.cfl;
        config.dt_floor = self.dt_floor;
        config.blowup_linf_threshold = self.linf_max;
        config.sample_every = self.sample_every;
    }

    fn json(&self) -> serde_json::Value {
        json!({
            "t_end": self.t_end,
            "cfl": self.cfl,
            "dt_floor": self.dt_floor,
            "blowup_linf_threshold": self.linf_max,
            "sample_every": self.sample_every,
        })
    }
}

/// Reads one value per line, either `u` or `r,u`. Non-numeric lines and
/// `#` comments are skipped.
fn read_init_file(path: &Path, centers: &[f64]) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Ok(first) = fields[0].parse::<f64>() else {
            continue;
        };
        let u = if fields.len() == 1 {
            first
        } else {
            let i = values.len();
            if let Some(&r) = centers.get(i) {
                if (first - r).abs() > 1e-9 * r.max(1.0) {
                    return Err(CliError::usage(format!(
                        "{}: radius {first} on row {} does not match cell centre {r}",
                        path.display(),
                        i + 1
                    )));
                }
            }
            fields[1].parse().map_err(|_| {
                CliError::usage(format!("{}: bad value `{}`", path.display(), fields[1]))
            })?
        };
        values.push(u);
    }
    if values.len() != centers.len() {
        return Err(CliError::usage(format!(
            "{} has {} values but the grid has {} cells",
            path.display(),
            values.len(),
            centers.len()
        )));
    }
    Ok(values)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<i32> {
    let start = Instant::now();
    let model = Model::resolve(&args.model)?;
    let run = Run::resolve(&args.run, &model.file)?;
    let file = &model.file;
    let kappa = pick_opt(args.kappa, file, "kappa")?;
    let amp = pick_opt(args.gaussian_amplitude, file, "gaussian_amplitude")?;
    let width = pick_opt(args.gaussian_width, file, "gaussian_width")?;
    let init_file: Option<PathBuf> = pick_opt(args.init_file.clone(), file, "init_file")?;
    let snapshot_every = pick(args.snapshot_every, file, "snapshot_every", 50)?;

    let chosen = [
        kappa.is_some(),
        amp.is_some() || width.is_some(),
        init_file.is_some(),
    ];
    match chosen.iter().filter(|c| **c).count() {
        0 => {
            return Err(CliError::usage(
                "choose initial data with --kappa, --gaussian-amplitude/--gaussian-width or --init-file",
            ))
        }
        1 => {}
        _ => return Err(CliError::usage("initial data options are mutually exclusive")),
    }
    let initial = if let Some(kappa) = kappa {
        InitialData::SteadyMultiple {
            kappa,
            lambda: model.lambda,
        }
    } else if let Some(path) = &init_file {
        InitialData::Values(read_init_file(path, model.grid()?.centers())?)
    } else {
        match (amp, width) {
            (Some(amplitude), Some(width)) => InitialData::Gaussian { amplitude, width },
            _ => {
                return Err(CliError::usage(
                    "--gaussian-amplitude and --gaussian-width must be given together",
                ))
            }
        }
    };
    let mut config = SimConfig::new(model.params, model.r_max, model.n, initial);
    run.apply(&mut config);
    config.snapshot_every = Some(snapshot_every);
    config.validate()?;

    let (kernel, steady) = if kappa.is_some() {
        let (k, ss) = model.kernel_and_steady()?;
        (k, Some(ss))
    } else {
        (model.kernel(model.params)?, None)
    };
    let traj = run_with(&config, &kernel, steady.as_ref())?;
    let steady_lm = steady
        .as_ref()
        .map(|ss| ss.profile.lp_norm(model.params.m()))
        .transpose()?;

    let mut manifest = model.manifest("simulate");
    manifest.settings["run"] = run.json();
    manifest.settings["initial"] = json!(format!("{:?}", config.initial)
        .chars()
        .take(200)
        .collect::<String>());
    write_csv(
        &trajectory_csv(&traj, steady_lm),
        &model.out,
        "trajectory.csv",
        &mut manifest,
    )?;
    write_csv(
        &events_csv(&traj, steady_lm),
        &model.out,
        "events.csv",
        &mut manifest,
    )?;
    write_csv(
        &snapshots_csv(&traj, kernel.grid().centers()),
        &model.out,
        "snapshots.csv",
        &mut manifest,
    )?;
    println!(
        "{} at t = {:.6e} after {} steps",
        traj.event.name(),
        traj.event.time(),
        traj.steps
    );
    if let Some(margin) = &traj.margin {
        println!(
            "lm ratio {:.6}  energy ratio {:.6}  predicted {}",
            margin.lm_ratio, margin.energy_ratio, margin.prediction
        );
    }
    manifest.results = json!({
        "event": traj.event.name(),
        "t_star": traj.event.time(),
        "steps": traj.steps,
        "blowup_threshold": traj.blowup_threshold,
        "dt_floor": traj.dt_floor,
        "prediction": traj.margin.map(|m| m.prediction.to_string()),
    });
    finish(manifest, &model.out, start, 0)
}

pub fn dichotomy(args: &DichotomyArgs) -> CliResult<i32> {
    let start = Instant::now();
    let model = Model::resolve(&args.model)?;
    let run = Run::resolve(&args.run, &model.file)?;
    let kappas = match &args.kappas {
        Some(k) => Some(k.clone()),
        None => model.file.get_list("kappas")?,
    }
    .unwrap_or_default();
    if kappas.is_empty() {
        return Err(CliError::usage("--kappas needs at least one value"));
    }
    let band = pick(args.margin, &model.file, "margin", 0.05)?;
    if !(band.is_finite() && band >= 0.0) {
        return Err(CliError::usage(format!(
            "margin must be nonnegative, got {band}"
        )));
    }
    let mut base = SimConfig::new(
        model.params,
        model.r_max,
        model.n,
        InitialData::SteadyMultiple {
            kappa: 1.0,
            lambda: model.lambda,
        },
    );
    run.apply(&mut base);
    for &kappa in &kappas {
        let mut c = base.clone();
        c.initial = InitialData::SteadyMultiple {
            kappa,
            lambda: model.lambda,
        };
        c.validate()?;
    }

    let (kernel, steady) = model.kernel_and_steady()?;
    let entries = run_scan(&kappas, band, &base, &kernel, &steady)?;
    let steady_lm = steady.profile.lp_norm(model.params.m())?;

    let mut manifest = model.manifest("dichotomy");
    manifest.settings["run"] = run.json();
    manifest.settings["kappas"] = json!(kappas);
    manifest.settings["margin"] = json!(band);
    write_csv(
        &dichotomy_csv(&entries, steady_lm),
        &model.out,
        "dichotomy.csv",
        &mut manifest,
    )?;

    let mut ok = true;
    let mut integrity = false;
    for e in &entries {
        let verdict = match e.agrees() {
            Some(true) => "agrees",
            Some(false) => {
                ok = false;
                "DISAGREES"
            }
            None => "not scored",
        };
        println!(
            "kappa {:<6} predicted {:<20} observed {:<16} {verdict}",
            e.kappa,
            e.margin.prediction.as_str(),
            e.observed()
        );
        if let Err(msg) = &e.outcome {
            integrity = true;
            eprintln!("error: kappa {}: {msg}", e.kappa);
        }
    }
    manifest.results = json!({ "all_agree": ok, "integrity_failure": integrity });
    let code = if ok && !integrity { 0 } else { EXIT_FAILURE };
    finish(manifest, &model.out, start, code)
}

pub fn verify(args: &VerifyArgs) -> CliResult<i32> {
    let start = Instant::now();
    let model = Model::resolve(&args.model)?;
    if model.params.epsilon() != 0.0 {
        return Err(CliError::usage(
            "verify checks the unregularized model; drop --epsilon",
        ));
    }
    let mut settings = VerifySettings::reference(model.params.d(), model.params.s());
    settings.lambda = model.lambda;
    settings.r_max = model.r_max;
    settings.n = model.n;
    settings.cache_dir = Some(model.cache_dir.clone());
    let lab = Lab::new(settings)?;
    let criteria = verify::run_all(&lab);

    let mut manifest = model.manifest("verify");
    write_csv(
        &verify::criteria_csv(&criteria),
        &model.out,
        "verify.csv",
        &mut manifest,
    )?;
    if let Some(csv) = verify::scan_csv(&lab) {
        write_csv(&csv, &model.out, "verify_dichotomy.csv", &mut manifest)?;
    }
    write_csv(
        &steady_profile_csv(&lab.steady, &lab.kernel)?,
        &model.out,
        "steady_profile.csv",
        &mut manifest,
    )?;
    for c in &criteria {
        println!("{}", c.summary_line());
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!("{passed}/{} criteria passed", criteria.len());
    manifest.results = json!({
        "passed": passed,
        "total": criteria.len(),
        "failed": criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect::<Vec<_>>(),
    });
    let code = if passed == criteria.len() {
        0
    } else {
        EXIT_FAILURE
    };
    finish(manifest, &model.out, start, code)
}
