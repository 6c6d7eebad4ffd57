//! Subcommand implementations. Each one resolves its settings, calls the
//! library and writes its files; nothing numerical happens here.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use ncvd_core::manufactured::{worst_residual, ExactSolution, ManufacturedCase, ManufacturedCase3d};
use ncvd_core::scheme::{run_simulation, Problem, StabilityCase, ZeroCase};
use ncvd_core::{eoc, ErrorRecord, ProjectionMode, Simulation, SimulationConfig, SourceMode};

use crate::cli::{Command, CommonArgs, ConvergenceArgs, RunArgs, StabilityArgs, ValidateArgs};
use crate::config::{BcKind, CaseKind, Settings};
use crate::{csv, mtx, vtk};

/// Relative tolerance of the density energy identity.
pub const DENSITY_IDENTITY_TOL: f64 = 1e-9;
/// Pass threshold of the manufactured-solution residual.
pub const MMS_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad configuration or refused overwrite.
    #[error("{0}")]
    Usage(String),
    /// The computation ran and failed.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Failure(format!("{}: {e}", path.display()))
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => cmd_run(&a),
        Command::Convergence(a) => cmd_convergence(&a),
        Command::Stability(a) => cmd_stability(&a),
        Command::ValidateMms(a) => cmd_validate_mms(&a),
    }
}

/// Caps the worker threads of parallel assembly from `NCVD_THREADS`.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("NCVD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("NCVD_THREADS must be a positive integer, got `{value}`")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Flags over config file over `defaults`.
fn layered(common: &CommonArgs, extra: Settings, defaults: Settings) -> Result<Settings, CliError> {
    let file = match &common.config {
        Some(path) => Settings::from_file(path).map_err(usage)?,
        None => Settings::default(),
    };
    Ok(extra.over(common.settings()).over(file.over(defaults)))
}

/// Creates the output directory and returns the path of `name` in it,
/// refusing to replace an existing file without `--force`.
fn output_file(settings: &Settings, name: &str, force: bool) -> Result<PathBuf, CliError> {
    let dir = settings.out.clone().unwrap_or_else(|| PathBuf::from("ncvd-out"));
    fs::create_dir_all(&dir).map_err(io_failure(&dir))?;
    let path = dir.join(name);
    if path.exists() && !force {
        return Err(usage(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(path)
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_failure(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_failure(path))
}

fn problem_for(case: CaseKind, config: &SimulationConfig) -> Box<dyn Problem> {
    match case {
        CaseKind::Mms2d => Box::new(ManufacturedCase::new(config.mu, config.kappa)),
        CaseKind::Zero => Box::new(ZeroCase),
    }
}

fn export_first_step(sim: &mut Simulation<'_>, dir: &Path) -> Result<(), CliError> {
    let state = sim.initialize_state().map_err(failure)?;
    let density = sim.density_system(&state);
    let sigma = sim.step_density(&state).map_err(failure)?;
    let momentum = sim.momentum_system(&state, &sigma);
    let temperature = sim.temperature_system(&state, &sigma);
    for (name, system) in [("density", density), ("momentum", momentum), ("temperature", temperature)] {
        let m = dir.join(format!("{name}.mtx"));
        write_with(&m, |w| mtx::write_matrix(w, &system.matrix))?;
        let r = dir.join(format!("{name}_rhs.mtx"));
        write_with(&r, |w| mtx::write_vector(w, &system.rhs))?;
    }
    Ok(())
}

fn dump_mesh(sim: &Simulation<'_>, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("mesh.vtk");
    write_with(&path, |w| vtk::write_mesh(w, sim.mesh()))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let extra = Settings {
        vtk_every: args.vtk_every,
        ..Settings::default()
    };
    let settings = layered(&args.common, extra, Settings::defaults())?;
    let config = settings.simulation(settings.n()).map_err(usage)?;
    let csv_path = output_file(&settings, "errors.csv", args.common.force)?;
    let dir = csv_path.parent().expect("file inside the output directory").to_path_buf();
    let problem = problem_for(settings.case.unwrap_or(CaseKind::Mms2d), &config);
    let mut sim = Simulation::new(config, problem.as_ref()).map_err(failure)?;
    if args.common.dump_mesh {
        dump_mesh(&sim, &dir)?;
    }
    if args.common.export_matrices {
        export_first_step(&mut sim, &dir)?;
    }

    let every = settings.vtk_every.unwrap_or(0);
    let mesh = sim.mesh().clone();
    let tau = sim.tau();
    let mut snapshot_error = None;
    let output = sim
        .run_with(|state| {
            if every == 0 || state.time_index % every != 0 || snapshot_error.is_some() {
                return;
            }
            let path = dir.join(format!("fields_{:05}.vtk", state.time_index));
            let t = state.time_index as f64 * tau;
            snapshot_error = write_with(&path, |w| vtk::write_fields(w, &mesh, state, t)).err();
        })
        .map_err(failure)?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let record = output.errors.ok_or_else(|| failure("case has no exact solution"))?;
    write_with(&csv_path, |w| csv::write_errors(w, &[record]))?;
    println!("{}", csv::ERROR_HEADER);
    println!("{}", csv::error_row(&record));
    if output.state.positivity_lost {
        eprintln!("warning: sigma reached {} at a vertex", output.state.sigma_min);
    }
    Ok(())
}

/// Runs `levels` with at most `jobs` at a time and hands results to
/// `consume` in level order. After the first failure no finer level starts
/// and later results are dropped.
fn run_levels<T: Send>(
    levels: &[usize],
    jobs: usize,
    run: impl Fn(usize) -> Result<T, CliError> + Sync,
    mut consume: impl FnMut(usize, T) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, levels.len().max(1)) {
            let tx = tx.clone();
            let (next, stop, run) = (&next, &stop, &run);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= levels.len() || stop.load(Ordering::SeqCst) {
                    break;
                }
                let result = run(levels[k]);
                if result.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                if tx.send((k, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: Vec<Option<Result<T, CliError>>> = (0..levels.len()).map(|_| None).collect();
        let mut done = 0;
        for (k, result) in rx {
            pending[k] = Some(result);
            while done < levels.len() {
                match pending[done].take() {
                    None => break,
                    Some(Ok(value)) => {
                        if let Err(e) = consume(done, value) {
                            stop.store(true, Ordering::SeqCst);
                            return Err(e);
                        }
                        done += 1;
                    }
                    Some(Err(e)) => {
                        stop.store(true, Ordering::SeqCst);
                        return Err(e);
                    }
                }
            }
        }
        Ok(())
    })
}

pub fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), CliError> {
    let extra = Settings {
        levels: args.levels.clone(),
        jobs: args.jobs,
        ..Settings::default()
    };
    let settings = layered(&args.common, extra, Settings::defaults())?;
    let law = match (settings.tau, settings.tau_law) {
        (None, Some(law)) => law,
        _ => return Err(usage("convergence sweeps need --tau-law instead of a fixed --tau")),
    };
    let levels = settings.levels.clone().unwrap_or_else(|| law.default_levels());
    if levels.len() < 2 {
        return Err(usage("convergence needs at least two levels"));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(usage("levels must double from one to the next (h halves)"));
    }
    let configs = levels
        .iter()
        .map(|&n| settings.simulation(n).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    let csv_path = output_file(&settings, "convergence.csv", args.common.force)?;
    let case = settings.case.unwrap_or(CaseKind::Mms2d);
    let jobs = settings.jobs.unwrap_or(1).max(1);
    println!("{}", csv::ERROR_HEADER);

    let mut records: Vec<ErrorRecord> = Vec::new();
    let run = |n: usize| {
        let k = levels.iter().position(|&l| l == n).expect("level from the list");
        let config = configs[k];
        let problem = problem_for(case, &config);
        let out = run_simulation(config, problem.as_ref()).map_err(|e| failure(format!("n={n}: {e}")))?;
        out.errors.ok_or_else(|| failure("case has no exact solution"))
    };
    run_levels(&levels, jobs, run, |_, record| {
        records.push(record);
        let table = if records.len() > 1 {
            eoc(&records).map_err(failure)?
        } else {
            records.clone()
        };
        println!("{}", csv::error_row(table.last().expect("nonempty")));
        // Rewritten after every level so an aborted sweep keeps its rows.
        write_with(&csv_path, |w| csv::write_errors(w, &table))
    })
}

/// Built-in defaults of the stability check: 32 steps on an 8x8 mesh.
fn stability_defaults() -> Settings {
    let base = Settings::defaults();
    Settings {
        n: Some(8),
        tau: Some(base.t_final.expect("default end time") / 32.0),
        tau_law: None,
        bc: Some(BcKind::Homogeneous),
        ..base
    }
}

pub fn cmd_stability(args: &StabilityArgs) -> Result<(), CliError> {
    let mut settings = layered(&args.common, Settings::default(), stability_defaults())?;
    if settings.bc == Some(BcKind::Manufactured) {
        return Err(usage("stability runs use homogeneous boundary data"));
    }
    settings.bc = Some(BcKind::Homogeneous);
    let mut config = settings.simulation(settings.n()).map_err(usage)?;
    config.source_mode = SourceMode::None;
    if args.break_projection {
        config.projection_mode = ProjectionMode::Identity;
    }
    let csv_path = output_file(&settings, "energy.csv", args.common.force)?;
    let problem: Box<dyn Problem> = match settings.case {
        Some(CaseKind::Zero) => Box::new(ZeroCase),
        _ => Box::new(StabilityCase),
    };
    let mut sim = Simulation::new(config, problem.as_ref()).map_err(failure)?;
    if args.common.dump_mesh {
        dump_mesh(&sim, csv_path.parent().expect("output directory"))?;
    }
    let output = sim.run().map_err(failure)?;
    let report = &output.energy;
    write_with(&csv_path, |w| csv::write_energy(w, report))?;

    let slack = report.max_relative_density_slack();
    let worst = |f: fn(&ncvd_core::StepEnergy) -> f64| report.steps.iter().skip(1).map(f).fold(f64::NEG_INFINITY, f64::max);
    println!("steps: {}", report.steps.len() - 1);
    println!("max relative density slack: {}", csv::fmt_g(slack));
    println!("max momentum slack (monitored): {}", csv::fmt_g(worst(|s| s.momentum_slack)));
    println!("max temperature slack (monitored): {}", csv::fmt_g(worst(|s| s.temperature_slack)));
    let identity = report.density_identity_holds(DENSITY_IDENTITY_TOL);
    let monotone = report.sigma_nonincreasing(DENSITY_IDENTITY_TOL);
    if identity && monotone {
        println!("density energy identity: pass");
        Ok(())
    } else {
        Err(failure(format!(
            "density energy identity violated: relative slack {} (tolerance {}), norm nonincreasing: {monotone}",
            csv::fmt_g(slack),
            csv::fmt_g(DENSITY_IDENTITY_TOL)
        )))
    }
}

/// Adds one to the first forcing component of the wrapped case.
struct PerturbedForcing<C>(C);

macro_rules! delegate {
    ($d:literal) => {
        fn mu(&self) -> f64 {
            self.0.mu()
        }
        fn kappa(&self) -> f64 {
            self.0.kappa()
        }
        fn sigma(&self, x: [f64; $d], t: f64) -> f64 {
            self.0.sigma(x, t)
        }
        fn u(&self, x: [f64; $d], t: f64) -> [f64; $d] {
            self.0.u(x, t)
        }
        fn p(&self, x: [f64; $d], t: f64) -> f64 {
            self.0.p(x, t)
        }
        fn theta(&self, x: [f64; $d], t: f64) -> f64 {
            self.0.theta(x, t)
        }
        fn f(&self, x: [f64; $d], t: f64) -> [f64; $d] {
            let mut f = self.0.f(x, t);
            f[0] += 1.0;
            f
        }
        fn g(&self, x: [f64; $d], t: f64) -> f64 {
            self.0.g(x, t)
        }
        fn g2(&self, x: [f64; $d], t: f64) -> f64 {
            self.0.g2(x, t)
        }
    };
}

impl ExactSolution<2> for PerturbedForcing<ManufacturedCase> {
    delegate!(2);
}

impl ExactSolution<3> for PerturbedForcing<ManufacturedCase3d> {
    delegate!(3);
}

fn linspace(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5];
    }
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

/// Space-time samples `m^(D+1)` on `[0,1]^D x [0,1]`.
fn samples<const D: usize>(m: usize) -> Vec<([f64; D], f64)> {
    let axis = linspace(m);
    let total = m.pow(D as u32 + 1);
    (0..total)
        .map(|mut k| {
            let t = axis[k % m];
            k /= m;
            let x = std::array::from_fn(|_| {
                let v = axis[k % m];
                k /= m;
                v
            });
            (x, t)
        })
        .collect()
}

fn check<const D: usize, C: ExactSolution<D>>(name: &str, case: &C, m: usize) -> bool {
    let points = samples::<D>(m);
    let (value, x, t) = worst_residual(case, &points).expect("at least one sample");
    let pass = value <= MMS_RESIDUAL_TOL;
    println!(
        "{name}: max residual {} over {} points: {}",
        csv::fmt_g(value),
        points.len(),
        if pass { "pass" } else { "FAIL" }
    );
    if !pass {
        println!("  worst at x = {x:?}, t = {t}");
    }
    pass
}

pub fn cmd_validate_mms(args: &ValidateArgs) -> Result<(), CliError> {
    if args.grid == 0 {
        return Err(usage("--grid must be positive"));
    }
    if !(args.mu > 0.0 && args.kappa > 0.0) {
        return Err(usage("mu and kappa must be positive"));
    }
    let (c2, c3) = (
        ManufacturedCase::new(args.mu, args.kappa),
        ManufacturedCase3d::new(args.mu, args.kappa),
    );
    let ok = if args.perturb_forcing {
        check("2d (perturbed)", &PerturbedForcing(c2), args.grid)
            & check("3d (perturbed)", &PerturbedForcing(c3), args.grid)
    } else {
        check("2d", &c2, args.grid) & check("3d", &c3, args.grid)
    };
    if ok {
        Ok(())
    } else {
        Err(failure("manufactured residual above tolerance"))
    }
}
