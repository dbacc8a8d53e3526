//! The `sps` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sps_core::dynamics::{
    evolve_observed, evolve_radial_observed, virial_consistency, RadialSimConfig, SimConfig,
    Thresholds, TrajectoryRecord,
};
use sps_core::fibering::{classify, fiber_energy, t_star, Classification, FiberScan};
use sps_core::ground_state::{
    decay_fit, gamma_curve, gaussian_start, lambda_estimate, nls_constant, pohozaev_check, solve_ground_state,
    tail_window, validate_problem, GroundState, Shift, SolverOptions, Sweep,
};
use sps_core::hartree::{radial_potential_at_origin, BoxHartree};
use sps_core::snapshot::{Snapshot, SnapshotField};
use sps_core::{field::random_field, BoxField, BoxGrid, Couplings, EnergyReport, ProfileClass, RadialField, RadialGrid};

use crate::config::{ConfigError, Key, Settings};
use crate::{EXIT_OK, EXIT_UNCONVERGED};

#[derive(Debug)]
pub enum Failure {
    /// Bad parameters, unreadable input or unwritable output (exit 1).
    Invalid(String),
    /// A numerical stage failed to converge or produced no usable result
    /// (exit 2).
    Unconverged(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<sps_core::Error> for Failure {
    fn from(e: sps_core::Error) -> Self {
        use sps_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::Parse { .. } | E::Io(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Unconverged(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(format!("i/o error: {e}"))
    }
}

type Outcome = Result<i32, Failure>;

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: fn() -> Vec<Key>,
    pub run: fn(&Settings, &mut dyn Write) -> Outcome,
}

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "ground-state",
        about: "Solve for the ground state at mass c and write it as a snapshot",
        keys: ground_state_keys,
        run: cmd_ground_state,
    },
    CommandSpec {
        name: "gamma-curve",
        about: "Sweep the ground-state level γ(c) over a mass range",
        keys: gamma_curve_keys,
        run: cmd_gamma_curve,
    },
    CommandSpec {
        name: "evolve",
        about: "Evolve an initial datum and record the trajectory",
        keys: evolve_keys,
        run: cmd_evolve,
    },
    CommandSpec {
        name: "instability-suite",
        about: "Evolve rescalings u_c^λ of a ground state and tabulate the outcomes",
        keys: instability_keys,
        run: cmd_instability_suite,
    },
    CommandSpec {
        name: "decay-fit",
        about: "Fit the exponential tail of a ground state",
        keys: decay_fit_keys,
        run: cmd_decay_fit,
    },
    CommandSpec {
        name: "fiber-scan",
        about: "Sample t ↦ F(u^t) and Q(u^t) around the fiber maximum",
        keys: fiber_scan_keys,
        run: cmd_fiber_scan,
    },
    CommandSpec {
        name: "check",
        about: "Run the algebraic, Gaussian and fibering invariant suite",
        keys: check_keys,
        run: cmd_check,
    },
];

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

const COUPLING_KEYS: [Key; 3] = [
    key("p", "4", "Exponent of the local term, 10/3 < p < 6"),
    key("alpha", "1", "Hartree coupling, 0 or 1"),
    key("beta", "1", "Local power coupling, 0 or 1"),
];

const SOLVER_KEYS: [Key; 5] = [
    key("n", "4096", "Radial nodes of the starting grid"),
    key("rmax", "40", "Radius of the starting grid"),
    key("tol", "1e-8", "Euler-Lagrange residual target"),
    key("max-iter", "20000", "Iteration limit of the solver"),
    key("shift", "adaptive", "Preconditioner shift: adaptive or unit"),
];

const RUN_KEYS: [Key; 11] = [
    key("dt", "1e-5", "Time step (initial step for the adaptive radial propagator)"),
    key("t-end", "20", "Final time"),
    key("cadence", "100", "Steps between diagnostic samples"),
    key("a-ratio-max", "1e3", "Blow-up threshold on A(t)/A(0)"),
    key("tail-max", "1e-6", "Resolution threshold on the spectral tail fraction"),
    key("adaptive", "true", "Radial: shrink the step as the peak potential grows"),
    key("refine-tail", "1e-10", "Radial: double the grid when the tail fraction exceeds this"),
    key("coarsen", "true", "Radial: halve the grid while the upper spectrum is negligible"),
    key("min-points", "256", "Radial: smallest grid when coarsening"),
    key("max-points", "262144", "Radial: largest grid when refining"),
    key("jitter", "0.25", "Radial: relative step modulation, in [0, 1)"),
];

fn with(out_default: &'static str, groups: &[&[Key]], own: &[Key]) -> Vec<Key> {
    let mut keys: Vec<Key> = own.to_vec();
    for g in groups {
        keys.extend_from_slice(g);
    }
    keys.push(key("out", out_default, "Output directory"));
    keys
}

fn ground_state_keys() -> Vec<Key> {
    with(
        "sps-out/ground-state",
        &[&COUPLING_KEYS, &SOLVER_KEYS],
        &[
            key("c", "0.5", "Mass ∫|u|²"),
            key("init", "", "Radial snapshot to start from instead of a Gaussian"),
        ],
    )
}

fn gamma_curve_keys() -> Vec<Key> {
    with(
        "sps-out/gamma-curve",
        &[&COUPLING_KEYS, &SOLVER_KEYS],
        &[
            key("c-min", "0.2", "Smallest mass"),
            key("c-max", "2", "Largest mass"),
            key("points", "10", "Number of masses"),
            key("spacing", "linear", "Mass spacing: linear or log"),
            key("parallel", "false", "Independent cold-started solves on worker threads instead of continuation"),
        ],
    )
}

fn evolve_keys() -> Vec<Key> {
    with(
        "sps-out/evolve",
        &[&COUPLING_KEYS, &RUN_KEYS, &SOLVER_KEYS],
        &[
            key("recipe", "ground-state-rescaled", "Initial datum: ground-state-rescaled, gaussian, plane-wave, zero or snapshot"),
            key("lambda", "0.9", "Dilation u^λ(x) = λ^{3/2} u(λx) of the ground state"),
            key("c", "0.5", "Mass of the ground state or Gaussian"),
            key("width", "1", "Gaussian width"),
            key("mode", "1,0,0", "Plane-wave mode (integers)"),
            key("amplitude", "0.1", "Plane-wave amplitude"),
            key("snapshot", "", "Snapshot file for recipe = snapshot"),
            key("propagator", "radial", "radial or box"),
            key("box-n", "64", "Box points per axis"),
            key("box-l", "24", "Box side length"),
            key("snapshot-stride", "0", "Write a field snapshot every this many samples (0: never)"),
            key("classify", "true", "Classify the datum against the ground-state level at its mass"),
        ],
    )
}

fn instability_keys() -> Vec<Key> {
    with(
        "sps-out/instability-suite",
        &[&COUPLING_KEYS, &RUN_KEYS, &SOLVER_KEYS],
        &[
            key("lambdas", "0.8,0.9,0.95,1.0,1.05,1.1,1.2", "Dilation factors λ"),
            key("c", "0.5", "Mass of the ground state"),
        ],
    )
}

fn decay_fit_keys() -> Vec<Key> {
    with(
        "sps-out/decay-fit",
        &[&COUPLING_KEYS, &SOLVER_KEYS],
        &[
            key("snapshot", "", "Ground-state snapshot; solved afresh when empty"),
            key("c", "0.5", "Mass when solving"),
            key("hi-frac", "1e-3", "Window starts where |u| first drops below this fraction of its peak"),
            key("lo-frac", "1e-8", "Window ends where |u| first drops below this fraction of its peak"),
        ],
    )
}

fn fiber_scan_keys() -> Vec<Key> {
    with(
        "sps-out/fiber-scan",
        &[&COUPLING_KEYS],
        &[
            key("snapshot", "", "Radial snapshot to scan; a Gaussian when empty"),
            key("c", "1", "Gaussian mass"),
            key("width", "1", "Gaussian width"),
            key("n", "2048", "Gaussian radial nodes"),
            key("rmax", "20", "Gaussian grid radius"),
            key("count", "101", "Number of dilation factors"),
            key("spread", "4", "Scan t ∈ [t*/spread, t*·spread]"),
        ],
    )
}

fn check_keys() -> Vec<Key> {
    with(
        "sps-out/check",
        &[],
        &[
            key("fields", "1000", "Random fields for the identity check"),
            key("fiber-fields", "200", "Random fields for the fibering check"),
            key("seed", "1", "Seed of the random fields"),
            key("n", "1024", "Radial nodes"),
            key("rmax", "24", "Grid radius"),
        ],
    )
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn couplings(s: &Settings) -> Result<Couplings, Failure> {
    Ok(Couplings::new(s.f64("alpha")?, s.f64("beta")?, s.f64("p")?)?)
}

fn solver(s: &Settings) -> Result<(SolverOptions, usize, f64), Failure> {
    let shift = match s.choice("shift", &["adaptive", "unit"])? {
        "unit" => Shift::Unit,
        _ => Shift::Adaptive,
    };
    let tol = s.f64("tol")?;
    if !(tol > 0.0) {
        return Err(Failure::Invalid(format!("`tol` must be positive, got {tol}")));
    }
    let n = s.usize("n")?;
    let rmax = s.f64("rmax")?;
    RadialGrid::new(n, rmax)?;
    Ok((SolverOptions { tol, max_iter: s.usize("max-iter")?, shift }, n, rmax))
}

fn run_config(s: &Settings, cp: Couplings) -> Result<RadialSimConfig, Failure> {
    let mut cfg = RadialSimConfig::new(s.f64("dt")?, s.f64("t-end")?, cp, s.usize("cadence")?)?;
    cfg.thresholds = thresholds(s)?;
    cfg.adaptive = s.bool("adaptive")?;
    cfg.refine_tail = s.f64("refine-tail")?;
    cfg.coarsen = s.bool("coarsen")?;
    cfg.min_points = s.usize("min-points")?;
    cfg.max_points = s.usize("max-points")?;
    cfg.jitter = s.f64("jitter")?;
    cfg.validate()?;
    Ok(cfg)
}

fn thresholds(s: &Settings) -> Result<Thresholds, Failure> {
    Ok(Thresholds { a_ratio_max: s.f64("a-ratio-max")?, spectral_tail_max: s.f64("tail-max")? })
}

/// Creates the output directory and writes the config echo.
fn prepare_out(s: &Settings) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(s.str("out"));
    if dir.as_os_str().is_empty() {
        return Err(Failure::Invalid("`out` must name a directory".into()));
    }
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::Invalid(format!("cannot create `{}`: {e}", dir.display())))?;
    fs::write(dir.join("config.txt"), s.echo())?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(|e| Failure::Invalid(format!("cannot write `{}`: {e}", path.display())))
}

fn load_snapshot(path: &str) -> Result<Snapshot, Failure> {
    Snapshot::load(path).map_err(|e| Failure::Invalid(format!("cannot read snapshot `{path}`: {e}")))
}

fn load_radial(path: &str) -> Result<RadialField, Failure> {
    match load_snapshot(path)?.field {
        SnapshotField::Radial(f) => Ok(f),
        SnapshotField::Box(_) => Err(Failure::Invalid(format!("`{path}` is a box snapshot; a radial one is needed"))),
    }
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

fn report_lines(out: &mut String, r: &EnergyReport) {
    let _ = writeln!(out, "A = {}", f17(r.a));
    let _ = writeln!(out, "B = {}", f17(r.b));
    let _ = writeln!(out, "C = {}", f17(r.c));
    let _ = writeln!(out, "D = {}", f17(r.d));
    let _ = writeln!(out, "F = {}", f17(r.f));
    let _ = writeln!(out, "Q = {}", f17(r.q));
    if let Some(l) = r.lambda_hat {
        let _ = writeln!(out, "lambda_hat = {}", f17(l));
    }
}

fn solve(c: f64, cp: Couplings, s: &Settings) -> Result<GroundState, Failure> {
    let (opts, n, rmax) = solver(s)?;
    let init = gaussian_start(c, n, rmax)?;
    Ok(solve_ground_state(c, cp, &init, &opts)?)
}

fn ground_state_snapshot(gs: &GroundState) -> Snapshot {
    Snapshot::radial(gs.field.clone(), gs.p())
        .with_meta("c", f17(gs.c))
        .with_meta("alpha", gs.couplings.alpha)
        .with_meta("beta", gs.couplings.beta)
        .with_meta("lambda_c", f17(gs.lambda_c))
        .with_meta("gamma_c", f17(gs.gamma_c))
        .with_meta("residual", f17(gs.residual))
        .with_meta("iterations", gs.iterations)
        .with_meta("converged", gs.converged)
}

// ---------------------------------------------------------------------------
// ground-state
// ---------------------------------------------------------------------------

fn cmd_ground_state(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let c = s.f64("c")?;
    validate_problem(c, cp)?;
    let (opts, n, rmax) = solver(s)?;
    let init = match s.str("init") {
        "" => gaussian_start(c, n, rmax)?,
        path => load_radial(path)?,
    };
    let dir = prepare_out(s)?;
    let gs = solve_ground_state(c, cp, &init, &opts)?;
    let snap = ground_state_snapshot(&gs);
    snap.save(dir.join("ground_state.snap"))?;
    let poh = pohozaev_check(&gs);
    let mut text = String::new();
    let _ = writeln!(text, "converged = {}", gs.converged);
    let _ = writeln!(text, "iterations = {}", gs.iterations);
    let _ = writeln!(text, "residual = {}", f17(gs.residual));
    let _ = writeln!(text, "c = {}", f17(c));
    let _ = writeln!(text, "lambda_c = {}", f17(gs.lambda_c));
    let _ = writeln!(text, "gamma_c = {}", f17(gs.gamma_c));
    report_lines(&mut text, &gs.report());
    let _ = writeln!(text, "pohozaev_q_residual = {}", f17(poh.q_residual));
    let _ = writeln!(text, "pohozaev_multiplier_residual = {}", f17(poh.multiplier_residual));
    let _ = writeln!(text, "grid_points = {}", gs.field.grid().len());
    let _ = writeln!(text, "grid_rmax = {}", f17(gs.field.grid().r_max()));
    if cp.alpha == 0.0 {
        let _ = writeln!(text, "nls_constant = {}", f17(nls_constant(cp.p)));
    }
    fs::write(dir.join("report.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    if gs.converged {
        Ok(EXIT_OK)
    } else {
        writeln!(stdout, "solver stopped at residual {:.3e} above tol {:.3e}", gs.residual, opts.tol)?;
        Ok(EXIT_UNCONVERGED)
    }
}

// ---------------------------------------------------------------------------
// gamma-curve
// ---------------------------------------------------------------------------

fn mass_values(s: &Settings) -> Result<Vec<f64>, Failure> {
    let (lo, hi) = (s.f64("c-min")?, s.f64("c-max")?);
    let count = s.usize("points")?;
    let log = s.choice("spacing", &["linear", "log"])? == "log";
    if !(lo > 0.0) {
        return Err(Failure::Invalid(format!("`c-min` must be positive, got {lo}")));
    }
    match count {
        0 => Err(Failure::Invalid("`points` must be at least 1".into())),
        1 if hi == lo => Ok(vec![lo]),
        1 => Err(Failure::Invalid("a single-point sweep needs c-min = c-max".into())),
        _ if !(hi > lo) => Err(Failure::Invalid(format!("need c-min < c-max, got [{lo}, {hi}]"))),
        _ => Ok((0..count)
            .map(|i| {
                let x = i as f64 / (count - 1) as f64;
                if log {
                    (lo.ln() + x * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + x * (hi - lo)
                }
            })
            .collect()),
    }
}

fn cmd_gamma_curve(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let cs = mass_values(s)?;
    for &c in &cs {
        validate_problem(c, cp)?;
    }
    let (opts, n, rmax) = solver(s)?;
    let sweep = if s.bool("parallel")? { Sweep::Independent } else { Sweep::Continuation };
    let dir = prepare_out(s)?;
    let curve = gamma_curve(cp, &cs, &RadialGrid::new(n, rmax)?, &opts, sweep)?;
    write_file(&dir.join("gamma_curve.csv"), |b| curve.write_csv(b))?;
    let mono = curve.monotonicity(1e-6);
    let converged = curve.points.iter().filter(|p| p.converged()).count();
    let opt = |v: Option<f64>| v.map(f17).unwrap_or_default();
    let trend = curve.small_mass_trend();
    let mut text = String::new();
    let _ = writeln!(text, "points = {}", cs.len());
    let _ = writeln!(text, "converged = {converged}");
    let _ = writeln!(text, "monotonicity_violations = {}", mono.violations);
    let _ = writeln!(text, "monotonicity_worst_rise = {}", f17(mono.worst));
    let _ = writeln!(text, "small_mass_gamma_increase = {}", opt(trend.map(|t| t.0)));
    let _ = writeln!(text, "small_mass_kinetic_increase = {}", opt(trend.map(|t| t.1)));
    let _ = writeln!(text, "log_slope = {}", opt(curve.log_slope()));
    let _ = writeln!(text, "plateau_estimate = {}", opt(curve.plateau_estimate));
    for p in curve.points.iter().filter(|p| !p.converged()) {
        let why = match &p.outcome {
            Ok(g) => format!("residual {:.3e}", g.residual),
            Err(e) => e.clone(),
        };
        let _ = writeln!(text, "unconverged c = {}: {why}", f17(p.c));
    }
    fs::write(dir.join("summary.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    Ok(if converged == cs.len() { EXIT_OK } else { EXIT_UNCONVERGED })
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

enum Datum {
    Radial(RadialField),
    Box(BoxField),
}

impl Datum {
    fn report(&self, cp: Couplings) -> EnergyReport {
        match self {
            Datum::Radial(u) => u.energy_report(cp),
            Datum::Box(u) => u.energy_report(cp, &mut BoxHartree::new(u.grid().clone())),
        }
    }
}

/// Evolves `datum`, writing `trajectory.csv` and optional snapshots into
/// `dir` under `prefix`.
fn run_datum(
    datum: &Datum,
    s: &Settings,
    cp: Couplings,
    dir: &Path,
    prefix: &str,
) -> Result<TrajectoryRecord, Failure> {
    let stride = s.usize("snapshot-stride").unwrap_or(0);
    let snap_dir = dir.join("snapshots");
    if stride > 0 {
        fs::create_dir_all(&snap_dir)?;
    }
    let mut io_error = None;
    let mut save = |idx: usize, snap: Snapshot| {
        if stride > 0 && idx % stride == 0 && io_error.is_none() {
            let path = snap_dir.join(format!("{prefix}sample_{idx:07}.snap"));
            if let Err(e) = snap.with_meta("sample", idx).save(path) {
                io_error = Some(e);
            }
        }
    };
    let record = match datum {
        Datum::Radial(u) => {
            let cfg = run_config(s, cp)?;
            evolve_radial_observed(u, &cfg, |i, f| {
                if stride > 0 && i % stride == 0 {
                    save(i, Snapshot::radial(f.clone(), cp.p));
                }
            })?
        }
        Datum::Box(u) => {
            let mut cfg = SimConfig::new(s.f64("dt")?, s.f64("t-end")?, cp, s.usize("cadence")?)?;
            cfg.thresholds = thresholds(s)?;
            cfg.steps()?;
            evolve_observed(u, &cfg, |i, f| {
                if stride > 0 && i % stride == 0 {
                    save(i, Snapshot::boxed(f.clone(), cp.p));
                }
            })?
        }
    };
    if let Some(e) = io_error {
        return Err(e.into());
    }
    write_file(&dir.join(format!("{prefix}trajectory.csv")), |b| record.write_csv(b))?;
    Ok(record)
}

fn trajectory_lines(out: &mut String, rec: &TrajectoryRecord) {
    let _ = writeln!(out, "termination = {}", rec.termination);
    let _ = writeln!(out, "detection_time = {}", rec.detection_time.map(f17).unwrap_or_default());
    let _ = writeln!(out, "steps = {}", rec.steps);
    let _ = writeln!(out, "samples = {}", rec.samples.len());
    let _ = writeln!(out, "refinements = {}", rec.refinements);
    if let (Some(first), Some(last)) = (rec.samples.first(), rec.samples.last()) {
        let _ = writeln!(out, "final_time = {}", f17(last.t));
        let _ = writeln!(out, "final_points = {}", last.points);
        let _ = writeln!(out, "F_initial = {}", f17(first.f));
        let _ = writeln!(out, "F_final = {}", f17(last.f));
    }
    let _ = writeln!(out, "max_A_ratio = {}", f17(rec.max_a_ratio()));
    let _ = writeln!(out, "mass_drift = {}", f17(rec.mass_drift()));
    let _ = writeln!(out, "energy_drift = {}", f17(rec.energy_drift()));
    if let Ok(v) = virial_consistency(rec) {
        let _ = writeln!(out, "virial_max_deviation = {}", f17(v.max_relative_deviation));
        let _ = writeln!(out, "virial_worst_time = {}", f17(v.at_time));
    }
}

fn gaussian_radial(grid: RadialGrid, c: f64, width: f64) -> Result<RadialField, Failure> {
    let g = RadialField::from_fn(grid, |r| (-0.5 * (r / width).powi(2)).exp());
    let d = g.mass();
    if !(d > 0.0) {
        return Err(Failure::Invalid("Gaussian is not resolved by the grid".into()));
    }
    Ok(g.scaled_by((c / d).sqrt()))
}

fn gaussian_box(grid: BoxGrid, c: f64, width: f64) -> Result<BoxField, Failure> {
    let g = BoxField::from_fn(grid, |x, y, z| {
        (-0.5 * (x * x + y * y + z * z) / (width * width)).exp().into()
    });
    let d = g.mass();
    if !(d > 0.0) {
        return Err(Failure::Invalid("Gaussian is not resolved by the grid".into()));
    }
    Ok(g.scaled_by((c / d).sqrt()))
}

fn cmd_evolve(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let recipe = s.choice("recipe", &["ground-state-rescaled", "gaussian", "plane-wave", "zero", "snapshot"])?;
    let boxed = s.choice("propagator", &["radial", "box"])? == "box";
    let c = s.f64("c")?;
    let width = s.f64("width")?;
    let lambda = s.f64("lambda")?;
    let box_grid = || -> Result<BoxGrid, Failure> { Ok(BoxGrid::new(s.usize("box-n")?, s.f64("box-l")?)?) };
    if boxed {
        let cfg = SimConfig::new(s.f64("dt")?, s.f64("t-end")?, cp, s.usize("cadence")?)?;
        cfg.steps()?;
        box_grid()?;
    } else {
        run_config(s, cp)?;
    }
    let (_, n, rmax) = solver(s)?;
    match recipe {
        "ground-state-rescaled" => {
            validate_problem(c, cp)?;
            if !(lambda > 0.0) {
                return Err(Failure::Invalid(format!("`lambda` must be positive, got {lambda}")));
            }
        }
        "gaussian" if !(c > 0.0 && width > 0.0) => {
            return Err(Failure::Invalid("Gaussian needs positive `c` and `width`".into()))
        }
        "plane-wave" if !boxed => return Err(Failure::Invalid("plane-wave data need `propagator = box`".into())),
        "snapshot" if s.str("snapshot").is_empty() => {
            return Err(Failure::Invalid("recipe = snapshot needs `snapshot`".into()))
        }
        _ => {}
    }
    let classify_datum = s.bool("classify")?;

    let mut gamma = None;
    let datum = match recipe {
        "ground-state-rescaled" => {
            let gs = solve(c, cp, s)?;
            if !gs.converged {
                return Err(Failure::Unconverged(format!("ground state did not converge (residual {:.3e})", gs.residual)));
            }
            gamma = Some(gs.gamma_c);
            let u = gs.field.scaled(lambda)?;
            if boxed {
                Datum::Box(BoxField::from_radial(box_grid()?, &u))
            } else {
                Datum::Radial(u)
            }
        }
        "gaussian" if boxed => Datum::Box(gaussian_box(box_grid()?, c, width)?),
        "gaussian" => Datum::Radial(gaussian_radial(RadialGrid::new(n, rmax)?, c, width)?),
        "plane-wave" => {
            let m = s.i64_list("mode")?;
            let mode: [i64; 3] = m.try_into().map_err(|_| Failure::Invalid("`mode` needs three integers".into()))?;
            Datum::Box(BoxField::plane_wave(box_grid()?, mode, s.f64("amplitude")?))
        }
        "zero" if boxed => Datum::Box(BoxField::zeros(box_grid()?)),
        "zero" => Datum::Radial(RadialField::zeros(RadialGrid::new(n, rmax)?)),
        _ => {
            let snap = load_snapshot(s.str("snapshot"))?;
            match (snap.field, boxed) {
                (SnapshotField::Radial(u), false) => Datum::Radial(u),
                (SnapshotField::Radial(u), true) => Datum::Box(BoxField::from_radial(box_grid()?, &u)),
                (SnapshotField::Box(u), true) => Datum::Box(u),
                (SnapshotField::Box(_), false) => {
                    return Err(Failure::Invalid("a box snapshot needs `propagator = box`".into()))
                }
            }
        }
    };

    let dir = prepare_out(s)?;
    let initial = datum.report(cp);
    let verdict = if !classify_datum {
        None
    } else if cp.beta == 0.0 || initial.d == 0.0 {
        Some("UNCLASSIFIED (no ground-state level for this datum)".to_string())
    } else {
        let g = match gamma {
            Some(g) => g,
            None => {
                let gs = solve(initial.d, cp, s)?;
                if !gs.converged {
                    return Err(Failure::Unconverged("ground state for the classification did not converge".into()));
                }
                gs.gamma_c
            }
        };
        gamma = Some(g);
        Some(classify(&initial, g).to_string())
    };
    let record = run_datum(&datum, s, cp, &dir, "")?;

    let mut text = String::new();
    let _ = writeln!(text, "recipe = {recipe}");
    let _ = writeln!(text, "propagator = {}", if boxed { "box" } else { "radial" });
    if let Some(v) = &verdict {
        let _ = writeln!(text, "classification = {v}");
    }
    if let Some(g) = gamma {
        let _ = writeln!(text, "gamma_c = {}", f17(g));
    }
    report_lines(&mut text, &initial);
    trajectory_lines(&mut text, &record);
    fs::write(dir.join("summary.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// instability-suite
// ---------------------------------------------------------------------------

fn cmd_instability_suite(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let c = s.f64("c")?;
    validate_problem(c, cp)?;
    let lambdas = s.f64_list("lambdas")?;
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Failure::Invalid("every λ must be positive".into()));
    }
    run_config(s, cp)?;
    solver(s)?;
    let dir = prepare_out(s)?;
    let gs = solve(c, cp, s)?;
    if !gs.converged {
        return Err(Failure::Unconverged(format!("ground state did not converge (residual {:.3e})", gs.residual)));
    }
    ground_state_snapshot(&gs).save(dir.join("ground_state.snap"))?;
    let mut csv = String::from("lambda,F,Q,classification,termination,detection_time,max_A_ratio,mass_drift\n");
    let mut violations = Vec::new();
    writeln!(stdout, "gamma_c = {}  lambda_c = {}", f17(gs.gamma_c), f17(gs.lambda_c))?;
    for &lambda in &lambdas {
        let u = gs.field.scaled(lambda)?;
        let r = u.energy_report(cp);
        let class = classify(&r, gs.gamma_c);
        let rec = run_datum(&Datum::Radial(u), s, cp, &dir, &format!("lambda_{lambda}_"))?;
        let row = format!(
            "{},{},{},{},{},{},{},{}",
            f17(lambda),
            f17(r.f),
            f17(r.q),
            class,
            rec.termination,
            rec.detection_time.map(f17).unwrap_or_default(),
            f17(rec.max_a_ratio()),
            f17(rec.mass_drift())
        );
        writeln!(stdout, "{row}")?;
        csv.push_str(&row);
        csv.push('\n');
        if lambda != 1.0 {
            let expected = if lambda < 1.0 { r.q > 0.0 } else { r.q < 0.0 };
            if !expected {
                violations.push(format!("Q(u^λ) has the wrong sign at λ = {lambda}"));
            }
            if !(r.f < gs.gamma_c) {
                violations.push(format!("F(u^λ) >= F(u_c) at λ = {lambda}"));
            }
            let expected_class =
                if lambda < 1.0 { Classification::GlobalCertified } else { Classification::BlowupCandidate };
            if class != expected_class {
                violations.push(format!("λ = {lambda} classified {class}"));
            }
        }
    }
    fs::write(dir.join("instability.csv"), &csv)?;
    let mut text = String::new();
    let _ = writeln!(text, "gamma_c = {}", f17(gs.gamma_c));
    let _ = writeln!(text, "lambda_c = {}", f17(gs.lambda_c));
    let _ = writeln!(text, "sign_structure = {}", if violations.is_empty() { "OK" } else { "VIOLATED" });
    for v in &violations {
        let _ = writeln!(text, "violation: {v}");
    }
    fs::write(dir.join("report.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_UNCONVERGED })
}

// ---------------------------------------------------------------------------
// decay-fit
// ---------------------------------------------------------------------------

fn cmd_decay_fit(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let (hi, lo) = (s.f64("hi-frac")?, s.f64("lo-frac")?);
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Failure::Invalid(format!("need 0 < lo-frac < hi-frac < 1, got {lo}, {hi}")));
    }
    let (u, lambda) = match s.str("snapshot") {
        "" => {
            let c = s.f64("c")?;
            validate_problem(c, cp)?;
            solver(s)?;
            let gs = solve(c, cp, s)?;
            if !gs.converged {
                return Err(Failure::Unconverged(format!("ground state did not converge (residual {:.3e})", gs.residual)));
            }
            (gs.field, gs.lambda_c)
        }
        path => {
            let snap = load_snapshot(path)?;
            let lambda = snap.meta("lambda_c").and_then(|v| v.parse::<f64>().ok());
            let u = match snap.field {
                SnapshotField::Radial(u) => u,
                SnapshotField::Box(_) => return Err(Failure::Invalid("decay fits need a radial snapshot".into())),
            };
            let lambda = match lambda {
                Some(l) => l,
                None => lambda_estimate(&u, cp)?,
            };
            (u, lambda)
        }
    };
    let dir = prepare_out(s)?;
    let window = tail_window(&u, lo, hi)?;
    let fit = decay_fit(&u, window)?;
    let expected = (-lambda).max(0.0).sqrt();
    let mut text = String::new();
    let _ = writeln!(text, "kappa = {}", f17(fit.kappa));
    let _ = writeln!(text, "sqrt_minus_lambda = {}", f17(expected));
    let _ = writeln!(text, "relative_error = {}", f17((fit.kappa - expected).abs() / expected));
    let _ = writeln!(text, "prefactor = {}", f17(fit.prefactor));
    let _ = writeln!(text, "r_squared = {}", f17(fit.r_squared));
    let _ = writeln!(text, "window = {} {}", f17(window.0), f17(window.1));
    fs::write(dir.join("decay_fit.txt"), &text)?;
    let mut csv = String::from("r,abs_u,log_r_abs_u\n");
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        if *r >= window.0 && *r <= window.1 {
            let _ = writeln!(csv, "{},{},{}", f17(*r), f17(v.norm()), f17((r * v.norm()).ln()));
        }
    }
    fs::write(dir.join("tail.csv"), csv)?;
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// fiber-scan
// ---------------------------------------------------------------------------

fn cmd_fiber_scan(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let cp = couplings(s)?;
    let count = s.usize("count")?;
    let spread = s.f64("spread")?;
    let u = match s.str("snapshot") {
        "" => {
            let (c, width) = (s.f64("c")?, s.f64("width")?);
            if !(c > 0.0 && width > 0.0) {
                return Err(Failure::Invalid("Gaussian needs positive `c` and `width`".into()));
            }
            gaussian_radial(RadialGrid::new(s.usize("n")?, s.f64("rmax")?)?, c, width)?
        }
        path => load_radial(path)?,
    };
    let report = u.energy_report(cp);
    let scan = FiberScan::around_maximum(&report, count, spread)?;
    let dir = prepare_out(s)?;
    write_file(&dir.join("fiber_scan.csv"), |b| scan.write_csv(b))?;
    let mut text = String::new();
    let _ = writeln!(text, "t_star = {}", f17(scan.t_star));
    let _ = writeln!(text, "max_F = {}", f17(scan.max_energy()));
    report_lines(&mut text, &report);
    fs::write(dir.join("summary.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct Tally {
    text: String,
    failures: usize,
}

impl Tally {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        let _ = writeln!(self.text, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn cmd_check(s: &Settings, stdout: &mut dyn Write) -> Outcome {
    let fields = s.usize("fields")?;
    let fiber_fields = s.usize("fiber-fields")?;
    let seed = s.u64("seed")?;
    let grid = RadialGrid::new(s.usize("n")?, s.f64("rmax")?)?;
    let dir = prepare_out(s)?;
    let mut tally = Tally { text: String::new(), failures: 0 };

    let ps = [3.5, 4.0, 5.0];
    let (mut worst, mut sign_breaks) = (0.0_f64, 0);
    for i in 0..fields {
        let class = ProfileClass::ALL[i % 3];
        let u = random_field(&grid, seed.wrapping_add(i as u64), class);
        let r = u.energy_report(Couplings::sps(ps[i % ps.len()]));
        let scale = r.identity_lhs().abs().max(r.identity_rhs().abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((r.identity_lhs() - r.identity_rhs()).abs() / scale);
        if r.f < 0.0 && !(r.q < 0.0) {
            sign_breaks += 1;
        }
    }
    tally.record("identity", worst <= 1e-12, format!("worst relative deviation {worst:.3e} over {fields} fields"));
    tally.record("F<0 implies Q<0", sign_breaks == 0, format!("{sign_breaks} exceptions"));

    let g = RadialField::gaussian(grid.clone());
    let k = g.components(4.0);
    let w0 = radial_potential_at_origin(&grid, &g.density());
    let pi = std::f64::consts::PI;
    for (name, got, want) in [
        ("gaussian A", k.a, 1.5),
        ("gaussian B", k.b, (2.0 / pi).sqrt()),
        ("gaussian C", k.c, -(2.0 * pi).powf(-1.5)),
        ("gaussian D", k.d, 1.0),
        ("gaussian W(0)", w0, 2.0 / pi.sqrt()),
    ] {
        tally.record(name, (got - want).abs() <= 1e-6, format!("{got:.12} vs {want:.12}"));
    }

    let (mut root, mut pattern, mut peak, mut deriv) = (0.0_f64, 0, 0, 0.0_f64);
    for i in 0..fiber_fields {
        let p = ps[i % ps.len()];
        let u = random_field(&grid, seed.wrapping_add(1_000_000 + i as u64), ProfileClass::ALL[i % 3]);
        let k = u.energy_report(Couplings::sps(p)).effective();
        let Ok(ts) = t_star(k.a, k.b, k.c, p) else {
            pattern += 1;
            continue;
        };
        let fib = |t: f64| fiber_energy(k.a, k.b, k.c, p, t);
        let scale = ts * ts * k.a + ts * k.b + ts.powf(1.5 * (p - 2.0)) * k.c.abs();
        root = root.max(fib(ts).1.abs() / scale);
        let (f_star, _) = fib(ts);
        for m in [0.25, 0.5, 2.0, 4.0] {
            let (f, q) = fib(m * ts);
            if (m < 1.0) != (q > 0.0) {
                pattern += 1;
            }
            if !(f < f_star) {
                peak += 1;
            }
        }
        for m in [0.5, 2.0] {
            let t = m * ts;
            let h = 1e-4 * t;
            let fd = (fib(t + h).0 - fib(t - h).0) / (2.0 * h);
            let want = fib(t).1 / t;
            deriv = deriv.max((fd - want).abs() / want.abs());
        }
    }
    tally.record("t* root", root <= 1e-12, format!("worst |Q(u^t*)|/scale {root:.3e}"));
    tally.record("Q sign pattern", pattern == 0, format!("{pattern} exceptions"));
    tally.record("t* maximizes F", peak == 0, format!("{peak} exceptions"));
    tally.record("dF/dt = Q/t", deriv <= 1e-6, format!("worst relative deviation {deriv:.3e}"));

    fs::write(dir.join("check.txt"), &tally.text)?;
    stdout.write_all(tally.text.as_bytes())?;
    Ok(if tally.failures == 0 { EXIT_OK } else { EXIT_UNCONVERGED })
}
