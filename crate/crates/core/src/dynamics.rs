//! Time integration of `i∂_t u = -Δu + αW_u u - β|u|^{p-2}u` by Strang
//! splitting (kinetic half step, exact potential phase, kinetic half step).
//!
//! Two propagators share one run loop: the periodic box, and a radial
//! sine-series propagator on `[0, r_max]` with a Dirichlet wall. The radial
//! one can refine its grid and shrink its step as the solution concentrates,
//! which is what lets a collapsing ground state be followed over three
//! decades of kinetic energy.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{with_sine, Fft3};
use crate::field::{
    sine_coefficients, sine_symbol, spectral_kinetic, BoxField, Components, Couplings, EnergyReport,
    RadialField,
};
use crate::grid::{BoxGrid, RadialGrid};
use crate::hartree::{self, BoxHartree};

/// Fraction of the Nyquist wavenumber above which spectral content counts as
/// tail.
pub const TAIL_CUTOFF: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// Blow-up is declared once `A(t)/A(0)` exceeds this.
    pub a_ratio_max: f64,
    /// Largest spectral tail fraction that still counts as resolved.
    pub spectral_tail_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { a_ratio_max: 1e3, spectral_tail_max: 1e-6 }
    }
}

/// Fixed-step run parameters. `t_end / dt` must be a whole number of steps
/// and `cadence` (steps between diagnostics) must divide it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub couplings: Couplings,
    pub cadence: usize,
    pub thresholds: Thresholds,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, couplings: Couplings, cadence: usize) -> Result<Self> {
        let cfg = Self { dt, t_end, couplings, cadence, thresholds: Thresholds::default() };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Total step count, validating the configuration.
    pub fn steps(&self) -> Result<usize> {
        Couplings::new(self.couplings.alpha, self.couplings.beta, self.couplings.p)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        let exact = self.t_end / self.dt;
        let steps = exact.round();
        if (exact - steps).abs() > 1e-6 * exact.max(1.0) || steps < 1.0 {
            return Err(invalid(format!("t_end = {} is not a whole number of steps of {}", self.t_end, self.dt)));
        }
        let steps = steps as usize;
        if self.cadence == 0 || steps % self.cadence != 0 {
            return Err(invalid(format!("cadence {} does not divide {steps} steps", self.cadence)));
        }
        check_thresholds(&self.thresholds)?;
        Ok(steps)
    }
}

fn check_thresholds(t: &Thresholds) -> Result<()> {
    if !(t.a_ratio_max > 1.0 && t.spectral_tail_max > 0.0) {
        return Err(invalid("blow-up thresholds need a_ratio_max > 1 and spectral_tail_max > 0"));
    }
    Ok(())
}

/// Run parameters for the radial propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSimConfig {
    /// Initial (and largest) step.
    pub dt: f64,
    pub t_end: f64,
    pub couplings: Couplings,
    pub cadence: usize,
    pub thresholds: Thresholds,
    /// Shrink the step as `dt · ω(0)/ω(t)` when the peak potential
    /// `ω = max|αW - β|u|^{p-2}|` grows.
    pub adaptive: bool,
    /// Double the grid when the tail fraction exceeds this, up to
    /// `max_points`.
    pub refine_tail: f64,
    /// Halve the grid, down to `min_points`, when the upper third of the
    /// spectrum carries less than `refine_tail · 1e-4` of the mass.
    pub coarsen: bool,
    pub min_points: usize,
    pub max_points: usize,
    /// Steps are modulated as `dt (1 + jitter ξ_j)` with `ξ_j ∈ [-1, 1]`
    /// a golden-ratio sequence.
    pub jitter: f64,
}

impl RadialSimConfig {
    pub fn new(dt: f64, t_end: f64, couplings: Couplings, cadence: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            couplings,
            cadence,
            thresholds: Thresholds::default(),
            adaptive: true,
            refine_tail: 1e-10,
            coarsen: false,
            min_points: 256,
            max_points: 1 << 18,
            jitter: 0.25,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Couplings::new(self.couplings.alpha, self.couplings.beta, self.couplings.p)?;
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("dt and t_end must be positive"));
        }
        if self.cadence == 0 {
            return Err(invalid("cadence must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(invalid("jitter must lie in [0, 1)"));
        }
        if !(self.refine_tail > 0.0) {
            return Err(invalid("refine_tail must be positive"));
        }
        if self.min_points < RadialGrid::MIN_POINTS || self.min_points > self.max_points {
            return Err(invalid("need MIN_POINTS <= min_points <= max_points"));
        }
        check_thresholds(&self.thresholds)
    }
}

/// Diagnostics at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub f: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
    /// `∫|x|²|u|²`.
    pub virial: f64,
    pub tail_fraction: f64,
    /// Grid points per axis (box) or radial nodes.
    pub points: usize,
}

impl Sample {
    fn from_report(t: f64, report: &EnergyReport, virial: f64, tail_fraction: f64, points: usize) -> Self {
        Self {
            t,
            mass: report.d,
            f: report.f,
            a: report.a,
            b: report.b,
            c: report.c,
            q: report.q,
            virial,
            tail_fraction,
            points,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    BlowupDetected,
    UnderResolved,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "COMPLETED",
            Termination::BlowupDetected => "BLOWUP_DETECTED",
            Termination::UnderResolved => "UNDER_RESOLVED",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    None,
    BlowupDetected,
    UnderResolved,
}

/// Checks one sample against the thresholds, given `A(0)`. An unresolved
/// tail takes precedence over kinetic growth.
pub fn detect_blowup(a0: f64, sample: &Sample, thresholds: &Thresholds) -> Detection {
    if sample.tail_fraction > thresholds.spectral_tail_max {
        Detection::UnderResolved
    } else if a0 > 0.0 && sample.a / a0 > thresholds.a_ratio_max {
        Detection::BlowupDetected
    } else {
        Detection::None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub couplings: Couplings,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    /// Time of the sample that fired a detector.
    pub detection_time: Option<f64>,
    pub steps: usize,
    pub refinements: usize,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn max_a_ratio(&self) -> f64 {
        let a0 = self.samples.first().map_or(0.0, |s| s.a);
        if a0 <= 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| s.a / a0).fold(0.0, f64::max)
    }

    /// `max |D(t) - D(0)| / D(0)`.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        if first.mass == 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| (s.mass - first.mass).abs()).fold(0.0, f64::max) / first.mass
    }

    /// `max |F(t) - F(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        self.samples.iter().map(|s| (s.f - first.f).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,mass,F,A,Q,virial,tail_fraction")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.mass, s.f, s.a, s.q, s.virial, s.tail_fraction
            )?;
        }
        Ok(())
    }
}

/// Largest deviation between the centred second difference of `V(t)` and
/// `8Q(t)`, relative to `8(A + αB/4 + κβ|C|)`, over interior samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirialReport {
    pub max_relative_deviation: f64,
    pub at_time: f64,
    pub compared: usize,
}

pub fn virial_consistency(traj: &TrajectoryRecord) -> Result<VirialReport> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: s.len() });
    }
    let cp = traj.couplings;
    let kappa = cp.q_power_coefficient();
    let mut worst = VirialReport { max_relative_deviation: 0.0, at_time: s[1].t, compared: 0 };
    for w in s.windows(3) {
        let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
        if !(h1 > 0.0 && h2 > 0.0) {
            continue;
        }
        let second = 2.0 * (h1 * w[2].virial - (h1 + h2) * w[1].virial + h2 * w[0].virial)
            / (h1 * h2 * (h1 + h2));
        let scale = 8.0 * (w[1].a + cp.alpha * w[1].b / 4.0 + kappa * cp.beta * w[1].c.abs());
        let dev = if scale > 0.0 { (second - 8.0 * w[1].q).abs() / scale } else { second.abs() };
        worst.compared += 1;
        if dev >= worst.max_relative_deviation {
            worst.max_relative_deviation = dev;
            worst.at_time = w[1].t;
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Shared Strang loop
// ---------------------------------------------------------------------------

trait Propagator {
    fn kinetic(&mut self, tau: f64);
    fn potential(&mut self, tau: f64) -> Result<()>;
    fn sample(&mut self, t: f64) -> Result<Sample>;
}

/// `steps` Strang steps of size `dt` with the inner kinetic halves fused.
fn advance<P: Propagator>(prop: &mut P, dt: f64, steps: usize) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    prop.kinetic(0.5 * dt);
    for s in 0..steps {
        prop.potential(dt)?;
        prop.kinetic(if s + 1 == steps { 0.5 * dt } else { dt });
    }
    Ok(())
}

fn phase_table(symbol: &[f64], tau: f64) -> Vec<Complex64> {
    symbol.iter().map(|k2| Complex64::from_polar(1.0, -k2 * tau)).collect()
}

fn cached_phase<'a>(cache: &'a mut HashMap<u64, Vec<Complex64>>, symbol: &[f64], tau: f64) -> &'a [Complex64] {
    if cache.len() > 8 && !cache.contains_key(&tau.to_bits()) {
        cache.clear();
    }
    cache.entry(tau.to_bits()).or_insert_with(|| phase_table(symbol, tau))
}

/// Applies `u ← u e^{-iVτ}` and returns `max|V|`.
fn potential_phase(tau: f64, couplings: Couplings, w: &[f64], values: &mut [Complex64]) -> Result<f64> {
    let p = couplings.p;
    let mut peak: f64 = 0.0;
    for (u, wj) in values.iter_mut().zip(w) {
        let amp = u.norm();
        let v = couplings.alpha * wj - couplings.beta * amp.powf(p - 2.0);
        peak = peak.max(v.abs());
        *u *= Complex64::from_polar(1.0, -v * tau);
        if !(u.re.is_finite() && u.im.is_finite()) {
            return Err(Error::NonFinite("field after potential substep".into()));
        }
    }
    Ok(peak)
}

// ---------------------------------------------------------------------------
// Box propagator
// ---------------------------------------------------------------------------

/// Strang propagator on the periodic box.
pub struct BoxPropagator {
    grid: BoxGrid,
    couplings: Couplings,
    values: Vec<Complex64>,
    fft: Fft3,
    hartree: BoxHartree,
    k2: Vec<f64>,
    r2: Vec<f64>,
    phases: HashMap<u64, Vec<Complex64>>,
}

impl BoxPropagator {
    pub fn new(u0: &BoxField, couplings: Couplings) -> Self {
        let grid = *u0.grid();
        Self {
            grid,
            couplings,
            values: u0.values().to_vec(),
            fft: Fft3::new(grid.n()),
            hartree: BoxHartree::new(grid),
            k2: grid.k_squared(),
            r2: grid.r_squared(),
            phases: HashMap::new(),
        }
    }

    pub fn field(&self) -> BoxField {
        BoxField::new(self.grid, self.values.clone()).expect("propagator state is finite")
    }

    /// One full Strang step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        advance(self, dt, 1)
    }
}

impl Propagator for BoxPropagator {
    fn kinetic(&mut self, tau: f64) {
        let n3 = self.grid.total() as f64;
        self.fft.forward(&mut self.values);
        let phase = cached_phase(&mut self.phases, &self.k2, tau);
        for (u, ph) in self.values.iter_mut().zip(phase) {
            *u *= ph / n3;
        }
        self.fft.inverse(&mut self.values);
    }

    fn potential(&mut self, tau: f64) -> Result<()> {
        let w = if self.couplings.alpha != 0.0 {
            let rho: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
            self.hartree.potential(&rho)
        } else {
            vec![0.0; self.values.len()]
        };
        potential_phase(tau, self.couplings, &w, &mut self.values).map(|_| ())
    }

    fn sample(&mut self, t: f64) -> Result<Sample> {
        let grid = self.grid;
        let dv = grid.cell_volume();
        let rho: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let b = if self.couplings.alpha != 0.0 { self.hartree.energy(&rho) } else { 0.0 };
        let mut hat = self.values.clone();
        self.fft.forward(&mut hat);
        let a = spectral_kinetic(&grid, &hat);
        let cut = (TAIL_CUTOFF * std::f64::consts::PI / grid.spacing()).powi(2);
        let (mut tail, mut total) = (0.0, 0.0);
        for (v, k2) in hat.iter().zip(&self.k2) {
            let e = v.norm_sqr();
            total += e;
            if *k2 > cut {
                tail += e;
            }
        }
        let c = -dv * self.values.iter().map(|v| v.norm().powf(self.couplings.p)).sum::<f64>();
        let mass = dv * rho.iter().sum::<f64>();
        let virial = dv * rho.iter().zip(&self.r2).map(|(r, x2)| r * x2).sum::<f64>();
        if !(a.is_finite() && b.is_finite() && c.is_finite() && mass.is_finite()) {
            return Err(Error::NonFinite(format!("diagnostics at t = {t}")));
        }
        let report = EnergyReport::from_components(
            Components { a, b, c, d: mass },
            self.couplings,
        );
        let frac = if total > 0.0 { tail / total } else { 0.0 };
        Ok(Sample::from_report(t, &report, virial, frac, grid.n()))
    }
}

/// One Strang step of size `dt` on the box.
pub fn strang_step(u: &BoxField, dt: f64, couplings: Couplings) -> Result<BoxField> {
    let mut prop = BoxPropagator::new(u, couplings);
    prop.step(dt)?;
    Ok(prop.field())
}

/// Runs the box propagator from `u0`, sampling diagnostics every
/// `cfg.cadence` steps and stopping early if a detector fires.
pub fn evolve(u0: &BoxField, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    evolve_observed(u0, cfg, |_, _| {})
}

/// As [`evolve`], calling `observer(sample_index, state)` at every sample.
pub fn evolve_observed(
    u0: &BoxField,
    cfg: &SimConfig,
    mut observer: impl FnMut(usize, &BoxField),
) -> Result<TrajectoryRecord> {
    let steps = cfg.steps()?;
    let mut prop = BoxPropagator::new(u0, cfg.couplings);
    let mut record = TrajectoryRecord {
        couplings: cfg.couplings,
        samples: Vec::new(),
        termination: Termination::Completed,
        detection_time: None,
        steps: 0,
        refinements: 0,
    };
    let first = prop.sample(0.0)?;
    let a0 = first.a;
    record.samples.push(first);
    observer(0, &prop.field());
    for block in 1..=steps / cfg.cadence {
        advance(&mut prop, cfg.dt, cfg.cadence)?;
        record.steps += cfg.cadence;
        let s = prop.sample(record.steps as f64 * cfg.dt)?;
        record.samples.push(s);
        observer(block, &prop.field());
        match detect_blowup(a0, &s, &cfg.thresholds) {
            Detection::None => {}
            Detection::BlowupDetected => {
                record.termination = Termination::BlowupDetected;
                record.detection_time = Some(s.t);
                break;
            }
            Detection::UnderResolved => {
                record.termination = Termination::UnderResolved;
                record.detection_time = Some(s.t);
                break;
            }
        }
    }
    Ok(record)
}

// ---------------------------------------------------------------------------
// Radial propagator
// ---------------------------------------------------------------------------

/// With adaptive stepping, a diagnostics block ends early once the peak
/// potential has grown by this factor.
const BLOCK_GROWTH: f64 = 1.25;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Strang propagator for radial data, diagonal in the sine basis of `r u`.
pub struct RadialPropagator {
    grid: RadialGrid,
    couplings: Couplings,
    values: Vec<Complex64>,
    symbol: Vec<f64>,
    phases: HashMap<u64, Vec<Complex64>>,
    peak_potential: f64,
}

impl RadialPropagator {
    pub fn new(u0: &RadialField, couplings: Couplings) -> Self {
        let grid = u0.grid().clone();
        Self {
            symbol: sine_symbol(&grid),
            grid,
            couplings,
            values: u0.values().to_vec(),
            phases: HashMap::new(),
            peak_potential: 0.0,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn field(&self) -> RadialField {
        RadialField::new(self.grid.clone(), self.values.clone()).expect("propagator state is finite")
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        advance(self, dt, 1)
    }

    fn coefficients(&self) -> Vec<Complex64> {
        sine_coefficients(&self.grid, &self.values)
    }

    fn set_from_coefficients(&mut self, mut s: Vec<Complex64>) {
        let n = self.grid.len();
        with_sine(n, |t| t.invert(&mut s));
        for (u, (v, r)) in self.values.iter_mut().zip(s.iter().zip(self.grid.nodes())) {
            *u = v / r;
        }
        self.values[n - 1] = Complex64::default();
    }

    /// Doubles the number of intervals on the same `[0, r_max]`, keeping the
    /// sine series of `r u` unchanged.
    pub fn refine(&mut self) -> Result<()> {
        let n = self.grid.len();
        let s = self.coefficients();
        let fine = RadialGrid::new(2 * n, self.grid.r_max())?;
        let mut padded = vec![Complex64::default(); 2 * n - 1];
        for (dst, src) in padded.iter_mut().zip(&s) {
            *dst = src * 2.0;
        }
        self.symbol = sine_symbol(&fine);
        self.grid = fine;
        self.values = vec![Complex64::default(); 2 * n];
        self.phases.clear();
        self.set_from_coefficients(padded);
        Ok(())
    }

    /// Halves the number of intervals, dropping the upper half of the sine
    /// spectrum.
    pub fn coarsen(&mut self) -> Result<()> {
        let n = self.grid.len();
        if n % 2 != 0 || n / 2 < RadialGrid::MIN_POINTS {
            return Err(invalid(format!("cannot halve a radial grid of {n} intervals")));
        }
        let s = self.coefficients();
        let coarse = RadialGrid::new(n / 2, self.grid.r_max())?;
        let kept: Vec<Complex64> = s[..n / 2 - 1].iter().map(|v| v * 0.5).collect();
        self.symbol = sine_symbol(&coarse);
        self.grid = coarse;
        self.values = vec![Complex64::default(); n / 2];
        self.phases.clear();
        self.set_from_coefficients(kept);
        Ok(())
    }

    /// Share of `Σ|S_k|²` in modes `k ≥ frac · n`.
    fn spectral_fraction(&self, frac: f64) -> f64 {
        let s = self.coefficients();
        let cut = ((frac * self.grid.len() as f64) as usize).saturating_sub(1).min(s.len());
        let total: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        let tail: f64 = s[cut..].iter().map(|v| v.norm_sqr()).sum();
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    fn tail_fraction(&self) -> f64 {
        self.spectral_fraction(TAIL_CUTOFF)
    }

    /// `max|αW - β|u|^{p-2}|` seen by the last potential substep.
    fn peak_potential(&mut self) -> f64 {
        if self.peak_potential == 0.0 {
            let mut probe = self.values.clone();
            let rho: Vec<f64> = probe.iter().map(|v| v.norm_sqr()).collect();
            let w = if self.couplings.alpha != 0.0 {
                hartree::radial_potential(&self.grid, &rho)
            } else {
                vec![0.0; rho.len()]
            };
            self.peak_potential = potential_phase(0.0, self.couplings, &w, &mut probe).unwrap_or(0.0);
        }
        self.peak_potential
    }
}

impl Propagator for RadialPropagator {
    fn kinetic(&mut self, tau: f64) {
        let mut s = self.coefficients();
        let phase = cached_phase(&mut self.phases, &self.symbol, tau);
        for (v, ph) in s.iter_mut().zip(phase) {
            *v *= ph;
        }
        self.set_from_coefficients(s);
    }

    fn potential(&mut self, tau: f64) -> Result<()> {
        let w = if self.couplings.alpha != 0.0 {
            let rho: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
            hartree::radial_potential(&self.grid, &rho)
        } else {
            vec![0.0; self.values.len()]
        };
        self.peak_potential = potential_phase(tau, self.couplings, &w, &mut self.values)?;
        Ok(())
    }

    fn sample(&mut self, t: f64) -> Result<Sample> {
        let field = RadialField::new(self.grid.clone(), self.values.clone())?;
        let report = field.energy_report(self.couplings);
        if !(report.f.is_finite() && report.a.is_finite()) {
            return Err(Error::NonFinite(format!("diagnostics at t = {t}")));
        }
        let rho = field.density();
        let r2rho: Vec<f64> = rho.iter().zip(self.grid.nodes()).map(|(x, r)| x * r * r).collect();
        let virial = crate::field::radial_integral(&self.grid, &r2rho);
        Ok(Sample::from_report(t, &report, virial, self.tail_fraction(), self.grid.len()))
    }
}

/// Runs the radial propagator. With `cfg.adaptive` each step is
/// `cfg.dt · min(1, ω(0)/ω)` (symmetric variable-step Strang); at each
/// sample the grid is refined while the tail exceeds `cfg.refine_tail` and
/// optionally coarsened while the tail is negligible.
pub fn evolve_radial(u0: &RadialField, cfg: &RadialSimConfig) -> Result<TrajectoryRecord> {
    evolve_radial_observed(u0, cfg, |_, _| {})
}

pub fn evolve_radial_observed(
    u0: &RadialField,
    cfg: &RadialSimConfig,
    mut observer: impl FnMut(usize, &RadialField),
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut prop = RadialPropagator::new(u0, cfg.couplings);
    let mut record = TrajectoryRecord {
        couplings: cfg.couplings,
        samples: Vec::new(),
        termination: Termination::Completed,
        detection_time: None,
        steps: 0,
        refinements: 0,
    };
    let first = prop.sample(0.0)?;
    let a0 = first.a;
    record.samples.push(first);
    observer(0, &prop.field());
    let omega0 = prop.peak_potential();
    let mut counter = 0u64;
    let mut step_size = |prop: &mut RadialPropagator| {
        counter += 1;
        let xi = 2.0 * (counter as f64 * GOLDEN).fract() - 1.0;
        let base = if cfg.adaptive && omega0 > 0.0 {
            cfg.dt * (omega0 / prop.peak_potential()).min(1.0)
        } else {
            cfg.dt
        };
        base * (1.0 + cfg.jitter * xi)
    };
    let mut t = 0.0;
    let mut index = 0;
    while t < cfg.t_end * (1.0 - 1e-12) {
        let omega_start = prop.peak_potential();
        let mut h = step_size(&mut prop).min(cfg.t_end - t);
        prop.kinetic(0.5 * h);
        let mut taken = 0;
        loop {
            prop.potential(h)?;
            t += h;
            taken += 1;
            let remaining = cfg.t_end - t;
            let surging = cfg.adaptive && prop.peak_potential() > BLOCK_GROWTH * omega_start;
            let next = if taken == cfg.cadence || surging || remaining <= 1e-12 * cfg.t_end {
                0.0
            } else {
                step_size(&mut prop).min(remaining)
            };
            prop.kinetic(0.5 * (h + next));
            if next == 0.0 {
                break;
            }
            h = next;
        }
        if cfg.t_end - t <= 1e-12 * cfg.t_end {
            t = cfg.t_end;
        }
        record.steps += taken;
        let mut s = prop.sample(t)?;
        let unrefined_tail = s.tail_fraction;
        while s.tail_fraction > cfg.refine_tail && 2 * prop.grid().len() <= cfg.max_points {
            prop.refine()?;
            record.refinements += 1;
            s = prop.sample(t)?;
        }
        if cfg.coarsen {
            let mut halved = false;
            while prop.grid().len() / 2 >= cfg.min_points
                && prop.spectral_fraction(TAIL_CUTOFF / 2.0) < 1e-4 * cfg.refine_tail
            {
                prop.coarsen()?;
                halved = true;
            }
            if halved {
                s = prop.sample(t)?;
            }
        }
        record.samples.push(s);
        index += 1;
        observer(index, &prop.field());
        let checked = Sample { tail_fraction: unrefined_tail.max(s.tail_fraction), ..s };
        match detect_blowup(a0, &checked, &cfg.thresholds) {
            Detection::None => {}
            Detection::BlowupDetected => {
                record.termination = Termination::BlowupDetected;
                record.detection_time = Some(t);
                break;
            }
            Detection::UnderResolved => {
                record.termination = Termination::UnderResolved;
                record.detection_time = Some(t);
                break;
            }
        }
    }
    Ok(record)
}
