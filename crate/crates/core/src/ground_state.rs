//! Ground states on the mass sphere: minimisers of `F` over
//! `{D = c, Q = 0}`, their multiplier `λ_c`, the level curve `c ↦ γ(c)`, and
//! diagnostics (stationarity residual, Pohozaev relations, tail decay).
//!
//! The solver works with a real, positive radial profile. Each iteration takes
//! a Sobolev-preconditioned step along the constrained gradient
//! `F'(u) - λ̂ u`, restores the mass, and dilates back onto `Q = 0`. Since the
//! radial grid co-moves with the dilation, the last two operations are exact
//! and a fixed point satisfies the discrete Euler–Lagrange equation.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::fibering::{fiber_energy, t_star};
use num_complex::Complex64;

use crate::fft::with_sine;
use crate::field::{
    radial_integral, radial_neg_laplacian, sine_coefficients,
    sine_symbol, Couplings, EnergyReport, RadialField,
};
use crate::grid::RadialGrid;
use crate::hartree;

/// Diagonal shift `s` of the preconditioner `(-Δ + s)^{-1}` used for the
/// descent direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shift {
    /// `s = 1`.
    Unit,
    /// `s = max(1, -λ̂)`, which matches the preconditioner to the linear part
    /// of the Hessian `-Δ - λ̂`.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Target for [`el_residual`]'s norm.
    pub tol: f64,
    pub max_iter: usize,
    pub shift: Shift,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 20_000, shift: Shift::Adaptive }
    }
}

/// Largest descent step. The preconditioned Hessian has eigenvalues near 1
/// at high wavenumbers, so steps beyond 2 amplify them.
const MAX_STEP: f64 = 1.5;

/// Default starting grid: `n = 4096`, `r_max = 40`.
pub const DEFAULT_POINTS: usize = 4096;
pub const DEFAULT_RMAX: f64 = 40.0;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundState {
    pub c: f64,
    pub couplings: Couplings,
    pub field: RadialField,
    pub lambda_c: f64,
    /// `F(field)`.
    pub gamma_c: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GroundState {
    pub fn p(&self) -> f64 {
        self.couplings.p
    }

    pub fn report(&self) -> EnergyReport {
        self.field.energy_report(self.couplings)
    }
}

/// `(A + αB + βC) / D`.
pub fn lambda_estimate(u: &RadialField, couplings: Couplings) -> Result<f64> {
    u.energy_report(couplings).lambda_hat.ok_or(Error::ZeroMass)
}

/// `F'(u) = -Δu + αWu - β|u|^{p-2}u` for a real profile.
fn gradient(u: &RadialField, couplings: Couplings) -> Vec<f64> {
    let grid = u.grid();
    let re = u.real_values();
    let lap = radial_neg_laplacian(grid, &re);
    let rho = u.density();
    let w = if couplings.alpha != 0.0 {
        hartree::radial_potential(grid, &rho)
    } else {
        vec![0.0; re.len()]
    };
    let p = couplings.p;
    let mut g: Vec<f64> = (0..re.len())
        .map(|j| {
            let x = re[j];
            lap[j] + couplings.alpha * w[j] * x - couplings.beta * x.abs().powf(p - 2.0) * x
        })
        .collect();
    *g.last_mut().unwrap() = 0.0;
    g
}

/// `-Δu - λu + αW_u u - β|u|^{p-2}u` on the grid (real part of `u`), and its
/// norm `‖(-Δ + 1)^{-1} R‖` in the mass-weighted `L²` inner product.
pub fn el_residual(u: &RadialField, lambda: f64, couplings: Couplings) -> (Vec<f64>, f64) {
    let r = residual_vector(u, lambda, couplings);
    let z = Preconditioner::new(u.grid(), 1.0).apply(&r);
    let norm = mass_norm(u.grid(), &z);
    (r, norm)
}

fn residual_vector(u: &RadialField, lambda: f64, couplings: Couplings) -> Vec<f64> {
    let re = u.real_values();
    let mut r = gradient(u, couplings);
    for (rj, x) in r.iter_mut().zip(&re) {
        *rj -= lambda * x;
    }
    *r.last_mut().unwrap() = 0.0;
    r
}

fn mass_inner(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    radial_integral(grid, &prod)
}

fn mass_norm(grid: &RadialGrid, a: &[f64]) -> f64 {
    mass_inner(grid, a, a).max(0.0).sqrt()
}

/// `(-Δ_h + s)^{-1}` applied in the sine basis of `r z`.
struct Preconditioner {
    grid: RadialGrid,
    inv_symbol: Vec<f64>,
}

impl Preconditioner {
    fn new(grid: &RadialGrid, shift: f64) -> Self {
        let inv_symbol = sine_symbol(grid).into_iter().map(|k2| 1.0 / (k2 + shift)).collect();
        Self { grid: grid.clone(), inv_symbol }
    }

    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let cf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut y = sine_coefficients(&self.grid, &cf);
        for (v, w) in y.iter_mut().zip(&self.inv_symbol) {
            *v *= *w;
        }
        with_sine(self.grid.len(), |t| t.invert(&mut y));
        let mut z: Vec<f64> = y.iter().zip(self.grid.nodes()).map(|(v, r)| v.re / r).collect();
        z.push(0.0);
        z
    }
}

/// Checks the preconditions of a ground-state solve at mass `c`.
pub fn validate_problem(c: f64, couplings: Couplings) -> Result<()> {
    Couplings::new(couplings.alpha, couplings.beta, couplings.p)?;
    if couplings.beta == 0.0 {
        return Err(invalid("ground states need the power nonlinearity (beta = 1)"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid(format!("mass c must be positive and finite, got {c}")));
    }
    Ok(())
}

/// Unit Gaussian on the default grid, rescaled to mass `c`.
pub fn gaussian_start(c: f64, n: usize, r_max: f64) -> Result<RadialField> {
    let g = RadialField::gaussian(RadialGrid::new(n, r_max)?);
    let d = g.mass();
    Ok(g.scaled_by((c / d).sqrt()))
}

/// Takes the real part, rescales to mass `c` and dilates onto `Q = 0`.
fn normalize_and_project(u: &RadialField, c: f64, couplings: Couplings) -> Result<RadialField> {
    let real = RadialField::from_real(u.grid().clone(), u.real_values())?;
    let d = real.mass();
    if d == 0.0 {
        return Err(Error::ZeroMass);
    }
    let scaled = real.scaled_by((c / d).sqrt());
    let k = scaled.energy_report(couplings).effective();
    let t = t_star(k.a, k.b, k.c, couplings.p)?;
    scaled.scaled(t)
}

/// Minimises `F` on `{D = c, Q = 0}` starting from `init`.
///
/// Returns `converged = false` (not an error) when the iteration limit is hit
/// or the line search stalls.
pub fn solve_ground_state(
    c: f64,
    couplings: Couplings,
    init: &RadialField,
    opts: &SolverOptions,
) -> Result<GroundState> {
    validate_problem(c, couplings)?;
    if !(opts.tol > 0.0) {
        return Err(invalid("solver tolerance must be positive"));
    }
    let mut u = normalize_and_project(init, c, couplings)?;
    let mut tau: f64 = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let report = u.energy_report(couplings);
        let lambda = report.lambda_hat.ok_or(Error::ZeroMass)?;
        if !(report.f.is_finite() && lambda.is_finite()) {
            return Err(Error::NonFinite(format!("energy at iteration {iterations}")));
        }
        let norm = el_residual(&u, lambda, couplings).1;
        if norm < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let s = match opts.shift {
            Shift::Unit => 1.0,
            Shift::Adaptive => (-lambda).max(1.0),
        };
        let r = residual_vector(&u, lambda, couplings);
        let dir = Preconditioner::new(u.grid(), s).apply(&r);
        let slope = mass_inner(u.grid(), &r, &dir);
        let values = u.real_values();
        let allowance = 1e-13 * report.scale();
        let mut accepted = None;
        while tau > 1e-14 {
            let trial: Vec<f64> = values.iter().zip(&dir).map(|(x, d)| x - tau * d).collect();
            let trial = RadialField::from_real(u.grid().clone(), trial)?;
            let d = trial.mass();
            let trial = trial.scaled_by((c / d).sqrt());
            let k = trial.energy_report(couplings).effective();
            if let Ok(t) = t_star(k.a, k.b, k.c, couplings.p) {
                let (f_new, _) = fiber_energy(k.a, k.b, k.c, couplings.p, t);
                let target = report.f - 1e-4 * tau * slope;
                if f_new <= target + allowance {
                    accepted = Some((trial.scaled(t)?, f_new <= target));
                    break;
                }
            }
            tau *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((next, clear)) => {
                u = next;
                if clear {
                    tau = (tau * 1.5).min(MAX_STEP);
                }
            }
            None => break,
        }
    }
    let report = u.energy_report(couplings);
    let lambda_c = report.lambda_hat.ok_or(Error::ZeroMass)?;
    let residual = el_residual(&u, lambda_c, couplings).1;
    Ok(GroundState {
        c,
        couplings,
        field: u,
        lambda_c,
        gamma_c: report.f,
        residual,
        iterations,
        converged,
    })
}

/// Relative residuals of the two Pohozaev relations of a stationary state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PohozaevCheck {
    /// `|Q| / (A + B + |C|)`.
    pub q_residual: f64,
    /// `|(p-6)/(3p-6) A + (5p-12)/(3p-6) B/2 - λ D| / (A + B + |λ| D)`.
    pub multiplier_residual: f64,
    /// Both denominators vanished (zero field); residuals are reported as 0.
    pub degenerate: bool,
}

pub fn pohozaev_check(gs: &GroundState) -> PohozaevCheck {
    let r = gs.report();
    let k = r.effective();
    let p = gs.p();
    let scale = k.a + k.b + k.c.abs();
    let mult_scale = k.a + k.b + gs.lambda_c.abs() * k.d;
    if scale == 0.0 || mult_scale == 0.0 {
        return PohozaevCheck { q_residual: 0.0, multiplier_residual: 0.0, degenerate: true };
    }
    let lhs = (p - 6.0) / (3.0 * p - 6.0) * k.a + (5.0 * p - 12.0) / (3.0 * p - 6.0) * k.b / 2.0;
    PohozaevCheck {
        q_residual: r.q.abs() / scale,
        multiplier_residual: (lhs - gs.lambda_c * k.d).abs() / mult_scale,
        degenerate: false,
    }
}

/// `max_t F̃(u^t)` for the pure power equation in closed form, with
/// `‖u‖_p^p = |C|` and `N = 3`.
pub fn nls_peak_energy(a: f64, c: f64, p: f64) -> Result<f64> {
    if !(p > 10.0 / 3.0) || !(c < 0.0) || !(a > 0.0) {
        return Err(invalid(format!("peak energy needs p > 10/3, C < 0, A > 0 (p={p}, C={c}, A={a})")));
    }
    let m = 3.0 * (p - 2.0);
    Ok(nls_constant(p) * (a / 2.0).powf(m / (m - 4.0)) * (c.abs() / p).powf(-4.0 / (m - 4.0)))
}

/// `c̃(p) = (4/(N(p-2)))^{4/(N(p-2)-4)} (N(p-2)-4)/(N(p-2))` with `N = 3`.
pub fn nls_constant(p: f64) -> f64 {
    let m = 3.0 * (p - 2.0);
    (4.0 / m).powf(4.0 / (m - 4.0)) * (m - 4.0) / m
}

/// Predicted exponent of `γ̃(c) ∝ c^k` for the pure power equation.
pub fn nls_slope(p: f64) -> f64 {
    let s = 2.0 / (p - 2.0);
    (s - 0.5) / (s - 1.5)
}

// ---------------------------------------------------------------------------
// γ(c) sweeps
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Each solve starts from the previous solution (rescaled in mass).
    Continuation,
    /// Every solve starts from the Gaussian; solves run on worker threads.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaPoint {
    pub c: f64,
    pub outcome: std::result::Result<GroundState, String>,
}

impl GammaPoint {
    pub fn state(&self) -> Option<&GroundState> {
        self.outcome.as_ref().ok()
    }

    pub fn converged(&self) -> bool {
        self.state().is_some_and(|s| s.converged)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaCurve {
    pub points: Vec<GammaPoint>,
    /// Level of the largest converged mass, reported when the sweep fails to
    /// converge beyond it.
    pub plateau_estimate: Option<f64>,
}

/// Summary of a sweep's shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monotonicity {
    pub violations: usize,
    pub worst: f64,
}

impl GammaCurve {
    pub fn c_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.c).collect()
    }

    /// `γ` per point (`NaN` where the solver failed).
    pub fn gamma_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state().map_or(f64::NAN, |s| s.gamma_c)).collect()
    }

    pub fn lambda_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state().map_or(f64::NAN, |s| s.lambda_c)).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state().map_or(f64::NAN, |s| s.residual)).collect()
    }

    fn converged_pairs(&self) -> Vec<(f64, &GroundState)> {
        self.points.iter().filter(|p| p.converged()).map(|p| (p.c, p.state().unwrap())).collect()
    }

    /// Increases of `γ` by more than `tol` between consecutive converged
    /// points.
    pub fn monotonicity(&self, tol: f64) -> Monotonicity {
        let pts = self.converged_pairs();
        let mut out = Monotonicity { violations: 0, worst: 0.0 };
        for w in pts.windows(2) {
            let rise = w[1].1.gamma_c - w[0].1.gamma_c;
            if rise > tol {
                out.violations += 1;
            }
            out.worst = out.worst.max(rise);
        }
        out
    }

    /// `(Δγ, ΔA)` between the two smallest converged masses, both positive
    /// when level and kinetic energy grow toward small mass.
    pub fn small_mass_trend(&self) -> Option<(f64, f64)> {
        let pts = self.converged_pairs();
        if pts.len() < 2 {
            return None;
        }
        let (lo, hi) = (pts[0].1, pts[1].1);
        Some((lo.gamma_c - hi.gamma_c, lo.report().a - hi.report().a))
    }

    /// Least-squares slope of `log γ` against `log c` over converged points.
    pub fn log_slope(&self) -> Option<f64> {
        let pts = self.converged_pairs();
        if pts.len() < 2 || pts.iter().any(|(_, s)| s.gamma_c <= 0.0) {
            return None;
        }
        let xs: Vec<f64> = pts.iter().map(|(c, _)| c.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|(_, s)| s.gamma_c.ln()).collect();
        Some(linear_fit(&xs, &ys).slope)
    }

    /// CSV with header `c,gamma,lambda,A,B,Cmag,D,residual,iterations,converged`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "c,gamma,lambda,A,B,Cmag,D,residual,iterations,converged")?;
        for p in &self.points {
            match p.state() {
                Some(s) => {
                    let r = s.report();
                    writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                        p.c,
                        s.gamma_c,
                        s.lambda_c,
                        r.a,
                        r.b,
                        r.c.abs(),
                        r.d,
                        s.residual,
                        s.iterations,
                        s.converged
                    )?;
                }
                None => writeln!(out, "{:.16e},NaN,NaN,NaN,NaN,NaN,NaN,NaN,0,false", p.c)?,
            }
        }
        Ok(())
    }
}

/// Solves for every mass in `c_values` (which must increase).
pub fn gamma_curve(
    couplings: Couplings,
    c_values: &[f64],
    grid: &RadialGrid,
    opts: &SolverOptions,
    sweep: Sweep,
) -> Result<GammaCurve> {
    if c_values.is_empty() {
        return Err(invalid("empty mass range"));
    }
    if c_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("mass values must be strictly increasing"));
    }
    for &c in c_values {
        validate_problem(c, couplings)?;
    }
    let cold = |c: f64| -> std::result::Result<GroundState, String> {
        let init = gaussian_start(c, grid.len(), grid.r_max()).map_err(|e| e.to_string())?;
        solve_ground_state(c, couplings, &init, opts).map_err(|e| e.to_string())
    };
    let points: Vec<GammaPoint> = match sweep {
        Sweep::Continuation => {
            let mut out: Vec<GammaPoint> = Vec::with_capacity(c_values.len());
            let mut previous: Option<RadialField> = None;
            for &c in c_values {
                let outcome = match &previous {
                    Some(u) => solve_ground_state(c, couplings, u, opts).map_err(|e| e.to_string()),
                    None => cold(c),
                };
                if let Ok(s) = &outcome {
                    previous = Some(s.field.clone());
                }
                out.push(GammaPoint { c, outcome });
            }
            out
        }
        Sweep::Independent => {
            let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
            let mut slots: Vec<Option<GammaPoint>> = vec![None; c_values.len()];
            for chunk in c_values.chunks(workers).enumerate() {
                let (ci, cs) = chunk;
                let results: Vec<GammaPoint> = std::thread::scope(|scope| {
                    let handles: Vec<_> = cs
                        .iter()
                        .map(|&c| scope.spawn(move || GammaPoint { c, outcome: cold(c) }))
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
                });
                for (k, r) in results.into_iter().enumerate() {
                    slots[ci * workers + k] = Some(r);
                }
            }
            slots.into_iter().map(Option::unwrap).collect()
        }
    };
    let last_ok = points.iter().rposition(GammaPoint::converged);
    let plateau_estimate = match last_ok {
        Some(i) if i + 1 < points.len() => points[i].state().map(|s| s.gamma_c),
        _ => None,
    };
    Ok(GammaCurve { points, plateau_estimate })
}

// ---------------------------------------------------------------------------
// Tail decay
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub kappa: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the linear fit.
    pub r_squared: f64,
    pub window: (f64, f64),
}

struct LinearFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit { slope, intercept, r_squared }
}

/// Fits `log(r |u(r)|) ≈ a - κ r` on the nodes inside `[r1, r2]`.
pub fn decay_fit(u: &RadialField, window: (f64, f64)) -> Result<DecayFit> {
    let (r1, r2) = window;
    let (xs, ys): (Vec<f64>, Vec<f64>) = u
        .grid()
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(&r, v)| r >= r1 && r <= r2 && v.norm() > 0.0)
        .map(|(&r, v)| (r, (r * v.norm()).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::EmptyWindow { r1, r2 });
    }
    let fit = linear_fit(&xs, &ys);
    Ok(DecayFit {
        kappa: -fit.slope,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window,
    })
}

/// The radii where `|u| / max|u|` first drops below `hi_frac` and `lo_frac`.
pub fn tail_window(u: &RadialField, lo_frac: f64, hi_frac: f64) -> Result<(f64, f64)> {
    let mags: Vec<f64> = u.values().iter().map(|v| v.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroMass);
    }
    let nodes = u.grid().nodes();
    let first_below = |frac: f64| mags.iter().position(|&m| m < frac * peak).map(|i| nodes[i]);
    match (first_below(hi_frac), first_below(lo_frac)) {
        (Some(a), Some(b)) if b > a => Ok((a, b)),
        (a, b) => {
            let (r1, r2) = (a.unwrap_or(f64::NAN), b.unwrap_or(f64::NAN));
            Err(Error::EmptyWindow { r1, r2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn preconditioner_inverts_shifted_laplacian() {
        let grid = RadialGrid::new(200, 10.0).unwrap();
        let u = RadialField::from_fn(grid.clone(), |r| (-(r * r) / 4.0).exp() * (1.0 + r));
        let x = u.real_values();
        let s = 3.7;
        let lap = radial_neg_laplacian(&grid, &x);
        let f: Vec<f64> = lap.iter().zip(&x).map(|(l, v)| l + s * v).collect();
        let z = Preconditioner::new(&grid, s).apply(&f);
        for j in 0..199 {
            assert!((z[j] - x[j]).abs() < 1e-10, "j={j}: {} vs {}", z[j], x[j]);
        }
    }

    #[test]
    fn lambda_estimate_of_gaussian() {
        let g = RadialField::gaussian(RadialGrid::new(2048, 12.0).unwrap());
        let l = lambda_estimate(&g, Couplings::sps(4.0)).unwrap();
        assert!((l - 2.234_391_0).abs() < 1e-6, "{l}");
        let l2 = lambda_estimate(&g.with_phase(0.7), Couplings::sps(4.0)).unwrap();
        assert!((l - l2).abs() < 1e-12 * l);
        let z = RadialField::zeros(RadialGrid::new(64, 1.0).unwrap());
        assert!(matches!(lambda_estimate(&z, Couplings::sps(4.0)), Err(Error::ZeroMass)));
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let z = RadialField::zeros(RadialGrid::new(64, 1.0).unwrap());
        let (r, n) = el_residual(&z, -3.0, Couplings::sps(4.0));
        assert!(r.iter().all(|&x| x == 0.0));
        assert_eq!(n, 0.0);
    }

    #[test]
    fn linear_eigenfunction_has_vanishing_residual() {
        // -Δ (sin(kπr/R)/r) = (kπ/R)² sin(kπr/R)/r with u(R) = 0.
        let radius = 5.0;
        let grid = RadialGrid::new(128, radius).unwrap();
        let lambda = (3.0 * PI / radius).powi(2);
        let u = RadialField::from_fn(grid, |r| (3.0 * PI * r / radius).sin() / r);
        let (r, norm) = el_residual(&u, lambda, Couplings::free());
        assert!(norm < 1e-11, "{norm}");
        assert!(r.iter().all(|x| x.abs() < 1e-8));
        let (_, off) = el_residual(&u, lambda + 1.0, Couplings::free());
        assert!(off > 1e-3);
    }

    #[test]
    fn nls_closed_form() {
        assert!((nls_constant(4.0) - 4.0 / 27.0).abs() < 1e-15);
        let (a, c) = (1.5, -0.063_493_635_934_240_97);
        let peak = nls_peak_energy(a, c, 4.0).unwrap();
        let t = t_star(a, 0.0, c, 4.0).unwrap();
        let (f, _) = fiber_energy(a, 0.0, c, 4.0, t);
        assert!((peak - f).abs() <= 1e-12 * f, "{peak} vs {f}");
        let doubled = nls_peak_energy(2.0 * a, c, 4.0).unwrap();
        assert!((doubled / peak - 8.0).abs() < 1e-12);
        assert!((nls_slope(4.0) + 1.0).abs() < 1e-15);
        assert!(nls_peak_energy(a, 0.1, 4.0).is_err());
    }

    #[test]
    fn decay_fit_recovers_planted_rate() {
        let grid = RadialGrid::new(2000, 20.0).unwrap();
        let u = RadialField::from_fn(grid, |r| (-2.0 * r).exp() / r);
        let fit = decay_fit(&u, (2.0, 10.0)).unwrap();
        assert!((fit.kappa - 2.0).abs() < 1e-3);
        assert!((fit.prefactor - 1.0).abs() < 1e-3);
        assert!(fit.r_squared > 0.999_999);
        assert!(matches!(decay_fit(&u, (30.0, 40.0)), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn rejects_bad_problems() {
        let init = gaussian_start(1.0, 256, 10.0).unwrap();
        let o = SolverOptions::default();
        assert!(solve_ground_state(-1.0, Couplings::sps(4.0), &init, &o).is_err());
        assert!(solve_ground_state(1.0, Couplings::sps(3.0), &init, &o).is_err());
        assert!(solve_ground_state(1.0, Couplings::free(), &init, &o).is_err());
    }

    #[test]
    fn small_grid_solve_converges() {
        let cpl = Couplings::sps(4.0);
        let init = gaussian_start(0.5, 512, 40.0).unwrap();
        let gs = solve_ground_state(0.5, cpl, &init, &SolverOptions::default()).unwrap();
        assert!(gs.converged, "residual {} after {}", gs.residual, gs.iterations);
        assert!(gs.lambda_c < 0.0);
        assert!(gs.field.real_values()[..511].iter().all(|&x| x > 0.0));
        assert!((gs.field.mass() - 0.5).abs() < 1e-9 * 0.5);
        let again = solve_ground_state(0.5, cpl, &gs.field, &SolverOptions::default()).unwrap();
        assert!(again.iterations <= 2);
        assert!((again.gamma_c - gs.gamma_c).abs() < 1e-10 * gs.gamma_c);
    }
}
