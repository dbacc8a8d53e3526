//! The fiber `t ↦ F(u^t)` through a field, its unique maximiser `t*`, the
//! projection `u ↦ u^{t*}` onto the constraint set `{Q = 0}`, and the
//! classification of initial data for the dynamics.

use std::fmt;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::field::{BoxField, Components, Couplings, EnergyReport, RadialField};
use crate::hartree::BoxHartree;

/// Margin used by [`classify`]; both inequalities must hold by more than this.
pub const EPS_CLS: f64 = 1e-10;

/// `(F(u^t), Q(u^t))` from the components of `u`, where `b` and `c` already
/// include the couplings.
pub fn fiber_energy(a: f64, b: f64, c: f64, p: f64, t: f64) -> (f64, f64) {
    let e = 1.5 * (p - 2.0);
    let te = t.powf(e);
    let f = 0.5 * t * t * a + 0.25 * t * b + te * c / p;
    let q = t * t * a + 0.25 * t * b + 3.0 * (p - 2.0) / (2.0 * p) * te * c;
    (f, q)
}

/// `y(t) = Q(u^t) / t` and its derivative.
fn y_and_slope(a: f64, b: f64, c: f64, p: f64, t: f64) -> (f64, f64) {
    let kappa = 3.0 * (p - 2.0) / (2.0 * p);
    let e1 = 1.5 * (p - 2.0) - 1.0;
    let tp = t.powf(e1 - 1.0);
    (t * a + 0.25 * b + kappa * tp * t * c, a + kappa * e1 * tp * c)
}

/// The unique `t > 0` with `Q(u^t) = 0`.
///
/// `y` is concave on `(0, ∞)` with `y(0⁺) = B/4 ≥ 0`, so the root is unique.
/// The search starts from the point where the kinetic and power terms of `y`
/// balance, brackets outward, and finishes with bisection-safeguarded Newton.
pub fn t_star(a: f64, b: f64, c: f64, p: f64) -> Result<f64> {
    if !(c < 0.0) {
        return Err(Error::NoMaximizer { c });
    }
    if !(a > 0.0) || b < 0.0 || !(p > 10.0 / 3.0 && p < 6.0) {
        return Err(invalid(format!("t* needs A > 0, B >= 0 and 10/3 < p < 6 (A={a}, B={b}, p={p})")));
    }
    let kappa = 3.0 * (p - 2.0) / (2.0 * p);
    let t_scale = (a / (kappa * c.abs())).powf(2.0 / (3.0 * p - 10.0));
    let y = |t: f64| y_and_slope(a, b, c, p, t);
    let (mut lo, mut hi) = (t_scale, t_scale);
    if y(lo).0 < 0.0 {
        // only possible through rounding when B = 0
        while y(lo).0 < 0.0 {
            lo *= 0.5;
        }
    }
    while y(hi).0 >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonFinite("t* bracket".into()));
        }
    }
    let unit = a + b + c.abs();
    let mut t = 0.5 * (lo + hi);
    let mut best = (f64::INFINITY, t);
    for _ in 0..200 {
        let (yt, dy) = y(t);
        if yt.abs() < best.0 {
            best = (yt.abs(), t);
        }
        let terms = t * a + 0.25 * b + kappa * t.powf(1.5 * (p - 2.0) - 1.0) * c.abs();
        if yt.abs() <= 1e-12 * unit.min(terms) {
            return Ok(t);
        }
        if yt > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - yt / dy;
        t = if dy != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(best.1)
}

/// [`t_star`] from an energy report, using the coupled components.
pub fn t_star_of(report: &EnergyReport) -> Result<f64> {
    let k = report.effective();
    t_star(k.a, k.b, k.c, report.couplings.p)
}

/// `u^{t*(u)}` for a radial field; exact, since dilation only relabels the
/// grid. Returns the projected field and `t*`.
pub fn project_to_v(u: &RadialField, couplings: Couplings) -> Result<(RadialField, f64)> {
    let t = t_star_of(&u.energy_report(couplings))?;
    Ok((u.scaled(t)?, t))
}

/// `u^{t*}` for a box field. Spectral resampling perturbs the components
/// slightly, so the dilation is repeated (at most a few times) until
/// `|Q| ≤ 1e-8 (A + B + |C|)`. Returns the field and the accumulated `t*`.
pub fn project_box_to_v(
    u: &BoxField,
    couplings: Couplings,
    hartree: &mut BoxHartree,
) -> Result<(BoxField, f64)> {
    let mut cur = u.clone();
    let mut total = 1.0;
    for _ in 0..6 {
        let report = cur.energy_report(couplings, hartree);
        if report.q.abs() <= 1e-8 * report.scale() {
            break;
        }
        let t = t_star_of(&report)?;
        cur = cur.scaled(t)?;
        total *= t;
    }
    Ok((cur, total))
}

/// Outcome of [`classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    /// `Q > 0` and `F < γ(c)`: the solution exists for all time.
    GlobalCertified,
    /// `Q < 0` and `F < γ(c)`: the datum lies in the blow-up set.
    BlowupCandidate,
    Unclassified,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GlobalCertified => "GLOBAL_CERTIFIED",
            Self::BlowupCandidate => "BLOWUP_CANDIDATE",
            Self::Unclassified => "UNCLASSIFIED",
        })
    }
}

/// Sorts an initial datum by the sign of `Q` and the gap `γ(c) - F`, where
/// `gamma_c` is the ground-state level at the datum's mass.
pub fn classify(report: &EnergyReport, gamma_c: f64) -> Classification {
    if !(report.f < gamma_c - EPS_CLS) {
        return Classification::Unclassified;
    }
    if report.q > EPS_CLS {
        Classification::GlobalCertified
    } else if report.q < -EPS_CLS {
        Classification::BlowupCandidate
    } else {
        Classification::Unclassified
    }
}

/// Samples of the fiber through a field.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberScan {
    pub t_values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub t_star: f64,
    /// Coupled components of the base field.
    pub components: Components,
    pub p: f64,
}

impl FiberScan {
    /// Evaluates the fiber at `count` log-spaced points on
    /// `[t*/spread, t*·spread]`, with `t*` itself always included.
    pub fn around_maximum(report: &EnergyReport, count: usize, spread: f64) -> Result<Self> {
        if count < 2 || !(spread > 1.0) {
            return Err(invalid("fiber scan needs at least 2 points and spread > 1"));
        }
        let ts = t_star_of(report)?;
        let mut t_values: Vec<f64> = (0..count)
            .map(|i| ts * spread.powf(2.0 * i as f64 / (count - 1) as f64 - 1.0))
            .collect();
        t_values.push(ts);
        t_values.sort_by(f64::total_cmp);
        t_values.dedup();
        Ok(Self::at(report, t_values, ts))
    }

    /// Evaluates the fiber at the given (increasing) dilation factors.
    pub fn with_values(report: &EnergyReport, t_values: Vec<f64>) -> Result<Self> {
        if t_values.is_empty() || t_values.iter().any(|&t| !(t > 0.0)) {
            return Err(invalid("fiber scan needs positive dilation factors"));
        }
        if t_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("fiber scan dilation factors must increase"));
        }
        let ts = t_star_of(report)?;
        Ok(Self::at(report, t_values, ts))
    }

    fn at(report: &EnergyReport, t_values: Vec<f64>, t_star: f64) -> Self {
        let k = report.effective();
        let p = report.couplings.p;
        let (f_values, q_values) =
            t_values.iter().map(|&t| fiber_energy(k.a, k.b, k.c, p, t)).unzip();
        Self { t_values, f_values, q_values, t_star, components: k, p }
    }

    pub fn max_energy(&self) -> f64 {
        let k = self.components;
        fiber_energy(k.a, k.b, k.c, self.p, self.t_star).0
    }

    /// CSV with header `t,F,Q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,F,Q")?;
        for ((t, f), q) in self.t_values.iter().zip(&self.f_values).zip(&self.q_values) {
            writeln!(out, "{t:.16e},{f:.16e},{q:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    const A: f64 = 1.5;
    const B: f64 = 0.797_884_560_802_865_4;
    const C: f64 = -0.063_493_635_934_240_97;

    #[test]
    fn fiber_at_one_is_the_energy_report() {
        let (f, q) = fiber_energy(A, B, C, 4.0, 1.0);
        assert!((f - 0.933_597_7).abs() < 1e-6);
        assert!((q - 1.651_851_2).abs() < 1e-6);
        let (f0, q0) = fiber_energy(A, B, C, 4.0, 1e-9);
        assert!(f0 > 0.0 && q0 > 0.0 && f0 < 1e-9);
        assert!(fiber_energy(A, B, C, 4.0, 1e4).0 < -1e9);
    }

    #[test]
    fn t_star_quadratic_case() {
        let exact = (A + (A * A + 0.75 * C.abs() * B).sqrt()) / (1.5 * C.abs());
        let t = t_star(A, B, C, 4.0).unwrap();
        assert!((t - exact).abs() < 1e-9 * exact, "{t} vs {exact}");
        assert!((t - 31.631).abs() < 1e-3);
        let y = y_and_slope(A, B, C, 4.0, t).0;
        assert!(y.abs() <= 1e-12 * (A + B + C.abs()));
    }

    #[test]
    fn t_star_linear_case_without_hartree() {
        let t = t_star(A, 0.0, C, 4.0).unwrap();
        assert!((t - 4.0 * A / (3.0 * C.abs())).abs() < 1e-10 * t);
    }

    #[test]
    fn t_star_is_relative_for_tiny_roots() {
        let (a, c, p): (f64, f64, f64) = (100.0, -1e7, 3.5);
        let kappa = 3.0 * (p - 2.0) / (2.0 * p);
        let exact = (a / (kappa * c.abs())).powf(2.0 / (3.0 * p - 10.0));
        assert!(exact < 1e-10);
        let t = t_star(a, 0.0, c, p).unwrap();
        assert!((t - exact).abs() < 1e-10 * exact, "{t} vs {exact}");
    }

    #[test]
    fn t_star_is_one_on_the_constraint() {
        // choose C so that Q = 0 at t = 1 for p = 5
        let p = 5.0;
        let c = -(A + B / 4.0) / (3.0 * (p - 2.0) / (2.0 * p));
        let t = t_star(A, B, c, p).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_star_requires_negative_power_term() {
        assert!(matches!(t_star(A, B, 0.0, 4.0), Err(Error::NoMaximizer { .. })));
        assert!(matches!(t_star(A, B, 0.1, 4.0), Err(Error::NoMaximizer { .. })));
    }

    #[test]
    fn projection_of_the_gaussian() {
        let grid = RadialGrid::new(4096, 40.0).unwrap();
        let g = RadialField::gaussian(grid);
        let cpl = Couplings::sps(4.0);
        let before = g.energy_report(cpl);
        let (v, t) = project_to_v(&g, cpl).unwrap();
        let r = v.energy_report(cpl);
        assert!(r.q.abs() <= 1e-8 * r.scale(), "Q = {}", r.q);
        assert!((r.d - before.d).abs() <= 1e-9 * before.d);
        let k = before.effective();
        let (f_closed, _) = fiber_energy(k.a, k.b, k.c, 4.0, t);
        assert!((r.f - f_closed).abs() <= 1e-10 * f_closed.abs());
        let (again, t1) = project_to_v(&v, cpl).unwrap();
        assert!((t1 - 1.0).abs() < 1e-9);
        assert!((again.energy_report(cpl).f - r.f).abs() < 1e-9 * r.f.abs());
    }

    #[test]
    fn classification_margins() {
        let grid = RadialGrid::new(1024, 40.0).unwrap();
        let cpl = Couplings::sps(4.0);
        let (v, _) = project_to_v(&RadialField::gaussian(grid), cpl).unwrap();
        let gamma = v.energy_report(cpl).f;
        assert_eq!(classify(&v.energy_report(cpl), gamma), Classification::Unclassified);
        let lo = v.scaled(0.9).unwrap().energy_report(cpl);
        let hi = v.scaled(1.1).unwrap().energy_report(cpl);
        assert_eq!(classify(&lo, gamma), Classification::GlobalCertified);
        assert_eq!(classify(&hi, gamma), Classification::BlowupCandidate);
        assert_eq!(Classification::BlowupCandidate.to_string(), "BLOWUP_CANDIDATE");
    }

    #[test]
    fn scan_peaks_at_t_star_and_writes_csv() {
        let grid = RadialGrid::new(1024, 12.0).unwrap();
        let report = RadialField::gaussian(grid).energy_report(Couplings::sps(4.0));
        let scan = FiberScan::around_maximum(&report, 21, 8.0).unwrap();
        let imax = (0..scan.f_values.len())
            .max_by(|&i, &j| scan.f_values[i].total_cmp(&scan.f_values[j]))
            .unwrap();
        assert_eq!(scan.t_values[imax], scan.t_star);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,F,Q\n"));
        assert_eq!(text.lines().count(), scan.t_values.len() + 1);
        assert!(FiberScan::with_values(&report, vec![2.0, 1.0]).is_err());
    }
}
