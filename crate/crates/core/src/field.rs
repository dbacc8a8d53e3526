//! Fields, the energy components `A, B, C, D`, the functionals `F` and `Q`,
//! and the mass-preserving dilation `u^t(x) = t^{3/2} u(t x)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fft::{with_sine, Fft3};
use crate::grid::{BoxGrid, RadialGrid};
use crate::hartree::{self, BoxHartree};

const FOUR_PI: f64 = 4.0 * PI;

/// Which terms of the equation are switched on.
///
/// `alpha = beta = 1` is the Schrödinger–Poisson–Slater equation,
/// `alpha = 0, beta = 1` the pure power NLS, and `alpha = beta = 0` the free
/// Schrödinger equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

impl Couplings {
    pub fn new(alpha: f64, beta: f64, p: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if v != 0.0 && v != 1.0 {
                return Err(invalid(format!("{name} must be 0 or 1, got {v}")));
            }
        }
        if beta != 0.0 && !(p > 10.0 / 3.0 && p < 6.0) {
            return Err(invalid(format!("p must lie in (10/3, 6), got {p}")));
        }
        if beta == 0.0 && !(p > 2.0 && p <= 6.0) {
            return Err(invalid(format!("p must lie in (2, 6], got {p}")));
        }
        Ok(Self { alpha, beta, p })
    }

    pub fn sps(p: f64) -> Self {
        Self { alpha: 1.0, beta: 1.0, p }
    }

    pub fn nls(p: f64) -> Self {
        Self { alpha: 0.0, beta: 1.0, p }
    }

    pub fn free() -> Self {
        Self { alpha: 0.0, beta: 0.0, p: 4.0 }
    }

    /// Exponent `3(p-2)/2` of the power term under dilation.
    pub fn dilation_exponent(&self) -> f64 {
        1.5 * (self.p - 2.0)
    }

    /// Coefficient `3(p-2)/(2p)` of `C` in `Q`.
    pub fn q_power_coefficient(&self) -> f64 {
        3.0 * (self.p - 2.0) / (2.0 * self.p)
    }
}

/// Raw energy components of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Components {
    /// Kinetic `∫|∇u|²`.
    pub a: f64,
    /// Coulomb double integral.
    pub b: f64,
    /// `-∫|u|^p`.
    pub c: f64,
    /// Mass `∫|u|²`.
    pub d: f64,
}

impl Components {
    /// `A + B + |C|`, the natural magnitude for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.a + self.b + self.c.abs()
    }
}

/// `(A, B, C, D, F, Q, λ̂)` of a field under given couplings. `F`, `Q` and
/// `λ̂` are always assembled from the stored components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    pub q: f64,
    /// `(A + αB + βC) / D`; `None` for a zero field.
    pub lambda_hat: Option<f64>,
    pub couplings: Couplings,
}

impl EnergyReport {
    pub fn from_components(k: Components, couplings: Couplings) -> Self {
        let Couplings { alpha, beta, p } = couplings;
        let f = k.a / 2.0 + alpha * k.b / 4.0 + beta * k.c / p;
        let q = k.a + alpha * k.b / 4.0 + beta * couplings.q_power_coefficient() * k.c;
        let lambda_hat = (k.d > 0.0).then(|| (k.a + alpha * k.b + beta * k.c) / k.d);
        Self { a: k.a, b: k.b, c: k.c, d: k.d, f, q, lambda_hat, couplings }
    }

    pub fn components(&self) -> Components {
        Components { a: self.a, b: self.b, c: self.c, d: self.d }
    }

    /// Components as they enter `F` and `Q` (`B` and `C` multiplied by the couplings).
    pub fn effective(&self) -> Components {
        Components {
            a: self.a,
            b: self.couplings.alpha * self.b,
            c: self.couplings.beta * self.c,
            d: self.d,
        }
    }

    pub fn scale(&self) -> f64 {
        self.effective().scale()
    }

    /// Right-hand side of `F - 2Q/(3(p-2)) = (3p-10)/(6(p-2)) A + (3p-8)/(12(p-2)) B`.
    pub fn identity_rhs(&self) -> f64 {
        let p = self.couplings.p;
        (3.0 * p - 10.0) / (6.0 * (p - 2.0)) * self.a
            + self.couplings.alpha * (3.0 * p - 8.0) / (12.0 * (p - 2.0)) * self.b
    }

    /// Left-hand side of the same identity.
    pub fn identity_lhs(&self) -> f64 {
        self.f - 2.0 / (3.0 * (self.couplings.p - 2.0)) * self.q
    }
}

// ---------------------------------------------------------------------------
// Radial fields
// ---------------------------------------------------------------------------

/// Samples of a radially symmetric function on a [`RadialGrid`].
///
/// The value at `r_max` is pinned to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("radial sample {i}")));
        }
        *values.last_mut().unwrap() = Complex64::default();
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::from_real(grid, values).expect("sampled function must be finite")
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![Complex64::default(); n] }
    }

    /// Unit-mass Gaussian `π^{-3/4} e^{-r²/2}`.
    pub fn gaussian(grid: RadialGrid) -> Self {
        let norm = PI.powf(-0.75);
        Self::from_fn(grid, |r| norm * (-0.5 * r * r).exp())
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled_by(&self, s: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn with_phase(&self, theta: f64) -> Self {
        let ph = Complex64::from_polar(1.0, theta);
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * ph).collect() }
    }

    pub fn mass(&self) -> f64 {
        radial_integral(&self.grid, &self.density())
    }

    pub fn kinetic(&self) -> f64 {
        radial_kinetic_complex(&self.grid, &self.values)
    }

    pub fn power_term(&self, p: f64) -> f64 {
        let integrand: Vec<f64> = self.values.iter().map(|v| v.norm().powf(p)).collect();
        -radial_integral(&self.grid, &integrand)
    }

    pub fn hartree_energy(&self) -> f64 {
        let rho = self.density();
        let w = hartree::radial_potential(&self.grid, &rho);
        hartree::radial_energy(&self.grid, &rho, &w)
    }

    pub fn components(&self, p: f64) -> Components {
        Components {
            a: self.kinetic(),
            b: self.hartree_energy(),
            c: self.power_term(p),
            d: self.mass(),
        }
    }

    pub fn energy_report(&self, couplings: Couplings) -> EnergyReport {
        EnergyReport::from_components(self.components(couplings.p), couplings)
    }

    /// `u^t(r) = t^{3/2} u(t r)`, carried on the dilated grid. Every scaling
    /// law (`A ↦ t²A`, `B ↦ tB`, `C ↦ t^{3(p-2)/2}C`, `D ↦ D`) holds to
    /// rounding.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid(format!("dilation factor must be positive, got {t}")));
        }
        let s = t.powf(1.5);
        Ok(Self {
            grid: self.grid.dilated(t),
            values: self.values.iter().map(|v| v * s).collect(),
        })
    }

    /// Value at an arbitrary radius by four-point Lagrange interpolation,
    /// using the even extension across the origin and zero past `r_max`.
    pub fn interpolate(&self, r: f64) -> Complex64 {
        let h = self.grid.spacing();
        let n = self.values.len() as isize;
        let sample = |j: isize| -> Complex64 {
            // node index j corresponds to radius j*h; even extension u(-r) = u(r)
            let j = j.abs();
            if j == 0 {
                // r = 0: fourth-order even extrapolation from the first nodes
                let v = &self.values;
                (v[0] * 4.0 - v[1]) / 3.0
            } else if j > n {
                Complex64::default()
            } else {
                self.values[(j - 1) as usize]
            }
        };
        let x = r.abs() / h;
        if x >= n as f64 {
            return Complex64::default();
        }
        let j0 = x.floor() as isize;
        let s = x - j0 as f64;
        // nodes j0-1, j0, j0+1, j0+2
        let w = [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ];
        (0..4).map(|m| sample(j0 - 1 + m as isize) * w[m]).sum()
    }

    /// Resample onto another radial grid by cubic interpolation.
    pub fn resample(&self, target: &RadialGrid) -> Result<Self> {
        let total = self.mass();
        if total > 0.0 && target.r_max() < self.grid.r_max() {
            let lost: f64 = self
                .grid
                .nodes()
                .iter()
                .zip(self.grid.weights())
                .zip(&self.values)
                .filter(|((&r, _), _)| r > target.r_max())
                .map(|((_, &w), v)| FOUR_PI * w * v.norm_sqr())
                .sum::<f64>()
                / total;
            if lost > 1e-10 {
                return Err(Error::SupportOverflow { lost });
            }
        }
        let values = target.nodes().iter().map(|&r| self.interpolate(r)).collect();
        Self::new(target.clone(), values)
    }
}

/// `4π Σ w_j f_j`.
pub fn radial_integral(grid: &RadialGrid, f: &[f64]) -> f64 {
    FOUR_PI * grid.weights().iter().zip(f).map(|(w, x)| w * x).sum::<f64>()
}

/// Eigenvalues `(πk / r_max)²`, `k = 1..n-1`, of `-d²/dr²` on the sine
/// basis of `v = r u` with `v(0) = v(r_max) = 0`.
pub(crate) fn sine_symbol(grid: &RadialGrid) -> Vec<f64> {
    let n = grid.len();
    let base = PI / (n as f64 * grid.spacing());
    (1..n).map(|k| (base * k as f64).powi(2)).collect()
}

/// Sine coefficients of `v = r u` on the interior nodes.
pub(crate) fn sine_coefficients(grid: &RadialGrid, u: &[Complex64]) -> Vec<Complex64> {
    let m = grid.len() - 1;
    let mut v: Vec<Complex64> = grid.nodes()[..m].iter().zip(u).map(|(&r, x)| x * r).collect();
    with_sine(grid.len(), |t| t.apply(&mut v));
    v
}

/// `L v` for `v = r u`, where `L` is `-d²/dr²` applied spectrally.
fn sine_second_derivative(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let cu: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut s = sine_coefficients(grid, &cu);
    for (x, sigma) in s.iter_mut().zip(sine_symbol(grid)) {
        *x *= sigma;
    }
    with_sine(grid.len(), |t| t.invert(&mut s));
    s.into_iter().map(|x| x.re).collect()
}

/// Discrete `∫|∇u|² = 4π ∫ |(r u)'|² dr`, evaluated on the sine expansion of
/// `r u`, so it is the exact kinetic energy of the band-limited interpolant.
pub(crate) fn radial_kinetic_complex(grid: &RadialGrid, u: &[Complex64]) -> f64 {
    let s = sine_coefficients(grid, u);
    let sum: f64 = s.iter().zip(sine_symbol(grid)).map(|(x, sigma)| sigma * x.norm_sqr()).sum();
    FOUR_PI * grid.spacing() * 2.0 / grid.len() as f64 * sum
}

#[cfg(test)]
pub(crate) fn radial_kinetic(grid: &RadialGrid, u: &[f64]) -> f64 {
    let cu: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    radial_kinetic_complex(grid, &cu)
}

/// `-Δ_h u` for a real profile, `(L v)_j / r_j`; also the gradient of half
/// the discrete kinetic energy in the mass inner product. The last node is 0.
pub(crate) fn radial_neg_laplacian(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let lv = sine_second_derivative(grid, u);
    let mut out: Vec<f64> = lv.iter().zip(grid.nodes()).map(|(l, r)| l / r).collect();
    out.push(0.0);
    out
}

// ---------------------------------------------------------------------------
// Box fields
// ---------------------------------------------------------------------------

/// Complex samples on an `n³` periodic lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxField {
    grid: BoxGrid,
    values: Vec<Complex64>,
}

impl BoxField {
    pub fn new(grid: BoxGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                grid.total(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("box sample {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: BoxGrid) -> Self {
        Self { grid, values: vec![Complex64::default(); grid.total()] }
    }

    /// Samples `f(x, y, z)` at the box-centred lattice points.
    pub fn from_fn(grid: BoxGrid, f: impl Fn(f64, f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.total());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    values.push(f(grid.coordinate(i), grid.coordinate(j), grid.coordinate(k)));
                }
            }
        }
        Self { grid, values }
    }

    /// Samples a radial field at `|x|` (cubic interpolation in `r`).
    pub fn from_radial(grid: BoxGrid, radial: &RadialField) -> Self {
        Self::from_fn(grid, |x, y, z| radial.interpolate((x * x + y * y + z * z).sqrt()))
    }

    /// Single lattice plane wave `e^{i k·x}` with integer mode numbers.
    pub fn plane_wave(grid: BoxGrid, modes: [i64; 3], amplitude: f64) -> Self {
        let k = modes.map(|m| 2.0 * PI * m as f64 / grid.length());
        Self::from_fn(grid, |x, y, z| Complex64::from_polar(amplitude, k[0] * x + k[1] * y + k[2] * z))
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled_by(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn with_phase(&self, theta: f64) -> Self {
        let ph = Complex64::from_polar(1.0, theta);
        Self { grid: self.grid, values: self.values.iter().map(|v| v * ph).collect() }
    }

    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Spectral `∫|∇u|²`.
    pub fn kinetic(&self) -> f64 {
        let mut fft = Fft3::new(self.grid.n());
        self.kinetic_with(&mut fft)
    }

    pub fn kinetic_with(&self, fft: &mut Fft3) -> f64 {
        let mut hat = self.values.clone();
        fft.forward(&mut hat);
        spectral_kinetic(&self.grid, &hat)
    }

    pub fn power_term(&self, p: f64) -> f64 {
        -self.grid.cell_volume() * self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>()
    }

    pub fn components(&self, p: f64, hartree: &mut BoxHartree) -> Components {
        let rho = self.density();
        let w = hartree.potential(&rho);
        Components {
            a: self.kinetic(),
            b: hartree::box_energy(&self.grid, &rho, &w),
            c: self.power_term(p),
            d: self.mass(),
        }
    }

    pub fn energy_report(&self, couplings: Couplings, hartree: &mut BoxHartree) -> EnergyReport {
        EnergyReport::from_components(self.components(couplings.p, hartree), couplings)
    }

    /// `u^t(x) = t^{3/2} u(t x)` resampled onto the same lattice with the
    /// trigonometric interpolant. Fails when mass would be lost past the box
    /// edge (`t < 1`) or periodic images would fold in (`t > 1`).
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid(format!("dilation factor must be positive, got {t}")));
        }
        let half = 0.5 * self.grid.length();
        // Region of the source that must hold all the mass.
        let keep = if t <= 1.0 { t * half } else { (2.0 - t) * half };
        let total = self.mass();
        if total > 0.0 {
            let lost = if keep <= 0.0 {
                1.0
            } else {
                let n = self.grid.n();
                let mut outside = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let c = [i, j, k].map(|m| self.grid.coordinate(m).abs());
                            if c.iter().any(|&x| x > keep) {
                                outside += self.values[self.grid.index(i, j, k)].norm_sqr();
                            }
                        }
                    }
                }
                outside * self.grid.cell_volume() / total
            };
            if lost > 1e-10 {
                return Err(Error::SupportOverflow { lost });
            }
        }
        let n = self.grid.n();
        let matrix = dilation_matrix(&self.grid, t);
        let mut data = self.values.clone();
        let mut line = vec![Complex64::default(); n];
        for axis in 0..3 {
            let stride = n.pow(2 - axis as u32);
            for base in 0..n * n * n {
                // iterate over line starts for this axis
                let coord = (base / stride) % n;
                if coord != 0 {
                    continue;
                }
                for (m, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + m * stride];
                }
                for a in 0..n {
                    let row = &matrix[a * n..(a + 1) * n];
                    data[base + a * stride] = row.iter().zip(&line).map(|(w, v)| w * v).sum();
                }
            }
        }
        let s = t.powf(1.5);
        data.iter_mut().for_each(|v| *v *= s);
        Ok(Self { grid: self.grid, values: data })
    }
}

/// `Σ|k|²|û_k|²` with the Parseval normalisation of the unnormalised FFT.
pub(crate) fn spectral_kinetic(grid: &BoxGrid, hat: &[Complex64]) -> f64 {
    let n = grid.n();
    let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
    let mut acc = 0.0;
    let mut idx = 0;
    for kx in &k {
        for ky in &k {
            let kxy = kx * kx + ky * ky;
            for kz in &k {
                acc += (kxy + kz * kz) * hat[idx].norm_sqr();
                idx += 1;
            }
        }
    }
    acc * grid.cell_volume() / grid.total() as f64
}

/// 1-D matrix evaluating the trigonometric interpolant at `t x_a`.
/// The Nyquist mode is split symmetrically so that real data stays real.
fn dilation_matrix(grid: &BoxGrid, t: f64) -> Vec<Complex64> {
    let n = grid.n();
    let l = grid.length();
    let mut out = vec![Complex64::default(); n * n];
    for a in 0..n {
        let xa = t * grid.coordinate(a);
        for m in 0..n {
            let xm = grid.coordinate(m);
            let mut acc = Complex64::default();
            for q in -(n as i64 / 2)..=(n as i64 / 2) {
                let weight = if q.unsigned_abs() as usize == n / 2 { 0.5 } else { 1.0 };
                let k = 2.0 * PI * q as f64 / l;
                acc += Complex64::from_polar(weight, k * (xa - xm));
            }
            out[a * n + m] = acc / n as f64;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Random test fields
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileClass {
    GaussianMixture,
    Bump,
    NoisyDecay,
}

impl ProfileClass {
    pub const ALL: [ProfileClass; 3] =
        [ProfileClass::GaussianMixture, ProfileClass::Bump, ProfileClass::NoisyDecay];
}

/// Smooth, exponentially localised real radial field, deterministic in
/// `seed`. Profiles are functions of `r²`, so they are smooth at the origin,
/// and their extent is kept well inside `r_max / 2`.
pub fn random_field(grid: &RadialGrid, seed: u64, class: ProfileClass) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ell = grid.r_max() / 12.0;
    let amp = rng.gen_range(0.5..3.0);
    let profile: Box<dyn Fn(f64) -> f64> = match class {
        ProfileClass::GaussianMixture => {
            let k = rng.gen_range(2..=4);
            let terms: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.gen_range(0.2..1.0), ell * rng.gen_range(0.3..1.0)))
                .collect();
            Box::new(move |r| terms.iter().map(|(a, s)| a * (-(r * r) / (2.0 * s * s)).exp()).sum())
        }
        ProfileClass::Bump => {
            let a = rng.gen_range(0.0..2.0);
            let b = rng.gen_range(0.0..0.5);
            let s = ell * rng.gen_range(0.4..1.0);
            Box::new(move |r| {
                let x = r * r / (s * s);
                (1.0 + a * x + b * x * x) * (-x).exp()
            })
        }
        ProfileClass::NoisyDecay => {
            let kappa = rng.gen_range(1.0..2.5) / ell;
            let modes: Vec<(f64, f64)> =
                (1..=3).map(|m| (rng.gen_range(-0.1..0.1), m as f64)).collect();
            Box::new(move |r| {
                let x = r * r / (ell * ell);
                let ripple: f64 = modes.iter().map(|(a, m)| a * (m * x / 4.0).cos()).sum();
                (-(kappa * ell) * ((1.0 + x).sqrt() - 1.0)).exp()
                    * (1.0 + ripple)
                    * (-x / 64.0).exp()
            })
        }
    };
    RadialField::from_fn(grid.clone(), |r| amp * profile(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_grid() -> RadialGrid {
        RadialGrid::new(2048, 12.0).unwrap()
    }

    // Values computed independently:
    //   A = 3/2 (⟨r²⟩ = 3/2 for the unit-mass density π^{-3/2}e^{-r²}),
    //   C(p=4) = -π^{-3}(π/2)^{3/2} = -(2π)^{-3/2}.
    const GAUSS_A: f64 = 1.5;
    const GAUSS_C4: f64 = -0.063_493_635_934_240_97;

    #[test]
    fn gaussian_mass_and_homogeneity() {
        let g = RadialField::gaussian(gauss_grid());
        assert!((g.mass() - 1.0).abs() < 1e-10);
        assert!((g.scaled_by(2f64.sqrt()).mass() - 2.0).abs() < 1e-9);
        assert_eq!(RadialField::zeros(gauss_grid()).mass(), 0.0);
    }

    #[test]
    fn gaussian_kinetic_and_power() {
        let g = RadialField::gaussian(gauss_grid());
        assert!((g.kinetic() - GAUSS_A).abs() < 1e-8, "{}", g.kinetic());
        assert!((g.power_term(4.0) - GAUSS_C4).abs() < 1e-8);
        let s: f64 = 1.7;
        for p in [3.5, 4.0, 5.0] {
            let ratio = g.scaled_by(s).power_term(p) / g.power_term(p);
            assert!((ratio / s.powf(p) - 1.0).abs() < 1e-12);
        }
        let z = RadialField::zeros(gauss_grid());
        assert_eq!(z.kinetic(), 0.0);
        assert_eq!(z.power_term(4.0), 0.0);
    }

    #[test]
    fn energy_report_assembles_f_and_q() {
        let g = RadialField::gaussian(gauss_grid());
        let r = g.energy_report(Couplings::sps(4.0));
        assert!((r.f - (r.a / 2.0 + r.b / 4.0 + r.c / 4.0)).abs() < 1e-15);
        assert!((r.q - (r.a + r.b / 4.0 + 0.75 * r.c)).abs() < 1e-15);
        assert!((r.f - 0.933_597_7).abs() < 1e-6);
        assert!((r.q - 1.651_851_2).abs() < 1e-6);
        assert!((r.identity_lhs() - 0.382_980_8).abs() < 1e-6);
        let z = RadialField::zeros(gauss_grid()).energy_report(Couplings::sps(4.0));
        assert_eq!((z.a, z.b, z.c, z.d, z.f, z.q), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(z.lambda_hat.is_none());
    }

    #[test]
    fn dilation_by_two() {
        let g = RadialField::gaussian(gauss_grid());
        assert_eq!(g.scaled(1.0).unwrap(), g);
        let g2 = g.scaled(2.0).unwrap();
        assert!((g2.kinetic() - 6.0).abs() < 1e-6);
        assert!((g2.mass() - 1.0).abs() < 1e-10);
        assert!((g2.power_term(4.0) - 8.0 * GAUSS_C4).abs() < 1e-6);
        assert!(g.scaled(0.0).is_err());
    }

    #[test]
    fn kinetic_matches_first_derivative_form() {
        // 4π∫ r² |u'|² dr with u' known analytically
        let grid = gauss_grid();
        let f = RadialField::from_fn(grid.clone(), |r| (1.0 + r * r) * (-r * r).exp());
        let du: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| {
                let d = 2.0 * r * (-r * r).exp() - 2.0 * r * (1.0 + r * r) * (-r * r).exp();
                d * d
            })
            .collect();
        let direct = radial_integral(&grid, &du);
        assert!((f.kinetic() - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn neg_laplacian_is_gradient_of_kinetic() {
        let grid = RadialGrid::new(64, 8.0).unwrap();
        let u = random_field(&grid, 3, ProfileClass::Bump).real_values();
        let lap = radial_neg_laplacian(&grid, &u);
        // dA/du_j = 8π w_j (-Δ_h u)_j
        for j in [0, 1, 5, 30, 61] {
            let eps = 1e-6;
            let mut up = u.clone();
            up[j] += eps;
            let mut dn = u.clone();
            dn[j] -= eps;
            let fd = (radial_kinetic(&grid, &up) - radial_kinetic(&grid, &dn)) / (2.0 * eps);
            let an = 8.0 * PI * grid.weights()[j] * lap[j];
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "j={j}: {fd} vs {an}");
        }
    }

    #[test]
    fn random_field_is_deterministic_and_massive() {
        let grid = RadialGrid::new(512, 20.0).unwrap();
        for class in ProfileClass::ALL {
            let a = random_field(&grid, 42, class);
            let b = random_field(&grid, 42, class);
            assert_eq!(a, b);
            assert!(a.mass() > 0.0);
            // localised: negligible mass near the edge
            let tail: f64 = a.values()[400..].iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(tail < 1e-8, "{class:?}: {tail}");
        }
    }

    #[test]
    fn interpolation_reproduces_smooth_profile() {
        let grid = RadialGrid::new(1024, 12.0).unwrap();
        let g = RadialField::gaussian(grid);
        let norm = PI.powf(-0.75);
        for r in [0.0f64, 0.003, 0.5, 1.2345, 3.3] {
            let exact = norm * (-0.5 * r * r).exp();
            assert!((g.interpolate(r).re - exact).abs() < 1e-8, "r={r}");
        }
    }

    #[test]
    fn resample_detects_overflow() {
        let g = RadialField::gaussian(RadialGrid::new(1024, 12.0).unwrap());
        assert!(matches!(
            g.resample(&RadialGrid::new(256, 1.0).unwrap()),
            Err(Error::SupportOverflow { .. })
        ));
        let fine = g.resample(&RadialGrid::new(3000, 10.0).unwrap()).unwrap();
        assert!((fine.mass() - 1.0).abs() < 1e-8, "{}", fine.mass());
    }

    #[test]
    fn couplings_validation() {
        assert!(Couplings::new(1.0, 1.0, 4.0).is_ok());
        assert!(Couplings::new(0.5, 1.0, 4.0).is_err());
        assert!(Couplings::new(1.0, 1.0, 3.0).is_err());
        assert!(Couplings::new(0.0, 0.0, 3.0).is_ok());
    }

    #[test]
    fn box_plane_wave_kinetic_is_exact() {
        let grid = BoxGrid::new(16, 5.0).unwrap();
        let u = BoxField::plane_wave(grid, [1, -2, 3], 0.7);
        let k2 = (2.0 * PI / 5.0f64).powi(2) * 14.0;
        assert!((u.kinetic() - k2 * u.mass()).abs() < 1e-10 * k2 * u.mass());
        assert_eq!(BoxField::zeros(grid).kinetic(), 0.0);
    }

    #[test]
    fn box_gaussian_mass_and_dilation() {
        let grid = BoxGrid::new(32, 16.0).unwrap();
        let norm = PI.powf(-0.75);
        let u = BoxField::from_fn(grid, |x, y, z| {
            Complex64::new(norm * (-0.5 * (x * x + y * y + z * z)).exp(), 0.0)
        });
        assert!((u.mass() - 1.0).abs() < 1e-10);
        assert!((u.kinetic() - 1.5).abs() < 1e-8);
        let u2 = u.scaled(1.25).unwrap();
        assert!((u2.mass() - 1.0).abs() < 1e-8);
        assert!((u2.kinetic() - 1.5 * 1.5625).abs() < 1e-6);
        assert!(u.scaled(1.0).unwrap().values().iter().zip(u.values()).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(matches!(u.scaled(0.3), Err(Error::SupportOverflow { .. })));
    }
}
