//! The nonlocal Coulomb term: the potential `W_u = |x|^{-1} * |u|²` and the
//! energy `B(u) = ∫ W_u |u|²`.
//!
//! The analysis literature often writes `φ_u = W_u / (4π)`; everything here
//! uses the bare convolution `W_u`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fft::{Fft3, Occupied};
use crate::grid::{BoxGrid, RadialGrid};

const FOUR_PI: f64 = 4.0 * PI;

/// Potential of a radial density by Newton's theorem,
/// `W(r) = 4π ∫ ρ(s) s² / max(r, s) ds`, in O(n) with two cumulative sums.
///
/// The quadrature is the grid rule with an `O(h²)` correction for the kink of
/// the integrand at `s = r`; the discrete `B` built from this potential is a
/// symmetric quadratic form in `ρ`, so `4 W u` is its exact gradient.
pub fn radial_potential(grid: &RadialGrid, rho: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let r = grid.nodes();
    let w = grid.weights();
    let h = grid.spacing();
    // outer[j] = Σ_{k>j} w_k ρ_k / r_k
    let mut outer = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        outer[j] = acc;
        acc += w[j] * rho[j] / r[j];
    }
    let mut inner = 0.0;
    let kink = h * h / 12.0;
    (0..n)
        .map(|j| {
            inner += w[j] * rho[j];
            FOUR_PI * (inner / r[j] + outer[j] - kink * rho[j])
        })
        .collect()
}

/// `W(0) = 4π ∫ ρ(s) s ds`, the limit of [`radial_potential`] at the origin.
pub fn radial_potential_at_origin(grid: &RadialGrid, rho: &[f64]) -> f64 {
    let h = grid.spacing();
    let r = grid.nodes();
    let w = grid.weights();
    let sum: f64 = (0..grid.len()).map(|j| w[j] * rho[j] / r[j]).sum();
    let rho0 = (4.0 * rho[0] - rho[1]) / 3.0;
    FOUR_PI * (sum + h * h / 12.0 * rho0)
}

/// `B = 4π Σ w_j ρ_j W_j`.
pub fn radial_energy(grid: &RadialGrid, rho: &[f64], potential: &[f64]) -> f64 {
    FOUR_PI
        * grid
            .weights()
            .iter()
            .zip(rho)
            .zip(potential)
            .map(|((w, r), v)| w * r * v)
            .sum::<f64>()
}

/// `B = Σ W ρ dx³` on the box.
pub fn box_energy(grid: &BoxGrid, rho: &[f64], potential: &[f64]) -> f64 {
    grid.cell_volume() * rho.iter().zip(potential).map(|(a, b)| a * b).sum::<f64>()
}

/// Free-space Coulomb convolution on a periodic box.
///
/// The density is zero-padded to `(2n)³`. The kernel is the truncated
/// `K_T(x) = 1/|x|` for `|x| ≤ T = L√3` with transform
/// `K̂_T(k) = 4π(1 - cos(T|k|))/|k|²`, `K̂_T(0) = 2πT²`. Because `T` exceeds the
/// padded half-width, sampling `K̂_T` on the `(2n)³` grid directly would fold
/// periodic images of the kernel back in; instead the real-space kernel is
/// computed once on a `(4n)³` grid, where images are separated by `4L > L + T`,
/// restricted to offsets `|z_i| < L`, and transformed at `(2n)³`.
pub struct BoxHartree {
    grid: BoxGrid,
    fft: Fft3,
    kernel_hat: Vec<f64>,
    buf: Vec<Complex64>,
}

impl BoxHartree {
    pub fn new(grid: BoxGrid) -> Self {
        let n = grid.n();
        let m2 = 2 * n;
        let kernel = real_space_kernel(&grid);
        let mut buf: Vec<Complex64> = kernel.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        let mut fft = Fft3::new(m2);
        fft.forward(&mut buf);
        let dv = grid.cell_volume();
        let norm = dv / (m2 * m2 * m2) as f64;
        let kernel_hat = buf.iter().map(|v| v.re * norm).collect();
        Self { grid, fft, kernel_hat, buf }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    /// `W = |x|^{-1} * ρ` sampled on the box lattice.
    pub fn potential(&mut self, rho: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let m2 = 2 * n;
        assert_eq!(rho.len(), n * n * n);
        self.buf.iter_mut().for_each(|v| *v = Complex64::default());
        for i in 0..n {
            for j in 0..n {
                let src = (i * n + j) * n;
                let dst = (i * m2 + j) * m2;
                for k in 0..n {
                    self.buf[dst + k] = Complex64::new(rho[src + k], 0.0);
                }
            }
        }
        let occ = Occupied { extent: n };
        self.fft.forward_sparse(&mut self.buf, occ);
        for (v, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *v *= k;
        }
        self.fft.inverse_sparse(&mut self.buf, occ);
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                let src = (i * m2 + j) * m2;
                out.extend(self.buf[src..src + n].iter().map(|v| v.re.max(0.0)));
            }
        }
        out
    }

    pub fn energy(&mut self, rho: &[f64]) -> f64 {
        let w = self.potential(rho);
        box_energy(&self.grid, rho, &w)
    }
}

/// Mass fraction outside the central half-box `|x_i| < L/4`; the box
/// convolution assumes this is negligible (< 1e-8).
pub fn boundary_leak(grid: &BoxGrid, rho: &[f64]) -> f64 {
    let n = grid.n();
    let quarter = grid.length() / 4.0;
    let total: f64 = rho.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut outside = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = [i, j, k].map(|m| grid.coordinate(m).abs());
                if c.iter().any(|&x| x >= quarter) {
                    outside += rho[grid.index(i, j, k)];
                }
            }
        }
    }
    outside / total
}

/// Truncated-kernel values at lattice offsets, laid out on the periodic
/// `(2n)³` grid (offset `a` stored at index `a mod 2n`).
fn real_space_kernel(grid: &BoxGrid) -> Vec<f64> {
    let n = grid.n();
    let big = 4 * n;
    let l_big = 4.0 * grid.length();
    let t = grid.length() * 3f64.sqrt();
    let k1: Vec<f64> = (0..big)
        .map(|i| {
            let m = if i < big / 2 { i as f64 } else { i as f64 - big as f64 };
            2.0 * PI * m / l_big
        })
        .collect();
    let mut spec = Vec::with_capacity(big * big * big);
    for kx in &k1 {
        for ky in &k1 {
            for kz in &k1 {
                let k2 = kx * kx + ky * ky + kz * kz;
                let v = if k2 == 0.0 {
                    2.0 * PI * t * t
                } else {
                    FOUR_PI * (1.0 - (t * k2.sqrt()).cos()) / k2
                };
                spec.push(Complex64::new(v, 0.0));
            }
        }
    }
    Fft3::new(big).inverse(&mut spec);
    let vol = l_big.powi(3);
    let m2 = 2 * n;
    let mut out = vec![0.0; m2 * m2 * m2];
    let wrap = |a: usize| -> Option<usize> {
        // padded index a ↔ offset in [-(n-1), n-1]; offset -n is never needed
        if a < n {
            Some(a)
        } else if a > n {
            Some(big - (m2 - a))
        } else {
            None
        }
    };
    for a in 0..m2 {
        let Some(ba) = wrap(a) else { continue };
        for b in 0..m2 {
            let Some(bb) = wrap(b) else { continue };
            for c in 0..m2 {
                let Some(bc) = wrap(c) else { continue };
                out[(a * m2 + b) * m2 + c] = spec[(ba * big + bb) * big + bc].re / vol;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RadialField;

    fn erf(x: f64) -> f64 {
        // Abramowitz–Stegun 7.1.26 is too coarse here; use the series / continued
        // fraction split for double precision.
        if x.abs() < 3.0 {
            let mut sum = x;
            let mut term = x;
            let x2 = x * x;
            for k in 1..200 {
                term *= -x2 / k as f64;
                let add = term / (2 * k + 1) as f64;
                sum += add;
                if add.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            2.0 / PI.sqrt() * sum
        } else {
            // asymptotic complement via continued fraction
            let mut f = 0.0;
            for k in (1..60).rev() {
                f = (k as f64 / 2.0) / (x + f);
            }
            1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
        }
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
    }

    #[test]
    fn radial_gaussian_potential_is_erf_over_r() {
        let grid = RadialGrid::new(4096, 12.0).unwrap();
        let g = RadialField::gaussian(grid.clone());
        let rho = g.density();
        let w = radial_potential(&grid, &rho);
        let worst = grid
            .nodes()
            .iter()
            .zip(&w)
            .map(|(&r, &v)| (v - erf(r) / r).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "worst {worst}");
        assert!((w[0] - erf(grid.nodes()[0]) / grid.nodes()[0]).abs() < 1e-6);
        let w0 = radial_potential_at_origin(&grid, &rho);
        assert!((w0 - 2.0 / PI.sqrt()).abs() < 1e-6, "{w0}");
        let b = radial_energy(&grid, &rho, &w);
        assert!((b - (2.0 / PI).sqrt()).abs() < 1e-6, "{b}");
    }

    #[test]
    fn far_field_equals_total_charge_over_r() {
        let grid = RadialGrid::new(1000, 20.0).unwrap();
        let g = RadialField::gaussian(grid.clone()).scaled_by(1.3);
        let rho = g.density();
        let w = radial_potential(&grid, &rho);
        let d = g.mass();
        assert!(((w[999] - d / 20.0) / (d / 20.0)).abs() < 1e-10);
        for (&r, &v) in grid.nodes().iter().zip(&w) {
            assert!(v <= d / r * (1.0 + 1e-12));
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn zero_density_zero_potential() {
        let grid = RadialGrid::new(64, 4.0).unwrap();
        let rho = vec![0.0; 64];
        assert!(radial_potential(&grid, &rho).iter().all(|&v| v == 0.0));
        assert_eq!(radial_energy(&grid, &rho, &radial_potential(&grid, &rho)), 0.0);
    }

    #[test]
    fn radial_energy_is_quartic() {
        let grid = RadialGrid::new(512, 12.0).unwrap();
        let g = RadialField::gaussian(grid);
        let s: f64 = 1.9;
        assert!((g.scaled_by(s).hartree_energy() / g.hartree_energy() - s.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn box_potential_of_small_gaussian() {
        // L=12, n=32: dx = 0.375 as in the production setting, cheaper box.
        let grid = BoxGrid::new(32, 12.0).unwrap();
        let norm = PI.powf(-1.5);
        let mut rho = Vec::with_capacity(grid.total());
        for i in 0..32 {
            for j in 0..32 {
                for k in 0..32 {
                    let r2 = [i, j, k].map(|m| grid.coordinate(m).powi(2)).iter().sum::<f64>();
                    rho.push(norm * (-r2).exp());
                }
            }
        }
        let mut h = BoxHartree::new(grid);
        let w = h.potential(&rho);
        let mut worst: f64 = 0.0;
        for i in 0..32 {
            for j in 0..32 {
                for k in 0..32 {
                    let r = [i, j, k].map(|m| grid.coordinate(m).powi(2)).iter().sum::<f64>().sqrt();
                    let exact = if r == 0.0 { 2.0 / PI.sqrt() } else { erf(r) / r };
                    worst = worst.max((w[grid.index(i, j, k)] - exact).abs());
                }
            }
        }
        assert!(worst < 1e-5, "worst {worst}");
        let b = box_energy(&grid, &rho, &w);
        assert!(((b - (2.0 / PI).sqrt()) / (2.0 / PI).sqrt()).abs() < 1e-5, "{b}");
        let leak = boundary_leak(&grid, &rho);
        assert!(leak > 1e-5 && leak < 1e-3, "{leak}");
    }
}
