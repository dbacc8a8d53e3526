//! Thin wrappers around `rustfft`: cubic 3-D transforms and the type-I sine
//! transform that diagonalises the radial Laplacian.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Unnormalised 3-D FFT on an `n^3` row-major cube.
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Which lines of a padded cube carry data; see [`Fft3::forward_sparse`].
#[derive(Clone, Copy, Debug)]
pub struct Occupied {
    /// Only indices `< extent` along each axis are non-zero (input) or
    /// wanted (output).
    pub extent: usize,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft(n, FftDirection::Forward);
        let inverse = planner.plan_fft(n, FftDirection::Inverse);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            lines: vec![Complex64::default(); n * n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, FftDirection::Forward, None);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, FftDirection::Inverse, None);
    }

    /// Forward transform of a cube that is zero outside `[0, extent)^3`;
    /// lines that are identically zero are skipped.
    pub fn forward_sparse(&mut self, data: &mut [Complex64], occ: Occupied) {
        self.transform(data, FftDirection::Forward, Some(occ));
    }

    /// Inverse transform where only the corner `[0, extent)^3` of the result
    /// is needed; everything else is left unspecified.
    pub fn inverse_sparse(&mut self, data: &mut [Complex64], occ: Occupied) {
        self.transform(data, FftDirection::Inverse, Some(occ));
    }

    fn transform(&mut self, data: &mut [Complex64], dir: FftDirection, occ: Option<Occupied>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "cube size mismatch");
        let m = occ.map_or(n, |o| o.extent.min(n));
        let plan = match dir {
            FftDirection::Forward => Arc::clone(&self.forward),
            FftDirection::Inverse => Arc::clone(&self.inverse),
        };
        // Forward with sparse input: z-lines for (i<m, j<m), then y-lines for i<m, then all x.
        // Inverse with sparse output: all x, then y-lines for i<m, then z-lines for (i<m, j<m).
        let order: [u8; 3] = match dir {
            FftDirection::Forward => [2, 1, 0],
            FftDirection::Inverse => [0, 1, 2],
        };
        for axis in order {
            match axis {
                2 => {
                    for i in 0..m {
                        let rows = &mut data[i * n * n..i * n * n + m * n];
                        plan.process_with_scratch(rows, &mut self.scratch);
                    }
                }
                1 => {
                    for i in 0..m {
                        let plane = &mut data[i * n * n..(i + 1) * n * n];
                        transpose_square(plane, &mut self.lines, n);
                        plan.process_with_scratch(&mut self.lines, &mut self.scratch);
                        transpose_square(&self.lines, plane, n);
                    }
                }
                _ => {
                    // x-lines: gather the (i) column for each fixed j, all k.
                    for j in 0..n {
                        for i in 0..n {
                            let src = (i * n + j) * n;
                            for k in 0..n {
                                self.lines[k * n + i] = data[src + k];
                            }
                        }
                        plan.process_with_scratch(&mut self.lines, &mut self.scratch);
                        for i in 0..n {
                            let dst = (i * n + j) * n;
                            for k in 0..n {
                                data[dst + k] = self.lines[k * n + i];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn transpose_square(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for jb in (0..n).step_by(B) {
        for kb in (0..n).step_by(B) {
            for j in jb..(jb + B).min(n) {
                for k in kb..(kb + B).min(n) {
                    dst[k * n + j] = src[j * n + k];
                }
            }
        }
    }
}

/// Type-I discrete sine transform of length `m = n - 1`:
/// `S_k = sum_{j=1}^{m} v_j sin(pi j k / n)`, computed through a complex FFT
/// of the odd extension of length `2n`. It is its own inverse up to `2/n`.
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SineTransform {
    /// `n` is the number of intervals; the transform acts on `n - 1` values.
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self { n, fft, buf: vec![Complex64::default(); 2 * n], scratch }
    }

    pub fn len(&self) -> usize {
        self.n - 1
    }

    pub fn is_empty(&self) -> bool {
        self.n <= 1
    }

    /// In-place unnormalised DST-I of complex data (`data.len() == n - 1`).
    pub fn apply(&mut self, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n - 1);
        self.buf[0] = Complex64::default();
        self.buf[n] = Complex64::default();
        for (j, &v) in data.iter().enumerate() {
            self.buf[j + 1] = v;
            self.buf[2 * n - 1 - j] = -v;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        // FFT of the odd extension equals -2i * S.
        for (k, out) in data.iter_mut().enumerate() {
            *out = self.buf[k + 1] * Complex64::new(0.0, 0.5);
        }
    }

    /// Inverse of [`apply`](Self::apply).
    pub fn invert(&mut self, data: &mut [Complex64]) {
        self.apply(data);
        let s = 2.0 / self.n as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

thread_local! {
    static SINE_CACHE: RefCell<HashMap<usize, SineTransform>> = RefCell::new(HashMap::new());
}

/// Runs `f` with a cached [`SineTransform`] of size `n` for this thread.
pub(crate) fn with_sine<R>(n: usize, f: impl FnOnce(&mut SineTransform) -> R) -> R {
    SINE_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let t = cache.entry(n).or_insert_with(|| SineTransform::new(n));
        f(t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cube(n: usize) -> Vec<Complex64> {
        (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn fft3_round_trip() {
        let n = 8;
        let orig = cube(n);
        let mut data = orig.clone();
        let mut f = Fft3::new(n);
        f.forward(&mut data);
        f.inverse(&mut data);
        let scale = 1.0 / (n * n * n) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a * scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fft3_matches_direct_sum_on_one_mode() {
        let n = 8;
        let (mx, my, mz) = (1usize, 3usize, 6usize);
        let mut data = vec![Complex64::default(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let ph = 2.0 * PI * ((mx * i + my * j + mz * k) as f64) / n as f64;
                    data[(i * n + j) * n + k] = Complex64::from_polar(1.0, ph);
                }
            }
        }
        Fft3::new(n).forward(&mut data);
        for (idx, v) in data.iter().enumerate() {
            let expect = if idx == (mx * n + my) * n + mz { (n * n * n) as f64 } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-9 && v.im.abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_transforms_agree_with_dense() {
        let n = 8;
        let occ = Occupied { extent: 4 };
        let mut data = vec![Complex64::default(); n * n * n];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    data[(i * n + j) * n + k] = Complex64::new((i + 2 * j) as f64, k as f64 - 1.5);
                }
            }
        }
        let mut dense = data.clone();
        let mut f = Fft3::new(n);
        f.forward(&mut dense);
        f.forward_sparse(&mut data, occ);
        for (a, b) in data.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-10);
        }
        let mut back_dense = dense.clone();
        f.inverse(&mut back_dense);
        f.inverse_sparse(&mut data, occ);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let idx = (i * n + j) * n + k;
                    assert!((data[idx] - back_dense[idx]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn sine_transform_matches_definition_and_inverts() {
        let n = 9;
        let v: Vec<Complex64> = (1..n).map(|j| Complex64::new(j as f64, -(j as f64).sqrt())).collect();
        let mut s = v.clone();
        let mut t = SineTransform::new(n);
        t.apply(&mut s);
        for k in 1..n {
            let direct: Complex64 = (1..n)
                .map(|j| v[j - 1] * (PI * (j * k) as f64 / n as f64).sin())
                .sum();
            assert!((s[k - 1] - direct).norm() < 1e-12);
        }
        t.invert(&mut s);
        for (a, b) in s.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
