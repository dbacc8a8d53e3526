//! Radial and periodic-box lattices.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Uniform radial grid `r_j = j h`, `j = 1..=n`, with `r_n = r_max`.
///
/// The weights `h r_j²` integrate `f(r) r² dr` over `[0, r_max]` (no `4π`)
/// by the trapezoid rule. Fields vanish at `r_max` and `r u` is odd about
/// both ends, so the rule is spectrally accurate and coincides with the
/// Parseval sum of the sine series of `r u`.
///
/// The grid is a value type: dilating a field by `t` produces a new grid with
/// spacing `h / t` rather than interpolating onto the old nodes, which keeps
/// every discrete scaling law exact.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    n: usize,
    spacing: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(invalid(format!(
                "radial grid needs n >= {}, got {n}",
                Self::MIN_POINTS
            )));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(invalid(format!("r_max must be positive and finite, got {r_max}")));
        }
        Ok(Self::with_spacing(n, r_max / n as f64))
    }

    fn with_spacing(n: usize, spacing: f64) -> Self {
        let nodes: Vec<f64> = (1..=n).map(|j| j as f64 * spacing).collect();
        let weights = nodes.iter().map(|&r| spacing * r * r).collect();
        Self { n, spacing, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.n - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid of the dilated field `u^t(r) = t^{3/2} u(t r)`: same sample
    /// count, spacing divided by `t`.
    pub fn dilated(&self, t: f64) -> Self {
        Self::with_spacing(self.n, self.spacing / t)
    }
}

/// Periodic cubic lattice of `n^3` points on `[-L/2, L/2)^3`, row-major with
/// the last index fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxGrid {
    n: usize,
    length: f64,
}

impl BoxGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(invalid(format!("box size per axis must be a power of two >= 4, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid(format!("box length must be positive and finite, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn total(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Box-centred coordinate of lattice index `i` along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT bin `i` along one axis.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let m = if i < self.n / 2 { i as isize } else { i as isize - self.n as isize };
        2.0 * PI * m as f64 / self.length
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Squared wavenumber magnitudes in FFT order, flattened like the field.
    pub fn k_squared(&self) -> Vec<f64> {
        let k: Vec<f64> = (0..self.n).map(|i| self.wavenumber(i)).collect();
        let mut out = Vec::with_capacity(self.total());
        for kx in &k {
            for ky in &k {
                for kz in &k {
                    out.push(kx * kx + ky * ky + kz * kz);
                }
            }
        }
        out
    }

    /// Squared distances from the box centre, flattened like the field.
    pub fn r_squared(&self) -> Vec<f64> {
        let x: Vec<f64> = (0..self.n).map(|i| self.coordinate(i)).collect();
        let mut out = Vec::with_capacity(self.total());
        for a in &x {
            for b in &x {
                for c in &x {
                    out.push(a * a + b * b + c * c);
                }
            }
        }
        out
    }
}
