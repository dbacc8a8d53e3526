//! Normalized standing waves of the Schrödinger–Poisson–Slater equation
//!
//! `i ∂_t u + Δu - (|x|^{-1} * |u|²) u + |u|^{p-2} u = 0` in three dimensions,
//! with `10/3 < p < 6`: ground states on the mass sphere, the fibering map
//! `t ↦ F(u^t)`, and split-step dynamics.

pub mod dynamics;
pub mod error;
pub mod fft;
pub mod fibering;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod hartree;
pub mod snapshot;

pub use error::{Error, Result};
pub use field::{BoxField, Components, Couplings, EnergyReport, ProfileClass, RadialField};
pub use grid::{BoxGrid, RadialGrid};
