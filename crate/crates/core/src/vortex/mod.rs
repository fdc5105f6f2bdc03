//! Self-dual vortex backgrounds of the abelian Higgs (Landau–Ginzburg) limit.
//!
//! The radial ansatz `φ = v f(r) e^{inθ}`, `e A_θ = n a(r) / r` reduces the
//! upper-sign Bogomolny equations to the first-order system
//!
//! ```text
//! f' = (n / r) (1 - a) f
//! a' = (e² v² r / n) (1 - f²)
//! ```
//!
//! with `f(0) = a(0) = 0` and `f, a -> 1` at infinity. Internally everything
//! is solved in the scaled radius `ρ = e v r`, where the system is parameter
//! free apart from `n`.

mod background;
mod profile;
pub(crate) mod special;

pub use background::{energy, flux, sample_background, Background2D, Grid};
pub use profile::{solve_profile, ProfileMethod, RadialProfile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of a vortex background and its radial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexParams {
    /// Vorticity. `0` selects the vacuum.
    pub n: i64,
    /// Gauge coupling.
    pub e: f64,
    /// Vacuum expectation value.
    pub v: f64,
    /// Radius of the computational disk.
    pub r_max: f64,
    /// Number of radial nodes, including both endpoints.
    pub m_r: usize,
}

impl VortexParams {
    /// Parameters with the default domain `r_max = 12 / (e v)` and 2048 radial nodes.
    pub fn new(n: i64, e: f64, v: f64) -> Self {
        Self { n, e, v, r_max: 12.0 / (e * v), m_r: 2048 }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn with_m_r(mut self, m_r: usize) -> Self {
        self.m_r = m_r;
        self
    }

    /// `e v`, the inverse core size.
    pub fn ev(&self) -> f64 {
        self.e * self.v
    }

    /// Every violated precondition, one message per field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 0 {
            out.push(format!("n must be >= 0, got {}", self.n));
        }
        if !(self.e > 0.0 && self.e.is_finite()) {
            out.push(format!("e must be positive, got {}", self.e));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            out.push(format!("v must be positive, got {}", self.v));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            out.push(format!("r_max must be positive, got {}", self.r_max));
        }
        if self.m_r < 64 {
            out.push(format!("m_r must be >= 64, got {}", self.m_r));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::InvalidParams(v.join("; ")));
        }
        if self.r_max * self.ev() < 8.0 {
            log::warn!(
                "r_max * e * v = {:.2} < 8: the exponential tail is truncated",
                self.r_max * self.ev()
            );
        }
        Ok(())
    }
}
