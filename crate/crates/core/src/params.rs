//! Model parameters and the exponents derived from them.

use crate::error::{Error, Result};

/// Validated model parameters.
///
/// `d` is the space dimension, `s` the order of the interaction (the
/// attractive kernel is |x|^{-(d-2s)}) and `epsilon` an optional
/// regularization of that kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    d: usize,
    s: f64,
    epsilon: f64,
}

impl ModelParams {
    pub fn new(d: usize, s: f64) -> Result<Self> {
        Self::with_epsilon(d, s, 0.0)
    }

    pub fn with_epsilon(d: usize, s: f64, epsilon: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Dimension(d));
        }
        let half_d = d as f64 / 2.0;
        if !s.is_finite() || s <= 1.0 || s >= half_d {
            return Err(Error::InteractionOrder { s, half_d });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::Regularization(epsilon));
        }
        Ok(Self { d, s, epsilon })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same dimension and order with a different regularization.
    pub fn regularized(&self, epsilon: f64) -> Result<Self> {
        Self::with_epsilon(self.d, self.s, epsilon)
    }

    /// Kernel exponent `d - 2s`.
    pub fn beta(&self) -> f64 {
        self.d as f64 - 2.0 * self.s
    }

    /// Critical diffusion exponent `2d / (d + 2s)`.
    pub fn m(&self) -> f64 {
        let d = self.d as f64;
        2.0 * d / (d + 2.0 * self.s)
    }

    /// `m / (m - 1)`, which works out to `2d / (d - 2s)`.
    pub fn m_ratio(&self) -> f64 {
        2.0 * self.d as f64 / self.beta()
    }

    /// Decay exponent of the steady profile, `(d + 2s) / 2`.
    pub fn profile_exponent(&self) -> f64 {
        (self.d as f64 + 2.0 * self.s) / 2.0
    }
}
