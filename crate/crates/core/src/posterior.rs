//! Linearized conjugate-normal updates for a phase `2θT` read through a
//! cosine or sine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalKind {
    Cos,
    Sin,
}

impl SignalKind {
    pub fn value(self, phase: f64) -> f64 {
        match self {
            SignalKind::Cos => phase.cos(),
            SignalKind::Sin => phase.sin(),
        }
    }

    pub fn slope(self, phase: f64) -> f64 {
        match self {
            SignalKind::Cos => -phase.sin(),
            SignalKind::Sin => phase.cos(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignalKind::Cos => "cos",
            SignalKind::Sin => "sin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseUpdate {
    pub theta_hat: f64,
    /// Posterior standard deviation of the phase `2θt`.
    pub scaled_dev: f64,
    /// Posterior standard deviation of `θ`.
    pub precision: f64,
}

/// Prior `θ ~ N(theta_hat, sigma²)`, observation `x = f(2θ·t + offset) + N(0, s²)`
/// with `f` linearized at the predicted phase.
pub fn linearized_update(
    theta_hat: f64,
    sigma: f64,
    t: f64,
    offset: f64,
    signal: SignalKind,
    x: f64,
    s: f64,
) -> Result<PhaseUpdate> {
    if !(sigma > 0.0 && t > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "linearized update needs positive widths and time (sigma {sigma}, t {t}, s {s})"
        )));
    }
    let predicted = 2.0 * theta_hat * t + offset;
    let g = signal.slope(predicted);
    let prior = 2.0 * t * sigma;
    let denom = g * g * prior * prior + s * s;
    let phase = predicted + prior * prior * g * (x - signal.value(predicted)) / denom;
    let scaled_dev = prior * s / denom.sqrt();
    Ok(PhaseUpdate {
        theta_hat: (phase - offset) / (2.0 * t),
        scaled_dev,
        precision: scaled_dev / (2.0 * t),
    })
}

/// Probability mass of a `N(0, (cΔ)²)` phase prior beyond one full turn.
pub fn wraparound_mass(c: f64, delta: f64) -> f64 {
    libm::erfc(2.0 * std::f64::consts::PI / (c * delta * std::f64::consts::SQRT_2))
}
