//! Per-step and per-run results shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::posterior::{SignalKind, Z95};

/// Trotterization details attached to a multi-parameter step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrotterStepInfo {
    pub nu: usize,
    pub order: u32,
    pub slices: u64,
    pub delta_gamma: f64,
    pub gamma_measured: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub signal: SignalKind,
    /// Evolution time `T_l`, or the integer power `q_l`/`m_l` in discrete modes.
    pub t: f64,
    pub winding: i64,
    /// Zoom ratio relative to the previous measurement.
    pub ratio: f64,
    /// Known phase compensation `φ_l`; zero when unused.
    pub phase_comp: f64,
    /// Measured signal.
    pub x: f64,
    pub theta_hat: f64,
    /// Posterior standard deviation of the phase at this step.
    pub scaled_dev: f64,
    /// Posterior standard deviation of `θ`.
    pub precision: f64,
    /// Cumulative resource after this step.
    pub resource: f64,
    pub outlier: bool,
    /// True phase minus the linearization point; simulation-only diagnostic.
    pub phase_offset: f64,
    pub trotter: Option<TrotterStepInfo>,
}

impl StepRecord {
    /// Nominal 95% credible interval.
    pub fn interval(&self) -> (f64, f64) {
        (self.theta_hat - Z95 * self.precision, self.theta_hat + Z95 * self.precision)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: u64,
    pub theta_true: f64,
    pub theta0_hat: f64,
    pub target_precision: f64,
    pub converged: bool,
    /// Set when the run aborted early (for example a collapsed estimate).
    pub failure: Option<String>,
    pub steps: Vec<StepRecord>,
    /// Total evolution time, black-box calls, or exchanges.
    pub resource: f64,
    /// Circuit executions consumed.
    pub runs: usize,
}

impl RunRecord {
    pub fn new(trial: u64, theta_true: f64, theta0_hat: f64, target_precision: f64) -> Self {
        Self {
            trial,
            theta_true,
            theta0_hat,
            target_precision,
            converged: false,
            failure: None,
            steps: Vec::new(),
            resource: 0.0,
            runs: 0,
        }
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    pub fn theta_hat(&self) -> f64 {
        self.last().map_or(self.theta0_hat, |s| s.theta_hat)
    }

    pub fn precision(&self) -> f64 {
        self.last().map_or(f64::INFINITY, |s| s.precision)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.last().map_or((f64::NEG_INFINITY, f64::INFINITY), StepRecord::interval)
    }

    pub fn covers_truth(&self) -> bool {
        let (lo, hi) = self.interval();
        lo <= self.theta_true && self.theta_true <= hi
    }

    /// `T_K`, `q_K` or `m_K` of the final measurement.
    pub fn final_t(&self) -> f64 {
        self.last().map_or(0.0, |s| s.t)
    }

    /// Maps an estimate of `k·θ` back to `θ`.
    pub fn rescaled(mut self, k: f64) -> Self {
        self.theta_true /= k;
        self.theta0_hat /= k;
        self.target_precision /= k;
        for s in &mut self.steps {
            s.theta_hat /= k;
            s.precision /= k;
        }
        self
    }

    pub fn error(&self) -> f64 {
        (self.theta_hat() - self.theta_true).abs()
    }
}
