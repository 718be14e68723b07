//! Measurement back-ends seen by the adaptive estimators.
//!
//! An oracle answers "what does the ancilla report for `f(2θt + offset)`",
//! hiding whether `t` is a continuous evolution time or an integer power of a
//! black box, and how the circuit mean is computed.

use crate::dense::{DenseOperator, Spectral};
use crate::error::{Error, Result};
use crate::measurement::{Dqc1Probe, NoiseModel, TraceReadout};
use crate::pauli::PauliSum;
use crate::posterior::SignalKind;
use crate::record::TrotterStepInfo;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReadout {
    pub x: f64,
    /// Likelihood standard deviation of `x`.
    pub std: f64,
    pub runs: usize,
    pub trotter: Option<TrotterStepInfo>,
}

pub trait PhaseOracle {
    /// Phase parameter the signal oscillates in; simulation-only.
    fn truth(&self) -> f64;

    fn measure(&mut self, t: f64, offset: f64, signal: SignalKind, step: u64) -> Result<OracleReadout>;
}

/// Continuous-time access to `exp(−iθH₀T)`.
pub struct ProbeOracle<'a> {
    probe: &'a Dqc1Probe,
    theta_true: f64,
    noise: NoiseModel,
    trial: u64,
}

impl<'a> ProbeOracle<'a> {
    pub fn new(probe: &'a Dqc1Probe, theta_true: f64, noise: NoiseModel, trial: u64) -> Self {
        Self { probe, theta_true, noise, trial }
    }
}

impl PhaseOracle for ProbeOracle<'_> {
    /// `f·θ`, with `f` the probe's frequency.
    fn truth(&self) -> f64 {
        self.probe.frequency() * self.theta_true
    }

    fn measure(&mut self, t: f64, offset: f64, signal: SignalKind, step: u64) -> Result<OracleReadout> {
        if offset != 0.0 {
            return Err(Error::Precondition("continuous probe has no phase compensation".into()));
        }
        let mut rng = self.noise.stream(self.trial, step);
        let est = self.probe.sample(self.theta_true * t, &self.noise, signal == SignalKind::Sin, &mut rng)?;
        let x = match signal {
            SignalKind::Cos => est.cos_hat,
            SignalKind::Sin => est.sin_hat.expect("sine requested"),
        };
        Ok(OracleReadout { x, std: est.effective_delta, runs: est.runs, trotter: None })
    }
}

/// Integer powers of a fixed unitary, optionally followed by a known
/// compensation `exp(−i·φ·H₀/f)` that shifts the phase by `2φ`.
pub struct BlackBoxOracle {
    black_box: DenseOperator,
    readout: TraceReadout,
    compensation: Option<(Spectral, f64)>,
    phase_true: f64,
    noise: NoiseModel,
    trial: u64,
    calls: u64,
}

impl BlackBoxOracle {
    /// `phase_true` is the hidden `θ_B` with signal `cos(2θ_B q)`.
    pub fn new(black_box: DenseOperator, readout: TraceReadout, phase_true: f64, noise: NoiseModel, trial: u64) -> Self {
        Self { black_box, readout, compensation: None, phase_true, noise, trial, calls: 0 }
    }

    /// Enables compensation generated by `h0`, whose signal frequency is `frequency`.
    pub fn with_compensation(mut self, h0: &PauliSum, frequency: f64) -> Result<Self> {
        self.compensation = Some((Spectral::of_sum(h0)?, frequency));
        Ok(self)
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Exact circuit evolution for power `q` and compensation `φ`.
    pub fn evolution(&self, q: u64, phi: f64) -> Result<DenseOperator> {
        let mut w = self.black_box.pow(q);
        if phi != 0.0 {
            let (spectral, f) = self
                .compensation
                .as_ref()
                .ok_or_else(|| Error::Precondition("black box has no compensation gate".into()))?;
            w = w.mul(&spectral.exp_i(phi / f))?;
        }
        Ok(w)
    }
}

impl PhaseOracle for BlackBoxOracle {
    fn truth(&self) -> f64 {
        self.phase_true
    }

    fn measure(&mut self, t: f64, offset: f64, signal: SignalKind, step: u64) -> Result<OracleReadout> {
        if !(t >= 1.0) || t.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!("black-box power must be a positive integer, got {t}")));
        }
        let q = t as u64;
        let w = self.evolution(q, offset / 2.0)?;
        let mut rng = self.noise.stream(self.trial, step);
        let est = self.readout.sample(&w, &self.noise, signal == SignalKind::Sin, &mut rng)?;
        self.calls += q;
        let x = match signal {
            SignalKind::Cos => est.cos_hat,
            SignalKind::Sin => est.sin_hat.expect("sine requested"),
        };
        Ok(OracleReadout { x, std: est.effective_delta, runs: est.runs, trotter: None })
    }
}
