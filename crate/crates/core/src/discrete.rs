//! Zoom-in estimation when only integer powers of a black box `W_B = e^{−iθH₀}`
//! are available.
//!
//! Powers grow geometrically, `q_{l+1} = b·q_l`, and a known compensation
//! `e^{−iφH₀}` shifts the predicted phase `2θ̂q + 2φ` back onto `π/2 + 2pπ`.
//! Only black-box applications are counted as resources.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{Dqc1Probe, NoiseModel};
use crate::oracle::{BlackBoxOracle, PhaseOracle};
use crate::pauli::PauliSum;
use crate::posterior::{linearized_update, wraparound_mass, SignalKind};
use crate::record::{RunRecord, StepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackBoxPolicy {
    /// Integer zoom base.
    pub b: u64,
    pub delta: f64,
    /// Prior phase width multiplier at `q = 1`.
    pub c: f64,
    pub target_precision: f64,
    pub max_steps: usize,
}

impl Default for BlackBoxPolicy {
    fn default() -> Self {
        Self { b: 8, delta: 1e-3, c: 10.0, target_precision: 1e-6, max_steps: 40 }
    }
}

impl BlackBoxPolicy {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.b < 2 {
            v.push(format!("zoom base b = {} must be at least 2", self.b));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            v.push(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            v.push(format!("c must be positive, got {}", self.c));
        }
        if !(self.c * self.delta <= 0.1) {
            v.push(format!("c*delta = {} must be at most 0.1", self.c * self.delta));
        }
        if !(self.b as f64 * self.delta <= 0.1) {
            v.push(format!("b*delta = {} must be at most 0.1 to keep the linearization", self.b as f64 * self.delta));
        }
        if !(self.target_precision > 0.0) {
            v.push(format!("target precision must be positive, got {}", self.target_precision));
        }
        if self.max_steps == 0 {
            v.push("max_steps must be at least 1".into());
        }
        if self.c > 0.0 && self.delta > 0.0 {
            let mass = wraparound_mass(self.c, self.delta);
            if !(mass < 1e-9) {
                v.push(format!("prior wrap-around mass {mass:.3e} is not below 1e-9"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }

    /// Prior std of `θ̂_0`: phase width `cΔ` at `q = 1`.
    pub fn prior_std(&self) -> f64 {
        self.c * self.delta / 2.0
    }

    /// Black-box calls after `k` steps, `(b^k − 1)/(b − 1)`.
    pub fn calls_after(&self, k: u32) -> u64 {
        (self.b.pow(k) - 1) / (self.b - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteZoom {
    pub q: u64,
    /// `φ` in `(−π/2, π/2]`.
    pub phase_comp: f64,
    pub winding: i64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub step: usize,
    pub theta_hat: f64,
    /// `Σ_l`: posterior std of the phase `2θq_l`.
    pub sigma: f64,
    pub q: u64,
    pub phase_comp: f64,
    pub winding: i64,
    pub history: Vec<StepRecord>,
}

impl DiscreteState {
    /// `Σ′_l = Σ_l/(2q_l)`
    pub fn precision(&self) -> f64 {
        self.sigma / (2.0 * self.q as f64)
    }

    pub fn first_zoom(&self) -> DiscreteZoom {
        DiscreteZoom { q: self.q, phase_comp: self.phase_comp, winding: self.winding, ratio: 1.0 }
    }
}

pub fn init_discrete(theta0_hat: f64, policy: &BlackBoxPolicy) -> Result<DiscreteState> {
    if !(theta0_hat > 0.0 && theta0_hat < FRAC_PI_4) {
        return Err(Error::Precondition(format!(
            "prior mean {theta0_hat} outside (0, pi/4); re-center the prior before zooming"
        )));
    }
    Ok(DiscreteState {
        step: 0,
        theta_hat: theta0_hat,
        sigma: policy.c * policy.delta,
        q: 1,
        phase_comp: FRAC_PI_4 - theta0_hat,
        winding: 0,
        history: Vec::new(),
    })
}

/// `q_{l+1} = b·q_l` with `(p, φ)` solving `2θ̂q + 2φ = π/2 + 2pπ`, `φ ∈ (−π/2, π/2]`.
pub fn discrete_schedule(state: &DiscreteState, policy: &BlackBoxPolicy) -> Result<DiscreteZoom> {
    let q = state
        .q
        .checked_mul(policy.b)
        .ok_or_else(|| Error::InvalidParameter(format!("power {} * {} overflows", state.q, policy.b)))?;
    let (winding, phase_comp) = compensation(state.theta_hat, q);
    Ok(DiscreteZoom { q, phase_comp, winding, ratio: policy.b as f64 })
}

/// Winding and compensation re-centering `2θ̂q` on the steep point.
pub fn compensation(theta_hat: f64, q: u64) -> (i64, f64) {
    let v = 2.0 * theta_hat * q as f64 - FRAC_PI_2;
    let p = ((v + PI) / (2.0 * PI)).floor();
    let mut two_phi = 2.0 * PI * p - v;
    let mut p = p as i64;
    // Rounding at the boundary can leave 2φ at exactly −π.
    if two_phi <= -PI {
        two_phi += 2.0 * PI;
        p += 1;
    }
    (p, two_phi / 2.0)
}

pub fn discrete_update(state: &DiscreteState, zoom: &DiscreteZoom, y: f64, policy: &BlackBoxPolicy) -> Result<DiscreteState> {
    discrete_update_with_std(state, zoom, y, policy.delta)
}

/// `b′ = bΣ_l/s`, `Σ_{l+1} = s·b′/√(1+b′²)`,
/// `θ̂ = (π/2 + 2pπ − 2φ − b′²/(1+b′²)·y)/(2q)`.
pub fn discrete_update_with_std(state: &DiscreteState, zoom: &DiscreteZoom, y: f64, s: f64) -> Result<DiscreteState> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("likelihood std must be positive, got {s}")));
    }
    let b_eff = zoom.ratio * state.sigma / s;
    let gain = b_eff * b_eff / (1.0 + b_eff * b_eff);
    let mut next = state.clone();
    next.step += 1;
    next.theta_hat = (FRAC_PI_2 + 2.0 * PI * zoom.winding as f64 - 2.0 * zoom.phase_comp - gain * y) / (2.0 * zoom.q as f64);
    next.sigma = s * b_eff / (1.0 + b_eff * b_eff).sqrt();
    next.q = zoom.q;
    next.phase_comp = zoom.phase_comp;
    next.winding = zoom.winding;
    Ok(next)
}

/// `θ̂_0 = θ_B + N(0, (cΔ/2)²)`
pub fn draw_prior<R: Rng + ?Sized>(phase_true: f64, policy: &BlackBoxPolicy, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    phase_true + policy.prior_std() * z
}

/// Black box `evolve(H₀, θ)` read through the su(2) readout of `(h0, h1, h2)`.
pub fn run_discrete(
    h0: &PauliSum,
    h1: &PauliSum,
    h2: &PauliSum,
    theta_true: f64,
    policy: &BlackBoxPolicy,
    noise: &NoiseModel,
    trial: u64,
) -> Result<RunRecord> {
    policy.validate()?;
    noise.validate()?;
    let probe = Dqc1Probe::new(h0, h1, h2)?;
    let f = probe.frequency();
    let mut oracle = BlackBoxOracle::new(probe.evolution(theta_true), probe.readout().clone(), f * theta_true, *noise, trial)
        .with_compensation(h0, f)?;
    let scaled = BlackBoxPolicy { target_precision: policy.target_precision * f, ..*policy };
    let theta0 = draw_prior(f * theta_true, &scaled, &mut noise.stream(trial, 0));
    Ok(run_blackbox(&mut oracle, theta0, &scaled, trial)?.rescaled(f))
}

/// Compensated zoom-in against any oracle that accepts phase offsets.
pub fn run_blackbox<O: PhaseOracle + ?Sized>(
    oracle: &mut O,
    theta0_hat: f64,
    policy: &BlackBoxPolicy,
    trial: u64,
) -> Result<RunRecord> {
    policy.validate()?;
    let truth = oracle.truth();
    let mut record = RunRecord::new(trial, truth, theta0_hat, policy.target_precision);
    let mut state = init_discrete(theta0_hat, policy)?;
    let mut zoom = state.first_zoom();
    loop {
        let step = record.steps.len() as u64 + 1;
        let reading = oracle.measure(zoom.q as f64, 2.0 * zoom.phase_comp, SignalKind::Cos, step)?;
        state = discrete_update_with_std(&state, &zoom, reading.x, reading.std)?;
        record.resource += zoom.q as f64;
        record.runs += reading.runs;
        let center = FRAC_PI_2 + 2.0 * PI * zoom.winding as f64;
        record.steps.push(StepRecord {
            step: record.steps.len() + 1,
            signal: SignalKind::Cos,
            t: zoom.q as f64,
            winding: zoom.winding,
            ratio: zoom.ratio,
            phase_comp: zoom.phase_comp,
            x: reading.x,
            theta_hat: state.theta_hat,
            scaled_dev: state.sigma,
            precision: state.precision(),
            resource: record.resource,
            outlier: reading.x.abs() > 1.0 + 5.0 * reading.std,
            phase_offset: 2.0 * truth * zoom.q as f64 + 2.0 * zoom.phase_comp - center,
            trotter: reading.trotter,
        });
        if state.precision() <= policy.target_precision {
            record.converged = true;
            break;
        }
        if record.steps.len() >= policy.max_steps {
            break;
        }
        zoom = discrete_schedule(&state, policy)?;
    }
    Ok(record)
}

/// Power in `(⌊m·b/2⌋, m·b]` whose predicted phase `2θ̂m` has the steepest cosine.
pub fn steepest_power(theta_hat: f64, m_prev: u64, b: u64) -> Result<u64> {
    let hi = m_prev
        .checked_mul(b)
        .ok_or_else(|| Error::InvalidParameter(format!("power {m_prev} * {b} overflows")))?;
    let lo = (hi / 2 + 1).max(m_prev + 1);
    Ok((lo..=hi)
        .rev()
        .max_by(|&a, &c| {
            let sa = (2.0 * theta_hat * a as f64).sin().abs();
            let sc = (2.0 * theta_hat * c as f64).sin().abs();
            sa.total_cmp(&sc)
        })
        .unwrap_or(hi))
}

/// Zoom-in without phase compensation, for black boxes whose rotation axis
/// is unknown. Each reading is linearized at its own predicted phase.
pub fn run_uncompensated<O: PhaseOracle + ?Sized>(
    oracle: &mut O,
    theta0_hat: f64,
    policy: &BlackBoxPolicy,
    trial: u64,
) -> Result<RunRecord> {
    policy.validate()?;
    if !(theta0_hat > 0.0 && theta0_hat < FRAC_PI_4) {
        return Err(Error::Precondition(format!("prior mean {theta0_hat} outside (0, pi/4)")));
    }
    let truth = oracle.truth();
    let mut record = RunRecord::new(trial, truth, theta0_hat, policy.target_precision);
    let mut theta = theta0_hat;
    let mut sigma = policy.prior_std();
    let mut m_prev = 0u64;
    while record.steps.len() < policy.max_steps {
        let m = if m_prev == 0 { 1 } else { steepest_power(theta, m_prev, policy.b)? };
        let step = record.steps.len() as u64 + 1;
        let reading = oracle.measure(m as f64, 0.0, SignalKind::Cos, step)?;
        let predicted = 2.0 * theta * m as f64;
        let u = linearized_update(theta, sigma, m as f64, 0.0, SignalKind::Cos, reading.x, reading.std)?;
        record.resource += m as f64;
        record.runs += reading.runs;
        record.steps.push(StepRecord {
            step: record.steps.len() + 1,
            signal: SignalKind::Cos,
            t: m as f64,
            winding: (predicted / (2.0 * PI)).floor() as i64,
            ratio: if m_prev == 0 { 1.0 } else { m as f64 / m_prev as f64 },
            phase_comp: 0.0,
            x: reading.x,
            theta_hat: u.theta_hat,
            scaled_dev: u.scaled_dev,
            precision: u.precision,
            resource: record.resource,
            outlier: reading.x.abs() > 1.0 + 5.0 * reading.std,
            phase_offset: 2.0 * truth * m as f64 - predicted,
            trotter: reading.trotter,
        });
        theta = u.theta_hat;
        sigma = u.precision;
        m_prev = m;
        if sigma <= policy.target_precision {
            record.converged = true;
            break;
        }
    }
    Ok(record)
}
