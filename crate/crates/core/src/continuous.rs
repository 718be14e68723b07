//! Adaptive zoom-in estimation with continuous evolution times.
//!
//! Each step picks `T_l` so that the predicted phase `2θ̂T_l` sits exactly at
//! `π/2 + 2p_lπ`, where the cosine is steepest, and folds the noisy reading
//! into a Gaussian posterior. The winding `p_l` grows so that consecutive
//! times differ by a factor of at most `c′`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{Dqc1Probe, NoiseModel};
use crate::oracle::{PhaseOracle, ProbeOracle};
use crate::pauli::PauliSum;
use crate::posterior::{linearized_update, wraparound_mass, SignalKind};
use crate::record::{RunRecord, StepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomPolicy {
    /// Prior phase width multiplier: the phase prior at `T_1` has std `cΔ`.
    pub c: f64,
    /// Largest allowed ratio `T_{l+1}/T_l`.
    pub c_prime: f64,
    pub delta: f64,
    /// Stop once the posterior std of `θ` is at most this.
    pub target_precision: f64,
    /// `χ`: smallest prior mean handled by the cosine schedule.
    pub theta_floor: f64,
    pub max_steps: usize,
}

impl Default for ZoomPolicy {
    fn default() -> Self {
        Self { c: 10.0, c_prime: 10.0, delta: 1e-3, target_precision: 1e-6, theta_floor: 0.05, max_steps: 60 }
    }
}

impl ZoomPolicy {
    /// Every violated constraint, empty when the policy is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            v.push(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            v.push(format!("c must be positive, got {}", self.c));
        }
        if !(self.c_prime >= self.c) {
            v.push(format!("c' = {} must be at least c = {}", self.c_prime, self.c));
        }
        if !(self.c_prime > 5.0) {
            v.push(format!("c' = {} must exceed 5", self.c_prime));
        }
        if !(self.c * self.delta <= 0.1) {
            v.push(format!("c*delta = {} must be at most 0.1", self.c * self.delta));
        }
        if !(self.target_precision > 0.0) {
            v.push(format!("target precision must be positive, got {}", self.target_precision));
        }
        if !(self.theta_floor > 0.0 && self.theta_floor < PI) {
            v.push(format!("theta floor must lie in (0, pi), got {}", self.theta_floor));
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

    /// Linearization error bound `(c′Δ)³/6`.
    pub fn linearization_bound(&self) -> f64 {
        (self.c_prime * self.delta).powi(3) / 6.0
    }

    /// Prior std of `θ̂_0` under the calibration convention `cΔ/(2T_1)`, with
    /// `T_1` evaluated at `max(θ, χ)`.
    pub fn prior_std(&self, theta: f64) -> f64 {
        self.c * self.delta / (2.0 * first_time(theta.max(self.theta_floor)))
    }
}

/// `T_1 = π/(4θ̂_0)`
pub fn first_time(theta0_hat: f64) -> f64 {
    FRAC_PI_4 / theta0_hat
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zoom {
    pub t: f64,
    pub winding: i64,
    /// `T_next/T_l`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub step: usize,
    pub theta_hat: f64,
    /// `Δ_l`: posterior std of the phase `2θT_l`.
    pub scaled_dev: f64,
    pub t_current: f64,
    pub winding: i64,
    pub history: Vec<StepRecord>,
}

impl EstimatorState {
    /// Posterior std of `θ`.
    pub fn precision(&self) -> f64 {
        self.scaled_dev / (2.0 * self.t_current)
    }

    /// Schedule of the first measurement: the time prepared by `init_schedule`.
    pub fn first_zoom(&self) -> Zoom {
        Zoom { t: self.t_current, winding: self.winding, ratio: 1.0 }
    }
}

/// Prior state before any measurement, centered on `θ̂_0` with phase width `cΔ` at `T_1`.
pub fn init_schedule(theta0_hat: f64, policy: &ZoomPolicy) -> Result<EstimatorState> {
    if !(theta0_hat >= policy.theta_floor) {
        return Err(Error::Precondition(format!(
            "prior mean {theta0_hat} is below the floor {}; use the sine-based start",
            policy.theta_floor
        )));
    }
    if !(theta0_hat < PI) {
        return Err(Error::Precondition(format!("prior mean {theta0_hat} must be below pi")));
    }
    Ok(EstimatorState {
        step: 0,
        theta_hat: theta0_hat,
        scaled_dev: policy.c * policy.delta,
        t_current: first_time(theta0_hat),
        winding: 0,
        history: Vec::new(),
    })
}

/// Posterior after reading `x` at `zoom`, with per-run noise `policy.delta`.
pub fn posterior_update(state: &EstimatorState, zoom: &Zoom, x: f64, policy: &ZoomPolicy) -> Result<EstimatorState> {
    posterior_update_with_std(state, zoom, x, policy.delta, policy)
}

/// Conjugate update with an explicit likelihood std `s`:
/// `a′ = aΔ_{l−1}/s`, `2θ̂_lT_l = π/2 + 2p_lπ − a′²/(1+a′²)·x`, `Δ_l = s·a′/√(1+a′²)`.
pub fn posterior_update_with_std(
    state: &EstimatorState,
    zoom: &Zoom,
    x: f64,
    s: f64,
    _policy: &ZoomPolicy,
) -> Result<EstimatorState> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("likelihood std must be positive, got {s}")));
    }
    let a_eff = zoom.ratio * state.scaled_dev / s;
    let gain = a_eff * a_eff / (1.0 + a_eff * a_eff);
    let center = FRAC_PI_2 + 2.0 * PI * zoom.winding as f64;
    let mut next = state.clone();
    next.step += 1;
    next.theta_hat = (center - gain * x) / (2.0 * zoom.t);
    next.scaled_dev = s * a_eff / (1.0 + a_eff * a_eff).sqrt();
    next.t_current = zoom.t;
    next.winding = zoom.winding;
    Ok(next)
}

/// Largest winding `p` with `T_next/T_l ≤ c′`, where `2θ̂_l·T_next = π/2 + 2pπ`.
pub fn next_zoom(state: &EstimatorState, policy: &ZoomPolicy) -> Result<Zoom> {
    if !(state.theta_hat > 0.0) {
        return Err(Error::Collapsed(format!("estimate {} is not positive", state.theta_hat)));
    }
    let r = 4.0 * state.theta_hat * state.t_current / PI;
    let winding = ((policy.c_prime * r - 1.0) / 4.0).floor();
    let t = (FRAC_PI_2 + 2.0 * PI * winding) / (2.0 * state.theta_hat);
    let ratio = t / state.t_current;
    if winding < 0.0 || !(ratio > 1.0) {
        return Err(Error::Collapsed(format!(
            "estimate {} leaves no zoom step above T = {}",
            state.theta_hat, state.t_current
        )));
    }
    Ok(Zoom { t, winding: winding as i64, ratio })
}

/// `θ̂_0 = θ + N(0, prior_std²)`
pub fn draw_prior<R: Rng + ?Sized>(theta_true: f64, policy: &ZoomPolicy, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    theta_true + policy.prior_std(theta_true) * z
}

/// Stream index reserved for the prior draw; measurements use `1..`.
pub const PRIOR_STEP: u64 = 0;

/// Full simulated run: draws `θ̂_0`, then zooms until the target precision.
pub fn run_estimation(
    h0: &PauliSum,
    h1: &PauliSum,
    h2: &PauliSum,
    theta_true: f64,
    policy: &ZoomPolicy,
    noise: &NoiseModel,
    trial: u64,
) -> Result<RunRecord> {
    let probe = Dqc1Probe::new(h0, h1, h2)?;
    run_with_probe(&probe, theta_true, policy, noise, trial)
}

pub fn run_with_probe(
    probe: &Dqc1Probe,
    theta_true: f64,
    policy: &ZoomPolicy,
    noise: &NoiseModel,
    trial: u64,
) -> Result<RunRecord> {
    policy.validate()?;
    noise.validate()?;
    let f = probe.frequency();
    if !(f > 0.0) {
        return Err(Error::Precondition(format!("probe frequency {f} must be positive")));
    }
    let mut oracle = ProbeOracle::new(probe, theta_true, *noise, trial);
    let scaled = ZoomPolicy { target_precision: policy.target_precision * f, ..*policy };
    let theta0 = draw_prior(f * theta_true, &scaled, &mut noise.stream(trial, PRIOR_STEP));
    Ok(run_zoom(&mut oracle, theta0, &scaled, trial)?.rescaled(f))
}

/// Drives any continuous-time oracle from the prior mean `theta0_hat`.
///
/// Prior means below `χ` start with sine readings at times short enough that
/// the phase stays in the linear region, then hand over to the cosine
/// schedule at winding 0 once `π/(4θ̂)` is within one zoom factor.
pub fn run_zoom<O: PhaseOracle + ?Sized>(
    oracle: &mut O,
    theta0_hat: f64,
    policy: &ZoomPolicy,
    trial: u64,
) -> Result<RunRecord> {
    policy.validate()?;
    let truth = oracle.truth();
    let mut record = RunRecord::new(trial, truth, theta0_hat, policy.target_precision);

    let mut state = if theta0_hat >= policy.theta_floor {
        init_schedule(theta0_hat, policy)?
    } else {
        match sine_start(oracle, theta0_hat, policy, &mut record)? {
            Some(state) => state,
            None => return Ok(record),
        }
    };
    let mut pending = Some(state.first_zoom());

    while record.steps.len() < policy.max_steps {
        let zoom = match pending.take() {
            Some(z) => z,
            None => match next_zoom(&state, policy) {
                Ok(z) => z,
                Err(e) => {
                    record.failure = Some(e.to_string());
                    return Ok(record);
                }
            },
        };
        let step = record.steps.len() as u64 + 1;
        let reading = oracle.measure(zoom.t, 0.0, SignalKind::Cos, step)?;
        state = posterior_update_with_std(&state, &zoom, reading.x, reading.std, policy)?;
        record.resource += zoom.t;
        record.runs += reading.runs;
        let center = FRAC_PI_2 + 2.0 * PI * zoom.winding as f64;
        record.steps.push(StepRecord {
            step: record.steps.len() + 1,
            signal: SignalKind::Cos,
            t: zoom.t,
            winding: zoom.winding,
            ratio: zoom.ratio,
            phase_comp: 0.0,
            x: reading.x,
            theta_hat: state.theta_hat,
            scaled_dev: state.scaled_dev,
            precision: state.precision(),
            resource: record.resource,
            outlier: reading.x.abs() > 1.0 + 5.0 * reading.std,
            phase_offset: 2.0 * truth * zoom.t - center,
            trotter: reading.trotter,
        });
        if state.precision() <= policy.target_precision {
            record.converged = true;
            break;
        }
    }
    Ok(record)
}

/// Sine readings for a prior mean below `χ`. Returns the state to continue
/// with on the cosine schedule, or `None` when the run finished (converged
/// or out of steps) on sine readings alone.
fn sine_start<O: PhaseOracle + ?Sized>(
    oracle: &mut O,
    theta0_hat: f64,
    policy: &ZoomPolicy,
    record: &mut RunRecord,
) -> Result<Option<EstimatorState>> {
    let truth = oracle.truth();
    let mut theta = theta0_hat;
    let mut sigma = policy.prior_std(theta0_hat);
    let mut t_prev: Option<f64> = None;
    // Keeps 2θT within π/4 across three prior widths, where sin is near-linear.
    let cap = |theta: f64, sigma: f64| FRAC_PI_4 / (2.0 * (theta.max(0.0) + 3.0 * sigma));

    while record.steps.len() < policy.max_steps {
        let t = match t_prev {
            None => (policy.c * policy.delta / (2.0 * sigma)).min(cap(theta, sigma)),
            Some(tp) => {
                if theta > 0.0 && first_time(theta) <= policy.c_prime * tp {
                    let t1 = first_time(theta);
                    return Ok(Some(EstimatorState {
                        step: record.steps.len(),
                        theta_hat: theta,
                        scaled_dev: 2.0 * t1 * sigma,
                        t_current: t1,
                        winding: 0,
                        history: record.steps.clone(),
                    }));
                }
                (policy.c_prime * tp).min(cap(theta, sigma)).max(tp)
            }
        };
        let step = record.steps.len() as u64 + 1;
        let reading = oracle.measure(t, 0.0, SignalKind::Sin, step)?;
        let predicted = 2.0 * theta * t;
        let u = linearized_update(theta, sigma, t, 0.0, SignalKind::Sin, reading.x, reading.std)?;
        record.resource += t;
        record.runs += reading.runs;
        record.steps.push(StepRecord {
            step: record.steps.len() + 1,
            signal: SignalKind::Sin,
            t,
            winding: 0,
            ratio: t_prev.map_or(1.0, |tp| t / tp),
            phase_comp: 0.0,
            x: reading.x,
            theta_hat: u.theta_hat,
            scaled_dev: u.scaled_dev,
            precision: u.precision,
            resource: record.resource,
            outlier: reading.x.abs() > 1.0 + 5.0 * reading.std,
            phase_offset: 2.0 * truth * t - predicted,
            trotter: reading.trotter,
        });
        theta = u.theta_hat;
        sigma = u.precision;
        t_prev = Some(t);
        if sigma <= policy.target_precision {
            record.converged = true;
            return Ok(None);
        }
    }
    Ok(None)
}

/// Zoom-in handed an already-drawn prior mean; used by callers that manage
/// their own prior draws.
pub fn run_from_prior(
    probe: &Dqc1Probe,
    theta_true: f64,
    theta0_hat: f64,
    policy: &ZoomPolicy,
    noise: &NoiseModel,
    trial: u64,
) -> Result<RunRecord> {
    let f = probe.frequency();
    let mut oracle = ProbeOracle::new(probe, theta_true, *noise, trial);
    let scaled = ZoomPolicy { target_precision: policy.target_precision * f, ..*policy };
    Ok(run_zoom(&mut oracle, f * theta0_hat, &scaled, trial)?.rescaled(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(c: f64, delta: f64) -> ZoomPolicy {
        ZoomPolicy { c, c_prime: c.max(10.0), delta, ..ZoomPolicy::default() }
    }

    #[test]
    fn first_time_examples() {
        let p = ZoomPolicy { theta_floor: 0.1, ..ZoomPolicy::default() };
        assert!((init_schedule(FRAC_PI_2, &p).unwrap().t_current - 0.5).abs() < 1e-15);
        assert!((init_schedule(0.1, &p).unwrap().t_current - PI / 0.4).abs() < 1e-12);
        let t = init_schedule(PI - 1e-6, &p).unwrap().t_current;
        assert!(t > 0.25 && t - 0.25 < 1e-6);
        assert!(matches!(init_schedule(0.09, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_innovation_keeps_estimate() {
        let p = policy(10.0, 1e-3);
        let s0 = init_schedule(0.7, &p).unwrap();
        let s1 = posterior_update(&s0, &s0.first_zoom(), 0.0, &p).unwrap();
        assert!((s1.theta_hat - 0.7).abs() < 1e-15);
        assert!((s1.scaled_dev - 10.0 * 1e-3 / 101f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn worked_first_update() {
        let p = ZoomPolicy { c: 5.0, c_prime: 10.0, delta: 0.01, ..ZoomPolicy::default() };
        let s0 = init_schedule(FRAC_PI_2, &p).unwrap();
        let s1 = posterior_update(&s0, &s0.first_zoom(), 0.02, &p).unwrap();
        assert!((s1.theta_hat - 1.551565).abs() < 1e-6);
        assert!((s1.scaled_dev - 0.0098058).abs() < 1e-7);
        let (lo, hi) = (s1.theta_hat - 1.96 * s1.precision(), s1.theta_hat + 1.96 * s1.precision());
        assert!((hi - lo - 2.0 * 1.96 * s1.scaled_dev / (2.0 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn first_zoom_reaches_winding_two() {
        let p = policy(10.0, 1e-3);
        let s0 = init_schedule(0.7, &p).unwrap();
        let s1 = posterior_update(&s0, &s0.first_zoom(), 0.0, &p).unwrap();
        let z = next_zoom(&s1, &p).unwrap();
        assert_eq!(z.winding, 2);
        assert!((z.ratio - 9.0).abs() < 1e-12);
        assert_eq!(next_zoom(&s1, &p).unwrap(), z);
        assert!((2.0 * s1.theta_hat * z.t - (FRAC_PI_2 + 4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn zoom_ratio_window_holds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for c_prime in [5.5, 7.0, 10.0, 20.0] {
            let p = ZoomPolicy { c: 5.0, c_prime, delta: 1e-3, ..ZoomPolicy::default() };
            for _ in 0..100 {
                let theta = rng.random_range(0.1..3.0);
                let t = rng.random_range(0.3..50.0);
                let s = EstimatorState { step: 1, theta_hat: theta, scaled_dev: 1e-3, t_current: t, winding: 0, history: vec![] };
                let r = 4.0 * theta * t / PI;
                let z = next_zoom(&s, &p).unwrap();
                assert!(z.ratio <= c_prime + 1e-12);
                assert!(z.ratio > c_prime - 4.0 / r - 1e-12);
            }
        }
    }

    #[test]
    fn collapsed_estimate_is_reported() {
        let p = policy(10.0, 1e-3);
        let s = EstimatorState { step: 1, theta_hat: -0.1, scaled_dev: 1e-3, t_current: 1.0, winding: 0, history: vec![] };
        assert!(matches!(next_zoom(&s, &p), Err(Error::Collapsed(_))));
    }

    #[test]
    fn policy_validation_lists_everything() {
        let bad = ZoomPolicy { c: 200.0, c_prime: 4.0, delta: 1e-3, ..ZoomPolicy::default() };
        let v = bad.violations();
        assert!(v.len() >= 3, "{v:?}");
        assert!(ZoomPolicy::default().validate().is_ok());
    }
}
