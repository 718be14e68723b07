//! Noisy one-clean-qubit readout.
//!
//! Each circuit run returns its exact ancilla expectation plus Gaussian noise
//! of standard deviation `Δ/√K`. Samples are never clipped to `[−1, 1]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{heisenberg_trace, product_matrix, DenseOperator, Spectral};
use crate::error::{Error, Result};
use crate::pauli::{check_su2_triple, find_su2_partner, PauliProduct, PauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-run standard deviation `Δ`.
    pub delta: f64,
    /// Repetitions averaged per reported value.
    pub repetitions: u32,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(delta: f64, repetitions: u32, seed: u64) -> Result<Self> {
        let noise = Self { delta, repetitions, seed };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("noise delta must be positive, got {}", self.delta)));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// `Δ/√K`
    pub fn effective_delta(&self) -> f64 {
        self.delta / (self.repetitions as f64).sqrt()
    }

    /// Independent stream for `(trial, step)` under this model's seed.
    pub fn stream(&self, trial: u64, step: u64) -> ChaCha8Rng {
        stream_rng(self.seed, trial, step)
    }
}

/// Counter-style keyed generator: every `(seed, trial, step)` triple selects a
/// distinct ChaCha key, so parallel trials never share or reorder draws.
pub fn stream_rng(seed: u64, trial: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&step.to_le_bytes());
    key[24..].copy_from_slice(b"dqc1m-v1");
    ChaCha8Rng::from_seed(key)
}

/// One noisy renormalized-trace readout.
pub fn sample_trace_estimate<R: Rng + ?Sized>(true_mean: f64, noise: &NoiseModel, rng: &mut R) -> Result<f64> {
    noise.validate()?;
    if !(true_mean.abs() <= 1.0 + 1e-9) {
        return Err(Error::InvalidParameter(format!("circuit mean {true_mean} outside [-1, 1]")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(true_mean + noise.effective_delta() * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosSinEstimate {
    pub cos_hat: f64,
    pub sin_hat: Option<f64>,
    /// Propagated standard deviation of `cos_hat` (and of `sin_hat`).
    pub effective_delta: f64,
    /// Circuit runs consumed.
    pub runs: usize,
}

/// Which Pauli products are traced against the evolution.
#[derive(Debug, Clone)]
enum Readout {
    /// `tr[W†σ₁Wσ₁]` and `tr[W†σ₁Wσ₂]`: one run each.
    Shortcut { sigma1: DenseOperator, sigma2: DenseOperator },
    /// Full `L²` expansion over the terms of `H₁` (and `H₂`).
    Expanded { h1: Vec<(f64, DenseOperator)>, h2: Vec<(f64, DenseOperator)>, norm_sq: f64 },
}

/// Observable pair whose Heisenberg-picture trace encodes `cos`/`sin` of the
/// accumulated phase, independent of the evolution that is plugged in.
#[derive(Debug, Clone)]
pub struct TraceReadout {
    n: usize,
    readout: Readout,
}

impl TraceReadout {
    pub fn shortcut(sigma1: &PauliProduct, sigma2: &PauliProduct) -> Result<Self> {
        Ok(Self {
            n: sigma1.n(),
            readout: Readout::Shortcut { sigma1: product_matrix(sigma1)?, sigma2: product_matrix(sigma2)? },
        })
    }

    pub fn expanded(h1: &PauliSum, h2: &PauliSum) -> Result<Self> {
        let mats = |h: &PauliSum| -> Result<Vec<(f64, DenseOperator)>> {
            h.terms().iter().map(|&(c, p)| Ok((c, product_matrix(&p)?))).collect()
        };
        Ok(Self {
            n: h1.n(),
            readout: Readout::Expanded { h1: mats(h1)?, h2: mats(h2)?, norm_sq: h1.coeff_norm_sq() },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_shortcut(&self) -> bool {
        matches!(self.readout, Readout::Shortcut { .. })
    }

    /// Circuit runs per cos (or sin) estimate.
    pub fn runs_per_estimate(&self) -> usize {
        match &self.readout {
            Readout::Shortcut { .. } => 1,
            Readout::Expanded { h1, .. } => h1.len() * h1.len(),
        }
    }

    /// Standard deviation of the combined cos estimate given per-run noise.
    pub fn propagated_delta(&self, noise: &NoiseModel) -> f64 {
        match &self.readout {
            Readout::Shortcut { .. } => noise.effective_delta(),
            Readout::Expanded { h1, norm_sq, .. } => {
                let s: f64 = h1
                    .iter()
                    .flat_map(|(a, _)| h1.iter().map(move |(b, _)| (a * b) * (a * b)))
                    .sum();
                noise.effective_delta() * s.sqrt() / norm_sq
            }
        }
    }

    /// Exact `(cos, sin)` for a given evolution `W`.
    pub fn exact(&self, w: &DenseOperator) -> Result<(f64, f64)> {
        match &self.readout {
            Readout::Shortcut { sigma1, sigma2 } => {
                let c = heisenberg_trace(w, sigma1, sigma1)?.normalized.re;
                let s = -heisenberg_trace(w, sigma1, sigma2)?.normalized.re;
                Ok((c, s))
            }
            Readout::Expanded { h1, h2, norm_sq } => {
                let mut c = 0.0;
                let mut s = 0.0;
                for (a, pa) in h1 {
                    for (b, pb) in h1 {
                        c += a * b * heisenberg_trace(w, pa, pb)?.normalized.re;
                    }
                    for (b, pb) in h2 {
                        s -= a * b * heisenberg_trace(w, pa, pb)?.normalized.re;
                    }
                }
                Ok((c / norm_sq, s / norm_sq))
            }
        }
    }

    /// Noisy estimate: each run's exact mean plus independent readout noise,
    /// combined linearly.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        w: &DenseOperator,
        noise: &NoiseModel,
        want_sin: bool,
        rng: &mut R,
    ) -> Result<CosSinEstimate> {
        match &self.readout {
            Readout::Shortcut { sigma1, sigma2 } => {
                let c = heisenberg_trace(w, sigma1, sigma1)?.normalized.re;
                let cos_hat = sample_trace_estimate(c, noise, rng)?;
                let sin_hat = if want_sin {
                    let s = heisenberg_trace(w, sigma1, sigma2)?.normalized.re;
                    Some(-sample_trace_estimate(s, noise, rng)?)
                } else {
                    None
                };
                Ok(CosSinEstimate {
                    cos_hat,
                    sin_hat,
                    effective_delta: noise.effective_delta(),
                    runs: if want_sin { 2 } else { 1 },
                })
            }
            Readout::Expanded { h1, h2, norm_sq } => {
                let mut cos_acc = 0.0;
                let mut sin_acc = 0.0;
                let mut runs = 0;
                for (a, pa) in h1 {
                    for (b, pb) in h1 {
                        let t = heisenberg_trace(w, pa, pb)?.normalized.re;
                        cos_acc += a * b * sample_trace_estimate(t, noise, rng)?;
                        runs += 1;
                    }
                }
                if want_sin {
                    for (a, pa) in h1 {
                        for (b, pb) in h2 {
                            let t = heisenberg_trace(w, pa, pb)?.normalized.re;
                            sin_acc -= a * b * sample_trace_estimate(t, noise, rng)?;
                            runs += 1;
                        }
                    }
                }
                Ok(CosSinEstimate {
                    cos_hat: cos_acc / norm_sq,
                    sin_hat: want_sin.then_some(sin_acc / norm_sq),
                    effective_delta: self.propagated_delta(noise),
                    runs,
                })
            }
        }
    }
}

/// A probe Hamiltonian `H₀` together with the readout that turns the
/// evolution `exp(−iθH₀T)` into `cos(2·f·θT)` and `sin(2·f·θT)`.
///
/// `f` is 1 for a genuine su(2) triple and the coefficient `e^{μ,0}` of the
/// anticommuting term for the single-trace shortcut.
#[derive(Debug, Clone)]
pub struct Dqc1Probe {
    h0: PauliSum,
    spectral: Spectral,
    readout: TraceReadout,
    frequency: f64,
}

impl Dqc1Probe {
    /// Picks the shortcut when `h1` is a single product whose partner is
    /// `h2`, the full `L²` expansion when `(h0, h1, h2)` close as su(2), and
    /// fails otherwise.
    pub fn new(h0: &PauliSum, h1: &PauliSum, h2: &PauliSum) -> Result<Self> {
        if h0.n() != h1.n() || h0.n() != h2.n() {
            return Err(Error::DimensionMismatch { left: h0.n(), right: if h0.n() != h1.n() { h1.n() } else { h2.n() } });
        }
        if let (Some((1.0, s1)), Some(_)) = (h1.as_single(), h2.as_single()) {
            if let Ok((mu, partner)) = find_su2_partner(h0, &s1) {
                if PauliSum::from_product(1.0, partner)?.approx_eq(h2, 1e-12) {
                    return Self::shortcut_at(h0, &s1, mu, partner);
                }
            }
        }
        if check_su2_triple(h0, h1, h2)? {
            return Ok(Self {
                h0: h0.clone(),
                spectral: Spectral::of_sum(h0)?,
                readout: TraceReadout::expanded(h1, h2)?,
                frequency: 1.0,
            });
        }
        Err(Error::Precondition(format!(
            "({h0}, {h1}, {h2}) is neither an su(2) triple nor a single-trace shortcut"
        )))
    }

    /// Shortcut from `h0` and `σ₁` alone; the partner `σ₂` is constructed.
    pub fn shortcut(h0: &PauliSum, sigma1: &PauliProduct) -> Result<Self> {
        let (mu, partner) = find_su2_partner(h0, sigma1)?;
        Self::shortcut_at(h0, sigma1, mu, partner)
    }

    fn shortcut_at(h0: &PauliSum, sigma1: &PauliProduct, mu: usize, sigma2: PauliProduct) -> Result<Self> {
        Ok(Self {
            h0: h0.clone(),
            spectral: Spectral::of_sum(h0)?,
            readout: TraceReadout::shortcut(sigma1, &sigma2)?,
            frequency: h0.terms()[mu].0,
        })
    }

    pub fn h0(&self) -> &PauliSum {
        &self.h0
    }

    pub fn readout(&self) -> &TraceReadout {
        &self.readout
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// `exp(−i·θT·H₀)`
    pub fn evolution(&self, theta_t: f64) -> DenseOperator {
        self.spectral.exp_i(theta_t)
    }

    pub fn exact(&self, theta_t: f64) -> Result<(f64, f64)> {
        self.readout.exact(&self.evolution(theta_t))
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        theta_t: f64,
        noise: &NoiseModel,
        want_sin: bool,
        rng: &mut R,
    ) -> Result<CosSinEstimate> {
        self.readout.sample(&self.evolution(theta_t), noise, want_sin, rng)
    }
}

/// Noisy estimate of `cos(2θT)` (and optionally `sin(2θT)`); `theta_true` is
/// used only to build the circuit means.
pub fn estimate_cos_sin<R: Rng + ?Sized>(
    h0: &PauliSum,
    h1: &PauliSum,
    h2: &PauliSum,
    theta_true: f64,
    t: f64,
    noise: &NoiseModel,
    want_sin: bool,
    rng: &mut R,
) -> Result<CosSinEstimate> {
    Dqc1Probe::new(h0, h1, h2)?.sample(theta_true * t, noise, want_sin, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(e: &[&str]) -> PauliSum {
        PauliSum::parse_terms(e).unwrap()
    }

    #[test]
    fn degenerate_noise_returns_mean() {
        let noise = NoiseModel::new(1e-15, 1, 3).unwrap();
        let mut rng = noise.stream(0, 0);
        let v = sample_trace_estimate(0.25, &noise, &mut rng).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn seeded_draws_repeat() {
        let noise = NoiseModel::new(0.01, 1, 42).unwrap();
        let a = sample_trace_estimate(0.5, &noise, &mut noise.stream(7, 3)).unwrap();
        let b = sample_trace_estimate(0.5, &noise, &mut noise.stream(7, 3)).unwrap();
        let c = sample_trace_estimate(0.5, &noise, &mut noise.stream(7, 4)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(NoiseModel::new(0.0, 1, 0).is_err());
        assert!(NoiseModel::new(-1.0, 1, 0).is_err());
        assert!(NoiseModel::new(0.1, 0, 0).is_err());
        let noise = NoiseModel { delta: 0.0, repetitions: 1, seed: 0 };
        assert!(sample_trace_estimate(0.0, &noise, &mut stream_rng(0, 0, 0)).is_err());
    }

    #[test]
    fn sample_std_matches_repetition_scaling() {
        let noise = NoiseModel::new(0.2, 4, 11).unwrap();
        let mut rng = noise.stream(0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_trace_estimate(0.0, &noise, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = 0.2 / 2.0;
        assert!((var.sqrt() / target - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn zero_angle_gives_unit_cosine() {
        let noise = NoiseModel::new(1e-3, 1, 5).unwrap();
        let est = estimate_cos_sin(&sum(&["Z"]), &sum(&["X"]), &sum(&["Y"]), 0.0, 1.0, &noise, true, &mut noise.stream(0, 0))
            .unwrap();
        assert!((est.cos_hat - 1.0).abs() < 3.0 * est.effective_delta);
        assert!(est.sin_hat.unwrap().abs() < 3.0 * est.effective_delta);
    }

    #[test]
    fn field_shortcut_estimate() {
        let noise = NoiseModel::new(1e-3, 1, 9).unwrap();
        let h0 = sum(&["ZI", "IZ"]);
        let est = estimate_cos_sin(&h0, &sum(&["XI"]), &sum(&["YI"]), 0.3, 1.0, &noise, true, &mut noise.stream(0, 0))
            .unwrap();
        assert_eq!(est.runs, 2);
        assert!((est.cos_hat - 0.825336).abs() < 3e-3);
        assert!((est.sin_hat.unwrap() - 0.6f64.sin()).abs() < 3e-3);
    }

    #[test]
    fn non_triple_rejected() {
        let noise = NoiseModel::new(1e-3, 1, 9).unwrap();
        let err = estimate_cos_sin(&sum(&["Z"]), &sum(&["X"]), &sum(&["Z"]), 0.3, 1.0, &noise, false, &mut noise.stream(0, 0));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn shortcut_frequency_is_term_coefficient() {
        let probe = Dqc1Probe::shortcut(&sum(&["0.5*ZI", "2*IZ"]), &"XI".parse().unwrap()).unwrap();
        assert_eq!(probe.frequency(), 0.5);
        let (c, s) = probe.exact(1.3).unwrap();
        assert!((c - (2.0 * 0.5 * 1.3f64).cos()).abs() < 1e-12);
        assert!((s - (2.0 * 0.5 * 1.3f64).sin()).abs() < 1e-12);
    }
}
