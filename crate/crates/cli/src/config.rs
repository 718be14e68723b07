//! Experiment configuration: a TOML file with one table per concern.
//!
//! Every table is optional and falls back to the defaults below. Pauli sums
//! are string arrays of `coeff * "STRING"` entries.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use dqc1m_core::continuous::ZoomPolicy;
use dqc1m_core::dense::TrotterOrder;
use dqc1m_core::discrete::BlackBoxPolicy;
use dqc1m_core::frame::FrameMisalignment;
use dqc1m_core::measurement::{Dqc1Probe, NoiseModel};
use dqc1m_core::multiparam::{select_decoupler, select_readout, MultiHamiltonian};
use dqc1m_core::pauli::PauliSum;
use dqc1m_core::search::MAX_SEARCH_QUBITS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trace,
    EstimateContinuous,
    EstimateDiscrete,
    Multiparam,
    FrameAlign,
    SearchBound,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Trace,
        Mode::EstimateContinuous,
        Mode::EstimateDiscrete,
        Mode::Multiparam,
        Mode::FrameAlign,
        Mode::SearchBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Trace => "trace",
            Mode::EstimateContinuous => "estimate-continuous",
            Mode::EstimateDiscrete => "estimate-discrete",
            Mode::Multiparam => "multiparam",
            Mode::FrameAlign => "frame-align",
            Mode::SearchBound => "search-bound",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub trials: u64,
    pub seed: u64,
    pub output: String,
    pub hamiltonian: HamiltonianSpec,
    pub truth: TruthSpec,
    pub noise: NoiseSpec,
    pub policy: PolicySpec,
    pub trotter: TrotterSpec,
    pub frame: FrameSpec,
    pub search: SearchSpec,
    pub trace: TraceSpec,
    pub campaign: CampaignSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            trials: 100,
            seed: 0,
            output: "out".into(),
            hamiltonian: HamiltonianSpec::default(),
            truth: TruthSpec::default(),
            noise: NoiseSpec::default(),
            policy: PolicySpec::default(),
            trotter: TrotterSpec::default(),
            frame: FrameSpec::default(),
            search: SearchSpec::default(),
            trace: TraceSpec::default(),
            campaign: CampaignSpec::default(),
        }
    }
}

/// `h0`, `h1`, `h2` form the probe triple; `terms` lists the parameters of
/// a multiparameter Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub h0: Vec<String>,
    pub h1: Vec<String>,
    pub h2: Vec<String>,
    pub terms: Vec<String>,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        Self {
            h0: vec!["1 * \"Z\"".into()],
            h1: vec!["1 * \"X\"".into()],
            h2: vec!["1 * \"Y\"".into()],
            terms: vec!["0.3 * \"ZI\"".into(), "0.7 * \"XX\"".into()],
        }
    }
}

/// Hidden values. `phi`/`psi` are the outer Euler angles for frame alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self { theta: 0.7, phi: 0.4, psi: -1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub delta: f64,
    pub repetitions: u32,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { delta: 1e-3, repetitions: 1 }
    }
}

/// Zoom policy shared by the estimators. Each entry of `target_precision`
/// is a separate sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySpec {
    pub c: f64,
    pub c_prime: f64,
    pub b: u64,
    pub theta_floor: f64,
    pub target_precision: Vec<f64>,
    pub max_steps: usize,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self { c: 10.0, c_prime: 10.0, b: 8, theta_floor: 0.05, target_precision: vec![1e-6], max_steps: 60 }
    }
}

impl PolicySpec {
    pub fn zoom(&self, delta: f64, target: f64) -> ZoomPolicy {
        ZoomPolicy {
            c: self.c,
            c_prime: self.c_prime,
            delta,
            target_precision: target,
            theta_floor: self.theta_floor,
            max_steps: self.max_steps,
        }
    }

    pub fn black_box(&self, delta: f64, target: f64) -> BlackBoxPolicy {
        BlackBoxPolicy { b: self.b, delta, c: self.c, target_precision: target, max_steps: self.max_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotterSpec {
    pub order: u32,
    /// Minimum slice count.
    pub slices: u64,
    /// Per-measurement bound on `2‖W − W̃‖`; slices grow to meet it.
    pub error_budget: Option<f64>,
}

impl Default for TrotterSpec {
    fn default() -> Self {
        Self { order: 2, slices: 64, error_budget: Some(1e-4) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameChoice {
    Uniparametric,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    pub kind: FrameChoice,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { kind: FrameChoice::Uniparametric }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterleaveChoice {
    /// Phase-kickback chain; with no `calls` given, the fewest calls that
    /// detect the oracle in one repetition.
    Kickback,
    /// Haar interleaves, brickwork beyond the Haar dimension cap.
    Random,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    pub n: Vec<usize>,
    pub marked: usize,
    pub oracle_phase: f64,
    pub interleave: InterleaveChoice,
    pub calls: Vec<usize>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { n: vec![4, 5, 6, 7, 8], marked: 1, oracle_phase: PI, interleave: InterleaveChoice::Kickback, calls: Vec::new() }
    }
}

/// Evolution times at which trace mode samples the readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub times: Vec<f64>,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self { times: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSpec {
    /// Exit with status 3 when the non-converged fraction exceeds this.
    pub max_nonconverged_fraction: f64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self { max_nonconverged_fraction: 0.0 }
    }
}

/// Everything wrong with a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Parsed model objects for a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub noise: NoiseModel,
    pub h0: Option<PauliSum>,
    pub h1: Option<PauliSum>,
    pub h2: Option<PauliSum>,
    pub probe: Option<Dqc1Probe>,
    pub multi: Option<MultiHamiltonian>,
    pub frame: Option<FrameMisalignment>,
    pub order: Option<TrotterOrder>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ValidationReport> {
        toml::from_str(text).map_err(|e| ValidationReport { violations: vec![format!("parse error: {e}")] })
    }

    /// Canonical TOML of the effective configuration. The output location
    /// is left out so relocated campaigns hash alike.
    pub fn canonical(&self) -> String {
        let content = Self { output: String::new(), ..self.clone() };
        toml::to_string(&content).expect("configuration serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every precondition the selected mode will meet, returning all
    /// violations at once.
    pub fn validate(&self, mode: Mode) -> Result<Resolved, ValidationReport> {
        let mut v = Vec::new();
        if let Some(m) = self.mode {
            if m != mode {
                v.push(format!("config declares mode {m} but {mode} was requested"));
            }
        }
        let noise = NoiseModel { delta: self.noise.delta, repetitions: self.noise.repetitions, seed: self.seed };
        if let Err(e) = noise.validate() {
            v.push(e.to_string());
        }
        if !(self.campaign.max_nonconverged_fraction >= 0.0 && self.campaign.max_nonconverged_fraction <= 1.0) {
            v.push(format!(
                "campaign.max_nonconverged_fraction = {} must lie in [0, 1]",
                self.campaign.max_nonconverged_fraction
            ));
        }
        let mut resolved = Resolved { mode, noise, h0: None, h1: None, h2: None, probe: None, multi: None, frame: None, order: None };

        let parse = |name: &str, entries: &[String], v: &mut Vec<String>| -> Option<PauliSum> {
            match PauliSum::parse_terms(entries) {
                Ok(s) if !s.is_empty() => Some(s),
                Ok(_) => {
                    v.push(format!("hamiltonian.{name} has no nonzero terms"));
                    None
                }
                Err(e) => {
                    v.push(format!("hamiltonian.{name}: {e}"));
                    None
                }
            }
        };

        let needs_triple = matches!(mode, Mode::Trace | Mode::EstimateContinuous | Mode::EstimateDiscrete | Mode::FrameAlign);
        if needs_triple {
            resolved.h0 = parse("h0", &self.hamiltonian.h0, &mut v);
            resolved.h1 = parse("h1", &self.hamiltonian.h1, &mut v);
            resolved.h2 = parse("h2", &self.hamiltonian.h2, &mut v);
            if let (Some(h0), Some(h1), Some(h2)) = (&resolved.h0, &resolved.h1, &resolved.h2) {
                match Dqc1Probe::new(h0, h1, h2) {
                    Ok(p) => resolved.probe = Some(p),
                    Err(e) => v.push(format!("hamiltonian: {e}")),
                }
            }
        }

        let targets_needed = matches!(
            mode,
            Mode::EstimateContinuous | Mode::EstimateDiscrete | Mode::Multiparam | Mode::FrameAlign
        );
        if targets_needed {
            if self.policy.target_precision.is_empty() {
                v.push("policy.target_precision needs at least one value".into());
            }
            if let Some(t) = self.policy.target_precision.iter().find(|t| !(**t > 0.0)) {
                v.push(format!("policy.target_precision entries must be positive, got {t}"));
            }
        }
        let target0 = self.policy.target_precision.iter().copied().find(|t| *t > 0.0).unwrap_or(1e-6);
        let zoom_checks = |v: &mut Vec<String>| {
            v.extend(self.policy.zoom(self.noise.delta, target0).violations().into_iter().map(|s| format!("policy: {s}")));
        };
        let black_box_checks = |v: &mut Vec<String>| {
            v.extend(
                self.policy.black_box(self.noise.delta, target0).violations().into_iter().map(|s| format!("policy: {s}")),
            );
        };
        let theta = self.truth.theta;
        let freq = resolved.probe.as_ref().map(|p| p.frequency());

        match mode {
            Mode::Trace => {
                if self.trace.times.is_empty() {
                    v.push("trace.times needs at least one value".into());
                }
                if self.trace.times.iter().any(|t| !t.is_finite()) {
                    v.push("trace.times entries must be finite".into());
                }
                if !theta.is_finite() {
                    v.push(format!("truth.theta = {theta} must be finite"));
                }
            }
            Mode::EstimateContinuous => {
                zoom_checks(&mut v);
                if let Some(f) = freq {
                    let phase = f * theta;
                    if !(phase > 0.0 && phase < FRAC_PI_2) {
                        v.push(format!("probe phase rate f*theta = {phase} must lie in (0, pi/2)"));
                    }
                }
            }
            Mode::EstimateDiscrete => {
                black_box_checks(&mut v);
                if let Some(f) = freq {
                    check_window(&mut v, "f*theta", f * theta, 3.0 * self.policy.c * self.noise.delta);
                }
            }
            Mode::FrameAlign => {
                black_box_checks(&mut v);
                check_window(&mut v, "2*theta", 2.0 * theta, 3.0 * self.policy.c * self.noise.delta);
                if let (Some(h0), Some(h1), Some(h2)) = (&resolved.h0, &resolved.h1, &resolved.h2) {
                    let built = match self.frame.kind {
                        FrameChoice::Uniparametric => FrameMisalignment::uniparametric(theta, h0.clone(), h1.clone(), h2.clone()),
                        FrameChoice::Euler => {
                            FrameMisalignment::euler(self.truth.phi, theta, self.truth.psi, h0.clone(), h1.clone(), h2.clone())
                        }
                    };
                    match built {
                        Ok(m) => resolved.frame = Some(m),
                        Err(e) => v.push(format!("frame: {e}")),
                    }
                    if h0.n() > 10 {
                        v.push(format!("frame alignment simulates at most 10 probe qubits, got {}", h0.n()));
                    }
                }
            }
            Mode::Multiparam => {
                zoom_checks(&mut v);
                let order = TrotterOrder::from_p(self.trotter.order);
                match order {
                    Ok(o) => resolved.order = Some(o),
                    Err(e) => v.push(format!("trotter.order: {e}")),
                }
                if self.trotter.slices == 0 {
                    v.push("trotter.slices must be at least 1".into());
                }
                if let Some(b) = self.trotter.error_budget {
                    if !(b > 0.0) {
                        v.push(format!("trotter.error_budget must be positive, got {b}"));
                    }
                }
                let parsed = self
                    .hamiltonian
                    .terms
                    .iter()
                    .map(|e| {
                        let single = PauliSum::parse_terms(&[e])?;
                        single.as_single().ok_or_else(|| dqc1m_core::Error::Parse(format!("{e:?} is not one term")))
                    })
                    .collect::<dqc1m_core::Result<Vec<_>>>()
                    .and_then(MultiHamiltonian::new);
                match parsed {
                    Ok(multi) => {
                        for nu in 0..multi.len() {
                            let (coeff, p) = multi.terms()[nu];
                            if let Err(e) = select_decoupler(&multi, nu) {
                                v.push(format!("parameter {nu} ({p}): {e}"));
                            }
                            if let Err(e) = select_readout(&multi, nu) {
                                v.push(format!("parameter {nu} ({p}): {e}"));
                            }
                            if !(coeff > 0.0 && coeff < FRAC_PI_2) {
                                v.push(format!("parameter {nu} ({p}) = {coeff} must lie in (0, pi/2)"));
                            }
                        }
                        if multi.n() > 10 {
                            v.push(format!("multiparameter mode simulates at most 10 qubits, got {}", multi.n()));
                        }
                        resolved.multi = Some(multi);
                    }
                    Err(e) => v.push(format!("hamiltonian.terms: {e}")),
                }
            }
            Mode::SearchBound => {
                let s = &self.search;
                if s.n.is_empty() {
                    v.push("search.n needs at least one value".into());
                }
                for &n in &s.n {
                    if n == 0 || n > MAX_SEARCH_QUBITS {
                        v.push(format!("search.n = {n} must lie in 1..={MAX_SEARCH_QUBITS}"));
                    } else if s.marked >= 1 << n {
                        v.push(format!("search.marked = {} is not a basis index for n = {n}", s.marked));
                    }
                }
                if !(s.oracle_phase.is_finite() && s.oracle_phase.rem_euclid(2.0 * PI) != 0.0) {
                    v.push(format!("search.oracle_phase = {} must be finite and not a multiple of 2*pi", s.oracle_phase));
                }
                match s.interleave {
                    InterleaveChoice::Kickback => {}
                    InterleaveChoice::Random | InterleaveChoice::Identity => {
                        if s.calls.is_empty() {
                            v.push(format!("search.calls must list call counts for {:?} interleaves", s.interleave));
                        }
                    }
                }
                if s.calls.iter().any(|&q| q == 0) {
                    v.push("search.calls entries must be at least 1".into());
                }
            }
        }

        if v.is_empty() {
            Ok(resolved)
        } else {
            Err(ValidationReport { violations: v })
        }
    }
}

/// The compensated discrete schedule needs the prior, several widths wide,
/// inside `(0, π/4)`.
fn check_window(v: &mut Vec<String>, name: &str, phase: f64, margin: f64) {
    if !(phase - margin > 0.0 && phase + margin < FRAC_PI_4) {
        v.push(format!(
            "black-box phase {name} = {phase} must lie in ({margin}, pi/4 - {margin}) so prior draws stay in the zoom window"
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_mode() {
        let cfg = ExperimentConfig::default();
        for mode in Mode::ALL {
            let cfg = match mode {
                Mode::EstimateDiscrete => ExperimentConfig { truth: TruthSpec { theta: 0.2, ..TruthSpec::default() }, ..cfg.clone() },
                Mode::FrameAlign => ExperimentConfig { truth: TruthSpec { theta: 0.15, ..TruthSpec::default() }, ..cfg.clone() },
                _ => cfg.clone(),
            };
            assert!(cfg.validate(mode).is_ok(), "{mode}: {:?}", cfg.validate(mode).err());
        }
    }

    #[test]
    fn reports_every_violation() {
        let text = r#"
trials = 5
[noise]
delta = 0.02
[policy]
c = 10
c_prime = 4
target_precision = [-1.0]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let report = cfg.validate(Mode::EstimateContinuous).unwrap_err();
        let all = report.violations.join("\n");
        assert!(all.contains("c' = 4 must be at least c"), "{all}");
        assert!(all.contains("must exceed 5"), "{all}");
        assert!(all.contains("c*delta"), "{all}");
        assert!(all.contains("target_precision"), "{all}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("trails = 3").is_err());
    }

    #[test]
    fn bad_triple_is_reported() {
        let text = "[hamiltonian]\nh0 = ['Z']\nh1 = ['X']\nh2 = ['Z']\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let report = cfg.validate(Mode::EstimateContinuous).unwrap_err();
        assert!(report.violations.iter().any(|s| s.contains("hamiltonian")));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig { output: "elsewhere".into(), ..a.clone() }.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
    }
}
