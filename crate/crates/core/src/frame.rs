//! Reference-frame alignment between two parties sharing a probe.
//!
//! Bob's frame differs from Alice's by an unknown rotation. Sending the
//! probe back and forth, with each side applying its own version of a
//! generator, yields a black box whose phase encodes the misalignment. The
//! resource is the number of probe exchanges.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::circuit::{probe_mixedness_defect, DensityState, Gate, Owner};
use crate::dense::{evolve, heisenberg_trace, product_matrix, sum_matrix, DenseOperator};
use crate::discrete::{draw_prior, run_blackbox, run_uncompensated, BlackBoxPolicy};
use crate::error::{Error, Result};
use crate::measurement::{NoiseModel, TraceReadout};
use crate::oracle::BlackBoxOracle;
use crate::pauli::{check_su2_triple, PauliSum};
use crate::record::RunRecord;

/// Tolerance for the exact operator identities asserted on construction.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    /// `V_θ = e^{−iθH₀}`
    Uniparametric,
    /// `R = e^{−iψH₂} e^{−iθH₁} e^{−iφH₂}`
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMisalignment {
    pub kind: FrameKind,
    pub theta: f64,
    /// `(φ, ψ)` for the Euler kind.
    pub euler: Option<(f64, f64)>,
    pub h0: PauliSum,
    pub h1: PauliSum,
    pub h2: PauliSum,
}

impl FrameMisalignment {
    pub fn uniparametric(theta: f64, h0: PauliSum, h1: PauliSum, h2: PauliSum) -> Result<Self> {
        Self::checked(FrameKind::Uniparametric, theta, None, h0, h1, h2)
    }

    pub fn euler(phi: f64, theta: f64, psi: f64, h0: PauliSum, h1: PauliSum, h2: PauliSum) -> Result<Self> {
        Self::checked(FrameKind::Euler, theta, Some((phi, psi)), h0, h1, h2)
    }

    fn checked(
        kind: FrameKind,
        theta: f64,
        euler: Option<(f64, f64)>,
        h0: PauliSum,
        h1: PauliSum,
        h2: PauliSum,
    ) -> Result<Self> {
        if !check_su2_triple(&h0, &h1, &h2)? {
            return Err(Error::Precondition(format!("({h0}, {h1}, {h2}) is not an su(2) triple")));
        }
        Ok(Self { kind, theta, euler, h0, h1, h2 })
    }

    /// Bob's rotation `R`.
    pub fn rotation(&self) -> Result<DenseOperator> {
        let (phi, psi) = self.euler.ok_or_else(|| Error::Precondition("not an Euler misalignment".into()))?;
        DenseOperator::product([
            &evolve(&self.h2, psi)?,
            &evolve(&self.h1, self.theta)?,
            &evolve(&self.h2, phi)?,
        ])
    }

    /// Phase `θ_B` of the resulting black box, whose readout oscillates as `cos(2θ_B m)`.
    pub fn black_box_phase(&self) -> f64 {
        2.0 * self.theta
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeBudget {
    pub exchanges_used: u64,
}

impl ExchangeBudget {
    pub fn record(&mut self, m: u64) {
        self.exchanges_used += m;
    }
}

/// `e^{iπH₁/2} e^{iθH₀} e^{−iπH₁/2} e^{−iθH₀}`, checked against `e^{−2iθH₀}`.
pub fn elementary_step(mis: &FrameMisalignment) -> Result<DenseOperator> {
    if mis.kind != FrameKind::Uniparametric {
        return Err(Error::Precondition("elementary step needs a uniparametric misalignment".into()));
    }
    let step = DenseOperator::product([
        &evolve(&mis.h1, -FRAC_PI_2)?,
        &evolve(&mis.h0, -mis.theta)?,
        &evolve(&mis.h1, FRAC_PI_2)?,
        &evolve(&mis.h0, mis.theta)?,
    ])?;
    let closed = evolve(&mis.h0, 2.0 * mis.theta)?;
    let dev = step.max_abs_diff(&closed);
    if dev > IDENTITY_TOL {
        return Err(Error::Precondition(format!("exchange step deviates from exp(-2i theta H0) by {dev:.3e}")));
    }
    Ok(step)
}

/// `V′ = e^{iπH₂/2} R† e^{−iπH₂/2} R`
pub fn euler_step(mis: &FrameMisalignment) -> Result<DenseOperator> {
    if mis.kind != FrameKind::Euler {
        return Err(Error::Precondition("Euler step needs an Euler misalignment".into()));
    }
    let r = mis.rotation()?;
    DenseOperator::product([&evolve(&mis.h2, -FRAC_PI_2)?, &r.adjoint(), &evolve(&mis.h2, FRAC_PI_2)?, &r])
}

/// `tr[(V′†)^m H₂ (V′)^m H₂] / tr[H₂²]`
pub fn euler_trace(mis: &FrameMisalignment, m: u64) -> Result<f64> {
    let v = euler_step(mis)?.pow(m);
    let h2 = sum_matrix(&mis.h2)?;
    Ok(heisenberg_trace(&v, &h2, &h2)?.normalized.re / mis.h2.coeff_norm_sq())
}

/// Gate list of one readout of the `m`-fold exchange, using the terms `μ`
/// and `μ′` of the readout generator as controlled gates.
pub fn exchange_circuit(mis: &FrameMisalignment, m: u64, mu: usize, mu_prime: usize) -> Result<Vec<Gate>> {
    let readout = match mis.kind {
        FrameKind::Uniparametric => &mis.h1,
        FrameKind::Euler => &mis.h2,
    };
    let term = |i: usize| {
        readout
            .terms()
            .get(i)
            .map(|&(_, p)| p)
            .ok_or_else(|| Error::InvalidParameter(format!("readout term {i} out of range")))
    };
    let (s_mu, s_mu_prime) = (product_matrix(&term(mu)?)?, product_matrix(&term(mu_prime)?)?);
    let mut gates = vec![Gate::hadamard(Owner::Alice), Gate::controlled(&s_mu_prime, Owner::Alice, "c-sigma")];
    for _ in 0..m {
        match mis.kind {
            FrameKind::Uniparametric => {
                gates.push(Gate::probe(&evolve(&mis.h0, mis.theta)?, Owner::Bob, "V_theta"));
                gates.push(Gate::probe(&evolve(&mis.h1, FRAC_PI_2)?, Owner::Alice, "exp(-i pi H1/2)"));
                gates.push(Gate::probe(&evolve(&mis.h0, -mis.theta)?, Owner::Bob, "V_theta^dag"));
                gates.push(Gate::probe(&evolve(&mis.h1, -FRAC_PI_2)?, Owner::Alice, "exp(i pi H1/2)"));
            }
            FrameKind::Euler => {
                let r = mis.rotation()?;
                gates.push(Gate::probe(&r, Owner::Bob, "R"));
                gates.push(Gate::probe(&evolve(&mis.h2, FRAC_PI_2)?, Owner::Alice, "exp(-i pi H2/2)"));
                gates.push(Gate::probe(&r.adjoint(), Owner::Bob, "R^dag"));
                gates.push(Gate::probe(&evolve(&mis.h2, -FRAC_PI_2)?, Owner::Alice, "exp(i pi H2/2)"));
            }
        }
    }
    gates.push(Gate::controlled(&s_mu, Owner::Alice, "c-sigma"));
    Ok(gates)
}

/// Largest deviation of the probe from maximal mixedness over every prefix
/// of the circuit.
pub fn circuit_mixedness(mis: &FrameMisalignment, gates: &[Gate]) -> Result<f64> {
    let mut state = DensityState::dqc1_initial(mis.h0.n())?;
    let mut worst = probe_mixedness_defect(&state);
    for g in gates {
        state.apply(&g.op)?;
        worst = worst.max(probe_mixedness_defect(&state));
    }
    Ok(worst)
}

/// True when no gate Bob applies is conditioned on the ancilla.
pub fn bob_gates_uncontrolled(gates: &[Gate]) -> bool {
    gates.iter().all(|g| !(g.owner == Owner::Bob && g.controlled))
}

/// Runs the black-box estimator on the exchange and maps the phase back to `θ`.
///
/// The uniparametric step commutes with Alice's `e^{−iφH₀}`, so the
/// compensated schedule applies. The Euler step rotates about an axis set by
/// the unknown `φ`, so powers are chosen without compensation instead.
pub fn align(mis: &FrameMisalignment, policy: &BlackBoxPolicy, noise: &NoiseModel, trial: u64) -> Result<RunRecord> {
    policy.validate()?;
    noise.validate()?;
    let phase = mis.black_box_phase();
    if !(phase > 0.0 && phase < FRAC_PI_4) {
        return Err(Error::Precondition(format!(
            "exchange phase 2*theta = {phase} outside (0, pi/4); rescale before aligning"
        )));
    }
    let scaled = BlackBoxPolicy { target_precision: 2.0 * policy.target_precision, ..*policy };
    let theta0 = draw_prior(phase, &scaled, &mut noise.stream(trial, 0));
    let record = match mis.kind {
        FrameKind::Uniparametric => {
            let readout = TraceReadout::expanded(&mis.h1, &mis.h2)?;
            let mut oracle = BlackBoxOracle::new(elementary_step(mis)?, readout, phase, *noise, trial)
                .with_compensation(&mis.h0, 1.0)?;
            run_blackbox(&mut oracle, theta0.clamp(1e-9, FRAC_PI_4 - 1e-9), &scaled, trial)?
        }
        FrameKind::Euler => {
            let readout = TraceReadout::expanded(&mis.h2, &mis.h0)?;
            let mut oracle = BlackBoxOracle::new(euler_step(mis)?, readout, phase, *noise, trial);
            run_uncompensated(&mut oracle, theta0.clamp(1e-9, FRAC_PI_4 - 1e-9), &scaled, trial)?
        }
    };
    Ok(record.rescaled(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(e: &[&str]) -> PauliSum {
        PauliSum::parse_terms(e).unwrap()
    }

    fn qubit(theta: f64) -> FrameMisalignment {
        FrameMisalignment::uniparametric(theta, sum(&["Z"]), sum(&["X"]), sum(&["Y"])).unwrap()
    }

    #[test]
    fn zero_misalignment_is_identity() {
        let v = elementary_step(&qubit(0.0)).unwrap();
        assert!(v.max_abs_diff(&DenseOperator::identity(1)) < 1e-12);
    }

    #[test]
    fn single_qubit_step() {
        let v = elementary_step(&qubit(0.4)).unwrap();
        assert!(v.max_abs_diff(&evolve(&sum(&["Z"]), 0.8).unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_wrong_kind_and_bad_triple() {
        let e = FrameMisalignment::euler(0.1, 0.2, 0.3, sum(&["Z"]), sum(&["X"]), sum(&["Y"])).unwrap();
        assert!(elementary_step(&e).is_err());
        assert!(euler_step(&qubit(0.1)).is_err());
        assert!(FrameMisalignment::uniparametric(0.1, sum(&["Z"]), sum(&["X"]), sum(&["Z"])).is_err());
    }

    #[test]
    fn identity_rotation_gives_identity_step() {
        let e = FrameMisalignment::euler(0.0, 0.0, 0.0, sum(&["Z"]), sum(&["X"]), sum(&["Y"])).unwrap();
        assert!(euler_step(&e).unwrap().max_abs_diff(&DenseOperator::identity(1)) < 1e-12);
    }

    #[test]
    fn circuits_keep_probe_mixed() {
        let mis = FrameMisalignment::euler(0.4, 0.3, -1.1, sum(&["Z"]), sum(&["X"]), sum(&["Y"])).unwrap();
        let gates = exchange_circuit(&mis, 3, 0, 0).unwrap();
        assert!(bob_gates_uncontrolled(&gates));
        assert!(circuit_mixedness(&mis, &gates).unwrap() < 1e-12);
    }
}
