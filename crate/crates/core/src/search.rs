//! How well one clean qubit can tell a marked-state phase oracle from the
//! identity.
//!
//! The state has `2^n` equal eigenvalues `1/2^n`, and the oracle differs
//! from the identity on a two-dimensional subspace, so one call moves the
//! state by at most `4/2^n` in trace norm. `Q` calls interleaved with arbitrary
//! unitaries therefore move the ancilla's `⟨σ_z⟩` by at most `4Q/2^n`, and
//! detecting the oracle through noise of std `Δ` needs exponentially many
//! runs. The tighter `4Q/2^{n+1}` is reached by the kickback chain but is not
//! a worst case: [`extremal_single_call`] doubles it at `Q = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::{DensityState, GateOp};
use crate::dense::CMatrix;
use crate::error::{Error, Result};
use crate::measurement::{stream_rng, NoiseModel};

/// Largest probe simulated here.
pub const MAX_SEARCH_QUBITS: usize = 10;
/// Largest total dimension for which interleaves are drawn from the Haar measure.
pub const MAX_HAAR_DIM: usize = 128;

/// One interleaving unitary `W_i`, as a sequence of gates on ancilla + probe.
pub type Interleave = Vec<GateOp>;

#[derive(Debug, Clone)]
pub struct SearchInstance {
    pub n: usize,
    pub s_index: usize,
    pub theta: f64,
    pub q_calls: usize,
    /// `W_0 … W_Q`
    pub interleave: Vec<Interleave>,
}

impl SearchInstance {
    pub fn new(n: usize, s_index: usize, theta: f64, interleave: Vec<Interleave>) -> Result<Self> {
        if n == 0 || n > MAX_SEARCH_QUBITS {
            return Err(Error::ResourceLimit { n, max: MAX_SEARCH_QUBITS });
        }
        if s_index >= 1 << n {
            return Err(Error::InvalidParameter(format!("marked index {s_index} outside 0..{}", 1usize << n)));
        }
        if theta == 0.0 {
            return Err(Error::InvalidParameter("oracle phase must be nonzero".into()));
        }
        if interleave.is_empty() {
            return Err(Error::InvalidParameter("need at least W_0".into()));
        }
        Ok(Self { n, s_index, theta, q_calls: interleave.len() - 1, interleave })
    }

    /// `4Q/2^{n+1}`, the reference bound reported alongside each separation.
    pub fn bound(&self) -> f64 {
        4.0 * self.q_calls as f64 / (1u64 << (self.n + 1)) as f64
    }

    /// `4Q/2^n`, the trace-norm hybrid bound.
    pub fn hybrid_bound(&self) -> f64 {
        4.0 * self.q_calls as f64 / (1u64 << self.n) as f64
    }

    fn oracle(&self) -> GateOp {
        let d = 1usize << self.n;
        let phase = Complex64::from_polar(1.0, self.theta);
        let diag = (0..2 * d)
            .map(|i| if i % d == self.s_index { phase } else { Complex64::new(1.0, 0.0) })
            .collect();
        GateOp::Diagonal(diag)
    }

    /// Ancilla `⟨σ_z⟩` at the end, with or without the oracle calls.
    pub fn ancilla_z(&self, with_oracle: bool) -> Result<f64> {
        let mut state = DensityState::dqc1_initial(self.n)?;
        let oracle = self.oracle();
        for (i, w) in self.interleave.iter().enumerate() {
            if i > 0 && with_oracle {
                state.apply(&oracle)?;
            }
            for op in w {
                state.apply(op)?;
            }
        }
        Ok(state.ancilla_bloch().2)
    }
}

/// `|⟨σ_z⟩_{U_B = 1} − ⟨σ_z⟩_{U_B}|`
pub fn signal_separation(inst: &SearchInstance) -> Result<f64> {
    Ok((inst.ancilla_z(false)? - inst.ancilla_z(true)?).abs())
}

pub fn identity_interleave(q: usize) -> Vec<Interleave> {
    vec![Vec::new(); q + 1]
}

/// Haar unitary of dimension `d`: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Independent Haar interleaves on all `n + 1` qubits.
pub fn haar_interleave<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<Vec<Interleave>> {
    let d = 1usize << (n + 1);
    if d > MAX_HAAR_DIM {
        return Err(Error::ResourceLimit { n: n + 1, max: MAX_HAAR_DIM.trailing_zeros() as usize });
    }
    Ok((0..=q).map(|_| vec![GateOp::Dense(haar_unitary(d, rng))]).collect())
}

/// Brickwork circuits of Haar two-qubit gates on neighbouring qubits.
pub fn local_random_interleave<R: Rng + ?Sized>(n: usize, q: usize, layers: usize, rng: &mut R) -> Vec<Interleave> {
    let qubits = n + 1;
    (0..=q)
        .map(|_| {
            let mut w = Vec::new();
            for layer in 0..layers {
                let mut a = layer % 2;
                while a + 1 < qubits {
                    w.push(GateOp::Local { targets: vec![a, a + 1], matrix: haar_unitary(4, rng) });
                    a += 2;
                }
            }
            w
        })
        .collect()
}

/// Random interleave: Haar when the dimension allows, brickwork otherwise.
pub fn random_interleave(n: usize, q: usize, seed: u64, index: u64) -> Result<Vec<Interleave>> {
    let mut rng = stream_rng(seed, index, 0);
    if 1usize << (n + 1) <= MAX_HAAR_DIM {
        haar_interleave(n, q, &mut rng)
    } else {
        Ok(local_random_interleave(n, q, 2, &mut rng))
    }
}

/// Phase-kickback chain: the ancilla in `|+⟩` controls a cyclic shift of the
/// probe between calls, so its `|1⟩` branch meets the marked state at a
/// different call than the `|0⟩` branch. Shifts are undone before the final
/// Hadamard.
pub fn kickback_interleave(n: usize, q: usize) -> Vec<Interleave> {
    let d = 1usize << n;
    let hadamard = || {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |v: f64| Complex64::new(v, 0.0);
        GateOp::Local { targets: vec![0], matrix: CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)]) }
    };
    let shift = |k: usize| {
        GateOp::Permutation((0..2 * d).map(|i| if i < d { i } else { d + (i - d + k) % d }).collect())
    };
    let mut out = vec![vec![hadamard()]];
    for _ in 1..q {
        out.push(vec![shift(1)]);
    }
    if q > 0 {
        out.push(vec![shift((d - (q - 1) % d) % d), hadamard()]);
    } else {
        out[0].push(hadamard());
    }
    out
}

/// One oracle call between `W_0` and `W_1 = W_0†`, where `W_0` puts
/// `(|0,S⟩ + |1,A⟩)/√2` and `(|1,S⟩ + |0,A⟩)/√2` into the state's support.
/// At `θ = π` the oracle maps both to orthogonal vectors that `W_1` sends to
/// the other ancilla value, giving separation `4/2^n`.
pub fn extremal_single_call(n: usize, s_index: usize, theta: f64) -> Result<SearchInstance> {
    if n == 0 || n > MAX_SEARCH_QUBITS {
        return Err(Error::ResourceLimit { n, max: MAX_SEARCH_QUBITS });
    }
    let d = 1usize << n;
    let a_index = (s_index + 1) % d;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut w0 = CMatrix::identity(2 * d, 2 * d);
    let (s0, s1, a0, a1) = (s_index, d + s_index, a_index, d + a_index);
    for &k in &[s0, s1, a0, a1] {
        w0[(k, k)] = Complex64::new(0.0, 0.0);
    }
    // Columns are the images of |0S⟩, |1S⟩, |0A⟩, |1A⟩.
    for (col, (p, q, sign)) in [(s0, (s0, a1, 1.0)), (s1, (s0, a1, -1.0)), (a0, (s1, a0, 1.0)), (a1, (s1, a0, -1.0))] {
        w0[(p, col)] = h;
        w0[(q, col)] = h * sign;
    }
    let w1 = w0.adjoint();
    SearchInstance::new(n, s_index, theta, vec![vec![GateOp::Dense(w0)], vec![GateOp::Dense(w1)]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub n: usize,
    pub q_calls: usize,
    pub theta: f64,
    pub separation: f64,
    pub bound: f64,
    /// `None` when the separation vanishes.
    pub j_needed: Option<u64>,
    pub n_total: Option<u64>,
}

/// Smallest `J` with `Δ/√J < separation`, and `N = J·Q`.
pub fn detection_resources(inst: &SearchInstance, noise: &NoiseModel) -> Result<Detection> {
    noise.validate()?;
    let separation = signal_separation(inst)?;
    let j_needed = repetitions_needed(noise.effective_delta(), separation);
    Ok(Detection {
        n: inst.n,
        q_calls: inst.q_calls,
        theta: inst.theta,
        separation,
        bound: inst.bound(),
        j_needed,
        n_total: j_needed.map(|j| j * inst.q_calls as u64),
    })
}

/// `⌊(Δ/sep)²⌋ + 1`, or `None` for a vanishing separation.
pub fn repetitions_needed(delta: f64, separation: f64) -> Option<u64> {
    if !(separation > 1e-15) {
        return None;
    }
    let ratio = (delta / separation).powi(2);
    if ratio >= 9.0e15 {
        return None;
    }
    let mut j = ratio.floor() as u64 + 1;
    while j > 1 && delta / ((j - 1) as f64).sqrt() < separation {
        j -= 1;
    }
    Some(j)
}

/// Kickback search with the fewest calls that detects the oracle in a single
/// repetition (`J = 1`); beyond that point extra calls only add cost, and
/// below it `J·Q` grows as `1/Q`.
pub fn single_shot_detection(n: usize, s_index: usize, theta: f64, noise: &NoiseModel) -> Result<Detection> {
    let d = 1usize << n;
    let eval = |q: usize| -> Result<Detection> {
        let inst = SearchInstance::new(n, s_index, theta, kickback_interleave(n, q))?;
        detection_resources(&inst, noise)
    };
    let single = |det: &Detection| det.j_needed == Some(1);
    let mut lo = 0usize;
    let mut hi = eval(1)?;
    while !single(&hi) {
        if hi.q_calls >= d {
            return Ok(hi);
        }
        lo = hi.q_calls;
        hi = eval((2 * hi.q_calls).min(d))?;
    }
    while hi.q_calls - lo > 1 {
        let mid = lo + (hi.q_calls - lo) / 2;
        let det = eval(mid)?;
        if single(&det) {
            hi = det;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_oracle_arm_is_flat() {
        let inst = SearchInstance::new(3, 5, 1.0, identity_interleave(4)).unwrap();
        assert_eq!(signal_separation(&inst).unwrap(), 0.0);
    }

    #[test]
    fn kickback_saturates_bound_for_even_calls() {
        for n in 2..=5 {
            for q in [2usize, 4] {
                let inst = SearchInstance::new(n, 1, std::f64::consts::PI, kickback_interleave(n, q)).unwrap();
                let sep = signal_separation(&inst).unwrap();
                assert!((sep - inst.bound()).abs() < 1e-12, "n {n} q {q}: {sep} vs {}", inst.bound());
            }
        }
    }

    #[test]
    fn extremal_call_reaches_hybrid_bound() {
        for n in 1..=6 {
            let inst = extremal_single_call(n, 2 % (1 << n), std::f64::consts::PI).unwrap();
            let sep = signal_separation(&inst).unwrap();
            assert!((sep - inst.hybrid_bound()).abs() < 1e-12, "n {n}: {sep}");
            assert!((sep - 2.0 * inst.bound()).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = stream_rng(1, 2, 3);
        let u = haar_unitary(8, &mut rng);
        let defect = (u.adjoint() * &u - CMatrix::identity(8, 8)).norm();
        assert!(defect < 1e-12);
    }

    #[test]
    fn repetition_count() {
        assert_eq!(repetitions_needed(0.1, 0.2), Some(1));
        assert_eq!(repetitions_needed(0.2, 0.1), Some(5));
        assert_eq!(repetitions_needed(0.1, 0.0), None);
        assert_eq!(repetitions_needed(1e-18, 0.5), Some(1));
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(SearchInstance::new(3, 8, 1.0, identity_interleave(1)).is_err());
        assert!(SearchInstance::new(3, 0, 0.0, identity_interleave(1)).is_err());
        assert!(SearchInstance::new(11, 0, 1.0, identity_interleave(1)).is_err());
    }
}
