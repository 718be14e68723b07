//! Estimating every coefficient of `H = Σ_ν θ^ν σ_ν` one at a time.
//!
//! Conjugating half of each short evolution by a Pauli `σ` that commutes with
//! `σ_ν` and anticommutes with all other `σ_ν′` cancels those terms, leaving
//! `exp(−iθ^ν σ_ν T)` up to product-formula error. That error enters the
//! readout as a bias `γ`, absorbed by widening the likelihood to
//! `Δ′ = √(Δ² + Δ_γ²)` with `Δ_γ = Δ·ε`.

use serde::{Deserialize, Serialize};

use crate::continuous::{draw_prior, run_zoom, ZoomPolicy};
use crate::dense::{
    evolve, product_matrix, trotter_step_with, DenseOperator, Spectral, TrotterOrder,
};
use crate::error::{Error, Result};
use crate::measurement::{NoiseModel, TraceReadout};
use crate::oracle::{OracleReadout, PhaseOracle};
use crate::pauli::{find_su2_partner, Commutation, Pauli, PauliProduct, PauliSum};
use crate::posterior::SignalKind;
use crate::record::{RunRecord, TrotterStepInfo};

/// Candidate products examined before a decoupler search gives up.
pub const DECOUPLER_SEARCH_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHamiltonian {
    n: usize,
    terms: Vec<(f64, PauliProduct)>,
}

impl MultiHamiltonian {
    pub fn new(terms: Vec<(f64, PauliProduct)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidParameter("no terms".into()))?;
        let n = first.1.n();
        for (i, (_, p)) in terms.iter().enumerate() {
            if p.n() != n {
                return Err(Error::DimensionMismatch { left: n, right: p.n() });
            }
            if !p.is_phase_free() || p.is_identity() {
                return Err(Error::InvalidParameter(format!("term {p} must be a phase-free non-identity product")));
            }
            if terms[..i].iter().any(|(_, q)| q == p) {
                return Err(Error::InvalidParameter(format!("term {p} appears twice")));
            }
        }
        Ok(Self { n, terms })
    }

    /// Every term of a sum becomes one parameter.
    pub fn from_sum(h: &PauliSum) -> Result<Self> {
        Self::new(h.terms().to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(f64, PauliProduct)] {
        &self.terms
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        PauliSum::new(self.n, self.terms.iter().copied())
    }

    fn check_index(&self, nu: usize) -> Result<()> {
        if nu >= self.terms.len() {
            return Err(Error::InvalidParameter(format!("parameter index {nu} out of range 0..{}", self.terms.len())));
        }
        Ok(())
    }
}

/// Products on `n` qubits ordered by weight, then by support (lowest qubits
/// first), then by factors in the order Z, X, Y.
pub fn products_by_weight(n: usize) -> impl Iterator<Item = PauliProduct> {
    (0..=n).flat_map(move |w| {
        combinations(n, w).flat_map(move |support| {
            let total = 3usize.pow(w as u32);
            let support = support.clone();
            (0..total).map(move |code| {
                let mut factors = vec![Pauli::I; n];
                let mut rest = code;
                for &q in support.iter().rev() {
                    factors[q] = [Pauli::Z, Pauli::X, Pauli::Y][rest % 3];
                    rest /= 3;
                }
                PauliProduct::from_factors(&factors).expect("n within limits")
            })
        })
    })
}

fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                current = Some(next);
                break;
            }
        }
        Some(out)
    })
}

/// Lowest-weight `σ` with `[σ_ν, σ] = 0` and `{σ_ν′, σ} = 0` for all `ν′ ≠ ν`.
pub fn select_decoupler(h: &MultiHamiltonian, nu: usize) -> Result<PauliProduct> {
    h.check_index(nu)?;
    let target = h.terms[nu].1;
    let ok = |s: &PauliProduct| {
        h.terms.iter().enumerate().all(|(i, (_, p))| {
            let want = if i == nu { Commutation::Commute } else { Commutation::Anticommute };
            p.commutation_unchecked(s) == want
        })
    };
    if let Some(s) = products_by_weight(h.n).take(DECOUPLER_SEARCH_BUDGET).find(|s| ok(s)) {
        return Ok(s);
    }
    match decoupler_obstruction(h, nu) {
        Some(terms) => Err(Error::Precondition(format!(
            "no single-product decoupler isolates {target}: the required relations to {} are inconsistent",
            terms.iter().map(|&i| h.terms[i].1.to_string()).collect::<Vec<_>>().join(", ")
        ))),
        None => Err(Error::Precondition(format!(
            "decoupler search for {target} exhausted {DECOUPLER_SEARCH_BUDGET} candidates"
        ))),
    }
}

/// Terms whose required commutation relations with `σ` contradict each
/// other, found by elimination over GF(2); `None` when a decoupler exists
/// or when there are more than 128 terms to track.
pub fn decoupler_obstruction(h: &MultiHamiltonian, nu: usize) -> Option<Vec<usize>> {
    if h.terms.len() > 128 {
        return None;
    }
    // Commutation with σ is linear in σ's bits: ⟨σ, v⟩ = x_σ·z_v + z_σ·x_v.
    let mut pivots: Vec<(u128, bool, u128)> = Vec::new();
    for (i, (_, p)) in h.terms.iter().enumerate() {
        let mut row = p.z_mask() as u128 | (p.x_mask() as u128) << 64;
        let mut rhs = i != nu;
        let mut origin = 1u128 << i;
        for &(prow, prhs, porigin) in &pivots {
            if row & (1u128 << prow.trailing_zeros()) != 0 {
                row ^= prow;
                rhs ^= prhs;
                origin ^= porigin;
            }
        }
        if row == 0 {
            if rhs {
                return Some((0..h.terms.len()).filter(|&j| origin >> j & 1 == 1).collect());
            }
        } else {
            let bit = 1u128 << row.trailing_zeros();
            for pivot in &mut pivots {
                if pivot.0 & bit != 0 {
                    pivot.0 ^= row;
                    pivot.1 ^= rhs;
                    pivot.2 ^= origin;
                }
            }
            pivots.push((row, rhs, origin));
        }
    }
    None
}

/// Lowest-weight product anticommuting with `σ_ν`, used as the readout `σ₁`.
pub fn select_readout(h: &MultiHamiltonian, nu: usize) -> Result<PauliProduct> {
    h.check_index(nu)?;
    let target = h.terms[nu].1;
    products_by_weight(h.n)
        .find(|s| target.commutation_unchecked(s) == Commutation::Anticommute)
        .ok_or_else(|| Error::Precondition(format!("nothing anticommutes with {target}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub order: TrotterOrder,
    /// Minimum slice count `q = 1/ε`.
    pub slices: u64,
    pub decoupler: PauliProduct,
    /// When set, each measurement raises `q` until `2·trotter_error ≤ budget`.
    pub error_budget: Option<f64>,
}

impl TrotterPlan {
    pub fn fixed(order: TrotterOrder, slices: u64, decoupler: PauliProduct) -> Self {
        Self { order, slices, decoupler, error_budget: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices == 0 {
            return Err(Error::InvalidParameter("slice count must be at least 1".into()));
        }
        if let Some(b) = self.error_budget {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("error budget must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// Dense pieces reused for every slice count and time.
pub struct TrotterEngine {
    spectral: Spectral,
    sigma: DenseOperator,
    decoupled: Spectral,
    order: TrotterOrder,
}

impl TrotterEngine {
    pub fn new(h: &PauliSum, decoupler: &PauliProduct, order: TrotterOrder) -> Result<Self> {
        Ok(Self {
            spectral: Spectral::of_sum(h)?,
            sigma: product_matrix(&decoupler.without_phase())?,
            decoupled: Spectral::of_sum(&h.decouple(decoupler)?)?,
            order,
        })
    }

    /// `[S̄(t/q)]^q`
    pub fn approximate(&self, t: f64, q: u64) -> Result<DenseOperator> {
        Ok(trotter_step_with(&self.spectral, &self.sigma, t / q as f64, self.order)?.pow(q))
    }

    pub fn exact(&self, t: f64) -> DenseOperator {
        self.decoupled.exp_i(t)
    }

    /// `‖S(t) − [S̄(t/q)]^q‖`
    pub fn error(&self, t: f64, q: u64) -> Result<f64> {
        let diff = self.exact(t).matrix() - self.approximate(t, q)?.matrix();
        Ok(DenseOperator::from_matrix(self.exact(t).n(), diff)?.spectral_norm())
    }

    /// Smallest `q ≥ q_min` with `2·error(t, q) ≤ budget`, assuming the error
    /// decreases with `q` from `q_min` on.
    pub fn min_slices(&self, t: f64, budget: f64, q_min: u64) -> Result<u64> {
        let fits = |q: u64| -> Result<bool> { Ok(2.0 * self.error(t, q)? <= budget) };
        let mut lo = q_min.max(1);
        if fits(lo)? {
            return Ok(lo);
        }
        let mut hi = lo;
        loop {
            hi = hi
                .checked_mul(2)
                .filter(|&h| h < 1 << 52)
                .ok_or_else(|| Error::InvalidParameter(format!("no slice count reaches error budget {budget} at t = {t}")))?;
            if fits(hi)? {
                break;
            }
            lo = hi;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if fits(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `Δ_γ = Δ·ε`
pub fn gamma_prior(delta: f64, eps: f64) -> f64 {
    delta * eps
}

/// `Δ′ = √(Δ² + Δ_γ²)`
pub fn inflated_std(delta: f64, eps: f64) -> f64 {
    delta.hypot(gamma_prior(delta, eps))
}

/// Exact Trotterized readout mean and its bias against `cos(2θ^νT)`.
pub fn trotterized_measurement_mean(
    h: &MultiHamiltonian,
    nu: usize,
    plan: &TrotterPlan,
    sigma1: &PauliProduct,
    t: f64,
) -> Result<(f64, f64)> {
    h.check_index(nu)?;
    plan.validate()?;
    let engine = TrotterEngine::new(&h.hamiltonian()?, &plan.decoupler, plan.order)?;
    let w = engine.approximate(t, plan.slices)?;
    let s1 = product_matrix(sigma1)?;
    let mean = crate::dense::heisenberg_trace(&w, &s1, &s1)?.normalized.re;
    Ok((mean, mean - (2.0 * h.terms[nu].0 * t).cos()))
}

/// Continuous-time oracle for one parameter through Trotterized decoupling.
pub struct TrotterOracle {
    engine: TrotterEngine,
    readout: TraceReadout,
    plan: TrotterPlan,
    nu: usize,
    theta_nu: f64,
    noise: NoiseModel,
    trial: u64,
}

impl TrotterOracle {
    pub fn new(h: &MultiHamiltonian, nu: usize, plan: &TrotterPlan, noise: NoiseModel, trial: u64) -> Result<Self> {
        h.check_index(nu)?;
        plan.validate()?;
        let hs = h.hamiltonian()?;
        let target = PauliSum::from_product(1.0, h.terms[nu].1)?;
        if !hs.decouple(&plan.decoupler)?.approx_eq(&PauliSum::from_product(h.terms[nu].0, h.terms[nu].1)?, 1e-12) {
            return Err(Error::Precondition(format!(
                "{} does not isolate {} in {hs}",
                plan.decoupler, h.terms[nu].1
            )));
        }
        let sigma1 = select_readout(h, nu)?;
        let (_, sigma2) = find_su2_partner(&target, &sigma1)?;
        Ok(Self {
            engine: TrotterEngine::new(&hs, &plan.decoupler, plan.order)?,
            readout: TraceReadout::shortcut(&sigma1, &sigma2)?,
            plan: *plan,
            nu,
            theta_nu: h.terms[nu].0,
            noise,
            trial,
        })
    }

    pub fn slices_at(&self, t: f64) -> Result<u64> {
        match self.plan.error_budget {
            Some(budget) => self.engine.min_slices(t, budget, self.plan.slices),
            None => Ok(self.plan.slices),
        }
    }
}

impl PhaseOracle for TrotterOracle {
    fn truth(&self) -> f64 {
        self.theta_nu
    }

    fn measure(&mut self, t: f64, offset: f64, signal: SignalKind, step: u64) -> Result<OracleReadout> {
        if offset != 0.0 {
            return Err(Error::Precondition("Trotterized probe has no phase compensation".into()));
        }
        let q = self.slices_at(t)?;
        let w = self.engine.approximate(t, q)?;
        let diff = self.engine.exact(t).matrix() - w.matrix();
        let eps = 2.0 * DenseOperator::from_matrix(w.n(), diff)?.spectral_norm();
        let mut rng = self.noise.stream(self.trial, step);
        let est = self.readout.sample(&w, &self.noise, signal == SignalKind::Sin, &mut rng)?;
        let (mean, _) = self.readout.exact(&w)?;
        let ideal = match signal {
            SignalKind::Cos => (2.0 * self.theta_nu * t).cos(),
            SignalKind::Sin => (2.0 * self.theta_nu * t).sin(),
        };
        let x = match signal {
            SignalKind::Cos => est.cos_hat,
            SignalKind::Sin => est.sin_hat.expect("sine requested"),
        };
        let delta_gamma = gamma_prior(est.effective_delta, eps);
        Ok(OracleReadout {
            x,
            std: inflated_std(est.effective_delta, eps),
            runs: est.runs,
            trotter: Some(TrotterStepInfo {
                nu: self.nu,
                order: self.plan.order.p(),
                slices: q,
                delta_gamma,
                gamma_measured: if signal == SignalKind::Cos { mean - ideal } else { f64::NAN },
            }),
        })
    }
}

/// Default plan for parameter `ν`: searched decoupler, given order and slices.
pub fn default_plan(h: &MultiHamiltonian, nu: usize, order: TrotterOrder, slices: u64, error_budget: Option<f64>) -> Result<TrotterPlan> {
    Ok(TrotterPlan { order, slices, decoupler: select_decoupler(h, nu)?, error_budget })
}

/// One zoom-in run per parameter. Each parameter draws its prior and noise
/// from its own stream family.
pub fn estimate_all(
    h: &MultiHamiltonian,
    plans: &[TrotterPlan],
    policy: &ZoomPolicy,
    noise: &NoiseModel,
    trial: u64,
) -> Result<Vec<RunRecord>> {
    if plans.len() != h.len() {
        return Err(Error::InvalidParameter(format!("{} plans for {} parameters", plans.len(), h.len())));
    }
    policy.validate()?;
    noise.validate()?;
    let run = |nu: usize| -> Result<RunRecord> {
        let stream_noise = NoiseModel { seed: parameter_seed(noise.seed, nu), ..*noise };
        let mut oracle = TrotterOracle::new(h, nu, &plans[nu], stream_noise, trial)?;
        let theta0 = draw_prior(h.terms[nu].0, policy, &mut stream_noise.stream(trial, 0));
        run_zoom(&mut oracle, theta0, policy, trial)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..h.len()).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..h.len()).map(run).collect()
    }
}

/// Seed of the stream family for parameter `ν`.
pub fn parameter_seed(seed: u64, nu: usize) -> u64 {
    seed ^ (nu as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Exact evolution under `θ^ν σ_ν` alone, for comparisons.
pub fn isolated_evolution(h: &MultiHamiltonian, nu: usize, t: f64) -> Result<DenseOperator> {
    h.check_index(nu)?;
    evolve(&PauliSum::from_product(h.terms[nu].0, h.terms[nu].1)?, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multi(entries: &[(f64, &str)]) -> MultiHamiltonian {
        MultiHamiltonian::new(entries.iter().map(|&(c, s)| (c, s.parse().unwrap())).collect()).unwrap()
    }

    #[test]
    fn enumeration_order() {
        let first: Vec<String> = products_by_weight(2).take(8).map(|p| p.to_string()).collect();
        assert_eq!(first, ["II", "ZI", "XI", "YI", "IZ", "IX", "IY", "ZZ"]);
        assert_eq!(products_by_weight(3).count(), 64);
    }

    #[test]
    fn decoupler_examples() {
        let h = multi(&[(0.3, "ZI"), (0.7, "IX")]);
        let s = select_decoupler(&h, 0).unwrap();
        assert_eq!(s.to_string(), "IZ");
        let zz: PauliProduct = "ZZ".parse().unwrap();
        for sigma in [s, zz] {
            let d = h.hamiltonian().unwrap().decouple(&sigma).unwrap();
            assert!(d.approx_eq(&PauliSum::parse_terms(&["0.3*ZI"]).unwrap(), 0.0));
        }

        let single = multi(&[(0.3, "ZI")]);
        assert!(select_decoupler(&single, 0).unwrap().is_identity());

        let same_site = multi(&[(0.3, "ZI"), (0.7, "XI")]);
        assert_eq!(select_decoupler(&same_site, 0).unwrap().to_string(), "ZI");
    }

    #[test]
    fn decoupler_failure_names_terms() {
        // σ would have to anticommute with ZI, IZ and their product ZZ.
        let h = multi(&[(0.1, "XI"), (0.2, "ZI"), (0.3, "IZ"), (0.4, "ZZ")]);
        assert_eq!(decoupler_obstruction(&h, 0), Some(vec![1, 2, 3]));
        let err = select_decoupler(&h, 0).unwrap_err().to_string();
        assert!(err.contains("ZI, IZ, ZZ"), "{err}");
        let ok = multi(&[(0.1, "IZ"), (0.2, "ZI"), (0.3, "ZZ")]);
        assert_eq!(decoupler_obstruction(&ok, 0), None);
        assert_eq!(select_decoupler(&ok, 0).unwrap().to_string(), "XI");
    }

    #[test]
    fn gamma_prior_examples() {
        assert_eq!(inflated_std(1e-3, 0.0), 1e-3);
        assert!((gamma_prior(1e-3, 0.5) - 5e-4).abs() < 1e-18);
        assert!((inflated_std(1e-3, 0.5) - 1.118e-3).abs() < 1e-6);
    }

    #[test]
    fn commuting_case_has_no_bias() {
        let h = multi(&[(0.3, "ZI"), (0.7, "IX")]);
        let plan = TrotterPlan::fixed(TrotterOrder::Second, 3, select_decoupler(&h, 0).unwrap());
        let (mean, gamma) = trotterized_measurement_mean(&h, 0, &plan, &"XI".parse().unwrap(), 1.7).unwrap();
        assert!(gamma.abs() < 1e-12, "{gamma}");
        assert!((mean - (2.0 * 0.3 * 1.7f64).cos()).abs() < 1e-12);
    }

    #[test]
    fn many_slices_remove_bias() {
        let h = multi(&[(0.3, "ZI"), (0.7, "XX")]);
        let plan = TrotterPlan::fixed(TrotterOrder::Second, 10_000, select_decoupler(&h, 0).unwrap());
        let (_, gamma) = trotterized_measurement_mean(&h, 0, &plan, &"XI".parse().unwrap(), 0.5).unwrap();
        assert!(gamma.abs() < 1e-8, "{gamma}");
    }

    #[test]
    fn min_slices_meets_budget() {
        let h = multi(&[(0.3, "ZI"), (0.7, "XX")]);
        let sigma = select_decoupler(&h, 0).unwrap();
        let engine = TrotterEngine::new(&h.hamiltonian().unwrap(), &sigma, TrotterOrder::Second).unwrap();
        let q = engine.min_slices(5.0, 1e-4, 1).unwrap();
        assert!(2.0 * engine.error(5.0, q).unwrap() <= 1e-4);
        assert!(2.0 * engine.error(5.0, q - 1).unwrap() > 1e-4);
    }
}
