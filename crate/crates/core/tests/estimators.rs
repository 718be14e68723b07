use dqc1m_core::continuous::{run_estimation, ZoomPolicy};
use dqc1m_core::dense::{evolve, TrotterOrder};
use dqc1m_core::discrete::{run_discrete, BlackBoxPolicy};
use dqc1m_core::frame::{align, elementary_step, FrameMisalignment};
use dqc1m_core::measurement::NoiseModel;
use dqc1m_core::multiparam::{default_plan, estimate_all, trotterized_measurement_mean, select_readout, MultiHamiltonian, TrotterEngine};
use dqc1m_core::pauli::PauliSum;
use dqc1m_core::search::{random_interleave, signal_separation, SearchInstance};
use dqc1m_core::stats::coverage;

fn sum(e: &[&str]) -> PauliSum {
    PauliSum::parse_terms(e).unwrap()
}

fn qubit_triple() -> (PauliSum, PauliSum, PauliSum) {
    (sum(&["Z"]), sum(&["X"]), sum(&["Y"]))
}

#[test]
fn continuous_runs_respect_time_bound_and_contract() {
    let (h0, h1, h2) = qubit_triple();
    let policy = ZoomPolicy { target_precision: 1e-6, ..ZoomPolicy::default() };
    let noise = NoiseModel::new(1e-3, 1, 11).unwrap();
    let bound = (policy.c_prime - 4.0) / (policy.c_prime - 5.0);
    for trial in 0..100 {
        let r = run_estimation(&h0, &h1, &h2, 0.7, &policy, &noise, trial).unwrap();
        assert!(r.converged, "trial {trial}: {:?}", r.failure);
        assert!(r.resource < bound * r.final_t(), "trial {trial}: {} vs {}", r.resource, r.final_t());
        for pair in r.steps.windows(2) {
            assert!(pair[1].precision < pair[0].precision);
            assert!(pair[1].t <= policy.c_prime * pair[0].t * (1.0 + 1e-12));
        }
    }
}

#[test]
fn continuous_runs_are_reproducible() {
    let (h0, h1, h2) = qubit_triple();
    let policy = ZoomPolicy::default();
    let noise = NoiseModel::new(1e-3, 4, 5).unwrap();
    let a = run_estimation(&h0, &h1, &h2, 0.4, &policy, &noise, 3).unwrap();
    let b = run_estimation(&h0, &h1, &h2, 0.4, &policy, &noise, 3).unwrap();
    assert_eq!(a, b);
    let c = run_estimation(&h0, &h1, &h2, 0.4, &policy, &noise, 4).unwrap();
    assert_ne!(a.theta_hat(), c.theta_hat());
}

#[test]
fn small_phase_uses_sine_readings() {
    let (h0, h1, h2) = qubit_triple();
    let policy = ZoomPolicy { target_precision: 1e-5, ..ZoomPolicy::default() };
    let noise = NoiseModel::new(1e-3, 1, 2).unwrap();
    let records: Vec<_> = (0..100).map(|t| run_estimation(&h0, &h1, &h2, 0.02, &policy, &noise, t).unwrap()).collect();
    assert!(records.iter().all(|r| r.converged));
    assert!(records.iter().all(|r| r.steps[0].signal.label() == "sin"));
    assert!(coverage(&records) >= 0.85);
}

#[test]
fn discrete_calls_are_geometric() {
    let (h0, h1, h2) = qubit_triple();
    let policy = BlackBoxPolicy { target_precision: 1e-6, ..BlackBoxPolicy::default() };
    let noise = NoiseModel::new(1e-3, 1, 7).unwrap();
    for trial in 0..50 {
        let r = run_discrete(&h0, &h1, &h2, 0.2, &policy, &noise, trial).unwrap();
        assert!(r.converged);
        let k = r.steps.len() as u32;
        assert_eq!(r.resource as u64, (policy.b.pow(k) - 1) / (policy.b - 1));
        for (l, s) in r.steps.iter().enumerate() {
            assert_eq!(s.t as u64, policy.b.pow(l as u32));
        }
    }
}

#[test]
fn frame_alignment_recovers_angle() {
    let (h0, h1, h2) = qubit_triple();
    let mis = FrameMisalignment::uniparametric(0.15, h0.clone(), h1, h2).unwrap();
    assert!(elementary_step(&mis).unwrap().max_abs_diff(&evolve(&h0, 0.3).unwrap()) < 1e-9);
    let policy = BlackBoxPolicy { target_precision: 1e-5, ..BlackBoxPolicy::default() };
    let noise = NoiseModel::new(1e-3, 1, 9).unwrap();
    let records: Vec<_> = (0..100).map(|t| align(&mis, &policy, &noise, t).unwrap()).collect();
    assert!(records.iter().all(|r| r.converged && r.precision() <= 1e-5));
    assert!(coverage(&records) >= 0.88);
}

#[test]
fn multiparameter_estimates_each_coefficient() {
    let h = MultiHamiltonian::new(vec![(0.3, "ZI".parse().unwrap()), (0.7, "XX".parse().unwrap())]).unwrap();
    let plans: Vec<_> = (0..2).map(|nu| default_plan(&h, nu, TrotterOrder::Second, 64, Some(1e-4)).unwrap()).collect();
    let policy = ZoomPolicy { target_precision: 1e-5, ..ZoomPolicy::default() };
    let noise = NoiseModel::new(1e-3, 1, 1).unwrap();
    let mut covered = 0;
    for trial in 0..40 {
        let runs = estimate_all(&h, &plans, &policy, &noise, trial).unwrap();
        for (r, &(theta, _)) in runs.iter().zip(h.terms()) {
            assert!(r.converged);
            assert_eq!(r.theta_true, theta);
            covered += r.covers_truth() as usize;
        }
    }
    assert!(covered >= 70, "{covered}/80");
}

#[test]
fn trotter_bias_within_operator_error() {
    let h = MultiHamiltonian::new(vec![
        (0.3, "ZI".parse().unwrap()),
        (0.5, "XX".parse().unwrap()),
        (0.2, "IY".parse().unwrap()),
    ])
    .unwrap();
    for nu in 0..3 {
        let plan = default_plan(&h, nu, TrotterOrder::Second, 4, None).unwrap();
        let engine = TrotterEngine::new(&h.hamiltonian().unwrap(), &plan.decoupler, plan.order).unwrap();
        let sigma1 = select_readout(&h, nu).unwrap();
        for t in [0.5, 2.0, 7.0] {
            let (_, gamma) = trotterized_measurement_mean(&h, nu, &plan, &sigma1, t).unwrap();
            let eps = 2.0 * engine.error(t, plan.slices).unwrap();
            assert!(gamma.abs() <= eps + 1e-12, "nu {nu} t {t}: {gamma} vs {eps}");
        }
    }
}

#[test]
fn random_interleaves_obey_search_bound() {
    for n in 1..=5 {
        for q in [1usize, 2, 3] {
            for index in 0..10 {
                let inst = SearchInstance::new(n, index as usize % (1 << n), 1.3, random_interleave(n, q, 21, index).unwrap()).unwrap();
                let sep = signal_separation(&inst).unwrap();
                assert!(sep <= inst.bound() + 1e-12, "n {n} q {q}: {sep} > {}", inst.bound());
            }
        }
    }
}
