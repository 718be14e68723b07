//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns plain numbers or a JSON string so the page needs no
//! generated type definitions beyond the bindings themselves. The bindings
//! wrap plain functions that also run natively.

use std::f64::consts::PI;

use serde_json::json;
use wasm_bindgen::prelude::*;

use dqc1m_core::continuous::{run_estimation, ZoomPolicy};
use dqc1m_core::dense::{dqc1_mean, evolve};
use dqc1m_core::measurement::NoiseModel;
use dqc1m_core::pauli::PauliSum;
use dqc1m_core::search::{kickback_interleave, random_interleave, signal_separation, SearchInstance};

/// Largest probe the page may request for the signal curve.
pub const MAX_SIGNAL_QUBITS: u32 = 8;
/// Largest probe the page may request for the search sweep.
pub const MAX_SEARCH_QUBITS: u32 = 6;
pub const MAX_SEARCH_CALLS: u32 = 64;

fn zeeman(n: usize) -> PauliSum {
    let labels: Vec<String> = (0..n)
        .map(|k| (0..n).map(|j| if j == k { 'Z' } else { 'I' }).collect())
        .collect();
    PauliSum::parse_terms(&labels).expect("single-site Z labels parse")
}

/// Ancilla `⟨σ_x⟩` of the trace circuit for `W′(T) = e^{−iθT Σ_k Z_k}` at
/// `points` evenly spaced times in `[0, t_max]`, as `[T₀, s₀, T₁, s₁, …]`.
pub fn signal_points(n: u32, theta: f64, t_max: f64, points: u32) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_SIGNAL_QUBITS {
        return Err(format!("n must be in 1..={MAX_SIGNAL_QUBITS}"));
    }
    if !(t_max > 0.0) || points < 2 {
        return Err("need t_max > 0 and at least 2 points".into());
    }
    let h = zeeman(n as usize);
    let mut out = Vec::with_capacity(2 * points as usize);
    for i in 0..points {
        let t = t_max * i as f64 / (points - 1) as f64;
        let w = evolve(&h, theta * t).map_err(|e| e.to_string())?;
        let (re, _) = dqc1_mean(&w).map_err(|e| e.to_string())?;
        out.extend([t, re]);
    }
    Ok(out)
}

/// One adaptive estimation of `θ` on a single qubit (`H₀ = Z`, read out
/// through `X` and `Y`), returned as JSON with the per-step records.
pub fn zoom_json(theta: f64, delta: f64, target: f64, seed: u32) -> Result<String, String> {
    let triple = |s: &str| PauliSum::parse_terms(&[s]).expect("single-qubit label parses");
    let policy = ZoomPolicy { target_precision: target, ..ZoomPolicy::default() };
    let noise = NoiseModel::new(delta, 1, seed as u64).map_err(|e| e.to_string())?;
    let record =
        run_estimation(&triple("Z"), &triple("X"), &triple("Y"), theta, &policy, &noise, 0).map_err(|e| e.to_string())?;
    let steps: Vec<_> = record
        .steps
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "signal": s.signal.label(),
                "winding": s.winding,
                "x": s.x,
                "theta_hat": s.theta_hat,
                "precision": s.precision,
                "resource": s.resource,
            })
        })
        .collect();
    Ok(json!({
        "theta_true": record.theta_true,
        "theta0_hat": record.theta0_hat,
        "theta_hat": record.theta_hat(),
        "precision": record.precision(),
        "converged": record.converged,
        "covers_truth": record.covers_truth(),
        "total_time": record.resource,
        "failure": record.failure,
        "steps": steps,
    })
    .to_string())
}

/// Separation against `Q = 1..=q_max` for the oracle phase `π`, as rows
/// `[Q, kickback, random, 4Q/2^{n+1}, 4Q/2^n]`.
pub fn search_rows(n: u32, q_max: u32, seed: u32) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_SEARCH_QUBITS {
        return Err(format!("n must be in 1..={MAX_SEARCH_QUBITS}"));
    }
    if !(1..=MAX_SEARCH_CALLS).contains(&q_max) {
        return Err(format!("q_max must be in 1..={MAX_SEARCH_CALLS}"));
    }
    let n = n as usize;
    let err = |e: dqc1m_core::Error| e.to_string();
    let mut out = Vec::with_capacity(5 * q_max as usize);
    for q in 1..=q_max as usize {
        let kick = SearchInstance::new(n, 1 % (1 << n), PI, kickback_interleave(n, q)).map_err(err)?;
        let random = random_interleave(n, q, seed as u64, q as u64).map_err(err)?;
        let rand_inst = SearchInstance::new(n, 1 % (1 << n), PI, random).map_err(err)?;
        out.extend([
            q as f64,
            signal_separation(&kick).map_err(err)?,
            signal_separation(&rand_inst).map_err(err)?,
            kick.bound(),
            kick.hybrid_bound(),
        ]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn signal_curve(n: u32, theta: f64, t_max: f64, points: u32) -> Result<Vec<f64>, JsError> {
    signal_points(n, theta, t_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn zoom_run(theta: f64, delta: f64, target: f64, seed: u32) -> Result<String, JsError> {
    zoom_json(theta, delta, target, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn search_separation(n: u32, q_max: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    search_rows(n, q_max, seed).map_err(|e| JsError::new(&e))
}
