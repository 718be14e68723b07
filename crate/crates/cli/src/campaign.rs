//! Campaign execution: trials fan out over a rayon pool and come back in
//! index order, so outputs do not depend on the thread count.

use dqc1m_core::continuous::run_with_probe;
use dqc1m_core::discrete::run_discrete;
use dqc1m_core::frame::align;
use dqc1m_core::multiparam::{default_plan, estimate_all};
use dqc1m_core::record::RunRecord;
use dqc1m_core::search::{
    identity_interleave, kickback_interleave, random_interleave, repetitions_needed, single_shot_detection,
    SearchInstance,
};
use dqc1m_core::stats::{ols, scaling_report, ScalingReport};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InterleaveChoice, Mode, Resolved};

/// One estimation run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    /// Global run index, also the RNG trial index.
    pub run: u64,
    pub target: f64,
    pub trial: u64,
    /// Parameter index; 0 outside multiparameter mode.
    pub param: usize,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub trial: u64,
    pub point: usize,
    pub theta_t: f64,
    pub cos_exact: f64,
    pub sin_exact: f64,
    pub cos_closed: f64,
    pub sin_closed: f64,
    pub cos_hat: f64,
    pub sin_hat: f64,
    pub effective_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub n: usize,
    pub q: usize,
    pub index: u64,
    pub z_without: f64,
    pub z_with: f64,
    pub separation: f64,
    pub bound: f64,
    pub j_needed: Option<u64>,
    pub n_total: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Runs(Vec<RunRow>),
    Trace(Vec<TraceRow>),
    Search(Vec<SearchRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Runs(r) => r.len(),
            Rows::Trace(r) => r.len(),
            Rows::Search(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Campaign totals; `None` marks quantities that are undefined for the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub config_hash: String,
    pub rows: usize,
    pub converged: usize,
    pub failures: usize,
    pub nonconverged_fraction: f64,
    pub coverage: Option<f64>,
    pub scaling: Option<ScalingReport>,
    pub scaling_note: Option<String>,
    pub total_resource: f64,
    /// Mode-specific extras in output order.
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rows: Rows,
    pub summary: Summary,
}

/// Runs every trial of a validated configuration.
pub fn run_campaign(cfg: &ExperimentConfig, resolved: &Resolved) -> CampaignResult {
    let rows = match resolved.mode {
        Mode::Trace => Rows::Trace(trace_rows(cfg, resolved)),
        Mode::EstimateContinuous | Mode::EstimateDiscrete | Mode::FrameAlign | Mode::Multiparam => {
            Rows::Runs(run_rows(cfg, resolved))
        }
        Mode::SearchBound => Rows::Search(search_rows(cfg, resolved)),
    };
    let summary = summarize(cfg, resolved.mode, &rows);
    CampaignResult { rows, summary }
}

fn run_rows(cfg: &ExperimentConfig, r: &Resolved) -> Vec<RunRow> {
    let targets = &cfg.policy.target_precision;
    let total = targets.len() as u64 * cfg.trials;
    let theta = cfg.truth.theta;
    let rows: Vec<Vec<RunRow>> = (0..total)
        .into_par_iter()
        .map(|run| {
            let target = targets[(run / cfg.trials.max(1)) as usize];
            let trial = run % cfg.trials.max(1);
            let single = |res: dqc1m_core::Result<RunRecord>, truth: f64| {
                let record = res.unwrap_or_else(|e| failed(run, truth, target, e.to_string()));
                vec![RunRow { run, target, trial, param: 0, record }]
            };
            match r.mode {
                Mode::EstimateContinuous => {
                    let policy = cfg.policy.zoom(cfg.noise.delta, target);
                    let probe = r.probe.as_ref().expect("validated probe");
                    single(run_with_probe(probe, theta, &policy, &r.noise, run), theta)
                }
                Mode::EstimateDiscrete => {
                    let policy = cfg.policy.black_box(cfg.noise.delta, target);
                    let (h0, h1, h2) = triple(r);
                    single(run_discrete(h0, h1, h2, theta, &policy, &r.noise, run), theta)
                }
                Mode::FrameAlign => {
                    let policy = cfg.policy.black_box(cfg.noise.delta, target);
                    single(align(r.frame.as_ref().expect("validated frame"), &policy, &r.noise, run), theta)
                }
                Mode::Multiparam => {
                    let multi = r.multi.as_ref().expect("validated multiparameter Hamiltonian");
                    let policy = cfg.policy.zoom(cfg.noise.delta, target);
                    let order = r.order.expect("validated order");
                    let result = (0..multi.len())
                        .map(|nu| default_plan(multi, nu, order, cfg.trotter.slices, cfg.trotter.error_budget))
                        .collect::<dqc1m_core::Result<Vec<_>>>()
                        .and_then(|plans| estimate_all(multi, &plans, &policy, &r.noise, run));
                    match result {
                        Ok(records) => records
                            .into_iter()
                            .enumerate()
                            .map(|(param, record)| RunRow { run, target, trial, param, record })
                            .collect(),
                        Err(e) => multi
                            .terms()
                            .iter()
                            .enumerate()
                            .map(|(param, &(truth, _))| RunRow {
                                run,
                                target,
                                trial,
                                param,
                                record: failed(run, truth, target, e.to_string()),
                            })
                            .collect(),
                    }
                }
                Mode::Trace | Mode::SearchBound => unreachable!("not an estimation mode"),
            }
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn triple(r: &Resolved) -> (&dqc1m_core::pauli::PauliSum, &dqc1m_core::pauli::PauliSum, &dqc1m_core::pauli::PauliSum) {
    (r.h0.as_ref().expect("h0"), r.h1.as_ref().expect("h1"), r.h2.as_ref().expect("h2"))
}

fn failed(run: u64, truth: f64, target: f64, message: String) -> RunRecord {
    let mut record = RunRecord::new(run, truth, f64::NAN, target);
    record.failure = Some(message);
    record
}

fn trace_rows(cfg: &ExperimentConfig, r: &Resolved) -> Vec<TraceRow> {
    let probe = r.probe.as_ref().expect("validated probe");
    let f = probe.frequency();
    let theta = cfg.truth.theta;
    let times = &cfg.trace.times;
    let rows: Vec<Vec<TraceRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            times
                .iter()
                .enumerate()
                .map(|(point, &t)| {
                    let (cos_exact, sin_exact) = probe.exact(theta * t).unwrap_or((f64::NAN, f64::NAN));
                    let mut rng = r.noise.stream(trial, point as u64 + 1);
                    let est = probe.sample(theta * t, &r.noise, true, &mut rng);
                    let (cos_hat, sin_hat, effective_delta) = match est {
                        Ok(e) => (e.cos_hat, e.sin_hat.unwrap_or(f64::NAN), e.effective_delta),
                        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
                    };
                    TraceRow {
                        trial,
                        point,
                        theta_t: theta * t,
                        cos_exact,
                        sin_exact,
                        cos_closed: (2.0 * f * theta * t).cos(),
                        sin_closed: (2.0 * f * theta * t).sin(),
                        cos_hat,
                        sin_hat,
                        effective_delta,
                    }
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn search_rows(cfg: &ExperimentConfig, r: &Resolved) -> Vec<SearchRow> {
    let s = &cfg.search;
    let delta = r.noise.effective_delta();
    if s.interleave == InterleaveChoice::Kickback && s.calls.is_empty() {
        return s
            .n
            .par_iter()
            .map(|&n| {
                let det = single_shot_detection(n, s.marked, s.oracle_phase, &r.noise);
                match det {
                    Ok(d) => {
                        let inst = SearchInstance::new(n, s.marked, s.oracle_phase, kickback_interleave(n, d.q_calls))
                            .expect("validated instance");
                        let (z_without, z_with) = (inst.ancilla_z(false).unwrap_or(f64::NAN), inst.ancilla_z(true).unwrap_or(f64::NAN));
                        SearchRow { n, q: d.q_calls, index: 0, z_without, z_with, separation: d.separation, bound: d.bound, j_needed: d.j_needed, n_total: d.n_total }
                    }
                    Err(_) => SearchRow { n, q: 0, index: 0, z_without: f64::NAN, z_with: f64::NAN, separation: f64::NAN, bound: f64::NAN, j_needed: None, n_total: None },
                }
            })
            .collect();
    }
    let jobs: Vec<(usize, usize, u64)> = s
        .n
        .iter()
        .flat_map(|&n| s.calls.iter().flat_map(move |&q| (0..cfg.trials).map(move |i| (n, q, i))))
        .collect();
    let per_instance = |n: usize, q: usize, index: u64| -> u64 { ((n as u64) << 48) ^ ((q as u64) << 32) ^ index };
    jobs.par_iter()
        .map(|&(n, q, index)| {
            let interleave = match s.interleave {
                InterleaveChoice::Random => random_interleave(n, q, cfg.seed, per_instance(n, q, index)),
                InterleaveChoice::Kickback => Ok(kickback_interleave(n, q)),
                InterleaveChoice::Identity => Ok(identity_interleave(q)),
            };
            let measured = interleave.and_then(|w| SearchInstance::new(n, s.marked, s.oracle_phase, w)).and_then(|inst| {
                let (a, b) = (inst.ancilla_z(false)?, inst.ancilla_z(true)?);
                Ok((inst.bound(), a, b))
            });
            match measured {
                Ok((bound, z_without, z_with)) => {
                    let separation = (z_without - z_with).abs();
                    let j_needed = repetitions_needed(delta, separation);
                    SearchRow { n, q, index, z_without, z_with, separation, bound, j_needed, n_total: j_needed.map(|j| j * q as u64) }
                }
                Err(_) => SearchRow { n, q, index, z_without: f64::NAN, z_with: f64::NAN, separation: f64::NAN, bound: f64::NAN, j_needed: None, n_total: None },
            }
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, mode: Mode, rows: &Rows) -> Summary {
    let mut s = Summary {
        mode,
        config_hash: cfg.hash(),
        rows: rows.len(),
        converged: 0,
        failures: 0,
        nonconverged_fraction: 0.0,
        coverage: None,
        scaling: None,
        scaling_note: None,
        total_resource: 0.0,
        extra: Vec::new(),
    };
    match rows {
        Rows::Runs(runs) => {
            s.converged = runs.iter().filter(|r| r.record.converged).count();
            s.failures = runs.iter().filter(|r| r.record.failure.is_some()).count();
            if !runs.is_empty() {
                s.nonconverged_fraction = 1.0 - s.converged as f64 / runs.len() as f64;
                s.coverage = Some(runs.iter().filter(|r| r.record.covers_truth()).count() as f64 / runs.len() as f64);
            }
            s.total_resource = runs.iter().map(|r| r.record.resource).sum();
            let points: Vec<(f64, f64)> =
                runs.iter().filter(|r| r.record.converged).map(|r| (r.target, r.record.resource)).collect();
            match scaling_report(&points, cfg.seed) {
                Ok(rep) => s.scaling = Some(rep),
                Err(e) => s.scaling_note = Some(e.to_string()),
            }
            let mut targets = cfg.policy.target_precision.clone();
            targets.sort_by(|a, b| b.total_cmp(a));
            targets.dedup();
            for t in targets {
                let sel: Vec<&RunRow> = runs.iter().filter(|r| r.target == t && r.record.converged).collect();
                if !sel.is_empty() {
                    let mean = sel.iter().map(|r| r.record.resource).sum::<f64>() / sel.len() as f64;
                    s.extra.push((format!("mean_resource@{t:e}"), fmt_f(mean)));
                }
            }
            if mode == Mode::Multiparam {
                let params = runs.iter().map(|r| r.param).max().map_or(0, |m| m + 1);
                for p in 0..params {
                    let sel: Vec<&RunRow> = runs.iter().filter(|r| r.param == p).collect();
                    let cov = sel.iter().filter(|r| r.record.covers_truth()).count() as f64 / sel.len() as f64;
                    s.extra.push((format!("coverage_param{p}"), fmt_f(cov)));
                }
            }
        }
        Rows::Trace(trace) => {
            s.converged = trace.len();
            let worst = trace
                .iter()
                .map(|r| (r.cos_exact - r.cos_closed).abs().max((r.sin_exact - r.sin_closed).abs()))
                .fold(0.0, f64::max);
            s.extra.push(("max_identity_error".into(), fmt_f(worst)));
            if !trace.is_empty() {
                let n = trace.len() as f64;
                let rms = (trace.iter().map(|r| (r.cos_hat - r.cos_exact).powi(2)).sum::<f64>() / n).sqrt();
                s.extra.push(("cos_rms_error".into(), fmt_f(rms)));
                s.extra.push(("effective_delta".into(), fmt_f(trace[0].effective_delta)));
            }
        }
        Rows::Search(search) => {
            s.converged = search.iter().filter(|r| r.j_needed.is_some()).count();
            s.failures = search.iter().filter(|r| r.separation.is_nan()).count();
            s.total_resource = search.iter().filter_map(|r| r.n_total).map(|v| v as f64).sum();
            let worst = search.iter().map(|r| r.separation / r.bound).filter(|v| v.is_finite()).fold(0.0, f64::max);
            let violations = search.iter().filter(|r| r.separation > r.bound + 1e-12).count();
            s.extra.push(("max_separation_over_bound".into(), fmt_f(worst)));
            s.extra.push(("bound_violations".into(), violations.to_string()));
            let hybrid = search.iter().filter(|r| r.separation > 2.0 * r.bound + 1e-12).count();
            s.extra.push(("hybrid_bound_violations".into(), hybrid.to_string()));
            let pts: Vec<(f64, f64)> =
                search.iter().filter_map(|r| r.n_total.map(|t| (r.n as f64, (t as f64).log2()))).collect();
            let mut ns: Vec<usize> = search.iter().map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            if ns.len() >= 3 && pts.len() >= 3 {
                if let Ok((slope, _)) = ols(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>()) {
                    s.extra.push(("log2_ntotal_vs_n_slope".into(), fmt_f(slope)));
                }
            } else {
                s.scaling_note = Some("log2(N) slope needs at least 3 qubit counts".into());
            }
        }
    }
    s
}

/// Shortest round-trip representation, in exponent form outside
/// `[1e-4, 1e15)`; `NaN` for undefined values.
pub fn fmt_f(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "NaN".into()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
