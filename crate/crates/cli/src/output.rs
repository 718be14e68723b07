//! CSV and SVG writers. Every CSV starts with a `#` comment naming the mode,
//! seed and configuration hash; columns are fixed per mode.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dqc1m_core::record::RunRecord;

use crate::campaign::{fmt_f, CampaignResult, Rows, RunRow, SearchRow, Summary, TraceRow};
use crate::config::ExperimentConfig;

pub const STEPS_FILE: &str = "steps.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SVG_FILE: &str = "scaling.svg";

/// Rendered file contents, kept in memory so callers can compare bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub steps: Vec<u8>,
    pub trials: Vec<u8>,
    pub summary: Vec<u8>,
}

pub fn header(cfg: &ExperimentConfig, summary: &Summary) -> String {
    format!("# dqc1m mode={} seed={} config_sha256={}\n", summary.mode, cfg.seed, summary.config_hash)
}

pub fn render(cfg: &ExperimentConfig, result: &CampaignResult) -> Rendered {
    let head = header(cfg, &result.summary);
    let (steps, trials) = match &result.rows {
        Rows::Runs(rows) => (run_steps(rows), run_trials(rows)),
        Rows::Trace(rows) => (trace_steps(rows), trace_trials(rows)),
        Rows::Search(rows) => (search_steps(rows), search_trials(rows)),
    };
    let with_head = |body: Vec<u8>| {
        let mut out = head.clone().into_bytes();
        out.extend(body);
        out
    };
    Rendered { steps: with_head(steps), trials: with_head(trials), summary: with_head(summary_csv(&result.summary)) }
}

/// Writes the CSVs into `dir`, creating it when needed.
pub fn write_all(dir: &Path, rendered: &Rendered) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in [(STEPS_FILE, &rendered.steps), (TRIALS_FILE, &rendered.trials), (SUMMARY_FILE, &rendered.summary)] {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn opt_u(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_steps(rows: &[RunRow]) -> Vec<u8> {
    let header = [
        "run", "target_precision", "trial", "param", "step", "signal", "t", "winding", "ratio", "phase_comp", "x",
        "theta_hat", "scaled_dev", "precision", "resource", "outlier", "phase_offset", "trotter_order",
        "trotter_slices", "delta_gamma", "gamma_measured",
    ];
    let lines = rows.iter().flat_map(|r| {
        r.record.steps.iter().map(move |s| {
            let tr = s.trotter.as_ref();
            vec![
                r.run.to_string(),
                fmt_f(r.target),
                r.trial.to_string(),
                r.param.to_string(),
                s.step.to_string(),
                s.signal.label().to_string(),
                fmt_f(s.t),
                s.winding.to_string(),
                fmt_f(s.ratio),
                fmt_f(s.phase_comp),
                fmt_f(s.x),
                fmt_f(s.theta_hat),
                fmt_f(s.scaled_dev),
                fmt_f(s.precision),
                fmt_f(s.resource),
                s.outlier.to_string(),
                fmt_f(s.phase_offset),
                tr.map(|t| t.order.to_string()).unwrap_or_default(),
                tr.map(|t| t.slices.to_string()).unwrap_or_default(),
                opt_f(tr.map(|t| t.delta_gamma)),
                opt_f(tr.map(|t| t.gamma_measured)),
            ]
        })
    });
    table(&header, lines)
}

fn run_trials(rows: &[RunRow]) -> Vec<u8> {
    let header = [
        "run", "target_precision", "trial", "param", "theta_true", "theta0_hat", "theta_hat", "precision", "ci_low",
        "ci_high", "covered", "converged", "steps", "resource", "runs", "final_t", "failure",
    ];
    let lines = rows.iter().map(|r| {
        let rec: &RunRecord = &r.record;
        let (lo, hi) = if rec.steps.is_empty() { (f64::NAN, f64::NAN) } else { rec.interval() };
        vec![
            r.run.to_string(),
            fmt_f(r.target),
            r.trial.to_string(),
            r.param.to_string(),
            fmt_f(rec.theta_true),
            fmt_f(rec.theta0_hat),
            fmt_f(if rec.steps.is_empty() { f64::NAN } else { rec.theta_hat() }),
            fmt_f(if rec.steps.is_empty() { f64::NAN } else { rec.precision() }),
            fmt_f(lo),
            fmt_f(hi),
            rec.covers_truth().to_string(),
            rec.converged.to_string(),
            rec.steps.len().to_string(),
            fmt_f(rec.resource),
            rec.runs.to_string(),
            fmt_f(if rec.steps.is_empty() { f64::NAN } else { rec.final_t() }),
            rec.failure.clone().unwrap_or_default(),
        ]
    });
    table(&header, lines)
}

fn trace_steps(rows: &[TraceRow]) -> Vec<u8> {
    let header = [
        "trial", "point", "theta_t", "cos_exact", "sin_exact", "cos_closed", "sin_closed", "cos_hat", "sin_hat",
        "effective_delta",
    ];
    table(
        &header,
        rows.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.point.to_string(),
                fmt_f(r.theta_t),
                fmt_f(r.cos_exact),
                fmt_f(r.sin_exact),
                fmt_f(r.cos_closed),
                fmt_f(r.sin_closed),
                fmt_f(r.cos_hat),
                fmt_f(r.sin_hat),
                fmt_f(r.effective_delta),
            ]
        }),
    )
}

fn trace_trials(rows: &[TraceRow]) -> Vec<u8> {
    let header = ["trial", "points", "max_identity_error", "cos_rms_error", "sin_rms_error"];
    let mut trials: Vec<u64> = rows.iter().map(|r| r.trial).collect();
    trials.dedup();
    table(
        &header,
        trials.into_iter().map(|t| {
            let sel: Vec<&TraceRow> = rows.iter().filter(|r| r.trial == t).collect();
            let n = sel.len() as f64;
            let worst = sel
                .iter()
                .map(|r| (r.cos_exact - r.cos_closed).abs().max((r.sin_exact - r.sin_closed).abs()))
                .fold(0.0, f64::max);
            let rms = |f: &dyn Fn(&TraceRow) -> f64| (sel.iter().map(|r| f(r).powi(2)).sum::<f64>() / n).sqrt();
            vec![
                t.to_string(),
                sel.len().to_string(),
                fmt_f(worst),
                fmt_f(rms(&|r| r.cos_hat - r.cos_exact)),
                fmt_f(rms(&|r| r.sin_hat - r.sin_exact)),
            ]
        }),
    )
}

fn search_steps(rows: &[SearchRow]) -> Vec<u8> {
    let header = ["n", "q", "index", "z_without_oracle", "z_with_oracle"];
    table(
        &header,
        rows.iter().map(|r| {
            vec![r.n.to_string(), r.q.to_string(), r.index.to_string(), fmt_f(r.z_without), fmt_f(r.z_with)]
        }),
    )
}

fn search_trials(rows: &[SearchRow]) -> Vec<u8> {
    let header = ["n", "q", "index", "separation", "bound", "within_bound", "j_needed", "n_total"];
    table(
        &header,
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.q.to_string(),
                r.index.to_string(),
                fmt_f(r.separation),
                fmt_f(r.bound),
                (r.separation <= r.bound + 1e-12).to_string(),
                opt_u(r.j_needed),
                opt_u(r.n_total),
            ]
        }),
    )
}

pub fn summary_pairs(s: &Summary) -> Vec<(String, String)> {
    let mut out = vec![
        ("mode".to_string(), s.mode.to_string()),
        ("rows".into(), s.rows.to_string()),
        ("converged".into(), s.converged.to_string()),
        ("failures".into(), s.failures.to_string()),
        ("nonconverged_fraction".into(), fmt_f(s.nonconverged_fraction)),
        ("coverage".into(), opt_f(s.coverage)),
        ("scaling_slope".into(), opt_f(s.scaling.map(|r| r.slope))),
        ("scaling_ci95_low".into(), opt_f(s.scaling.map(|r| r.ci95.0))),
        ("scaling_ci95_high".into(), opt_f(s.scaling.map(|r| r.ci95.1))),
        ("scaling_note".into(), s.scaling_note.clone().unwrap_or_default()),
        ("total_resource".into(), fmt_f(s.total_resource)),
    ];
    out.extend(s.extra.iter().cloned());
    out
}

fn summary_csv(s: &Summary) -> Vec<u8> {
    table(&["metric", "value"], summary_pairs(s).into_iter().map(|(k, v)| vec![k, v]))
}

/// Log-log scatter of resource against `1/Δ_θ` with the fitted line.
/// Returns `None` when there is nothing to plot.
pub fn scaling_svg(result: &CampaignResult) -> Option<String> {
    let Rows::Runs(rows) = &result.rows else { return None };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.record.converged && r.record.resource > 0.0)
        .map(|r| ((1.0 / r.target).log10(), r.record.resource.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (x0, x1) = if x1 > x0 { (x0 - 0.2, x1 + 0.2) } else { (x0 - 1.0, x1 + 1.0) };
    let (y0, y1) = if y1 > y0 { (y0 - 0.2, y1 + 0.2) } else { (y0 - 1.0, y1 + 1.0) };
    let (w, h, m) = (640.0, 420.0, 60.0);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" text-anchor=\"middle\">log10(1/target precision)</text>\n\
         <text x=\"16\" y=\"{cy}\" transform=\"rotate(-90 16 {cy})\" text-anchor=\"middle\">log10(resource)</text>\n",
        b = h - m,
        r = w - m,
        cx = w / 2.0,
        ty = h - 20.0,
        cy = h / 2.0,
    );
    for k in (x0.ceil() as i64)..=(x1.floor() as i64) {
        svg += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{k}</text>\n", sx(k as f64), h - m + 16.0);
    }
    for k in (y0.ceil() as i64)..=(y1.floor() as i64) {
        svg += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{k}</text>\n", m - 6.0, sy(k as f64) + 4.0);
    }
    for (x, y) in &pts {
        svg += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n", sx(*x), sy(*y));
    }
    if let Some(rep) = result.summary.scaling {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let line = |x: f64| my + rep.slope * (x - mx);
        svg += &format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">slope {:.3} [{:.3}, {:.3}]</text>\n",
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1)),
            m + 10.0,
            m + 10.0,
            rep.slope,
            rep.ci95.0,
            rep.ci95.1
        );
    }
    svg += "</svg>\n";
    Some(svg)
}
