//! Campaign summaries: coverage, log-log scaling fits, bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::stream_rng;
use crate::record::RunRecord;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Ordinary least squares `(slope, intercept)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least two paired points, got {} and {}", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("abscissae do not vary".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub slope: f64,
    pub ci95: (f64, f64),
    pub points: usize,
    pub distinct_targets: usize,
}

/// Slope of `log(resource)` against `log(1/Δ_θ)` with a seeded bootstrap
/// 95% interval over the individual points.
pub fn scaling_report(points: &[(f64, f64)], seed: u64) -> Result<ScalingReport> {
    let mut targets: Vec<f64> = points.iter().map(|p| p.0).collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    if targets.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "scaling fit needs at least 3 distinct target precisions, got {}",
            targets.len()
        )));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0 && r > 0.0)) {
        return Err(Error::InvalidParameter("targets and resources must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, _) = ols(&xs, &ys)?;

    let mut rng = stream_rng(seed, u64::MAX, 0);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let (mut bx, mut by) = (vec![0.0; xs.len()], vec![0.0; xs.len()]);
    while slopes.len() < BOOTSTRAP_RESAMPLES {
        for k in 0..xs.len() {
            let i = rng.random_range(0..xs.len());
            bx[k] = xs[i];
            by[k] = ys[i];
        }
        if let Ok((s, _)) = ols(&bx, &by) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let pick = |q: f64| slopes[((q * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    Ok(ScalingReport { slope, ci95: (pick(0.025), pick(0.975)), points: points.len(), distinct_targets: targets.len() })
}

/// Scaling fit over converged runs, resource against their target precision.
pub fn scaling_report_records(records: &[RunRecord], seed: u64) -> Result<ScalingReport> {
    let points: Vec<(f64, f64)> =
        records.iter().filter(|r| r.converged).map(|r| (r.target_precision, r.resource)).collect();
    scaling_report(&points, seed)
}

/// Fraction of runs whose nominal 95% interval contains the truth.
pub fn coverage(records: &[RunRecord]) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().filter(|r| r.covers_truth()).count() as f64 / records.len() as f64
}

/// Maps `f` over `0..trials`, in parallel when enabled; output order is by trial.
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(power: f64) -> Vec<(f64, f64)> {
        [1e-3f64, 1e-4, 1e-5, 1e-6, 1e-7].iter().map(|&t| (t, 3.0 * (1.0 / t).powf(power))).collect()
    }

    #[test]
    fn exact_linear_resource() {
        let r = scaling_report(&synthetic(1.0), 1).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-3);
        assert!(r.ci95.0 <= r.slope + 1e-9 && r.slope - 1e-9 <= r.ci95.1);
    }

    #[test]
    fn exact_quadratic_resource() {
        let r = scaling_report(&synthetic(2.0), 1).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_targets() {
        let pts = vec![(1e-3, 1.0), (1e-3, 2.0), (1e-4, 10.0)];
        assert!(scaling_report(&pts, 0).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let mut pts = synthetic(1.0);
        pts.iter_mut().enumerate().for_each(|(i, p)| p.1 *= 1.0 + 0.05 * (i as f64).sin());
        assert_eq!(scaling_report(&pts, 7).unwrap(), scaling_report(&pts, 7).unwrap());
    }
}
