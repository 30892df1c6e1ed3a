use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdrError {
    #[error("need at least 3 aligned samples, got {0}")]
    TooFewSamples(usize),
    #[error("series are not aligned: test has {test} samples, reference {reference}")]
    Misaligned { test: usize, reference: usize },
    #[error("sample {index} is at iteration {test} in the test series but {reference} in the reference")]
    IterationMismatch { index: usize, test: usize, reference: usize },
}

/// Least-squares fit of dT(n) = alpha * n + beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdrReport {
    pub alpha: f64,
    pub beta: f64,
    pub samples: usize,
    pub delta: f64,
    /// Largest |dT| over the samples.
    pub max_abs_dt: f64,
    pub pass: bool,
}

/// Fits the temperature difference `test - reference` against iteration.
///
/// Both series are `(iteration, temperature)` pairs at the same iterations.
pub fn compute_tdr(test: &[(usize, f64)], reference: &[(usize, f64)], delta: f64) -> Result<TdrReport, TdrError> {
    if test.len() != reference.len() {
        return Err(TdrError::Misaligned {
            test: test.len(),
            reference: reference.len(),
        });
    }
    if test.len() < 3 {
        return Err(TdrError::TooFewSamples(test.len()));
    }
    let mut pts = Vec::with_capacity(test.len());
    for (index, (t, r)) in test.iter().zip(reference).enumerate() {
        if t.0 != r.0 {
            return Err(TdrError::IterationMismatch {
                index,
                test: t.0,
                reference: r.0,
            });
        }
        pts.push((t.0 as f64, t.1 - r.1));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let beta = my - alpha * mx;
    let max_abs_dt = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    Ok(TdrReport {
        alpha,
        beta,
        samples: pts.len(),
        delta,
        max_abs_dt,
        pass: max_abs_dt <= delta,
    })
}

/// Default threshold: the largest |dT| between a reference series and any of
/// several runs that differ from it only in the random seed.
pub fn default_delta(reference: &[(usize, f64)], seed_runs: &[Vec<(usize, f64)>]) -> Result<f64, TdrError> {
    let mut worst: f64 = 0.0;
    for run in seed_runs {
        worst = worst.max(compute_tdr(run, reference, f64::INFINITY)?.max_abs_dt);
    }
    Ok(worst)
}
