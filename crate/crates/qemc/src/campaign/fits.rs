//! Least-squares fits for the scaling analyses: exponential gap scaling
//! delta ~ 2^{-k n} fitted linearly in log2, and plain linear fits for the
//! hitting-time study.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// y = slope * x + intercept with residual diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, FitError> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(FitError::TooFewPoints { needed: 2, got: n.min(ys.len()) });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let slope_stderr =
        if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, slope_stderr, r_squared, points: n })
}

/// Ensemble-mean gaps per size and the fitted exponent of
/// delta = prefactor * 2^{-k n}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub kind: String,
    pub sizes: Vec<usize>,
    pub mean_delta: Vec<f64>,
    pub std_delta: Vec<f64>,
    /// Sizes dropped because their mean gap was not positive.
    pub excluded_sizes: Vec<usize>,
    pub k: f64,
    pub k_stderr: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Fit log2(mean delta) = log2(prefactor) - k n by least squares over the
/// per-size ensemble means.
pub fn fit_scaling(
    kind: &str,
    per_size: &[(usize, Vec<f64>)],
) -> Result<ScalingFit, FitError> {
    let mut sizes = Vec::new();
    let mut mean_delta = Vec::new();
    let mut std_delta = Vec::new();
    let mut excluded = Vec::new();
    for (n, deltas) in per_size {
        let m = deltas.iter().sum::<f64>() / deltas.len() as f64;
        if m <= 0.0 {
            excluded.push(*n);
            continue;
        }
        let var = deltas.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / deltas.len() as f64;
        sizes.push(*n);
        mean_delta.push(m);
        std_delta.push(var.sqrt());
    }
    if sizes.len() < 4 {
        return Err(FitError::TooFewPoints { needed: 4, got: sizes.len() });
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = mean_delta.iter().map(|d| d.log2()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(ScalingFit {
        kind: kind.to_string(),
        sizes,
        mean_delta,
        std_delta,
        excluded_sizes: excluded,
        k: -fit.slope,
        k_stderr: fit.slope_stderr,
        prefactor: fit.intercept.exp2(),
        r_squared: fit.r_squared,
    })
}
