//! Bayesian optimization of annealing-style schedules with a Matérn-5/2
//! Gaussian-process surrogate and an upper-confidence-bound acquisition.

use crate::chain::{mh_transition, spectral_gap, ChainError};
use crate::instances::{boltzmann_target, InstanceError, IsingInstance};
use crate::unitary::{time_dependent_proposal, Schedule, UnitaryError, GAMMA_MAX};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchedOptError {
    #[error("Cholesky factorization failed even at maximum jitter")]
    CholeskyFailed,
    #[error("observation budget must be larger than the initial design")]
    BudgetTooSmall,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Unitary(#[from] UnitaryError),
}

/// Matérn-5/2 covariance between points at Euclidean distance r.
pub fn matern52(r: f64, length_scale: f64, sigma_f2: f64) -> f64 {
    let a = 5.0f64.sqrt() * r / length_scale;
    sigma_f2 * (1.0 + a + a * a / 3.0) * (-a).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix; None if a pivot goes non-positive.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.dim().0;
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

fn solve_upper_t(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    // Solve L^T x = b.
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// GP surrogate conditioned on observed points.
pub struct GaussianProcess {
    xs: Vec<Vec<f64>>,
    length_scale: f64,
    sigma_f2: f64,
    mean: f64,
    l: Array2<f64>,
    alpha: Array1<f64>,
}

impl GaussianProcess {
    /// Fit with a fixed length scale. Escalating jitter keeps the kernel
    /// matrix factorizable when observations nearly coincide.
    pub fn fit_fixed(xs: &[Vec<f64>], ys: &[f64], length_scale: f64) -> Result<Self, SchedOptError> {
        let n = xs.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let sigma_f2 = if var > 0.0 { var } else { 1.0 };
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                k[[i, j]] = matern52(sq_dist(&xs[i], &xs[j]).sqrt(), length_scale, sigma_f2);
            }
        }
        let mut jitter = 1e-8;
        let l = loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[[i, i]] += jitter * sigma_f2;
            }
            if let Some(l) = cholesky(&kj) {
                break l;
            }
            jitter *= 10.0;
            if jitter > 1e-4 {
                return Err(SchedOptError::CholeskyFailed);
            }
        };
        let centered = Array1::from_iter(ys.iter().map(|y| y - mean));
        let alpha = solve_upper_t(&l, &solve_lower(&l, &centered));
        Ok(Self { xs: xs.to_vec(), length_scale, sigma_f2, mean, l, alpha })
    }

    /// Fit choosing the length scale by maximum marginal likelihood over a
    /// log grid on [0.1, 2.0].
    pub fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Result<Self, SchedOptError> {
        let grid: Vec<f64> = (0..13)
            .map(|k| (0.1f64.ln() + k as f64 * (2.0f64.ln() - 0.1f64.ln()) / 12.0).exp())
            .collect();
        let mut best: Option<(f64, Self)> = None;
        for &ell in &grid {
            let gp = Self::fit_fixed(xs, ys, ell)?;
            let lml = gp.log_marginal_likelihood(ys);
            if best.as_ref().map_or(true, |(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
        Ok(best.expect("nonempty grid").1)
    }

    fn log_marginal_likelihood(&self, ys: &[f64]) -> f64 {
        let n = ys.len() as f64;
        let centered = Array1::from_iter(ys.iter().map(|y| y - self.mean));
        let fit: f64 = centered.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..ys.len()).map(|i| self.l[[i, i]].ln()).sum::<f64>() * 2.0;
        -0.5 * fit - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Posterior mean and standard deviation at x.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.xs.len();
        let kx = Array1::from_iter(
            (0..n).map(|i| matern52(sq_dist(&self.xs[i], x).sqrt(), self.length_scale, self.sigma_f2)),
        );
        let mu = self.mean + kx.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        let v = solve_lower(&self.l, &kx);
        let var = (self.sigma_f2 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (mu, var.sqrt())
    }
}

/// Upper confidence bound acquisition.
pub fn ucb(mu: f64, sigma: f64, kappa: f64) -> f64 {
    mu + kappa * sigma
}

/// Latin hypercube design on the unit box: one sample per stratum along
/// every axis, strata order shuffled independently per axis.
pub fn latin_hypercube(rng: &mut ChaCha8Rng, points: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..points).collect();
        // Fisher-Yates.
        for i in (1..points).rev() {
            let j = rng.gen_range(0..=i);
            strata.swap(i, j);
        }
        columns.push(
            strata
                .into_iter()
                .map(|s| (s as f64 + rng.gen::<f64>()) / points as f64)
                .collect(),
        );
    }
    (0..points).map(|i| (0..dim).map(|d| columns[d][i]).collect()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoResult {
    pub best_x: Vec<f64>,
    pub best_y: f64,
    /// Every evaluated (x, y) in order.
    pub observations: Vec<(Vec<f64>, f64)>,
    /// Running best objective after each evaluation.
    pub incumbent: Vec<f64>,
}

pub const DEFAULT_BO_BUDGET: usize = 60;
const LHS_POINTS: usize = 8;
const ACQ_CANDIDATES: usize = 256;
const KAPPA_START: f64 = 2.5;
const KAPPA_END: f64 = 0.5;

/// Maximize a black-box objective on the unit box [0, 1]^dim.
pub fn bo_optimize<F>(
    mut f: F,
    dim: usize,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BoResult, SchedOptError>
where
    F: FnMut(&[f64]) -> f64,
{
    if budget <= LHS_POINTS {
        return Err(SchedOptError::BudgetTooSmall);
    }
    let mut xs: Vec<Vec<f64>> = latin_hypercube(rng, LHS_POINTS, dim);
    let mut ys: Vec<f64> = xs.iter().map(|x| f(x)).collect();
    let mut incumbent = Vec::with_capacity(budget);
    let mut best = f64::NEG_INFINITY;
    for &y in &ys {
        best = best.max(y);
        incumbent.push(best);
    }
    let iterations = budget - LHS_POINTS;
    for it in 0..iterations {
        let gp = GaussianProcess::fit(&xs, &ys)?;
        let frac = if iterations > 1 { it as f64 / (iterations - 1) as f64 } else { 0.0 };
        let kappa = KAPPA_START + (KAPPA_END - KAPPA_START) * frac;
        // Multistart candidate search plus coordinate-wise local refinement
        // around the best candidate.
        let mut best_x: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
        let mut best_acq = {
            let (mu, s) = gp.predict(&best_x);
            ucb(mu, s, kappa)
        };
        for _ in 1..ACQ_CANDIDATES {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            let (mu, s) = gp.predict(&x);
            let a = ucb(mu, s, kappa);
            if a > best_acq {
                best_acq = a;
                best_x = x;
            }
        }
        let mut width = 0.1;
        while width > 1e-3 {
            let mut improved = false;
            for d in 0..dim {
                for delta in [-width, width] {
                    let mut x = best_x.clone();
                    x[d] = (x[d] + delta).clamp(0.0, 1.0);
                    let (mu, s) = gp.predict(&x);
                    let a = ucb(mu, s, kappa);
                    if a > best_acq {
                        best_acq = a;
                        best_x = x;
                        improved = true;
                    }
                }
            }
            if !improved {
                width /= 2.0;
            }
        }
        let y = f(&best_x);
        best = best.max(y);
        incumbent.push(best);
        xs.push(best_x);
        ys.push(y);
    }
    let (bi, _) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty");
    Ok(BoResult {
        best_x: xs[bi].clone(),
        best_y: ys[bi],
        observations: xs.into_iter().zip(ys).collect(),
        incumbent,
    })
}

/// Outcome of optimizing the five schedule control values for one
/// instance, maximizing the spectral gap of the induced chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleOptResult {
    pub schedule: Schedule,
    pub gap: f64,
    pub incumbent: Vec<f64>,
    /// Every evaluated (control values, objective) in order.
    pub history: Vec<([f64; 5], f64)>,
    pub evaluations: usize,
}

/// Spectral gap of the chain driven by the time-dependent proposal with
/// the given schedule.
pub fn schedule_gap(
    inst: &IsingInstance,
    schedule: &Schedule,
    steps: usize,
    temperature: f64,
) -> Result<f64, SchedOptError> {
    let q = time_dependent_proposal(inst, schedule, steps)?;
    let target = boltzmann_target(inst, temperature)?;
    let tm = mh_transition(&q, &target, false)?;
    Ok(spectral_gap(&tm)?.delta)
}

/// Bayesian-optimize the schedule control values on [0, GAMMA_MAX]^5.
pub fn optimize_schedule(
    inst: &IsingInstance,
    tau: f64,
    steps: usize,
    temperature: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ScheduleOptResult, SchedOptError> {
    let mut failures = 0usize;
    let result = bo_optimize(
        |theta| {
            let controls = [
                theta[0] * GAMMA_MAX,
                theta[1] * GAMMA_MAX,
                theta[2] * GAMMA_MAX,
                theta[3] * GAMMA_MAX,
                theta[4] * GAMMA_MAX,
            ];
            let schedule = Schedule::new(tau, controls);
            match schedule_gap(inst, &schedule, steps, temperature) {
                Ok(gap) => gap,
                Err(_) => {
                    failures += 1;
                    0.0
                }
            }
        },
        5,
        budget,
        rng,
    )?;
    let controls = [
        result.best_x[0] * GAMMA_MAX,
        result.best_x[1] * GAMMA_MAX,
        result.best_x[2] * GAMMA_MAX,
        result.best_x[3] * GAMMA_MAX,
        result.best_x[4] * GAMMA_MAX,
    ];
    let history = result
        .observations
        .iter()
        .map(|(x, y)| {
            (
                [
                    x[0] * GAMMA_MAX,
                    x[1] * GAMMA_MAX,
                    x[2] * GAMMA_MAX,
                    x[3] * GAMMA_MAX,
                    x[4] * GAMMA_MAX,
                ],
                *y,
            )
        })
        .collect();
    Ok(ScheduleOptResult {
        schedule: Schedule::new(tau, controls),
        gap: result.best_y,
        evaluations: result.observations.len(),
        incumbent: result.incumbent,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn matern_limits() {
        // k(0) = sigma_f^2; monotone decreasing in r.
        assert_eq!(matern52(0.0, 0.5, 2.0), 2.0);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let v = matern52(k as f64 * 0.3, 0.5, 2.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = ndarray::array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for k in 0..3 {
                    v += l[[i, k]] * l[[j, k]];
                }
                assert!((v - a[[i, j]]).abs() < 1e-12);
            }
        }
        // Triangular solves: L (L^T x) = b reproduces a linear solve.
        let b = ndarray::array![1.0, -2.0, 0.5];
        let x = solve_upper_t(&l, &solve_lower(&l, &b));
        let ax = a.dot(&x);
        for (u, v) in ax.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = ndarray::array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn gp_interpolates_training_points() {
        let xs = vec![vec![0.1], vec![0.4], vec![0.9]];
        let ys = vec![1.0, -0.5, 2.0];
        let gp = GaussianProcess::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            let (mu, sigma) = gp.predict(x);
            assert!((mu - y).abs() < 1e-2, "mu {mu} vs {y}");
            assert!(sigma < 0.1);
        }
        // Far from data the posterior relaxes towards the prior.
        let (_, sigma_far) = gp.predict(&[50.0]);
        let var = {
            let m = ys.iter().sum::<f64>() / 3.0;
            ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / 3.0
        };
        assert!((sigma_far * sigma_far - var).abs() < 1e-6 * var.max(1.0));
    }

    #[test]
    fn length_scale_selection_tracks_data_smoothness() {
        // Samples of a slowly varying function prefer longer length
        // scales than samples of a fast-oscillating one.
        let xs: Vec<Vec<f64>> = (0..12).map(|k| vec![k as f64 / 11.0]).collect();
        let slow: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let fast: Vec<f64> = xs.iter().map(|x| (40.0 * x[0]).sin()).collect();
        let gp_slow = GaussianProcess::fit(&xs, &slow).unwrap();
        let gp_fast = GaussianProcess::fit(&xs, &fast).unwrap();
        assert!(gp_slow.length_scale() > gp_fast.length_scale());
    }

    #[test]
    fn latin_hypercube_stratified() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = latin_hypercube(&mut rng, 8, 3);
        assert_eq!(pts.len(), 8);
        for d in 0..3 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[d] * 8.0) as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..8).collect::<Vec<_>>(), "axis {d}");
        }
    }

    #[test]
    fn bo_finds_quadratic_optimum_in_5d() {
        // Known-optimum oracle: separable quadratic peaked at x* inside
        // the box; the optimizer must land within 0.1 per coordinate.
        let star = [0.3, 0.7, 0.5, 0.2, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let result = bo_optimize(
            |x| -x.iter().zip(star.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            5,
            DEFAULT_BO_BUDGET,
            &mut rng,
        )
        .unwrap();
        for (a, b) in result.best_x.iter().zip(star.iter()) {
            assert!((a - b).abs() <= 0.1, "coordinate {a} vs {b}");
        }
        // Incumbent trace is monotone non-decreasing.
        for w in result.incumbent.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn bo_deterministic_given_seed() {
        let f = |x: &[f64]| -(x[0] - 0.5).powi(2);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = bo_optimize(f, 1, 12, &mut r1).unwrap();
        let b = bo_optimize(f, 1, 12, &mut r2).unwrap();
        assert_eq!(a.best_x, b.best_x);
        assert_eq!(a.best_y, b.best_y);
    }

    #[test]
    fn schedule_optimization_beats_flat_schedule_on_small_instance() {
        use crate::instances::generate_instance;
        let inst = generate_instance(4, 2).unwrap();
        let tau = 12.0;
        let steps = 16;
        let temperature = 1.0;
        let flat = Schedule::new(tau, [0.45; 5]);
        let flat_gap = schedule_gap(&inst, &flat, steps, temperature).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let result = optimize_schedule(&inst, tau, steps, temperature, 20, &mut rng).unwrap();
        assert!(
            result.gap >= flat_gap - 1e-12,
            "optimized {} vs flat {}",
            result.gap,
            flat_gap
        );
    }
}
