//! Quantum proposal matrices from unitary evolution of the transverse-field
//! spin glass H = (1-gamma) alpha H_c + gamma sum_i X_i.
//!
//! H is real symmetric in the computational basis (H_c is diagonal, X is
//! real), so every evolution here is built from real symmetric
//! eigendecompositions and the Born-rule probabilities |<s|U|s0>|^2.

use crate::chain::{ChainError, ProposalKind, ProposalMatrix};
use crate::instances::{energy_table, scale_factor_alpha, IsingInstance, InstanceError};
use crate::linalg;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnitaryError {
    #[error("gamma {0} outside [0, 1.05]")]
    GammaOutOfRange(f64),
    #[error("evolution time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("Trotter step dt={dt} and t={t} give zero steps")]
    ZeroTrotterSteps { t: f64, dt: f64 },
    #[error("time-dependent step count {0} must be even and positive")]
    BadStepCount(usize),
    #[error("time-dependent proposal asymmetry {0:.3e} exceeds 1e-6; schedule violates gamma(s) = gamma(1-s)")]
    AsymmetricTimeDependent(f64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// The mixing weight may probe slightly above 1 (schedule optimization);
/// hard physical work stays in [0, 1].
pub const GAMMA_MAX: f64 = 1.05;

/// Dense real-symmetric quantum Hamiltonian for one instance and gamma.
#[derive(Debug, Clone)]
pub struct QuantumHamiltonian {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub matrix: Array2<f64>,
}

/// Cached eigendecomposition of a quantum Hamiltonian, reusable across many
/// evolution times.
#[derive(Debug, Clone)]
pub struct HamiltonianEigen {
    pub n: usize,
    pub values: Array1<f64>,
    /// Eigenvectors as columns.
    pub vectors: Array2<f64>,
}

/// Build H = (1-gamma) alpha H_c + gamma sum_i X_i as a dense matrix.
pub fn build_hamiltonian(inst: &IsingInstance, gamma: f64) -> Result<QuantumHamiltonian, UnitaryError> {
    if !(0.0..=GAMMA_MAX).contains(&gamma) {
        return Err(UnitaryError::GammaOutOfRange(gamma));
    }
    let alpha = scale_factor_alpha(inst)?;
    let energies = energy_table(inst);
    let dim = 1usize << inst.n;
    let mut h = Array2::zeros((dim, dim));
    let diag_weight = (1.0 - gamma) * alpha;
    for s in 0..dim {
        h[[s, s]] = diag_weight * energies[s];
        for b in 0..inst.n {
            h[[s, s ^ (1 << b)]] = gamma;
        }
    }
    Ok(QuantumHamiltonian { n: inst.n, gamma, alpha, matrix: h })
}

pub fn decompose(h: &QuantumHamiltonian) -> Result<HamiltonianEigen, UnitaryError> {
    let (values, vectors) = linalg::eigh(&h.matrix)?;
    Ok(HamiltonianEigen { n: h.n, values, vectors })
}

/// Born-rule proposal from the cached eigendecomposition at evolution time t:
/// Q(s|s0) = |<s| V e^{-i Lambda t} V^T |s0>|^2.
pub fn proposal_from_eigen(eigen: &HamiltonianEigen, t: f64) -> Result<ProposalMatrix, UnitaryError> {
    if t <= 0.0 {
        return Err(UnitaryError::NonPositiveTime(t));
    }
    let dim = 1usize << eigen.n;
    let mut vc = eigen.vectors.clone();
    let mut vs = eigen.vectors.clone();
    for k in 0..dim {
        let (sin, cos) = (eigen.values[k] * t).sin_cos();
        for i in 0..dim {
            vc[[i, k]] *= cos;
            vs[[i, k]] *= sin;
        }
    }
    let re = linalg::dgemm(&vc, false, &eigen.vectors, true);
    let im = linalg::dgemm(&vs, false, &eigen.vectors, true);
    let mut q = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            q[[i, j]] = re[[i, j]] * re[[i, j]] + im[[i, j]] * im[[i, j]];
        }
    }
    Ok(ProposalMatrix::new(eigen.n, q, ProposalKind::ExactUnitary, true)?)
}

/// Exact-unitary proposal at (gamma, t).
pub fn exact_unitary_proposal(
    inst: &IsingInstance,
    gamma: f64,
    t: f64,
) -> Result<ProposalMatrix, UnitaryError> {
    let h = build_hamiltonian(inst, gamma)?;
    let eigen = decompose(&h)?;
    proposal_from_eigen(&eigen, t)
}

/// Dense unitary e^{-i gamma t sum_i X_i}; entry (s, s0) depends only on
/// the Hamming distance d: (-i)^d cos^{n-d}(gamma t) sin^d(gamma t).
fn mixing_exponential(n: usize, angle: f64) -> Array2<Complex64> {
    let dim = 1usize << n;
    let (sin, cos) = angle.sin_cos();
    // Precompute (-i sin)^d cos^{n-d} for d = 0..n.
    let minus_i = Complex64::new(0.0, -1.0);
    let mut by_distance = vec![Complex64::new(0.0, 0.0); n + 1];
    for (d, v) in by_distance.iter_mut().enumerate() {
        *v = (minus_i * sin).powu(d as u32) * Complex64::new(cos.powi((n - d) as i32), 0.0);
    }
    let mut u = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            u[[i, j]] = by_distance[(i ^ j).count_ones() as usize];
        }
    }
    u
}

/// Diagonal phases e^{-i w H_c(s)} with weight w.
fn diagonal_phases(energies: &Array1<f64>, w: f64) -> Vec<Complex64> {
    energies.iter().map(|&e| Complex64::from_polar(1.0, -w * e)).collect()
}

fn scale_rows(u: &mut Array2<Complex64>, d: &[Complex64]) {
    for (i, mut row) in u.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v *= d[i];
        }
    }
}

fn scale_cols(u: &mut Array2<Complex64>, d: &[Complex64]) {
    for mut row in u.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= d[j];
        }
    }
}

fn matrix_power(base: &Array2<Complex64>, mut exp: usize) -> Array2<Complex64> {
    let dim = base.dim().0;
    let mut result: Option<Array2<Complex64>> = None;
    let mut acc = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = Some(match result {
                None => acc.clone(),
                Some(r) => linalg::zgemm(&r, false, &acc, false),
            });
        }
        exp >>= 1;
        if exp > 0 {
            acc = linalg::zgemm(&acc, false, &acc, false);
        }
    }
    result.unwrap_or_else(|| {
        let mut id = Array2::zeros((dim, dim));
        for i in 0..dim {
            id[[i, i]] = Complex64::new(1.0, 0.0);
        }
        id
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

/// Number of Trotter steps m = round(t/dt); residual beyond 1e-9 is
/// reported via the returned flag rather than silently rescaling time.
pub fn trotter_steps(t: f64, dt: f64) -> Result<(usize, bool), UnitaryError> {
    let m = (t / dt).round() as i64;
    if m <= 0 {
        return Err(UnitaryError::ZeroTrotterSteps { t, dt });
    }
    let residual = (t - m as f64 * dt).abs();
    Ok((m as usize, residual > 1e-9))
}

/// Dense Trotterized unitary proposal. First order is
/// (e^{-i H_Z dt} e^{-i H_X dt})^m; second order conjugates it with
/// diagonal half-step phases, which only changes entries by phases and
/// therefore leaves Q untouched.
pub fn trotter_unitary_proposal(
    inst: &IsingInstance,
    gamma: f64,
    t: f64,
    dt: f64,
    order: TrotterOrder,
) -> Result<ProposalMatrix, UnitaryError> {
    if !(0.0..=GAMMA_MAX).contains(&gamma) {
        return Err(UnitaryError::GammaOutOfRange(gamma));
    }
    let (m, _warn) = trotter_steps(t, dt)?;
    let alpha = scale_factor_alpha(inst)?;
    let energies = energy_table(inst);
    let diag_weight = (1.0 - gamma) * alpha;
    let mut step = mixing_exponential(inst.n, gamma * dt);
    let z_phases = diagonal_phases(&energies, diag_weight * dt);
    scale_rows(&mut step, &z_phases);
    let mut u = matrix_power(&step, m);
    if order == TrotterOrder::Second {
        let half = diagonal_phases(&energies, diag_weight * dt / 2.0);
        let half_conj: Vec<Complex64> = half.iter().map(|z| z.conj()).collect();
        scale_rows(&mut u, &half_conj);
        scale_cols(&mut u, &half);
    }
    let dim = 1usize << inst.n;
    let mut q = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            q[[i, j]] = u[[i, j]].norm_sqr();
        }
    }
    Ok(ProposalMatrix::new(inst.n, q, ProposalKind::Trotter, true)?)
}

/// Symmetric piecewise-cubic schedule gamma(s) on s = t/tau in [0, 1],
/// parametrized by five control values at s = 0.1 .. 0.5 and mirrored to
/// [0.5, 1], with clamped endpoints gamma(0) = gamma(1) = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub tau: f64,
    pub control_values: [f64; 5],
    #[serde(skip)]
    spline: Option<CubicSpline>,
}

impl Schedule {
    pub fn new(tau: f64, control_values: [f64; 5]) -> Self {
        let mut s = Self { tau, control_values, spline: None };
        s.spline = Some(s.build_spline());
        s
    }

    pub fn constant(tau: f64, gamma: f64) -> Self {
        Self::new(tau, [gamma; 5])
    }

    fn build_spline(&self) -> CubicSpline {
        // Knots 0, 0.1, ..., 0.9, 1 with mirrored values and zero endpoints.
        let xs: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let mut ys = vec![0.0; 11];
        for (k, &v) in self.control_values.iter().enumerate() {
            ys[k + 1] = v;
            ys[10 - (k + 1)] = v;
        }
        CubicSpline::natural(&xs, &ys)
    }

    /// gamma at dimensionless time s; evaluated at min(s, 1-s) so the
    /// mirror symmetry holds exactly. Values clipped to [0, GAMMA_MAX].
    pub fn gamma(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let s = s.min(1.0 - s);
        let spline = self.spline.as_ref().expect("schedule spline built in constructor");
        spline.eval(s).clamp(0.0, GAMMA_MAX)
    }

    /// Rebuild the spline after deserialization.
    pub fn rebuild(&mut self) {
        self.spline = Some(self.build_spline());
    }
}

/// Natural cubic spline on a fixed knot grid.
#[derive(Debug, Clone)]
struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    fn natural(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        // Tridiagonal solve for second derivatives, natural boundaries.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        b[0] = 1.0;
        b[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            d[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        // Thomas algorithm.
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / b[0];
        dp[0] = d[0] / b[0];
        for i in 1..n {
            let m = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / m;
            dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
        }
        let mut second = vec![0.0; n];
        second[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = dp[i] - cp[i] * second[i + 1];
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), second }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let mut i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        };
        if x < self.xs[i] && i > 0 {
            i -= 1;
        }
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

/// Time-dependent proposal: midpoint-sampled piecewise-constant
/// exponentials on a mirror-symmetric grid,
/// U = prod_k e^{-i H(gamma((k+1/2)/steps)) tau/steps}.
pub fn time_dependent_proposal(
    inst: &IsingInstance,
    schedule: &Schedule,
    steps: usize,
) -> Result<ProposalMatrix, UnitaryError> {
    if steps == 0 || steps % 2 != 0 {
        return Err(UnitaryError::BadStepCount(steps));
    }
    let dim = 1usize << inst.n;
    let dt = schedule.tau / steps as f64;
    // Only the first half of the gamma grid is distinct; the second half
    // mirrors it. Cache step unitaries by half-index.
    let mut u: Option<Array2<Complex64>> = None;
    let mut cached: Vec<Array2<Complex64>> = Vec::with_capacity(steps / 2);
    for k in 0..steps {
        let step_u = if k < steps / 2 {
            let s_mid = (k as f64 + 0.5) / steps as f64;
            let gamma = schedule.gamma(s_mid);
            let h = build_hamiltonian(inst, gamma)?;
            let eigen = decompose(&h)?;
            let mut vc = eigen.vectors.clone();
            let mut vs = eigen.vectors.clone();
            for q in 0..dim {
                let (sin, cos) = (eigen.values[q] * dt).sin_cos();
                for i in 0..dim {
                    vc[[i, q]] *= cos;
                    vs[[i, q]] *= sin;
                }
            }
            let re = linalg::dgemm(&vc, false, &eigen.vectors, true);
            let im = linalg::dgemm(&vs, false, &eigen.vectors, true);
            let mut su = Array2::zeros((dim, dim));
            for i in 0..dim {
                for j in 0..dim {
                    su[[i, j]] = Complex64::new(re[[i, j]], -im[[i, j]]);
                }
            }
            cached.push(su.clone());
            su
        } else {
            cached[steps - 1 - k].clone()
        };
        u = Some(match u {
            None => step_u,
            Some(acc) => linalg::zgemm(&step_u, false, &acc, false),
        });
    }
    let u = u.expect("steps > 0");
    let mut q = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            q[[i, j]] = u[[i, j]].norm_sqr();
        }
    }
    // The mirror grid makes U symmetric for symmetric schedules; anything
    // beyond 1e-6 signals a schedule that violates gamma(s) = gamma(1-s).
    let mut asym: f64 = 0.0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            asym = asym.max((q[[i, j]] - q[[j, i]]).abs());
        }
    }
    if asym > 1e-6 {
        return Err(UnitaryError::AsymmetricTimeDependent(asym));
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = 0.5 * (q[[i, j]] + q[[j, i]]);
            q[[i, j]] = v;
            q[[j, i]] = v;
        }
    }
    Ok(ProposalMatrix::new(inst.n, q, ProposalKind::TimeDependent, true)?)
}

/// Symmetric QAOA-style proposal U = V^T V with
/// V = [U_C(theta) U_B(theta)]^p, U_B = e^{-i H_mix theta},
/// U_C = e^{-i alpha H_c theta}, and one tied parameter theta.
pub fn qaoa_proposal(inst: &IsingInstance, theta: f64, p: usize) -> Result<ProposalMatrix, UnitaryError> {
    assert!(p >= 1, "QAOA depth must be at least 1");
    let alpha = scale_factor_alpha(inst)?;
    let energies = energy_table(inst);
    let dim = 1usize << inst.n;
    let mut layer = mixing_exponential(inst.n, theta);
    let phases = diagonal_phases(&energies, alpha * theta);
    scale_rows(&mut layer, &phases);
    let v = matrix_power(&layer, p);
    let u = linalg::zgemm(&v, true, &v, false);
    let mut q = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            q[[i, j]] = u[[i, j]].norm_sqr();
        }
    }
    Ok(ProposalMatrix::new(inst.n, q, ProposalKind::Qaoa, true)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QaoaObjective {
    Gap,
    AcceptanceRate,
}

/// Grid search for the tied QAOA parameter; maximizes mean gap or
/// minimizes mean acceptance rate over the ensemble.
pub fn optimize_qaoa_theta(
    instances: &[IsingInstance],
    p: usize,
    objective: QaoaObjective,
    temperature: f64,
    grid: &[f64],
) -> Result<(f64, Vec<(f64, f64)>), UnitaryError> {
    let mut curve = Vec::with_capacity(grid.len());
    for &theta in grid {
        let mut acc = 0.0;
        for inst in instances {
            let q = qaoa_proposal(inst, theta, p)?;
            let target = crate::instances::boltzmann_target(inst, temperature)?;
            match objective {
                QaoaObjective::Gap => {
                    let tm = crate::chain::mh_transition(&q, &target, false)?;
                    acc += crate::chain::spectral_gap(&tm)?.delta;
                }
                QaoaObjective::AcceptanceRate => {
                    acc += crate::chain::exact_acceptance_rate(&q, &target);
                }
            }
        }
        curve.push((theta, acc / instances.len() as f64));
    }
    let best = match objective {
        QaoaObjective::Gap => curve
            .iter()
            .cloned()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("nonempty grid"),
        QaoaObjective::AcceptanceRate => curve
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("nonempty grid"),
    };
    Ok((best.0, curve))
}

/// Default theta grid: 101 points on [0.01, 1.5].
pub fn default_theta_grid() -> Vec<f64> {
    (0..101).map(|k| 0.01 + k as f64 * (1.5 - 0.01) / 100.0).collect()
}

/// Trotter-step objective f(dt; n) = delta(dt; n) * dt / t.
pub fn trotter_objective(delta: f64, dt: f64, t: f64) -> f64 {
    delta * dt / t
}

/// Parameter ranges for the randomized strategy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RandomizedRanges {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for RandomizedRanges {
    fn default() -> Self {
        Self { gamma_min: 0.25, gamma_max: 0.6, t_min: 2.0, t_max: 20.0 }
    }
}

/// Randomized strategy: the effective proposal is the expectation of the
/// exact-unitary proposal over uniform (gamma, t) draws, approximated by
/// averaging `n_draws` sampled matrices. Averaging preserves symmetry and
/// row stochasticity. Returns the averaged matrix and the drawn parameters.
pub fn randomized_strategy_proposal(
    inst: &IsingInstance,
    rng: &mut ChaCha8Rng,
    ranges: &RandomizedRanges,
    n_draws: usize,
) -> Result<(ProposalMatrix, Vec<(f64, f64)>), UnitaryError> {
    assert!(n_draws >= 1);
    let dim = 1usize << inst.n;
    let mut avg = Array2::zeros((dim, dim));
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let gamma = rng.gen_range(ranges.gamma_min..ranges.gamma_max);
        let t = rng.gen_range(ranges.t_min..ranges.t_max);
        draws.push((gamma, t));
        let q = exact_unitary_proposal(inst, gamma, t)?;
        avg = avg + &q.q;
    }
    avg.mapv_inplace(|v| v / n_draws as f64);
    Ok((ProposalMatrix::new(inst.n, avg, ProposalKind::ExactUnitary, true)?, draws))
}
