//! Metropolis-Hastings transition matrices, spectral gaps, mixing-time
//! bounds, classical baseline proposals, and an empirical chain sampler.

use crate::instances::{BoltzmannTarget, IsingInstance};
use crate::linalg;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("proposal row {row} sums to {sum}, beyond the 1e-8 renormalization budget")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("target distribution has a zero entry at state {0}")]
    ZeroTargetEntry(usize),
    #[error("dimension mismatch: proposal is {q} states, target is {target}")]
    DimensionMismatch { q: usize, target: usize },
    #[error("spectral gap is zero; mixing time unbounded")]
    UnboundedMixingTime,
    #[error("epsilon must lie in (0, 1/2), got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Tag describing how a proposal matrix was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    Local,
    Uniform,
    ExactUnitary,
    Trotter,
    TimeDependent,
    Qaoa,
    Mps,
}

impl std::fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProposalKind::Local => "local",
            ProposalKind::Uniform => "uniform",
            ProposalKind::ExactUnitary => "exact-unitary",
            ProposalKind::Trotter => "trotter",
            ProposalKind::TimeDependent => "time-dependent",
            ProposalKind::Qaoa => "qaoa",
            ProposalKind::Mps => "mps",
        };
        f.write_str(s)
    }
}

/// Row-stochastic proposal matrix Q; rows are indexed by the current state,
/// columns by the proposed state.
#[derive(Debug, Clone)]
pub struct ProposalMatrix {
    pub n: usize,
    pub q: Array2<f64>,
    pub kind: ProposalKind,
    pub symmetric: bool,
}

impl ProposalMatrix {
    /// Clamp negative floating-point dust to zero and renormalize rows.
    /// Renormalization drift beyond 1e-8 is an error.
    pub fn new(n: usize, mut q: Array2<f64>, kind: ProposalKind, symmetric: bool) -> Result<Self, ChainError> {
        let dim = 1usize << n;
        assert_eq!(q.dim(), (dim, dim), "proposal matrix has wrong dimension");
        q.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
        for row in 0..dim {
            let sum: f64 = q.row(row).sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(ChainError::NonStochasticRow { row, sum });
            }
            for col in 0..dim {
                q[[row, col]] /= sum;
            }
        }
        Ok(Self { n, q, kind, symmetric })
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn max_asymmetry(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                worst = worst.max((self.q[[i, j]] - self.q[[j, i]]).abs());
            }
        }
        worst
    }
}

/// MH transition matrix together with its target.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub p: Array2<f64>,
    pub target: BoltzmannTarget,
    pub detailed_balance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    SymmetricSimilarity,
    GeneralEigen,
}

impl std::fmt::Display for GapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GapMethod::SymmetricSimilarity => "symmetric-similarity",
            GapMethod::GeneralEigen => "general-eigen",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GapResult {
    /// Absolute spectral gap, 1 - max_{i != 1} |lambda_i|.
    pub delta: f64,
    pub lambda2_abs: f64,
    pub method: GapMethod,
}

/// Single-spin-flip proposal: Q(s|s0) = 1/n at Hamming distance one.
pub fn local_proposal(n: usize) -> ProposalMatrix {
    let dim = 1usize << n;
    let mut q = Array2::zeros((dim, dim));
    let p = 1.0 / n as f64;
    for s0 in 0..dim {
        for b in 0..n {
            q[[s0, s0 ^ (1 << b)]] = p;
        }
    }
    ProposalMatrix::new(n, q, ProposalKind::Local, true).expect("local proposal is stochastic")
}

/// Uniform proposal: Q(s|s0) = 2^{-n} for all pairs.
pub fn uniform_proposal(n: usize) -> ProposalMatrix {
    let dim = 1usize << n;
    let q = Array2::from_elem((dim, dim), 1.0 / dim as f64);
    ProposalMatrix::new(n, q, ProposalKind::Uniform, true).expect("uniform proposal is stochastic")
}

/// Assemble the MH transition matrix. With `correct_asymmetry` the Hastings
/// ratio Q(s0|s)/Q(s|s0) enters the acceptance, and the chain satisfies
/// detailed balance even for asymmetric Q. Without it the plain
/// min(1, pi(s)/pi(s0)) rule is used, which assumes a symmetric proposal.
pub fn mh_transition(
    proposal: &ProposalMatrix,
    target: &BoltzmannTarget,
    correct_asymmetry: bool,
) -> Result<TransitionMatrix, ChainError> {
    let dim = proposal.dim();
    if target.probabilities.len() != dim {
        return Err(ChainError::DimensionMismatch { q: dim, target: target.probabilities.len() });
    }
    for (s, &p) in target.probabilities.iter().enumerate() {
        if p <= 0.0 {
            return Err(ChainError::ZeroTargetEntry(s));
        }
    }
    let pi = &target.probabilities;
    let mut p = Array2::zeros((dim, dim));
    for s0 in 0..dim {
        let mut stay = 1.0;
        for s in 0..dim {
            if s == s0 {
                continue;
            }
            let q_fwd = proposal.q[[s0, s]];
            if q_fwd == 0.0 {
                continue;
            }
            let accept = if correct_asymmetry {
                // Q(s0|s) = 0 with Q(s|s0) > 0: proposed but always rejected.
                let q_rev = proposal.q[[s, s0]];
                if q_rev == 0.0 {
                    0.0
                } else {
                    (pi[s] * q_rev / (pi[s0] * q_fwd)).min(1.0)
                }
            } else {
                (pi[s] / pi[s0]).min(1.0)
            };
            let flow = q_fwd * accept;
            p[[s0, s]] = flow;
            stay -= flow;
        }
        p[[s0, s0]] = stay.max(0.0);
    }
    let detailed_balance = correct_asymmetry || proposal.symmetric;
    Ok(TransitionMatrix { p, target: target.clone(), detailed_balance })
}

/// Absolute spectral gap of a transition matrix.
///
/// Reversible chains go through the symmetric similarity transform
/// D^{1/2} P D^{-1/2} with D = diag(pi); otherwise a dense general
/// eigensolver runs on P directly.
pub fn spectral_gap(tm: &TransitionMatrix) -> Result<GapResult, ChainError> {
    if tm.detailed_balance {
        Ok(gap_symmetric_similarity(tm)?)
    } else {
        Ok(gap_general(tm)?)
    }
}

/// Similarity-transform route; valid only under detailed balance.
pub fn gap_symmetric_similarity(tm: &TransitionMatrix) -> Result<GapResult, ChainError> {
    let dim = tm.p.dim().0;
    let pi = &tm.target.probabilities;
    let mut s = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            s[[i, j]] = (pi[i] / pi[j]).sqrt() * tm.p[[i, j]];
        }
    }
    // Symmetrize away roundoff before calling the symmetric solver.
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = 0.5 * (s[[i, j]] + s[[j, i]]);
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    let w = linalg::eigh_vals(&s)?;
    Ok(gap_from_moduli(w.iter().map(|&x| x.abs()), GapMethod::SymmetricSimilarity))
}

/// General dense eigensolver route; works for any row-stochastic P.
pub fn gap_general(tm: &TransitionMatrix) -> Result<GapResult, ChainError> {
    let ev = linalg::eig_vals(&tm.p)?;
    Ok(gap_from_moduli(ev.iter().map(|z| z.norm()), GapMethod::GeneralEigen))
}

fn gap_from_moduli(moduli: impl Iterator<Item = f64>, method: GapMethod) -> GapResult {
    let mut mods: Vec<f64> = moduli.collect();
    mods.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // lambda_1 = 1 up to roundoff; the gap uses the next-largest modulus.
    let lambda2_abs = if mods.len() > 1 { mods[1] } else { 0.0 };
    let delta = (1.0 - lambda2_abs).clamp(0.0, 1.0);
    GapResult { delta, lambda2_abs, method }
}

/// Largest eigenvalue modulus; the stationarity invariant check
/// (lambda_1 == 1) lives in the test suite.
pub fn leading_modulus(tm: &TransitionMatrix) -> Result<f64, ChainError> {
    if tm.detailed_balance {
        let dim = tm.p.dim().0;
        let pi = &tm.target.probabilities;
        let mut s = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                s[[i, j]] = (pi[i] / pi[j]).sqrt() * tm.p[[i, j]];
            }
        }
        let w = linalg::eigh_vals(&s)?;
        Ok(w.iter().fold(0.0f64, |m, &x| m.max(x.abs())))
    } else {
        let ev = linalg::eig_vals(&tm.p)?;
        Ok(ev.iter().fold(0.0f64, |m, z| m.max(z.norm())))
    }
}

/// Standard mixing-time bounds from the spectral gap:
/// lower = (1/delta - 1) ln(1/2eps), upper = (1/delta) ln(1/(eps min pi)).
pub fn mixing_time_bounds(
    delta: f64,
    target: &BoltzmannTarget,
    eps: f64,
) -> Result<(f64, f64), ChainError> {
    if delta == 0.0 {
        return Err(ChainError::UnboundedMixingTime);
    }
    if !(0.0..0.5).contains(&eps) || eps == 0.0 {
        return Err(ChainError::BadEpsilon(eps));
    }
    let pi_min = target.probabilities.iter().cloned().fold(f64::INFINITY, f64::min);
    let lower = (1.0 / delta - 1.0) * (1.0 / (2.0 * eps)).ln();
    let upper = (1.0 / delta) * (1.0 / (eps * pi_min)).ln();
    Ok((lower, upper))
}

/// One proposed move: the candidate state and the forward/reverse proposal
/// probabilities needed for the Hastings ratio.
#[derive(Debug, Clone, Copy)]
pub struct Proposal {
    pub state: usize,
    pub q_forward: f64,
    pub q_reverse: f64,
}

/// Anything that can draw a candidate state from the current one. Matrix
/// proposals sample a row of Q; the MPS sampler evolves and measures.
pub trait ProposalSampler {
    fn propose(&mut self, current: usize, rng: &mut ChaCha8Rng) -> Proposal;
}

/// Samples directly from the rows of a stored proposal matrix.
pub struct MatrixSampler<'a> {
    pub proposal: &'a ProposalMatrix,
}

impl ProposalSampler for MatrixSampler<'_> {
    fn propose(&mut self, current: usize, rng: &mut ChaCha8Rng) -> Proposal {
        let row = self.proposal.q.row(current);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut state = row.len() - 1;
        for (s, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                state = s;
                break;
            }
        }
        Proposal {
            state,
            q_forward: self.proposal.q[[current, state]],
            q_reverse: self.proposal.q[[state, current]],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub states: Vec<usize>,
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
}

/// Run an MH chain with the given proposal sampler. Deterministic for a
/// fixed seed. The Hastings ratio is always included; for symmetric
/// proposals it is identically one.
pub fn run_chain(
    inst: &IsingInstance,
    sampler: &mut dyn ProposalSampler,
    temperature: f64,
    steps: usize,
    seed: u64,
) -> Result<ChainTrace, crate::instances::InstanceError> {
    let energies = crate::instances::energy_table(inst);
    let beta = 1.0 / temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = 0usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepted_flags = Vec::with_capacity(steps);
    states.push(current);
    let mut accepted_count = 0usize;
    for _ in 0..steps {
        let prop = sampler.propose(current, &mut rng);
        let accept_prob = if prop.state == current {
            1.0
        } else if prop.q_reverse == 0.0 {
            0.0
        } else {
            let de = energies[prop.state] - energies[current];
            ((-beta * de).exp() * prop.q_reverse / prop.q_forward).min(1.0)
        };
        let u: f64 = rng.gen();
        let accepted = u < accept_prob;
        if accepted {
            current = prop.state;
            accepted_count += 1;
        }
        states.push(current);
        accepted_flags.push(accepted);
    }
    Ok(ChainTrace {
        states,
        accepted: accepted_flags,
        acceptance_rate: accepted_count as f64 / steps.max(1) as f64,
    })
}

/// Exact stationary acceptance rate sum_s0 pi(s0) sum_s Q(s|s0) A(s|s0),
/// with self-proposals counted as accepted.
pub fn exact_acceptance_rate(proposal: &ProposalMatrix, target: &BoltzmannTarget) -> f64 {
    let dim = proposal.dim();
    let pi = &target.probabilities;
    let mut ar = 0.0;
    for s0 in 0..dim {
        let mut row = proposal.q[[s0, s0]];
        for s in 0..dim {
            if s == s0 {
                continue;
            }
            let q_fwd = proposal.q[[s0, s]];
            if q_fwd == 0.0 {
                continue;
            }
            let q_rev = proposal.q[[s, s0]];
            let a = if q_rev == 0.0 { 0.0 } else { (pi[s] * q_rev / (pi[s0] * q_fwd)).min(1.0) };
            row += q_fwd * a;
        }
        ar += pi[s0] * row;
    }
    ar
}

/// Total variation distance between two distributions.
pub fn total_variation(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Brute-force mixing time: repeatedly apply P to the worst-case initial
/// point mass until every start is within eps of pi in total variation.
pub fn brute_force_mixing_time(tm: &TransitionMatrix, eps: f64, max_steps: usize) -> Option<usize> {
    let dim = tm.p.dim().0;
    let pi = &tm.target.probabilities;
    // Evolve all point masses at once: rows of M are the distributions.
    let mut m = Array2::eye(dim);
    for step in 1..=max_steps {
        m = linalg::dgemm(&m, false, &tm.p, false);
        let worst = (0..dim)
            .map(|i| total_variation(&m.row(i).to_owned(), pi))
            .fold(0.0f64, f64::max);
        if worst <= eps {
            return Some(step);
        }
    }
    None
}
