//! Matrix-product-state simulation of the Trotterized proposal unitary and
//! the quantum-inspired proposal it induces.
//!
//! Site tensors carry indices (left bond, physical, right bond). The state
//! is kept in mixed-canonical form around an orthogonality center so that
//! every SVD truncation is locally optimal. Non-adjacent ZZ gates are
//! routed with SWAP gates.

use crate::chain::{ChainError, ProposalKind, ProposalMatrix};
use crate::instances::{scale_factor_alpha, IsingInstance, InstanceError};
use crate::linalg;
use crate::unitary::trotter_steps;
use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("bond dimension must be at least 1")]
    ZeroBondDimension,
    #[error("basis index {index} out of range for {n} spins")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Unitary(#[from] crate::unitary::UnitaryError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Relative singular-value cutoff below which a Schmidt coefficient is
/// treated as numerically zero.
const RANK_CUTOFF: f64 = 1e-14;

/// Ratios smaller than this are treated as unresolved in the asymmetry
/// statistics: the truncated wave function cannot distinguish them from
/// zero amplitude.
pub const PHI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MpsState {
    pub n: usize,
    pub chi_max: usize,
    /// Rescale the retained Schmidt spectrum to unit weight after each
    /// truncation. Disabled, the norm deficit tracks the discarded weight.
    pub renormalize: bool,
    pub tensors: Vec<Array3<Complex64>>,
    pub center: usize,
    /// Accumulated discarded Schmidt weight (sum of squared singular
    /// values dropped by truncation).
    pub truncation_loss: f64,
    /// SWAP gates applied so far.
    pub swap_gates: usize,
}

impl MpsState {
    /// Product state |index> in the computational basis; all bonds trivial.
    pub fn product_state(n: usize, index: usize, chi_max: usize, renormalize: bool) -> Result<Self, MpsError> {
        if chi_max == 0 {
            return Err(MpsError::ZeroBondDimension);
        }
        if index >= 1 << n {
            return Err(MpsError::IndexOutOfRange { index, n });
        }
        let tensors = (0..n)
            .map(|site| {
                let mut t = Array3::zeros((1, 2, 1));
                t[[0, index >> site & 1, 0]] = Complex64::new(1.0, 0.0);
                t
            })
            .collect();
        Ok(Self { n, chi_max, renormalize, tensors, center: 0, truncation_loss: 0.0, swap_gates: 0 })
    }

    pub fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.dim().2).max().unwrap_or(1)
    }

    /// Squared norm <psi|psi>, contracted exactly.
    pub fn norm_sqr(&self) -> f64 {
        // rho[a, b] = sum over contracted sites of conj(psi) psi.
        let mut rho = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        for t in &self.tensors {
            let (l, _, r) = t.dim();
            let mut next = Array2::zeros((r, r));
            for a in 0..r {
                for b in 0..r {
                    let mut v = Complex64::new(0.0, 0.0);
                    for s in 0..2 {
                        for x in 0..l {
                            for y in 0..l {
                                v += t[[x, s, a]].conj() * rho[[x, y]] * t[[y, s, b]];
                            }
                        }
                    }
                    next[[a, b]] = v;
                }
            }
            rho = next;
        }
        rho[[0, 0]].re
    }

    /// Amplitude <index|psi>.
    pub fn amplitude(&self, index: usize) -> Complex64 {
        let mut vec: Array1<Complex64> = Array1::from_elem(1, Complex64::new(1.0, 0.0));
        for (site, t) in self.tensors.iter().enumerate() {
            let s = index >> site & 1;
            let (l, _, r) = t.dim();
            let mut next = Array1::zeros(r);
            for b in 0..r {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..l {
                    acc += vec[a] * t[[a, s, b]];
                }
                next[b] = acc;
            }
            vec = next;
        }
        vec[0]
    }

    /// Move the orthogonality center to `site` with exact (non-truncating)
    /// SVD sweeps.
    pub fn move_center(&mut self, site: usize) -> Result<(), MpsError> {
        while self.center < site {
            self.shift_right()?;
        }
        while self.center > site {
            self.shift_left()?;
        }
        Ok(())
    }

    fn shift_right(&mut self) -> Result<(), MpsError> {
        let i = self.center;
        let t = &self.tensors[i];
        let (l, _, r) = t.dim();
        let mat = Array2::from_shape_fn((l * 2, r), |(row, c)| t[[row / 2, row % 2, c]]);
        let (u, s, vh) = linalg::svd_c64(&mat)?;
        let k = s.len();
        self.tensors[i] = Array3::from_shape_fn((l, 2, k), |(a, p, c)| u[[a * 2 + p, c]]);
        let right = &self.tensors[i + 1];
        let (_, _, r2) = right.dim();
        let mut next = Array3::zeros((k, 2, r2));
        for a in 0..k {
            for p in 0..2 {
                for c in 0..r2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..r {
                        acc += s[a] * vh[[a, b]] * right[[b, p, c]];
                    }
                    next[[a, p, c]] = acc;
                }
            }
        }
        self.tensors[i + 1] = next;
        self.center = i + 1;
        Ok(())
    }

    fn shift_left(&mut self) -> Result<(), MpsError> {
        let i = self.center;
        let t = &self.tensors[i];
        let (l, _, r) = t.dim();
        let mat = Array2::from_shape_fn((l, 2 * r), |(row, c)| t[[row, c / r, c % r]]);
        let (u, s, vh) = linalg::svd_c64(&mat)?;
        let k = s.len();
        self.tensors[i] = Array3::from_shape_fn((k, 2, r), |(a, p, c)| vh[[a, p * r + c]]);
        let left = &self.tensors[i - 1];
        let (l0, _, _) = left.dim();
        let mut next = Array3::zeros((l0, 2, k));
        for a in 0..l0 {
            for p in 0..2 {
                for c in 0..k {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..l {
                        acc += left[[a, p, b]] * u[[b, c]] * s[c];
                    }
                    next[[a, p, c]] = acc;
                }
            }
        }
        self.tensors[i - 1] = next;
        self.center = i - 1;
        Ok(())
    }

    /// One-site gate at `site`; unitary gates preserve canonical form.
    pub fn apply_one_site(&mut self, site: usize, gate: &Array2<Complex64>) {
        let t = &self.tensors[site];
        let (l, _, r) = t.dim();
        let mut next = Array3::zeros((l, 2, r));
        for a in 0..l {
            for s in 0..2 {
                for c in 0..r {
                    next[[a, s, c]] = gate[[s, 0]] * t[[a, 0, c]] + gate[[s, 1]] * t[[a, 1, c]];
                }
            }
        }
        self.tensors[site] = next;
    }

    /// Two-site gate on adjacent sites (i, i+1). The row index of `gate`
    /// is s_i * 2 + s_{i+1}. Truncates the new bond to chi_max and leaves
    /// the center on the right site (or left when `center_right` is false,
    /// for right-to-left sweeps).
    pub fn apply_two_site(
        &mut self,
        i: usize,
        gate: &Array2<Complex64>,
        center_right: bool,
    ) -> Result<(), MpsError> {
        if self.center < i {
            self.move_center(i)?;
        } else if self.center > i + 1 {
            self.move_center(i + 1)?;
        }
        let (l, _, _) = self.tensors[i].dim();
        let (mid, _, r) = self.tensors[i + 1].dim();
        // theta[a, s0, s1, c] flattened to (l*2, 2*r).
        let mut theta = Array2::zeros((l * 2, 2 * r));
        for a in 0..l {
            for s0 in 0..2 {
                for s1 in 0..2 {
                    for c in 0..r {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for t0 in 0..2 {
                            for t1 in 0..2 {
                                let g = gate[[s0 * 2 + s1, t0 * 2 + t1]];
                                if g != Complex64::new(0.0, 0.0) {
                                    let mut inner = Complex64::new(0.0, 0.0);
                                    for b in 0..mid {
                                        inner += self.tensors[i][[a, t0, b]]
                                            * self.tensors[i + 1][[b, t1, c]];
                                    }
                                    acc += g * inner;
                                }
                            }
                        }
                        theta[[a * 2 + s0, s1 * r + c]] = acc;
                    }
                }
            }
        }
        let (u, s, vh) = linalg::svd_c64(&theta)?;
        // Numerical rank, then the bond cap.
        let s0 = s[0].max(f64::MIN_POSITIVE);
        let rank = s.iter().take_while(|&&v| v > RANK_CUTOFF * s0).count().max(1);
        let keep = rank.min(self.chi_max);
        let discarded: f64 = s.iter().skip(keep).map(|v| v * v).sum();
        self.truncation_loss += discarded;
        let mut s_kept: Vec<f64> = s.iter().take(keep).cloned().collect();
        if self.renormalize {
            let w: f64 = s_kept.iter().map(|v| v * v).sum();
            let scale = 1.0 / w.sqrt();
            for v in &mut s_kept {
                *v *= scale;
            }
        }
        if center_right {
            self.tensors[i] = Array3::from_shape_fn((l, 2, keep), |(a, p, c)| u[[a * 2 + p, c]]);
            self.tensors[i + 1] = Array3::from_shape_fn((keep, 2, r), |(a, p, c)| {
                vh[[a, p * r + c]] * s_kept[a]
            });
            self.center = i + 1;
        } else {
            self.tensors[i] = Array3::from_shape_fn((l, 2, keep), |(a, p, c)| {
                u[[a * 2 + p, c]] * s_kept[c]
            });
            self.tensors[i + 1] = Array3::from_shape_fn((keep, 2, r), |(a, p, c)| vh[[a, p * r + c]]);
            self.center = i;
        }
        Ok(())
    }

    fn apply_swap(&mut self, i: usize, center_right: bool) -> Result<(), MpsError> {
        let mut gate = Array2::zeros((4, 4));
        for s0 in 0..2 {
            for s1 in 0..2 {
                gate[[s0 * 2 + s1, s1 * 2 + s0]] = Complex64::new(1.0, 0.0);
            }
        }
        self.swap_gates += 1;
        self.apply_two_site(i, &gate, center_right)
    }
}

/// Diagonal one-site gate e^{+i w h z dt} with z = +1 for bit 0.
fn z_phase_gate(angle: f64) -> Array2<Complex64> {
    let mut g = Array2::zeros((2, 2));
    g[[0, 0]] = Complex64::from_polar(1.0, angle);
    g[[1, 1]] = Complex64::from_polar(1.0, -angle);
    g
}

/// One-site mixing gate e^{-i theta X}.
fn x_gate(theta: f64) -> Array2<Complex64> {
    let (sin, cos) = theta.sin_cos();
    let mut g = Array2::zeros((2, 2));
    g[[0, 0]] = Complex64::new(cos, 0.0);
    g[[1, 1]] = Complex64::new(cos, 0.0);
    g[[0, 1]] = Complex64::new(0.0, -sin);
    g[[1, 0]] = Complex64::new(0.0, -sin);
    g
}

/// Diagonal two-site gate e^{+i angle z0 z1}.
fn zz_gate(angle: f64) -> Array2<Complex64> {
    let mut g = Array2::zeros((4, 4));
    for s0 in 0..2i32 {
        for s1 in 0..2i32 {
            let z0 = 1.0 - 2.0 * s0 as f64;
            let z1 = 1.0 - 2.0 * s1 as f64;
            let idx = (s0 * 2 + s1) as usize;
            g[[idx, idx]] = Complex64::from_polar(1.0, angle * z0 * z1);
        }
    }
    g
}

/// One first-order Trotter step: all diagonal gates (single-site Z phases,
/// then ZZ pairs in lexicographic order with SWAP routing), then the
/// transverse-field rotations.
pub fn tebd_step(state: &mut MpsState, inst: &IsingInstance, gamma: f64, dt: f64) -> Result<(), MpsError> {
    let alpha = scale_factor_alpha(inst)?;
    let w = (1.0 - gamma) * alpha;
    for i in 0..inst.n {
        state.apply_one_site(i, &z_phase_gate(w * inst.fields[i] * dt));
    }
    for i in 0..inst.n - 1 {
        for j in (i + 1)..inst.n {
            // Route site i up to position j-1, couple, route back.
            for k in i..j - 1 {
                state.apply_swap(k, true)?;
            }
            state.apply_two_site(j - 1, &zz_gate(w * inst.couplings[[i, j]] * dt), true)?;
            for k in (i..j - 1).rev() {
                state.apply_swap(k, false)?;
            }
        }
    }
    let theta = gamma * dt;
    let gx = x_gate(theta);
    for i in 0..inst.n {
        state.apply_one_site(i, &gx);
    }
    Ok(())
}

/// Evolve |index> under m = round(t/dt) first-order Trotter steps.
pub fn tebd_evolve(
    inst: &IsingInstance,
    index: usize,
    gamma: f64,
    t: f64,
    dt: f64,
    chi_max: usize,
    renormalize: bool,
) -> Result<MpsState, MpsError> {
    let (m, _) = trotter_steps(t, dt)?;
    let mut state = MpsState::product_state(inst.n, index, chi_max, renormalize)?;
    for _ in 0..m {
        tebd_step(&mut state, inst, gamma, dt)?;
    }
    Ok(state)
}

/// Bond dimension at which an n-site MPS is exact across every cut.
pub fn exact_bond_dimension(n: usize) -> usize {
    1 << (n / 2)
}

/// Quantum-inspired proposal: every row is the Born distribution of the
/// TEBD-evolved basis state. Exact (hence symmetric) once chi reaches
/// 2^(n/2); truncated runs are flagged asymmetric.
pub fn mps_proposal_matrix(
    inst: &IsingInstance,
    gamma: f64,
    t: f64,
    dt: f64,
    chi_max: usize,
) -> Result<ProposalMatrix, MpsError> {
    let dim = 1usize << inst.n;
    let mut q = Array2::zeros((dim, dim));
    for s0 in 0..dim {
        let state = tebd_evolve(inst, s0, gamma, t, dt, chi_max, true)?;
        for s in 0..dim {
            q[[s0, s]] = state.amplitude(s).norm_sqr();
        }
    }
    let symmetric = chi_max >= exact_bond_dimension(inst.n);
    Ok(ProposalMatrix::new(inst.n, q, ProposalKind::Mps, symmetric)?)
}

/// Asymmetry statistics of log2 Phi with Phi(s'|s) = Q(s'|s)/Q(s|s').
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiStatistics {
    pub mean_log2: f64,
    pub sigma_log2: f64,
    /// Ordered pairs entering the statistics.
    pub resolved: usize,
    /// Ordered pairs skipped because either direction fell below the
    /// probability floor.
    pub unresolved: usize,
}

/// Resolved log2 Phi values over all ordered pairs, plus the count of
/// pairs skipped by the probability floor.
pub fn phi_log2_values(q: &ProposalMatrix) -> (Vec<f64>, usize) {
    let dim = q.dim();
    let mut values = Vec::new();
    let mut unresolved = 0usize;
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let (f, b) = (q.q[[i, j]], q.q[[j, i]]);
            if f > PHI_FLOOR && b > PHI_FLOOR {
                values.push((f / b).log2());
            } else {
                unresolved += 1;
            }
        }
    }
    (values, unresolved)
}

pub fn phi_statistics(q: &ProposalMatrix) -> PhiStatistics {
    let (values, unresolved) = phi_log2_values(q);
    let n = values.len();
    if n == 0 {
        return PhiStatistics { mean_log2: 0.0, sigma_log2: 0.0, resolved: 0, unresolved };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    PhiStatistics { mean_log2: mean, sigma_log2: var.sqrt(), resolved: n, unresolved }
}

/// Empirical acceptance-rate estimate for a truncated (asymmetric) MPS
/// proposal, sampling states from the target and proposals from Q.
pub fn empirical_acceptance<R: Rng>(
    q: &ProposalMatrix,
    target: &crate::instances::BoltzmannTarget,
    rng: &mut R,
    samples: usize,
) -> f64 {
    let dim = q.dim();
    let mut accepted = 0.0;
    for _ in 0..samples {
        // Draw s from the target, s' from Q(.|s).
        let mut u: f64 = rng.gen();
        let mut s = dim - 1;
        for i in 0..dim {
            u -= target.probabilities[i];
            if u <= 0.0 {
                s = i;
                break;
            }
        }
        let mut v: f64 = rng.gen();
        let mut sp = dim - 1;
        for j in 0..dim {
            v -= q.q[[s, j]];
            if v <= 0.0 {
                sp = j;
                break;
            }
        }
        let qf = q.q[[s, sp]];
        let qb = q.q[[sp, s]];
        if qf <= 0.0 {
            continue;
        }
        let a = if qb <= 0.0 {
            0.0
        } else {
            (target.probabilities[sp] * qb / (target.probabilities[s] * qf)).min(1.0)
        };
        accepted += a;
    }
    accepted / samples as f64
}

/// SWAP gates needed for one Trotter step of the all-to-all circuit:
/// 2 sum_{a=1}^{n-1} (n-a)(a-1). The equivalent closed form is
/// n(n-1)(n-2)/3 = (n^3 - 3n^2 + 2n)/3.
pub fn swap_count(n: usize) -> usize {
    (1..n).map(|a| 2 * (n - a) * (a - 1)).sum()
}

/// Closed form of `swap_count`; kept separate so the summation stays the
/// authoritative definition.
pub fn swap_count_closed_form(n: usize) -> usize {
    n * (n - 1) * (n - 2) / 3
}

/// Leading-order cost model for one Markov-chain step with each proposal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostModel {
    /// Floats stored: MPS tensors plus dense couplings and gate workspace.
    pub memory: f64,
    /// Floating-point operations for m Trotter steps.
    pub time: f64,
}

pub fn mps_cost(n: usize, chi: usize, m: usize) -> CostModel {
    let (nf, cf, mf) = (n as f64, chi as f64, m as f64);
    CostModel { memory: 2.0 * nf * cf * cf + 16.0 * nf * nf, time: 8.0 * mf * nf.powi(3) * cf.powi(3) }
}

/// Threshold size for advantage when the per-step costs are t_q and t_c and
/// the spectral gaps scale as 2^{-k n}: n > log2(t_q / t_c) / (k_c - k_q).
pub fn threshold_size(k_q: f64, k_c: f64, t_q: f64, t_c: f64) -> f64 {
    (t_q / t_c).log2() / (k_c - k_q)
}

/// Quantum-inspired threshold: the per-step cost itself grows with n
/// (one TEBD step costs ~ m n^3 chi^3 against t_c = 1 for the local
/// update), so the threshold is the fixed point of
/// n = log2(m n^3 chi^3) / (k_c - k_qi).
pub fn threshold_size_quantum_inspired(k_qi: f64, k_c: f64, m: usize, chi: usize) -> f64 {
    let mut n = 10.0f64;
    for _ in 0..200 {
        let next = (m as f64 * n.powi(3) * (chi as f64).powi(3)).log2() / (k_c - k_qi);
        if (next - n).abs() < 1e-12 {
            return next;
        }
        n = next;
    }
    n
}
