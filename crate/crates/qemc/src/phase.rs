//! Spin-glass order parameters of the transverse-field model: thermal
//! states, Edwards-Anderson parameter, Binder cumulant, and the crossing
//! analysis that locates the critical field strength.

use crate::instances::IsingInstance;
use crate::linalg;
use crate::unitary::{build_hamiltonian, UnitaryError};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("temperature must be non-negative, got {0}")]
    NegativeTemperature(f64),
    #[error("need at least two sizes and two grid points for a crossing")]
    InsufficientCurves,
    #[error("no crossing found on the grid")]
    NoCrossing,
    #[error(transparent)]
    Unitary(#[from] UnitaryError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Diagonal of the Gibbs state of H(gamma) at temperature T:
/// p_s = sum_k w_k V[s,k]^2 with w_k = e^{-(E_k - E_0)/T} / Z.
/// T = 0 returns the (possibly degenerate) ground-space projector diagonal.
pub fn gibbs_diagonal(
    inst: &IsingInstance,
    gamma: f64,
    temperature: f64,
) -> Result<Array1<f64>, PhaseError> {
    if temperature < 0.0 {
        return Err(PhaseError::NegativeTemperature(temperature));
    }
    let h = build_hamiltonian(inst, gamma)?;
    let (values, vectors) = linalg::eigh(&h.matrix)?;
    let dim = values.len();
    let e0 = values[0];
    let weights: Vec<f64> = if temperature == 0.0 {
        // Degenerate ground space: equal weight on states within a tiny
        // window of E_0.
        let tol = 1e-10 * (1.0 + e0.abs());
        values.iter().map(|&e| if e - e0 < tol { 1.0 } else { 0.0 }).collect()
    } else {
        values.iter().map(|&e| (-(e - e0) / temperature).exp()).collect()
    };
    let z: f64 = weights.iter().sum();
    let mut p = Array1::zeros(dim);
    for k in 0..dim {
        let w = weights[k] / z;
        if w == 0.0 {
            continue;
        }
        for s in 0..dim {
            p[s] += w * vectors[[s, k]] * vectors[[s, k]];
        }
    }
    Ok(p)
}

/// Order-parameter moments of one instance. All sigma^z observables are
/// diagonal, so the unrestricted index sums collapse to sums over pairs of
/// basis states weighted by the diagonal probabilities:
/// q^(k) = (1/n^k) sum_{i_1..i_k} <Z_{i_1}..Z_{i_k}>^2
///       = (1/n^k) sum_{s,s'} p_s p_{s'} ( sum_i z_i(s) z_i(s') )^k.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrderMoments {
    /// (1/n) sum_i <Z_i>^2 (Edwards-Anderson parameter of the instance).
    pub ea: f64,
    /// q^(2), unrestricted double sum.
    pub q2: f64,
    /// q^(4), unrestricted quadruple sum.
    pub q4: f64,
}

pub fn order_moments(n: usize, p: &Array1<f64>) -> OrderMoments {
    let dim = p.len();
    // Overlap o(s, s') = sum_i z_i(s) z_i(s') = n - 2 * hamming(s ^ s').
    let mut ea = 0.0;
    let mut q2 = 0.0;
    let mut q4 = 0.0;
    for s in 0..dim {
        if p[s] == 0.0 {
            continue;
        }
        for sp in 0..dim {
            let w = p[s] * p[sp];
            if w == 0.0 {
                continue;
            }
            let o = n as f64 - 2.0 * ((s ^ sp).count_ones() as f64);
            ea += w * o;
            let o2 = o * o;
            q2 += w * o2;
            q4 += w * o2 * o2;
        }
    }
    let nf = n as f64;
    OrderMoments { ea: ea / nf, q2: q2 / (nf * nf), q4: q4 / (nf * nf * nf * nf) }
}

/// Disorder-averaged Edwards-Anderson parameter and Binder cumulant
/// g = (1/2) [3 - mean(q4 / q2^2)], the ratio taken per instance before
/// averaging.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisorderAverages {
    pub ea: f64,
    pub binder: f64,
    pub instances: usize,
}

pub fn disorder_averages(moments: &[OrderMoments]) -> DisorderAverages {
    let m = moments.len();
    let ea = moments.iter().map(|o| o.ea).sum::<f64>() / m as f64;
    let ratio = moments.iter().map(|o| o.q4 / (o.q2 * o.q2)).sum::<f64>() / m as f64;
    DisorderAverages { ea, binder: 0.5 * (3.0 - ratio), instances: m }
}

/// One Binder curve: g sampled on a gamma grid for a fixed size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinderCurve {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub g: Vec<f64>,
}

/// Crossing estimate from a family of Binder curves on a shared grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub gamma_c: f64,
    /// max(grid step, spread of the pairwise crossings).
    pub uncertainty: f64,
    pub pairwise: Vec<f64>,
}

/// Locate the critical gamma as the mean of the pairwise curve crossings,
/// each found by linear interpolation where the difference g_a - g_b
/// changes sign.
pub fn find_crossing(curves: &[BinderCurve]) -> Result<CrossingEstimate, PhaseError> {
    if curves.len() < 2 || curves.iter().any(|c| c.gammas.len() < 2) {
        return Err(PhaseError::InsufficientCurves);
    }
    let grid = &curves[0].gammas;
    let step = grid.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0f64, f64::max);
    let mut pairwise = Vec::new();
    for a in 0..curves.len() {
        for b in (a + 1)..curves.len() {
            let (ca, cb) = (&curves[a], &curves[b]);
            for k in 0..grid.len() - 1 {
                let d0 = ca.g[k] - cb.g[k];
                let d1 = ca.g[k + 1] - cb.g[k + 1];
                if d0 == 0.0 {
                    pairwise.push(grid[k]);
                    break;
                }
                if d0 * d1 < 0.0 {
                    let frac = d0 / (d0 - d1);
                    pairwise.push(grid[k] + frac * (grid[k + 1] - grid[k]));
                    break;
                }
            }
        }
    }
    if pairwise.is_empty() {
        return Err(PhaseError::NoCrossing);
    }
    let gamma_c = pairwise.iter().sum::<f64>() / pairwise.len() as f64;
    let spread = pairwise
        .iter()
        .map(|&x| (x - gamma_c).abs())
        .fold(0.0f64, f64::max);
    Ok(CrossingEstimate { gamma_c, uncertainty: step.max(2.0 * spread), pairwise })
}
