//! Config-driven campaigns reproducing the numerical studies: grid
//! searches, scaling fits, hitting times, Trotter and temperature sweeps,
//! asymmetry studies, QAOA sweeps, schedule optimization, phase diagrams,
//! and threshold reports.

pub mod config;
pub mod experiments;
pub mod fits;
pub mod store;

pub use config::{CampaignConfig, ConfigError, Grid};
pub use fits::{fit_scaling, linear_fit, FitError, LinearFit, ScalingFit};
pub use store::{read_gap_csv, CampaignStore, CellError, GapRow, StoreError};

use crate::chain::{mh_transition, spectral_gap, ChainError, ProposalMatrix};
use crate::instances::{boltzmann_target, generate_instance, InstanceError, IsingInstance};
use crate::mps::MpsError;
use crate::phase::PhaseError;
use crate::schedopt::SchedOptError;
use crate::unitary::UnitaryError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Unitary(#[from] UnitaryError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    SchedOpt(#[from] SchedOptError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl<E: Into<CampaignError>> From<CellError<E>> for CampaignError {
    fn from(e: CellError<E>) -> Self {
        match e {
            CellError::Compute(e) => e.into(),
            CellError::Store(e) => CampaignError::Store(e),
        }
    }
}

/// A proposal strategy with its parameters, as used by the campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Strategy {
    Local,
    Uniform,
    Exact { gamma: f64, t: f64 },
    Trotter { gamma: f64, t: f64, dt: f64 },
    Mps { gamma: f64, t: f64, dt: f64, chi: usize },
    Qaoa { theta: f64, p: usize },
}

impl Strategy {
    /// Short label used in cell keys and file names.
    pub fn label(&self) -> String {
        match self {
            Strategy::Local => "local".into(),
            Strategy::Uniform => "uniform".into(),
            Strategy::Exact { .. } => "exact".into(),
            Strategy::Trotter { .. } => "trotter".into(),
            Strategy::Mps { chi, .. } => format!("mps-chi{chi}"),
            Strategy::Qaoa { p, .. } => format!("qaoa-p{p}"),
        }
    }

    pub fn build(&self, inst: &IsingInstance) -> Result<ProposalMatrix, CampaignError> {
        Ok(match self {
            Strategy::Local => crate::chain::local_proposal(inst.n),
            Strategy::Uniform => crate::chain::uniform_proposal(inst.n),
            Strategy::Exact { gamma, t } => {
                crate::unitary::exact_unitary_proposal(inst, *gamma, *t)?
            }
            Strategy::Trotter { gamma, t, dt } => crate::unitary::trotter_unitary_proposal(
                inst,
                *gamma,
                *t,
                *dt,
                crate::unitary::TrotterOrder::Second,
            )?,
            Strategy::Mps { gamma, t, dt, chi } => {
                crate::mps::mps_proposal_matrix(inst, *gamma, *t, *dt, *chi)?
            }
            Strategy::Qaoa { theta, p } => crate::unitary::qaoa_proposal(inst, *theta, *p)?,
        })
    }
}

/// Spectral gap of the MH chain built from a proposal; truncated MPS
/// proposals are Hastings-corrected.
pub fn gap_of(
    q: &ProposalMatrix,
    inst: &IsingInstance,
    temperature: f64,
) -> Result<(f64, String), CampaignError> {
    let target = boltzmann_target(inst, temperature)?;
    let tm = mh_transition(q, &target, !q.symmetric)?;
    let gap = spectral_gap(&tm)?;
    Ok((gap.delta, gap.method.to_string()))
}

/// Full gap row for one instance under one strategy.
pub fn gap_row(
    inst: &IsingInstance,
    strategy: &Strategy,
    temperature: f64,
) -> Result<GapRow, CampaignError> {
    let q = strategy.build(inst)?;
    let (delta, method) = gap_of(&q, inst, temperature)?;
    let (gamma, t, dt, chi) = match strategy {
        Strategy::Local | Strategy::Uniform => (None, None, None, None),
        Strategy::Exact { gamma, t } => (Some(*gamma), Some(*t), None, None),
        Strategy::Trotter { gamma, t, dt } => (Some(*gamma), Some(*t), Some(*dt), None),
        Strategy::Mps { gamma, t, dt, chi } => (Some(*gamma), Some(*t), Some(*dt), Some(*chi)),
        // theta is reported in the t column, the depth p in chi.
        Strategy::Qaoa { theta, p } => (None, Some(*theta), None, Some(*p)),
    };
    Ok(GapRow {
        n: inst.n,
        seed: inst.seed,
        kind: q.kind.to_string(),
        gamma,
        t,
        dt,
        chi,
        temperature: Some(temperature),
        delta,
        method,
    })
}

/// Deterministic ensemble for a campaign: seeds are base_seed + index,
/// independent of scheduling order.
pub fn ensemble(config: &CampaignConfig, n: usize) -> Result<Vec<IsingInstance>, CampaignError> {
    (0..config.instances)
        .map(|i| Ok(generate_instance(n, config.instance_seed(i))?))
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}
