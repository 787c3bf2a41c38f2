//! Monte Carlo experiments on top of the analytical engine.

pub mod link;
pub mod scenario;
pub mod stats;

pub use link::{
    empirical_effective_sinr, empirical_success_by_attempt, qq_data, single_link_dlt_compare, single_link_dlt_sim,
    theoretical_quantile, InterferenceSet, LinkConfig, PairedCurves, QqPoint, SimCurve,
};
pub use scenario::{fairness_metric, run_scenario, run_trial, MetricsReport, ScenarioConfig, TrialResult, CI_LEVEL};
pub use stats::{ks_statistic, mean_ci, paired_difference, Estimate};

use crate::cfmath::CfError;
use crate::channel::ChannelError;
use crate::dlt::DltError;
use crate::geometry::GeometryError;
use crate::mac::MacError;
use crate::policies::PolicyError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Dlt(#[from] DltError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

impl SimError {
    /// Numerical failure as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        let numerical = |e: &CfError| !matches!(e, CfError::InvalidSpec(_) | CfError::InvalidArgument(_));
        match self {
            SimError::NotConverged(_) => true,
            SimError::Cf(e)
            | SimError::Dlt(DltError::Cf(e))
            | SimError::Policy(PolicyError::Cf(e) | PolicyError::Dlt(DltError::Cf(e)))
            | SimError::Mac(MacError::Policy(PolicyError::Cf(e) | PolicyError::Dlt(DltError::Cf(e)))) => numerical(e),
            _ => false,
        }
    }
}
