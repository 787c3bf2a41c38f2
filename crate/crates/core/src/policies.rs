//! Cross-layer policies: a rate selection rule paired with the rate the
//! scheduler ranks users by.
//!
//! | policy | source rate | scheduling rate |
//! |---|---|---|
//! | `genie` | capacity at the current SINR | source rate |
//! | `isinr` | capacity at the SINR of `δ` slots ago | source rate |
//! | `avgx` | capacity at the mean-interference SINR | source rate |
//! | `ga`, `ipla` | DLT maximizer under the approximation | DLT at the source rate |

use crate::cfmath::{Approximation, CfError, CfSpec, QuadratureConfig};
use crate::channel::SinrModel;
use crate::dlt::{optimize_rate, DltError, InversionOutage, RateFlags, RateTable, SearchConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Dlt(#[from] DltError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error("policy {policy} needs {what}")]
    MissingObservation { policy: PolicyKind, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "genie")]
    GenieOpt,
    #[serde(rename = "isinr")]
    InstSinr,
    #[serde(rename = "avgx")]
    AvgInterference,
    #[serde(rename = "ga")]
    GaBased,
    #[serde(rename = "ipla")]
    IplaBased,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::GenieOpt,
        PolicyKind::InstSinr,
        PolicyKind::AvgInterference,
        PolicyKind::GaBased,
        PolicyKind::IplaBased,
    ];

    /// Stable identifier used on the command line and in output files.
    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::GenieOpt => "genie",
            PolicyKind::InstSinr => "isinr",
            PolicyKind::AvgInterference => "avgx",
            PolicyKind::GaBased => "ga",
            PolicyKind::IplaBased => "ipla",
        }
    }

    /// The scheduling rate is the expected throughput rather than the source rate.
    pub fn uses_expected_throughput(self) -> bool {
        matches!(self, PolicyKind::GaBased | PolicyKind::IplaBased)
    }

    pub fn needs_current_ici(self) -> bool {
        self == PolicyKind::GenieOpt
    }

    pub fn needs_delayed_ici(self) -> bool {
        self == PolicyKind::InstSinr
    }

    /// Every process decodes in one attempt by construction.
    pub fn always_succeeds(self) -> bool {
        self == PolicyKind::GenieOpt
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.id() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown policy `{s}` (expected one of genie, isinr, avgx, ga, ipla)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecisionFlags {
    /// No delayed observation existed yet; the mean-interference rule was used.
    pub cold_start: bool,
    pub rate: RateFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyDecision {
    pub user: usize,
    /// Transmitted rate `R*_u`.
    pub r_source: f64,
    /// Rate ranked by the scheduler `R_eff,u`.
    pub r_eff: f64,
    pub flags: DecisionFlags,
}

impl PolicyDecision {
    fn plain(user: usize, rate: f64) -> Self {
        PolicyDecision { user, r_source: rate, r_eff: rate, flags: DecisionFlags::default() }
    }
}

fn capacity(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn rs_genie(user: usize, model: &SinrModel, ici_now: &[f64]) -> PolicyDecision {
    PolicyDecision::plain(user, capacity(model.sinr_from_gains(ici_now)))
}

/// Capacity at a stale SINR; without history it falls back to [`rs_avg_x`].
pub fn rs_inst_sinr(user: usize, model: &SinrModel, ici_delayed: Option<&[f64]>) -> PolicyDecision {
    match ici_delayed {
        Some(g) => PolicyDecision::plain(user, capacity(model.sinr_from_gains(g))),
        None => {
            PolicyDecision { flags: DecisionFlags { cold_start: true, ..Default::default() }, ..rs_avg_x(user, model) }
        }
    }
}

pub fn rs_avg_x(user: usize, model: &SinrModel) -> PolicyDecision {
    PolicyDecision::plain(user, capacity(model.s / (model.mean_interference() + 1.0 / model.rho)))
}

/// Single-attempt spec of `model` under `approx`.
pub fn approximation_spec(approx: Approximation, model: &SinrModel) -> Result<CfSpec, CfError> {
    match approx {
        Approximation::Ga => CfSpec::ga(model.s, &model.pathloss_ici, model.rho, 1),
        Approximation::Ipla => CfSpec::ipla(model.s, &model.pathloss_ici, 1),
    }
}

fn rs_expected(
    approx: Approximation,
    user: usize,
    model: &SinrModel,
    n_max: u32,
    q: &QuadratureConfig,
    search: &SearchConfig,
) -> Result<PolicyDecision, PolicyError> {
    let outage = InversionOutage::new(approximation_spec(approx, model)?, n_max, *q)?;
    let d = optimize_rate(&outage, search)?;
    Ok(PolicyDecision {
        user,
        r_source: d.r_star,
        r_eff: d.s_at_r_star,
        flags: DecisionFlags { cold_start: false, rate: d.flags },
    })
}

pub fn rs_ga(
    user: usize,
    model: &SinrModel,
    n_max: u32,
    q: &QuadratureConfig,
    search: &SearchConfig,
) -> Result<PolicyDecision, PolicyError> {
    rs_expected(Approximation::Ga, user, model, n_max, q, search)
}

pub fn rs_ipla(
    user: usize,
    model: &SinrModel,
    n_max: u32,
    q: &QuadratureConfig,
    search: &SearchConfig,
) -> Result<PolicyDecision, PolicyError> {
    rs_expected(Approximation::Ipla, user, model, n_max, q, search)
}

/// What a policy may observe about interference when deciding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Observation<'a> {
    /// `|w⁽ᵏ⁾(t₁)|²`, the gains the first attempt will see.
    pub now: Option<&'a [f64]>,
    /// `|w⁽ᵏ⁾(t₁ − δ)|²`, absent before `δ` slots have elapsed.
    pub delayed: Option<&'a [f64]>,
}

/// Repeated decisions for one policy. Expected-throughput policies read the
/// source rate from a shared [`RateTable`].
#[derive(Debug, Clone)]
pub struct PolicyEngine {
    kind: PolicyKind,
    table: Option<Arc<RateTable>>,
}

impl PolicyEngine {
    pub fn new(
        kind: PolicyKind,
        interferers: u32,
        n_max: u32,
        q: &QuadratureConfig,
        search: &SearchConfig,
    ) -> Result<Self, PolicyError> {
        let table = match kind {
            PolicyKind::GaBased => Some(RateTable::shared(Approximation::Ga, interferers, n_max, q, search)?),
            PolicyKind::IplaBased => Some(RateTable::shared(Approximation::Ipla, interferers, n_max, q, search)?),
            _ => None,
        };
        Ok(PolicyEngine { kind, table })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn decide(&self, user: usize, model: &SinrModel, obs: Observation<'_>) -> Result<PolicyDecision, PolicyError> {
        match self.kind {
            PolicyKind::GenieOpt => {
                let now = obs
                    .now
                    .ok_or(PolicyError::MissingObservation { policy: self.kind, what: "current interference gains" })?;
                Ok(rs_genie(user, model, now))
            }
            PolicyKind::InstSinr => Ok(rs_inst_sinr(user, model, obs.delayed)),
            PolicyKind::AvgInterference => Ok(rs_avg_x(user, model)),
            PolicyKind::GaBased | PolicyKind::IplaBased => {
                let table = self.table.as_ref().expect("expected-throughput engines hold a table");
                let d = table.decide(&approximation_spec(table.approx(), model)?)?;
                Ok(PolicyDecision {
                    user,
                    r_source: d.r_star,
                    r_eff: d.s_at_r_star,
                    flags: DecisionFlags { cold_start: false, rate: d.flags },
                })
            }
        }
    }

    /// DLT at `r_source` recomputed from the same outage model the decision used.
    pub fn expected_throughput(&self, model: &SinrModel, r_source: f64) -> Result<Option<f64>, PolicyError> {
        match &self.table {
            Some(table) => {
                let outage = table.outage_model(&approximation_spec(table.approx(), model)?)?;
                Ok(Some(crate::dlt::dlt(&outage, r_source)?))
            }
            None => Ok(None),
        }
    }
}
