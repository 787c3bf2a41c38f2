//! Home-cell system simulation: users at fixed radii with random angles, one
//! policy, PF scheduling, repeated over independent trials.

use super::stats::{mean_ci, Estimate};
use super::SimError;
use crate::cfmath::QuadratureConfig;
use crate::channel::{trial_rng, FadingField};
use crate::dlt::SearchConfig;
use crate::geometry::{build_user, CellTopology, UserGeometry};
use crate::mac::{run_cell_procedure, CellCounters, CellRun, CellUser, MacConfig};
use crate::policies::{PolicyEngine, PolicyKind};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Throughputs are floored here before taking logs.
pub const FAIRNESS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub topology: CellTopology,
    pub n_users: usize,
    /// Radii cycled over users; the user count must be a multiple of its length.
    pub user_radii: Vec<f64>,
    /// Radius of a lone user.
    pub single_user_radius: f64,
    /// Linear transmit SNR.
    pub rho: f64,
    pub mac: MacConfig,
    pub quadrature: QuadratureConfig,
    pub search: SearchConfig,
    pub horizon: u64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            topology: CellTopology::default(),
            n_users: 25,
            user_radii: vec![150.0, 200.0, 250.0, 300.0, 400.0],
            single_user_radius: 250.0,
            rho: 10f64.powf(4.3),
            mac: MacConfig::default(),
            quadrature: QuadratureConfig::default(),
            search: SearchConfig::default(),
            horizon: 200_000,
            trials: 20,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_users == 0 {
            return Err(SimError::InvalidConfig("n_users must be at least 1".into()));
        }
        if self.n_users > 1 && (self.user_radii.is_empty() || !self.n_users.is_multiple_of(self.user_radii.len())) {
            return Err(SimError::InvalidConfig(format!(
                "n_users = {} is not a multiple of the {} configured radii",
                self.n_users,
                self.user_radii.len()
            )));
        }
        let cell = self.topology.cell_radius;
        let radii = self.user_radii.iter().chain(std::iter::once(&self.single_user_radius));
        if let Some(r) = radii.into_iter().find(|&&r| !(r > 0.0 && r <= cell)) {
            return Err(SimError::InvalidConfig(format!("user radius {r} outside (0, {cell}]")));
        }
        if !(self.rho > 0.0) {
            return Err(SimError::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if self.horizon == 0 || self.trials == 0 {
            return Err(SimError::InvalidConfig("horizon and trials must be at least 1".into()));
        }
        self.mac.validate()?;
        self.quadrature.validate().map_err(SimError::InvalidConfig)?;
        self.search.validate()?;
        Ok(())
    }

    /// Radius of user `u`.
    pub fn radius(&self, user: usize) -> f64 {
        if self.n_users == 1 {
            self.single_user_radius
        } else {
            self.user_radii[user % self.user_radii.len()]
        }
    }

    /// Users of one trial: configured radii, angles uniform on `[−π, π)`.
    pub fn place_users(&self, trial: u64) -> Result<Vec<UserGeometry>, SimError> {
        let mut rng = trial_rng(self.seed, trial);
        (0..self.n_users).map(|u| Ok(build_user(&self.topology, self.radius(u), rng.random_range(-PI..PI))?)).collect()
    }
}

/// `Σ_u ln max(T_u, floor)`, and whether any value was floored.
pub fn fairness_metric(throughput: &[f64]) -> (f64, bool) {
    let floored = throughput.iter().any(|&t| t < FAIRNESS_FLOOR);
    (throughput.iter().map(|&t| t.max(FAIRNESS_FLOOR).ln()).sum(), floored)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: u64,
    pub system_dlt: f64,
    /// Fairness of the long-run per-user throughput.
    pub fairness: f64,
    /// Fairness of the PF averages at the end of the run.
    pub fairness_pf_ema: f64,
    pub floored: bool,
    pub user_throughput: Vec<f64>,
    pub pf_throughput: Vec<f64>,
    pub slots: u64,
    pub counters: CellCounters,
}

impl TrialResult {
    fn from_run(trial: u64, run: &CellRun) -> Self {
        let user_throughput = run.user_throughput();
        let (fairness, floored_user) = fairness_metric(&user_throughput);
        let (fairness_pf_ema, floored_pf) = fairness_metric(&run.pf.throughput);
        TrialResult {
            trial,
            system_dlt: run.system_throughput(),
            fairness,
            fairness_pf_ema,
            floored: floored_user || floored_pf,
            user_throughput,
            pf_throughput: run.pf.throughput.clone(),
            slots: run.slots,
            counters: run.counters.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub n_users: usize,
    pub system_dlt: Estimate,
    pub fairness: Estimate,
    pub fairness_pf_ema: Estimate,
    /// Per-user throughput averaged over trials, in user order.
    pub per_user_t: Vec<f64>,
    pub fairness_floored: bool,
    pub trials: Vec<TrialResult>,
}

impl MetricsReport {
    pub fn system_dlt_values(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.system_dlt).collect()
    }

    pub fn fairness_values(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.fairness).collect()
    }

    pub fn fairness_pf_ema_values(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.fairness_pf_ema).collect()
    }
}

/// Confidence level of every reported interval.
pub const CI_LEVEL: f64 = 0.95;

/// One trial of one policy. Trials with the same index share user positions
/// and fading across policies.
pub fn run_trial(
    config: &ScenarioConfig,
    engine: &PolicyEngine,
    trial: u64,
    record_trace: bool,
) -> Result<(TrialResult, CellRun), SimError> {
    let users: Vec<CellUser> = config.place_users(trial)?.iter().map(CellUser::from).collect();
    let mut field = FadingField::new(config.seed, trial, users.len(), config.topology.k());
    let run = run_cell_procedure(&users, config.rho, engine, &config.mac, &mut field, config.horizon, record_trace)?;
    Ok((TrialResult::from_run(trial, &run), run))
}

pub fn run_scenario(config: &ScenarioConfig, policy: PolicyKind) -> Result<MetricsReport, SimError> {
    config.validate()?;
    let engine =
        PolicyEngine::new(policy, config.topology.k() as u32, config.mac.n_max, &config.quadrature, &config.search)?;
    let trials = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, &engine, t, false).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    let pick = |f: fn(&TrialResult) -> f64| mean_ci(&trials.iter().map(f).collect::<Vec<_>>(), CI_LEVEL);
    let per_user_t = (0..config.n_users)
        .map(|u| trials.iter().map(|t| t.user_throughput[u]).sum::<f64>() / trials.len() as f64)
        .collect();
    Ok(MetricsReport {
        policy,
        n_users: config.n_users,
        system_dlt: pick(|t| t.system_dlt),
        fairness: pick(|t| t.fairness),
        fairness_pf_ema: pick(|t| t.fairness_pf_ema),
        per_user_t,
        fairness_floored: trials.iter().any(|t| t.floored),
        trials,
    })
}
