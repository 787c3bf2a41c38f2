//! HARQ Chase-combining processes and the proportional-fair scheduler of one cell.

use crate::channel::{FadingField, SinrModel};
use crate::geometry::UserGeometry;
use crate::policies::{Observation, PolicyDecision, PolicyEngine, PolicyError};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("HARQ process for user {user} already finished with {outcome:?}")]
    ProcessFinished { user: usize, outcome: Outcome },
    #[error("HARQ process for user {user} has not finished")]
    ProcessInProgress { user: usize },
    #[error("invalid MAC configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("trace export failed: {0}")]
    Export(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    InProgress,
    /// Decoded at this attempt.
    Success(u32),
    Drop,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::InProgress
    }

    fn label(self) -> String {
        match self {
            Outcome::InProgress => "in_progress".into(),
            Outcome::Success(n) => format!("success_{n}"),
            Outcome::Drop => "drop".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub user: usize,
    pub r_source: f64,
    pub n_max: u32,
    /// Attempts made so far.
    pub attempt: u32,
    pub gamma_acc: f64,
    pub w0_mag2: f64,
    pub outcome: Outcome,
}

impl HarqProcess {
    pub fn new(user: usize, r_source: f64, n_max: u32, w0_mag2: f64) -> Self {
        assert!(n_max >= 1, "a process allows at least one attempt");
        HarqProcess { user, r_source, n_max, attempt: 0, gamma_acc: 0.0, w0_mag2, outcome: Outcome::InProgress }
    }

    /// A process that decodes in its first attempt regardless of the threshold.
    pub fn immediate_success(user: usize, r_source: f64, n_max: u32, w0_mag2: f64, gamma: f64) -> Self {
        HarqProcess {
            attempt: 1,
            gamma_acc: gamma,
            outcome: Outcome::Success(1),
            ..HarqProcess::new(user, r_source, n_max, w0_mag2)
        }
    }

    /// Combine one more attempt and apply the decoding test `log₂(1 + γ(n)) ≥ R`.
    pub fn step(&mut self, gamma_i: f64) -> Result<Outcome, MacError> {
        if self.outcome.is_terminal() {
            return Err(MacError::ProcessFinished { user: self.user, outcome: self.outcome });
        }
        self.attempt += 1;
        self.gamma_acc += gamma_i;
        if (1.0 + self.gamma_acc).log2() >= self.r_source {
            self.outcome = Outcome::Success(self.attempt);
        } else if self.attempt == self.n_max {
            self.outcome = Outcome::Drop;
        }
        Ok(self.outcome)
    }

    /// `R/n` after decoding at attempt `n`, zero after a drop.
    pub fn delivered_rate(&self) -> Result<f64, MacError> {
        match self.outcome {
            Outcome::Success(n) => Ok(self.r_source / n as f64),
            Outcome::Drop => Ok(0.0),
            Outcome::InProgress => Err(MacError::ProcessInProgress { user: self.user }),
        }
    }

    /// Bits per hertz delivered by the whole process.
    pub fn delivered_bits(&self) -> f64 {
        match self.outcome {
            Outcome::Success(_) => self.r_source,
            _ => 0.0,
        }
    }
}

/// Functional form of [`HarqProcess::step`].
pub fn harq_step(process: &HarqProcess, gamma_i: f64) -> Result<HarqProcess, MacError> {
    let mut next = process.clone();
    next.step(gamma_i)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PfUpdateMode {
    /// Every slot of a process is one EMA step; the served user is credited
    /// `R/n` in each of the process's `n` slots.
    #[default]
    PerSlot,
    /// One EMA step per process with the delivered rate.
    PerProcess,
}

/// Initial average throughput of every user.
pub const PF_INITIAL_THROUGHPUT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PfState {
    pub throughput: Vec<f64>,
    pub t_c: f64,
    pub slot: u64,
}

impl PfState {
    pub fn new(users: usize, t_c: f64) -> Result<Self, MacError> {
        if users == 0 || !(t_c >= 1.0) {
            return Err(MacError::InvalidConfig(format!("need at least one user and t_c ≥ 1, got {users} and {t_c}")));
        }
        Ok(PfState { throughput: vec![PF_INITIAL_THROUGHPUT; users], t_c, slot: 0 })
    }
}

/// `argmax_u r_eff[u] / T[u]`, lowest index on ties.
pub fn pf_select(pf: &PfState, decisions: &[PolicyDecision]) -> usize {
    assert!(!decisions.is_empty(), "PF selection needs at least one user");
    let mut best = 0;
    let mut best_metric = f64::NEG_INFINITY;
    for (u, d) in decisions.iter().enumerate() {
        let metric = d.r_eff / pf.throughput[u];
        if metric > best_metric {
            best = u;
            best_metric = metric;
        }
    }
    best
}

/// One EMA step: every user decays, the selected one is credited `delivered_rate / t_c`.
pub fn pf_update(pf: &mut PfState, selected: usize, delivered_rate: f64) {
    let keep = 1.0 - 1.0 / pf.t_c;
    for t in pf.throughput.iter_mut() {
        *t *= keep;
    }
    pf.throughput[selected] += delivered_rate / pf.t_c;
    pf.slot += 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    pub n_max: u32,
    /// PF averaging window, slots.
    pub t_c: f64,
    pub pf_update: PfUpdateMode,
    /// Age of the interference observation used by `isinr`, slots.
    pub feedback_delay: u64,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig { n_max: 4, t_c: 1000.0, pf_update: PfUpdateMode::PerSlot, feedback_delay: 1 }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<(), MacError> {
        if self.n_max == 0 {
            return Err(MacError::InvalidConfig("n_max must be at least 1".into()));
        }
        if !(self.t_c >= 1.0) {
            return Err(MacError::InvalidConfig(format!("t_c must be at least 1, got {}", self.t_c)));
        }
        Ok(())
    }
}

/// One user of the home cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellUser {
    pub home_gain: f64,
    pub interference_gains: Vec<f64>,
}

impl From<&UserGeometry> for CellUser {
    fn from(g: &UserGeometry) -> Self {
        CellUser { home_gain: g.home_gain(), interference_gains: g.interference_gains().to_vec() }
    }
}

/// One attempt of one process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub slot: u64,
    pub user: usize,
    pub attempt: u32,
    pub gamma_acc: f64,
    pub outcome: Outcome,
}

/// Per-attempt log with the scheduling inputs needed to replay PF decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellTrace {
    pub attempts: Vec<TraceRecord>,
    /// For each process: start slot, every user's scheduling rate, and the
    /// PF averages the selection was made against.
    pub selections: Vec<(u64, Vec<f64>, Vec<f64>, usize)>,
    /// Delivered rate credited in each slot.
    pub slot_delivered: Vec<f64>,
}

impl CellTrace {
    /// Columns `trial, slot, cell, user, attempt, gamma_acc, outcome`.
    pub fn write_csv<W: Write>(&self, trial: u64, cell: usize, out: W) -> Result<(), MacError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| MacError::Export(e.to_string());
        w.write_record(["trial", "slot", "cell", "user", "attempt", "gamma_acc", "outcome"]).map_err(err)?;
        for r in &self.attempts {
            w.write_record([
                trial.to_string(),
                r.slot.to_string(),
                cell.to_string(),
                r.user.to_string(),
                r.attempt.to_string(),
                r.gamma_acc.to_string(),
                r.outcome.label(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| MacError::Export(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CellCounters {
    pub processes: u64,
    pub drops: u64,
    pub cold_starts: u64,
    pub non_unimodal: u64,
    pub hit_cap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    /// Bits per hertz delivered to each user.
    pub bits: Vec<f64>,
    /// Slots consumed; the last process may run past the horizon.
    pub slots: u64,
    pub pf: PfState,
    pub counters: CellCounters,
    pub trace: Option<CellTrace>,
}

impl CellRun {
    /// Delivered bits per slot over all users.
    pub fn system_throughput(&self) -> f64 {
        self.bits.iter().sum::<f64>() / self.slots as f64
    }

    /// Delivered bits per slot for each user.
    pub fn user_throughput(&self) -> Vec<f64> {
        self.bits.iter().map(|b| b / self.slots as f64).collect()
    }
}

/// Run the home cell for at least `horizon` slots: decide rates for every user,
/// schedule by PF, run the chosen process to completion, update PF, repeat.
///
/// Process attempt `i` started at slot `t` sees the fading of slot `t + i − 1`.
/// The desired gain is read at the start slot and held for the process.
pub fn run_cell_procedure(
    users: &[CellUser],
    rho: f64,
    engine: &PolicyEngine,
    config: &MacConfig,
    field: &mut FadingField,
    horizon: u64,
    record_trace: bool,
) -> Result<CellRun, MacError> {
    config.validate()?;
    if horizon == 0 || users.is_empty() || field.users() != users.len() {
        return Err(MacError::InvalidConfig(format!(
            "need horizon ≥ 1 and one fading stream per user (horizon {horizon}, users {}, field users {})",
            users.len(),
            field.users()
        )));
    }
    let kind = engine.kind();
    let k = field.interferers();
    let mut pf = PfState::new(users.len(), config.t_c)?;
    let mut bits = vec![0.0; users.len()];
    let mut counters = CellCounters::default();
    let mut trace = record_trace.then(CellTrace::default);
    let mut models: Vec<SinrModel> =
        users.iter().map(|u| SinrModel { s: u.home_gain, pathloss_ici: u.interference_gains.clone(), rho }).collect();
    let mut desired = vec![0.0; users.len()];
    let mut now = vec![0.0; users.len() * k];
    let mut delayed = vec![0.0; users.len() * k];
    let mut attempt_gains = vec![0.0; k];
    let mut decisions = Vec::with_capacity(users.len());

    let mut t = 0u64;
    while t < horizon {
        decisions.clear();
        let have_delayed = t >= config.feedback_delay;
        for (u, user) in users.iter().enumerate() {
            desired[u] = field.desired_gain(t, u);
            models[u].s = user.home_gain * desired[u];
            let row = u * k..(u + 1) * k;
            if kind.needs_current_ici() {
                field.ici_gains_into(t, u, &mut now[row.clone()]);
            }
            if kind.needs_delayed_ici() && have_delayed {
                field.ici_gains_into(t - config.feedback_delay, u, &mut delayed[row.clone()]);
            }
            let obs = Observation {
                now: kind.needs_current_ici().then(|| &now[row.clone()]),
                delayed: (kind.needs_delayed_ici() && have_delayed).then(|| &delayed[row.clone()]),
            };
            let d = engine.decide(u, &models[u], obs)?;
            counters.cold_starts += u64::from(d.flags.cold_start);
            counters.non_unimodal += u64::from(d.flags.rate.non_unimodal);
            counters.hit_cap += u64::from(d.flags.rate.hit_cap);
            decisions.push(d);
        }
        let chosen = pf_select(&pf, &decisions);
        if let Some(tr) = trace.as_mut() {
            tr.selections.push((t, decisions.iter().map(|d| d.r_eff).collect(), pf.throughput.clone(), chosen));
        }
        let model = &models[chosen];
        let r_source = decisions[chosen].r_source;
        let process = if kind.always_succeeds() {
            let gamma = model.sinr_from_gains(&now[chosen * k..(chosen + 1) * k]);
            let p = HarqProcess::immediate_success(chosen, r_source, config.n_max, desired[chosen], gamma);
            if let Some(tr) = trace.as_mut() {
                tr.attempts.push(TraceRecord {
                    slot: t,
                    user: chosen,
                    attempt: 1,
                    gamma_acc: gamma,
                    outcome: p.outcome,
                });
            }
            p
        } else {
            let mut p = HarqProcess::new(chosen, r_source, config.n_max, desired[chosen]);
            while !p.outcome.is_terminal() {
                let slot = t + p.attempt as u64;
                field.ici_gains_into(slot, chosen, &mut attempt_gains);
                p.step(model.sinr_from_gains(&attempt_gains))?;
                if let Some(tr) = trace.as_mut() {
                    tr.attempts.push(TraceRecord {
                        slot,
                        user: chosen,
                        attempt: p.attempt,
                        gamma_acc: p.gamma_acc,
                        outcome: p.outcome,
                    });
                }
            }
            p
        };
        let rate = process.delivered_rate()?;
        bits[chosen] += process.delivered_bits();
        counters.processes += 1;
        counters.drops += u64::from(process.outcome == Outcome::Drop);
        match config.pf_update {
            PfUpdateMode::PerSlot => {
                for _ in 0..process.attempt {
                    pf_update(&mut pf, chosen, rate);
                }
            }
            PfUpdateMode::PerProcess => pf_update(&mut pf, chosen, rate),
        }
        if let Some(tr) = trace.as_mut() {
            tr.slot_delivered.extend(std::iter::repeat_n(rate, process.attempt as usize));
        }
        t += process.attempt as u64;
    }
    Ok(CellRun { bits, slots: t, pf, counters, trace })
}
