use icilink::cfmath::{Approximation, QuadratureConfig};
use icilink::channel::FadingField;
use icilink::dlt::{InversionOutage, OutageModel, SearchConfig};
use icilink::geometry::{build_user, CellTopology};
use icilink::mac::{
    pf_select, run_cell_procedure, CellRun, CellUser, MacConfig, Outcome, PfState, PfUpdateMode, PF_INITIAL_THROUGHPUT,
};
use icilink::policies::{PolicyDecision, PolicyEngine, PolicyKind};
use icilink::sim::{empirical_success_by_attempt, LinkConfig};

const RHO: f64 = 19952.623149688792;

fn cell_users() -> Vec<CellUser> {
    let topology = CellTopology::default();
    [60.0, 150.0, 250.0, 400.0, 520.0]
        .iter()
        .enumerate()
        .map(|(i, &r)| CellUser::from(&build_user(&topology, r, 0.4 + i as f64).unwrap()))
        .collect()
}

fn run(kind: PolicyKind, config: &MacConfig, horizon: u64) -> CellRun {
    let users = cell_users();
    let engine =
        PolicyEngine::new(kind, 6, config.n_max, &QuadratureConfig::default(), &SearchConfig::default()).unwrap();
    let mut field = FadingField::new(77, 0, users.len(), 6);
    run_cell_procedure(&users, RHO, &engine, config, &mut field, horizon, true).unwrap()
}

#[test]
fn genie_processes_always_decode_at_once() {
    let run = run(PolicyKind::GenieOpt, &MacConfig::default(), 3000);
    let trace = run.trace.unwrap();
    assert_eq!(trace.attempts.len(), trace.selections.len());
    assert!(trace.attempts.iter().all(|a| a.outcome == Outcome::Success(1) && a.attempt == 1));
    assert_eq!(run.counters.drops, 0);
    assert_eq!(run.slots, 3000);
}

#[test]
fn selections_and_averages_replay_from_the_trace() {
    for mode in [PfUpdateMode::PerSlot, PfUpdateMode::PerProcess] {
        for kind in [PolicyKind::IplaBased, PolicyKind::InstSinr] {
            let config = MacConfig { t_c: 50.0, pf_update: mode, ..Default::default() };
            let run = run(kind, &config, 4000);
            let trace = run.trace.as_ref().unwrap();
            let mut pf = PfState::new(5, config.t_c).unwrap();
            let keep = 1.0 - 1.0 / config.t_c;
            for (i, (start, r_eff, averages, chosen)) in trace.selections.iter().enumerate() {
                for (a, b) in averages.iter().zip(&pf.throughput) {
                    assert!((a - b).abs() <= 1e-12 * b.max(PF_INITIAL_THROUGHPUT), "average drifted at process {i}");
                }
                let decisions: Vec<PolicyDecision> = r_eff
                    .iter()
                    .enumerate()
                    .map(|(user, &r)| PolicyDecision { user, r_source: r, r_eff: r, flags: Default::default() })
                    .collect();
                assert_eq!(pf_select(&pf, &decisions), *chosen, "selection differs at process {i}");
                let end = trace.selections.get(i + 1).map_or(run.slots, |s| s.0);
                let slots = (*start..end).map(|t| trace.slot_delivered[t as usize]);
                let steps: Vec<f64> = match mode {
                    PfUpdateMode::PerSlot => slots.collect(),
                    PfUpdateMode::PerProcess => slots.take(1).collect(),
                };
                for rate in steps {
                    for t in pf.throughput.iter_mut() {
                        *t *= keep;
                    }
                    pf.throughput[*chosen] += rate / config.t_c;
                }
            }
            for (a, b) in run.pf.throughput.iter().zip(&pf.throughput) {
                assert!((a - b).abs() <= 1e-12 * b);
            }
        }
    }
}

#[test]
fn throughput_accounting_is_consistent() {
    let run = run(PolicyKind::AvgInterference, &MacConfig::default(), 5000);
    let trace = run.trace.as_ref().unwrap();
    assert_eq!(trace.slot_delivered.len() as u64, run.slots);
    assert!(run.slots >= 5000 && run.slots < 5000 + 4);
    let total_bits: f64 = run.bits.iter().sum();
    assert!((trace.slot_delivered.iter().sum::<f64>() - total_bits).abs() < 1e-9 * total_bits);
    assert!((run.system_throughput() - total_bits / run.slots as f64).abs() < 1e-15);
    assert!((run.user_throughput().iter().sum::<f64>() - run.system_throughput()).abs() < 1e-12);
    let successes = trace.attempts.iter().filter(|a| matches!(a.outcome, Outcome::Success(_))).count() as u64;
    assert_eq!(successes + run.counters.drops, run.counters.processes);
}

#[test]
fn stale_feedback_is_missing_only_at_the_start() {
    let run = run(PolicyKind::InstSinr, &MacConfig { feedback_delay: 1, ..Default::default() }, 500);
    // only the very first decisions lack an observation
    assert_eq!(run.counters.cold_starts, 5);
}

#[test]
fn single_attempt_success_matches_one_minus_outage() {
    let topology = CellTopology::ring(1, 1000.0, 37.0, 1000.0, 3.0).unwrap();
    let link = LinkConfig { topology, rho: f64::INFINITY, ..Default::default() };
    // one interferer and no noise: the IPLA model is exact
    let outage =
        InversionOutage::new(link.spec(Approximation::Ipla).unwrap(), link.n_max, QuadratureConfig::default()).unwrap();
    let processes = 200_000;
    for rate in [2.0, 4.0, 6.0] {
        let empirical = empirical_success_by_attempt(&link, rate, processes, 31).unwrap();
        let p_out = outage.outage_all(rate).unwrap();
        for n in 1..=link.n_max as usize {
            let want = 1.0 - p_out[n];
            let se = (want * (1.0 - want) / processes as f64).sqrt().max(1e-9);
            assert!((empirical[n - 1] - want).abs() < 4.0 * se, "R={rate}, n={n}: {} vs {want}", empirical[n - 1]);
        }
    }
}
