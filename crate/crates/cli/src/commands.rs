use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{OutputDir, Table};
use icilink::dlt::{dlt_curve, optimize_rate, rate_grid, InversionOutage};
use icilink::sim::{
    empirical_effective_sinr, qq_data, run_scenario, single_link_dlt_compare, InterferenceSet, LinkConfig,
};

fn num(x: f64) -> String {
    x.to_string()
}

fn sweep_stem(prefix: &str, r: f64, alpha: f64) -> String {
    format!("{prefix}_r{r}_alpha{alpha}")
}

fn sweep(config: &RunConfig) -> Result<Vec<(f64, f64, LinkConfig)>, CliError> {
    let mut points = Vec::new();
    for alpha in config.alphas() {
        for &r in &config.link.radii {
            points.push((r, alpha, config.link(r, alpha)?));
        }
    }
    Ok(points)
}

/// Analytical and simulated DLT curves for every (radius, alpha) pair.
pub fn dlt_curve_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let rates = rate_grid(config.dlt.r_max, config.link.curve_step)?;
    for (r, alpha, link) in sweep(config)? {
        let mut table = Table::new(&["curve", "R", "S_R", "std_err", "n_max"]);
        let n_max = num(link.n_max as f64);
        for &approx in &config.link.approximations {
            let outage = InversionOutage::new(link.spec(approx)?, link.n_max, config.cfmath)?;
            let curve = dlt_curve(&outage, &rates)?;
            for (rate, s) in curve.rates.iter().zip(&curve.values) {
                table.push(vec![approx.to_string(), num(*rate), num(*s), "0".into(), n_max.clone()]);
            }
        }
        let dominant = config.link.dominant;
        let sim = single_link_dlt_compare(
            &link,
            &rates,
            config.link.processes,
            InterferenceSet::All,
            InterferenceSet::Dominant(dominant),
            config.sim.seed,
        )?;
        for (name, curve) in [("exact".to_string(), &sim.first), (format!("dominant{dominant}"), &sim.second)] {
            for ((rate, s), se) in rates.iter().zip(&curve.values).zip(&curve.std_err) {
                table.push(vec![name.clone(), num(*rate), num(*s), num(*se), n_max.clone()]);
            }
        }
        out.write_table(&sweep_stem("dlt", r, alpha), &table)?;
        eprintln!("dlt-curve: r = {r} m, alpha = {alpha} done");
    }
    Ok(())
}

/// Q-Q series of exact samples against each approximation.
pub fn qq_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let m = config.link.quantiles;
    let probabilities: Vec<f64> = (1..=m).map(|i| i as f64 / (m + 1) as f64).collect();
    for (r, alpha, link) in sweep(config)? {
        let mut table = Table::new(&["p", "theoretical_q", "empirical_q", "approx", "n"]);
        for n in config.attempts() {
            let samples =
                empirical_effective_sinr(&link, n, config.link.samples, config.sim.seed.wrapping_add(n as u64))?;
            for &approx in &config.link.approximations {
                let spec = link.spec(approx)?.with_attempts(n);
                for p in qq_data(&samples, &spec, &probabilities, &config.cfmath)? {
                    table.push(vec![num(p.p), num(p.theoretical), num(p.empirical), approx.to_string(), n.to_string()]);
                }
            }
        }
        out.write_table(&sweep_stem("qq", r, alpha), &table)?;
        eprintln!("qq: r = {r} m, alpha = {alpha} done");
    }
    Ok(())
}

/// One row per (policy, users) with 95% CI half-widths, plus the per-trial rows.
pub fn simulate_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let mut trials = Table::new(&["policy", "n_users", "trial", "system_dlt", "fairness"]);
    let mut aggregate = Table::new(&[
        "policy",
        "n_users",
        "system_dlt",
        "system_dlt_ci",
        "fairness",
        "fairness_ci",
        "fairness_pf_ema",
        "fairness_pf_ema_ci",
        "fairness_floored",
        "trials",
    ]);
    for &n in &config.sim.users {
        let scenario = config.scenario(n)?;
        for &policy in &config.sim.policies {
            let report = run_scenario(&scenario, policy)?;
            for t in &report.trials {
                trials.push(vec![
                    policy.to_string(),
                    n.to_string(),
                    t.trial.to_string(),
                    num(t.system_dlt),
                    num(t.fairness),
                ]);
            }
            aggregate.push(vec![
                policy.to_string(),
                n.to_string(),
                num(report.system_dlt.mean),
                num(report.system_dlt.halfwidth),
                num(report.fairness.mean),
                num(report.fairness.halfwidth),
                num(report.fairness_pf_ema.mean),
                num(report.fairness_pf_ema.halfwidth),
                report.fairness_floored.to_string(),
                report.trials.len().to_string(),
            ]);
            eprintln!(
                "simulate: {policy} with {n} users: system DLT {:.4} ± {:.4}",
                report.system_dlt.mean, report.system_dlt.halfwidth
            );
        }
    }
    out.write_table("results", &trials)?;
    out.write_table("aggregate", &aggregate)?;
    Ok(())
}

/// Prints `(R*, S(R*))` per sweep point and approximation; optionally dumps the curves.
pub fn rate_opt_cmd(config: &RunConfig, mut dump: Option<&mut OutputDir>) -> Result<Table, CliError> {
    let mut decisions = Table::new(&["r", "alpha", "approx", "r_star", "s_at_r_star", "non_unimodal", "hit_cap"]);
    for (r, alpha, link) in sweep(config)? {
        for &approx in &config.link.approximations {
            let outage = InversionOutage::new(link.spec(approx)?, link.n_max, config.cfmath)?;
            let d = optimize_rate(&outage, &config.dlt)?;
            decisions.push(vec![
                num(r),
                num(alpha),
                approx.to_string(),
                num(d.r_star),
                num(d.s_at_r_star),
                d.flags.non_unimodal.to_string(),
                d.flags.hit_cap.to_string(),
            ]);
            if let Some(out) = dump.as_deref_mut() {
                let curve = dlt_curve(&outage, &rate_grid(config.dlt.r_max, config.link.curve_step)?)?;
                let mut table = Table::new(&["approx", "R", "S_R", "n_max"]);
                for (rate, s) in curve.rates.iter().zip(&curve.values) {
                    table.push(vec![approx.to_string(), num(*rate), num(*s), link.n_max.to_string()]);
                }
                out.write_table(&format!("{}_{approx}", sweep_stem("curve", r, alpha)), &table)?;
            }
        }
    }
    if let Some(out) = dump {
        out.write_table("rate_opt", &decisions)?;
    }
    Ok(decisions)
}
