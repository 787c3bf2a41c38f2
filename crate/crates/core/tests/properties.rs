use icilink::cfmath::{QuadratureConfig, UnitCdfTable};
use icilink::channel::SinrModel;
use icilink::mac::{harq_step, pf_select, pf_update, HarqProcess, Outcome, PfState};
use icilink::policies::PolicyDecision;
use icilink::sim::{fairness_metric, paired_difference, CI_LEVEL};
use proptest::prelude::*;

fn decisions(rates: &[f64]) -> Vec<PolicyDecision> {
    rates
        .iter()
        .enumerate()
        .map(|(user, &r)| PolicyDecision { user, r_source: r, r_eff: r, flags: Default::default() })
        .collect()
}

proptest! {
    #[test]
    fn harq_accumulates_and_stops(rate in 0.1f64..10.0, gammas in prop::collection::vec(0.0f64..50.0, 1..6)) {
        let n_max = gammas.len() as u32;
        let mut p = HarqProcess::new(0, rate, n_max, 1.0);
        let mut acc = 0.0;
        for &g in &gammas {
            let next = harq_step(&p, g).unwrap();
            acc += g;
            prop_assert!((next.gamma_acc - acc).abs() <= 1e-12 * acc.max(1.0));
            prop_assert!(next.gamma_acc >= p.gamma_acc);
            let decodes = (1.0 + acc).log2() >= rate;
            prop_assert_eq!(matches!(next.outcome, Outcome::Success(_)), decodes);
            p = next;
            if p.outcome.is_terminal() {
                break;
            }
        }
        prop_assert!(p.outcome.is_terminal());
        let delivered = p.delivered_rate().unwrap();
        prop_assert!(delivered <= rate && delivered >= 0.0);
    }

    #[test]
    fn pf_selects_the_largest_ratio(rates in prop::collection::vec(0.0f64..10.0, 1..12), credits in prop::collection::vec(0.0f64..5.0, 0..30)) {
        let mut pf = PfState::new(rates.len(), 20.0).unwrap();
        for (i, c) in credits.iter().enumerate() {
            pf_update(&mut pf, i % rates.len(), *c);
        }
        let chosen = pf_select(&pf, &decisions(&rates));
        let best = rates.iter().zip(&pf.throughput).map(|(r, t)| r / t).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(rates[chosen] / pf.throughput[chosen], best);
        let scaled: Vec<f64> = rates.iter().map(|r| r * 3.0).collect();
        prop_assert_eq!(pf_select(&pf, &decisions(&scaled)), chosen);
    }

    #[test]
    fn sinr_is_scale_free(s in 1e-6f64..1.0, pathloss in prop::collection::vec(1e-7f64..1e-2, 1..7), gain in 0.0f64..5.0, scale in 1e-3f64..1e3) {
        let model = SinrModel::new(s, pathloss.clone(), 1e4).unwrap();
        let scaled = SinrModel::new(s * scale, pathloss.iter().map(|l| l * scale).collect(), 1e4 / scale).unwrap();
        let gains = vec![gain; pathloss.len()];
        let (a, b) = (model.sinr_from_gains(&gains), scaled.sinr_from_gains(&gains));
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn fairness_is_a_log_sum(throughput in prop::collection::vec(1e-5f64..10.0, 1..20)) {
        let (fm, floored) = fairness_metric(&throughput);
        prop_assert!(!floored);
        let product: f64 = throughput.iter().product();
        prop_assert!((fm - product.ln()).abs() <= 1e-9 * fm.abs().max(1.0));
    }

    #[test]
    fn paired_difference_is_antisymmetric(a in prop::collection::vec(0.0f64..10.0, 3..30), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + shift + 0.01 * (i % 3) as f64).collect();
        let ab = paired_difference(&a, &b, CI_LEVEL);
        let ba = paired_difference(&b, &a, CI_LEVEL);
        prop_assert!((ab.mean + ba.mean).abs() < 1e-12);
        prop_assert!((ab.halfwidth - ba.halfwidth).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_cdf_is_a_distribution_function(y in 1e-3f64..1e9, factor in 1.0f64..4.0, n in 1u32..=4) {
        let q = QuadratureConfig::default();
        let slack = 2.0 * q.abs_tol;
        for shape in [1u32, 6] {
            let table = UnitCdfTable::shared(shape, 4, &q).unwrap();
            let v = table.cdf(n, y);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(table.cdf(n, y * factor) >= v - slack);
            if n < 4 {
                prop_assert!(table.cdf(n + 1, y) <= v + slack);
            }
        }
    }
}
