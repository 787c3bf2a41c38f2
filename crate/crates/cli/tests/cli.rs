use icilink::cfmath::{Approximation, QuadratureConfig};
use icilink::dlt::{optimize_rate, InversionOutage, SearchConfig};
use icilink::sim::LinkConfig;
use statrs::function::gamma::gamma_ur;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn icilink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icilink")).args(args).output().expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| headers.iter().zip(r.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn field(row: &BTreeMap<String, String>, name: &str) -> f64 {
    row[name].parse().unwrap()
}

#[test]
fn rate_opt_matches_the_library() {
    let out = icilink(&["rate-opt", "--r", "250"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "r\talpha\tapprox\tr_star\ts_at_r_star\tnon_unimodal\thit_cap");
    let rows: BTreeMap<String, Vec<String>> = lines
        .map(|l| {
            let cols: Vec<String> = l.split('\t').map(str::to_string).collect();
            (cols[2].clone(), cols)
        })
        .collect();
    let link = LinkConfig::default();
    for approx in [Approximation::Ipla, Approximation::Ga] {
        let model = InversionOutage::new(link.spec(approx).unwrap(), 4, QuadratureConfig::default()).unwrap();
        let want = optimize_rate(&model, &SearchConfig::default()).unwrap();
        let row = &rows[&approx.to_string()];
        assert!((row[3].parse::<f64>().unwrap() - want.r_star).abs() < 1e-12);
        assert!((row[4].parse::<f64>().unwrap() - want.s_at_r_star).abs() < 1e-12);
    }
    assert_ne!(rows["ga"][3], rows["ipla"][3]);
}

#[test]
fn invalid_configuration_exits_with_two() {
    let out = icilink(&["rate-opt", "--r", "-5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("link.radii[0]"));

    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [("grid.toml", "[link]\ncurve_step = 0.0\n"), ("typo.toml", "[link]\nradius = 3\n")] {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        let out = icilink(&["--config", path.to_str().unwrap(), "rate-opt"]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn single_attempt_ipla_quantiles_are_inverse_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("qq");
    let out = icilink(&["qq", "--approx", "ipla", "--n", "1", "--samples", "5000", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&out_dir.join("qq_r250_alpha3.csv"));
    assert_eq!(rows.len(), 99);
    let spec = LinkConfig::default().spec(Approximation::Ipla).unwrap();
    for row in &rows {
        let (p, x) = (field(row, "p"), field(row, "theoretical_q"));
        // P(c·Y ≤ x) = Q(K, c/x) for Y ~ Inv-Gamma(K, 1)
        let cdf = gamma_ur(spec.shape() as f64, spec.ratio() / x);
        assert!((cdf - p).abs() < 1e-6, "p = {p}: closed form gives {cdf}");
    }
    assert!(out_dir.join("config.toml").exists() && out_dir.join("manifest.json").exists());
}

#[test]
fn default_qq_covers_every_attempt_and_approximation() {
    let dir = tempfile::tempdir().unwrap();
    let out = icilink(&["qq", "--samples", "2000", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("qq_r250_alpha3.csv"));
    let series: std::collections::BTreeSet<(String, String)> =
        rows.iter().map(|r| (r["approx"].clone(), r["n"].clone())).collect();
    assert_eq!(series.len(), 8);
}

#[test]
fn simulate_writes_one_aggregate_row_per_policy_and_user_count() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["simulate", "--users", "5,25,50", "--horizon", "300", "--trials", "2", "--out", dir.path().to_str().unwrap()];
    let out = icilink(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let aggregate = read_csv(&dir.path().join("aggregate.csv"));
    assert_eq!(aggregate.len(), 15);
    assert!(aggregate.iter().all(|r| r["trials"] == "2" && field(r, "system_dlt") > 0.0));
    assert_eq!(read_csv(&dir.path().join("results.csv")).len(), 30);
}

/// Every output except the manifest, with the output directory masked in the saved config.
fn data_files(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap().replace(dir.to_str().unwrap(), "<out>");
            (p.file_name().unwrap().to_string_lossy().into_owned(), text)
        })
        .collect()
}

#[test]
fn seeded_runs_and_saved_configs_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "simulate",
            "--users",
            "5",
            "--horizon",
            "400",
            "--trials",
            "2",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(icilink(&args).status.success());
    };
    run(&a, &[]);
    run(&b, &[]);
    assert_eq!(data_files(&a), data_files(&b));
    // replaying the saved configuration yields the same data
    let saved = a.join("config.toml");
    let out = icilink(&["--config", saved.to_str().unwrap(), "--out", c.to_str().unwrap(), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_files(&a), data_files(&c));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn dlt_curves_for_each_radius() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "dlt-curve",
        "--r",
        "150,250,400",
        "--alpha",
        "3",
        "--processes",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let out = icilink(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for r in [150, 250, 400] {
        let rows = read_csv(&dir.path().join(format!("dlt_r{r}_alpha3.csv")));
        let curves: std::collections::BTreeSet<&str> = rows.iter().map(|r| r["curve"].as_str()).collect();
        assert_eq!(curves.into_iter().collect::<Vec<_>>(), ["dominant3", "exact", "ga", "ipla"]);
        assert!(rows.iter().all(|r| field(r, "S_R") >= 0.0 && field(r, "S_R") <= field(r, "R") + 1e-12));
    }
}

#[test]
fn json_output_is_an_array_of_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = icilink(&["rate-opt", "--dump-curve", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let decisions: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("rate_opt.json")).unwrap()).unwrap();
    let rows = decisions.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["r_star"].is_number() && rows[0]["non_unimodal"].is_boolean());
    assert!(dir.path().join("curve_r250_alpha3_ipla.json").exists());
}
