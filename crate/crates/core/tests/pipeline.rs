mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use qutaylor::config::RunConfig;
use qutaylor::pipeline::{run_pipeline, run_robustness, Stage};
use qutaylor::rule::RuleCase;

fn config(dir: &Path, out: &str, extra: &str) -> RunConfig {
    let paths = common::write_inputs(&dir.join("data"), 11);
    RunConfig::parse(&common::config_text(&paths, &dir.join(out), extra), dir).unwrap()
}

fn files_under(root: &Path) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.insert(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    found
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn observations(path: &Path) -> (String, String) {
    let row = csv_rows(path).into_iter().find(|r| r[0] == "observations").unwrap();
    (row[1].clone(), row[3].clone())
}

#[test]
fn full_sample_row_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out", "");
    let res = run_pipeline(&cfg, Stage::ImpliedTau).unwrap();
    let out = &cfg.output_dir;

    assert_eq!(res.panel.as_ref().unwrap().len(), 283);
    assert_eq!(csv_rows(&out.join("panel.csv")).len(), 283);
    assert_eq!(observations(&out.join("var_coefficients.csv")), ("282".into(), "282".into()));
    assert_eq!(observations(&out.join("skedastic_coefficients.csv")), ("281".into(), "281".into()));
    assert_eq!(csv_rows(&out.join("shocks.csv")).len(), 282);
    assert_eq!(csv_rows(&out.join("implied_tau.csv")).len(), 282);

    let terms: Vec<String> = csv_rows(&out.join("var_coefficients.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(&terms[..4], ["i", "pi", "y", "constant"]);

    let header = fs::read_to_string(out.join("implied_tau.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("quarter,i_observed,i_star_0.01,"));
    assert!(header.ends_with("i_star_0.99,tau_hat,fit_error"));

    let plot_series: BTreeSet<String> =
        csv_rows(&out.join("plot_data.csv")).into_iter().map(|r| r[1].clone()).collect();
    assert!(
        plot_series.contains("tau_hat") && plot_series.contains("i_observed") && plot_series.contains("i_star_0.5")
    );

    // Manifest covers every file written, and nothing else.
    let mut listed: BTreeSet<String> = res.manifest.files.iter().map(|e| e.path.clone()).collect();
    listed.insert("manifest.txt".into());
    assert_eq!(listed, files_under(out));
    assert!(!out.join("FAILED").exists());
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(dir.path(), "a", "");
    let mut b = a.clone();
    b.output_dir = dir.path().join("b");
    let ra = run_pipeline(&a, Stage::ImpliedTau).unwrap();
    let rb = run_pipeline(&b, Stage::ImpliedTau).unwrap();
    assert_eq!(ra.manifest, rb.manifest);
    for entry in &ra.manifest.files {
        assert_eq!(
            fs::read(a.output_dir.join(&entry.path)).unwrap(),
            fs::read(b.output_dir.join(&entry.path)).unwrap()
        );
    }
    assert_eq!(
        fs::read(a.output_dir.join("manifest.txt")).unwrap(),
        fs::read(b.output_dir.join("manifest.txt")).unwrap()
    );

    let mut c = a.clone();
    c.calibration.delta = 0.2;
    c.output_dir = dir.path().join("c");
    let rc = run_pipeline(&c, Stage::Estimate).unwrap();
    assert_ne!(rc.manifest.reproducibility_hash, ra.manifest.reproducibility_hash);
}

#[test]
fn post_1979_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out", "window = 1979Q4:2025Q2\n");
    run_pipeline(&cfg, Stage::Estimate).unwrap();
    assert_eq!(observations(&cfg.output_dir.join("var_coefficients.csv")), ("182".into(), "182".into()));
    assert_eq!(observations(&cfg.output_dir.join("skedastic_coefficients.csv")), ("181".into(), "181".into()));
}

#[test]
fn dummies_enter_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out", "dummy = covid\ndummy = gfc\ninclude_dummies = true\n");
    run_pipeline(&cfg, Stage::Estimate).unwrap();
    let panel = fs::read_to_string(cfg.output_dir.join("panel.csv")).unwrap();
    assert!(panel.starts_with("quarter,pi,y,i,COVID,GFC\n"));
    let terms: Vec<String> =
        csv_rows(&cfg.output_dir.join("var_coefficients.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(&terms[..6], ["i", "pi", "y", "constant", "COVID", "GFC"]);
    let flagged = csv_rows(&cfg.output_dir.join("panel.csv")).iter().filter(|r| r[5] == "1").count();
    assert_eq!(flagged, 9);
}

#[test]
fn failed_stage_leaves_marker_and_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_inputs(&dir.path().join("data"), 11);
    // Constant rate: the VAR design is rank deficient, so estimation fails after prepare.
    let text = fs::read_to_string(&paths.rate).unwrap();
    let flat: String = text
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{l}\n") } else { format!("{},2.5\n", l.split(',').next().unwrap()) })
        .collect();
    fs::write(&paths.rate, flat).unwrap();
    let cfg = RunConfig::parse(&common::config_text(&paths, &dir.path().join("out"), ""), dir.path()).unwrap();
    let err = run_pipeline(&cfg, Stage::ImpliedTau).unwrap_err();
    assert_eq!(err.stage, "estimate");
    assert_eq!(err.source.class(), qutaylor::ErrorClass::Numerical);
    let marker = fs::read_to_string(cfg.output_dir.join("FAILED")).unwrap();
    assert!(marker.starts_with("stage: estimate\n"), "{marker}");
    assert!(cfg.output_dir.join("panel.csv").exists());
    let manifest = fs::read_to_string(cfg.output_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("  FAILED\n") && manifest.contains("  panel.csv\n"));
}

#[test]
fn robustness_presets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out", "rule_case = location_shift\n");
    let summaries = run_robustness(&cfg).unwrap();
    let names: Vec<&str> = summaries.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["lambda_0.5", "lambda_1", "lambda_2", "post_1979q4"]);
    assert_eq!(summaries[3].var_observations, 182);
    assert_eq!(summaries[3].skedastic_observations, 181);

    // With constant scales the inflation response is −β·c_π(λ) / (δ + β·A(λ)).
    let est = qutaylor::pipeline::estimate(&cfg, &qutaylor::pipeline::prepare_panel(&cfg).unwrap().panel).unwrap();
    let (p, o) = (&est.law.inflation, &est.law.output_gap);
    for (s, lambda) in summaries.iter().zip([0.5, 1.0, 2.0]) {
        let b = cfg.calibration.beta;
        let c_pi = p.pi * p.rate + lambda * o.pi * o.rate;
        let den = cfg.calibration.delta + b * (p.rate * p.rate + lambda * o.rate * o.rate);
        let expected = -b * c_pi / den;
        assert!((s.inflation_response - expected).abs() < 1e-6, "{}: {} vs {expected}", s.name, s.inflation_response);
    }
    assert_ne!(summaries[0].inflation_response, summaries[2].inflation_response);

    let top = files_under(&cfg.output_dir);
    assert!(top.contains("robustness_summary.csv") && top.contains("lambda_2/implied_tau.csv"));
    let manifest = fs::read_to_string(cfg.output_dir.join("manifest.txt")).unwrap();
    for f in &top {
        if f != "manifest.txt" {
            assert!(manifest.contains(&format!("  {f}\n")), "{f} missing from manifest");
        }
    }
    assert_eq!(cfg.rule_case, RuleCase::LocationShift);
}
