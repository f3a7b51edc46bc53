use std::collections::BTreeSet;
use std::process::Command;

use kacgas::config::{Beta, InitialShape};
use kacgas::io::read_path_csv;
use kacgas::manifest::{sha256_hex, MANIFEST_FILE};
use kacgas::{parse_config, run, ExperimentConfig, Kind};
use proptest::prelude::*;

fn config_in(kind: Kind, dir: &tempfile::TempDir) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(kind);
    c.out_dir = dir.path().to_string_lossy().into_owned();
    c
}

fn files_in(dir: &std::path::Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn manifest_lists_every_output_with_its_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config_in(Kind::PdeEvolve, &dir);
    c.cells = 40;
    c.dt = 0.005;
    c.sample_dt = 0.05;
    c.t_end = 0.2;
    let out = run(&c).unwrap();
    let mut listed: BTreeSet<String> = out.manifest.outputs.iter().map(|o| o.file.clone()).collect();
    listed.insert(MANIFEST_FILE.to_string());
    assert_eq!(listed, files_in(dir.path()));
    for o in &out.manifest.outputs {
        let bytes = std::fs::read(dir.path().join(&o.file)).unwrap();
        assert_eq!(sha256_hex(&bytes), o.sha256);
    }
    let path = read_path_csv(&std::fs::read(dir.path().join("pde.csv")).unwrap()).unwrap();
    assert_eq!(path.times().len(), 5);
    assert_eq!(parse_config(&out.manifest.config).unwrap(), c);
}

#[test]
fn reruns_reproduce_checksums() {
    let checksums = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config_in(Kind::Simulate, &dir);
        c.half_width = 30;
        c.cells = 20;
        c.replicas = 6;
        c.t_end = 0.05;
        c.sample_dt = 0.025;
        c.beta = Beta::Absolute(0.05);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let out = pool.install(|| run(&c)).unwrap();
        out.manifest.outputs
    };
    let a = checksums(1);
    assert_eq!(a, checksums(1));
    assert_eq!(a, checksums(3));
}

#[test]
fn perturbed_path_round_trips_through_ldp_eval() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config_in(Kind::LdpPerturb, &dir);
    c.cells = 40;
    c.t_end = 0.2;
    c.dt = 0.005;
    c.modes = 2;
    c.intervals = 2;
    c.beta = Beta::OverBeta0(0.5);
    c.f_coeffs = vec![0.3, -0.2, 0.1, 0.4, -0.3, 0.2];
    run(&c).unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ldp_perturb.json")).unwrap()).unwrap();
    let cost = report["rate_from_f"].as_f64().unwrap();
    assert!(report["relative_difference"].as_f64().unwrap() < 1e-6);

    let eval_dir = tempfile::tempdir().unwrap();
    let mut e = config_in(Kind::LdpEval, &eval_dir);
    e.cells = 40;
    e.modes = 2;
    e.intervals = 2;
    e.beta = c.beta;
    e.path = Some(dir.path().join("perturbed_path.csv").to_string_lossy().into_owned());
    run(&e).unwrap();
    let rate: serde_json::Value =
        serde_json::from_slice(&std::fs::read(eval_dir.path().join("rate_report.json")).unwrap()).unwrap();
    let hat = rate["rate_hat"].as_f64().unwrap();
    assert!((hat - cost).abs() / cost < 1e-6, "{hat} vs {cost}");
    assert!(rate["bounds"]["upper_holds"].as_bool().unwrap());
}

#[test]
fn beta0_and_kernel_info_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config_in(Kind::Beta0, &dir)).unwrap();
    assert_eq!(out.verdict, Some(true));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("beta0.json")).unwrap()).unwrap();
    let s = v["sup_grad"].as_f64().unwrap();
    let expected = 1.0 / (1.0 / 3.0 + 3.0 * s * s * 4.0 / std::f64::consts::PI.powi(2));
    assert!((v["beta0"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!((v["c_lambda"].as_f64().unwrap() - 4.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);

    let dir = tempfile::tempdir().unwrap();
    let mut c = config_in(Kind::KernelInfo, &dir);
    c.half_width = 50;
    run(&c).unwrap();
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("kernel_info.json")).unwrap()).unwrap();
    assert_eq!(v["half_width"], 50);
    assert!(v["convolution_row_sum_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn contraction_run_reports_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config_in(Kind::Contraction, &dir);
    c.cells = 40;
    c.pairs = 3;
    c.t_end = 0.3;
    c.dt = 0.002;
    c.beta = Beta::OverBeta0(0.25);
    assert_eq!(run(&c).unwrap().verdict, Some(true));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_kacgas");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "betta = 0.1\nrho_minus = 0.9\nrho_plus = 0.2\n").unwrap();
    let out = Command::new(exe)
        .args(["pde-evolve", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key 'betta'") && err.contains("rho_minus <= rho_plus"), "{err}");

    let out = Command::new(exe).args(["no-such-kind"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(exe)
        .args(["beta0", "--out-dir"])
        .arg(dir.path().join("b0"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("b0").join("beta0.json").exists());
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

prop_compose! {
    fn configs()(
        kind in prop::sample::select(Kind::ALL.to_vec()),
        n in 50usize..500,
        beta in finite(0.0, 2.0),
        relative in any::<bool>(),
        rho_minus in finite(0.05, 0.5),
        gap in finite(0.0, 0.4),
        seed in any::<u64>(),
        cells in 2usize..100,
        amplitude in finite(0.0, 0.05),
        linear in any::<bool>(),
        modes in 1usize..4,
        intervals in 1usize..4,
        coeff in finite(-1.0, 1.0),
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.half_width = n;
        c.beta = if relative { Beta::OverBeta0(beta) } else { Beta::Absolute(beta) };
        c.rho_minus = rho_minus;
        c.rho_plus = rho_minus + gap;
        c.seed = seed;
        c.cells = cells;
        c.initial = if linear { InitialShape::Linear } else { InitialShape::Sine };
        c.initial_amplitude = amplitude;
        c.modes = modes;
        c.intervals = intervals;
        c.t_end = 0.4;
        c.sample_dt = 0.1;
        c.dt = 0.002;
        if kind == Kind::LdpEval {
            c.path = Some("runs/path.csv".into());
        }
        if kind == Kind::LdpPerturb {
            c.f_coeffs = (0..modes * (intervals + 1)).map(|i| coeff / (i + 1) as f64).collect();
        }
        c
    }
}

proptest! {
    #[test]
    fn render_then_parse_is_the_identity(c in configs()) {
        prop_assert!(c.validate().is_ok(), "{:?}", c.validate());
        prop_assert_eq!(parse_config(&c.render()).unwrap(), c);
    }
}
