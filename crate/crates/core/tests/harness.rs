use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use slowfast_mmle::dynamics::{Algorithm, Budget, SdeConfig};
use slowfast_mmle::harness::{
    exit_code, export_dataset, load_config, load_config_with, run_comparison, run_single, run_study, validate_config,
    Alignment, ComparisonSuite, Overrides,
};
use slowfast_mmle::models::{read_logistic_csv, GaussianHierarchicalModel, Model};
use slowfast_mmle::Error;
use tempfile::TempDir;

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    let out = dir.path().join("out");
    fs::write(&path, format!("{body}\n[output]\ndir = {}\n", out.display())).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV artifact, skipping the embedded-config preamble.
fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

const MINIMAL: &str = "[model]\nname = gaussian\ny = 1, 3\n[algorithm]\nname = sfla\nbeta = 1e4\nmax_steps = 2000\n";

#[test]
fn minimal_run_writes_trajectory_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = load_config(&write_config(&dir, "a.ini", MINIMAL)).unwrap();
    let art = run_single(&cfg).unwrap();
    assert_eq!(art.paths.len(), 2);
    assert!(art.paths[0].ends_with("mmle_sfla.csv"));
    let summary = json(&art.paths[1]);
    assert!(summary["config"]["model"].is_object());
    let err = summary["summary"]["abs_error"].as_f64().unwrap();
    assert!(err.is_finite() && err >= 0.0);
    let csv = fs::read_to_string(&art.paths[0]).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert_eq!(data_lines(&art.paths[0])[0], "step,grad_evals,elapsed_s,theta_1");
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "a.ini", MINIMAL);
    let cfg = load_config(&path).unwrap();
    let first = fs::read(&run_single(&cfg).unwrap().paths[0]).unwrap();
    let second = fs::read(&run_single(&cfg).unwrap().paths[0]).unwrap();
    assert_eq!(first, second);
    let reseeded = load_config_with(
        &path,
        &Overrides {
            seed: Some(99),
            ..Default::default()
        },
    )
    .unwrap();
    let third = fs::read(&run_single(&reseeded).unwrap().paths[0]).unwrap();
    assert_ne!(first, third);
}

#[test]
fn invalid_parameters_are_rejected_with_lines() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        &dir,
        "bad.ini",
        &MINIMAL.replace("beta = 1e4", "beta = 1e4\nepsilon = 0"),
    );
    let err = load_config(&path).unwrap_err();
    assert_eq!(exit_code(&err), 2);
    let diags = validate_config(&path).unwrap();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].field, "algorithm.epsilon");
    assert_eq!(diags[0].line, Some(7));

    let two_budgets = write_config(&dir, "b.ini", &format!("{MINIMAL}max_grad_evals = 10\n"));
    let diags = validate_config(&two_budgets).unwrap();
    assert!(diags.iter().any(|d| d.message.contains("exactly one budget")));
    assert!(validate_config(&write_config(&dir, "c.ini", MINIMAL))
        .unwrap()
        .is_empty());
}

#[test]
fn json_configs_are_equivalent() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let path = dir.path().join("a.json");
    fs::write(
        &path,
        format!(
            r#"{{"model": {{"name": "gaussian", "y": [1, 3]}},
                "algorithm": {{"name": "sfla", "beta": 1e4, "max_steps": 2000}},
                "output": {{"dir": "{}"}}}}"#,
            out.display()
        ),
    )
    .unwrap();
    let from_json = load_config(&path).unwrap();
    let from_ini = load_config(&write_config(&dir, "a.ini", MINIMAL)).unwrap();
    assert_eq!(from_json, from_ini);
}

#[test]
fn comparison_keeps_every_sample() {
    let dir = TempDir::new().unwrap();
    let body = "[model]\nname = gaussian\nd_x = 4\n[algorithm]\ngamma = 0.01\nn = 10\nmax_grad_evals = 20000\n[compare]\nalgorithms = sfla, soul, pgd, ipla\n";
    let cfg = load_config(&write_config(&dir, "c.ini", body)).unwrap();
    let art = run_comparison(&cfg).unwrap();
    let rows = data_lines(&art.paths[0]);
    let summary = json(&art.paths[1]);
    let entries = summary["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for e in entries {
        assert!(e["total_grad_evals"].as_u64().unwrap() <= 20_000);
        assert!(e["total_grad_evals"].as_u64().unwrap() > 20_000 - 40);
    }
    // Every retained path sample of every algorithm appears once.
    let model = cfg.model.build().unwrap();
    let spec = cfg.algorithm.as_ref().unwrap();
    let suite = ComparisonSuite::new(
        Algorithm::ALL[..4]
            .iter()
            .map(|&a| (a, spec.sde_for(a, model.as_model(), &cfg.output)))
            .collect(),
        Alignment::GradEvals,
    )
    .unwrap();
    let expected: usize = suite
        .run(model.as_model())
        .unwrap()
        .iter()
        .map(|r| r.samples.len())
        .sum();
    assert_eq!(rows.len() - 1, expected);
    assert!(rows[0].starts_with("algorithm,step,grad_evals,elapsed_s,theta_1"));
}

#[test]
fn comparison_suites_need_two_matching_entries() {
    let cfg = SdeConfig::new(0.01, Budget::MaxGradEvals(100), 0, vec![0.0], vec![0.0]);
    assert!(ComparisonSuite::new(vec![(Algorithm::Sfla, cfg.clone())], Alignment::GradEvals).is_err());
    let both = vec![(Algorithm::Sfla, cfg.clone()), (Algorithm::Pgd, cfg.clone())];
    assert!(ComparisonSuite::new(both.clone(), Alignment::WallClock).is_err());
    assert!(ComparisonSuite::new(both, Alignment::GradEvals).is_ok());
    let other = SdeConfig {
        budget: Budget::MaxGradEvals(200),
        ..cfg.clone()
    };
    assert!(ComparisonSuite::new(
        vec![(Algorithm::Sfla, cfg), (Algorithm::Pgd, other)],
        Alignment::GradEvals
    )
    .is_err());
}

#[test]
fn wall_clock_comparison_stays_near_budget() {
    let dir = TempDir::new().unwrap();
    let body = "[model]\nname = gaussian\nd_x = 10\n[algorithm]\nn = 20\nmax_seconds = 0.1\n[compare]\nalgorithms = sfla, pgd\nalignment = wall_clock\n";
    let cfg = load_config(&write_config(&dir, "w.ini", body)).unwrap();
    let art = run_comparison(&cfg).unwrap();
    let summary = json(&art.paths[1]);
    for e in summary["entries"].as_array().unwrap() {
        assert!(e["wall_seconds"].as_f64().unwrap() <= 0.1 + 0.5);
        assert!(e["total_steps"].as_u64().unwrap() > 0);
    }
}

#[test]
fn studies_produce_passing_reports() {
    let dir = TempDir::new().unwrap();
    let probes = "[model]\nname = gaussian\nd_x = 2\n[study]\nname = probes\nsamples = 2000\n";
    let cfg = load_config(&write_config(&dir, "p.ini", probes)).unwrap();
    let art = run_study(&cfg).unwrap();
    assert_eq!(json(&art.paths[0])["all_pass"], true);
    assert_eq!(data_lines(&art.paths[1]).len(), 6);

    let em = "[model]\nname = gaussian\nd_x = 3\n[study]\nname = em_ascent\ntheta0 = -4\n";
    let art = run_study(&load_config(&write_config(&dir, "e.ini", em)).unwrap()).unwrap();
    let trace = json(&art.paths[0]);
    assert_eq!(trace["monotone"], true);
    assert_eq!(trace["within_bound"], true);

    let avg = "[model]\nname = gaussian\nd_x = 2\n[study]\nname = averaging_scaling\nreplicas = 4\nt_end = 50\n";
    let art = run_study(&load_config(&write_config(&dir, "s.ini", avg)).unwrap()).unwrap();
    let slope = json(&art.paths[0])["fit"]["slope"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&slope), "{slope}");
}

#[test]
fn studies_need_a_gaussian_model() {
    let dir = TempDir::new().unwrap();
    let body = "[model]\nname = logistic\nd_x = 2\nd_y = 5\n[study]\nname = concentration\n";
    let diags = validate_config(&write_config(&dir, "l.ini", body)).unwrap();
    assert!(diags.iter().any(|d| d.field.starts_with("study")), "{diags:?}");
}

#[test]
fn dataset_export_round_trips() {
    let dir = TempDir::new().unwrap();
    let body = "[model]\nname = logistic\nd_x = 3\nd_y = 25\nsigma = 1.5\ndata_seed = 4\n[algorithm]\nname = sfla\nmax_steps = 10\n";
    let cfg = load_config(&write_config(&dir, "l.ini", body)).unwrap();
    let art = export_dataset(&cfg, None).unwrap();
    assert!(art.paths[0].ends_with("mmle_dataset.csv"));
    let original = cfg.model.build().unwrap();
    let loaded = read_logistic_csv(fs::File::open(&art.paths[0]).unwrap(), 1.5).unwrap();
    // The same file also loads through the config.
    let by_path = body.replace("data_seed = 4", &format!("path = {}", art.paths[0].display()));
    let via_config = load_config(&write_config(&dir, "p.ini", &by_path))
        .unwrap()
        .model
        .build()
        .unwrap();
    for k in 0..10 {
        let t = [k as f64 * 0.7 - 3.0];
        let x = [k as f64 * 0.3 - 1.0, 0.5 - k as f64 * 0.2, 1.0];
        let u = original.as_model().potential(&t, &x).unwrap();
        assert_eq!(u, loaded.potential(&t, &x).unwrap());
        assert_eq!(u, via_config.as_model().potential(&t, &x).unwrap());
    }

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "label,w_1\n1,0.5\n").unwrap();
    assert!(matches!(
        read_logistic_csv(fs::File::open(&broken).unwrap(), 1.0),
        Err(Error::Format(_))
    ));

    let gaussian = load_config(&write_config(&dir, "g.ini", MINIMAL)).unwrap();
    assert!(export_dataset(&gaussian, None).is_err());
}

#[test]
fn errors_map_to_exit_codes() {
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
    assert_eq!(
        exit_code(&Error::Divergence {
            algorithm: "sfla".into(),
            step: 3
        }),
        3
    );
    assert_eq!(exit_code(&Error::UnsupportedOracle("logistic".into())), 4);
    let m = GaussianHierarchicalModel::new(vec![1.0], 1.0, 1.0).unwrap();
    let err = m.potential(&[0.0, 1.0], &[0.0]).unwrap_err();
    assert_eq!(exit_code(&err), 2);
}

fn mmle(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mmle")).args(args).output().unwrap()
}

#[test]
fn command_line_subcommands() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "a.ini", MINIMAL);
    let p = path.to_str().unwrap();

    let out = mmle(&["run", p, "--steps", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().count(), 2);

    assert!(mmle(&["validate", p]).status.success());
    let bad = write_config(&dir, "bad.ini", &MINIMAL.replace("beta = 1e4", "beta = -1"));
    let out = mmle(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6: algorithm.beta"));

    let out = mmle(&["run", p, "--epsilon", "0.001", "--delta", "0.5", "--steps", "100000"]);
    assert_eq!(out.status.code(), Some(3));

    let compare = mmle(&["compare", p, "--grad-evals", "4000", "--n", "10"]);
    assert_eq!(compare.status.code(), Some(2), "no [compare] section");

    let other = dir.path().join("elsewhere");
    let out = mmle(&["run", p, "--out", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(other.join("mmle_sfla.csv").exists());

    let logistic = write_config(
        &dir,
        "l.ini",
        "[model]\nname = logistic\nd_x = 2\nd_y = 5\n[algorithm]\nname = pgd\nmax_steps = 10\n",
    );
    let file = dir.path().join("data.csv");
    let out = mmle(&[
        "export-data",
        logistic.to_str().unwrap(),
        "--file",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&file).unwrap().lines().count(), 6);

    let study = write_config(
        &dir,
        "s.ini",
        "[model]\nname = gaussian\nd_x = 2\n[study]\nname = em_ascent\n",
    );
    assert!(mmle(&["study", study.to_str().unwrap()]).status.success());
}
