use std::path::Path;
use std::process::Command;

use dqubit_cli::{run, CliError, Experiment, RunConfig};
use dqubit_core::scatter::DetectionMatrix;

fn canonical(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    RunConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small(experiment: Experiment, trials: i64) -> RunConfig {
    RunConfig { experiment: Some(experiment), trials, ..RunConfig::default() }
}

fn dqubit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqubit")).args(args).output().unwrap()
}

#[test]
fn canonical_configs_cover_every_experiment() {
    for e in Experiment::ALL {
        let c = canonical(e.name());
        assert_eq!(c.experiment, Some(e));
        c.validate().unwrap();
    }
}

#[test]
fn config_round_trips() {
    let mut configs: Vec<RunConfig> = Experiment::ALL.iter().map(|e| canonical(e.name())).collect();
    let mut c = RunConfig::default();
    c.rabi.tau = f64::INFINITY;
    c.rabi.phase = 0.1 + 0.2;
    c.ramsey.readout = dqubit_core::ramsey::Readout::Fringe { detuning_hz: 2.5e4 };
    configs.push(c);
    for c in configs {
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = small(Experiment::Stirap, 10);
    let mut b = a.clone();
    b.output.dir = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn detmatrix_d_emits_matrix_with_errors() {
    let out = run(&small(Experiment::DetmatrixD, 300)).unwrap();
    let doc = &out.artifacts.iter().find(|a| a.name == "detmatrix_d.toml").unwrap().contents;
    let m = DetectionMatrix::from_document(doc).unwrap();
    assert_eq!((m.nrows(), m.ncols()), (5, 4));
    assert_eq!(m.trials, 300);
    assert!(m.stderr.iter().flatten().any(|&e| e > 0.0));
}

#[test]
fn same_config_and_seed_is_byte_identical() {
    for e in [Experiment::DetmatrixS, Experiment::Tomo, Experiment::Rabi, Experiment::Ramsey] {
        let c = small(e, 400);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.artifacts, b.artifacts, "{e}");
        let mut other = c.clone();
        other.seed += 1;
        assert_ne!(run(&other).unwrap().artifacts, a.artifacts, "{e}");
    }
}

#[test]
fn every_artifact_embeds_hash_and_seed() {
    for e in Experiment::ALL {
        let trials = if e == Experiment::Benchmark { 200 } else { 100 };
        let c = small(e, trials);
        let out = run(&c).unwrap();
        assert!(out.artifacts.len() >= 2, "{e}");
        for a in &out.artifacts {
            assert!(a.contents.contains(&c.hash()), "{e}: {}", a.name);
            assert!(a.contents.contains(&format!("seed = {}", c.seed)), "{e}: {}", a.name);
        }
    }
}

#[test]
fn negative_trials_is_a_validation_error() {
    match run(&small(Experiment::DetmatrixD, -5)) {
        Err(CliError::Validation { key, .. }) => assert_eq!(key, "trials"),
        other => panic!("{other:?}"),
    }
    let out = dqubit(&["detmatrix-d", "--trials", "-5", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`trials`"));
}

#[test]
fn bad_config_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "trails = 5\n").unwrap();
    let out = dqubit(&["stirap", "--config", unknown.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let mismatch = dir.path().join("mismatch.toml");
    std::fs::write(&mismatch, "experiment = \"tomo\"\n").unwrap();
    let out = dqubit(&["stirap", "--config", mismatch.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[rabi]\npoints = 3\n").unwrap();
    let out = dqubit(&["rabi", "--config", bad.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rabi.points"));
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cap.toml");
    std::fs::write(&cfg, "trials = 50\n[detection.sim]\nstep_cap = 1\n").unwrap();
    let out = dqubit(&["detmatrix-d", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn binary_writes_outputs_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = dqubit(&["tomo", "--seed", "7", "--trials", "200", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = std::fs::read_to_string(out_dir.join("config.toml")).unwrap();
    let resolved = RunConfig::from_toml(&echoed).unwrap();
    assert_eq!(resolved.seed, 7);
    assert_eq!(resolved.trials, 200);
    assert_eq!(resolved.experiment, Some(Experiment::Tomo));
    for name in ["counts.toml", "estimate_direct.toml", "estimate_constrained.toml", "matrix.toml"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}
