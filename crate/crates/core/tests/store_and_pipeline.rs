use std::path::{Path, PathBuf};
use std::process::Command;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::models::ModelName;
use eit_sbp::pipeline::{build_store, load_or_build_store, run_pipeline, Workspace};
use eit_sbp::sampling::{generate_collection, precompute, PrecomputeStore, RecordData};
use eit_sbp::Error;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk();
    c.output_dir = dir.to_path_buf();
    c.mesh.target_elements = 400;
    c.collection.n = 40;
    c.basis.n_s = 4;
    c.cd.max_evaluations = 300;
    c.export.grid_resolution = 24;
    c.workers = 2;
    c
}

#[test]
fn store_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let ws = Workspace::new(&cfg).unwrap();
    let mut store = build_store(&cfg, &ws).unwrap();
    store.records[3].data = RecordData::Failed("solver diverged".into());
    store.save(tmp.path()).unwrap();
    let back = PrecomputeStore::load(tmp.path()).unwrap();
    assert_eq!(back, store);
}

#[test]
fn parallel_precompute_equals_serial() {
    let cfg = small_config(Path::new("unused"));
    let ws = Workspace::new(&cfg).unwrap();
    let collection = generate_collection(&cfg.collection, &cfg.domain, 0.4, 0.2).unwrap();
    let serial = precompute(&collection, &cfg.collection, &ws.solver, &ws.patterns, 1).unwrap();
    let parallel = precompute(&collection, &cfg.collection, &ws.solver, &ws.patterns, 3).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn incompatible_store_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let ws = Workspace::new(&cfg).unwrap();
    load_or_build_store(&cfg, &ws, tmp.path()).unwrap();
    let mut other = cfg.clone();
    other.impedance = vec![0.2];
    let ws2 = Workspace::new(&other).unwrap();
    assert!(matches!(load_or_build_store(&other, &ws2, tmp.path()), Err(Error::StoreMismatch(_))));
    let mut reseeded = cfg.clone();
    reseeded.collection.seed += 1;
    assert!(matches!(load_or_build_store(&reseeded, &ws, tmp.path()), Err(Error::StoreMismatch(_))));
}

const ARTIFACTS: [&str; 14] = [
    "config.toml",
    "metadata.txt",
    "mesh.txt",
    "patterns.txt",
    "observed.txt",
    "step1_trace.txt",
    "trace.txt",
    "moves.txt",
    "initial_basis.txt",
    "final_basis.txt",
    "final_elements.txt",
    "final_threshold_grid.txt",
    "final_threshold.pgm",
    "final_histogram.txt",
];

#[test]
fn pipeline_writes_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = small_config(&tmp.path().join(name));
        let summary = run_pipeline(&cfg).unwrap();
        assert!(summary.reconstruction.history.evaluations <= 300);
        summary.run_dir
    };
    let a = run("a");
    let b = run("b");
    for f in ARTIFACTS {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert!(!a.join("FAILED.txt").exists());
    for f in ["trace.txt", "moves.txt", "final_basis.txt", "final_elements.txt", "step1_trace.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let meta = std::fs::read_to_string(a.join("metadata.txt")).unwrap();
    for key in ["collection_seed", "pad_seed", "noise_seed", "version", "termination"] {
        assert!(meta.lines().any(|l| l.starts_with(key)), "{key}");
    }
    let echo = ExperimentConfig::load(&a.join("config.toml")).unwrap();
    assert_eq!(echo.model, ModelName::Model1);
}

#[test]
fn failing_stage_leaves_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    // A store directory that is a regular file cannot be created.
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    cfg.store_dir = Some(blocker.join("store"));
    assert!(run_pipeline(&cfg).is_err());
    let manifest = std::fs::read_to_string(tmp.path().join("FAILED.txt")).unwrap();
    assert!(manifest.contains("stage precompute"), "{manifest}");
    assert!(tmp.path().join("observed.txt").is_file());
}

fn cli(args: &[&str], cwd: &Path) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eit-sbp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap();
    (
        out.status.success(),
        format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)),
    )
}

#[test]
fn cli_subcommands_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let desk: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    let desk = desk.to_str().unwrap();
    let common = [
        "--config",
        desk,
        "--output",
        "run",
        "--set",
        "mesh.target_elements=400",
        "--set",
        "collection.n=30",
        "--set",
        "basis.n_s=3",
        "--set",
        "cd.max_evaluations=100",
        "--set",
        "export.grid_resolution=16",
    ];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend_from_slice(&common);
        v.extend_from_slice(extra);
        let (ok, text) = cli(&v, tmp.path());
        assert!(ok, "{cmd}: {text}");
        text
    };
    assert!(with("mesh", &[]).contains("elements"));
    assert!(with("gen-collection", &[]).contains("30 samples"));
    assert!(with("precompute", &["--workers", "2"]).contains("30 records"));
    assert!(with("reconstruct", &[]).contains("model1"));
    let basis = tmp.path().join("run/final_basis.txt");
    let basis = basis.to_str().unwrap();
    let eval = with("evaluate", &["--basis", basis]);
    let row: Vec<f64> = eval.lines().nth(1).unwrap().split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert_eq!(row.len(), 2);
    with("export", &["--basis", basis, "--stem", "again"]);
    assert!(tmp.path().join("run/again_threshold.pgm").is_file());

    let (ok, text) = cli(&["reconstruct", "--set", "model=model9"], tmp.path());
    assert!(!ok);
    assert!(text.contains("error"), "{text}");
}
