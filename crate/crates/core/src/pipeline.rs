//! End-to-end runs: mesh, data synthesis, collection store, both
//! reconstruction steps and artifact export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::conductivity::{blend, threshold, Basis, ConductivityField};
use crate::error::{Error, Result};
use crate::excitation::{base_pattern, rotation_scheme, PatternSet};
use crate::export::{export_histogram, grid_pgm, grid_text};
use crate::forward::{ForwardSolver, ImpedanceSet};
use crate::measurement::{MeasurementHeader, MeasurementSet};
use crate::mesh::{build_disc_mesh, Mesh};
use crate::models::{builtin_model, ModelSpec};
use crate::objective::{add_noise, Evaluator};
use crate::optimizer::{coordinate_descent, pad_basis, rank_and_select, ranking_prefix_trace, RunHistory};
use crate::sampling::{generate_collection, precompute, PrecomputeStore};

/// Mesh, patterns and solver shared by every stage.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub mesh: Arc<Mesh>,
    pub patterns: PatternSet,
    pub solver: ForwardSolver,
}

impl Workspace {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mesh = Arc::new(build_disc_mesh(&cfg.domain, cfg.mesh.target_elements)?);
        Self::with_mesh(cfg, mesh)
    }

    pub fn with_mesh(cfg: &ExperimentConfig, mesh: Arc<Mesh>) -> Result<Self> {
        let patterns = build_patterns(cfg)?;
        let solver = ForwardSolver::new(mesh.clone(), ImpedanceSet::new(cfg.impedance_values())?, cfg.mesh.degree)?;
        Ok(Self { mesh, patterns, solver })
    }

    pub fn measurement_header(&self, noise: Option<String>) -> MeasurementHeader {
        MeasurementHeader {
            mesh_hash: self.mesh.content_hash(),
            pattern_hash: self.patterns.content_hash(),
            impedance: self.solver.impedance().values().to_vec(),
            noise,
        }
    }
}

pub fn build_patterns(cfg: &ExperimentConfig) -> Result<PatternSet> {
    let base = base_pattern(cfg.domain.electrode_count, &cfg.patterns.kind, cfg.patterns.amplitude)?;
    Ok(rotation_scheme(&base))
}

/// Noise-free currents of the model truth, simulated on a mesh refined by
/// `truth_mesh_scale`.
pub fn synthesize_clean(cfg: &ExperimentConfig, model: &ModelSpec, ws: &Workspace) -> Result<MeasurementSet> {
    if cfg.mesh.truth_mesh_scale == 1.0 {
        return ws.solver.simulate(&model.truth_field(&ws.mesh), &ws.patterns);
    }
    let target = (cfg.mesh.target_elements as f64 * cfg.mesh.truth_mesh_scale).round() as usize;
    let fine = Workspace::with_mesh(cfg, Arc::new(build_disc_mesh(&cfg.domain, target)?))?;
    fine.solver.simulate(&model.truth_field(&fine.mesh), &fine.patterns)
}

pub fn synthesize_observed(cfg: &ExperimentConfig, model: &ModelSpec, ws: &Workspace) -> Result<MeasurementSet> {
    add_noise(&synthesize_clean(cfg, model, ws)?, &cfg.noise)
}

pub fn build_store(cfg: &ExperimentConfig, ws: &Workspace) -> Result<PrecomputeStore> {
    let collection = generate_collection(
        &cfg.collection,
        &cfg.domain,
        cfg.conductivity.sigma_c,
        cfg.conductivity.sigma_h,
    )?;
    precompute(&collection, &cfg.collection, &ws.solver, &ws.patterns, cfg.workers)
}

/// Loads the store under `dir` if present and compatible, otherwise builds
/// and saves it. An incompatible existing store is an error.
pub fn load_or_build_store(cfg: &ExperimentConfig, ws: &Workspace, dir: &Path) -> Result<PrecomputeStore> {
    if PrecomputeStore::exists(dir) {
        let store = PrecomputeStore::load(dir)?;
        store.check_compatible(
            &ws.mesh.content_hash(),
            &ws.patterns.content_hash(),
            ws.solver.impedance().values(),
        )?;
        let h = &store.header;
        if h.collection != cfg.collection || (h.sigma_c, h.sigma_h) != (cfg.conductivity.sigma_c, cfg.conductivity.sigma_h) {
            return Err(Error::StoreMismatch(format!(
                "store at {} was built from a different collection",
                dir.display()
            )));
        }
        return Ok(store);
    }
    let store = build_store(cfg, ws)?;
    store.save(dir)?;
    Ok(store)
}

/// Result of Step 1 plus Step 2.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub initial_basis: Basis,
    pub final_basis: Basis,
    pub history: RunHistory,
    /// Best-so-far `J` over the collection in stored order.
    pub step1_trace: Vec<(usize, f64)>,
    pub final_field: ConductivityField,
}

pub fn reconstruct(
    cfg: &ExperimentConfig,
    ws: &Workspace,
    store: &PrecomputeStore,
    observed: &MeasurementSet,
    truth: Option<&ConductivityField>,
) -> Result<Reconstruction> {
    let selection = rank_and_select(store, observed, cfg.basis.n_s)?;
    let step1_trace = ranking_prefix_trace(&selection);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.basis.pad_seed);
    let initial_basis = pad_basis(&selection.basis, cfg.basis.n_c_max, &cfg.domain, &mut rng)?;
    let evaluator = Evaluator::new(ws.solver.clone(), ws.patterns.clone(), observed.clone())?;
    let (final_basis, history) = coordinate_descent(&initial_basis, &evaluator, &cfg.domain, &cfg.cd, truth)?;
    let final_field = blend(&final_basis, &ws.mesh)?;
    Ok(Reconstruction {
        initial_basis,
        final_basis,
        history,
        step1_trace,
        final_field,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub reconstruction: Reconstruction,
}

pub fn step1_trace_text(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("# sample best_J\n");
    for (i, j) in trace {
        let _ = writeln!(s, "{i} {j}");
    }
    s
}

/// Writes the field table, raw and thresholded grids, a PGM image and the
/// histogram of `field` under `dir` with file names prefixed by `stem`.
pub fn export_field(
    cfg: &ExperimentConfig,
    mesh: &Mesh,
    field: &ConductivityField,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    let (lo, hi) = (cfg.conductivity.sigma_h, cfg.conductivity.sigma_c);
    let level = 0.5 * (lo + hi);
    let r = mesh.domain().radius;
    let write = |name: &str, text: &str| crate::textio::write_file(&dir.join(format!("{stem}_{name}")), text);
    write("elements.txt", &field.to_table())?;
    write("grid.txt", &grid_text(&field.to_grid(mesh, cfg.export.grid_resolution), r))?;
    let binary = threshold(field, level, lo, hi);
    let grid = binary.to_grid(mesh, cfg.export.grid_resolution);
    write("threshold_grid.txt", &grid_text(&grid, r))?;
    write("threshold.pgm", &grid_pgm(&grid, level))?;
    let hist = export_histogram(field, mesh, cfg.export.histogram_bins, lo, hi)?;
    write("histogram.txt", &hist.to_text())
}

fn metadata_text(cfg: &ExperimentConfig, model: &ModelSpec, ws: &Workspace, rec: Option<&Reconstruction>) -> String {
    let mut s = String::from("# eit-sbp run metadata\n");
    let _ = writeln!(s, "version {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "model {}", model.name);
    let _ = writeln!(s, "truth {}", model.describe());
    let _ = writeln!(s, "elements {}", ws.mesh.element_count());
    let _ = writeln!(s, "mesh_hash {}", ws.mesh.content_hash());
    let _ = writeln!(s, "pattern_hash {}", ws.patterns.content_hash());
    let _ = writeln!(s, "noise {}", cfg.noise.describe());
    let _ = writeln!(s, "collection_seed {}", cfg.collection.seed);
    let _ = writeln!(s, "pad_seed {}", cfg.basis.pad_seed);
    let _ = writeln!(s, "noise_seed {}", cfg.noise.seed);
    if let Some(r) = rec {
        let h = &r.history;
        let _ = writeln!(s, "termination {}", h.termination.as_str());
        let _ = writeln!(s, "evaluations {}", h.evaluations);
        let _ = writeln!(s, "major_iterations {}", h.iterations.len() - 1);
        let _ = writeln!(s, "initial_cost {}", h.initial_cost());
        let _ = writeln!(s, "final_cost {}", h.final_cost());
        if let (Some(a), Some(b)) = (
            h.iterations.first().and_then(|i| i.l2_error),
            h.iterations.last().and_then(|i| i.l2_error),
        ) {
            let _ = writeln!(s, "initial_l2_error {a}");
            let _ = writeln!(s, "final_l2_error {b}");
        }
        let elapsed = h.iterations.last().map_or(0.0, |i| i.elapsed_seconds);
        let _ = writeln!(s, "descent_seconds {elapsed:.3}");
    }
    s
}

/// Runs every stage for `cfg.model` and writes the artifacts to
/// `cfg.output_dir`. If a stage fails, `FAILED.txt` names it and the
/// artifacts written so far stay in place.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let dir = cfg.output_dir.clone();
    let mut stage = "config";
    let result = run_stages(cfg, &dir, &mut stage);
    if let Err(e) = &result {
        let manifest = format!("# eit-sbp failure manifest\nstage {stage}\nerror {}\n", e.to_string().replace('\n', " "));
        let _ = crate::textio::write_file(&dir.join("FAILED.txt"), &manifest);
    }
    result
}

fn run_stages(cfg: &ExperimentConfig, dir: &Path, stage: &mut &'static str) -> Result<RunSummary> {
    use crate::textio::write_file;
    cfg.validate()?;
    let failed = dir.join("FAILED.txt");
    if failed.exists() {
        std::fs::remove_file(&failed).map_err(|e| Error::io(&failed, e))?;
    }
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    let model = builtin_model(cfg.model, cfg.domain.radius);

    *stage = "mesh";
    let ws = Workspace::new(cfg)?;
    ws.mesh.save(&dir.join("mesh.txt"))?;
    write_file(&dir.join("patterns.txt"), &ws.patterns.to_text())?;
    write_file(&dir.join("metadata.txt"), &metadata_text(cfg, &model, &ws, None))?;

    *stage = "synthesize";
    let truth = model.truth_field(&ws.mesh);
    let observed = synthesize_observed(cfg, &model, &ws)?;
    observed.save(&dir.join("observed.txt"), &ws.measurement_header(Some(cfg.noise.describe())))?;
    export_field(cfg, &ws.mesh, &truth, dir, "truth")?;

    *stage = "precompute";
    let store = load_or_build_store(cfg, &ws, &cfg.store_dir())?;

    *stage = "reconstruct";
    let rec = reconstruct(cfg, &ws, &store, &observed, Some(&truth))?;

    *stage = "export";
    write_file(&dir.join("step1_trace.txt"), &step1_trace_text(&rec.step1_trace))?;
    write_file(&dir.join("trace.txt"), &rec.history.trace_text())?;
    write_file(&dir.join("moves.txt"), &rec.history.moves_text())?;
    rec.initial_basis.save(&dir.join("initial_basis.txt"))?;
    rec.final_basis.save(&dir.join("final_basis.txt"))?;
    export_field(cfg, &ws.mesh, &blend(&rec.initial_basis, &ws.mesh)?, dir, "initial")?;
    export_field(cfg, &ws.mesh, &rec.final_field, dir, "final")?;
    write_file(&dir.join("metadata.txt"), &metadata_text(cfg, &model, &ws, Some(&rec)))?;
    Ok(RunSummary {
        run_dir: dir.to_path_buf(),
        reconstruction: rec,
    })
}
