//! Desk-scale reconstruction of the three-inclusion model, in memory.
//!
//! `cargo run --release --example reconstruct_model1 [-- key=value ...]`

use std::path::Path;
use std::time::Instant;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::blend;
use eit_sbp::models::builtin_model;
use eit_sbp::pipeline::{build_store, reconstruct, synthesize_observed, Workspace};

fn main() -> eit_sbp::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let desk = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    let cfg = ExperimentConfig::load_with_overrides(Some(&desk), &overrides)?;
    let ws = Workspace::new(&cfg)?;
    let model = builtin_model(cfg.model, cfg.domain.radius);
    let truth = model.truth_field(&ws.mesh);
    let observed = synthesize_observed(&cfg, &model, &ws)?;

    let t = Instant::now();
    let store = build_store(&cfg, &ws)?;
    println!("{} elements, store of {} in {:.1?}", ws.mesh.element_count(), store.len(), t.elapsed());

    let t = Instant::now();
    let rec = reconstruct(&cfg, &ws, &store, &observed, Some(&truth))?;
    let h = &rec.history;
    for it in &h.iterations {
        println!(
            "iter {:3} evals {:6} J {:.4e} L2 {:.4e}",
            it.iteration,
            it.evaluations,
            it.cost,
            it.l2_error.unwrap_or(f64::NAN)
        );
    }
    let initial = blend(&rec.initial_basis, &ws.mesh)?;
    let l2 = |f| eit_sbp::conductivity::l2_error(f, &truth, &ws.mesh);
    println!(
        "{} after {} evaluations ({} cached) in {:.1?}: L2 {:.4e} -> {:.4e}",
        h.termination.as_str(),
        h.evaluations,
        h.cached_evaluations,
        t.elapsed(),
        l2(&initial)?,
        l2(&rec.final_field)?
    );
    Ok(())
}
