//! Reconstruction error against measurement noise for model #1, sharing
//! one precomputed store.
//!
//! `cargo run --release --example noise_study`

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::{blend, l2_error};
use eit_sbp::models::{builtin_model, ModelName};
use eit_sbp::pipeline::{build_store, reconstruct, synthesize_observed, Workspace};

fn main() -> eit_sbp::Result<()> {
    let base = ExperimentConfig::desk();
    let ws = Workspace::new(&base)?;
    let model = builtin_model(ModelName::Model1, base.domain.radius);
    let truth = model.truth_field(&ws.mesh);
    let store = build_store(&base, &ws)?;

    println!("# noise_percent initial_l2 final_l2 final_J evaluations termination");
    for level in [0.0, 0.005, 0.01, 0.02, 0.05] {
        let mut cfg = base.clone();
        cfg.noise.level = level;
        let observed = synthesize_observed(&cfg, &model, &ws)?;
        let rec = reconstruct(&cfg, &ws, &store, &observed, Some(&truth))?;
        let initial = l2_error(&blend(&rec.initial_basis, &ws.mesh)?, &truth, &ws.mesh)?;
        let h = &rec.history;
        println!(
            "{} {initial:.4e} {:.4e} {:.4e} {} {}",
            100.0 * level,
            l2_error(&rec.final_field, &truth, &ws.mesh)?,
            h.final_cost(),
            h.evaluations,
            h.termination.as_str()
        );
    }
    Ok(())
}
