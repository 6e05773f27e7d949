//! Full pipeline for the C-shaped model #3 with more circles per sample,
//! writing grids, PGM images, histograms and traces.
//!
//! `cargo run --release --example export_images [-- <output_dir>]`

use std::path::PathBuf;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::models::ModelName;
use eit_sbp::pipeline::run_pipeline;

fn main() -> eit_sbp::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.model = ModelName::Model3;
    cfg.basis.n_c_max = 20;
    cfg.noise.level = 0.005;
    cfg.export.grid_resolution = 120;
    cfg.output_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/model3".into()));
    cfg.validate()?;

    let summary = run_pipeline(&cfg)?;
    let h = &summary.reconstruction.history;
    println!(
        "J {:.3e} -> {:.3e} after {} evaluations ({})",
        h.initial_cost(),
        h.final_cost(),
        h.evaluations,
        h.termination.as_str()
    );
    for name in ["truth", "initial", "final"] {
        println!("{}", summary.run_dir.join(format!("{name}_threshold.pgm")).display());
    }
    Ok(())
}
