//! Step 1 only: ranks a collection against model #2 data and pads the best
//! samples into an initial basis.
//!
//! `cargo run --release --example rank_basis`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::{blend, l2_error};
use eit_sbp::models::{builtin_model, ModelName};
use eit_sbp::optimizer::{control_dimension, pad_basis, rank_and_select};
use eit_sbp::pipeline::{build_store, synthesize_observed, Workspace};

fn main() -> eit_sbp::Result<()> {
    let cfg = ExperimentConfig::desk();
    let ws = Workspace::new(&cfg)?;
    let model = builtin_model(ModelName::Model2, cfg.domain.radius);
    let observed = synthesize_observed(&cfg, &model, &ws)?;
    let store = build_store(&cfg, &ws)?;

    let selection = rank_and_select(&store, &observed, cfg.basis.n_s)?;
    println!("best {} of {} samples:", cfg.basis.n_s, store.len());
    for r in &selection.ranking[..cfg.basis.n_s] {
        println!("  sample {:4}  J {:.4e}  circles {}", r.index, r.cost, store.records[r.index].circles.len());
    }
    let worst = selection.ranking.last().expect("non-empty");
    println!("worst: sample {} J {:.4e}", worst.index, worst.cost);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.basis.pad_seed);
    let padded = pad_basis(&selection.basis, cfg.basis.n_c_max, &cfg.domain, &mut rng)?;
    let truth = model.truth_field(&ws.mesh);
    println!(
        "initial basis: {} controls, L2 error {:.4e}",
        control_dimension(padded.len(), cfg.basis.n_c_max, 2),
        l2_error(&blend(&padded, &ws.mesh)?, &truth, &ws.mesh)?
    );
    print!("{}", padded.to_text());
    Ok(())
}
