//! Draws a sample collection, simulates it in parallel and saves the store.
//!
//! `cargo run --release --example generate_collection [-- <n> <dir>]`

use std::path::PathBuf;
use std::time::Instant;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::{classify_circle, CircleClass};
use eit_sbp::pipeline::{build_store, Workspace};

fn main() -> eit_sbp::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::desk();
    if let Some(n) = args.next() {
        cfg.collection.n = n.parse().expect("sample count");
    }
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "runs/collection".into()));
    cfg.workers = std::thread::available_parallelism().map_or(1, |n| n.get());

    let ws = Workspace::new(&cfg)?;
    let t = Instant::now();
    let store = build_store(&cfg, &ws)?;
    println!("{} samples on {} workers in {:.1?}", store.len(), cfg.workers, t.elapsed());

    let mut counts = vec![0usize; cfg.collection.n_c_max + 1];
    let mut straddling = 0;
    for rec in &store.records {
        counts[rec.circles.len()] += 1;
        straddling += rec
            .circles
            .iter()
            .filter(|c| classify_circle(c, cfg.domain.radius) == CircleClass::PartiallyOutside)
            .count();
    }
    for (n, c) in counts.iter().enumerate().skip(1) {
        println!("  {n} circles: {c}");
    }
    println!("  circles crossing the boundary: {straddling}");
    store.save(&dir)?;
    println!("saved to {}", dir.display());
    Ok(())
}
