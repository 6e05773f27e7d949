use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::{blend, l2_error, Basis};
use eit_sbp::measurement::MeasurementSet;
use eit_sbp::models::builtin_model;
use eit_sbp::objective::Evaluator;
use eit_sbp::pipeline::{self, Workspace};
use eit_sbp::sampling::{collection_text, generate_collection};

#[derive(Parser)]
#[command(name = "eit-sbp", version, about = "Sample-based EIT reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; the built-in reference setup if omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set cd.max_evaluations=2000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set output_dir=...`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Shorthand for `--set workers=...`.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> eit_sbp::Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(o) = &self.output {
            overrides.push(format!("output_dir={:?}", o.display().to_string()));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        ExperimentConfig::load_with_overrides(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the disc mesh and write it to `<output_dir>/mesh.txt`.
    Mesh(Common),
    /// Draw the sample collection and write `<output_dir>/collection.txt`.
    GenCollection(Common),
    /// Simulate every sample and save the store.
    Precompute(Common),
    /// Run the full pipeline for the configured model.
    Reconstruct(Common),
    /// Misfit and L2 error of a saved basis against the configured model.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        basis: PathBuf,
        /// Observed currents file; synthesized from the model if omitted.
        #[arg(long)]
        observed: Option<PathBuf>,
    },
    /// Write grids, PGM and histogram for a saved basis.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, default_value = "export")]
        stem: String,
    },
}

fn run(cli: Cli) -> eit_sbp::Result<()> {
    match cli.command {
        Command::Mesh(common) => {
            let cfg = common.load()?;
            let ws = Workspace::new(&cfg)?;
            let path = cfg.output_dir.join("mesh.txt");
            ws.mesh.save(&path)?;
            println!(
                "{} elements, {} vertices, coverage {:.4}, hash {} -> {}",
                ws.mesh.element_count(),
                ws.mesh.vertices().len(),
                ws.mesh.electrode_coverage(),
                ws.mesh.content_hash(),
                path.display()
            );
        }
        Command::GenCollection(common) => {
            let cfg = common.load()?;
            let samples = generate_collection(
                &cfg.collection,
                &cfg.domain,
                cfg.conductivity.sigma_c,
                cfg.conductivity.sigma_h,
            )?;
            let path = cfg.output_dir.join("collection.txt");
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| eit_sbp::Error::Io {
                path: cfg.output_dir.clone(),
                source: e,
            })?;
            std::fs::write(&path, collection_text(&samples)).map_err(|e| eit_sbp::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            println!("{} samples -> {}", samples.len(), path.display());
        }
        Command::Precompute(common) => {
            let cfg = common.load()?;
            let ws = Workspace::new(&cfg)?;
            let dir = cfg.store_dir();
            let store = pipeline::load_or_build_store(&cfg, &ws, &dir)?;
            let failed = store.records.iter().filter(|r| r.currents().is_none()).count();
            println!("{} records ({failed} failed) in {}", store.len(), dir.display());
        }
        Command::Reconstruct(common) => {
            let cfg = common.load()?;
            let summary = pipeline::run_pipeline(&cfg)?;
            let h = &summary.reconstruction.history;
            println!(
                "{}: J {:.3e} -> {:.3e} in {} evaluations ({}), artifacts in {}",
                cfg.model,
                h.initial_cost(),
                h.final_cost(),
                h.evaluations,
                h.termination.as_str(),
                summary.run_dir.display()
            );
        }
        Command::Evaluate { common, basis, observed } => {
            let cfg = common.load()?;
            let ws = Workspace::new(&cfg)?;
            let model = builtin_model(cfg.model, cfg.domain.radius);
            let observed = match observed {
                Some(p) => MeasurementSet::load(&p)?.0,
                None => pipeline::synthesize_observed(&cfg, &model, &ws)?,
            };
            let basis = Basis::load(&basis)?;
            let field = blend(&basis, &ws.mesh)?;
            let evaluator = Evaluator::new(ws.solver.clone(), ws.patterns.clone(), observed)?;
            let j = evaluator.evaluate_field(&field)?;
            let l2 = l2_error(&field, &model.truth_field(&ws.mesh), &ws.mesh)?;
            println!("# J l2_error\n{j} {l2}");
        }
        Command::Export { common, basis, stem } => {
            let cfg = common.load()?;
            let ws = Workspace::new(&cfg)?;
            let field = blend(&Basis::load(&basis)?, &ws.mesh)?;
            pipeline::export_field(&cfg, &ws.mesh, &field, &cfg.output_dir, &stem)?;
            println!("exported {stem}_* to {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
