//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; the process fails if any criterion
//! fails.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eit_sbp::config::ExperimentConfig;
use eit_sbp::conductivity::{blend, l2_error, rasterize, Basis, Circle, CircleSample, ConductivityField};
use eit_sbp::excitation::{base_pattern, rotation_scheme, PatternKind};
use eit_sbp::forward::{ElementDegree, ForwardSolver, ImpedanceSet};
use eit_sbp::mesh::{build_disc_mesh, DomainSpec, Mesh};
use eit_sbp::models::{builtin_model, ModelName, ModelSpec, Truth};
use eit_sbp::objective::{cost, Evaluator};
use eit_sbp::optimizer::{control_dimension, pad_basis, Termination};
use eit_sbp::pipeline::{build_store, reconstruct, synthesize_observed, Reconstruction, Workspace};
use eit_sbp::sampling::{generate_collection, CollectionSpec};
use eit_sbp::Result;

type Outcome = Result<(bool, String)>;

fn desk_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    ExperimentConfig::load(&path).expect("committed desk config")
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn random_binary(mesh: &Mesh, seed: u64) -> ConductivityField {
    let spec = CollectionSpec::with_defaults(1, 8, mesh.domain().radius, seed);
    let s = generate_collection(&spec, mesh.domain(), 0.4, 0.2).unwrap();
    rasterize(&s[0], mesh)
}

fn electrode_coverage() -> Outcome {
    let mesh = build_disc_mesh(&DomainSpec::default(), 7730)?;
    let analytic = DomainSpec::default().coverage_fraction();
    let measured = mesh.electrode_coverage();
    let ok = (measured - 0.611).abs() <= 0.005 && (analytic - 0.611).abs() <= 0.005;
    Ok((ok, format!("mesh {measured:.4}, arc {analytic:.4}, target 0.611 ± 0.005")))
}

fn control_count() -> Outcome {
    let cfg = desk_config();
    let n = control_dimension(cfg.basis.n_s, cfg.basis.n_c_max, 2);
    Ok((n == 250, format!("N_s={} N_c,max={} n=2 gives {n}", cfg.basis.n_s, cfg.basis.n_c_max)))
}

fn conservation() -> Outcome {
    let mesh = Arc::new(build_disc_mesh(&DomainSpec::default(), 2000)?);
    let mut worst = 0.0_f64;
    for kind in [PatternKind::Adjacent, PatternKind::Trig] {
        let patterns = rotation_scheme(&base_pattern(16, &kind, 1.0)?);
        for degree in [ElementDegree::Linear, ElementDegree::Quadratic] {
            let solver = ForwardSolver::new(mesh.clone(), ImpedanceSet::uniform(16, 0.1)?, degree)?;
            for seed in 0..20 {
                let currents = solver.simulate(&random_binary(&mesh, 100 + seed), &patterns)?;
                for k in 0..16 {
                    let row = currents.row(k);
                    worst = worst.max(row.iter().sum::<f64>().abs() / max_abs(row));
                }
            }
        }
    }
    Ok((worst <= 1e-8, format!("max |Σ I| / max |I| = {worst:.2e} over 20 samples, P1 and P2")))
}

fn reciprocity() -> Outcome {
    let mesh = Arc::new(build_disc_mesh(&DomainSpec::default(), 2000)?);
    let mut worst = 0.0_f64;
    for degree in [ElementDegree::Linear, ElementDegree::Quadratic] {
        let solver = ForwardSolver::new(mesh.clone(), ImpedanceSet::uniform(16, 0.1)?, degree)?;
        for sigma in [ConductivityField::uniform(mesh.element_count(), 0.2), random_binary(&mesh, 7)] {
            let g = solver.conductance_matrix(&sigma)?;
            let scale = max_abs(&g);
            for l in 0..16 {
                for j in 0..16 {
                    worst = worst.max((g[l * 16 + j] - g[j * 16 + l]).abs() / scale);
                }
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |G - Gᵀ| / max |G| = {worst:.2e}")))
}

fn inverse_crime_zero() -> Outcome {
    let cfg = desk_config();
    let ws = Workspace::new(&cfg)?;
    let mut details = Vec::new();
    let mut ok = true;
    for name in ModelName::ALL {
        let model = builtin_model(name, cfg.domain.radius);
        let observed = ws.solver.simulate(&model.truth_field(&ws.mesh), &ws.patterns)?;
        let evaluator = Evaluator::new(ws.solver.clone(), ws.patterns.clone(), observed.clone())?;
        let j = evaluator.evaluate_field(&model.truth_field(&ws.mesh))?;
        let bound = 1e-18 * observed.squared_norm();
        ok &= j <= bound;
        details.push(format!("{name} J={j:.1e}"));
    }
    Ok((ok, details.join(", ")))
}

fn padding_invariance() -> Outcome {
    let cfg = desk_config();
    let ws = Workspace::new(&cfg)?;
    let model = builtin_model(ModelName::Model1, cfg.domain.radius);
    let observed = ws.solver.simulate(&model.truth_field(&ws.mesh), &ws.patterns)?;
    let evaluator = Evaluator::new(ws.solver.clone(), ws.patterns.clone(), observed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut equal = 0;
    for trial in 0..50u64 {
        let n_s = rng.random_range(1..=10);
        let spec = CollectionSpec::with_defaults(n_s, 8, cfg.domain.radius, 1000 + trial);
        let samples = generate_collection(&spec, &cfg.domain, 0.4, 0.2)?;
        let mut w: Vec<f64> = (0..n_s).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let residue = 1.0 - w.iter().sum::<f64>();
        w[0] += residue;
        let basis = Basis::new(samples, w)?;
        let padded = pad_basis(&basis, 8, &cfg.domain, &mut rng)?;
        let before = evaluator.evaluate_basis(&basis)?;
        let after = evaluator.evaluate_basis(&padded)?;
        if before.to_bits() == after.to_bits() {
            equal += 1;
        }
    }
    Ok((equal == 50, format!("{equal}/50 bases give bitwise-equal J")))
}

struct DeskRun {
    rec: Reconstruction,
    initial_l2: f64,
    final_l2: f64,
    initial_cost: f64,
    seconds: f64,
}

fn desk_run(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<DeskRun> {
    let start = Instant::now();
    let ws = Workspace::new(cfg)?;
    let truth = model.truth_field(&ws.mesh);
    let observed = synthesize_observed(cfg, model, &ws)?;
    let store = build_store(cfg, &ws)?;
    let rec = reconstruct(cfg, &ws, &store, &observed, Some(&truth))?;
    let initial = blend(&rec.initial_basis, &ws.mesh)?;
    let initial_cost = cost(&ws.solver.simulate(&initial, &ws.patterns)?, &observed)?;
    Ok(DeskRun {
        initial_l2: l2_error(&initial, &truth, &ws.mesh)?,
        final_l2: l2_error(&rec.final_field, &truth, &ws.mesh)?,
        initial_cost,
        rec,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn monotone_and_budget(run: &DeskRun, cfg: &ExperimentConfig) -> Outcome {
    let h = &run.rec.history;
    let monotone = h.iterations.windows(2).all(|p| p[1].cost <= p[0].cost);
    let last = h.iterations.len() - 1;
    let stopped = match h.termination {
        Termination::Converged => {
            let (a, b) = (h.iterations[last - 1].cost, h.iterations[last].cost);
            ((b - a) / b).abs() < cfg.cd.tolerance
        }
        Termination::ZeroCost => h.final_cost() == 0.0,
        Termination::Budget => h.evaluations == cfg.cd.max_evaluations,
    };
    let within = h.evaluations <= cfg.cd.max_evaluations;
    Ok((
        monotone && stopped && within,
        format!(
            "{} major iterations, J non-increasing: {monotone}, stop: {}, evaluations {} / {} in {:.0}s",
            last,
            h.termination.as_str(),
            h.evaluations,
            cfg.cd.max_evaluations,
            run.seconds
        ),
    ))
}

fn reconstruction_quality(run: &DeskRun) -> Outcome {
    let l2_ratio = run.final_l2 / run.initial_l2;
    let j_ratio = run.rec.history.final_cost() / run.initial_cost;
    Ok((
        l2_ratio <= 0.5 && j_ratio <= 1e-2,
        format!(
            "L2 {:.3e} -> {:.3e} (ratio {l2_ratio:.3}, need <= 0.5), J {:.3e} -> {:.3e} (ratio {j_ratio:.2e}, need <= 1e-2)",
            run.initial_l2,
            run.final_l2,
            run.initial_cost,
            run.rec.history.final_cost()
        ),
    ))
}

/// Area-weighted center and equivalent radius of the excess conductivity.
fn inclusion_moments(field: &ConductivityField, mesh: &Mesh) -> (f64, f64, f64) {
    let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
    for ((v, a), c) in field.values().iter().zip(mesh.element_areas()).zip(mesh.element_centroids()) {
        let w = (v - 0.2) / 0.2 * a;
        mass += w;
        mx += w * c[0];
        my += w * c[1];
    }
    (mx / mass, my / mass, (mass / std::f64::consts::PI).sqrt())
}

fn single_inclusion_oracle() -> Outcome {
    let mut cfg = desk_config();
    cfg.collection.n = 500;
    let r = cfg.domain.radius;
    let model = ModelSpec {
        name: ModelName::Model1,
        truth: Truth::Circles(vec![Circle::new(0.3 * r, -0.2 * r, 0.2 * r)]),
        sigma_c: 0.4,
        sigma_h: 0.2,
    };
    let run = desk_run(&cfg, &model)?;
    let ws = Workspace::new(&cfg)?;
    let observed = synthesize_observed(&cfg, &model, &ws)?;

    // Exhaustive 21³ search over single circles.
    let axis = |lo: f64, hi: f64| (0..21).map(move |i| lo + (hi - lo) * i as f64 / 20.0);
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for x in axis(-0.8 * r, 0.8 * r) {
        for y in axis(-0.8 * r, 0.8 * r) {
            for rad in axis(0.02 * r, 0.42 * r) {
                let s = CircleSample::with_default_conductivity(vec![Circle::new(x, y, rad)]);
                let j = cost(&ws.solver.simulate(&rasterize(&s, &ws.mesh), &ws.patterns)?, &observed)?;
                if j < best.0 {
                    best = (j, x, y, rad);
                }
            }
        }
    }
    let (cx, cy, cr) = inclusion_moments(&run.rec.final_field, &ws.mesh);
    let dist = (cx - best.1).hypot(cy - best.2);
    let rel = (cr - best.3).abs() / best.3;
    Ok((
        dist <= 0.1 * r && rel <= 0.2,
        format!(
            "oracle ({:.4}, {:.4}, r {:.4}); descent ({cx:.4}, {cy:.4}, r {cr:.4}); center offset {:.3}R, radius off {:.1}%",
            best.1,
            best.2,
            best.3,
            dist / r,
            100.0 * rel
        ),
    ))
}

fn noise_ordering() -> Outcome {
    let levels = [0.0, 0.005, 0.01, 0.02, 0.05];
    let model = builtin_model(ModelName::Model1, desk_config().domain.radius);
    let mut errors = Vec::new();
    for level in levels {
        let mut cfg = desk_config();
        cfg.noise.level = level;
        errors.push(desk_run(&cfg, &model)?.final_l2);
    }
    let ok = errors.windows(2).all(|p| p[1] >= 0.9 * p[0]);
    let listing: Vec<String> = levels
        .iter()
        .zip(&errors)
        .map(|(l, e)| format!("{}%: {e:.3e}", 100.0 * l))
        .collect();
    Ok((ok, format!("final L2 {}", listing.join(", "))))
}

fn determinism(first: &DeskRun, cfg: &ExperimentConfig) -> Outcome {
    let model = builtin_model(cfg.model, cfg.domain.radius);
    let second = desk_run(cfg, &model)?;
    let same_trace = first.rec.history.trace_text() == second.rec.history.trace_text()
        && first.rec.history.moves_text() == second.rec.history.moves_text();
    let same_basis = first.rec.final_basis.to_text() == second.rec.final_basis.to_text();
    Ok((
        same_trace && same_basis,
        format!("identical trace: {same_trace}, identical final basis: {same_basis}"),
    ))
}

fn report(failures: &mut usize, id: usize, name: &str, outcome: Outcome) {
    let line = match outcome {
        Ok((true, detail)) => format!("PASS  {detail}"),
        Ok((false, detail)) => {
            *failures += 1;
            format!("FAIL  {detail}")
        }
        Err(e) => {
            *failures += 1;
            format!("FAIL  error: {e}")
        }
    };
    println!("criterion {id:2} {name:<28} {line}");
}

fn main() {
    // Accept and ignore libtest arguments such as `--nocapture`; a name
    // filter that does not match this target skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut failures = 0;
    report(&mut failures, 1, "electrode coverage", electrode_coverage());
    report(&mut failures, 2, "control dimension", control_count());
    report(&mut failures, 3, "current conservation", conservation());
    report(&mut failures, 4, "reciprocity", reciprocity());
    report(&mut failures, 5, "inverse-crime zero", inverse_crime_zero());
    report(&mut failures, 6, "padding invariance", padding_invariance());

    let cfg = desk_config();
    let model = builtin_model(ModelName::Model1, cfg.domain.radius);
    match desk_run(&cfg, &model) {
        Ok(run) => {
            report(&mut failures, 7, "descent monotone, budget", monotone_and_budget(&run, &cfg));
            report(&mut failures, 8, "reconstruction quality", reconstruction_quality(&run));
            report(&mut failures, 9, "single-inclusion oracle", single_inclusion_oracle());
            report(&mut failures, 10, "noise ordering", noise_ordering());
            report(&mut failures, 11, "determinism", determinism(&run, &cfg));
        }
        Err(e) => {
            for (id, name) in [
                (7, "descent monotone, budget"),
                (8, "reconstruction quality"),
                (11, "determinism"),
            ] {
                report(&mut failures, id, name, Err(e.clone_message()));
            }
            report(&mut failures, 9, "single-inclusion oracle", single_inclusion_oracle());
            report(&mut failures, 10, "noise ordering", noise_ordering());
        }
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

trait CloneMessage {
    fn clone_message(&self) -> eit_sbp::Error;
}

impl CloneMessage for eit_sbp::Error {
    fn clone_message(&self) -> eit_sbp::Error {
        eit_sbp::Error::Config(self.to_string())
    }
}
