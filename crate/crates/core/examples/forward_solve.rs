//! Simulates electrode currents for the three built-in models with P1 and
//! P2 elements.
//!
//! `cargo run --release --example forward_solve`

use std::sync::Arc;
use std::time::Instant;

use eit_sbp::excitation::{base_pattern, rotation_scheme, PatternKind};
use eit_sbp::forward::{ElementDegree, ForwardSolver, ImpedanceSet};
use eit_sbp::mesh::{build_disc_mesh, DomainSpec};
use eit_sbp::models::{builtin_model, ModelName};

fn main() -> eit_sbp::Result<()> {
    let spec = DomainSpec::default();
    let mesh = Arc::new(build_disc_mesh(&spec, 7730)?);
    let patterns = rotation_scheme(&base_pattern(16, &PatternKind::Adjacent, 1.0)?);

    for degree in [ElementDegree::Linear, ElementDegree::Quadratic] {
        let solver = ForwardSolver::new(mesh.clone(), ImpedanceSet::uniform(16, 0.1)?, degree)?;
        println!("{degree:?}: {} unknowns", solver.dof_count());
        for name in ModelName::ALL {
            let model = builtin_model(name, spec.radius);
            let t = Instant::now();
            let currents = solver.simulate(&model.truth_field(&mesh), &patterns)?;
            let row: Vec<String> = currents.row(0).iter().take(6).map(|v| format!("{v:+.4e}")).collect();
            println!(
                "  {name}: ‖I‖² = {:.6e}, pattern 0 starts [{} ...] ({:.1?})",
                currents.squared_norm(),
                row.join(", "),
                t.elapsed()
            );
        }
    }
    Ok(())
}
