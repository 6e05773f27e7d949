//! Builds the disc mesh with 16 electrodes and reports its geometry.
//!
//! `cargo run --release --example build_mesh [-- <target_elements> [out.txt]]`

use std::path::PathBuf;

use eit_sbp::mesh::{build_disc_mesh, DomainSpec};

fn main() -> eit_sbp::Result<()> {
    let mut args = std::env::args().skip(1);
    let target: usize = args.next().map_or(7730, |a| a.parse().expect("element count"));
    let out = args.next().map(PathBuf::from);

    let spec = DomainSpec::default();
    let mesh = build_disc_mesh(&spec, target)?;
    println!("elements       {}", mesh.element_count());
    println!("vertices       {}", mesh.vertices().len());
    println!("boundary edges {}", mesh.boundary_edges().len());
    println!("area           {:.6e} (disc {:.6e})", mesh.total_area(), std::f64::consts::PI * spec.radius * spec.radius);
    println!("coverage       {:.4} (arc {:.4})", mesh.electrode_coverage(), spec.coverage_fraction());
    for l in [0, 1, spec.electrode_count - 1] {
        println!(
            "electrode {l:2}   center {:.4} rad, length {:.5}",
            spec.electrode_center(l),
            mesh.electrode_length(l)?
        );
    }
    println!("hash           {}", mesh.content_hash());
    if let Some(path) = out {
        mesh.save(&path)?;
        println!("saved to {}", path.display());
    }
    Ok(())
}
