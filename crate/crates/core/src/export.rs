//! Plain-text and PGM exports of conductivity fields.

use std::fmt::Write as _;

use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    /// Area per bin.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.upper - self.lower) / self.mass.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# bin_low bin_high area\n");
        let w = self.bin_width();
        for (i, m) in self.mass.iter().enumerate() {
            let lo = self.lower + i as f64 * w;
            let _ = writeln!(s, "{lo} {} {m}", lo + w);
        }
        s
    }
}

/// Area-weighted histogram of element values over `[lower, upper]`; values
/// outside the range land in the end bins and `upper` itself in the last.
pub fn export_histogram(field: &ConductivityField, mesh: &Mesh, bins: usize, lower: f64, upper: f64) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::Config(format!("histogram needs at least 2 bins, got {bins}")));
    }
    if !(upper > lower) {
        return Err(Error::Config(format!("empty histogram range [{lower}, {upper}]")));
    }
    if field.len() != mesh.element_count() {
        return Err(Error::Dimension {
            what: "field elements",
            expected: mesh.element_count(),
            got: field.len(),
        });
    }
    let width = (upper - lower) / bins as f64;
    let mut mass = vec![0.0; bins];
    for (v, a) in field.values().iter().zip(mesh.element_areas()) {
        let idx = ((v - lower) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        mass[idx] += a;
    }
    Ok(Histogram { lower, upper, mass })
}

/// Grid rows top to bottom, `NaN` outside the domain.
pub fn grid_text(grid: &[Vec<f64>], radius: f64) -> String {
    let n = grid.len();
    let mut s = String::new();
    let _ = writeln!(s, "# grid {n} x {n} over [-{radius}, {radius}]^2, rows from top, NaN outside");
    for row in grid {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// ASCII PGM of a grid: values at or above `level` are black, the rest
/// mid-gray, outside the domain white.
pub fn grid_pgm(grid: &[Vec<f64>], level: f64) -> String {
    let n = grid.len();
    let mut s = format!("P2\n{n} {n}\n255\n");
    for row in grid {
        let line: Vec<&str> = row
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    "255"
                } else if v >= level {
                    "0"
                } else {
                    "160"
                }
            })
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}
