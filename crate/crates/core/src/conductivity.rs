//! Conductivity fields, circle-union samples and their convex blends.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::textio::{self, Lines};

/// Default cancer and healthy-tissue conductivities.
pub const SIGMA_CANCER: f64 = 0.4;
pub const SIGMA_HEALTHY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub x01: f64,
    pub x02: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(x01: f64, x02: f64, r: f64) -> Self {
        Self { x01, x02, r }
    }

    pub fn center_norm(&self) -> f64 {
        self.x01.hypot(self.x02)
    }

    /// Closed-disc membership; zero-radius circles contain nothing.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        if self.r <= 0.0 {
            return false;
        }
        let dx = p[0] - self.x01;
        let dy = p[1] - self.x02;
        dx * dx + dy * dy <= self.r * self.r
    }
}

/// How a circle sits relative to the disc of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleClass {
    /// Positive radius, fully inside.
    Regular,
    /// Straddles the boundary.
    PartiallyOutside,
    /// Zero radius.
    ZeroRadius,
    /// Positive radius, no overlap with the disc.
    FullyOutside,
}

pub fn classify_circle(c: &Circle, radius: f64) -> CircleClass {
    let d = c.center_norm();
    if c.r <= 0.0 {
        CircleClass::ZeroRadius
    } else if d >= radius + c.r {
        CircleClass::FullyOutside
    } else if d + c.r <= radius {
        CircleClass::Regular
    } else {
        CircleClass::PartiallyOutside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Disjoint,
    Partial,
    /// One circle lies inside the other.
    Contained,
}

pub fn overlaps(a: &Circle, b: &Circle) -> Overlap {
    let d = (a.x01 - b.x01).hypot(a.x02 - b.x02);
    if d >= a.r + b.r {
        Overlap::Disjoint
    } else if d <= (a.r - b.r).abs() {
        Overlap::Contained
    } else {
        Overlap::Partial
    }
}

/// Binary field: `sigma_c` inside the union of circles, `sigma_h` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleSample {
    pub circles: Vec<Circle>,
    pub sigma_c: f64,
    pub sigma_h: f64,
}

impl CircleSample {
    pub fn new(circles: Vec<Circle>, sigma_c: f64, sigma_h: f64) -> Self {
        Self {
            circles,
            sigma_c,
            sigma_h,
        }
    }

    pub fn with_default_conductivity(circles: Vec<Circle>) -> Self {
        Self::new(circles, SIGMA_CANCER, SIGMA_HEALTHY)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.circles.iter().any(|c| c.contains(p))
    }

    /// Each circle as an `x01 x02 r` line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.circles {
            let _ = writeln!(s, "{} {} {}", c.x01, c.x02, c.r);
        }
        s
    }
}

/// Piecewise-constant (per-element) conductivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    values: Vec<f64>,
}

impl ConductivityField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn uniform(elements: usize, value: f64) -> Self {
        Self {
            values: vec![value; elements],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `# element value` table.
    pub fn to_table(&self) -> String {
        let mut s = String::from("# element sigma\n");
        for (e, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{e} {v}");
        }
        s
    }

    /// Samples the field on a `resolution × resolution` grid over the
    /// bounding square of the disc; points outside the disc are `nan`.
    pub fn to_grid(&self, mesh: &Mesh, resolution: usize) -> Vec<Vec<f64>> {
        let locator = ElementLocator::new(mesh);
        let r = mesh.domain().radius;
        let step = 2.0 * r / resolution as f64;
        (0..resolution)
            .map(|row| {
                let y = r - (row as f64 + 0.5) * step;
                (0..resolution)
                    .map(|col| {
                        let x = -r + (col as f64 + 0.5) * step;
                        locator
                            .locate(mesh, [x, y])
                            .map_or(f64::NAN, |e| self.values[e])
                    })
                    .collect()
            })
            .collect()
    }
}

/// Grid-bucketed point location on a mesh.
struct ElementLocator {
    cells: usize,
    radius: f64,
    buckets: Vec<Vec<usize>>,
}

impl ElementLocator {
    fn new(mesh: &Mesh) -> Self {
        let cells = ((mesh.element_count() as f64).sqrt() as usize).max(1);
        let radius = mesh.domain().radius;
        let mut buckets = vec![Vec::new(); cells * cells];
        let to_cell = |v: f64| (((v + radius) / (2.0 * radius) * cells as f64).floor() as isize).clamp(0, cells as isize - 1) as usize;
        for (e, t) in mesh.triangles().iter().enumerate() {
            let pts = t.map(|v| mesh.vertices()[v]);
            let (x0, x1) = (
                pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
                pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
                pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
            );
            for cy in to_cell(y0)..=to_cell(y1) {
                for cx in to_cell(x0)..=to_cell(x1) {
                    buckets[cy * cells + cx].push(e);
                }
            }
        }
        Self {
            cells,
            radius,
            buckets,
        }
    }

    fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<usize> {
        if p[0].hypot(p[1]) > self.radius {
            return None;
        }
        let cell = |v: f64| (((v + self.radius) / (2.0 * self.radius) * self.cells as f64).floor() as isize).clamp(0, self.cells as isize - 1) as usize;
        let bucket = &self.buckets[cell(p[1]) * self.cells + cell(p[0])];
        bucket.iter().copied().find(|&e| {
            let [a, b, c] = mesh.triangles()[e].map(|v| mesh.vertices()[v]);
            let eps = -1e-12;
            cross(a, b, p) >= eps && cross(b, c, p) >= eps && cross(c, a, p) >= eps
        })
    }
}

fn cross(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
}

/// Element gets `sigma_c` iff its centroid lies in the union of circles.
pub fn rasterize(sample: &CircleSample, mesh: &Mesh) -> ConductivityField {
    ConductivityField {
        values: mesh
            .element_centroids()
            .iter()
            .map(|&p| {
                if sample.contains(p) {
                    sample.sigma_c
                } else {
                    sample.sigma_h
                }
            })
            .collect(),
    }
}

/// Selected samples with convex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub samples: Vec<CircleSample>,
    pub weights: Vec<f64>,
}

impl Basis {
    /// Validates that weights lie in `[0, 1]` and sum to one.
    pub fn new(samples: Vec<CircleSample>, weights: Vec<f64>) -> Result<Self> {
        let basis = Self { samples, weights };
        basis.validate()?;
        Ok(basis)
    }

    /// Equal weights `1/N_s`.
    pub fn uniform(samples: Vec<CircleSample>) -> Result<Self> {
        let n = samples.len();
        Basis::new(samples, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Weights("basis is empty".into()));
        }
        if self.samples.len() != self.weights.len() {
            return Err(Error::Dimension {
                what: "basis weights",
                expected: self.samples.len(),
                got: self.weights.len(),
            });
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::Weights(format!("weight {w} outside [0, 1]")));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Weights(format!("weights sum to {sum}")));
        }
        Ok(())
    }

    /// Text form: one `sample <i> weight <α> circles <n>` line followed by
    /// `n` rows of `x01 x02 r`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# eit-sbp basis v1\n");
        let (sc, sh) = self
            .samples
            .first()
            .map_or((SIGMA_CANCER, SIGMA_HEALTHY), |x| (x.sigma_c, x.sigma_h));
        let _ = writeln!(s, "conductivity {sc} {sh}");
        let _ = writeln!(s, "samples {}", self.samples.len());
        for (i, (sample, w)) in self.samples.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(s, "sample {i} weight {w} circles {}", sample.circles.len());
            s.push_str(&sample.to_text());
        }
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, origin);
        let head = lines.expect_keyword("conductivity")?;
        let sigma_c: f64 = lines.field(&head, 1)?;
        let sigma_h: f64 = lines.field(&head, 2)?;
        let n: usize = lines.count_of("samples")?;
        let mut samples = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let row = lines.expect_keyword("sample")?;
            weights.push(lines.field(&row, 3)?);
            let count: usize = lines.field(&row, 5)?;
            let circles = (0..count)
                .map(|_| lines.floats(3).map(|v| Circle::new(v[0], v[1], v[2])))
                .collect::<Result<Vec<_>>>()?;
            samples.push(CircleSample::new(circles, sigma_c, sigma_h));
        }
        Basis::new(samples, weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Basis::from_text(&textio::read_file(path)?, path)
    }
}

/// `Σ_i α_i · rasterize(sample_i)` per element.
pub fn blend(basis: &Basis, mesh: &Mesh) -> Result<ConductivityField> {
    basis.validate()?;
    let rasters: Vec<ConductivityField> = basis.samples.iter().map(|s| rasterize(s, mesh)).collect();
    Ok(blend_rasters(&rasters, &basis.weights))
}

/// Weighted sum of already rasterized samples.
pub fn blend_rasters(rasters: &[ConductivityField], weights: &[f64]) -> ConductivityField {
    let n = rasters.first().map_or(0, ConductivityField::len);
    let mut values = vec![0.0; n];
    for (raster, &w) in rasters.iter().zip(weights) {
        for (v, r) in values.iter_mut().zip(&raster.values) {
            *v += w * r;
        }
    }
    ConductivityField { values }
}

/// Maps values `>= level` to `high`, the rest to `low`.
pub fn threshold(field: &ConductivityField, level: f64, low: f64, high: f64) -> ConductivityField {
    ConductivityField {
        values: field
            .values
            .iter()
            .map(|&v| if v >= level { high } else { low })
            .collect(),
    }
}

/// `sqrt(Σ_e area_e (a_e - b_e)²)`.
pub fn l2_error(field: &ConductivityField, truth: &ConductivityField, mesh: &Mesh) -> Result<f64> {
    let n = mesh.element_count();
    for f in [field, truth] {
        if f.len() != n {
            return Err(Error::Dimension {
                what: "field elements",
                expected: n,
                got: f.len(),
            });
        }
    }
    Ok(field
        .values
        .iter()
        .zip(&truth.values)
        .zip(mesh.element_areas())
        .map(|((a, b), area)| area * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
