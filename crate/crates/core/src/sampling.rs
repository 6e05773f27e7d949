//! Random circle-union collections and the precomputed measurement store.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::{classify_circle, rasterize, Circle, CircleClass, CircleSample};
use crate::error::{Error, Result};
use crate::excitation::PatternSet;
use crate::forward::ForwardSolver;
use crate::measurement::MeasurementSet;
use crate::mesh::{DomainSpec, Mesh};
use crate::textio::{self, Lines};

const MAX_CIRCLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionSpec {
    /// Number of samples.
    pub n: usize,
    /// Most circles per sample.
    pub n_c_max: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl CollectionSpec {
    /// Radii in `(1e-4·R, 0.3·R]`.
    pub fn with_defaults(n: usize, n_c_max: usize, radius: f64, seed: u64) -> Self {
        Self {
            n,
            n_c_max,
            r_min: 1e-4 * radius,
            r_max: 0.3 * radius,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_c_max == 0 {
            return Err(Error::Config("collection needs n >= 1 and n_c_max >= 1".into()));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < r_min <= r_max, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Uniform point in the open disc of radius `radius`.
pub fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> (f64, f64) {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    (rho * theta.cos(), rho * theta.sin())
}

/// Draws `spec.n` samples. Each has `Uniform{1..n_c_max}` circles with
/// area-uniform centers in the disc and radii uniform on `(r_min, r_max]`;
/// zero-radius and fully-outside circles are redrawn.
pub fn generate_collection(
    spec: &CollectionSpec,
    domain: &DomainSpec,
    sigma_c: f64,
    sigma_h: f64,
) -> Result<Vec<CircleSample>> {
    spec.validate()?;
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let count = rng.random_range(1..=spec.n_c_max);
        let mut circles = Vec::with_capacity(count);
        for _ in 0..count {
            circles.push(draw_circle(&mut rng, spec, domain.radius)?);
        }
        samples.push(CircleSample::new(circles, sigma_c, sigma_h));
    }
    Ok(samples)
}

/// `sample <i> circles <n>` followed by one `x01 x02 r` row per circle.
pub fn collection_text(samples: &[CircleSample]) -> String {
    let mut s = String::from("# sample <i> circles <n>, then x01 x02 r rows\n");
    for (i, sample) in samples.iter().enumerate() {
        let _ = writeln!(s, "sample {i} circles {}", sample.circles.len());
        s.push_str(&sample.to_text());
    }
    s
}

fn draw_circle<R: Rng + ?Sized>(rng: &mut R, spec: &CollectionSpec, radius: f64) -> Result<Circle> {
    for _ in 0..MAX_CIRCLE_ATTEMPTS {
        let (x01, x02) = uniform_in_disc(rng, radius);
        let r = spec.r_min + (spec.r_max - spec.r_min) * (1.0 - rng.random::<f64>());
        let circle = Circle::new(x01, x02, r);
        match classify_circle(&circle, radius) {
            CircleClass::ZeroRadius | CircleClass::FullyOutside => continue,
            _ => return Ok(circle),
        }
    }
    Err(Error::Sampling(format!(
        "no admissible circle after {MAX_CIRCLE_ATTEMPTS} attempts"
    )))
}

/// Everything the stored data depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreHeader {
    pub mesh_hash: String,
    pub pattern_hash: String,
    pub impedance: Vec<f64>,
    pub sigma_c: f64,
    pub sigma_h: f64,
    pub collection: CollectionSpec,
    pub domain: DomainSpec,
    pub degree: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordData {
    Currents(MeasurementSet),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreRecord {
    pub circles: Vec<Circle>,
    pub data: RecordData,
}

impl StoreRecord {
    pub fn currents(&self) -> Option<&MeasurementSet> {
        match &self.data {
            RecordData::Currents(m) => Some(m),
            RecordData::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeStore {
    pub header: StoreHeader,
    pub records: Vec<StoreRecord>,
}

pub const STORE_HEADER_FILE: &str = "store_header.txt";
pub const STORE_RECORDS_FILE: &str = "store_records.txt";

/// Simulates every sample of the collection on `workers` threads. Records
/// are keyed by sample index, so the result does not depend on scheduling.
pub fn precompute(
    collection: &[CircleSample],
    spec: &CollectionSpec,
    solver: &ForwardSolver,
    patterns: &PatternSet,
    workers: usize,
) -> Result<PrecomputeStore> {
    let mesh: &Mesh = solver.mesh();
    let (sigma_c, sigma_h) = collection
        .first()
        .map_or((0.4, 0.2), |s| (s.sigma_c, s.sigma_h));
    let header = StoreHeader {
        mesh_hash: mesh.content_hash(),
        pattern_hash: patterns.content_hash(),
        impedance: solver.impedance().values().to_vec(),
        sigma_c,
        sigma_h,
        collection: *spec,
        domain: *mesh.domain(),
        degree: format!("{:?}", solver.degree()),
    };
    let simulate = |sample: &CircleSample| StoreRecord {
        circles: sample.circles.clone(),
        data: match solver.simulate(&rasterize(sample, mesh), patterns) {
            Ok(m) => RecordData::Currents(m),
            Err(e) => RecordData::Failed(e.to_string()),
        },
    };
    let records = if workers <= 1 {
        collection.iter().map(simulate).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| collection.par_iter().map(simulate).collect())
    };
    Ok(PrecomputeStore { header, records })
}

impl PrecomputeStore {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sample(&self, index: usize) -> CircleSample {
        CircleSample::new(
            self.records[index].circles.clone(),
            self.header.sigma_c,
            self.header.sigma_h,
        )
    }

    /// Errors unless the store was computed with the given artifacts.
    pub fn check_compatible(&self, mesh_hash: &str, pattern_hash: &str, impedance: &[f64]) -> Result<()> {
        let h = &self.header;
        if h.mesh_hash != mesh_hash {
            return Err(Error::StoreMismatch(format!("mesh {} != {mesh_hash}", h.mesh_hash)));
        }
        if h.pattern_hash != pattern_hash {
            return Err(Error::StoreMismatch(format!(
                "patterns {} != {pattern_hash}",
                h.pattern_hash
            )));
        }
        if h.impedance != impedance {
            return Err(Error::StoreMismatch("contact impedances differ".into()));
        }
        Ok(())
    }

    pub fn header_text(&self) -> String {
        let h = &self.header;
        let c = &h.collection;
        let d = &h.domain;
        let mut s = String::from("# eit-sbp precompute store v1\n# key value...\n");
        let _ = writeln!(s, "mesh_hash {}", h.mesh_hash);
        let _ = writeln!(s, "pattern_hash {}", h.pattern_hash);
        s.push_str("impedance");
        for z in &h.impedance {
            let _ = write!(s, " {z}");
        }
        s.push('\n');
        let _ = writeln!(s, "conductivity {} {}", h.sigma_c, h.sigma_h);
        let _ = writeln!(s, "domain {} {} {} {}", d.radius, d.electrode_count, d.electrode_half_width, d.electrode_offset);
        let _ = writeln!(s, "degree {}", h.degree);
        let _ = writeln!(s, "collection {} {} {} {}", c.n, c.n_c_max, c.r_min, c.r_max);
        let _ = writeln!(s, "seed {}", c.seed);
        let _ = writeln!(s, "records {}", self.records.len());
        s
    }

    /// Each record is `record <i> ok <circles>` (or `record <i> failed
    /// <circles> <message>`), the circle rows, then for `ok` a
    /// `currents <k> <m>` matrix.
    pub fn records_text(&self) -> String {
        let mut s = String::from("# eit-sbp precompute records v1\n");
        for (i, rec) in self.records.iter().enumerate() {
            match &rec.data {
                RecordData::Currents(m) => {
                    let _ = writeln!(s, "record {i} ok {}", rec.circles.len());
                    push_circles(&mut s, &rec.circles);
                    let _ = writeln!(s, "currents {} {}", m.patterns(), m.electrodes());
                    textio::format_matrix(&mut s, m.patterns(), m.electrodes(), m.as_slice());
                }
                RecordData::Failed(msg) => {
                    let _ = writeln!(s, "record {i} failed {} {}", rec.circles.len(), msg.replace('\n', " "));
                    push_circles(&mut s, &rec.circles);
                }
            }
        }
        s
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        textio::write_file(&dir.join(STORE_HEADER_FILE), &self.header_text())?;
        textio::write_file(&dir.join(STORE_RECORDS_FILE), &self.records_text())
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join(STORE_HEADER_FILE).is_file() && dir.join(STORE_RECORDS_FILE).is_file()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join(STORE_HEADER_FILE);
        let text = textio::read_file(&header_path)?;
        let mut lines = Lines::new(&text, &header_path);
        let row = lines.expect_keyword("mesh_hash")?;
        let mesh_hash: String = lines.field(&row, 1)?;
        let row = lines.expect_keyword("pattern_hash")?;
        let pattern_hash: String = lines.field(&row, 1)?;
        let row = lines.expect_keyword("impedance")?;
        let impedance = (1..row.len()).map(|i| lines.field(&row, i)).collect::<Result<Vec<f64>>>()?;
        let row = lines.expect_keyword("conductivity")?;
        let (sigma_c, sigma_h) = (lines.field(&row, 1)?, lines.field(&row, 2)?);
        let row = lines.expect_keyword("domain")?;
        let domain = DomainSpec {
            radius: lines.field(&row, 1)?,
            electrode_count: lines.field(&row, 2)?,
            electrode_half_width: lines.field(&row, 3)?,
            electrode_offset: lines.field(&row, 4)?,
        };
        let row = lines.expect_keyword("degree")?;
        let degree: String = lines.field(&row, 1)?;
        let row = lines.expect_keyword("collection")?;
        let mut collection = CollectionSpec {
            n: lines.field(&row, 1)?,
            n_c_max: lines.field(&row, 2)?,
            r_min: lines.field(&row, 3)?,
            r_max: lines.field(&row, 4)?,
            seed: 0,
        };
        collection.seed = lines.count_of("seed")?;
        let count: usize = lines.count_of("records")?;
        let header = StoreHeader {
            mesh_hash,
            pattern_hash,
            impedance,
            sigma_c,
            sigma_h,
            collection,
            domain,
            degree,
        };

        let records_path: PathBuf = dir.join(STORE_RECORDS_FILE);
        let text = textio::read_file(&records_path)?;
        let mut lines = Lines::new(&text, &records_path);
        let mut records = Vec::with_capacity(count);
        for i in 0..count {
            let row = lines.expect_keyword("record")?;
            let index: usize = lines.field(&row, 1)?;
            if index != i {
                return Err(lines.error(format!("expected record {i}, found {index}")));
            }
            let status: String = lines.field(&row, 2)?;
            let circle_count: usize = lines.field(&row, 3)?;
            let message = row.get(4..).map(|r| r.join(" ")).unwrap_or_default();
            let circles = (0..circle_count)
                .map(|_| lines.floats(3).map(|v| Circle::new(v[0], v[1], v[2])))
                .collect::<Result<Vec<_>>>()?;
            let data = match status.as_str() {
                "ok" => {
                    let row = lines.expect_keyword("currents")?;
                    let (p, m): (usize, usize) = (lines.field(&row, 1)?, lines.field(&row, 2)?);
                    let mut values = Vec::with_capacity(p * m);
                    for _ in 0..p {
                        values.extend(lines.floats(m)?);
                    }
                    RecordData::Currents(MeasurementSet::new(p, m, values)?)
                }
                "failed" => RecordData::Failed(message),
                other => return Err(lines.error(format!("unknown record status `{other}`"))),
            };
            records.push(StoreRecord { circles, data });
        }
        Ok(PrecomputeStore { header, records })
    }
}

fn push_circles(s: &mut String, circles: &[Circle]) {
    for c in circles {
        let _ = writeln!(s, "{} {} {}", c.x01, c.x02, c.r);
    }
}
