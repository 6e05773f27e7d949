use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio::{self, Lines};

/// Electrode currents, entry `(k, l)` is the current through electrode `l`
/// under pattern `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    patterns: usize,
    electrodes: usize,
    currents: Vec<f64>,
}

/// Provenance recorded alongside a serialized measurement set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementHeader {
    pub mesh_hash: String,
    pub pattern_hash: String,
    pub impedance: Vec<f64>,
    /// Free-form noise description, e.g. `multiplicative_gaussian level=0.005 seed=7`.
    pub noise: Option<String>,
}

impl MeasurementSet {
    pub fn new(patterns: usize, electrodes: usize, currents: Vec<f64>) -> Result<Self> {
        if currents.len() != patterns * electrodes {
            return Err(Error::Dimension {
                what: "measurement entries",
                expected: patterns * electrodes,
                got: currents.len(),
            });
        }
        Ok(Self {
            patterns,
            electrodes,
            currents,
        })
    }

    pub fn zeros(patterns: usize, electrodes: usize) -> Self {
        Self {
            patterns,
            electrodes,
            currents: vec![0.0; patterns * electrodes],
        }
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    pub fn electrodes(&self) -> usize {
        self.electrodes
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.currents[k * self.electrodes + l]
    }

    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        self.currents[k * self.electrodes + l] = value;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.currents[k * self.electrodes..(k + 1) * self.electrodes]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.currents
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.currents
    }

    pub fn same_shape(&self, other: &MeasurementSet) -> bool {
        self.patterns == other.patterns && self.electrodes == other.electrodes
    }

    pub fn squared_norm(&self) -> f64 {
        self.currents.iter().map(|v| v * v).sum()
    }

    pub fn to_text(&self, header: &MeasurementHeader) -> String {
        let mut s = String::from("# eit-sbp measurements v1\n");
        let _ = writeln!(s, "mesh_hash {}", or_dash(&header.mesh_hash));
        let _ = writeln!(s, "pattern_hash {}", or_dash(&header.pattern_hash));
        s.push_str("impedance");
        for z in &header.impedance {
            let _ = write!(s, " {z}");
        }
        s.push('\n');
        if let Some(noise) = &header.noise {
            let _ = writeln!(s, "noise {noise}");
        }
        s.push_str("# rows = patterns k, columns = electrodes l\n");
        let _ = writeln!(s, "currents {} {}", self.patterns, self.electrodes);
        textio::format_matrix(&mut s, self.patterns, self.electrodes, &self.currents);
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<(Self, MeasurementHeader)> {
        let mut lines = Lines::new(text, origin);
        let mut header = MeasurementHeader::default();
        loop {
            let row = lines.next_row()?;
            match row.first().copied() {
                Some("mesh_hash") => header.mesh_hash = row.get(1).unwrap_or(&"-").to_string(),
                Some("pattern_hash") => header.pattern_hash = row.get(1).unwrap_or(&"-").to_string(),
                Some("impedance") => {
                    header.impedance = (1..row.len())
                        .map(|i| lines.field(&row, i))
                        .collect::<Result<_>>()?;
                }
                Some("noise") => header.noise = Some(row[1..].join(" ")),
                Some("currents") => {
                    let rows: usize = lines.field(&row, 1)?;
                    let cols: usize = lines.field(&row, 2)?;
                    let mut currents = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        currents.extend(lines.floats(cols)?);
                    }
                    return Ok((MeasurementSet::new(rows, cols, currents)?, header));
                }
                _ => return Err(lines.error("unexpected row in measurement header")),
            }
        }
    }

    pub fn save(&self, path: &Path, header: &MeasurementHeader) -> Result<()> {
        textio::write_file(path, &self.to_text(header))
    }

    pub fn load(path: &Path) -> Result<(Self, MeasurementHeader)> {
        MeasurementSet::from_text(&textio::read_file(path)?, path)
    }
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}
