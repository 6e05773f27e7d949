//! Applied electrode potentials and the rotation scheme.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio::{self, Lines};

/// Potentials applied to the `m` electrodes, summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltagePattern {
    values: Vec<f64>,
}

impl VoltagePattern {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPattern(format!(
                "need at least 2 electrodes, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPattern("non-finite potential".into()));
        }
        let sum: f64 = values.iter().sum();
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if sum.abs() > 1e-12 * scale {
            return Err(Error::InvalidPattern(format!(
                "potentials must sum to zero (ground condition), sum = {sum:e}"
            )));
        }
        Ok(Self { values })
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// `A·sin(2π(l+1)/m)` on electrode `l`.
    Trig,
    /// `A·(-1)^(l+1)`; even `m` only.
    Alternating,
    /// `+A` on electrode 0, `-A` on electrode 1, zero elsewhere.
    Adjacent,
    Custom(Vec<f64>),
}

/// Base pattern of the given kind scaled by `amplitude` (ignored for `Custom`).
pub fn base_pattern(m: usize, kind: &PatternKind, amplitude: f64) -> Result<VoltagePattern> {
    if m < 2 {
        return Err(Error::InvalidPattern(format!("need m >= 2, got {m}")));
    }
    let values = match kind {
        PatternKind::Trig => (1..=m)
            .map(|l| amplitude * (2.0 * PI * l as f64 / m as f64).sin())
            .collect(),
        PatternKind::Alternating => {
            if m % 2 == 1 {
                return Err(Error::InvalidPattern(format!(
                    "alternating pattern needs an even electrode count, got {m}"
                )));
            }
            (1..=m)
                .map(|l| if l % 2 == 0 { amplitude } else { -amplitude })
                .collect()
        }
        PatternKind::Adjacent => {
            let mut v = vec![0.0; m];
            v[0] = amplitude;
            v[1] = -amplitude;
            v
        }
        PatternKind::Custom(values) => {
            if values.len() != m {
                return Err(Error::InvalidPattern(format!(
                    "custom pattern has {} values for {m} electrodes",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    VoltagePattern::new(values)
}

/// The `m` cyclic shifts of a base pattern; row `k` drives electrode `l`
/// with `base[(l + k) mod m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    patterns: Vec<VoltagePattern>,
}

pub fn rotation_scheme(base: &VoltagePattern) -> PatternSet {
    let m = base.len();
    let patterns = (0..m)
        .map(|k| VoltagePattern {
            values: (0..m).map(|l| base.values[(l + k) % m]).collect(),
        })
        .collect();
    PatternSet { patterns }
}

impl PatternSet {
    /// Arbitrary list of patterns sharing one electrode count.
    pub fn from_patterns(patterns: Vec<VoltagePattern>) -> Result<Self> {
        let m = patterns.first().map_or(0, VoltagePattern::len);
        if patterns.is_empty() || patterns.iter().any(|p| p.len() != m) {
            return Err(Error::InvalidPattern("patterns must share one electrode count".into()));
        }
        Ok(Self { patterns })
    }

    pub fn patterns(&self) -> &[VoltagePattern] {
        &self.patterns
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn electrode_count(&self) -> usize {
        self.patterns[0].len()
    }

    /// Rows = patterns, columns = electrodes.
    pub fn to_text(&self) -> String {
        let rows = self.pattern_count();
        let cols = self.electrode_count();
        let mut s = format!("# eit-sbp patterns v1\n# rows = patterns k, columns = electrodes l\npatterns {rows} {cols}\n");
        let flat: Vec<f64> = self.patterns.iter().flat_map(|p| p.values.iter().copied()).collect();
        textio::format_matrix(&mut s, rows, cols, &flat);
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, origin);
        let head = lines.expect_keyword("patterns")?;
        let rows: usize = lines.field(&head, 1)?;
        let cols: usize = lines.field(&head, 2)?;
        let patterns = (0..rows)
            .map(|_| VoltagePattern::new(lines.floats(cols)?))
            .collect::<Result<Vec<_>>>()?;
        PatternSet::from_patterns(patterns)
    }

    pub fn content_hash(&self) -> String {
        textio::short_hash(self.to_text().as_bytes())
    }
}
