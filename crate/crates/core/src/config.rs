//! Experiment configuration read from TOML, with `section.key=value`
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conductivity::{SIGMA_CANCER, SIGMA_HEALTHY};
use crate::error::{Error, Result};
use crate::excitation::PatternKind;
use crate::forward::ElementDegree;
use crate::models::ModelName;
use crate::objective::NoiseSpec;
use crate::optimizer::CdConfig;
use crate::sampling::CollectionSpec;
use crate::mesh::DomainSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub target_elements: usize,
    pub degree: ElementDegree,
    /// Element count multiplier for the mesh that synthesizes observed
    /// data; `1.0` reuses the reconstruction mesh.
    pub truth_mesh_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub kind: PatternKind,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivityConfig {
    pub sigma_c: f64,
    pub sigma_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub n_s: usize,
    /// Circle count after padding.
    pub n_c_max: usize,
    pub pad_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    pub grid_resolution: usize,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub output_dir: PathBuf,
    /// Shared store location; defaults to `<output_dir>/store`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_dir: Option<PathBuf>,
    pub workers: usize,
    pub domain: DomainSpec,
    pub mesh: MeshConfig,
    pub patterns: PatternConfig,
    /// One value for all electrodes or one per electrode.
    pub impedance: Vec<f64>,
    pub conductivity: ConductivityConfig,
    pub collection: CollectionSpec,
    pub basis: BasisConfig,
    pub noise: NoiseSpec,
    pub cd: CdConfig,
    pub export: ExportConfig,
}

impl ExperimentConfig {
    /// Full-size setup: 7730-element P2 mesh, 10000 samples, 50000
    /// evaluations, 0.5% noise.
    pub fn reference() -> Self {
        let domain = DomainSpec::default();
        Self {
            model: ModelName::Model1,
            output_dir: PathBuf::from("runs/reference"),
            store_dir: None,
            workers: 4,
            domain,
            mesh: MeshConfig {
                target_elements: 7730,
                degree: ElementDegree::Quadratic,
                truth_mesh_scale: 1.0,
            },
            patterns: PatternConfig {
                kind: PatternKind::Adjacent,
                amplitude: 1.0,
            },
            impedance: vec![0.1],
            conductivity: ConductivityConfig {
                sigma_c: SIGMA_CANCER,
                sigma_h: SIGMA_HEALTHY,
            },
            collection: CollectionSpec::with_defaults(10_000, 8, domain.radius, 1),
            basis: BasisConfig {
                n_s: 10,
                n_c_max: 8,
                pad_seed: 2,
            },
            noise: NoiseSpec::new(0.005, 3),
            cd: CdConfig::for_domain(domain.radius),
            export: ExportConfig {
                grid_resolution: 200,
                histogram_bins: 20,
            },
        }
    }

    /// Laptop-sized variant: about 2000 P1 elements and 1000 samples.
    pub fn desk() -> Self {
        let mut c = Self::reference();
        c.output_dir = PathBuf::from("runs/desk");
        c.mesh.target_elements = 2000;
        c.mesh.degree = ElementDegree::Linear;
        c.collection.n = 1000;
        c.noise.level = 0.0;
        c
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let table: toml::Table = text.parse::<toml::Table>().map_err(|e| Error::parse(origin, e.to_string()))?;
        Self::from_table(table, origin)
    }

    fn from_table(table: toml::Table, origin: &Path) -> Result<Self> {
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::parse(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::textio::read_file(path)?, path)
    }

    /// Loads `path` (or the reference setup when `None`) and applies
    /// `key=value` overrides, where `key` is a dotted path such as
    /// `cd.max_evaluations` and `value` is a TOML literal or a bare string.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let origin = path.map_or_else(|| PathBuf::from("<reference>"), Path::to_path_buf);
        let mut table: toml::Table = match path {
            Some(p) => crate::textio::read_file(p)?
                .parse::<toml::Table>()
                .map_err(|e| Error::parse(p, e.to_string()))?,
            None => toml::Table::try_from(Self::reference()).map_err(|e| Error::Config(e.to_string()))?,
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        Self::from_table(table, &origin)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn impedance_values(&self) -> Vec<f64> {
        if self.impedance.len() == 1 {
            vec![self.impedance[0]; self.domain.electrode_count]
        } else {
            self.impedance.clone()
        }
    }

    pub fn store_dir(&self) -> PathBuf {
        self.store_dir.clone().unwrap_or_else(|| self.output_dir.join("store"))
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.collection.validate()?;
        self.cd.validate()?;
        let m = self.domain.electrode_count;
        if self.impedance.len() != 1 && self.impedance.len() != m {
            return Err(Error::Config(format!(
                "impedance needs 1 or {m} values, got {}",
                self.impedance.len()
            )));
        }
        if self.impedance.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::Config("contact impedances must be positive".into()));
        }
        if let PatternKind::Custom(v) = &self.patterns.kind {
            if v.len() != m {
                return Err(Error::Config(format!("custom pattern has {} entries, expected {m}", v.len())));
            }
        }
        if self.basis.n_s == 0 || self.basis.n_s > self.collection.n {
            return Err(Error::Config(format!(
                "need 1 <= n_s <= collection.n, got n_s = {}",
                self.basis.n_s
            )));
        }
        if self.basis.n_c_max < self.collection.n_c_max {
            return Err(Error::Config(format!(
                "basis.n_c_max = {} is below collection.n_c_max = {}",
                self.basis.n_c_max, self.collection.n_c_max
            )));
        }
        if !(self.conductivity.sigma_c > 0.0 && self.conductivity.sigma_h > 0.0) {
            return Err(Error::Config("conductivities must be positive".into()));
        }
        if !(self.mesh.truth_mesh_scale >= 1.0) {
            return Err(Error::Config("truth_mesh_scale must be >= 1".into()));
        }
        if self.export.histogram_bins < 2 || self.export.grid_resolution < 2 {
            return Err(Error::Config("histogram_bins and grid_resolution must be >= 2".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table;
    for p in parents {
        cursor = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
