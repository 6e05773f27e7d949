//! Least-squares misfit between simulated and observed electrode currents.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::conductivity::{blend, rasterize, Basis, CircleSample, ConductivityField};
use crate::error::{Error, Result};
use crate::excitation::PatternSet;
use crate::forward::ForwardSolver;
use crate::measurement::MeasurementSet;

/// `J = Σ_k Σ_l (I^k_l - I^{k*}_l)²`.
pub fn cost(simulated: &MeasurementSet, observed: &MeasurementSet) -> Result<f64> {
    if !simulated.same_shape(observed) {
        return Err(Error::Dimension {
            what: "measurement entries",
            expected: observed.as_slice().len(),
            got: simulated.as_slice().len(),
        });
    }
    Ok(simulated
        .as_slice()
        .iter()
        .zip(observed.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `I → I·(1 + η)`, `η ~ N(0, level²)` per entry.
    #[default]
    MultiplicativeGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative standard deviation, e.g. `0.005` for 0.5%.
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub model: NoiseModel,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        Self {
            level,
            seed,
            model: NoiseModel::MultiplicativeGaussian,
        }
    }

    pub fn describe(&self) -> String {
        format!("multiplicative_gaussian level={} seed={}", self.level, self.seed)
    }
}

pub fn add_noise(clean: &MeasurementSet, spec: &NoiseSpec) -> Result<MeasurementSet> {
    if !(spec.level >= 0.0 && spec.level.is_finite()) {
        return Err(Error::Config(format!("noise level must be >= 0, got {}", spec.level)));
    }
    let mut noisy = clean.clone();
    if spec.level == 0.0 {
        return Ok(noisy);
    }
    let normal = Normal::new(0.0, spec.level).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for v in noisy.as_mut_slice() {
        *v *= 1.0 + normal.sample(&mut rng);
    }
    Ok(noisy)
}

/// Cost of candidate conductivities against fixed observed data, with a
/// shared evaluation counter.
#[derive(Debug)]
pub struct Evaluator {
    solver: ForwardSolver,
    patterns: PatternSet,
    observed: MeasurementSet,
    evaluations: AtomicUsize,
}

impl Evaluator {
    pub fn new(solver: ForwardSolver, patterns: PatternSet, observed: MeasurementSet) -> Result<Self> {
        if observed.patterns() != patterns.pattern_count()
            || observed.electrodes() != solver.mesh().electrode_count()
        {
            return Err(Error::Dimension {
                what: "observed measurements",
                expected: patterns.pattern_count() * solver.mesh().electrode_count(),
                got: observed.as_slice().len(),
            });
        }
        Ok(Self {
            solver,
            patterns,
            observed,
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn solver(&self) -> &ForwardSolver {
        &self.solver
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn observed(&self) -> &MeasurementSet {
        &self.observed
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Counts an evaluation whose value is already known (the candidate
    /// field is identical to one evaluated before).
    pub fn record_repeat(&self) {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
    }

    pub fn evaluate_field(&self, sigma: &ConductivityField) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let simulated = self.solver.simulate(sigma, &self.patterns)?;
        cost(&simulated, &self.observed)
    }

    pub fn evaluate_sample(&self, sample: &CircleSample) -> Result<f64> {
        self.evaluate_field(&rasterize(sample, self.solver.mesh()))
    }

    pub fn evaluate_basis(&self, basis: &Basis) -> Result<f64> {
        self.evaluate_field(&blend(basis, self.solver.mesh())?)
    }
}
