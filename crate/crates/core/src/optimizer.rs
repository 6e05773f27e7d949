//! Two-step reconstruction.
//!
//! Step 1 ranks a precomputed collection by misfit and keeps the best `N_s`
//! samples with equal weights. Step 2 treats every circle triplet and every
//! weight of that basis as a control and runs derivative-free coordinate
//! descent over them in a fixed order: sample by sample, each circle's
//! `x01`, `x02`, `r`, then the sample's weight.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::{blend_rasters, l2_error, rasterize, Basis, Circle, CircleSample, ConductivityField};
use crate::error::{Error, Result};
use crate::measurement::MeasurementSet;
use crate::mesh::DomainSpec;
use crate::objective::{cost, Evaluator};
use crate::sampling::{uniform_in_disc, PrecomputeStore};

/// `N_s · (N_c,max · (n + 1) + 1)`: `n + 1` numbers per circle in `n`
/// dimensions plus one weight per sample.
pub fn control_dimension(n_s: usize, n_c_max: usize, n: usize) -> usize {
    n_s * (n_c_max * (n + 1) + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coordinate {
    CenterX { sample: usize, circle: usize },
    CenterY { sample: usize, circle: usize },
    Radius { sample: usize, circle: usize },
    Weight { sample: usize },
}

impl std::fmt::Display for Coordinate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Coordinate::CenterX { sample, circle } => write!(f, "s{sample}.c{circle}.x01"),
            Coordinate::CenterY { sample, circle } => write!(f, "s{sample}.c{circle}.x02"),
            Coordinate::Radius { sample, circle } => write!(f, "s{sample}.c{circle}.r"),
            Coordinate::Weight { sample } => write!(f, "s{sample}.alpha"),
        }
    }
}

/// Flat view of a basis in descent order.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    pub coordinates: Vec<Coordinate>,
    pub values: Vec<f64>,
}

impl ControlVector {
    pub fn from_basis(basis: &Basis) -> Self {
        let mut coordinates = Vec::new();
        let mut values = Vec::new();
        for (i, sample) in basis.samples.iter().enumerate() {
            for (j, c) in sample.circles.iter().enumerate() {
                coordinates.push(Coordinate::CenterX { sample: i, circle: j });
                values.push(c.x01);
                coordinates.push(Coordinate::CenterY { sample: i, circle: j });
                values.push(c.x02);
                coordinates.push(Coordinate::Radius { sample: i, circle: j });
                values.push(c.r);
            }
            coordinates.push(Coordinate::Weight { sample: i });
            values.push(basis.weights[i]);
        }
        Self { coordinates, values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Checks the weight simplex and the per-circle boxes
/// `|x0| < R + r`, `0 <= r <= radius_bound`.
pub fn is_feasible(basis: &Basis, domain_radius: f64, radius_bound: f64) -> bool {
    basis.validate().is_ok()
        && basis.samples.iter().flat_map(|s| &s.circles).all(|c| {
            c.r >= 0.0 && c.r <= radius_bound && c.center_norm() < domain_radius + c.r
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    /// Relative change of `J` between major iterations that stops the run.
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub initial_step_position: f64,
    pub initial_step_radius: f64,
    pub initial_step_weight: f64,
    pub step_shrink: f64,
    /// Smallest step for centers and radii.
    pub min_step: f64,
    /// Smallest step for weights.
    pub min_step_weight: f64,
    /// Upper bound on radii during descent.
    pub radius_bound: f64,
}

impl CdConfig {
    pub fn for_domain(radius: f64) -> Self {
        Self {
            tolerance: 1e-4,
            max_evaluations: 50_000,
            initial_step_position: 0.05 * radius,
            initial_step_radius: 0.05 * radius,
            initial_step_weight: 0.05,
            step_shrink: 0.5,
            min_step: 1e-4 * radius,
            min_step_weight: 1e-4,
            radius_bound: radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::Config("step_shrink must lie in (0, 1)".into()));
        }
        let steps = [
            self.initial_step_position,
            self.initial_step_radius,
            self.initial_step_weight,
            self.min_step,
            self.min_step_weight,
            self.radius_bound,
        ];
        if steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("steps and bounds must be positive".into()));
        }
        if self.max_evaluations == 0 {
            return Err(Error::Config("max_evaluations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative change of `J` fell below the tolerance.
    Converged,
    /// `J` reached exactly zero.
    ZeroCost,
    /// Evaluation budget used up; the best point found is returned.
    Budget,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::ZeroCost => "zero_cost",
            Termination::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub evaluations: usize,
    pub cost: f64,
    pub l2_error: Option<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveRecord {
    pub iteration: usize,
    pub coordinate: Coordinate,
    pub old: f64,
    pub new: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    /// Entry 0 is the starting point.
    pub iterations: Vec<IterationRecord>,
    pub moves: Vec<MoveRecord>,
    pub termination: Termination,
    pub evaluations: usize,
    /// Evaluations whose field matched the current one, answered without a
    /// forward solve.
    pub cached_evaluations: usize,
}

impl RunHistory {
    pub fn final_cost(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn initial_cost(&self) -> f64 {
        self.iterations.first().map_or(f64::NAN, |r| r.cost)
    }

    /// `# iteration evaluations J l2_error` table; timings are left out so
    /// identical runs give identical text.
    pub fn trace_text(&self) -> String {
        let mut s = String::from("# iteration evaluations J l2_error\n");
        for r in &self.iterations {
            let _ = write!(s, "{} {} {}", r.iteration, r.evaluations, r.cost);
            match r.l2_error {
                Some(e) => {
                    let _ = writeln!(s, " {e}");
                }
                None => s.push_str(" nan\n"),
            }
        }
        s
    }

    pub fn moves_text(&self) -> String {
        let mut s = String::from("# iteration coordinate old new J\n");
        for m in &self.moves {
            let _ = writeln!(s, "{} {} {} {} {}", m.iteration, m.coordinate, m.old, m.new, m.cost);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    pub index: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Best `N_s` samples with weights `1/N_s`.
    pub basis: Basis,
    /// Every usable record, ascending in cost; ties go to the lower index.
    pub ranking: Vec<RankedSample>,
}

/// Ranks stored samples by misfit against `observed`; no forward solves.
pub fn rank_and_select(store: &PrecomputeStore, observed: &MeasurementSet, n_s: usize) -> Result<Selection> {
    if n_s == 0 {
        return Err(Error::Config("N_s must be at least 1".into()));
    }
    let scored: Vec<Option<Result<RankedSample>>> = store
        .records
        .par_iter()
        .enumerate()
        .map(|(index, rec)| {
            rec.currents()
                .map(|d| cost(d, observed).map(|cost| RankedSample { index, cost }))
        })
        .collect();
    let mut ranking = Vec::with_capacity(scored.len());
    for s in scored.into_iter().flatten() {
        ranking.push(s?);
    }
    if ranking.len() < n_s {
        return Err(Error::NotEnoughSamples {
            needed: n_s,
            available: ranking.len(),
        });
    }
    ranking.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.index.cmp(&b.index)));
    let samples = ranking[..n_s].iter().map(|r| store.sample(r.index)).collect();
    Ok(Selection {
        basis: Basis::uniform(samples)?,
        ranking,
    })
}

/// Best-so-far cost over the collection in stored order.
pub fn ranking_prefix_trace(selection: &Selection) -> Vec<(usize, f64)> {
    let mut by_index = selection.ranking.clone();
    by_index.sort_by_key(|r| r.index);
    let mut best = f64::INFINITY;
    by_index
        .iter()
        .map(|r| {
            best = best.min(r.cost);
            (r.index, best)
        })
        .collect()
}

/// Appends zero-radius circles at random centers inside the disc until
/// every sample has `n_c_max` circles. The blended field is unchanged.
pub fn pad_basis<R: Rng + ?Sized>(basis: &Basis, n_c_max: usize, domain: &DomainSpec, rng: &mut R) -> Result<Basis> {
    let mut padded = basis.clone();
    for (i, sample) in padded.samples.iter_mut().enumerate() {
        if sample.circles.len() > n_c_max {
            return Err(Error::Config(format!(
                "sample {i} has {} circles, more than N_c,max = {n_c_max}",
                sample.circles.len()
            )));
        }
        while sample.circles.len() < n_c_max {
            let (x01, x02) = uniform_in_disc(rng, domain.radius);
            sample.circles.push(Circle::new(x01, x02, 0.0));
        }
    }
    Ok(padded)
}

/// After weight `changed` is set, rescale the others so the weights sum to
/// one. If the others summed to zero the remainder is split evenly.
pub fn restore_simplex(weights: &[f64], changed: usize, value: f64) -> Vec<f64> {
    let value = value.clamp(0.0, 1.0);
    let n = weights.len();
    if n == 1 {
        return vec![1.0];
    }
    let rest: f64 = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != changed)
        .map(|(_, w)| w)
        .sum();
    let target = 1.0 - value;
    let mut out: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if i == changed {
                value
            } else if rest > 0.0 {
                w * target / rest
            } else {
                target / (n - 1) as f64
            }
        })
        .collect();
    // Put the rounding residue on the largest other weight.
    let residue = 1.0 - out.iter().sum::<f64>();
    if residue != 0.0 {
        if let Some(k) = (0..n)
            .filter(|&i| i != changed)
            .max_by(|&a, &b| out[a].total_cmp(&out[b]))
        {
            out[k] = (out[k] + residue).clamp(0.0, 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub value: f64,
    pub cost: f64,
    /// Step size when the search stopped.
    pub step: f64,
    pub improved: bool,
    pub exhausted: bool,
}

/// Pattern search along one coordinate.
///
/// Probes `value ± step` (clipped to `[lower, upper]`) and moves to the
/// better strict improvement, doubling the step after every move and
/// multiplying it by `shrink` after every failed probe pair, until the step
/// falls below `min_step`. The objective returns `None` once the
/// evaluation budget is spent.
#[allow(clippy::too_many_arguments)]
pub fn line_search_scalar<F>(
    value: f64,
    current_cost: f64,
    (lower, upper): (f64, f64),
    step: f64,
    min_step: f64,
    shrink: f64,
    objective: &mut F,
) -> Result<LineSearchOutcome>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    let mut out = LineSearchOutcome {
        value,
        cost: current_cost,
        step,
        improved: false,
        exhausted: false,
    };
    while out.step >= min_step {
        let mut best: Option<(f64, f64)> = None;
        for dir in [1.0, -1.0] {
            let candidate = (out.value + dir * out.step).clamp(lower, upper);
            if candidate == out.value {
                continue;
            }
            match objective(candidate)? {
                None => out.exhausted = true,
                Some(c) if c < best.map_or(out.cost, |b| b.1) => best = Some((candidate, c)),
                Some(_) => {}
            }
            if out.exhausted {
                break;
            }
        }
        if let Some((v, c)) = best {
            out.value = v;
            out.cost = c;
            out.improved = true;
        }
        if out.exhausted {
            break;
        }
        if best.is_some() {
            out.step *= 2.0;
        } else {
            out.step *= shrink;
        }
    }
    Ok(out)
}

/// Mutable descent state: the current basis, its per-sample rasters and cost.
struct DescentState<'a> {
    evaluator: &'a Evaluator,
    basis: Basis,
    rasters: Vec<ConductivityField>,
    cost: f64,
    evaluations: usize,
    cached: usize,
    budget: usize,
    domain_radius: f64,
    radius_bound: f64,
}

impl DescentState<'_> {
    fn spend(&mut self) -> bool {
        if self.evaluations >= self.budget {
            return false;
        }
        self.evaluations += 1;
        true
    }

    /// Cost with sample `i` replaced by `sample`.
    fn try_sample(&mut self, i: usize, sample: &CircleSample) -> Result<Option<f64>> {
        if !self.spend() {
            return Ok(None);
        }
        debug_assert!(sample
            .circles
            .iter()
            .all(|c| c.r >= 0.0 && c.r <= self.radius_bound && c.center_norm() < self.domain_radius + c.r));
        let raster = rasterize(sample, self.evaluator.solver().mesh());
        if raster == self.rasters[i] {
            self.evaluator.record_repeat();
            self.cached += 1;
            return Ok(Some(self.cost));
        }
        let mut fields: Vec<&ConductivityField> = self.rasters.iter().collect();
        fields[i] = &raster;
        let blended = blend_refs(&fields, &self.basis.weights);
        self.evaluator.evaluate_field(&blended).map(Some)
    }

    fn try_weights(&mut self, weights: &[f64]) -> Result<Option<f64>> {
        if !self.spend() {
            return Ok(None);
        }
        if weights == self.basis.weights.as_slice() {
            self.evaluator.record_repeat();
            self.cached += 1;
            return Ok(Some(self.cost));
        }
        let blended = blend_rasters(&self.rasters, weights);
        self.evaluator.evaluate_field(&blended).map(Some)
    }

    fn field(&self) -> ConductivityField {
        blend_rasters(&self.rasters, &self.basis.weights)
    }
}

fn blend_refs(rasters: &[&ConductivityField], weights: &[f64]) -> ConductivityField {
    let n = rasters.first().map_or(0, |r| r.len());
    let mut values = vec![0.0; n];
    for (raster, &w) in rasters.iter().zip(weights) {
        for (v, r) in values.iter_mut().zip(raster.values()) {
            *v += w * r;
        }
    }
    ConductivityField::new(values)
}

/// Bounds for one coordinate given the rest of the circle, always
/// containing the current value.
fn coordinate_bounds(c: &Circle, which: Coordinate, domain_radius: f64, radius_bound: f64) -> (f64, f64) {
    // Keeps |x0| < R + r strict.
    let margin = 1e-9 * domain_radius;
    match which {
        Coordinate::CenterX { .. } | Coordinate::CenterY { .. } => {
            let other = if matches!(which, Coordinate::CenterX { .. }) { c.x02 } else { c.x01 };
            let current = if matches!(which, Coordinate::CenterX { .. }) { c.x01 } else { c.x02 };
            let reach = domain_radius + c.r - margin;
            let half = (reach * reach - other * other).max(0.0).sqrt();
            ((-half).min(current), half.max(current))
        }
        Coordinate::Radius { .. } => {
            let lower = (c.center_norm() - domain_radius + margin).max(0.0);
            (lower.min(c.r), radius_bound.max(c.r))
        }
        Coordinate::Weight { .. } => (0.0, 1.0),
    }
}

/// Coordinate descent over a padded basis.
///
/// When `truth` is given, the L2 error of the blended field is recorded
/// after every major iteration.
pub fn coordinate_descent(
    basis: &Basis,
    evaluator: &Evaluator,
    domain: &DomainSpec,
    cfg: &CdConfig,
    truth: Option<&ConductivityField>,
) -> Result<(Basis, RunHistory)> {
    cfg.validate()?;
    basis.validate()?;
    if !is_feasible(basis, domain.radius, cfg.radius_bound) {
        return Err(Error::Config("initial basis violates the control bounds".into()));
    }
    let mesh = evaluator.solver().mesh();
    let start = Instant::now();
    let mut state = DescentState {
        evaluator,
        basis: basis.clone(),
        rasters: basis.samples.iter().map(|s| rasterize(s, mesh)).collect(),
        cost: 0.0,
        evaluations: 0,
        cached: 0,
        budget: cfg.max_evaluations,
        domain_radius: domain.radius,
        radius_bound: cfg.radius_bound,
    };
    state.spend();
    state.cost = evaluator.evaluate_field(&state.field())?;

    let l2 = |state: &DescentState| -> Result<Option<f64>> {
        truth.map(|t| l2_error(&state.field(), t, mesh)).transpose()
    };
    let mut history = RunHistory {
        iterations: vec![IterationRecord {
            iteration: 0,
            evaluations: state.evaluations,
            cost: state.cost,
            l2_error: l2(&state)?,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }],
        moves: Vec::new(),
        termination: Termination::Budget,
        evaluations: 0,
        cached_evaluations: 0,
    };

    let n_s = state.basis.len();
    let mut k = 0;
    'major: loop {
        k += 1;
        let previous = state.cost;
        let mut exhausted = false;
        'sweep: for i in 0..n_s {
            for j in 0..state.basis.samples[i].circles.len() {
                for which in [
                    Coordinate::CenterX { sample: i, circle: j },
                    Coordinate::CenterY { sample: i, circle: j },
                    Coordinate::Radius { sample: i, circle: j },
                ] {
                    let circle = state.basis.samples[i].circles[j];
                    let bounds = coordinate_bounds(&circle, which, domain.radius, cfg.radius_bound);
                    let (old, step) = match which {
                        Coordinate::CenterX { .. } => (circle.x01, cfg.initial_step_position),
                        Coordinate::CenterY { .. } => (circle.x02, cfg.initial_step_position),
                        _ => (circle.r, cfg.initial_step_radius),
                    };
                    let with_value = |v: f64| {
                        let mut c = circle;
                        match which {
                            Coordinate::CenterX { .. } => c.x01 = v,
                            Coordinate::CenterY { .. } => c.x02 = v,
                            _ => c.r = v,
                        }
                        c
                    };
                    let current = state.cost;
                    let outcome = line_search_scalar(
                        old,
                        current,
                        bounds,
                        step,
                        cfg.min_step,
                        cfg.step_shrink,
                        &mut |v| {
                            let mut trial = state.basis.samples[i].clone();
                            trial.circles[j] = with_value(v);
                            state.try_sample(i, &trial)
                        },
                    )?;
                    if outcome.improved {
                        state.basis.samples[i].circles[j] = with_value(outcome.value);
                        state.rasters[i] = rasterize(&state.basis.samples[i], mesh);
                        state.cost = outcome.cost;
                        history.moves.push(MoveRecord {
                            iteration: k,
                            coordinate: which,
                            old,
                            new: outcome.value,
                            cost: outcome.cost,
                        });
                    }
                    if outcome.exhausted {
                        exhausted = true;
                        break 'sweep;
                    }
                }
            }

            let which = Coordinate::Weight { sample: i };
            let old = state.basis.weights[i];
            let weights = state.basis.weights.clone();
            let outcome = line_search_scalar(
                old,
                state.cost,
                (0.0, 1.0),
                cfg.initial_step_weight,
                cfg.min_step_weight,
                cfg.step_shrink,
                &mut |v| state.try_weights(&restore_simplex(&weights, i, v)),
            )?;
            if outcome.improved {
                state.basis.weights = restore_simplex(&weights, i, outcome.value);
                state.cost = outcome.cost;
                history.moves.push(MoveRecord {
                    iteration: k,
                    coordinate: which,
                    old,
                    new: outcome.value,
                    cost: outcome.cost,
                });
            }
            if outcome.exhausted {
                exhausted = true;
                break 'sweep;
            }
        }

        history.iterations.push(IterationRecord {
            iteration: k,
            evaluations: state.evaluations,
            cost: state.cost,
            l2_error: l2(&state)?,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if exhausted {
            history.termination = Termination::Budget;
            break 'major;
        }
        if state.cost == 0.0 {
            history.termination = Termination::ZeroCost;
            break 'major;
        }
        if ((state.cost - previous) / state.cost).abs() < cfg.tolerance {
            history.termination = Termination::Converged;
            break 'major;
        }
        if state.evaluations >= state.budget {
            history.termination = Termination::Budget;
            break 'major;
        }
    }
    history.evaluations = state.evaluations;
    history.cached_evaluations = state.cached;
    Ok((state.basis, history))
}
