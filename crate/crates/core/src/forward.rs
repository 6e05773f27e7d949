//! Finite-element solver for the complete electrode model.
//!
//! The weak form is
//!
//! ```text
//! ∫ σ ∇u·∇v dx + Σ_l (1/Z_l) ∫_{E_l} u v ds = Σ_l (U_l/Z_l) ∫_{E_l} v ds
//! ```
//!
//! with piecewise-constant σ and continuous P1 or P2 potentials. The Robin
//! terms make the matrix symmetric positive definite, so one sparse
//! Cholesky factorization per conductivity serves every voltage pattern.
//! The sparsity pattern and its symbolic factorization depend only on the
//! mesh and are built once per [`ForwardSolver`].

use std::collections::HashMap;
use std::sync::{Arc, Once};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::excitation::PatternSet;
use crate::measurement::MeasurementSet;
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ElementDegree {
    #[default]
    #[serde(rename = "p1")]
    Linear,
    #[serde(rename = "p2")]
    Quadratic,
}

impl ElementDegree {
    fn local_dofs(self) -> usize {
        match self {
            ElementDegree::Linear => 3,
            ElementDegree::Quadratic => 6,
        }
    }
}

/// Contact impedance of every electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSet {
    z: Vec<f64>,
}

impl ImpedanceSet {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some(bad) = z.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            return Err(Error::Config(format!("contact impedance must be positive, got {bad}")));
        }
        Ok(Self { z })
    }

    pub fn uniform(m: usize, z: f64) -> Result<Self> {
        ImpedanceSet::new(vec![z; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Nodal potential for one voltage pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    values: Vec<f64>,
}

impl PotentialField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Mesh-dependent part of the discretization.
#[derive(Debug)]
struct FemSpace {
    degree: ElementDegree,
    dof_count: usize,
    element_dofs: Vec<usize>,
    /// Per element, `stride²` entries of `∫∇φ_a·∇φ_b` (σ = 1).
    local_stiffness: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Per element, the value slot of each local `(a, b)` pair.
    element_slots: Vec<usize>,
    /// Matrix values holding only the Robin terms.
    robin_values: Vec<f64>,
    /// Per electrode, `(dof, ∫_{E_l} φ_dof ds)`.
    electrode_loads: Vec<Vec<(usize, f64)>>,
    electrode_lengths: Vec<f64>,
    symbolic: SymbolicLlt<usize>,
}

impl FemSpace {
    fn stride(&self) -> usize {
        self.degree.local_dofs()
    }

    fn symbolic_ref(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(
            self.dof_count,
            self.dof_count,
            &self.col_ptr,
            None,
            &self.row_idx,
        )
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|i| range.start + i)
    }

    fn build(mesh: &Mesh, impedance: &ImpedanceSet, degree: ElementDegree) -> Result<Self> {
        let stride = degree.local_dofs();
        let nv = mesh.vertices().len();
        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        let mut dof_count = nv;
        let mut element_dofs = Vec::with_capacity(mesh.element_count() * stride);
        for t in mesh.triangles() {
            element_dofs.extend_from_slice(t);
            if degree == ElementDegree::Quadratic {
                for (i, j) in [(1, 2), (2, 0), (0, 1)] {
                    let key = (t[i].min(t[j]), t[i].max(t[j]));
                    let dof = *edge_dof.entry(key).or_insert_with(|| {
                        dof_count += 1;
                        dof_count - 1
                    });
                    element_dofs.push(dof);
                }
            }
        }

        let mut local_stiffness = Vec::with_capacity(mesh.element_count() * stride * stride);
        for t in mesh.triangles() {
            let p = t.map(|v| mesh.vertices()[v]);
            match degree {
                ElementDegree::Linear => local_stiffness.extend(p1_stiffness(p)),
                ElementDegree::Quadratic => local_stiffness.extend(p2_stiffness(p)),
            }
        }

        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); dof_count];
        for dofs in element_dofs.chunks(stride) {
            for &a in dofs {
                for &b in dofs {
                    columns[b].push(a);
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(dof_count + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }

        let m = mesh.electrode_count();
        let mut electrode_loads: Vec<HashMap<usize, f64>> = vec![HashMap::new(); m];
        let mut electrode_lengths = vec![0.0; m];
        let mut robin: Vec<(usize, usize, f64)> = Vec::new();
        for edge in mesh.boundary_edges() {
            let BoundaryTag::Electrode(l) = edge.tag else {
                continue;
            };
            let len = mesh.edge_length(edge);
            electrode_lengths[l] += len;
            let inv_z = 1.0 / impedance.values()[l];
            let (dofs, mass, load): (Vec<usize>, Vec<f64>, Vec<f64>) = match degree {
                ElementDegree::Linear => (
                    vec![edge.a, edge.b],
                    vec![2.0, 1.0, 1.0, 2.0].into_iter().map(|c| c * len / 6.0).collect(),
                    vec![len / 2.0, len / 2.0],
                ),
                ElementDegree::Quadratic => {
                    let mid = edge_dof[&(edge.a.min(edge.b), edge.a.max(edge.b))];
                    (
                        vec![edge.a, edge.b, mid],
                        [4.0, -1.0, 2.0, -1.0, 4.0, 2.0, 2.0, 2.0, 16.0]
                            .into_iter()
                            .map(|c| c * len / 30.0)
                            .collect(),
                        vec![len / 6.0, len / 6.0, 2.0 * len / 3.0],
                    )
                }
            };
            let n = dofs.len();
            for a in 0..n {
                *electrode_loads[l].entry(dofs[a]).or_default() += load[a];
                for b in 0..n {
                    robin.push((dofs[a], dofs[b], inv_z * mass[a * n + b]));
                }
            }
        }
        let electrode_loads = electrode_loads
            .into_iter()
            .map(|map| {
                let mut v: Vec<_> = map.into_iter().collect();
                v.sort_unstable_by_key(|&(d, _)| d);
                v
            })
            .collect();

        let symbolic_pattern =
            SymbolicSparseColMatRef::new_checked(dof_count, dof_count, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLlt::try_new(symbolic_pattern, Side::Lower)
            .map_err(|e| Error::Factorization(format!("symbolic analysis: {e:?}")))?;

        let mut space = FemSpace {
            degree,
            dof_count,
            element_dofs,
            local_stiffness,
            col_ptr,
            row_idx,
            element_slots: Vec::new(),
            robin_values: Vec::new(),
            electrode_loads,
            electrode_lengths,
            symbolic,
        };
        let mut slots = Vec::with_capacity(space.element_dofs.len() * stride);
        for dofs in space.element_dofs.chunks(stride) {
            for &a in dofs {
                for &b in dofs {
                    slots.push(space.slot(a, b).expect("element pair in pattern"));
                }
            }
        }
        space.element_slots = slots;
        let mut robin_values = vec![0.0; space.row_idx.len()];
        for (a, b, v) in robin {
            let s = space.slot(a, b).expect("boundary pair in pattern");
            robin_values[s] += v;
        }
        space.robin_values = robin_values;
        Ok(space)
    }
}

fn barycentric_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        g[i] = [(p[j][1] - p[k][1]) / area2, (p[k][0] - p[j][0]) / area2];
    }
    (g, 0.5 * area2)
}

fn p1_stiffness(p: [[f64; 2]; 3]) -> [f64; 9] {
    let (g, area) = barycentric_gradients(p);
    let mut k = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            k[a * 3 + b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

/// Local order: vertices 0, 1, 2 then midpoints of edges (1,2), (2,0), (0,1).
/// Edge-midpoint quadrature is exact for the quadratic integrand.
fn p2_stiffness(p: [[f64; 2]; 3]) -> [f64; 36] {
    let (g, area) = barycentric_gradients(p);
    let quad = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    let mut k = [0.0; 36];
    for lam in quad {
        let mut grads = [[0.0; 2]; 6];
        for i in 0..3 {
            let c = 4.0 * lam[i] - 1.0;
            grads[i] = [c * g[i][0], c * g[i][1]];
        }
        for (n, (i, j)) in [(1usize, 2usize), (2, 0), (0, 1)].into_iter().enumerate() {
            grads[3 + n] = [
                4.0 * (lam[j] * g[i][0] + lam[i] * g[j][0]),
                4.0 * (lam[j] * g[i][1] + lam[i] * g[j][1]),
            ];
        }
        for a in 0..6 {
            for b in 0..6 {
                k[a * 6 + b] +=
                    area / 3.0 * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
    }
    k
}

static SEQUENTIAL: Once = Once::new();

/// Forward map from a conductivity field to electrode currents on one mesh.
///
/// Cheap to clone; clones share the mesh and the symbolic factorization.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    mesh: Arc<Mesh>,
    impedance: ImpedanceSet,
    space: Arc<FemSpace>,
}

impl ForwardSolver {
    pub fn new(mesh: Arc<Mesh>, impedance: ImpedanceSet, degree: ElementDegree) -> Result<Self> {
        // Parallelism lives at the sample level; keep the factorization
        // sequential and bitwise reproducible.
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        if impedance.len() != mesh.electrode_count() {
            return Err(Error::Dimension {
                what: "contact impedances",
                expected: mesh.electrode_count(),
                got: impedance.len(),
            });
        }
        let space = FemSpace::build(&mesh, &impedance, degree)?;
        Ok(Self {
            mesh,
            impedance,
            space: Arc::new(space),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn impedance(&self) -> &ImpedanceSet {
        &self.impedance
    }

    pub fn degree(&self) -> ElementDegree {
        self.space.degree
    }

    pub fn dof_count(&self) -> usize {
        self.space.dof_count
    }

    /// Polygonal electrode lengths used by the current integrals.
    pub fn electrode_lengths(&self) -> &[f64] {
        &self.space.electrode_lengths
    }

    /// Assemble and factorize the system for one conductivity field.
    pub fn assemble(&self, sigma: &ConductivityField) -> Result<LinearSystem> {
        let space = &self.space;
        let values_in = sigma.values();
        if values_in.len() != self.mesh.element_count() {
            return Err(Error::Dimension {
                what: "conductivity values",
                expected: self.mesh.element_count(),
                got: values_in.len(),
            });
        }
        if let Some((element, &value)) = values_in
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveConductivity { element, value });
        }
        let s2 = space.stride() * space.stride();
        let mut values = space.robin_values.clone();
        for (e, &s) in values_in.iter().enumerate() {
            let slots = &space.element_slots[e * s2..(e + 1) * s2];
            let local = &space.local_stiffness[e * s2..(e + 1) * s2];
            for (&slot, &k) in slots.iter().zip(local) {
                values[slot] += s * k;
            }
        }
        let matrix = SparseColMatRef::new(space.symbolic_ref(), &values);
        let llt = Llt::try_new_with_symbolic(space.symbolic.clone(), matrix, Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(LinearSystem {
            space: Arc::clone(space),
            impedance: self.impedance.clone(),
            values,
            llt,
        })
    }

    /// `I^k_l = ∫_{E_l} (U^k_l - u^k) / Z_l ds`, exact for the trace degree.
    pub fn compute_currents(
        &self,
        fields: &[PotentialField],
        patterns: &PatternSet,
    ) -> Result<MeasurementSet> {
        let m = self.mesh.electrode_count();
        if patterns.electrode_count() != m || fields.len() != patterns.pattern_count() {
            return Err(Error::Dimension {
                what: "potential fields per pattern",
                expected: patterns.pattern_count(),
                got: fields.len(),
            });
        }
        let mut out = MeasurementSet::zeros(patterns.pattern_count(), m);
        for (k, (field, pattern)) in fields.iter().zip(patterns.patterns()).enumerate() {
            for l in 0..m {
                let trace: f64 = self.space.electrode_loads[l]
                    .iter()
                    .map(|&(d, w)| w * field.values[d])
                    .sum();
                let value = (pattern.values()[l] * self.space.electrode_lengths[l] - trace)
                    / self.impedance.values()[l];
                out.set(k, l, value);
            }
        }
        Ok(out)
    }

    /// Assemble, solve every pattern and integrate currents.
    pub fn simulate(&self, sigma: &ConductivityField, patterns: &PatternSet) -> Result<MeasurementSet> {
        let system = self.assemble(sigma)?;
        let fields = system.solve_patterns(patterns)?;
        self.compute_currents(&fields, patterns)
    }

    /// Electrode conductance matrix `G` (row-major `m×m`) with `I = G·U`,
    /// projected onto zero-sum drives: `P G P`, `P = I - 11ᵀ/m`.
    pub fn conductance_matrix(&self, sigma: &ConductivityField) -> Result<Vec<f64>> {
        let system = self.assemble(sigma)?;
        let m = self.mesh.electrode_count();
        let z = self.impedance.values();
        let mut rhs = Mat::<f64>::zeros(self.space.dof_count, m);
        for j in 0..m {
            for &(d, w) in &self.space.electrode_loads[j] {
                rhs[(d, j)] += w / z[j];
            }
        }
        system.llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        let mut g = vec![0.0; m * m];
        for l in 0..m {
            for j in 0..m {
                let trace: f64 = self.space.electrode_loads[l]
                    .iter()
                    .map(|&(d, w)| w * rhs[(d, j)])
                    .sum();
                let direct = if l == j { self.space.electrode_lengths[l] } else { 0.0 };
                g[l * m + j] = (direct - trace) / z[l];
            }
        }
        let mf = m as f64;
        let row_mean: Vec<f64> = (0..m).map(|l| g[l * m..(l + 1) * m].iter().sum::<f64>() / mf).collect();
        let col_mean: Vec<f64> = (0..m).map(|j| (0..m).map(|l| g[l * m + j]).sum::<f64>() / mf).collect();
        let mean = row_mean.iter().sum::<f64>() / mf;
        Ok((0..m * m)
            .map(|i| g[i] - row_mean[i / m] - col_mean[i % m] + mean)
            .collect())
    }
}

/// A factorized system for one conductivity field.
pub struct LinearSystem {
    space: Arc<FemSpace>,
    impedance: ImpedanceSet,
    values: Vec<f64>,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for LinearSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSystem")
            .field("dofs", &self.space.dof_count)
            .field("nonzeros", &self.values.len())
            .finish()
    }
}

impl LinearSystem {
    pub fn dof_count(&self) -> usize {
        self.space.dof_count
    }

    /// Stored entries `(row, col, value)` of the full symmetric matrix.
    pub fn matrix_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.space.dof_count).flat_map(move |col| {
            (self.space.col_ptr[col]..self.space.col_ptr[col + 1])
                .map(move |s| (self.space.row_idx[s], col, self.values[s]))
        })
    }

    /// Load vector `b(U)_d = Σ_l (U_l/Z_l) ∫_{E_l} φ_d ds`.
    pub fn rhs(&self, potentials: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.space.dof_count];
        for (l, loads) in self.space.electrode_loads.iter().enumerate() {
            let scale = potentials[l] / self.impedance.values()[l];
            for &(d, w) in loads {
                b[d] += scale * w;
            }
        }
        b
    }

    /// One potential field per pattern from a single multi-column solve.
    pub fn solve_patterns(&self, patterns: &PatternSet) -> Result<Vec<PotentialField>> {
        let m = self.space.electrode_loads.len();
        if patterns.electrode_count() != m {
            return Err(Error::Dimension {
                what: "pattern electrode count",
                expected: m,
                got: patterns.electrode_count(),
            });
        }
        let n = self.space.dof_count;
        let count = patterns.pattern_count();
        let mut rhs = Mat::<f64>::zeros(n, count);
        for (k, pattern) in patterns.patterns().iter().enumerate() {
            for (l, loads) in self.space.electrode_loads.iter().enumerate() {
                let scale = pattern.values()[l] / self.impedance.values()[l];
                if scale == 0.0 {
                    continue;
                }
                for &(d, w) in loads {
                    rhs[(d, k)] += scale * w;
                }
            }
        }
        self.llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        let fields: Vec<PotentialField> = (0..count)
            .map(|k| PotentialField {
                values: (0..n).map(|d| rhs[(d, k)]).collect(),
            })
            .collect();
        if fields.iter().any(|f| f.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Factorization("non-finite potential".into()));
        }
        Ok(fields)
    }
}
