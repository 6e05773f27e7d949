//! Disc triangulation with electrode arcs tagged on the boundary.
//!
//! The generator lays out concentric rings of vertices and stitches
//! neighbouring rings together. The outer ring is built arc by arc so every
//! electrode starts and ends on a vertex; no boundary edge straddles an
//! electrode and a gap.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio::{self, Lines};

/// Disc radius and electrode layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub radius: f64,
    pub electrode_count: usize,
    /// Angular half-width of each electrode, radians.
    pub electrode_half_width: f64,
    /// Angle of the center of electrode 0, radians.
    #[serde(default)]
    pub electrode_offset: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            radius: 0.1,
            electrode_count: 16,
            electrode_half_width: 0.12,
            electrode_offset: 0.0,
        }
    }
}

impl DomainSpec {
    pub fn new(radius: f64, electrode_count: usize, electrode_half_width: f64) -> Self {
        Self {
            radius,
            electrode_count,
            electrode_half_width,
            electrode_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.electrode_count < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 electrodes, got {}",
                self.electrode_count
            )));
        }
        let w = self.electrode_half_width;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "electrode half-width must be positive, got {w}"
            )));
        }
        let pitch = 2.0 * PI / self.electrode_count as f64;
        if 2.0 * w >= pitch {
            return Err(Error::InvalidDomain(format!(
                "electrodes overlap: 2w = {} >= 2pi/m = {pitch}",
                2.0 * w
            )));
        }
        if !self.electrode_offset.is_finite() {
            return Err(Error::InvalidDomain("electrode offset is not finite".into()));
        }
        Ok(())
    }

    /// Center angle of electrode `l` (0-based).
    pub fn electrode_center(&self, l: usize) -> f64 {
        self.electrode_offset + 2.0 * PI * l as f64 / self.electrode_count as f64
    }

    /// Fraction of the boundary covered by electrodes, `m·2w / 2π`.
    pub fn coverage_fraction(&self) -> f64 {
        self.electrode_count as f64 * 2.0 * self.electrode_half_width / (2.0 * PI)
    }

    /// Exact arc length of one electrode, `2wR`.
    pub fn electrode_arc_length(&self) -> f64 {
        2.0 * self.electrode_half_width * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Gap,
    /// 0-based electrode index.
    Electrode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Immutable triangulation of the disc.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: DomainSpec,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    element_areas: Vec<f64>,
    element_centroids: Vec<[f64; 2]>,
}

impl Mesh {
    /// Build from raw tables, computing per-element geometry.
    pub fn from_parts(
        domain: DomainSpec,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        domain.validate()?;
        let n = vertices.len();
        let mut element_areas = Vec::with_capacity(triangles.len());
        let mut element_centroids = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidDomain(format!(
                    "triangle {e} references a missing vertex"
                )));
            }
            let [p, q, r] = t.map(|v| vertices[v]);
            let area = signed_area(p, q, r);
            if !(area > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "triangle {e} has non-positive signed area {area}"
                )));
            }
            element_areas.push(area);
            element_centroids.push([(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]);
        }
        for edge in &boundary_edges {
            if edge.a >= n || edge.b >= n {
                return Err(Error::InvalidDomain("boundary edge references a missing vertex".into()));
            }
            if let BoundaryTag::Electrode(l) = edge.tag {
                if l >= domain.electrode_count {
                    return Err(Error::ElectrodeIndex {
                        index: l,
                        count: domain.electrode_count,
                    });
                }
            }
        }
        Ok(Self {
            domain,
            vertices,
            triangles,
            boundary_edges,
            element_areas,
            element_centroids,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn element_centroids(&self) -> &[[f64; 2]] {
        &self.element_centroids
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn electrode_count(&self) -> usize {
        self.domain.electrode_count
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [x0, y0] = self.vertices[edge.a];
        let [x1, y1] = self.vertices[edge.b];
        (x1 - x0).hypot(y1 - y0)
    }

    /// Boundary edges tagged with electrode `l` (0-based).
    pub fn electrode_edges(&self, l: usize) -> Result<Vec<BoundaryEdge>> {
        if l >= self.domain.electrode_count {
            return Err(Error::ElectrodeIndex {
                index: l,
                count: self.domain.electrode_count,
            });
        }
        Ok(self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Electrode(l))
            .copied()
            .collect())
    }

    /// Polygonal length of electrode `l`.
    pub fn electrode_length(&self, l: usize) -> Result<f64> {
        Ok(self
            .electrode_edges(l)?
            .iter()
            .map(|e| self.edge_length(e))
            .sum())
    }

    /// Share of the polygonal boundary length tagged as electrode.
    pub fn electrode_coverage(&self) -> f64 {
        let (mut covered, mut total) = (0.0, 0.0);
        for e in &self.boundary_edges {
            let len = self.edge_length(e);
            total += len;
            if matches!(e.tag, BoundaryTag::Electrode(_)) {
                covered += len;
            }
        }
        covered / total
    }

    /// Serialize to the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let d = &self.domain;
        let mut s = String::new();
        s.push_str("# eit-sbp mesh v1\n");
        s.push_str("# domain: radius electrode_count electrode_half_width electrode_offset\n");
        let _ = writeln!(
            s,
            "domain {} {} {} {}",
            d.radius, d.electrode_count, d.electrode_half_width, d.electrode_offset
        );
        s.push_str("# vertices <count>, then one `x y` row per vertex\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for [x, y] in &self.vertices {
            let _ = writeln!(s, "{x} {y}");
        }
        s.push_str("# triangles <count>, then one `a b c` row (counter-clockwise, 0-based)\n");
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for [a, b, c] in &self.triangles {
            let _ = writeln!(s, "{a} {b} {c}");
        }
        s.push_str("# boundary_edges <count>, then one `a b tag` row; tag is `gap` or an electrode index\n");
        let _ = writeln!(s, "boundary_edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            match e.tag {
                BoundaryTag::Gap => {
                    let _ = writeln!(s, "{} {} gap", e.a, e.b);
                }
                BoundaryTag::Electrode(l) => {
                    let _ = writeln!(s, "{} {} {l}", e.a, e.b);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, origin);
        let head = lines.expect_keyword("domain")?;
        let domain = DomainSpec {
            radius: lines.field(&head, 1)?,
            electrode_count: lines.field(&head, 2)?,
            electrode_half_width: lines.field(&head, 3)?,
            electrode_offset: lines.field(&head, 4)?,
        };
        let count: usize = lines.count_of("vertices")?;
        let mut vertices = Vec::with_capacity(count);
        for _ in 0..count {
            let row = lines.next_row()?;
            vertices.push([lines.field(&row, 0)?, lines.field(&row, 1)?]);
        }
        let count: usize = lines.count_of("triangles")?;
        let mut triangles = Vec::with_capacity(count);
        for _ in 0..count {
            let row = lines.next_row()?;
            triangles.push([
                lines.field(&row, 0)?,
                lines.field(&row, 1)?,
                lines.field(&row, 2)?,
            ]);
        }
        let count: usize = lines.count_of("boundary_edges")?;
        let mut boundary_edges = Vec::with_capacity(count);
        for _ in 0..count {
            let row = lines.next_row()?;
            let tag = match row.get(2).copied() {
                Some("gap") => BoundaryTag::Gap,
                _ => BoundaryTag::Electrode(lines.field(&row, 2)?),
            };
            boundary_edges.push(BoundaryEdge {
                a: lines.field(&row, 0)?,
                b: lines.field(&row, 1)?,
                tag,
            });
        }
        Mesh::from_parts(domain, vertices, triangles, boundary_edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Mesh::from_text(&textio::read_file(path)?, path)
    }

    /// Short content hash of the text serialization.
    pub fn content_hash(&self) -> String {
        textio::short_hash(self.to_text().as_bytes())
    }
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

/// Triangulate the disc with roughly `target_elements` triangles.
///
/// The result is deterministic in `(spec, target_elements)`.
pub fn build_disc_mesh(spec: &DomainSpec, target_elements: usize) -> Result<Mesh> {
    spec.validate()?;
    if target_elements < 16 {
        return Err(Error::InvalidDomain(format!(
            "target_elements must be at least 16, got {target_elements}"
        )));
    }
    // Ring i carries about density·i vertices, giving density·rings² triangles.
    let rings = ((target_elements as f64 / 6.0).sqrt().round() as usize).max(1);
    let density = target_elements as f64 / (rings * rings) as f64;

    let mut vertices: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_nodes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(rings);

    for i in 1..rings {
        let count = ((density * i as f64).round() as usize).max(3);
        let radius = spec.radius * i as f64 / rings as f64;
        let shift = if i % 2 == 1 { 0.5 } else { 0.0 };
        let mut ring = Vec::with_capacity(count);
        for k in 0..count {
            let theta = 2.0 * PI * (k as f64 + shift) / count as f64;
            ring.push((vertices.len(), theta));
            vertices.push([radius * theta.cos(), radius * theta.sin()]);
        }
        ring_nodes.push(ring);
    }

    // Outer ring: each electrode arc and each gap is split uniformly, so the
    // arc endpoints at center ± w are always vertices.
    let m = spec.electrode_count;
    let w = spec.electrode_half_width;
    let spacing = 2.0 * PI / (density * rings as f64);
    let gap = 2.0 * PI / m as f64 - 2.0 * w;
    let arc_segments = ((2.0 * w / spacing).round() as usize).max(1);
    let gap_segments = ((gap / spacing).round() as usize).max(1);
    let mut outer = Vec::with_capacity(m * (arc_segments + gap_segments));
    let mut outer_tags = Vec::with_capacity(outer.capacity());
    for l in 0..m {
        let start = spec.electrode_center(l) - w;
        for s in 0..arc_segments {
            let theta = start + 2.0 * w * s as f64 / arc_segments as f64;
            outer.push(theta);
            outer_tags.push(BoundaryTag::Electrode(l));
        }
        let gap_start = start + 2.0 * w;
        for s in 0..gap_segments {
            let theta = gap_start + gap * s as f64 / gap_segments as f64;
            outer.push(theta);
            outer_tags.push(BoundaryTag::Gap);
        }
    }
    let mut ring = Vec::with_capacity(outer.len());
    for &theta in &outer {
        ring.push((vertices.len(), theta));
        vertices.push([spec.radius * theta.cos(), spec.radius * theta.sin()]);
    }
    let boundary_edges = (0..ring.len())
        .map(|k| BoundaryEdge {
            a: ring[k].0,
            b: ring[(k + 1) % ring.len()].0,
            tag: outer_tags[k],
        })
        .collect();
    ring_nodes.push(ring);

    let mut triangles = Vec::with_capacity(target_elements + target_elements / 4);
    let first = &ring_nodes[0];
    for k in 0..first.len() {
        triangles.push([0, first[k].0, first[(k + 1) % first.len()].0]);
    }
    for pair in ring_nodes.windows(2) {
        stitch_rings(&pair[0], &pair[1], &mut triangles);
    }
    for t in triangles.iter_mut() {
        let [p, q, r] = t.map(|v| vertices[v]);
        if signed_area(p, q, r) < 0.0 {
            t.swap(1, 2);
        }
    }
    Mesh::from_parts(*spec, vertices, triangles, boundary_edges)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Fill the annulus between two rings of `(vertex, angle)` pairs, each in
/// counter-clockwise order, advancing along whichever ring's next vertex
/// comes first in angle.
fn stitch_rings(inner: &[(usize, f64)], outer: &[(usize, f64)], out: &mut Vec<[usize; 3]>) {
    let p = inner.len();
    let q = outer.len();
    let a0 = inner[0].1;
    let j0 = (0..q)
        .min_by(|&x, &y| {
            wrap_angle(outer[x].1 - a0)
                .abs()
                .total_cmp(&wrap_angle(outer[y].1 - a0).abs())
        })
        .unwrap_or(0);
    let b0 = a0 + wrap_angle(outer[j0].1 - a0);
    let tau = 2.0 * PI;
    let inner_angle: Vec<f64> = (0..=p)
        .map(|i| match i {
            0 => a0,
            i if i == p => a0 + tau,
            i => a0 + (inner[i].1 - a0).rem_euclid(tau),
        })
        .collect();
    let outer_angle: Vec<f64> = (0..=q)
        .map(|j| match j {
            0 => b0,
            j if j == q => b0 + tau,
            j => b0 + (outer[(j0 + j) % q].1 - b0).rem_euclid(tau),
        })
        .collect();
    let (mut i, mut j) = (0, 0);
    while i < p || j < q {
        let advance_inner = j == q || (i < p && inner_angle[i + 1] < outer_angle[j + 1]);
        let vi = inner[i % p].0;
        let vj = outer[(j0 + j) % q].0;
        if advance_inner {
            out.push([vi, vj, inner[(i + 1) % p].0]);
            i += 1;
        } else {
            out.push([vi, vj, outer[(j0 + j + 1) % q].0]);
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn paper_domain() -> DomainSpec {
        DomainSpec::new(0.1, 16, 0.12)
    }

    #[test]
    fn rejects_overlapping_electrodes() {
        let spec = DomainSpec::new(0.1, 16, 0.2);
        assert!(matches!(build_disc_mesh(&spec, 500), Err(Error::InvalidDomain(_))));
        assert!(DomainSpec::new(0.1, 1, 0.1).validate().is_err());
        assert!(DomainSpec::new(-1.0, 4, 0.1).validate().is_err());
        assert!(build_disc_mesh(&paper_domain(), 10).is_err());
    }

    #[test]
    fn reference_mesh_has_tagged_arcs() {
        let spec = paper_domain();
        let mesh = build_disc_mesh(&spec, 7730).unwrap();
        let n = mesh.element_count() as f64;
        assert!((n - 7730.0).abs() <= 0.2 * 7730.0, "{n}");
        for l in 0..16 {
            let len = mesh.electrode_length(l).unwrap();
            assert!((len - 0.024).abs() < 0.024 * 0.01, "electrode {l}: {len}");
        }
        assert!((spec.coverage_fraction() - 0.611).abs() < 0.001);
        assert!((mesh.electrode_coverage() - 0.611).abs() < 0.005);
    }

    #[test]
    fn minimal_configuration() {
        let spec = DomainSpec::new(1.0, 2, 0.1);
        let mesh = build_disc_mesh(&spec, 50).unwrap();
        let n = mesh.element_count() as f64;
        assert!((n - 50.0).abs() <= 10.0, "{n}");
        assert!(!mesh.electrode_edges(0).unwrap().is_empty());
        assert!(!mesh.electrode_edges(1).unwrap().is_empty());
        let small = build_disc_mesh(&spec, 16).unwrap();
        assert!((small.element_count() as f64 - 16.0).abs() <= 3.2);
    }

    #[test]
    fn electrode_index_out_of_range() {
        let mesh = build_disc_mesh(&paper_domain(), 500).unwrap();
        assert!(matches!(
            mesh.electrode_edges(16),
            Err(Error::ElectrodeIndex { index: 16, count: 16 })
        ));
    }

    #[test]
    fn electrode_edge_length_matches_arc_formula() {
        // Polygonal length of an arc split into s chords: 2Rs·sin(w/s).
        let spec = paper_domain();
        let mesh = build_disc_mesh(&spec, 2000).unwrap();
        let edges = mesh.electrode_edges(0).unwrap();
        let s = edges.len() as f64;
        let chords = 2.0 * spec.radius * s * (spec.electrode_half_width / s).sin();
        let len: f64 = edges.iter().map(|e| mesh.edge_length(e)).sum();
        assert!((len - chords).abs() < 1e-12);
        assert!((len - spec.electrode_arc_length()).abs() / spec.electrode_arc_length() < 0.01);
    }

    #[test]
    fn boundary_is_a_closed_partitioned_loop() {
        let mesh = build_disc_mesh(&paper_domain(), 2000).unwrap();
        let mut next = HashMap::new();
        for e in mesh.boundary_edges() {
            assert!(next.insert(e.a, e.b).is_none());
            let [x, y] = mesh.vertices()[e.a];
            assert!((x.hypot(y) - 0.1).abs() < 1e-12);
        }
        let start = mesh.boundary_edges()[0].a;
        let mut v = start;
        for _ in 0..mesh.boundary_edges().len() {
            v = next[&v];
        }
        assert_eq!(v, start);

        let mut total = 0;
        for l in 0..16 {
            total += mesh.electrode_edges(l).unwrap().len();
        }
        let gaps = mesh
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::Gap)
            .count();
        assert_eq!(total + gaps, mesh.boundary_edges().len());
    }

    #[test]
    fn mesh_is_conforming() {
        // Interior edges are shared by exactly two triangles, boundary edges
        // by one, and every boundary edge shows up in the tagged list.
        let mesh = build_disc_mesh(&paper_domain(), 1200).unwrap();
        let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary: std::collections::HashSet<_> = mesh
            .boundary_edges()
            .iter()
            .map(|e| (e.a.min(e.b), e.a.max(e.b)))
            .collect();
        for (edge, count) in uses {
            if boundary.contains(&edge) {
                assert_eq!(count, 1);
            } else {
                assert_eq!(count, 2, "{edge:?}");
            }
        }
    }

    #[test]
    fn area_converges_to_disc() {
        let mesh = build_disc_mesh(&paper_domain(), 2000).unwrap();
        let exact = PI * 0.01;
        assert!((mesh.total_area() - exact).abs() / exact < 0.01);
        assert!(mesh.element_areas().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn text_round_trip_and_determinism() {
        let spec = DomainSpec {
            electrode_offset: 0.3,
            ..paper_domain()
        };
        let mesh = build_disc_mesh(&spec, 400).unwrap();
        let again = build_disc_mesh(&spec, 400).unwrap();
        assert_eq!(mesh, again);
        let text = mesh.to_text();
        let back = Mesh::from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.content_hash(), mesh.content_hash());
    }
}
