//! Built-in truth conductivities.
//!
//! Geometries are approximations drawn from the published figures, given in
//! units of the domain radius.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::conductivity::{Circle, CircleSample, ConductivityField, SIGMA_CANCER, SIGMA_HEALTHY};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Model1,
    Model2,
    Model3,
}

impl ModelName {
    pub const ALL: [ModelName; 3] = [ModelName::Model1, ModelName::Model2, ModelName::Model3];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Model1 => "model1",
            ModelName::Model2 => "model2",
            ModelName::Model3 => "model3",
        }
    }
}

impl std::str::FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => Ok(ModelName::Model1),
            "model2" => Ok(ModelName::Model2),
            "model3" => Ok(ModelName::Model3),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl std::fmt::Display for ModelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Annular sector centered at the origin, open towards `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CShape {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Angular width of the gap, radians.
    pub opening: f64,
    /// Angle of the gap's bisector, radians.
    pub direction: f64,
}

impl CShape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let rho = p[0].hypot(p[1]);
        if rho < self.inner_radius || rho > self.outer_radius {
            return false;
        }
        let mut delta = (p[1].atan2(p[0]) - self.direction).rem_euclid(2.0 * PI);
        if delta > PI {
            delta = 2.0 * PI - delta;
        }
        delta > 0.5 * self.opening
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Circles(Vec<Circle>),
    CShape(CShape),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub truth: Truth,
    pub sigma_c: f64,
    pub sigma_h: f64,
}

impl ModelSpec {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match &self.truth {
            Truth::Circles(circles) => circles.iter().any(|c| c.contains(p)),
            Truth::CShape(shape) => shape.contains(p),
        }
    }

    /// Centroid-membership rasterization, binary in `{sigma_h, sigma_c}`.
    pub fn truth_field(&self, mesh: &Mesh) -> ConductivityField {
        ConductivityField::new(
            mesh.element_centroids()
                .iter()
                .map(|&p| if self.contains(p) { self.sigma_c } else { self.sigma_h })
                .collect(),
        )
    }

    /// The circles of a circle-union truth as a sample.
    pub fn as_sample(&self) -> Option<CircleSample> {
        match &self.truth {
            Truth::Circles(c) => Some(CircleSample::new(c.clone(), self.sigma_c, self.sigma_h)),
            Truth::CShape(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.truth {
            Truth::Circles(circles) => {
                let parts: Vec<String> = circles
                    .iter()
                    .map(|c| format!("({} {} {})", c.x01, c.x02, c.r))
                    .collect();
                format!("{} circles {}", self.name, parts.join(" "))
            }
            Truth::CShape(s) => format!(
                "{} c_shape inner={} outer={} opening={} direction={}",
                self.name, s.inner_radius, s.outer_radius, s.opening, s.direction
            ),
        }
    }
}

pub fn builtin_model(name: ModelName, radius: f64) -> ModelSpec {
    let circles = |spec: &[(f64, f64, f64)]| {
        Truth::Circles(
            spec.iter()
                .map(|&(x, y, r)| Circle::new(x * radius, y * radius, r * radius))
                .collect(),
        )
    };
    let truth = match name {
        // Three inclusions: large, medium, small.
        ModelName::Model1 => circles(&[(-0.4, 0.3, 0.25), (0.45, 0.2, 0.15), (0.1, -0.5, 0.08)]),
        // Four inclusions the size of the smallest one above, one near the center.
        ModelName::Model2 => circles(&[(0.05, 0.05, 0.08), (0.55, 0.3, 0.08), (-0.5, 0.4, 0.08), (-0.2, -0.6, 0.08)]),
        ModelName::Model3 => Truth::CShape(CShape {
            inner_radius: 0.3 * radius,
            outer_radius: 0.55 * radius,
            opening: 0.5 * PI,
            direction: 0.0,
        }),
    };
    ModelSpec {
        name,
        truth,
        sigma_c: SIGMA_CANCER,
        sigma_h: SIGMA_HEALTHY,
    }
}

/// Number of edge-connected groups of elements whose value is `value`.
pub fn connected_components(mesh: &Mesh, field: &ConductivityField, value: f64) -> usize {
    use std::collections::HashMap;
    let tris = mesh.triangles();
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (e, t) in tris.iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            by_edge.entry((a.min(b), a.max(b))).or_default().push(e);
        }
    }
    let marked: Vec<bool> = field.values().iter().map(|&v| v == value).collect();
    let mut seen = vec![false; tris.len()];
    let mut count = 0;
    for start in 0..tris.len() {
        if !marked[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(e) = stack.pop() {
            let t = tris[e];
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                for &n in &by_edge[&(a.min(b), a.max(b))] {
                    if marked[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
    }
    count
}
