//! Discrete fields on a [`TriMesh`](crate::domain::TriMesh).
//!
//! Scalars live on nodes (piecewise linear), vectors on elements (piecewise
//! constant, as produced by differentiating a P1 function), and recovered
//! tensors on nodes. Fields carry no mesh reference; operations check sizes.

use thiserror::Error;

use crate::domain::TriMesh;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: non-finite value at index {index}")]
    NonFinite { what: &'static str, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &TriMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &TriMesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.num_nodes()],
        }
    }

    /// Nodal samples of `f(x, y)`.
    pub fn sample(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: mesh.nodes().iter().map(|p| f(p[0], p[1])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, mesh: &TriMesh, what: &'static str) -> Result<(), FieldError> {
        check_len(what, mesh.num_nodes(), self.values.len())?;
        check_finite(what, self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sets every boundary node to zero.
    pub fn zero_boundary(&mut self, mesh: &TriMesh) {
        for (v, &b) in self.values.iter_mut().zip(mesh.boundary_flags()) {
            if b {
                *v = 0.0;
            }
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        ScalarField::new(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField::new(self.values.iter().map(|a| c * a).collect())
    }
}

/// One constant 2-vector per element.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub values: Vec<Point>,
}

impl VectorField {
    pub fn new(values: Vec<Point>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &TriMesh) -> Self {
        Self {
            values: vec![[0.0; 2]; mesh.num_elements()],
        }
    }

    /// Evaluates `f` at element centroids.
    pub fn sample_centroids(mesh: &TriMesh, f: impl Fn(f64, f64) -> Point) -> Self {
        Self {
            values: (0..mesh.num_elements())
                .map(|e| {
                    let c = mesh.centroid(e);
                    f(c[0], c[1])
                })
                .collect(),
        }
    }

    pub fn check(&self, mesh: &TriMesh, what: &'static str) -> Result<(), FieldError> {
        check_len(what, mesh.num_elements(), self.values.len())?;
        check_finite(what, self.values.iter().flatten().copied())
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v[0].hypot(v[1])))
    }

    /// `sqrt(Σ_e area_e |v_e|²)`.
    pub fn l2_norm(&self, mesh: &TriMesh) -> f64 {
        self.values
            .iter()
            .zip(mesh.areas())
            .map(|(v, a)| a * (v[0] * v[0] + v[1] * v[1]))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect(),
        )
    }

    /// `Σ_e area_e a_e·b_e`.
    pub fn inner(&self, other: &VectorField, mesh: &TriMesh) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mesh.areas())
            .map(|((a, b), w)| w * (a[0] * b[0] + a[1] * b[1]))
            .sum()
    }
}

/// One symmetric 2x2 matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub values: Vec<[[f64; 2]; 2]>,
}

impl TensorField {
    /// Pointwise Frobenius magnitude as a nodal scalar field.
    pub fn frobenius(&self) -> ScalarField {
        ScalarField::new(
            self.values
                .iter()
                .map(|m| (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt())
                .collect(),
        )
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), FieldError> {
    if expected != got {
        return Err(FieldError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

fn check_finite(what: &'static str, values: impl Iterator<Item = f64>) -> Result<(), FieldError> {
    for (index, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(FieldError::NonFinite { what, index });
        }
    }
    Ok(())
}
