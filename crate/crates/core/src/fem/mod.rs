//! P1 finite elements on a structured triangulation of the unit square.

mod assembly;
mod mesh;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_mass, assemble_stiffness, element_geometry, local_stiffness,
    point_observation_operator, Coefficient, ElementGeometry, StiffnessAssembler,
};
pub use mesh::{BoundaryEdge, BoundaryTag, Mesh};
pub use sparse::{sparse_solve, CholeskyFactor, SparseMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Parameter,
    State,
    Adjoint,
}

/// Nodal coefficients of a P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub role: FieldRole,
}

impl Field {
    pub fn new(values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("field entry {i} is not finite")));
        }
        Ok(Field { values, role })
    }

    pub fn parameter(values: Vec<f64>) -> Result<Self> {
        Self::new(values, FieldRole::Parameter)
    }

    pub fn constant(mesh: &Mesh, value: f64, role: FieldRole) -> Self {
        Field {
            values: vec![value; mesh.num_vertices()],
            role,
        }
    }

    pub fn from_fn(mesh: &Mesh, role: FieldRole, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field {
            values: mesh.vertices().iter().map(|&p| f(p)).collect(),
            role,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
