use nalgebra::{DMatrix, DVector};

use super::{ForwardModel, Observations};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, BoundaryTag, CholeskyFactor, Coefficient, Mesh, SparseMatrix};

/// Point observations of the solution of `−Δu = m` with `u = 0` on top and
/// bottom and zero flux through the sides. The map `m ↦ Bu` is linear, so
/// the posterior under a Gaussian prior is exactly Gaussian. The quantity
/// of interest is `∫ m`.
#[derive(Debug, Clone)]
pub struct LinearSurrogate {
    n: usize,
    fixed: Vec<bool>,
    mass: SparseMatrix,
    factor: CholeskyFactor,
    obs: Observations,
}

#[derive(Debug, Clone)]
pub struct LinearState {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    pub obs: Vec<f64>,
}

impl LinearSurrogate {
    pub fn new(mesh: &Mesh, obs: Observations) -> Result<Self> {
        let nv = mesh.num_vertices();
        if obs.operator.ncols() != nv {
            return Err(Error::DimensionMismatch {
                expected: nv,
                got: obs.operator.ncols(),
            });
        }
        let mut fixed = vec![false; nv];
        for v in mesh.boundary_vertices(&[BoundaryTag::Bottom, BoundaryTag::Top]) {
            fixed[v] = true;
        }
        let k = assemble_stiffness(mesh, Coefficient::Constant(1.0))?;
        let (k, _) = k.eliminate_dirichlet(&fixed, &vec![0.0; nv]);
        let factor = CholeskyFactor::factor(&k)?;
        Ok(LinearSurrogate {
            n: nv,
            fixed,
            mass: assemble_mass(mesh, false),
            factor,
            obs,
        })
    }

    pub fn with_data(mut self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.obs.data.len() {
            return Err(Error::DimensionMismatch {
                expected: self.obs.data.len(),
                got: data.len(),
            });
        }
        self.obs.data = data;
        Ok(self)
    }

    pub fn observation_setup(&self) -> &Observations {
        &self.obs
    }

    /// `K_free⁻¹ P_free y`
    fn solve_free(&self, mut y: Vec<f64>) -> Vec<f64> {
        for (x, &f) in y.iter_mut().zip(&self.fixed) {
            if f {
                *x = 0.0;
            }
        }
        self.factor.solve_in_place(&mut y);
        y
    }
}

impl ForwardModel for LinearSurrogate {
    type State = LinearState;

    fn parameter_dim(&self) -> usize {
        self.n
    }

    fn data(&self) -> &[f64] {
        &self.obs.data
    }

    fn noise_std(&self) -> f64 {
        self.obs.sigma
    }

    fn solve_forward(&self, m: &[f64]) -> Result<LinearState> {
        if m.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.len(),
            });
        }
        let u = self.solve_free(self.mass.mul_vec(m));
        let obs = self.obs.operator.mul_vec(&u);
        Ok(LinearState { m: m.to_vec(), u, obs })
    }

    fn observations<'s>(&self, state: &'s LinearState) -> &'s [f64] {
        &state.obs
    }

    fn solve_adjoint(&self, state: &LinearState) -> Vec<f64> {
        let r = self.weighted_residual(state);
        let rhs = self.obs.operator.transpose_mul_vec(&r).iter().map(|x| -x).collect();
        self.solve_free(rhs)
    }

    fn misfit_gradient(&self, _state: &LinearState, p: &[f64]) -> Vec<f64> {
        self.mass.mul_vec(p).iter().map(|x| -x).collect()
    }

    fn hessian_action(&self, _state: &LinearState, _p: &[f64], mhat: &[f64], _gauss_newton: bool) -> Vec<f64> {
        let uhat = self.solve_free(self.mass.mul_vec(mhat));
        let s2 = self.obs.sigma.powi(2);
        let w: Vec<f64> = self.obs.operator.mul_vec(&uhat).iter().map(|x| x / s2).collect();
        // M K⁻¹ Bᵀ Γ⁻¹ B û
        let phat = self.solve_free(self.obs.operator.transpose_mul_vec(&w));
        self.mass.mul_vec(&phat)
    }

    fn qoi(&self, state: &LinearState) -> Result<f64> {
        Ok(self.mass.mul_vec(&state.m).iter().sum())
    }
}

/// `Φ(m) = ½ ‖G m − d‖² / σ²` with an explicit matrix `G`; QoI `wᵀ m`.
#[derive(Debug, Clone)]
pub struct DenseLinearModel {
    g: DMatrix<f64>,
    sigma: f64,
    data: Vec<f64>,
    qoi_weights: Vec<f64>,
}

impl DenseLinearModel {
    pub fn new(g: DMatrix<f64>, sigma: f64, data: Vec<f64>, qoi_weights: Vec<f64>) -> Result<Self> {
        if data.len() != g.nrows() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                got: data.len(),
            });
        }
        if qoi_weights.len() != g.ncols() {
            return Err(Error::DimensionMismatch {
                expected: g.ncols(),
                got: qoi_weights.len(),
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("noise std must be positive, got {sigma}")));
        }
        Ok(DenseLinearModel {
            g,
            sigma,
            data,
            qoi_weights,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }
}

impl ForwardModel for DenseLinearModel {
    type State = LinearState;

    fn parameter_dim(&self) -> usize {
        self.g.ncols()
    }

    fn data(&self) -> &[f64] {
        &self.data
    }

    fn noise_std(&self) -> f64 {
        self.sigma
    }

    fn solve_forward(&self, m: &[f64]) -> Result<LinearState> {
        if m.len() != self.g.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.g.ncols(),
                got: m.len(),
            });
        }
        let obs = (&self.g * DVector::from_column_slice(m)).as_slice().to_vec();
        Ok(LinearState {
            m: m.to_vec(),
            u: Vec::new(),
            obs,
        })
    }

    fn observations<'s>(&self, state: &'s LinearState) -> &'s [f64] {
        &state.obs
    }

    /// Here the "adjoint" is simply `Γ⁻¹ (G m − d)`.
    fn solve_adjoint(&self, state: &LinearState) -> Vec<f64> {
        self.weighted_residual(state)
    }

    fn misfit_gradient(&self, _state: &LinearState, p: &[f64]) -> Vec<f64> {
        (self.g.transpose() * DVector::from_column_slice(p)).as_slice().to_vec()
    }

    fn hessian_action(&self, _state: &LinearState, _p: &[f64], mhat: &[f64], _gauss_newton: bool) -> Vec<f64> {
        let gm = &self.g * DVector::from_column_slice(mhat);
        (self.g.transpose() * gm / self.sigma.powi(2)).as_slice().to_vec()
    }

    fn qoi(&self, state: &LinearState) -> Result<f64> {
        Ok(crate::linalg::dot(&self.qoi_weights, &state.m))
    }
}
