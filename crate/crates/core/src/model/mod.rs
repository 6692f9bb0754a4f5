//! Parameter-to-observable maps with adjoint derivatives.

mod linear;
mod poisson;

pub use linear::{DenseLinearModel, LinearState, LinearSurrogate};
pub use poisson::{PoissonModel, PoissonState};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{point_observation_operator, Mesh, SparseMatrix};
use crate::random::standard_normal_vec;

/// A forward model with Gaussian observation noise `N(0, σ² I)`.
///
/// `solve_forward` and `solve_adjoint` each cost one PDE solve and
/// `hessian_action` costs two.
pub trait ForwardModel: Sync {
    type State: Send;

    fn parameter_dim(&self) -> usize;

    fn data(&self) -> &[f64];

    fn noise_std(&self) -> f64;

    fn solve_forward(&self, m: &[f64]) -> Result<Self::State>;

    fn observations<'s>(&self, state: &'s Self::State) -> &'s [f64];

    /// Adjoint solution for the misfit at `state`.
    fn solve_adjoint(&self, state: &Self::State) -> Vec<f64>;

    fn misfit_gradient(&self, state: &Self::State, adjoint: &[f64]) -> Vec<f64>;

    fn hessian_action(&self, state: &Self::State, adjoint: &[f64], mhat: &[f64], gauss_newton: bool) -> Vec<f64>;

    fn qoi(&self, state: &Self::State) -> Result<f64>;

    /// `Φ = ½ ‖obs − d‖² / σ²`
    fn misfit_cost(&self, state: &Self::State) -> f64 {
        let s2 = self.noise_std().powi(2);
        0.5 * self
            .observations(state)
            .iter()
            .zip(self.data())
            .map(|(o, d)| (o - d).powi(2))
            .sum::<f64>()
            / s2
    }

    /// Scaled residual `Γ⁻¹(obs − d)`.
    fn weighted_residual(&self, state: &Self::State) -> Vec<f64> {
        let s2 = self.noise_std().powi(2);
        self.observations(state)
            .iter()
            .zip(self.data())
            .map(|(o, d)| (o - d) / s2)
            .collect()
    }
}

/// Which forward model an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Poisson,
    Linear,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Poisson => "poisson",
            ModelKind::Linear => "linear",
        }
    }
}

/// Observation points, their operator on the inversion mesh, noise level
/// and data.
#[derive(Debug, Clone)]
pub struct Observations {
    pub points: Vec<[f64; 2]>,
    pub operator: SparseMatrix,
    pub sigma: f64,
    pub data: Vec<f64>,
}

impl Observations {
    pub fn new(mesh: &Mesh, points: Vec<[f64; 2]>, sigma: f64, data: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise std must be positive, got {sigma}")));
        }
        if data.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: data.len(),
            });
        }
        let operator = point_observation_operator(mesh, &points)?;
        Ok(Observations {
            points,
            operator,
            sigma,
            data,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOptions {
    /// Solve on the once-refined mesh to avoid the inverse crime.
    pub refine: bool,
    /// Add `N(0, σ²)` noise; `false` gives exact data.
    pub add_noise: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            refine: true,
            add_noise: true,
        }
    }
}

/// Synthetic observations of `m_true`, deterministic in `seed`.
pub fn generate_synthetic_data(
    kind: ModelKind,
    mesh: &Mesh,
    m_true: &[f64],
    points: &[[f64; 2]],
    sigma: f64,
    seed: u64,
    opts: SyntheticOptions,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("noise std must be positive, got {sigma}")));
    }
    let (solve_mesh, m) = if opts.refine {
        let fine = Mesh::unit_square(2 * mesh.cells_per_side())?;
        let m = fine.interpolate_from(mesh, m_true)?;
        (fine, m)
    } else {
        (mesh.clone(), m_true.to_vec())
    };
    let zeros = vec![0.0; points.len()];
    let obs = Observations::new(&solve_mesh, points.to_vec(), sigma, zeros)?;
    let mut d = match kind {
        ModelKind::Poisson => {
            let model = PoissonModel::new(&solve_mesh, obs)?;
            let s = model.solve_forward(&m)?;
            model.observations(&s).to_vec()
        }
        ModelKind::Linear => {
            let model = LinearSurrogate::new(&solve_mesh, obs)?;
            let s = model.solve_forward(&m)?;
            model.observations(&s).to_vec()
        }
    };
    if opts.add_noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = standard_normal_vec(&mut rng, d.len());
        for (di, zi) in d.iter_mut().zip(z) {
            *di += sigma * zi;
        }
    }
    Ok(d)
}
