//! MAP estimation and the low-rank Laplace approximation `N(m_MAP, H⁻¹)`.

mod eigen;
mod newton;

pub use eigen::{double_pass_randomized_eig, GeneralizedEigenpairs};
pub use newton::{compute_map, NewtonConfig, NewtonResult};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sub};
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;
use crate::random::standard_normal_vec;

#[derive(Debug, Clone, PartialEq)]
pub struct EigConfig {
    pub k: usize,
    pub oversampling: usize,
    pub threshold: f64,
    /// Use the Gauss–Newton misfit Hessian at the MAP instead of the full one.
    pub gauss_newton: bool,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            k: 100,
            oversampling: 20,
            threshold: 1.0,
            gauss_newton: false,
        }
    }
}

/// Count of leading eigenvalues strictly above `threshold`.
pub fn truncation_rank(values: &[f64], threshold: f64) -> usize {
    values.iter().take_while(|&&l| l > threshold).count()
}

/// Gaussian `N(m_MAP, H⁻¹)` with `H⁻¹ = C − V D Vᵀ`, `D = diag(λ/(1+λ))`,
/// where `(λ_i, v_i)` solve `H_misfit v = λ C⁻¹ v` and `Vᵀ C⁻¹ V = I`.
///
/// Log densities are `−½ (m − m_MAP)ᵀ H (m − m_MAP)`; the normalizing
/// constant is dropped.
#[derive(Debug, Clone)]
pub struct LaplaceApprox {
    m_map: Vec<f64>,
    eigvals: Vec<f64>,
    eigvecs: Vec<Vec<f64>>,
    /// `C⁻¹ v_i`
    w: Vec<Vec<f64>>,
}

impl LaplaceApprox {
    pub fn new<P: GaussianPrior>(prior: &P, m_map: Vec<f64>, eigvals: Vec<f64>, eigvecs: Vec<Vec<f64>>) -> Result<Self> {
        if eigvals.len() != eigvecs.len() {
            return Err(Error::DimensionMismatch {
                expected: eigvals.len(),
                got: eigvecs.len(),
            });
        }
        if m_map.len() != prior.dim() {
            return Err(Error::DimensionMismatch {
                expected: prior.dim(),
                got: m_map.len(),
            });
        }
        if eigvals.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be sorted in descending order"));
        }
        if eigvals.iter().any(|&l| !(l > -1.0)) {
            return Err(Error::invalid("eigenvalues must exceed −1 for a positive definite Hessian"));
        }
        let w = eigvecs.iter().map(|v| prior.apply_precision(v)).collect();
        Ok(LaplaceApprox {
            m_map,
            eigvals,
            eigvecs,
            w,
        })
    }

    /// Keeps the eigenpairs with `λ > threshold`.
    pub fn truncated(mut self, threshold: f64) -> Self {
        let r = truncation_rank(&self.eigvals, threshold);
        self.eigvals.truncate(r);
        self.eigvecs.truncate(r);
        self.w.truncate(r);
        self
    }

    pub fn map_point(&self) -> &[f64] {
        &self.m_map
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigvecs
    }

    /// Rows of `Wᵀ = Vᵀ C⁻¹`.
    pub fn projectors(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.m_map.len()
    }

    /// `c = Vᵀ C⁻¹ m`, keeping the first `k` coordinates.
    pub fn project(&self, m: &[f64], k: usize) -> Vec<f64> {
        self.w.iter().take(k).map(|w| dot(w, m)).collect()
    }

    /// `(C − V D Vᵀ) v`
    pub fn apply_hinv<P: GaussianPrior>(&self, prior: &P, v: &[f64]) -> Vec<f64> {
        let mut out = prior.apply_covariance(v);
        for (l, vi) in self.eigvals.iter().zip(&self.eigvecs) {
            let c = l / (1.0 + l) * dot(vi, v);
            axpy(-c, vi, &mut out);
        }
        out
    }

    /// `(C⁻¹ + W Λ Wᵀ) v`, the exact inverse of [`Self::apply_hinv`].
    pub fn apply_hessian<P: GaussianPrior>(&self, prior: &P, v: &[f64]) -> Vec<f64> {
        let mut out = prior.apply_precision(v);
        for (l, wi) in self.eigvals.iter().zip(&self.w) {
            axpy(l * dot(wi, v), wi, &mut out);
        }
        out
    }

    /// `H^{-1/2} z` realized as `S z + Σ ((1+λ_i)^{-1/2} − 1) v_i (v_iᵀ S⁻ᵀ z)`
    /// with `S Sᵀ = C`; the covariance of the result is `H⁻¹` for standard
    /// normal `z`.
    pub fn apply_sqrt_hinv<P: GaussianPrior>(&self, prior: &P, z: &[f64]) -> Vec<f64> {
        let mut out = prior.apply_sqrt(z);
        if self.rank() > 0 {
            let t = prior.apply_sqrt_inv_transpose(z);
            for (l, vi) in self.eigvals.iter().zip(&self.eigvecs) {
                let c = ((1.0 + l).powf(-0.5) - 1.0) * dot(vi, &t);
                axpy(c, vi, &mut out);
            }
        }
        out
    }

    pub fn sample<P: GaussianPrior, R: Rng + ?Sized>(&self, prior: &P, rng: &mut R) -> Vec<f64> {
        let z = standard_normal_vec(rng, self.dim());
        let mut m = self.apply_sqrt_hinv(prior, &z);
        axpy(1.0, &self.m_map, &mut m);
        m
    }

    pub fn log_density<P: GaussianPrior>(&self, prior: &P, m: &[f64]) -> f64 {
        let d = sub(m, &self.m_map);
        -0.5 * dot(&d, &self.apply_hessian(prior, &d))
    }

    /// `r = Wᵀ m`, `c = m − V r`.
    pub fn split(&self, m: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let r = self.project(m, self.rank());
        let mut c = m.to_vec();
        for (ri, vi) in r.iter().zip(&self.eigvecs) {
            axpy(-ri, vi, &mut c);
        }
        (r, c)
    }

    /// `V r + c`
    pub fn combine(&self, r: &[f64], c: &[f64]) -> Vec<f64> {
        let mut m = c.to_vec();
        for (ri, vi) in r.iter().zip(&self.eigvecs) {
            axpy(*ri, vi, &mut m);
        }
        m
    }
}

/// Eigenpairs of the prior-preconditioned misfit Hessian at `m_map`.
pub fn misfit_eigenpairs<M, P, R>(
    model: &M,
    prior: &P,
    m_map: &[f64],
    cfg: &EigConfig,
    rng: &mut R,
) -> Result<GeneralizedEigenpairs>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    let state = model.solve_forward(m_map)?;
    let adj = model.solve_adjoint(&state);
    double_pass_randomized_eig(
        prior.dim(),
        |v| model.hessian_action(&state, &adj, v, cfg.gauss_newton),
        |v| prior.apply_precision(v),
        |v| prior.apply_covariance(v),
        cfg.k,
        cfg.oversampling,
        rng,
    )
}

/// Laplace approximation at `m_map` truncated at `cfg.threshold`.
pub fn build_laplace<M, P, R>(model: &M, prior: &P, m_map: Vec<f64>, cfg: &EigConfig, rng: &mut R) -> Result<LaplaceApprox>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    let pairs = misfit_eigenpairs(model, prior, &m_map, cfg, rng)?;
    Ok(LaplaceApprox::new(prior, m_map, pairs.values, pairs.vectors)?.truncated(cfg.threshold))
}

/// Solves for one `build_laplace` call: forward, adjoint, and two Hessian
/// passes of `k + p` actions each.
pub fn laplace_setup_solves(cfg: &EigConfig) -> u64 {
    2 + 4 * (cfg.k + cfg.oversampling) as u64
}
