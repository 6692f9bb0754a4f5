//! Gaussian priors on discretized parameter fields.
//!
//! Everything downstream (Laplace approximation, proposals, diagnostics) talks
//! to a prior through [`GaussianPrior`], which exposes the covariance `C`, the
//! precision `R = C⁻¹` and a square-root factor `S` with `S Sᵀ = C`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_mass, assemble_mass, assemble_stiffness, BoundaryTag, CholeskyFactor, Coefficient,
    Mesh, SparseMatrix,
};
use crate::linalg::{dot, sub};
use crate::random::standard_normal_vec;

pub trait GaussianPrior: Sync {
    fn dim(&self) -> usize;

    fn mean(&self) -> &[f64];

    fn apply_covariance(&self, v: &[f64]) -> Vec<f64>;

    fn apply_precision(&self, v: &[f64]) -> Vec<f64>;

    /// `S z`, where `S Sᵀ = C`.
    fn apply_sqrt(&self, z: &[f64]) -> Vec<f64>;

    /// `S⁻ᵀ z`, equivalently `C⁻¹ S z`.
    fn apply_sqrt_inv_transpose(&self, z: &[f64]) -> Vec<f64>;

    /// `½ (m − m_pr)ᵀ R (m − m_pr)`
    fn cost(&self, m: &[f64]) -> f64 {
        let d = sub(m, self.mean());
        0.5 * dot(&d, &self.apply_precision(&d))
    }

    fn gradient(&self, m: &[f64]) -> Vec<f64> {
        self.apply_precision(&sub(m, self.mean()))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>
    where
        Self: Sized,
    {
        let z = standard_normal_vec(rng, self.dim());
        let mut m = self.apply_sqrt(&z);
        for (mi, pi) in m.iter_mut().zip(self.mean()) {
            *mi += pi;
        }
        m
    }
}

/// `Θ` with eigenvalue `θ₁` along `(sin α, cos α)` and `θ₂` along the
/// orthogonal direction.
pub fn anisotropic_tensor(theta1: f64, theta2: f64, alpha: f64) -> [[f64; 2]; 2] {
    let (s, c) = alpha.sin_cos();
    let off = (theta1 - theta2) * s * c;
    [
        [theta1 * s * s + theta2 * c * c, off],
        [off, theta1 * c * c + theta2 * s * s],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLaplacianParams {
    pub gamma: f64,
    pub delta: f64,
    /// Robin coefficient; `None` selects `√(γδ)/1.42`.
    pub robin_beta: Option<f64>,
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    pub mean: f64,
}

impl Default for BiLaplacianParams {
    fn default() -> Self {
        BiLaplacianParams {
            gamma: 0.1,
            delta: 0.5,
            robin_beta: None,
            theta1: 2.0,
            theta2: 0.5,
            alpha: std::f64::consts::FRAC_PI_4,
            mean: 0.0,
        }
    }
}

impl BiLaplacianParams {
    pub fn robin_beta(&self) -> f64 {
        self.robin_beta
            .unwrap_or_else(|| (self.gamma * self.delta).sqrt() / 1.42)
    }
}

/// `N(m_pr, A⁻²)` with `A = γ K_Θ + δ M + β_R M_∂Ω`.
///
/// The mass matrix enters the covariance through its lumped diagonal `D`, so
/// `C = A⁻¹ D A⁻¹`, `R = A D⁻¹ A` and `S = A⁻¹ D^{1/2}`.
#[derive(Debug, Clone)]
pub struct BiLaplacianPrior {
    params: BiLaplacianParams,
    theta: [[f64; 2]; 2],
    mean: Vec<f64>,
    a: SparseMatrix,
    a_factor: CholeskyFactor,
    mass: SparseMatrix,
    lumped: Vec<f64>,
    lumped_sqrt: Vec<f64>,
}

impl BiLaplacianPrior {
    pub fn new(mesh: &Mesh, params: BiLaplacianParams) -> Result<Self> {
        let mean = vec![params.mean; mesh.num_vertices()];
        Self::with_mean(mesh, params, mean)
    }

    pub fn with_mean(mesh: &Mesh, params: BiLaplacianParams, mean: Vec<f64>) -> Result<Self> {
        for (name, v) in [
            ("gamma", params.gamma),
            ("delta", params.delta),
            ("theta1", params.theta1),
            ("theta2", params.theta2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("prior {name} must be positive, got {v}")));
            }
        }
        let robin = params.robin_beta();
        if !(robin >= 0.0) {
            return Err(Error::invalid(format!("Robin coefficient must be non-negative, got {robin}")));
        }
        if mean.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_vertices(),
                got: mean.len(),
            });
        }
        let theta = anisotropic_tensor(params.theta1, params.theta2, params.alpha);
        let k = assemble_stiffness(mesh, Coefficient::Tensor(theta))?;
        let mass = assemble_mass(mesh, false);
        let boundary = assemble_boundary_mass(mesh, &BoundaryTag::ALL)?;
        let a = SparseMatrix::linear_combination(&[
            (params.gamma, &k),
            (params.delta, &mass),
            (robin, &boundary),
        ]);
        let a_factor = CholeskyFactor::factor(&a)?;
        let lumped = assemble_mass(mesh, true).row_sums();
        let lumped_sqrt = lumped.iter().map(|d| d.sqrt()).collect();
        Ok(BiLaplacianPrior {
            params,
            theta,
            mean,
            a,
            a_factor,
            mass,
            lumped,
            lumped_sqrt,
        })
    }

    pub fn params(&self) -> &BiLaplacianParams {
        &self.params
    }

    pub fn theta(&self) -> [[f64; 2]; 2] {
        self.theta
    }

    /// The elliptic operator `A`.
    pub fn operator(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }
}

impl GaussianPrior for BiLaplacianPrior {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn apply_covariance(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.a_factor.solve(v);
        for (xi, d) in x.iter_mut().zip(&self.lumped) {
            *xi *= d;
        }
        self.a_factor.solve_in_place(&mut x);
        x
    }

    fn apply_precision(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.a.mul_vec(v);
        for (xi, d) in x.iter_mut().zip(&self.lumped) {
            *xi /= d;
        }
        self.a.mul_vec(&x)
    }

    fn apply_sqrt(&self, z: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = z.iter().zip(&self.lumped_sqrt).map(|(z, s)| z * s).collect();
        self.a_factor.solve_in_place(&mut x);
        x
    }

    fn apply_sqrt_inv_transpose(&self, z: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = z.iter().zip(&self.lumped_sqrt).map(|(z, s)| z / s).collect();
        self.a.mul_vec(&x)
    }
}

/// Gaussian prior with an explicit dense covariance; used for small
/// reference problems.
#[derive(Debug, Clone)]
pub struct DenseGaussianPrior {
    mean: Vec<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl DenseGaussianPrior {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.nrows(),
            });
        }
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::invalid("prior covariance is not positive definite"))?;
        let precision = chol.inverse();
        let l = chol.l();
        Ok(DenseGaussianPrior {
            mean,
            covariance,
            precision,
            chol: l,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

fn dense_mul(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(v)).as_slice().to_vec()
}

impl GaussianPrior for DenseGaussianPrior {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn apply_covariance(&self, v: &[f64]) -> Vec<f64> {
        dense_mul(&self.covariance, v)
    }

    fn apply_precision(&self, v: &[f64]) -> Vec<f64> {
        dense_mul(&self.precision, v)
    }

    fn apply_sqrt(&self, z: &[f64]) -> Vec<f64> {
        dense_mul(&self.chol, z)
    }

    fn apply_sqrt_inv_transpose(&self, z: &[f64]) -> Vec<f64> {
        let lt = self.chol.transpose();
        lt.solve_upper_triangular(&DVector::from_column_slice(z))
            .expect("Cholesky factor is nonsingular")
            .as_slice()
            .to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_prior(n: usize) -> (Mesh, BiLaplacianPrior) {
        let mesh = Mesh::unit_square(n).unwrap();
        let prior = BiLaplacianPrior::new(&mesh, BiLaplacianParams::default()).unwrap();
        (mesh, prior)
    }

    fn dense_cov(prior: &BiLaplacianPrior) -> DMatrix<f64> {
        let a = prior.operator().to_dense();
        let ainv = a.clone().try_inverse().unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(prior.lumped_mass()));
        &ainv * d * &ainv
    }

    #[test]
    fn default_tensor_is_spd_and_isotropic_case_reduces() {
        let t = anisotropic_tensor(2.0, 0.5, std::f64::consts::FRAC_PI_4);
        assert!(t[0][0] > 0.0 && t[0][0] * t[1][1] - t[0][1] * t[1][0] > 0.0);
        let iso = anisotropic_tensor(1.7, 1.7, 0.3);
        assert!((iso[0][0] - 1.7).abs() < 1e-15 && (iso[1][1] - 1.7).abs() < 1e-15);
        assert!(iso[0][1].abs() < 1e-15);
    }

    #[test]
    fn default_robin_coefficient() {
        let p = BiLaplacianParams::default();
        assert!((p.robin_beta() - (0.05f64).sqrt() / 1.42).abs() < 1e-15);
    }

    #[test]
    fn default_parameters_on_32_mesh_build() {
        let (_, prior) = small_prior(32);
        assert_eq!(prior.dim(), 1089);
        assert!(prior.operator().asymmetry() <= 1e-12 * prior.operator().max_abs());
    }

    #[test]
    fn non_positive_parameters_rejected() {
        let mesh = Mesh::unit_square(2).unwrap();
        for p in [
            BiLaplacianParams { gamma: 0.0, ..Default::default() },
            BiLaplacianParams { delta: -1.0, ..Default::default() },
            BiLaplacianParams { theta2: 0.0, ..Default::default() },
        ] {
            assert!(BiLaplacianPrior::new(&mesh, p).is_err());
        }
    }

    #[test]
    fn precision_matches_dense_and_is_spd() {
        let (_, prior) = small_prior(4);
        let a = prior.operator().to_dense();
        let dinv = DMatrix::from_diagonal(&DVector::from_iterator(
            prior.dim(),
            prior.lumped_mass().iter().map(|d| 1.0 / d),
        ));
        let r = &a * dinv * &a;
        let n = prior.dim();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = prior.apply_precision(&e);
            for i in 0..n {
                assert!((col[i] - r[(i, j)]).abs() <= 1e-10 * r[(j, j)].abs());
            }
        }
        assert!(nalgebra::SymmetricEigen::new(r).eigenvalues.min() > 0.0);
    }

    #[test]
    fn covariance_and_precision_are_inverse() {
        let (_, prior) = small_prior(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = standard_normal_vec(&mut rng, prior.dim());
        let back = prior.apply_precision(&prior.apply_covariance(&v));
        assert!(rel_error(&back, &v) < 1e-8);
        assert_eq!(prior.apply_covariance(&vec![0.0; prior.dim()]), vec![0.0; prior.dim()]);
    }

    #[test]
    fn square_root_reproduces_covariance() {
        let (_, prior) = small_prior(4);
        let n = prior.dim();
        let mut s = DMatrix::zeros(n, n);
        let mut sit = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            s.set_column(j, &DVector::from_vec(prior.apply_sqrt(&e)));
            sit.set_column(j, &DVector::from_vec(prior.apply_sqrt_inv_transpose(&e)));
        }
        let c = dense_cov(&prior);
        let sst = &s * s.transpose();
        assert!((sst - &c).abs().max() <= 1e-10 * c.abs().max());
        // S⁻ᵀ really is the inverse transpose of S
        let id = s.transpose() * sit;
        assert!((id - DMatrix::identity(n, n)).abs().max() < 1e-8);
    }

    #[test]
    fn cost_and_gradient() {
        let (mesh, prior) = small_prior(4);
        assert_eq!(prior.cost(prior.mean()), 0.0);
        assert!(norm(&prior.gradient(prior.mean())) == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = standard_normal_vec(&mut rng, prior.dim());
        let m: Vec<f64> = d.iter().zip(prior.mean()).map(|(a, b)| a + b).collect();
        let m2: Vec<f64> = d.iter().zip(prior.mean()).map(|(a, b)| 2.0 * a + b).collect();
        assert!((prior.cost(&m2) - 4.0 * prior.cost(&m)).abs() <= 1e-10 * prior.cost(&m2));

        // dense quadratic form
        let r = dense_cov(&prior).try_inverse().unwrap();
        let dv = DVector::from_column_slice(&d);
        let dense = 0.5 * (dv.transpose() * &r * &dv)[(0, 0)];
        assert!((prior.cost(&m) - dense).abs() <= 1e-8 * dense);

        // central differences
        let g = prior.gradient(&m);
        let dir = standard_normal_vec(&mut rng, mesh.num_vertices());
        let eps = 1e-4;
        let plus: Vec<f64> = m.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = m.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fd = (prior.cost(&plus) - prior.cost(&minus)) / (2.0 * eps);
        let an = dot(&g, &dir);
        assert!((fd - an).abs() <= 1e-6 * an.abs());

        // linear in (m − m_pr)
        let g2 = prior.gradient(&m2);
        assert!(rel_error(&g2, &g.iter().map(|x| 2.0 * x).collect::<Vec<_>>()) < 1e-12);
    }

    #[test]
    fn robin_term_touches_only_boundary_rows() {
        let mesh = Mesh::unit_square(4).unwrap();
        let with = BiLaplacianPrior::new(&mesh, BiLaplacianParams::default()).unwrap();
        let without = BiLaplacianPrior::new(
            &mesh,
            BiLaplacianParams {
                robin_beta: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let diff = SparseMatrix::linear_combination(&[(1.0, with.operator()), (-1.0, without.operator())]);
        for (r, c, v) in diff.triplets() {
            if v.abs() > 1e-15 {
                assert!(mesh.is_boundary_vertex(r) && mesh.is_boundary_vertex(c));
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_and_matches_covariance() {
        let (_, prior) = small_prior(4);
        let n = prior.dim();
        let a = prior.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let b = prior.sample(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);

        let ns = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples: Vec<Vec<f64>> = (0..ns).map(|_| prior.sample(&mut rng)).collect();
        let c = dense_cov(&prior);
        let mut mean = vec![0.0; n];
        for s in &samples {
            for i in 0..n {
                mean[i] += s[i] / ns as f64;
            }
        }
        for i in 0..n {
            let se = (c[(i, i)] / ns as f64).sqrt();
            assert!((mean[i] - prior.mean()[i]).abs() <= 5.0 * se);
        }
        // empirical covariance against the dense oracle, entrywise std error
        // of a Gaussian sample covariance: sqrt((C_ii C_jj + C_ij²)/N)
        for i in (0..n).step_by(3) {
            for j in (i..n).step_by(2) {
                let emp: f64 = samples
                    .iter()
                    .map(|s| (s[i] - prior.mean()[i]) * (s[j] - prior.mean()[j]))
                    .sum::<f64>()
                    / ns as f64;
                let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / ns as f64).sqrt();
                assert!((emp - c[(i, j)]).abs() <= 5.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn dense_prior_factors_are_consistent() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = DenseGaussianPrior::new(vec![1.0, -1.0], c).unwrap();
        let v = [0.4, -0.2];
        assert!(rel_error(&p.apply_precision(&p.apply_covariance(&v)), &v) < 1e-14);
        // C⁻¹ S z = S⁻ᵀ z
        let z = [0.7, 1.1];
        let lhs = p.apply_precision(&p.apply_sqrt(&z));
        assert!(rel_error(&lhs, &p.apply_sqrt_inv_transpose(&z)) < 1e-14);
    }
}
