use super::{ForwardModel, Observations};
use crate::error::{Error, Result};
use crate::fem::{element_geometry, BoundaryTag, CholeskyFactor, ElementGeometry, Mesh, StiffnessAssembler};

/// `−∇·(e^m ∇u) = 0` on the unit square with `u = 1` on top, `u = 0` on
/// the bottom and zero flux through the sides. Observations are point
/// values of `u`.
#[derive(Debug, Clone)]
pub struct PoissonModel {
    mesh: Mesh,
    geo: Vec<ElementGeometry>,
    assembler: StiffnessAssembler,
    fixed: Vec<bool>,
    dirichlet: Vec<f64>,
    bottom: Vec<(usize, f64)>,
    obs: Observations,
}

/// Forward solution at one parameter, with the factorization kept for the
/// adjoint and incremental solves.
#[derive(Debug, Clone)]
pub struct PoissonState {
    pub m: Vec<f64>,
    /// `e^m` at triangle centroids.
    pub kappa: Vec<f64>,
    pub u: Vec<f64>,
    pub obs: Vec<f64>,
    factor: CholeskyFactor,
}

impl PoissonModel {
    pub fn new(mesh: &Mesh, obs: Observations) -> Result<Self> {
        if obs.operator.ncols() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_vertices(),
                got: obs.operator.ncols(),
            });
        }
        let nv = mesh.num_vertices();
        let mut fixed = vec![false; nv];
        let mut dirichlet = vec![0.0; nv];
        for v in mesh.boundary_vertices(&[BoundaryTag::Bottom]) {
            fixed[v] = true;
        }
        for v in mesh.boundary_vertices(&[BoundaryTag::Top]) {
            fixed[v] = true;
            dirichlet[v] = 1.0;
        }
        let bottom = mesh
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::Bottom)
            .map(|e| {
                let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
                (e.triangle, (b[0] - a[0]).abs())
            })
            .collect();
        Ok(PoissonModel {
            mesh: mesh.clone(),
            geo: element_geometry(mesh),
            assembler: StiffnessAssembler::new(mesh),
            fixed,
            dirichlet,
            bottom,
            obs,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn observation_setup(&self) -> &Observations {
        &self.obs
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

    fn centroid_means(&self, m: &[f64]) -> Vec<f64> {
        self.mesh
            .triangles()
            .iter()
            .map(|t| (m[t[0]] + m[t[1]] + m[t[2]]) / 3.0)
            .collect()
    }

    fn grad_on(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let tri = self.mesh.triangles()[t];
        self.geo[t].gradient(tri.map(|v| u[v]))
    }

    fn zero_fixed(&self, v: &mut [f64]) {
        for (x, &f) in v.iter_mut().zip(&self.fixed) {
            if f {
                *x = 0.0;
            }
        }
    }

    /// `out_j += Σ_{T∋j} w_T |T| / 3`
    fn scatter_to_vertices(&self, w: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.num_vertices()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let c = w(t) * self.geo[t].area / 3.0;
            for &v in tri {
                out[v] += c;
            }
        }
        out
    }

    /// Solution of the forward problem with the Dirichlet data replaced by
    /// zero and right-hand side `rhs` on free rows.
    fn homogeneous_solve(&self, state: &PoissonState, mut rhs: Vec<f64>) -> Vec<f64> {
        self.zero_fixed(&mut rhs);
        state.factor.solve_in_place(&mut rhs);
        rhs
    }
}

impl ForwardModel for PoissonModel {
    type State = PoissonState;

    fn parameter_dim(&self) -> usize {
        self.mesh.num_vertices()
    }

    fn data(&self) -> &[f64] {
        &self.obs.data
    }

    fn noise_std(&self) -> f64 {
        self.obs.sigma
    }

    fn solve_forward(&self, m: &[f64]) -> Result<PoissonState> {
        if m.len() != self.parameter_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_dim(),
                got: m.len(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameter field has non-finite entries"));
        }
        let kappa: Vec<f64> = self.centroid_means(m).into_iter().map(f64::exp).collect();
        if kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("diffusion coefficient overflowed"));
        }
        let k = self.assembler.assemble(&kappa);
        let (k, lift) = k.eliminate_dirichlet(&self.fixed, &self.dirichlet);
        let factor = CholeskyFactor::factor(&k)?;
        let mut u: Vec<f64> = (0..m.len())
            .map(|i| if self.fixed[i] { self.dirichlet[i] } else { -lift[i] })
            .collect();
        factor.solve_in_place(&mut u);
        let obs = self.obs.operator.mul_vec(&u);
        Ok(PoissonState {
            m: m.to_vec(),
            kappa,
            u,
            obs,
            factor,
        })
    }

    fn observations<'s>(&self, state: &'s PoissonState) -> &'s [f64] {
        &state.obs
    }

    fn solve_adjoint(&self, state: &PoissonState) -> Vec<f64> {
        let r = self.weighted_residual(state);
        let rhs: Vec<f64> = self.obs.operator.transpose_mul_vec(&r).iter().map(|x| -x).collect();
        self.homogeneous_solve(state, rhs)
    }

    fn misfit_gradient(&self, state: &PoissonState, p: &[f64]) -> Vec<f64> {
        self.scatter_to_vertices(|t| {
            let gu = self.grad_on(t, &state.u);
            let gp = self.grad_on(t, p);
            state.kappa[t] * (gu[0] * gp[0] + gu[1] * gp[1])
        })
    }

    fn hessian_action(&self, state: &PoissonState, p: &[f64], mhat: &[f64], gauss_newton: bool) -> Vec<f64> {
        let mc = self.centroid_means(mhat);
        let dk: Vec<f64> = state.kappa.iter().zip(&mc).map(|(k, m)| k * m).collect();

        let rhs: Vec<f64> = self
            .assembler
            .apply(&self.mesh, &dk, &state.u)
            .iter()
            .map(|x| -x)
            .collect();
        let uhat = self.homogeneous_solve(state, rhs);

        let s2 = self.obs.sigma.powi(2);
        let buhat: Vec<f64> = self.obs.operator.mul_vec(&uhat).iter().map(|x| x / s2).collect();
        let mut rhs: Vec<f64> = self.obs.operator.transpose_mul_vec(&buhat).iter().map(|x| -x).collect();
        if !gauss_newton {
            let dkp = self.assembler.apply(&self.mesh, &dk, p);
            for (r, x) in rhs.iter_mut().zip(dkp) {
                *r -= x;
            }
        }
        let phat = self.homogeneous_solve(state, rhs);

        self.scatter_to_vertices(|t| {
            let gu = self.grad_on(t, &state.u);
            let gph = self.grad_on(t, &phat);
            let mut s = gu[0] * gph[0] + gu[1] * gph[1];
            if !gauss_newton {
                let guh = self.grad_on(t, &uhat);
                let gp = self.grad_on(t, p);
                s += guh[0] * gp[0] + guh[1] * gp[1] + mc[t] * (gu[0] * gp[0] + gu[1] * gp[1]);
            }
            state.kappa[t] * s
        })
    }

    /// `ln ∫_bottom e^m ∂u/∂y ds`
    fn qoi(&self, state: &PoissonState) -> Result<f64> {
        let flux: f64 = self
            .bottom
            .iter()
            .map(|&(t, h)| state.kappa[t] * self.grad_on(t, &state.u)[1] * h)
            .sum();
        if flux > 0.0 {
            Ok(flux.ln())
        } else {
            Err(Error::NonPositiveFlux(flux))
        }
    }
}
