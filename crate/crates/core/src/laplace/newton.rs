use log::{debug, info};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub grad_rel_tol: f64,
    pub grad_abs_tol: f64,
    pub max_iters: usize,
    pub max_cg_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Iterations using the Gauss–Newton Hessian before switching to the
    /// full Hessian.
    pub gn_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            grad_rel_tol: 1e-6,
            grad_abs_tol: 1e-12,
            max_iters: 50,
            max_cg_iters: 200,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            gn_iters: 5,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_rel_tol > 0.0 && self.grad_abs_tol > 0.0) {
            return Err(Error::invalid("Newton tolerances must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("Armijo constant must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtracking factor must lie in (0, 1)"));
        }
        if self.max_iters == 0 || self.max_cg_iters == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub m: Vec<f64>,
    pub iterations: usize,
    /// `√(gᵀ C g)` at the returned point.
    pub grad_norm: f64,
    pub initial_grad_norm: f64,
    /// `J` after each accepted step, starting with `J(m0)`.
    pub cost_history: Vec<f64>,
    /// Forward, adjoint and incremental solves used.
    pub solves: u64,
}

impl NewtonResult {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().expect("history holds J(m0)")
    }
}

const MAX_BACKTRACKS: usize = 40;

/// MAP point of `J(m) = Φ(m) + ½‖m − m_pr‖²_R` by inexact Newton-CG.
///
/// Gradient norms are measured in the prior covariance norm `√(gᵀ C g)`,
/// which is the dual norm matching the preconditioner.
pub fn compute_map<M, P>(model: &M, prior: &P, m0: &[f64], cfg: &NewtonConfig) -> Result<NewtonResult>
where
    M: ForwardModel,
    P: GaussianPrior,
{
    cfg.validate()?;
    let mut solves = 0u64;
    let mut m = m0.to_vec();
    let mut state = model.solve_forward(&m)?;
    solves += 1;
    let mut cost = model.misfit_cost(&state) + prior.cost(&m);
    let mut history = vec![cost];

    let gradient = |state: &M::State, m: &[f64], solves: &mut u64| {
        let p = model.solve_adjoint(state);
        *solves += 1;
        let mut g = model.misfit_gradient(state, &p);
        axpy(1.0, &prior.gradient(m), &mut g);
        (p, g)
    };

    let (mut adj, mut g) = gradient(&state, &m, &mut solves);
    let mut cg = prior.apply_covariance(&g);
    let g0 = dot(&g, &cg).max(0.0).sqrt();
    let mut gnorm = g0;
    let tol = cfg.grad_abs_tol.max(cfg.grad_rel_tol * g0);
    info!("Newton-CG: J = {cost:.6e}, |g| = {g0:.3e}, target {tol:.3e}");

    for it in 0..cfg.max_iters {
        if gnorm <= tol {
            return Ok(NewtonResult {
                m,
                iterations: it,
                grad_norm: gnorm,
                initial_grad_norm: g0,
                cost_history: history,
                solves,
            });
        }
        let gauss_newton = it < cfg.gn_iters;
        let forcing = 0.5f64.min((gnorm / g0).sqrt());
        let hess = |v: &[f64], solves: &mut u64| {
            *solves += 2;
            let mut h = model.hessian_action(&state, &adj, v, gauss_newton);
            axpy(1.0, &prior.apply_precision(v), &mut h);
            h
        };
        let (dir, cg_iters) = preconditioned_cg(
            |v| hess(v, &mut solves),
            |v| prior.apply_covariance(v),
            &g,
            &cg,
            forcing * gnorm,
            cfg.max_cg_iters,
        );

        let slope = dot(&g, &dir);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = m.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            if let Ok(s) = model.solve_forward(&trial) {
                solves += 1;
                let c = model.misfit_cost(&s) + prior.cost(&trial);
                if c.is_finite() && c <= cost + cfg.armijo_c * alpha * slope {
                    accepted = Some((trial, s, c));
                    break;
                }
            } else {
                solves += 1;
            }
            alpha *= cfg.backtrack_factor;
        }
        let Some((trial, s, c)) = accepted else {
            return Err(Error::NewtonNotConverged {
                iterations: it,
                grad_norm: gnorm,
            });
        };
        m = trial;
        state = s;
        cost = c;
        history.push(cost);
        (adj, g) = gradient(&state, &m, &mut solves);
        cg = prior.apply_covariance(&g);
        gnorm = dot(&g, &cg).max(0.0).sqrt();
        debug!(
            "Newton {:>2} {}: J = {cost:.8e}, |g| = {gnorm:.3e}, step {alpha:.3e}, CG {cg_iters}",
            it + 1,
            if gauss_newton { "GN" } else { "full" }
        );
    }
    if gnorm <= tol {
        return Ok(NewtonResult {
            m,
            iterations: cfg.max_iters,
            grad_norm: gnorm,
            initial_grad_norm: g0,
            cost_history: history,
            solves,
        });
    }
    Err(Error::NewtonNotConverged {
        iterations: cfg.max_iters,
        grad_norm: gnorm,
    })
}

/// Solves `H d = −g` approximately with CG preconditioned by `C`, stopping
/// once `√(rᵀ C r) ≤ tol`. Negative curvature ends the iteration with the
/// current iterate, or with the preconditioned steepest-descent direction
/// if it is met on the first step.
fn preconditioned_cg(
    mut hess: impl FnMut(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    g: &[f64],
    cg: &[f64],
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, usize) {
    let n = g.len();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z: Vec<f64> = cg.iter().map(|v| -v).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for k in 0..max_iters {
        if rz.max(0.0).sqrt() <= tol {
            return (x, k);
        }
        let hp = hess(&p);
        let curv = dot(&p, &hp);
        if curv <= 0.0 {
            if k == 0 {
                return (p, 1);
            }
            return (x, k);
        }
        let a = rz / curv;
        axpy(a, &p, &mut x);
        axpy(-a, &hp, &mut r);
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let b = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + b * *pi;
        }
    }
    (x, max_iters)
}
