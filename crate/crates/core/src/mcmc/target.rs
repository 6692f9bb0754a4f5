use std::cell::{Cell, OnceCell};

use log::debug;

use crate::error::{Error, Result};
use crate::laplace::LaplaceApprox;
use crate::linalg::axpy;
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;

/// Unnormalized posterior `log π(m) = −Φ(m) − ½‖m − m_pr‖²_R`, plus the
/// optional Laplace approximation used by the Hessian-informed proposals.
pub struct PosteriorTarget<'a, M, P> {
    pub model: &'a M,
    pub prior: &'a P,
    pub laplace: Option<&'a LaplaceApprox>,
}

impl<M, P> Clone for PosteriorTarget<'_, M, P> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M, P> Copy for PosteriorTarget<'_, M, P> {}

impl<'a, M: ForwardModel, P: GaussianPrior> PosteriorTarget<'a, M, P> {
    pub fn new(model: &'a M, prior: &'a P) -> Self {
        PosteriorTarget {
            model,
            prior,
            laplace: None,
        }
    }

    pub fn with_laplace(mut self, laplace: &'a LaplaceApprox) -> Self {
        self.laplace = Some(laplace);
        self
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn log_posterior(&self, m: &[f64]) -> Result<f64> {
        let s = self.model.solve_forward(m)?;
        Ok(-self.model.misfit_cost(&s) - self.prior.cost(m))
    }

    pub fn grad_log_posterior(&self, m: &[f64]) -> Result<Vec<f64>> {
        let s = self.model.solve_forward(m)?;
        let p = self.model.solve_adjoint(&s);
        let mut g = self.model.misfit_gradient(&s, &p);
        axpy(1.0, &self.prior.gradient(m), &mut g);
        for x in g.iter_mut() {
            *x = -*x;
        }
        Ok(g)
    }
}

/// A point of the chain with its cached forward solve. The misfit gradient
/// and the QoI are filled in lazily.
pub struct ChainState<S> {
    pub m: Vec<f64>,
    /// `−∞` when the forward model failed at `m`.
    pub log_post: f64,
    pub misfit: f64,
    model_state: Option<S>,
    grad_misfit: OnceCell<Vec<f64>>,
    qoi: OnceCell<Option<f64>>,
}

impl<S> ChainState<S> {
    pub fn is_valid(&self) -> bool {
        self.model_state.is_some()
    }
}

/// Chain-local evaluation context: counts PDE solves and fills state caches.
pub struct Evaluator<'t, 'a, M, P> {
    pub target: &'t PosteriorTarget<'a, M, P>,
    solves: Cell<u64>,
}

impl<'t, 'a, M: ForwardModel, P: GaussianPrior> Evaluator<'t, 'a, M, P> {
    pub fn new(target: &'t PosteriorTarget<'a, M, P>) -> Self {
        Evaluator {
            target,
            solves: Cell::new(0),
        }
    }

    pub fn solves(&self) -> u64 {
        self.solves.get()
    }

    fn count(&self, n: u64) {
        self.solves.set(self.solves.get() + n);
    }

    pub fn prior(&self) -> &'a P {
        self.target.prior
    }

    pub fn laplace(&self) -> Result<&'a LaplaceApprox> {
        self.target
            .laplace
            .ok_or_else(|| Error::invalid("this proposal needs a Laplace approximation"))
    }

    /// Forward solve at `m`. A model failure gives a state with
    /// `log_post = −∞`, so it is always rejected.
    pub fn evaluate(&self, m: Vec<f64>) -> ChainState<M::State> {
        self.count(1);
        let prior_cost = self.target.prior.cost(&m);
        match self.target.model.solve_forward(&m) {
            Ok(s) => {
                let misfit = self.target.model.misfit_cost(&s);
                let lp = -misfit - prior_cost;
                ChainState {
                    m,
                    log_post: if lp.is_nan() { f64::NEG_INFINITY } else { lp },
                    misfit,
                    model_state: Some(s),
                    grad_misfit: OnceCell::new(),
                    qoi: OnceCell::new(),
                }
            }
            Err(e) => {
                debug!("forward model failed at proposed point: {e}");
                ChainState {
                    m,
                    log_post: f64::NEG_INFINITY,
                    misfit: f64::INFINITY,
                    model_state: None,
                    grad_misfit: OnceCell::new(),
                    qoi: OnceCell::new(),
                }
            }
        }
    }

    /// `∇Φ` at the state; costs one adjoint solve the first time. NaN for a
    /// failed state.
    pub fn grad_misfit<'s>(&self, state: &'s ChainState<M::State>) -> &'s [f64] {
        state.grad_misfit.get_or_init(|| match &state.model_state {
            Some(s) => {
                self.count(1);
                let p = self.target.model.solve_adjoint(s);
                self.target.model.misfit_gradient(s, &p)
            }
            None => vec![f64::NAN; state.m.len()],
        })
    }

    /// `∇ log π`
    pub fn grad_log_post(&self, state: &ChainState<M::State>) -> Vec<f64> {
        let mut g = self.target.prior.gradient(&state.m);
        axpy(1.0, self.grad_misfit(state), &mut g);
        for x in g.iter_mut() {
            *x = -*x;
        }
        g
    }

    /// QoI at the state; `None` for failed states and unphysical samples.
    pub fn qoi(&self, state: &ChainState<M::State>) -> Option<f64> {
        *state.qoi.get_or_init(|| {
            state
                .model_state
                .as_ref()
                .and_then(|s| self.target.model.qoi(s).ok())
        })
    }
}
