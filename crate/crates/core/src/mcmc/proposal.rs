use std::fmt;

use rand::Rng;

use super::target::{ChainState, Evaluator};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sub};
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;
use crate::random::standard_normal_vec;

/// Gaussian proposals `N(μ(m), s² Γ)` with `Γ` the prior covariance `C` or
/// the Laplace covariance `H⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// `N(m, scale² C)`
    RandomWalk { scale: f64 },
    /// `N(m_pr + √(1−β²)(m − m_pr), β² C)`
    Pcn { beta: f64 },
    /// `N(m + τ C ∇log π, 2τ C)`
    Mala { tau: f64 },
    /// `N(√(1−β²) m + β√h/2 (m_pr − C∇Φ), β² C)`, `β = 4√h/(4+h)`
    InfMala { h: f64 },
    /// `N(m_MAP + √(1−β²)(m − m_MAP), β² H⁻¹)`
    HPcn { beta: f64 },
    /// `N(m + τ H⁻¹ ∇log π, 2τ H⁻¹)`
    HMala { tau: f64 },
    /// `N(√(1−β²) m + β√h/2 (m − H⁻¹R(m − m_pr) − H⁻¹∇Φ), β² H⁻¹)`
    HInfMala { h: f64 },
}

pub fn inf_mala_beta(h: f64) -> f64 {
    4.0 * h.sqrt() / (4.0 + h)
}

impl Proposal {
    pub const NAMES: [&'static str; 7] = ["rw", "pcn", "mala", "inf-mala", "h-pcn", "h-mala", "h-inf-mala"];

    /// Proposal from its name and tuning parameter.
    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        let p = match name {
            "rw" => Proposal::RandomWalk { scale: param },
            "pcn" => Proposal::Pcn { beta: param },
            "mala" => Proposal::Mala { tau: param },
            "inf-mala" => Proposal::InfMala { h: param },
            "h-pcn" => Proposal::HPcn { beta: param },
            "h-mala" => Proposal::HMala { tau: param },
            "h-inf-mala" => Proposal::HInfMala { h: param },
            other => return Err(Error::invalid(format!("unknown proposal '{other}'"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Proposal::RandomWalk { .. } => "rw",
            Proposal::Pcn { .. } => "pcn",
            Proposal::Mala { .. } => "mala",
            Proposal::InfMala { .. } => "inf-mala",
            Proposal::HPcn { .. } => "h-pcn",
            Proposal::HMala { .. } => "h-mala",
            Proposal::HInfMala { .. } => "h-inf-mala",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Proposal::RandomWalk { scale } => scale,
            Proposal::Pcn { beta } | Proposal::HPcn { beta } => beta,
            Proposal::Mala { tau } | Proposal::HMala { tau } => tau,
            Proposal::InfMala { h } | Proposal::HInfMala { h } => h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Proposal::Pcn { beta } | Proposal::HPcn { beta } => {
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(Error::invalid(format!("{}: beta must lie in (0, 1], got {beta}", self.name())));
                }
            }
            other => {
                let v = other.param();
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{}: parameter must be positive, got {v}", self.name())));
                }
            }
        }
        Ok(())
    }

    pub fn needs_gradient(&self) -> bool {
        matches!(
            self,
            Proposal::Mala { .. } | Proposal::InfMala { .. } | Proposal::HMala { .. } | Proposal::HInfMala { .. }
        )
    }

    pub fn needs_laplace(&self) -> bool {
        matches!(self, Proposal::HPcn { .. } | Proposal::HMala { .. } | Proposal::HInfMala { .. })
    }

    /// Standard deviation multiplying the covariance square root.
    fn noise_scale(&self) -> f64 {
        match *self {
            Proposal::RandomWalk { scale } => scale,
            Proposal::Pcn { beta } | Proposal::HPcn { beta } => beta,
            Proposal::Mala { tau } | Proposal::HMala { tau } => (2.0 * tau).sqrt(),
            Proposal::InfMala { h } | Proposal::HInfMala { h } => inf_mala_beta(h),
        }
    }

    pub fn mean<M: ForwardModel, P: GaussianPrior>(
        &self,
        ev: &Evaluator<'_, '_, M, P>,
        from: &ChainState<M::State>,
    ) -> Result<Vec<f64>> {
        let prior = ev.prior();
        let m = &from.m;
        Ok(match *self {
            Proposal::RandomWalk { .. } => m.clone(),
            Proposal::Pcn { beta } => crn_mean(m, prior.mean(), beta),
            Proposal::Mala { tau } => {
                let mut out = m.clone();
                axpy(tau, &prior.apply_covariance(&ev.grad_log_post(from)), &mut out);
                out
            }
            Proposal::InfMala { h } => {
                let beta = inf_mala_beta(h);
                let mut drift = prior.apply_covariance(ev.grad_misfit(from));
                for (d, p) in drift.iter_mut().zip(prior.mean()) {
                    *d = p - *d;
                }
                let mut out: Vec<f64> = m.iter().map(|x| (1.0 - beta * beta).sqrt() * x).collect();
                axpy(beta * h.sqrt() / 2.0, &drift, &mut out);
                out
            }
            Proposal::HPcn { beta } => crn_mean(m, ev.laplace()?.map_point(), beta),
            Proposal::HMala { tau } => {
                let la = ev.laplace()?;
                let mut out = m.clone();
                axpy(tau, &la.apply_hinv(prior, &ev.grad_log_post(from)), &mut out);
                out
            }
            Proposal::HInfMala { h } => {
                let la = ev.laplace()?;
                let beta = inf_mala_beta(h);
                // m − H⁻¹(R(m − m_pr) + ∇Φ) = m + H⁻¹ ∇log π
                let mut inner = m.clone();
                axpy(1.0, &la.apply_hinv(prior, &ev.grad_log_post(from)), &mut inner);
                let mut out: Vec<f64> = m.iter().map(|x| (1.0 - beta * beta).sqrt() * x).collect();
                axpy(beta * h.sqrt() / 2.0, &inner, &mut out);
                out
            }
        })
    }

    pub fn sample<M: ForwardModel, P: GaussianPrior, R: Rng + ?Sized>(
        &self,
        ev: &Evaluator<'_, '_, M, P>,
        from: &ChainState<M::State>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mut out = self.mean(ev, from)?;
        let z = standard_normal_vec(rng, out.len());
        let noise = if self.needs_laplace() {
            ev.laplace()?.apply_sqrt_hinv(ev.prior(), &z)
        } else {
            ev.prior().apply_sqrt(&z)
        };
        axpy(self.noise_scale(), &noise, &mut out);
        Ok(out)
    }

    /// `log q(to | from)` up to a constant that depends only on the proposal
    /// parameters.
    pub fn log_density<M: ForwardModel, P: GaussianPrior>(
        &self,
        ev: &Evaluator<'_, '_, M, P>,
        from: &ChainState<M::State>,
        to: &[f64],
    ) -> Result<f64> {
        let d = sub(to, &self.mean(ev, from)?);
        let pd = if self.needs_laplace() {
            ev.laplace()?.apply_hessian(ev.prior(), &d)
        } else {
            ev.prior().apply_precision(&d)
        };
        let s = self.noise_scale();
        Ok(-0.5 * dot(&d, &pd) / (s * s))
    }
}

fn crn_mean(m: &[f64], center: &[f64], beta: f64) -> Vec<f64> {
    let a = (1.0 - beta * beta).sqrt();
    m.iter().zip(center).map(|(x, c)| c + a * (x - c)).collect()
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.param())
    }
}
