use std::fmt;

use log::warn;
use rand::Rng;

use super::proposal::Proposal;
use super::target::{ChainState, Evaluator};
use crate::error::{Error, Result};
use crate::linalg::{axpy, ln_one_minus_exp};
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;
use crate::random::standard_normal_vec;

/// Densities needed by the delayed-rejection acceptance recursion. Stage
/// `k` proposals may depend only on the point they start from.
pub trait DelayedRejectionTarget {
    type Point;

    fn log_density(&self, x: &Self::Point) -> f64;

    /// `log q_stage(to | from)`, stages counted from zero.
    fn log_proposal(&self, stage: usize, from: &Self::Point, to: &Self::Point) -> f64;
}

/// `log α` for a Metropolis–Hastings move, in log space. NaN inputs give
/// `−∞` (reject) with a warning.
pub fn mh_log_accept(lp_current: f64, lp_proposed: f64, log_q_reverse: f64, log_q_forward: f64) -> f64 {
    if lp_proposed == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let la = (lp_proposed - lp_current) + (log_q_reverse - log_q_forward);
    if la.is_nan() {
        warn!("acceptance ratio is NaN; rejecting");
        return f64::NEG_INFINITY;
    }
    la.min(0.0)
}

/// `log α_j(y_0, …, y_j)` for delayed rejection, where `y_0` is the current
/// point, `y_1 … y_{j−1}` the rejected stage proposals and `y_j` the new
/// candidate:
///
/// `α_j = min{1, π(y_j) Π_k q_k(y_{j−k}|y_j) Π_{k<j} (1 − α_k(y_j, …, y_{j−k}))
///             / π(y_0) Π_k q_k(y_k|y_0) Π_{k<j} (1 − α_k(y_0, …, y_k))}`
///
/// A vanishing `(1 − α_k)` in the denominator forces rejection.
pub fn dr_log_accept<T: DelayedRejectionTarget>(target: &T, points: &[&T::Point]) -> f64 {
    let j = points.len() - 1;
    assert!(j >= 1, "need a current point and a candidate");
    let lp_new = target.log_density(points[j]);
    if lp_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut num = lp_new;
    let mut den = target.log_density(points[0]);
    for k in 1..=j {
        num += target.log_proposal(k - 1, points[j], points[j - k]);
        den += target.log_proposal(k - 1, points[0], points[k]);
    }
    let reversed: Vec<&T::Point> = points.iter().rev().copied().collect();
    for k in 1..j {
        let d = ln_one_minus_exp(dr_log_accept(target, &points[..=k]));
        if d == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        den += d;
        num += ln_one_minus_exp(dr_log_accept(target, &reversed[..=k]));
    }
    let la = num - den;
    if la.is_nan() {
        warn!("delayed-rejection ratio is NaN; rejecting");
        return f64::NEG_INFINITY;
    }
    la.min(0.0)
}

/// Where the likelihood-informed-subspace proposal is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiliCenter {
    /// Random walk around the current LIS coordinates.
    Current,
    /// Crank–Nicolson move toward the MAP coordinates.
    Map,
}

impl DiliCenter {
    pub fn name(self) -> &'static str {
        match self {
            DiliCenter::Current => "current",
            DiliCenter::Map => "map",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiliConfig {
    /// pCN parameter on the complementary space.
    pub beta: f64,
    /// LIS proposal covariance `τ (I + Λ)⁻¹`.
    pub tau: f64,
    pub center: DiliCenter,
}

impl Default for DiliConfig {
    fn default() -> Self {
        DiliConfig {
            beta: 0.8,
            tau: 0.1,
            center: DiliCenter::Map,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Mh(Proposal),
    /// Stages tried in order.
    Dr(Vec<Proposal>),
    Dili(DiliConfig),
}

impl Kernel {
    pub fn validate(&self, has_laplace: bool) -> Result<()> {
        let proposals: &[Proposal] = match self {
            Kernel::Mh(p) => std::slice::from_ref(p),
            Kernel::Dr(ps) => {
                if ps.is_empty() {
                    return Err(Error::invalid("delayed rejection needs at least one stage"));
                }
                ps
            }
            Kernel::Dili(c) => {
                if !has_laplace {
                    return Err(Error::invalid("DILI needs a Laplace approximation"));
                }
                if !(c.beta > 0.0 && c.beta <= 1.0) {
                    return Err(Error::invalid(format!("DILI beta must lie in (0, 1], got {}", c.beta)));
                }
                let tau_ok = match c.center {
                    DiliCenter::Current => c.tau > 0.0 && c.tau.is_finite(),
                    DiliCenter::Map => c.tau > 0.0 && c.tau <= 1.0,
                };
                if !tau_ok {
                    return Err(Error::invalid(format!("DILI tau out of range: {}", c.tau)));
                }
                &[]
            }
        };
        for p in proposals {
            p.validate()?;
            if p.needs_laplace() && !has_laplace {
                return Err(Error::invalid(format!("{} needs a Laplace approximation", p.name())));
            }
        }
        Ok(())
    }

    /// Acceptance statistics tracked per step: proposal stages for DR, the
    /// two sub-moves for DILI.
    pub fn num_stages(&self) -> usize {
        match self {
            Kernel::Mh(_) => 1,
            Kernel::Dr(ps) => ps.len(),
            Kernel::Dili(_) => 2,
        }
    }

    pub fn needs_laplace(&self) -> bool {
        match self {
            Kernel::Mh(p) => p.needs_laplace(),
            Kernel::Dr(ps) => ps.iter().any(Proposal::needs_laplace),
            Kernel::Dili(_) => true,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Mh(p) => write!(f, "mh({p})"),
            Kernel::Dr(ps) => {
                let s: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                write!(f, "dr({})", s.join(","))
            }
            Kernel::Dili(c) => write!(f, "dili(beta:{},tau:{},center:{})", c.beta, c.tau, c.center.name()),
        }
    }
}

/// Outcome of one kernel application.
///
/// `accepted` is 0/1 for MH, the accepting stage (1-based, 0 for none) for
/// DR and a bit mask (1 = LIS, 2 = CS) for DILI.
pub struct StepOutcome<S> {
    pub state: ChainState<S>,
    pub accepted: u32,
}

struct StagedTarget<'e, 't, 'a, M, P> {
    ev: &'e Evaluator<'t, 'a, M, P>,
    proposals: &'e [Proposal],
}

impl<M: ForwardModel, P: GaussianPrior> DelayedRejectionTarget for StagedTarget<'_, '_, '_, M, P> {
    type Point = ChainState<M::State>;

    fn log_density(&self, x: &Self::Point) -> f64 {
        x.log_post
    }

    fn log_proposal(&self, stage: usize, from: &Self::Point, to: &Self::Point) -> f64 {
        self.proposals[stage]
            .log_density(self.ev, from, &to.m)
            .unwrap_or(f64::NAN)
    }
}

/// Delayed rejection over `proposals`; a single stage is plain MH.
pub fn dr_step<M, P, R>(
    ev: &Evaluator<'_, '_, M, P>,
    proposals: &[Proposal],
    current: ChainState<M::State>,
    rng: &mut R,
) -> Result<StepOutcome<M::State>>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    let target = StagedTarget { ev, proposals };
    let mut points = vec![current];
    for (stage, q) in proposals.iter().enumerate() {
        let y = q.sample(ev, &points[0], rng)?;
        points.push(ev.evaluate(y));
        let refs: Vec<&ChainState<M::State>> = points.iter().collect();
        let la = dr_log_accept(&target, &refs);
        let u: f64 = rng.random();
        if u.ln() < la {
            let state = points.pop().expect("candidate present");
            return Ok(StepOutcome {
                state,
                accepted: stage as u32 + 1,
            });
        }
    }
    points.truncate(1);
    Ok(StepOutcome {
        state: points.pop().expect("current present"),
        accepted: 0,
    })
}

pub fn mh_step<M, P, R>(
    ev: &Evaluator<'_, '_, M, P>,
    proposal: &Proposal,
    current: ChainState<M::State>,
    rng: &mut R,
) -> Result<StepOutcome<M::State>>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    dr_step(ev, std::slice::from_ref(proposal), current, rng)
}

/// Metropolis-within-Gibbs over the likelihood-informed subspace and its
/// complement.
pub fn dili_step<M, P, R>(
    ev: &Evaluator<'_, '_, M, P>,
    cfg: &DiliConfig,
    current: ChainState<M::State>,
    rng: &mut R,
) -> Result<StepOutcome<M::State>>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    let la = ev.laplace()?;
    let prior = ev.prior();
    let lam = la.eigenvalues();
    let rank = la.rank();
    let mut accepted = 0;

    // LIS: Gaussian in r with covariance τ (I + Λ)⁻¹
    let (r, c) = la.split(&current.m);
    let sd: Vec<f64> = lam.iter().map(|l| (cfg.tau / (1.0 + l)).sqrt()).collect();
    let r_map = la.project(la.map_point(), rank);
    let center = |r: &[f64]| -> Vec<f64> {
        match cfg.center {
            DiliCenter::Current => r.to_vec(),
            DiliCenter::Map => {
                let a = (1.0 - cfg.tau).sqrt();
                r.iter().zip(&r_map).map(|(x, m)| m + a * (x - m)).collect()
            }
        }
    };
    let log_q = |from: &[f64], to: &[f64]| -> f64 {
        let mu = center(from);
        -0.5 * to
            .iter()
            .zip(&mu)
            .zip(&sd)
            .map(|((t, m), s)| ((t - m) / s).powi(2))
            .sum::<f64>()
    };
    let z = standard_normal_vec(rng, rank);
    let r_new: Vec<f64> = center(&r)
        .iter()
        .zip(&z)
        .zip(&sd)
        .map(|((m, z), s)| m + s * z)
        .collect();
    let cand = ev.evaluate(la.combine(&r_new, &c));
    let lq = match cfg.center {
        DiliCenter::Current => 0.0,
        DiliCenter::Map => log_q(&r_new, &r) - log_q(&r, &r_new),
    };
    let log_a = mh_log_accept(current.log_post, cand.log_post, lq, 0.0);
    let u: f64 = rng.random();
    let (state, r) = if u.ln() < log_a {
        accepted |= 1;
        (cand, r_new)
    } else {
        (current, r)
    };

    // CS: pCN on the complement; the prior factorizes across the split so
    // the acceptance ratio is a likelihood ratio.
    let (_, c_pr) = la.split(prior.mean());
    let z = standard_normal_vec(rng, prior.dim());
    let sz = prior.apply_sqrt(&z);
    let (_, sz_perp) = la.split(&sz);
    let a = (1.0 - cfg.beta * cfg.beta).sqrt();
    let mut c_new: Vec<f64> = c.iter().zip(&c_pr).map(|(x, p)| p + a * (x - p)).collect();
    axpy(cfg.beta, &sz_perp, &mut c_new);
    let cand = ev.evaluate(la.combine(&r, &c_new));
    let log_a = if cand.is_valid() {
        mh_log_accept(-state.misfit, -cand.misfit, 0.0, 0.0)
    } else {
        f64::NEG_INFINITY
    };
    let u: f64 = rng.random();
    let state = if u.ln() < log_a {
        accepted |= 2;
        cand
    } else {
        state
    };
    Ok(StepOutcome { state, accepted })
}

pub fn kernel_step<M, P, R>(
    ev: &Evaluator<'_, '_, M, P>,
    kernel: &Kernel,
    current: ChainState<M::State>,
    rng: &mut R,
) -> Result<StepOutcome<M::State>>
where
    M: ForwardModel,
    P: GaussianPrior,
    R: Rng + ?Sized,
{
    match kernel {
        Kernel::Mh(p) => mh_step(ev, p, current, rng),
        Kernel::Dr(ps) => dr_step(ev, ps, current, rng),
        Kernel::Dili(c) => dili_step(ev, c, current, rng),
    }
}
