//! Transition kernels (MH, delayed rejection, DILI) over the discretized
//! posterior, with prior- and Hessian-informed Gaussian proposals.

mod kernel;
mod proposal;
mod target;

pub use kernel::{
    dili_step, dr_log_accept, dr_step, kernel_step, mh_log_accept, mh_step, DelayedRejectionTarget, DiliCenter,
    DiliConfig, Kernel, StepOutcome,
};
pub use proposal::{inf_mala_beta, Proposal};
pub use target::{ChainState, Evaluator, PosteriorTarget};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ForwardModel;
use crate::prior::GaussianPrior;

/// Per-iteration record of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub seed: u64,
    pub kernel: String,
    /// See [`StepOutcome::accepted`].
    pub accepted: Vec<u32>,
    pub log_post: Vec<f64>,
    /// `None` where the QoI was undefined.
    pub qoi: Vec<Option<f64>>,
    /// Projected coordinates of each sample.
    pub coords: Vec<Vec<f64>>,
    /// PDE solves spent by the chain, including its starting point.
    pub solves: u64,
    /// Acceptance rate of each stage or sub-move.
    pub acceptance: Vec<f64>,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }
}

/// Fraction of steps accepted at each stage (DR) or by each sub-move
/// (DILI).
pub fn acceptance_rates(kernel: &Kernel, accepted: &[u32]) -> Vec<f64> {
    let n = accepted.len().max(1) as f64;
    let count = |f: &dyn Fn(u32) -> bool| accepted.iter().filter(|&&a| f(a)).count() as f64 / n;
    match kernel {
        Kernel::Mh(_) => vec![count(&|a| a == 1)],
        Kernel::Dr(ps) => (1..=ps.len() as u32).map(|k| count(&|a| a == k)).collect(),
        Kernel::Dili(_) => vec![count(&|a| a & 1 != 0), count(&|a| a & 2 != 0)],
    }
}

/// Runs `n` kernel steps from `start`, recording `project(m)` for each
/// sample.
pub fn run_chain<M, P>(
    target: &PosteriorTarget<'_, M, P>,
    kernel: &Kernel,
    start: Vec<f64>,
    n: usize,
    seed: u64,
    project: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
) -> Result<ChainRecord>
where
    M: ForwardModel,
    P: GaussianPrior,
{
    if n == 0 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    kernel.validate(target.laplace.is_some())?;
    let ev = Evaluator::new(target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = ev.evaluate(start);
    if !current.is_valid() || !current.log_post.is_finite() {
        return Err(Error::invalid("forward model failed at the chain's starting point"));
    }
    let mut rec = ChainRecord {
        seed,
        kernel: kernel.to_string(),
        accepted: Vec::with_capacity(n),
        log_post: Vec::with_capacity(n),
        qoi: Vec::with_capacity(n),
        coords: Vec::with_capacity(n),
        solves: 0,
        acceptance: Vec::new(),
    };
    for _ in 0..n {
        let out = kernel_step(&ev, kernel, current, &mut rng)?;
        current = out.state;
        rec.accepted.push(out.accepted);
        rec.log_post.push(current.log_post);
        rec.qoi.push(ev.qoi(&current));
        rec.coords.push(project(&current.m));
    }
    rec.solves = ev.solves();
    rec.acceptance = acceptance_rates(kernel, &rec.accepted);
    Ok(rec)
}

/// Independent chains on scoped threads; chain `j` uses `base_seed + j`.
/// Records are returned in chain order.
pub fn run_chains<M, P>(
    target: &PosteriorTarget<'_, M, P>,
    kernel: &Kernel,
    starts: Vec<Vec<f64>>,
    n: usize,
    base_seed: u64,
    project: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
) -> Result<Vec<ChainRecord>>
where
    M: ForwardModel,
    P: GaussianPrior,
{
    kernel.validate(target.laplace.is_some())?;
    let results: Vec<Result<ChainRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .into_iter()
            .enumerate()
            .map(|(j, start)| {
                scope.spawn(move || {
                    let seed = base_seed.wrapping_add(j as u64);
                    let rec = run_chain(target, kernel, start, n, seed, project);
                    if let Ok(r) = &rec {
                        info!("chain {j}: acceptance {:?}, {} solves", r.acceptance, r.solves);
                    }
                    rec
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::invalid("chain worker panicked"))))
            .collect()
    });
    results.into_iter().collect()
}
