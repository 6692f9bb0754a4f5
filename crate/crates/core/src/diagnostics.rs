//! Multi-chain convergence and efficiency diagnostics on projected
//! coordinates.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::laplace::LaplaceApprox;
use crate::mcmc::ChainRecord;

/// `M` chains of `N` samples of `k` coordinates, stored per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnsemble {
    /// `series[i][j]` is coordinate `i` of chain `j`.
    series: Vec<Vec<Vec<f64>>>,
    chains: usize,
    samples: usize,
}

impl ChainEnsemble {
    /// From `chains[j][t]`, the coordinate vector of sample `t` in chain `j`.
    pub fn new(chains: &[Vec<Vec<f64>>]) -> Result<Self> {
        let m = chains.len();
        if m == 0 {
            return Err(Error::DegenerateEnsemble("no chains".into()));
        }
        let n = chains[0].len();
        if n == 0 {
            return Err(Error::DegenerateEnsemble("empty chain".into()));
        }
        let k = chains[0][0].len();
        if k == 0 {
            return Err(Error::DegenerateEnsemble("no coordinates".into()));
        }
        for c in chains {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
            if let Some(bad) = c.iter().find(|s| s.len() != k) {
                return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
            }
        }
        let series = (0..k)
            .map(|i| chains.iter().map(|c| c.iter().map(|s| s[i]).collect()).collect())
            .collect();
        Ok(ChainEnsemble {
            series,
            chains: m,
            samples: n,
        })
    }

    pub fn from_records(records: &[ChainRecord]) -> Result<Self> {
        let chains: Vec<Vec<Vec<f64>>> = records.iter().map(|r| r.coords.clone()).collect();
        Self::new(&chains)
    }

    /// `M`
    pub fn num_chains(&self) -> usize {
        self.chains
    }

    /// `N`
    pub fn num_samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.series.len()
    }

    /// Coordinate `i` of chain `j`.
    pub fn series(&self, i: usize, j: usize) -> &[f64] {
        &self.series[i][j]
    }
}

/// `c = V_rᵀ C⁻¹ m` on the leading `r` eigenvectors.
pub fn project_to_lis(laplace: &LaplaceApprox, m: &[f64], r: usize) -> Result<Vec<f64>> {
    if r == 0 || r > laplace.rank() {
        return Err(Error::invalid(format!(
            "projection rank {r} must lie in 1..={}",
            laplace.rank()
        )));
    }
    if m.len() != laplace.dim() {
        return Err(Error::DimensionMismatch {
            expected: laplace.dim(),
            got: m.len(),
        });
    }
    Ok(laplace.project(m, r))
}

/// Within-chain `W` and between-chain `B` covariances.
pub fn within_between_cov(ens: &ChainEnsemble) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, n, k) = (ens.num_chains(), ens.num_samples(), ens.dim());
    if m < 2 || n < 2 {
        return Err(Error::DegenerateEnsemble(format!(
            "need at least 2 chains of 2 samples, got {m} × {n}"
        )));
    }
    // chain means m̄_.j and grand mean m̄_..
    let means = DMatrix::from_fn(k, m, |i, j| ens.series(i, j).iter().sum::<f64>() / n as f64);
    let grand: Vec<f64> = (0..k).map(|i| means.row(i).sum() / m as f64).collect();

    let mut w = DMatrix::zeros(k, k);
    for j in 0..m {
        for t in 0..n {
            for a in 0..k {
                let da = ens.series(a, j)[t] - means[(a, j)];
                for b in a..k {
                    w[(a, b)] += da * (ens.series(b, j)[t] - means[(b, j)]);
                }
            }
        }
    }
    let mut b = DMatrix::zeros(k, k);
    for j in 0..m {
        for a in 0..k {
            let da = means[(a, j)] - grand[a];
            for c in a..k {
                b[(a, c)] += da * (means[(c, j)] - grand[c]);
            }
        }
    }
    let wscale = 1.0 / (m * (n - 1)) as f64;
    let bscale = n as f64 / (m - 1) as f64;
    for a in 0..k {
        for c in a..k {
            w[(a, c)] *= wscale;
            w[(c, a)] = w[(a, c)];
            b[(a, c)] *= bscale;
            b[(c, a)] = b[(a, c)];
        }
    }
    Ok((w, b))
}

/// `V̂ = ((N−1)/N) W + ((M+1)/(MN)) B`
pub fn vhat(w: &DMatrix<f64>, b: &DMatrix<f64>, n: usize, m: usize) -> DMatrix<f64> {
    let (nf, mf) = (n as f64, m as f64);
    w * ((nf - 1.0) / nf) + b * ((mf + 1.0) / (mf * nf))
}

/// `√((N−1)/N + ((M+1)/(MN)) λ_max)` with `λ_max` the top eigenvalue of
/// `B v = λ W v`.
///
/// A non-positive-definite `W` gets one jitter of `1e-12·tr(W)/k` on the
/// diagonal, with a warning; if that still fails the ensemble is rejected.
pub fn mpsrf(w: &DMatrix<f64>, b: &DMatrix<f64>, n: usize, m: usize) -> Result<f64> {
    let k = w.nrows();
    let chol = match w.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-12 * w.trace() / k as f64;
            if !(jitter > 0.0) {
                return Err(Error::SingularWithinCovariance);
            }
            warn!("within-chain covariance is singular; adding jitter {jitter:e} to its diagonal");
            let mut wj = w.clone();
            for i in 0..k {
                wj[(i, i)] += jitter;
            }
            wj.cholesky().ok_or(Error::SingularWithinCovariance)?
        }
    };
    // L⁻¹ B L⁻ᵀ
    let l = chol.l();
    let x = l
        .solve_lower_triangular(b)
        .ok_or(Error::SingularWithinCovariance)?;
    let s = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::SingularWithinCovariance)?;
    let s = (&s + s.transpose()) * 0.5;
    let lmax = s.symmetric_eigen().eigenvalues.max();
    let (nf, mf) = (n as f64, m as f64);
    Ok(((nf - 1.0) / nf + (mf + 1.0) / (mf * nf) * lmax).sqrt())
}

/// Multi-chain variogram of coordinate `i` at lag `t`.
pub fn variogram(ens: &ChainEnsemble, i: usize, t: usize) -> f64 {
    let n = ens.num_samples();
    let mut acc = 0.0;
    for j in 0..ens.num_chains() {
        let x = ens.series(i, j);
        acc += (t..n).map(|s| (x[s] - x[s - t]).powi(2)).sum::<f64>();
    }
    acc / (ens.num_chains() * (n - t)) as f64
}

/// `V̂_ii` for each coordinate.
fn vhat_diagonal(ens: &ChainEnsemble) -> Result<Vec<f64>> {
    let (w, b) = within_between_cov(ens)?;
    let v = vhat(&w, &b, ens.num_samples(), ens.num_chains());
    Ok(v.diagonal().iter().copied().collect())
}

fn acf_with(ens: &ChainEnsemble, i: usize, t: usize, vii: f64) -> f64 {
    1.0 - variogram(ens, i, t) / (2.0 * vii)
}

/// `ρ̂_it = 1 − v_it / (2 V̂_ii)`
pub fn acf_estimate(ens: &ChainEnsemble, i: usize, t: usize) -> Result<f64> {
    if t >= ens.num_samples() {
        return Err(Error::invalid(format!("lag {t} must be below the chain length {}", ens.num_samples())));
    }
    let vii = vhat_diagonal(ens)?[i];
    if !(vii > 0.0) {
        return Err(Error::DegenerateEnsemble(format!("coordinate {i} is constant")));
    }
    Ok(acf_with(ens, i, t, vii))
}

/// `ρ̂_i1, ρ̂_i2, …, ρ̂_i,max_lag` for plotting.
pub fn acf_curve(ens: &ChainEnsemble, i: usize, max_lag: usize) -> Result<Vec<f64>> {
    let vii = vhat_diagonal(ens)?[i];
    if !(vii > 0.0) {
        return Err(Error::DegenerateEnsemble(format!("coordinate {i} is constant")));
    }
    Ok((0..=max_lag.min(ens.num_samples() - 1))
        .map(|t| acf_with(ens, i, t, vii))
        .collect())
}

fn ess_with(ens: &ChainEnsemble, i: usize, vii: f64) -> f64 {
    let n = ens.num_samples();
    let total = (ens.num_chains() * n) as f64;
    // Σ_{t=1}^{T} ρ̂_t with T = 2t' − 1 for the first t' with
    // ρ̂_{2t'} + ρ̂_{2t'+1} < 0, or every available lag if there is none
    let mut sum = 0.0;
    let mut t = 0;
    while 2 * t + 1 < n {
        let even = acf_with(ens, i, 2 * t, vii);
        let odd = acf_with(ens, i, 2 * t + 1, vii);
        if even + odd < 0.0 {
            break;
        }
        if t > 0 {
            sum += even;
        }
        sum += odd;
        t += 1;
    }
    let ess = total / (1.0 + 2.0 * sum);
    if ess.is_finite() && ess > 0.0 {
        ess.min(total)
    } else {
        total
    }
}

/// Effective sample size of coordinate `i`, clamped to `(0, MN]`.
pub fn ess(ens: &ChainEnsemble, i: usize) -> Result<f64> {
    if ens.num_samples() < 4 {
        return Err(Error::DegenerateEnsemble("ESS needs at least 4 samples per chain".into()));
    }
    let vii = vhat_diagonal(ens)?[i];
    if !(vii > 0.0) {
        return Err(Error::DegenerateEnsemble(format!("coordinate {i} is constant")));
    }
    Ok(ess_with(ens, i, vii))
}

/// ESS of every coordinate.
pub fn ess_all(ens: &ChainEnsemble) -> Result<Vec<f64>> {
    if ens.num_samples() < 4 {
        return Err(Error::DegenerateEnsemble("ESS needs at least 4 samples per chain".into()));
    }
    let diag = vhat_diagonal(ens)?;
    diag.iter()
        .enumerate()
        .map(|(i, &vii)| {
            if vii > 0.0 {
                Ok(ess_with(ens, i, vii))
            } else {
                Err(Error::DegenerateEnsemble(format!("coordinate {i} is constant")))
            }
        })
        .collect()
}

/// First three raw moments of one chain's QoI samples; missing values are
/// excluded and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoiMoments {
    pub moments: [f64; 3],
    pub missing: usize,
}

pub fn qoi_moments(samples: &[Option<f64>]) -> Result<QoiMoments> {
    let present: Vec<f64> = samples.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::DegenerateEnsemble("every QoI sample in the chain is missing".into()));
    }
    let n = present.len() as f64;
    let mut moments = [0.0; 3];
    for (k, g) in moments.iter_mut().enumerate() {
        *g = present.iter().map(|x| x.powi(k as i32 + 1)).sum::<f64>() / n;
    }
    Ok(QoiMoments {
        moments,
        missing: samples.len() - present.len(),
    })
}

/// Table-row summary of a multi-chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub chains: usize,
    pub samples: usize,
    pub mpsrf: f64,
    pub ess: Vec<f64>,
    /// `(value, coordinate)`, 1-based like the CSV columns.
    pub ess_min: (f64, usize),
    pub ess_max: (f64, usize),
    pub ess_avg: f64,
    /// Mean over chains of each stage's acceptance rate.
    pub acceptance: Vec<f64>,
    /// Solves spent by all chains.
    pub solves: u64,
    /// `solves / ess_avg`
    pub nps_per_es: f64,
    /// Per chain; `None` when every QoI sample of the chain was missing.
    pub qoi_moments: Vec<Option<QoiMoments>>,
}

impl DiagnosticsReport {
    pub fn from_records(records: &[ChainRecord]) -> Result<Self> {
        let ens = ChainEnsemble::from_records(records)?;
        let (w, b) = within_between_cov(&ens)?;
        let mpsrf = mpsrf(&w, &b, ens.num_samples(), ens.num_chains())?;
        let ess = ess_all(&ens)?;
        let (mut lo, mut hi) = ((f64::INFINITY, 0), (f64::NEG_INFINITY, 0));
        for (i, &e) in ess.iter().enumerate() {
            if e < lo.0 {
                lo = (e, i + 1);
            }
            if e > hi.0 {
                hi = (e, i + 1);
            }
        }
        let ess_avg = ess.iter().sum::<f64>() / ess.len() as f64;
        let stages = records[0].acceptance.len();
        let acceptance = (0..stages)
            .map(|s| records.iter().map(|r| r.acceptance[s]).sum::<f64>() / records.len() as f64)
            .collect();
        let solves: u64 = records.iter().map(|r| r.solves).sum();
        let qoi_moments = records
            .iter()
            .enumerate()
            .map(|(j, r)| match qoi_moments(&r.qoi) {
                Ok(q) => Some(q),
                Err(_) => {
                    warn!("chain {j}: no valid QoI samples");
                    None
                }
            })
            .collect();
        Ok(DiagnosticsReport {
            chains: ens.num_chains(),
            samples: ens.num_samples(),
            mpsrf,
            ess,
            ess_min: lo,
            ess_max: hi,
            ess_avg,
            acceptance,
            solves,
            nps_per_es: solves as f64 / ess_avg,
            qoi_moments,
        })
    }
}
