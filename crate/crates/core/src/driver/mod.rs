//! Experiment orchestration: synthetic data, MAP point, Laplace
//! approximation, parallel chains and diagnostics, with every intermediate
//! written to the output directory as soon as it exists.

mod config;
mod output;

pub use config::{DataConfig, ExperimentConfig, McmcConfig, StartMode, METHODS};
pub use output::{
    histogram, read_chain_csv, read_report, write_acf, write_chain_csv, write_eigenvalues, write_field_csv,
    write_histogram, write_report, ChainTable, OracleCheck, RunReport, MISSING,
};

use std::fs;
use std::path::Path;

use log::info;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{acf_curve, ChainEnsemble, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::fem::Mesh;
use crate::laplace::{compute_map, laplace_setup_solves, misfit_eigenpairs, LaplaceApprox};
use crate::linalg::rel_error;
use crate::mcmc::{run_chains, ChainRecord, PosteriorTarget};
use crate::model::{
    generate_synthetic_data, ForwardModel, LinearSurrogate, ModelKind, Observations, PoissonModel, SyntheticOptions,
};
use crate::prior::{BiLaplacianPrior, GaussianPrior};
use crate::random::{standard_normal_vec, uniform_points};

/// Largest parameter dimension for which the dense oracle is assembled.
const ORACLE_MAX_DIM: usize = 2500;

/// In-memory results of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: RunReport,
    pub records: Vec<ChainRecord>,
    pub m_true: Vec<f64>,
    pub map: Vec<f64>,
    /// All computed eigenvalues, before truncation.
    pub eigenvalues: Vec<f64>,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}

/// Runs the whole pipeline and writes its artifacts under `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = cfg.output.as_path();
    fs::create_dir_all(out).map_err(Error::from).stage("output")?;
    fs::write(out.join("config.txt"), cfg.serialize())
        .map_err(Error::from)
        .stage("output")?;

    let mesh = Mesh::unit_square(cfg.mesh_n).stage("mesh")?;
    let prior = BiLaplacianPrior::new(&mesh, cfg.prior.clone()).stage("prior")?;

    // the truth lives on its own mesh so that runs on different inversion
    // meshes see the same data
    let d = &cfg.data;
    let (m_true, points, data) = (|| {
        let truth_mesh = Mesh::unit_square(d.truth_n)?;
        let truth_prior = BiLaplacianPrior::new(&truth_mesh, cfg.prior.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
        let m_true = truth_prior.sample(&mut rng);
        let points = uniform_points(&mut rng, d.points, d.box_lo, d.box_hi);
        let opts = SyntheticOptions {
            refine: d.refine,
            add_noise: d.noise,
        };
        let data = generate_synthetic_data(
            cfg.model,
            &truth_mesh,
            &m_true,
            &points,
            d.sigma,
            d.seed.wrapping_add(1),
            opts,
        )?;
        write_field_csv(&out.join("truth.csv"), truth_mesh.vertices(), &m_true)?;
        let xs: Vec<[f64; 2]> = points.clone();
        write_field_csv(&out.join("data.csv"), &xs, &data)?;
        Ok((m_true, points, data))
    })()
    .stage("data")?;
    info!("generated {} observations", data.len());

    let obs = Observations::new(&mesh, points, d.sigma, data).stage("model")?;
    match cfg.model {
        ModelKind::Poisson => {
            let model = PoissonModel::new(&mesh, obs).stage("model")?;
            run_inference(cfg, &mesh, &prior, &model, m_true)
        }
        ModelKind::Linear => {
            let model = LinearSurrogate::new(&mesh, obs).stage("model")?;
            run_inference(cfg, &mesh, &prior, &model, m_true)
        }
    }
}

fn run_inference<M: ForwardModel>(
    cfg: &ExperimentConfig,
    mesh: &Mesh,
    prior: &BiLaplacianPrior,
    model: &M,
    m_true: Vec<f64>,
) -> Result<ExperimentOutcome> {
    let out = cfg.output.as_path();

    let newton = compute_map(model, prior, prior.mean(), &cfg.newton).stage("map")?;
    info!(
        "MAP after {} Newton iterations, gradient norm {:e}",
        newton.iterations, newton.grad_norm
    );
    write_field_csv(&out.join("map.csv"), mesh.vertices(), &newton.m).stage("map")?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.seed.wrapping_add(2));
    let pairs = misfit_eigenpairs(model, prior, &newton.m, &cfg.eig, &mut rng).stage("laplace")?;
    write_eigenvalues(&out.join("eigenvalues.csv"), &pairs.values).stage("laplace")?;
    let eigenvalues = pairs.values.clone();
    let full = LaplaceApprox::new(prior, newton.m.clone(), pairs.values, pairs.vectors).stage("laplace")?;
    let laplace = full.clone().truncated(cfg.eig.threshold);
    info!("Laplace approximation of rank {}", laplace.rank());

    let oracle = match cfg.model {
        ModelKind::Linear => Some(dense_oracle(model, prior, &newton.m, &full).stage("oracle")?),
        ModelKind::Poisson => None,
    };

    let r = cfg.mcmc.projection.min(full.rank());
    if r == 0 {
        return Err(Error::invalid("no eigenvectors available for the diagnostic projection").at_stage("laplace"));
    }
    let project = |m: &[f64]| full.project(m, r);

    let mc = &cfg.mcmc;
    let kernel = mc.kernel().stage("mcmc")?;
    let mut start_rng = ChaCha8Rng::seed_from_u64(mc.seed ^ 0x5eed_5eed_5eed_5eed);
    let starts: Vec<Vec<f64>> = (0..mc.chains)
        .map(|_| match mc.start {
            StartMode::LaplaceSample => laplace.sample(prior, &mut start_rng),
            StartMode::PriorSample => prior.sample(&mut start_rng),
            StartMode::Map => newton.m.clone(),
        })
        .collect();
    let target = PosteriorTarget::new(model, prior).with_laplace(&laplace);
    let records = run_chains(&target, &kernel, starts, mc.samples, mc.seed, &project).stage("mcmc")?;
    for (j, rec) in records.iter().enumerate() {
        write_chain_csv(rec, &out.join(format!("chain_{j}.csv"))).stage("mcmc")?;
    }

    let diagnostics = DiagnosticsReport::from_records(&records).stage("diagnostics")?;
    write_plot_tables(out, &records, mc.acf_lags, mc.hist_bins).stage("diagnostics")?;

    let report = RunReport {
        method: mc.method.clone(),
        kernel: kernel.to_string(),
        diagnostics,
        setup_solves: newton.solves + laplace_setup_solves(&cfg.eig),
        map_iterations: newton.iterations,
        map_grad_norm: newton.grad_norm,
        laplace_rank: laplace.rank(),
        projection: r,
        oracle,
    };
    write_report(&report, &out.join("report.txt")).stage("output")?;
    Ok(ExperimentOutcome {
        report,
        records,
        m_true,
        map: newton.m,
        eigenvalues,
    })
}

/// ACF curves of every projected coordinate and the pooled QoI histogram.
fn write_plot_tables(out: &Path, records: &[ChainRecord], lags: usize, bins: usize) -> Result<()> {
    let ens = ChainEnsemble::from_records(records)?;
    let curves = (0..ens.dim())
        .map(|i| acf_curve(&ens, i, lags))
        .collect::<Result<Vec<_>>>()?;
    write_acf(&out.join("acf.csv"), &curves)?;
    let pooled: Vec<f64> = records.iter().flat_map(|r| r.qoi.iter().flatten().copied()).collect();
    write_histogram(&out.join("qoi_hist.csv"), &histogram(&pooled, bins))
}

/// Dense posterior of a linear model: MAP against the exact posterior
/// mean, and the Laplace `H⁻¹` action against a dense solve.
pub fn dense_oracle<M: ForwardModel, P: GaussianPrior>(
    model: &M,
    prior: &P,
    map: &[f64],
    laplace: &LaplaceApprox,
) -> Result<OracleCheck> {
    let n = prior.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::invalid(format!(
            "dense oracle limited to {ORACLE_MAX_DIM} parameters, got {n}"
        )));
    }
    // affine map m ↦ G m + f0
    let s0 = model.solve_forward(&vec![0.0; n])?;
    let f0 = model.observations(&s0).to_vec();
    let l = f0.len();
    let mut g = DMatrix::zeros(l, n);
    let mut r = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = 1.0;
        let s = model.solve_forward(&e)?;
        for (k, (o, b)) in model.observations(&s).iter().zip(&f0).enumerate() {
            g[(k, i)] = o - b;
        }
        r.set_column(i, &DVector::from_vec(prior.apply_precision(&e)));
        e[i] = 0.0;
    }
    let s2 = model.noise_std().powi(2);
    let h = g.transpose() * &g / s2 + &r;
    let resid = DVector::from_iterator(l, model.data().iter().zip(&f0).map(|(d, b)| d - b));
    let rhs = g.transpose() * resid / s2 + &r * DVector::from_column_slice(prior.mean());
    let chol = h.cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let mean = chol.solve(&rhs);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let z = standard_normal_vec(&mut rng, n);
    let dense = chol.solve(&DVector::from_column_slice(&z));
    let approx = laplace.apply_hinv(prior, &z);
    Ok(OracleCheck {
        map_rel_error: rel_error(map, mean.as_slice()),
        hinv_rel_error: rel_error(&approx, dense.as_slice()),
    })
}
