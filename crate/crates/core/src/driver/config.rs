//! Line-oriented experiment configuration.
//!
//! Each non-blank line is `section.key = value`; `#` starts a comment.
//! Keys that are absent take their defaults, unknown or repeated keys are
//! rejected, and every error names the offending line.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::laplace::{EigConfig, NewtonConfig};
use crate::mcmc::{DiliCenter, DiliConfig, Kernel, Proposal};
use crate::model::ModelKind;
use crate::prior::BiLaplacianParams;

/// Methods accepted by `mcmc.method` and `--method`.
pub const METHODS: [&str; 9] = ["rw", "pcn", "mala", "inf-mala", "h-pcn", "h-mala", "h-inf-mala", "dr", "dili"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    LaplaceSample,
    PriorSample,
    Map,
}

impl StartMode {
    pub fn name(self) -> &'static str {
        match self {
            StartMode::LaplaceSample => "laplace_sample",
            StartMode::PriorSample => "prior_sample",
            StartMode::Map => "map",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "laplace_sample" => Ok(StartMode::LaplaceSample),
            "prior_sample" => Ok(StartMode::PriorSample),
            "map" => Ok(StartMode::Map),
            _ => Err(format!("unknown start mode '{s}' (laplace_sample, prior_sample, map)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    /// Number of observation points.
    pub points: usize,
    pub sigma: f64,
    /// Points are uniform on `[box_lo, box_hi]²`.
    pub box_lo: f64,
    pub box_hi: f64,
    pub seed: u64,
    /// Cells per side of the mesh the true field is drawn on.
    pub truth_n: usize,
    pub refine: bool,
    pub noise: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            points: 300,
            sigma: 0.005,
            box_lo: 0.05,
            box_hi: 0.95,
            seed: 1,
            truth_n: 32,
            refine: true,
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub method: String,
    /// Proposal parameters; `None` selects the method default.
    pub scale: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub h: Option<f64>,
    pub dr_stages: Vec<Proposal>,
    pub dili: DiliConfig,
    pub chains: usize,
    pub samples: usize,
    pub seed: u64,
    pub start: StartMode,
    /// Number of dominant eigenvectors used for diagnostics.
    pub projection: usize,
    pub acf_lags: usize,
    pub hist_bins: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            method: "h-pcn".into(),
            scale: None,
            beta: None,
            tau: None,
            h: None,
            dr_stages: vec![Proposal::HPcn { beta: 1.0 }, Proposal::HMala { tau: 0.06 }],
            dili: DiliConfig::default(),
            chains: 4,
            samples: 5000,
            seed: 1,
            start: StartMode::LaplaceSample,
            projection: 25,
            acf_lags: 500,
            hist_bins: 40,
        }
    }
}

impl McmcConfig {
    /// Transition kernel for the configured method.
    pub fn kernel(&self) -> Result<Kernel> {
        let m = self.method.as_str();
        let k = match m {
            "dr" => Kernel::Dr(self.dr_stages.clone()),
            "dili" => Kernel::Dili(self.dili),
            _ => {
                let (explicit, default) = match m {
                    "rw" => (self.scale, 0.005),
                    "pcn" => (self.beta, 0.005),
                    "mala" => (self.tau, 6e-6),
                    "inf-mala" => (self.h, 1e-5),
                    "h-pcn" => (self.beta, 0.4),
                    "h-mala" => (self.tau, 0.06),
                    "h-inf-mala" => (self.h, 0.1),
                    other => return Err(Error::invalid(format!("unknown method '{other}'"))),
                };
                Kernel::Mh(Proposal::from_name(m, explicit.unwrap_or(default))?)
            }
        };
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mesh_n: usize,
    pub model: ModelKind,
    pub prior: BiLaplacianParams,
    pub data: DataConfig,
    pub newton: NewtonConfig,
    pub eig: EigConfig,
    pub mcmc: McmcConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mesh_n: 32,
            model: ModelKind::Poisson,
            prior: BiLaplacianParams::default(),
            data: DataConfig::default(),
            newton: NewtonConfig::default(),
            eig: EigConfig::default(),
            mcmc: McmcConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

type KeyResult = std::result::Result<(), String>;

fn float(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got '{v}'"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got '{v}'"))
    }
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("value must be positive, got {x}"))
    }
}

fn unit(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("value must lie in (0, 1], got {x}"))
    }
}

fn open_unit(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("value must lie in (0, 1), got {x}"))
    }
}

fn integer(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn at_least(v: &str, lo: usize) -> std::result::Result<usize, String> {
    let x = integer(v)?;
    if x >= lo {
        Ok(x)
    } else {
        Err(format!("value must be at least {lo}, got {x}"))
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn auto_or(v: &str, f: fn(&str) -> std::result::Result<f64, String>) -> std::result::Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn show_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

/// `name:param, name:param, …`
fn proposal_list(v: &str) -> std::result::Result<Vec<Proposal>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim) {
        let (name, param) = item
            .split_once(':')
            .ok_or_else(|| format!("expected name:param, got '{item}'"))?;
        let p = Proposal::from_name(name.trim(), float(param.trim())?).map_err(|e| e.to_string())?;
        out.push(p);
    }
    if out.is_empty() {
        return Err("at least one proposal is required".into());
    }
    Ok(out)
}

impl ExperimentConfig {
    fn set(&mut self, key: &str, v: &str) -> KeyResult {
        match key {
            "mesh.n" => self.mesh_n = at_least(v, 1)?,
            "model.kind" => {
                self.model = match v {
                    "poisson" => ModelKind::Poisson,
                    "linear" => ModelKind::Linear,
                    _ => return Err(format!("unknown model '{v}' (poisson, linear)")),
                }
            }

            "prior.gamma" => self.prior.gamma = positive(v)?,
            "prior.delta" => self.prior.delta = positive(v)?,
            "prior.robin_beta" => {
                self.prior.robin_beta = auto_or(v, |s| {
                    let x = float(s)?;
                    if x >= 0.0 {
                        Ok(x)
                    } else {
                        Err(format!("value must be non-negative, got {x}"))
                    }
                })?
            }
            "prior.theta1" => self.prior.theta1 = positive(v)?,
            "prior.theta2" => self.prior.theta2 = positive(v)?,
            "prior.alpha" => self.prior.alpha = float(v)?,
            "prior.mean" => self.prior.mean = float(v)?,

            "data.points" => self.data.points = at_least(v, 1)?,
            "data.sigma" => self.data.sigma = positive(v)?,
            "data.box_lo" => self.data.box_lo = float(v)?,
            "data.box_hi" => self.data.box_hi = float(v)?,
            "data.seed" => self.data.seed = v.parse().map_err(|_| format!("expected a seed, got '{v}'"))?,
            "data.truth_n" => self.data.truth_n = at_least(v, 1)?,
            "data.refine" => self.data.refine = boolean(v)?,
            "data.noise" => self.data.noise = boolean(v)?,

            "newton.rel_tol" => self.newton.grad_rel_tol = positive(v)?,
            "newton.abs_tol" => self.newton.grad_abs_tol = positive(v)?,
            "newton.max_iters" => self.newton.max_iters = at_least(v, 1)?,
            "newton.max_cg_iters" => self.newton.max_cg_iters = at_least(v, 1)?,
            "newton.gn_iters" => self.newton.gn_iters = integer(v)?,
            "newton.armijo_c" => self.newton.armijo_c = open_unit(v)?,
            "newton.backtrack" => self.newton.backtrack_factor = open_unit(v)?,

            "eig.k" => self.eig.k = at_least(v, 1)?,
            "eig.oversampling" => self.eig.oversampling = integer(v)?,
            "eig.threshold" => self.eig.threshold = float(v)?,
            "eig.gauss_newton" => self.eig.gauss_newton = boolean(v)?,

            "mcmc.method" => {
                if !METHODS.contains(&v) {
                    return Err(format!("unknown method '{v}' ({})", METHODS.join(", ")));
                }
                self.mcmc.method = v.to_string();
            }
            "mcmc.scale" => self.mcmc.scale = auto_or(v, positive)?,
            "mcmc.beta" => self.mcmc.beta = auto_or(v, unit)?,
            "mcmc.tau" => self.mcmc.tau = auto_or(v, positive)?,
            "mcmc.h" => self.mcmc.h = auto_or(v, positive)?,
            "mcmc.dr_stages" => self.mcmc.dr_stages = proposal_list(v)?,
            "mcmc.dili_beta" => self.mcmc.dili.beta = unit(v)?,
            "mcmc.dili_tau" => self.mcmc.dili.tau = positive(v)?,
            "mcmc.dili_center" => {
                self.mcmc.dili.center = match v {
                    "map" => DiliCenter::Map,
                    "current" => DiliCenter::Current,
                    _ => return Err(format!("unknown DILI center '{v}' (map, current)")),
                }
            }
            "mcmc.chains" => self.mcmc.chains = at_least(v, 2)?,
            "mcmc.samples" => self.mcmc.samples = at_least(v, 4)?,
            "mcmc.seed" => self.mcmc.seed = v.parse().map_err(|_| format!("expected a seed, got '{v}'"))?,
            "mcmc.start" => self.mcmc.start = StartMode::parse(v)?,
            "mcmc.projection" => self.mcmc.projection = at_least(v, 1)?,
            "mcmc.acf_lags" => self.mcmc.acf_lags = at_least(v, 1)?,
            "mcmc.hist_bins" => self.mcmc.hist_bins = at_least(v, 1)?,

            "output.dir" => {
                if v.is_empty() {
                    return Err("output directory must not be empty".into());
                }
                self.output = PathBuf::from(v);
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks that involve more than one key. Errors carry line 0.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Config { line: 0, message });
        let d = &self.data;
        if !(0.0 <= d.box_lo && d.box_lo < d.box_hi && d.box_hi <= 1.0) {
            return fail(format!(
                "observation box [{}, {}] must satisfy 0 ≤ lo < hi ≤ 1",
                d.box_lo, d.box_hi
            ));
        }
        if let Err(e) = self.newton.validate() {
            return fail(e.to_string());
        }
        if !METHODS.contains(&self.mcmc.method.as_str()) {
            return fail(format!("unknown method '{}'", self.mcmc.method));
        }
        if self.mcmc.chains < 2 {
            return fail("at least 2 chains are needed for the diagnostics".into());
        }
        if self.mcmc.samples < 4 {
            return fail("at least 4 samples per chain are needed for the diagnostics".into());
        }
        match self.mcmc.kernel() {
            Ok(k) => k.validate(true).or_else(|e| fail(e.to_string())),
            Err(e) => fail(e.to_string()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'section.key = value', got '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(Error::Config {
                    line,
                    message: format!("key '{key}' already set on line {first}"),
                });
            }
            cfg.set(key, value).map_err(|message| Error::Config { line, message })?;
            seen.push((key.to_string(), line));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its value, in a form [`Self::parse`] reads back to an
    /// equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let p = &self.prior;
        let d = &self.data;
        let nw = &self.newton;
        let e = &self.eig;
        let mc = &self.mcmc;
        let stages: Vec<String> = mc.dr_stages.iter().map(|p| p.to_string()).collect();
        let lines: Vec<(&str, String)> = vec![
            ("mesh.n", self.mesh_n.to_string()),
            ("model.kind", self.model.name().to_string()),
            ("prior.gamma", p.gamma.to_string()),
            ("prior.delta", p.delta.to_string()),
            ("prior.robin_beta", show_opt(p.robin_beta)),
            ("prior.theta1", p.theta1.to_string()),
            ("prior.theta2", p.theta2.to_string()),
            ("prior.alpha", p.alpha.to_string()),
            ("prior.mean", p.mean.to_string()),
            ("data.points", d.points.to_string()),
            ("data.sigma", d.sigma.to_string()),
            ("data.box_lo", d.box_lo.to_string()),
            ("data.box_hi", d.box_hi.to_string()),
            ("data.seed", d.seed.to_string()),
            ("data.truth_n", d.truth_n.to_string()),
            ("data.refine", d.refine.to_string()),
            ("data.noise", d.noise.to_string()),
            ("newton.rel_tol", nw.grad_rel_tol.to_string()),
            ("newton.abs_tol", nw.grad_abs_tol.to_string()),
            ("newton.max_iters", nw.max_iters.to_string()),
            ("newton.max_cg_iters", nw.max_cg_iters.to_string()),
            ("newton.gn_iters", nw.gn_iters.to_string()),
            ("newton.armijo_c", nw.armijo_c.to_string()),
            ("newton.backtrack", nw.backtrack_factor.to_string()),
            ("eig.k", e.k.to_string()),
            ("eig.oversampling", e.oversampling.to_string()),
            ("eig.threshold", e.threshold.to_string()),
            ("eig.gauss_newton", e.gauss_newton.to_string()),
            ("mcmc.method", mc.method.clone()),
            ("mcmc.scale", show_opt(mc.scale)),
            ("mcmc.beta", show_opt(mc.beta)),
            ("mcmc.tau", show_opt(mc.tau)),
            ("mcmc.h", show_opt(mc.h)),
            ("mcmc.dr_stages", stages.join(", ")),
            ("mcmc.dili_beta", mc.dili.beta.to_string()),
            ("mcmc.dili_tau", mc.dili.tau.to_string()),
            ("mcmc.dili_center", mc.dili.center.name().to_string()),
            ("mcmc.chains", mc.chains.to_string()),
            ("mcmc.samples", mc.samples.to_string()),
            ("mcmc.seed", mc.seed.to_string()),
            ("mcmc.start", mc.start.name().to_string()),
            ("mcmc.projection", mc.projection.to_string()),
            ("mcmc.acf_lags", mc.acf_lags.to_string()),
            ("mcmc.hist_bins", mc.hist_bins.to_string()),
            ("output.dir", self.output.display().to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
