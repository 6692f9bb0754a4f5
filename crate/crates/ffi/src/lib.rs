//! C interface to `fieldinv`.
//!
//! Objects are opaque handles created by `fi_*_new`/`fi_*_parse`/`fi_run`
//! and released with the matching `fi_*_free`. Fallible calls return an
//! [`FiStatus`]; the message of the last failure on the calling thread is
//! available through [`fi_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fieldinv::driver::{run_experiment, ExperimentConfig, ExperimentOutcome, METHODS};
use fieldinv::fem::Mesh;
use fieldinv::mcmc::PosteriorTarget;
use fieldinv::model::{ForwardModel, Observations, PoissonModel};
use fieldinv::prior::{BiLaplacianParams, BiLaplacianPrior};
use fieldinv::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Io = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FiStatus {
    match e.root() {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Config { .. } => FiStatus::InvalidArgument,
        Error::Io(_) => FiStatus::Io,
        _ => FiStatus::SolverFailure,
    }
}

/// Runs `f`, recording failures and converting panics.
fn guard(f: impl FnOnce() -> Result<(), FiStatus>) -> FiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FiStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            FiStatus::Panic
        }
    }
}

fn fail(e: Error) -> FiStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn invalid(msg: &str) -> FiStatus {
    set_error(msg.to_string());
    FiStatus::InvalidArgument
}

fn null(what: &str) -> FiStatus {
    set_error(format!("{what} is null"));
    FiStatus::NullPointer
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, FiStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], FiStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus
/// one, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fi_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Experiment configuration.
pub struct FiConfig {
    inner: ExperimentConfig,
}

/// Results of a finished experiment.
pub struct FiOutcome {
    inner: ExperimentOutcome,
    report: CString,
}

/// Poisson coefficient posterior on the unit square with the default
/// bi-Laplacian prior.
pub struct FiPosterior {
    model: PoissonModel,
    prior: BiLaplacianPrior,
}

/// Configuration with every default filled in.
#[no_mangle]
pub extern "C" fn fi_config_default() -> *mut FiConfig {
    Box::into_raw(Box::new(FiConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parses a `section.key = value` document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fi_config_parse(text: *const c_char, out: *mut *mut FiConfig) -> FiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(text, "text")?;
        let cfg = ExperimentConfig::parse(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(FiConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fi_config_free(cfg: *mut FiConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets the output directory.
///
/// # Safety
/// `cfg` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fi_config_set_output(cfg: *mut FiConfig, dir: *const c_char) -> FiStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let dir = c_str(dir, "dir")?;
        if dir.is_empty() {
            return Err(invalid("output directory must not be empty"));
        }
        cfg.inner.output = PathBuf::from(dir);
        Ok(())
    })
}

/// Selects the sampling method by name, e.g. `"h-pcn"`.
///
/// # Safety
/// `cfg` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fi_config_set_method(cfg: *mut FiConfig, name: *const c_char) -> FiStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let name = c_str(name, "name")?;
        if !METHODS.contains(&name) {
            return Err(invalid(&format!("unknown method '{name}'")));
        }
        cfg.inner.mcmc.method = name.to_string();
        Ok(())
    })
}

/// Chain count, samples per chain and base seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_config_set_chains(cfg: *mut FiConfig, chains: usize, samples: usize, seed: u64) -> FiStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let mut next = cfg.inner.clone();
        next.mcmc.chains = chains;
        next.mcmc.samples = samples;
        next.mcmc.seed = seed;
        next.validate().map_err(fail)?;
        cfg.inner = next;
        Ok(())
    })
}

/// Runs the full experiment, writing artifacts to the output directory.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fi_run(cfg: *const FiConfig, out: *mut *mut FiOutcome) -> FiStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let res = run_experiment(&cfg.inner).map_err(fail)?;
        let report = CString::new(res.report.render()).map_err(|_| invalid("report contains NUL"))?;
        *out = Box::into_raw(Box::new(FiOutcome { inner: res, report }));
        Ok(())
    })
}

/// # Safety
/// `res` must come from [`fi_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_free(res: *mut FiOutcome) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// MPSRF of the run; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_mpsrf(res: *const FiOutcome) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.report.diagnostics.mpsrf)
}

/// Average ESS over the projected coordinates; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_ess_avg(res: *const FiOutcome) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.report.diagnostics.ess_avg)
}

/// PDE solves per effective sample; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_nps_per_es(res: *const FiOutcome) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.report.diagnostics.nps_per_es)
}

/// Acceptance rate of `stage` (0-based), averaged over chains.
///
/// # Safety
/// `res` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_acceptance(res: *const FiOutcome, stage: usize, out: *mut f64) -> FiStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let acc = &r.inner.report.diagnostics.acceptance;
        *out = *acc
            .get(stage)
            .ok_or_else(|| invalid(&format!("stage {stage} out of range (kernel has {})", acc.len())))?;
        Ok(())
    })
}

/// The `key = value` report; owned by the handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_outcome_report(res: *const FiOutcome) -> *const c_char {
    res.as_ref().map_or(ptr::null(), |r| r.report.as_ptr())
}

/// Posterior with `n` cells per side, `l` observation points given as
/// interleaved `(x, y)` pairs in `points`, noise level `sigma` and data.
///
/// # Safety
/// `points` must hold `2 l` values, `data` `l` values, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_new(
    n: usize,
    points: *const f64,
    data: *const f64,
    l: usize,
    sigma: f64,
    out: *mut *mut FiPosterior,
) -> FiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let xy = slice(points, 2 * l, "points")?;
        let d = slice(data, l, "data")?.to_vec();
        let pts: Vec<[f64; 2]> = xy.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let mesh = Mesh::unit_square(n).map_err(fail)?;
        let prior = BiLaplacianPrior::new(&mesh, BiLaplacianParams::default()).map_err(fail)?;
        let obs = Observations::new(&mesh, pts, sigma, d).map_err(fail)?;
        let model = PoissonModel::new(&mesh, obs).map_err(fail)?;
        *out = Box::into_raw(Box::new(FiPosterior { model, prior }));
        Ok(())
    })
}

/// # Safety
/// `post` must come from [`fi_posterior_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_free(post: *mut FiPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// Parameter dimension (mesh vertex count); 0 for a null handle.
///
/// # Safety
/// `post` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_dim(post: *const FiPosterior) -> usize {
    post.as_ref().map_or(0, |p| p.model.parameter_dim())
}

unsafe fn posterior_input<'a>(
    post: *const FiPosterior,
    m: *const f64,
    len: usize,
) -> Result<(&'a FiPosterior, &'a [f64]), FiStatus> {
    let p = post.as_ref().ok_or_else(|| null("post"))?;
    if len != p.model.parameter_dim() {
        return Err(invalid(&format!(
            "parameter length {len} does not match dimension {}",
            p.model.parameter_dim()
        )));
    }
    Ok((p, slice(m, len, "m")?))
}

/// Unnormalized log posterior at `m`.
///
/// # Safety
/// `m` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_log_density(
    post: *const FiPosterior,
    m: *const f64,
    len: usize,
    out: *mut f64,
) -> FiStatus {
    guard(|| {
        let (p, m) = posterior_input(post, m, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = PosteriorTarget::new(&p.model, &p.prior).log_posterior(m).map_err(fail)?;
        Ok(())
    })
}

/// Gradient of the log posterior at `m`, written to `grad` (`len` values).
///
/// # Safety
/// `m` and `grad` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_gradient(
    post: *const FiPosterior,
    m: *const f64,
    len: usize,
    grad: *mut f64,
) -> FiStatus {
    guard(|| {
        let (p, m) = posterior_input(post, m, len)?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        let g = PosteriorTarget::new(&p.model, &p.prior).grad_log_posterior(m).map_err(fail)?;
        ptr::copy_nonoverlapping(g.as_ptr(), grad, len);
        Ok(())
    })
}

/// Log boundary flux at `m`.
///
/// # Safety
/// `m` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fi_posterior_qoi(post: *const FiPosterior, m: *const f64, len: usize, out: *mut f64) -> FiStatus {
    guard(|| {
        let (p, m) = posterior_input(post, m, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = p.model.solve_forward(m).map_err(fail)?;
        *out = p.model.qoi(&s).map_err(fail)?;
        Ok(())
    })
}
