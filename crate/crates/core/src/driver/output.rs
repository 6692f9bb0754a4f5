//! Plain-text artifacts: chain CSVs, the key/value report and plot-ready
//! tables. Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::mcmc::ChainRecord;

/// Marker for a missing QoI value in chain CSVs.
pub const MISSING: &str = "NA";

pub fn write_chain_csv(rec: &ChainRecord, path: &Path) -> Result<()> {
    let k = rec.coords.first().map_or(0, Vec::len);
    let mut s = String::new();
    let _ = writeln!(s, "# seed={}, kernel={}", rec.seed, rec.kernel);
    s.push_str("iter,accepted,log_posterior,qoi");
    for i in 1..=k {
        let _ = write!(s, ",c_{i}");
    }
    s.push('\n');
    for t in 0..rec.len() {
        let q = rec.qoi[t].map_or_else(|| MISSING.to_string(), |v| v.to_string());
        let _ = write!(s, "{},{},{},{}", t + 1, rec.accepted[t], rec.log_post[t], q);
        for c in &rec.coords[t] {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Columns of a chain CSV read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub seed: u64,
    pub kernel: String,
    pub accepted: Vec<u32>,
    pub log_post: Vec<f64>,
    pub qoi: Vec<Option<f64>>,
    pub coords: Vec<Vec<f64>>,
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::invalid(format!("chain CSV line {line}: {}", message.into()))
}

pub fn read_chain_csv(path: &Path) -> Result<ChainTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let rest = header
        .strip_prefix("# seed=")
        .ok_or_else(|| bad(1, "missing '# seed=' header"))?;
    let (seed, kernel) = rest
        .split_once(", kernel=")
        .ok_or_else(|| bad(1, "missing kernel in header"))?;
    let seed = seed.parse().map_err(|_| bad(1, "bad seed"))?;
    let cols = lines.next().ok_or_else(|| bad(2, "missing column row"))?;
    let k = cols.split(',').count().saturating_sub(4);

    let mut t = ChainTable {
        seed,
        kernel: kernel.to_string(),
        accepted: Vec::new(),
        log_post: Vec::new(),
        qoi: Vec::new(),
        coords: Vec::new(),
    };
    for (idx, row) in lines.enumerate() {
        let line = idx + 3;
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 4 + k {
            return Err(bad(line, format!("expected {} fields, got {}", 4 + k, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line, format!("bad number '{s}'")));
        t.accepted.push(f[1].parse().map_err(|_| bad(line, "bad accepted flag"))?);
        t.log_post.push(num(f[2])?);
        t.qoi.push(if f[3] == MISSING { None } else { Some(num(f[3])?) });
        t.coords.push(f[4..].iter().map(|s| num(s)).collect::<Result<_>>()?);
    }
    Ok(t)
}

/// `x,y,value` per vertex.
pub fn write_field_csv(path: &Path, vertices: &[[f64; 2]], values: &[f64]) -> Result<()> {
    let mut s = String::from("x,y,value\n");
    for (p, v) in vertices.iter().zip(values) {
        let _ = writeln!(s, "{},{},{}", p[0], p[1], v);
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_eigenvalues(path: &Path, values: &[f64]) -> Result<()> {
    let mut s = String::from("index,lambda\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, v);
    }
    fs::write(path, s)?;
    Ok(())
}

/// `lag,c_1..c_k` from per-coordinate ACF curves of equal length.
pub fn write_acf(path: &Path, curves: &[Vec<f64>]) -> Result<()> {
    let mut s = String::from("lag");
    for i in 1..=curves.len() {
        let _ = write!(s, ",c_{i}");
    }
    s.push('\n');
    let lags = curves.first().map_or(0, Vec::len);
    for t in 0..lags {
        let _ = write!(s, "{t}");
        for c in curves {
            let _ = write!(s, ",{}", c[t]);
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Equal-width bins over `[min, max]` of the values; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, values.len())];
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * w, if b + 1 == bins { hi } else { lo + (b + 1) as f64 * w }, c))
        .collect()
}

pub fn write_histogram(path: &Path, hist: &[(f64, f64, usize)]) -> Result<()> {
    let mut s = String::from("lo,hi,count\n");
    for (lo, hi, c) in hist {
        let _ = writeln!(s, "{lo},{hi},{c}");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Comparison of the Laplace approximation with dense linear algebra,
/// available for the linear surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    pub map_rel_error: f64,
    pub hinv_rel_error: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.map_rel_error <= 1e-8 && self.hinv_rel_error <= 1e-6
    }
}

/// Everything reported for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: String,
    pub kernel: String,
    pub diagnostics: DiagnosticsReport,
    /// MAP and eigensolver solves, excluded from NPS/ES.
    pub setup_solves: u64,
    pub map_iterations: usize,
    pub map_grad_norm: f64,
    pub laplace_rank: usize,
    pub projection: usize,
    pub oracle: Option<OracleCheck>,
}

fn join(v: impl IntoIterator<Item = String>) -> String {
    v.into_iter().collect::<Vec<_>>().join(", ")
}

impl RunReport {
    /// `key = value` lines with stable key names.
    pub fn render(&self) -> String {
        let d = &self.diagnostics;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("method", self.method.clone());
        kv("kernel", self.kernel.clone());
        kv("chains", d.chains.to_string());
        kv("samples", d.samples.to_string());
        kv("ar", join(d.acceptance.iter().map(|a| (100.0 * a).to_string())));
        kv("mpsrf", d.mpsrf.to_string());
        kv("ess_min", d.ess_min.0.to_string());
        kv("ess_min_index", d.ess_min.1.to_string());
        kv("ess_max", d.ess_max.0.to_string());
        kv("ess_max_index", d.ess_max.1.to_string());
        kv("ess_avg", d.ess_avg.to_string());
        kv("nps_per_es", d.nps_per_es.to_string());
        kv("sampling_solves", d.solves.to_string());
        kv("setup_solves", self.setup_solves.to_string());
        kv("map_iterations", self.map_iterations.to_string());
        kv("map_grad_norm", self.map_grad_norm.to_string());
        kv("laplace_rank", self.laplace_rank.to_string());
        kv("projection", self.projection.to_string());
        kv("ess", join(d.ess.iter().map(|e| e.to_string())));
        for (j, q) in d.qoi_moments.iter().enumerate() {
            match q {
                Some(q) => {
                    kv(&format!("qoi_moments_chain_{j}"), join(q.moments.iter().map(|g| g.to_string())));
                    kv(&format!("qoi_missing_chain_{j}"), q.missing.to_string());
                }
                None => {
                    kv(&format!("qoi_moments_chain_{j}"), MISSING.to_string());
                    kv(&format!("qoi_missing_chain_{j}"), d.samples.to_string());
                }
            }
        }
        if let Some(o) = &self.oracle {
            kv("oracle_map_rel_error", o.map_rel_error.to_string());
            kv("oracle_hinv_rel_error", o.hinv_rel_error.to_string());
            kv("oracle_pass", o.passed().to_string());
        }
        s
    }
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    fs::write(path, report.render())?;
    Ok(())
}

/// `key = value` pairs of a report, in file order.
pub fn read_report(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split_once(" = ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::invalid(format!("report line {}: expected 'key = value'", i + 1)))
        })
        .collect()
}
