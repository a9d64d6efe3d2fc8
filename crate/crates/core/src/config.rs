//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! method = rtr
//! steps = 10000
//! seeds = 1,2,3
//! q_true = 3,1;1,2
//! ```
//!
//! Matrices are written row by row, rows separated by `;` and entries by `,`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, Method};
use crate::objective::DEFAULT_EPS;
use crate::sim::BenchmarkSystem;
use crate::solver::TrustRegionParams;
use crate::spd::SpdMatrix;
use crate::symvec::vech_len;

pub const KEYS: [&str; 20] = [
    "method", "steps", "tau", "m", "lags", "eps", "seed", "seeds", "out", "q_true", "r_true", "q0", "r0", "p0",
    "psi0", "r_w", "max_outer", "grad_tol", "rho_min", "tcg_kappa",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub steps: usize,
    pub tau: f64,
    pub m: usize,
    pub lags: usize,
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub q_true: DMatrix<f64>,
    pub r_true: DMatrix<f64>,
    /// Initial estimates `Q̂₀`, `R̂₀`.
    pub q0: DMatrix<f64>,
    pub r0: DMatrix<f64>,
    /// `P̂₀ = p0 · I`.
    pub p0: f64,
    pub psi0: f64,
    pub r_w: f64,
    pub max_outer: Option<usize>,
    pub grad_tol: Option<f64>,
    pub rho_min: Option<f64>,
    pub tcg_kappa: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Rtr,
            steps: 10_000,
            tau: 1e4,
            m: 3,
            lags: 3,
            eps: DEFAULT_EPS,
            seeds: vec![1],
            out: None,
            q_true: BenchmarkSystem::q_true(),
            r_true: BenchmarkSystem::r_true(),
            q0: DMatrix::identity(2, 2),
            r0: DMatrix::identity(1, 1),
            p0: 10.0,
            psi0: 1e3,
            r_w: 1.0,
            max_outer: None,
            grad_tol: None,
            rho_min: None,
            tcg_kappa: None,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = `{value}`: {why}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

/// Parses `a,b;c,d` into a square matrix.
pub fn parse_matrix(key: &str, value: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = value
        .split(';')
        .map(|row| row.split(',').map(|v| parse_num::<f64>(key, v.trim())).collect())
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(bad(key, value, "expected a square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| m[(i, j)].to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Splits the file format into `(key, value)` pairs, keeping their order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", i + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "method" => self.method = value.parse()?,
            "steps" => self.steps = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            "m" => self.m = parse_num(key, value)?,
            "lags" => self.lags = parse_num(key, value)?,
            "eps" => self.eps = parse_num(key, value)?,
            "seed" => self.seeds = vec![parse_num(key, value)?],
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| parse_num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "q_true" => self.q_true = parse_matrix(key, value)?,
            "r_true" => self.r_true = parse_matrix(key, value)?,
            "q0" => self.q0 = parse_matrix(key, value)?,
            "r0" => self.r0 = parse_matrix(key, value)?,
            "p0" => self.p0 = parse_num(key, value)?,
            "psi0" => self.psi0 = parse_num(key, value)?,
            "r_w" => self.r_w = parse_num(key, value)?,
            "max_outer" => self.max_outer = Some(parse_num(key, value)?),
            "grad_tol" => self.grad_tol = Some(parse_num(key, value)?),
            "rho_min" => self.rho_min = Some(parse_num(key, value)?),
            "tcg_kappa" => self.tcg_kappa = Some(parse_num(key, value)?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Serializes back to the file format (round-trips through [`from_kv_str`](Self::from_kv_str)).
    pub fn to_kv_string(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut lines = vec![
            format!("method = {}", self.method),
            format!("steps = {}", self.steps),
            format!("tau = {}", self.tau),
            format!("m = {}", self.m),
            format!("lags = {}", self.lags),
            format!("eps = {}", self.eps),
            format!("seeds = {}", seeds.join(",")),
            format!("q_true = {}", format_matrix(&self.q_true)),
            format!("r_true = {}", format_matrix(&self.r_true)),
            format!("q0 = {}", format_matrix(&self.q0)),
            format!("r0 = {}", format_matrix(&self.r0)),
            format!("p0 = {}", self.p0),
            format!("psi0 = {}", self.psi0),
            format!("r_w = {}", self.r_w),
        ];
        if let Some(out) = &self.out {
            lines.push(format!("out = {}", out.display()));
        }
        if let Some(v) = self.max_outer {
            lines.push(format!("max_outer = {v}"));
        }
        if let Some(v) = self.grad_tol {
            lines.push(format!("grad_tol = {v}"));
        }
        if let Some(v) = self.rho_min {
            lines.push(format!("rho_min = {v}"));
        }
        if let Some(v) = self.tcg_kappa {
            lines.push(format!("tcg_kappa = {v}"));
        }
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return cfg("m must be at least 1".into());
        }
        if self.lags > self.m {
            return cfg(format!("lags = {} must not exceed m = {}", self.lags, self.m));
        }
        if self.steps < self.m + self.lags + 2 {
            return cfg(format!("steps = {} must be at least m + lags + 2 = {}", self.steps, self.m + self.lags + 2));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return cfg(format!("eps = {} must be ≥ 0", self.eps));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return cfg(format!("tau = {} must be positive", self.tau));
        }
        if self.seeds.is_empty() {
            return cfg("at least one seed is required".into());
        }
        if !(self.p0 > 0.0 && self.psi0 > 0.0 && self.r_w > 0.0) {
            return cfg("p0, psi0 and r_w must be positive".into());
        }
        Ok(())
    }

    pub fn trust_params(&self, n: usize, p: usize) -> TrustRegionParams {
        let mut t = TrustRegionParams::for_dim(vech_len(n) + vech_len(p));
        if let Some(v) = self.max_outer {
            t.max_outer = v;
        }
        if let Some(v) = self.grad_tol {
            t.grad_tol = v;
        }
        if let Some(v) = self.rho_min {
            t.rho_min = v;
        }
        if let Some(v) = self.tcg_kappa {
            t.tcg_kappa = v;
        }
        t
    }

    pub fn filter_config(&self, n: usize, p: usize) -> Result<FilterConfig> {
        self.validate()?;
        let mut f = FilterConfig::defaults(n, p, self.method);
        f.m = self.m;
        f.lags = self.lags;
        f.eps = self.eps;
        f.p0 = SpdMatrix::scaled_identity(n, self.p0)?;
        f.q0 = SpdMatrix::new(self.q0.clone())?;
        f.r0 = SpdMatrix::new(self.r0.clone())?;
        f.psi0 = self.psi0;
        f.r_w = self.r_w;
        f.trust = Some(self.trust_params(n, p));
        f.validate(n, p)?;
        Ok(f)
    }
}
