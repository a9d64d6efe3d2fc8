//! Reference simulation: a second-order time-varying system with slowly
//! drifting complex poles, seeded trajectories, and per-step metrics.
//!
//! Random streams use ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`; process noise, measurement noise and inputs are
//! drawn from streams 0, 1 and 2 respectively, so the three sequences are
//! independent and reproducible across platforms.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{dmatrix, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::config::ExperimentConfig;
use crate::error::{contract, Error, Result};
use crate::filter::{actual_cov_step, optimal_kf_step, FilterState, Rtrakf, RlsComparison};
use crate::spd::{sym_eigenvalues, sym_map, SpdMatrix};
use crate::system::LtvSystem;

/// The benchmark system
///
/// ```text
/// F_k = [[0, 1], [−(c_k² + e_k²), −2 c_k]],  G = [1; 1],  H_k = [1, 2 sin(10πk/τ)]
/// c_k = −0.7 + 0.2 cos(2πk/τ),  e_k = 0.4 + 0.2 sin(2πk/τ)
/// ```
///
/// with poles `−(c_k ± i e_k)`. Their modulus peaks slightly above 1
/// (about 1.006) for part of each period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkSystem {
    pub tau: f64,
}

impl BenchmarkSystem {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(contract(format!("BenchmarkSystem: tau = {tau} must be positive")));
        }
        Ok(Self { tau })
    }

    fn phase(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.tau
    }

    /// Default true process noise covariance.
    pub fn q_true() -> DMatrix<f64> {
        dmatrix![3.0, 1.0; 1.0, 2.0]
    }

    /// Default true measurement noise covariance.
    pub fn r_true() -> DMatrix<f64> {
        dmatrix![2.0]
    }
}

impl LtvSystem for BenchmarkSystem {
    fn state_dim(&self) -> usize {
        2
    }
    fn meas_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn f(&self, k: usize) -> DMatrix<f64> {
        let w = self.phase(k);
        let c = -0.7 + 0.2 * w.cos();
        let e = 0.4 + 0.2 * w.sin();
        dmatrix![0.0, 1.0; -(c * c + e * e), -2.0 * c]
    }
    fn g(&self, _k: usize) -> DMatrix<f64> {
        dmatrix![1.0; 1.0]
    }
    fn h(&self, k: usize) -> DMatrix<f64> {
        dmatrix![1.0, 2.0 * (5.0 * self.phase(k)).sin()]
    }
}

/// `(F_k, G_k, H_k)` of [`BenchmarkSystem`].
pub fn benchmark_system(k: usize, tau: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let sys = BenchmarkSystem::new(tau)?;
    Ok((sys.f(k), sys.g(k), sys.h(k)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<DVector<f64>>,
    /// `us[k] = u_k`.
    pub us: Vec<DVector<f64>>,
    pub ys: Vec<DVector<f64>>,
}

/// Symmetric square root of a positive semidefinite covariance.
fn psd_factor(c: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    crate::symvec::check_symmetric(c, what)?;
    let eig = sym_eigenvalues(c);
    let (lo, hi) = (eig[0], *eig.last().unwrap_or(&0.0));
    if lo < -1e-12 * hi.abs().max(1.0) {
        return Err(Error::NotSpd { eig_min: lo, eig_max: hi });
    }
    Ok(sym_map(c, |l| l.max(0.0).sqrt()))
}

/// Simulates `N` steps from `x₀ = 0` with `w_k ~ N(0, Q)`, `v_k ~ N(0, R)`
/// and `u_k ~ N(0, I)`. Singular (semidefinite) covariances are accepted.
pub fn simulate(
    sys: &dyn LtvSystem,
    q_true: &DMatrix<f64>,
    r_true: &DMatrix<f64>,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let (n, p, nu) = (sys.state_dim(), sys.meas_dim(), sys.input_dim());
    if q_true.shape() != (n, n) || r_true.shape() != (p, p) {
        return Err(contract("simulate: noise covariance dimensions do not match the system"));
    }
    let lq = psd_factor(q_true, "Q")?;
    let lr = psd_factor(r_true, "R")?;
    let stream = |s: u64| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };
    let (mut rw, mut rv, mut ru) = (stream(0), stream(1), stream(2));
    let draw = |rng: &mut ChaCha20Rng, len: usize| DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut xs = Vec::with_capacity(steps);
    let mut us = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    let mut x = DVector::zeros(n);
    for k in 0..steps {
        if k > 0 {
            x = sys.f(k - 1) * &x + sys.g(k - 1) * &us[k - 1] + &lq * draw(&mut rw, n);
        }
        ys.push(sys.h(k) * &x + &lr * draw(&mut rv, p));
        us.push(draw(&mut ru, nu));
        xs.push(x.clone());
    }
    Ok(Trajectory { xs, us, ys })
}

/// Per-step metrics, one row per step that produced an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub k: usize,
    pub q_err_fro: f64,
    pub r_err_fro: f64,
    /// `‖P̂_{k|k-1} − °P_{k|k-1}‖_F`.
    pub p_gap_fro: f64,
    /// Ascending eigenvalues of `Q̂_k`, `R̂_k` and `P̂_{k+1|k}`.
    pub q_eig: Vec<f64>,
    pub r_eig: Vec<f64>,
    pub p_pred_eig: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub rtr_iters: usize,
    // Diagnostics below are not part of the CSV.
    pub rtr_converged: bool,
    pub rls_comparison: Option<RlsComparison>,
    pub p_post_eig_min: f64,
    /// `‖P_{k|k-1} − P̂_{k|k-1}‖_F`, actual against apparent covariance.
    pub p_actual_gap_fro: f64,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "k",
    "q_err_fro",
    "r_err_fro",
    "p_gap_fro",
    "q_eig_1",
    "q_eig_2",
    "r_eig_1",
    "p_pred_eig_1",
    "p_pred_eig_2",
    "cost",
    "grad_norm",
    "rtr_iters",
];

/// One seed of the experiment: simulate, then run the adaptive filter and the
/// optimal filter in lockstep on the same realization.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let sys = BenchmarkSystem::new(cfg.tau)?;
    let traj = simulate(&sys, &cfg.q_true, &cfg.r_true, cfg.steps, seed)?;
    run_on_trajectory(cfg, &sys, &traj)
}

pub fn run_on_trajectory(cfg: &ExperimentConfig, sys: &dyn LtvSystem, traj: &Trajectory) -> Result<Vec<MetricRow>> {
    let (n, p) = (sys.state_dim(), sys.meas_dim());
    let fcfg = cfg.filter_config(n, p)?;
    let q_true = SpdMatrix::new(cfg.q_true.clone())?;
    let r_true = SpdMatrix::new(cfg.r_true.clone())?;
    let mut filt = Rtrakf::new(fcfg.clone(), n, p)?;
    let mut opt = FilterState::initial(fcfg.x0.clone(), &fcfg.p0)?;
    let mut p_actual = fcfg.p0.matrix().clone();
    let first = filt.first_estimate_step();
    let mut rows = Vec::with_capacity(traj.ys.len().saturating_sub(first));

    for (k, y) in traj.ys.iter().enumerate() {
        let u_prev = k.checked_sub(1).map(|j| &traj.us[j]);
        let rec = filt.step(sys, u_prev, y)?;
        let (next_opt, okf) = optimal_kf_step(&opt, sys, k, u_prev, y, &q_true, &r_true)?;
        opt = next_opt;
        let actual_gap = (&p_actual - &rec.p_pred).norm();
        p_actual = actual_cov_step(&p_actual, sys, k, &rec.gain, q_true.matrix(), r_true.matrix());
        if k < first {
            continue;
        }
        rows.push(MetricRow {
            k,
            q_err_fro: (&rec.q_hat - q_true.matrix()).norm(),
            r_err_fro: (&rec.r_hat - r_true.matrix()).norm(),
            p_gap_fro: (&rec.p_pred - &okf.p_pred).norm(),
            q_eig: sym_eigenvalues(&rec.q_hat),
            r_eig: sym_eigenvalues(&rec.r_hat),
            p_pred_eig: sym_eigenvalues(&rec.p_pred_next),
            cost: rec.cost,
            grad_norm: rec.grad_norm,
            rtr_iters: rec.rtr_iters,
            rtr_converged: rec.rtr_converged,
            rls_comparison: rec.rls_comparison,
            p_post_eig_min: sym_eigenvalues(&rec.p_post)[0],
            p_actual_gap_fro: actual_gap,
        });
    }
    Ok(rows)
}

/// Runs every seed of the battery concurrently; results keep the seed order.
pub fn run_battery(cfg: &ExperimentConfig, seeds: &[u64]) -> Vec<Result<Vec<MetricRow>>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| s.spawn(move || run_experiment(cfg, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(contract("experiment thread panicked"))))
            .collect()
    })
}

fn fmt_num(out: &mut String, v: f64) {
    // 12 significant digits.
    let _ = write!(out, "{v:.11e}");
}

/// CSV text with the fixed header, LF line endings.
pub fn csv_string(rows: &[MetricRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(contract("emit_csv: no rows"));
    }
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        if row.q_eig.len() != 2 || row.r_eig.len() != 1 || row.p_pred_eig.len() != 2 {
            return Err(contract("emit_csv: the CSV layout expects n = 2, p = 1"));
        }
        let _ = write!(out, "{}", row.k);
        let values = [row.q_err_fro, row.r_err_fro, row.p_gap_fro]
            .into_iter()
            .chain(row.q_eig.iter().copied())
            .chain(row.r_eig.iter().copied())
            .chain(row.p_pred_eig.iter().copied())
            .chain([row.cost, row.grad_norm]);
        for v in values {
            out.push(',');
            fmt_num(&mut out, v);
        }
        let _ = writeln!(out, ",{}", row.rtr_iters);
    }
    Ok(out)
}

pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let text = csv_string(rows)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
