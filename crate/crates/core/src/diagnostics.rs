//! Self-checks shared by the `check` command, the acceptance suite and the
//! Python bindings. Each check reports its worst observed error against a
//! fixed tolerance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::filter::{akf_step, FilterState, Method};
use crate::mda::{check_uniform_bounds, coeff_window, residual_z, MdaHistory, UniformBounds};
use crate::objective::{cost, riem_grad, riem_hess_apply, ObjectiveContext};
use crate::rls::ThetaEstimate;
use crate::sim::{run_experiment, simulate, BenchmarkSystem};
use crate::spd::{retract, sym_map, SpdMatrix, TangentPair};
use crate::symvec::{btr, kron_h, kron_u, sel_matrix, symmetrize, uvec, vech};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: &'static str, worst: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
            detail: detail.into(),
        }
    }
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

fn rand_mat(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

fn rand_sym(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    symmetrize(&rand_mat(rng, n, n))
}

fn rand_spd(rng: &mut impl Rng, n: usize) -> SpdMatrix {
    let a = rand_mat(rng, n, n);
    SpdMatrix::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.5).expect("shifted Gram matrix")
}

/// Vectorization identities on random instances, relative tolerance 1e-12:
///
/// * `vech(A X Aᵀ) = kron_h(A) vech X`
/// * `uvec(A X B) = kron_u(Bᵀ, A) vech X`
/// * `⟨BTr M, Y⟩ = ⟨M, I ⊗ Y⟩`
/// * `𝓘_n uvec X = vech X`
pub fn vectorization_identities(instances: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut wh, mut wu, mut wb, mut ws) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let n = rng.random_range(1..=4);
        let x = rand_sym(&mut rng, n);
        let vx = vech(&x).expect("symmetric");

        let rows = rng.random_range(1..=4);
        let a = rand_mat(&mut rng, rows, n);
        let lhs = vech(&symmetrize(&(&a * &x * a.transpose()))).expect("symmetric");
        wh = wh.max(rel_err(&(kron_h(&a) * &vx), &lhs));

        let cols = rng.random_range(1..=4);
        let b = rand_mat(&mut rng, n, cols);
        let lhs = uvec(&(&a * &x * &b));
        let op = kron_u(&b.transpose(), &a).expect("matching inner dimensions");
        wu = wu.max(rel_err(&(op * &vx), &lhs));

        let m = rand_mat(&mut rng, n * n, n * n);
        let y = rand_mat(&mut rng, n, n);
        let lhs = btr(&m, n).expect("square n² block matrix").dot(&y);
        let rhs = m.dot(&DMatrix::<f64>::identity(n, n).kronecker(&y));
        wb = wb.max((lhs - rhs).abs() / (1.0 + rhs.abs()));

        ws = ws.max(rel_err(&(sel_matrix(n) * uvec(&x)), &vx));
    }
    let detail = format!("{instances} instances");
    vec![
        CheckOutcome::at_most("kron_h", wh, 1e-12, &detail),
        CheckOutcome::at_most("kron_u", wu, 1e-12, &detail),
        CheckOutcome::at_most("btr", wb, 1e-12, &detail),
        CheckOutcome::at_most("sel_matrix", ws, 1e-12, &detail),
    ]
}

/// Uniform observability and controllability of the benchmark system over `k ∈ [m, steps)`.
pub fn gramian_bounds(tau: f64, m: usize, steps: usize) -> Result<(UniformBounds, CheckOutcome)> {
    let sys = BenchmarkSystem::new(tau)?;
    let lq = sym_map(&BenchmarkSystem::q_true(), f64::sqrt);
    let bounds = check_uniform_bounds(&sys, m..steps.max(m + 1), m, &lq);
    let outcome = CheckOutcome {
        name: "gramian_bounds",
        passed: bounds.ok,
        worst: bounds.alpha1.min(bounds.beta1),
        tolerance: 0.0,
        detail: format!(
            "alpha in [{:.6e}, {:.6e}], beta in [{:.6e}, {:.6e}]",
            bounds.alpha1, bounds.alpha2, bounds.beta1, bounds.beta2
        ),
    };
    Ok((bounds, outcome))
}

/// On a noise-free trajectory every residual vanishes: `‖Z_k‖ ≤ 1e-8 (1 + ‖y‖_∞)`.
pub fn annihilation(tau: f64, m: usize, steps: usize, seed: u64) -> Result<CheckOutcome> {
    let sys = BenchmarkSystem::new(tau)?;
    let traj = simulate(&sys, &DMatrix::zeros(2, 2), &DMatrix::zeros(1, 1), steps, seed)?;
    let y_inf = traj.ys.iter().map(|y| y.amax()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for k in m..steps {
        let cw = coeff_window(&sys, k, m)?;
        let ys: Vec<_> = (0..=m).map(|i| traj.ys[k - i].clone()).collect();
        let us: Vec<_> = (1..=m).map(|i| traj.us[k - i].clone()).collect();
        worst = worst.max(residual_z(&cw, &sys, &ys, &us)?.norm());
    }
    Ok(CheckOutcome::at_most(
        "annihilation",
        worst,
        1e-8 * (1.0 + y_inf),
        format!("{} windows, ‖y‖∞ = {y_inf:.3e}", steps.saturating_sub(m)),
    ))
}

/// Objective contexts built from real regression samples of a noisy benchmark run.
fn sample_contexts(count: usize, seed: u64) -> Result<Vec<ObjectiveContext>> {
    let sys = BenchmarkSystem::new(1e4)?;
    let (m, lags) = (3, 3);
    let steps = m + lags + 1 + count;
    let traj = simulate(&sys, &BenchmarkSystem::q_true(), &BenchmarkSystem::r_true(), steps, seed)?;
    let mut hist = MdaHistory::new(m, lags)?;
    let prior = ThetaEstimate::from_matrices(&DMatrix::identity(2, 2), &DMatrix::identity(1, 1), 1e3)?;
    let mut out = Vec::with_capacity(count);
    for k in 0..steps {
        let u_prev = k.checked_sub(1).map(|j| &traj.us[j]);
        if let Some(sample) = hist.push(&sys, k, u_prev, &traj.ys[k])? {
            let r_w = SpdMatrix::identity(sample.d.nrows());
            out.push(ObjectiveContext::new(&sample, &prior, &r_w, 0.1, 2, 1)?);
        }
    }
    Ok(out)
}

/// Central differences of the cost along random geodesics against the
/// Riemannian gradient, relative error ≤ 1e-5.
pub fn gradient_check(directions: usize, seed: u64) -> Result<CheckOutcome> {
    let ctxs = sample_contexts(directions, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for ctx in &ctxs {
        let (q, r) = (rand_spd(&mut rng, 2), rand_spd(&mut rng, 1));
        let v = TangentPair::new(rand_sym(&mut rng, 2), rand_sym(&mut rng, 1))?;
        let along = |s: f64| -> Result<f64> { Ok(cost(ctx, &retract(&q, &v.v_q, s)?, &retract(&r, &v.v_r, s)?)) };
        let fd = (along(h)? - along(-h)?) / (2.0 * h);
        let an = riem_grad(ctx, &q, &r).inner(&v, &q, &r);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
    }
    Ok(CheckOutcome::at_most("gradient_fd", worst, 1e-5, format!("{} directions", ctxs.len())))
}

/// Hessian self-adjointness (relative 1e-8) and the second-order Taylor
/// remainder: `|J(R(sV)) − m(sV)|` shrinks at least 100-fold from `s = 1e-2` to `1e-3`.
pub fn hessian_check(instances: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let ctxs = sample_contexts(instances, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1);
    let (mut w_adj, mut w_ratio) = (0.0f64, 0.0f64);
    for ctx in &ctxs {
        let (q, r) = (rand_spd(&mut rng, 2), rand_spd(&mut rng, 1));
        let v = TangentPair::new(rand_sym(&mut rng, 2), rand_sym(&mut rng, 1))?;
        let w = TangentPair::new(rand_sym(&mut rng, 2), rand_sym(&mut rng, 1))?;
        let hv = riem_hess_apply(ctx, &q, &r, &v);
        let hw = riem_hess_apply(ctx, &q, &r, &w);
        let (a, b) = (hv.inner(&w, &q, &r), hw.inner(&v, &q, &r));
        w_adj = w_adj.max((a - b).abs() / a.abs().max(b.abs()).max(1e-12));

        let j0 = cost(ctx, &q, &r);
        let g = riem_grad(ctx, &q, &r).inner(&v, &q, &r);
        let hvv = hv.inner(&v, &q, &r);
        let remainder = |s: f64| -> Result<f64> {
            let actual = cost(ctx, &retract(&q, &v.v_q, s)?, &retract(&r, &v.v_r, s)?);
            Ok((actual - (j0 + s * g + 0.5 * s * s * hvv)).abs())
        };
        let (e1, e2) = (remainder(1e-2)?, remainder(1e-3)?);
        // Third-order remainder shrinks ~1000×; round-off floor relative to the cost.
        let floor = 1e-12 * j0.abs().max(1.0);
        if e1 > floor {
            w_ratio = w_ratio.max((e2 - floor).max(0.0) / e1);
        }
    }
    let detail = format!("{} instances", ctxs.len());
    Ok(vec![
        CheckOutcome::at_most("hessian_symmetry", w_adj, 1e-8, &detail),
        CheckOutcome::at_most("hessian_taylor", w_ratio, 1e-2, &detail),
    ])
}

/// Scalar Kalman oracles: one Joseph step gives 2/3, and 100 steps reach the
/// predictor fixed point `(1 + √5)/2`.
pub fn kalman_scalar() -> Result<Vec<CheckOutcome>> {
    let sys = crate::system::LtiSystem::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), DMatrix::identity(1, 1));
    let one = SpdMatrix::identity(1);
    let zero = DVector::zeros(1);
    let state = FilterState {
        x_hat: zero.clone(),
        p_hat: DMatrix::identity(1, 1),
        k: Some(0),
    };
    let (post, _) = akf_step(&state, &sys, 1, Some(&zero), &zero, &one, &one)?;
    let joseph = (post.p_hat[(0, 0)] - 2.0 / 3.0).abs();

    let mut state = FilterState::initial(zero.clone(), &one)?;
    let mut p_pred = f64::NAN;
    for k in 0..=100 {
        let (next, kf) = akf_step(&state, &sys, k, Some(&zero), &zero, &one, &one)?;
        state = next;
        p_pred = kf.p_pred[(0, 0)];
    }
    let riccati = (p_pred - (1.0 + 5f64.sqrt()) / 2.0).abs();
    Ok(vec![
        CheckOutcome::at_most("joseph_scalar", joseph, 1e-12, "P_post = 2/3"),
        CheckOutcome::at_most("riccati_fixed_point", riccati, 1e-6, "P_pred → (1+√5)/2"),
    ])
}

/// Short trust-region run: every estimate stays above the eigenvalue floor
/// and every predicted covariance is positive definite.
pub fn spd_run(cfg: &ExperimentConfig, seed: u64) -> Result<CheckOutcome> {
    let mut cfg = cfg.clone();
    cfg.method = Method::Rtr;
    let rows = run_experiment(&cfg, seed)?;
    // Positive margin = eig - floor; report the most negative shortfall.
    let mut shortfall = f64::NEG_INFINITY;
    for row in &rows {
        shortfall = shortfall
            .max(cfg.eps - row.q_eig[0])
            .max(cfg.eps - row.r_eig[0])
            .max(if row.p_pred_eig[0] > 0.0 { f64::NEG_INFINITY } else { 1.0 });
    }
    Ok(CheckOutcome::at_most(
        "spd_run",
        shortfall,
        1e-9,
        format!("{} estimated steps, seed {seed}", rows.len()),
    ))
}

/// Everything `check` runs, in order.
pub fn invariant_suite(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    out.push(gramian_bounds(cfg.tau, cfg.m, cfg.steps)?.1);
    out.extend(vectorization_identities(100, seed));
    out.push(annihilation(cfg.tau, cfg.m, cfg.steps, seed)?);
    out.push(gradient_check(20, seed)?);
    out.extend(hessian_check(20, seed)?);
    out.extend(kalman_scalar()?);
    out.push(spd_run(cfg, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold() {
        for c in vectorization_identities(200, 1) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn derivative_checks_hold() {
        assert!(gradient_check(20, 2).unwrap().passed);
        for c in hessian_check(20, 3).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn scalar_oracles_hold() {
        for c in kalman_scalar().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn short_suite_passes() {
        let cfg = ExperimentConfig {
            steps: 300,
            ..ExperimentConfig::default()
        };
        for c in invariant_suite(&cfg, 7).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
