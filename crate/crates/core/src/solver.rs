//! Riemannian trust-region minimization of the noise-covariance objective,
//! with a truncated conjugate gradient (Steihaug–Toint) inner solver.
//!
//! All inner products are taken in the product affine-invariant metric at the
//! current iterate, and steps move along exact geodesics, so every iterate is
//! positive definite by construction.

use crate::error::{contract, Result};
use crate::objective::{ObjectiveContext, PointEval};
use crate::spd::{retract, SpdMatrix, TangentPair};

#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegionParams {
    /// Largest admissible radius `Δ̄`.
    pub delta_bar: f64,
    /// Initial radius, in `(0, Δ̄)`.
    pub delta_init: f64,
    /// Acceptance threshold on the ratio of actual to predicted decrease, in `[0, ¼)`.
    pub rho_min: f64,
    pub max_outer: usize,
    /// Stop once the Riemannian gradient norm falls to this value.
    pub grad_tol: f64,
    /// Inner solver stops at `‖r‖ ≤ ‖r₀‖ min(κ, ‖r₀‖^θ)`.
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    /// Inner iteration cap; `None` means the manifold dimension.
    pub max_inner: Option<usize>,
}

impl TrustRegionParams {
    /// Defaults scaled to a manifold of dimension `dim`: `Δ̄ = √dim`, `Δ₁ = Δ̄ / 8`.
    pub fn for_dim(dim: usize) -> Self {
        let delta_bar = (dim as f64).sqrt();
        Self {
            delta_bar,
            delta_init: delta_bar / 8.0,
            rho_min: 0.1,
            max_outer: 50,
            grad_tol: 1e-8,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            max_inner: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_bar > 0.0 && self.delta_bar.is_finite()) {
            return Err(contract(format!("delta_bar = {} must be positive", self.delta_bar)));
        }
        if !(self.delta_init > 0.0 && self.delta_init < self.delta_bar) {
            return Err(contract(format!(
                "delta_init = {} must lie in (0, delta_bar = {})",
                self.delta_init, self.delta_bar
            )));
        }
        if !(0.0..0.25).contains(&self.rho_min) {
            return Err(contract(format!("rho_min = {} must lie in [0, 1/4)", self.rho_min)));
        }
        if !(self.grad_tol >= 0.0) || !(self.tcg_kappa > 0.0) || !(self.tcg_theta >= 0.0) {
            return Err(contract("grad_tol, tcg_kappa and tcg_theta must be non-negative"));
        }
        Ok(())
    }
}

/// One outer iteration of the trust-region loop.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    /// Cost at the iterate the step was computed from.
    pub cost: f64,
    pub grad_norm: f64,
    /// Radius used for this iteration's subproblem.
    pub delta: f64,
    pub rho: f64,
    /// Whether the inner solution hit the trust-region boundary.
    pub on_boundary: bool,
    pub accepted: bool,
    pub inner_iters: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RtrTrace {
    pub iterations: Vec<IterRecord>,
    pub converged: bool,
    pub final_cost: f64,
    pub final_grad_norm: f64,
}

impl RtrTrace {
    pub fn accepted_steps(&self) -> usize {
        self.iterations.iter().filter(|it| it.accepted).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcgStop {
    ZeroGradient,
    NegativeCurvature,
    ExceededRadius,
    ResidualSmall,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct TcgResult {
    pub step: TangentPair,
    pub stop: TcgStop,
    pub inner_iters: usize,
}

impl TcgResult {
    pub fn on_boundary(&self) -> bool {
        matches!(self.stop, TcgStop::NegativeCurvature | TcgStop::ExceededRadius)
    }
}

/// `m(V) = J + ⟨grad, V⟩ + ½ ⟨Hess[V], V⟩` at an evaluated point.
pub fn quad_model_at(ctx: &ObjectiveContext, at: &PointEval, v: &TangentPair) -> f64 {
    let hv = ctx.hess_at(at, v);
    at.cost + at.grad.inner(v, &at.q, &at.r) + 0.5 * hv.inner(v, &at.q, &at.r)
}

pub fn quad_model(ctx: &ObjectiveContext, q: &SpdMatrix, r: &SpdMatrix, v: &TangentPair) -> f64 {
    quad_model_at(ctx, &ctx.evaluate(q, r), v)
}

/// Positive `τ` with `‖η + τ d‖ = Δ`, given `⟨η,η⟩`, `⟨η,d⟩`, `⟨d,d⟩`.
fn boundary_step(ee: f64, ed: f64, dd: f64, delta: f64) -> f64 {
    let disc = (ed * ed + dd * (delta * delta - ee)).max(0.0);
    (-ed + disc.sqrt()) / dd
}

/// Truncated conjugate gradient on the trust-region subproblem at an evaluated point.
pub fn tcg_at(
    ctx: &ObjectiveContext,
    at: &PointEval,
    delta: f64,
    params: &TrustRegionParams,
) -> TcgResult {
    let (q, r) = (&at.q, &at.r);
    let (n, p) = ctx.dims();
    let mut eta = TangentPair::zeros(n, p);
    let mut resid = at.grad.clone();
    let mut rr = resid.inner(&resid, q, r);
    let r0_norm = rr.max(0.0).sqrt();
    if r0_norm == 0.0 {
        return TcgResult {
            step: eta,
            stop: TcgStop::ZeroGradient,
            inner_iters: 0,
        };
    }
    let target = r0_norm * r0_norm.powf(params.tcg_theta).min(params.tcg_kappa);
    let max_inner = params.max_inner.unwrap_or_else(|| ctx.manifold_dim()).max(1);

    let mut dir = -&resid;
    // ⟨η, η⟩ and ⟨η, d⟩ tracked explicitly for the boundary computation.
    let mut ee = 0.0;
    let mut ed = 0.0;
    let mut dd = rr;

    for j in 0..max_inner {
        let hd = ctx.hess_at(at, &dir);
        let dhd = dir.inner(&hd, q, r);
        let alpha = rr / dhd;
        let ee_next = ee + 2.0 * alpha * ed + alpha * alpha * dd;
        if dhd <= 0.0 || ee_next >= delta * delta {
            let tau = boundary_step(ee, ed, dd, delta);
            return TcgResult {
                step: eta.axpy(tau, &dir),
                stop: if dhd <= 0.0 {
                    TcgStop::NegativeCurvature
                } else {
                    TcgStop::ExceededRadius
                },
                inner_iters: j + 1,
            };
        }
        eta = eta.axpy(alpha, &dir);
        ee = ee_next;
        resid = resid.axpy(alpha, &hd);
        let rr_next = resid.inner(&resid, q, r);
        if rr_next.max(0.0).sqrt() <= target {
            return TcgResult {
                step: eta,
                stop: TcgStop::ResidualSmall,
                inner_iters: j + 1,
            };
        }
        let beta = rr_next / rr;
        rr = rr_next;
        dir = &(&dir * beta) - &resid;
        ed = beta * (ed + alpha * dd);
        dd = rr + beta * beta * dd;
    }
    TcgResult {
        step: eta,
        stop: TcgStop::MaxIterations,
        inner_iters: max_inner,
    }
}

pub fn tcg(
    ctx: &ObjectiveContext,
    q: &SpdMatrix,
    r: &SpdMatrix,
    delta: f64,
    params: &TrustRegionParams,
) -> Result<TangentPair> {
    if !(delta > 0.0) {
        return Err(contract(format!("tcg: delta = {delta} must be positive")));
    }
    Ok(tcg_at(ctx, &ctx.evaluate(q, r), delta, params).step)
}

/// Trust-region loop warm-started at `(Q₀, R₀)` (manifold variables).
///
/// Returns the final iterate with its trace. Running out of iterations is
/// not an error: the last (and lowest-cost) iterate is returned with
/// `trace.converged == false`.
pub fn rtr_solve(
    ctx: &ObjectiveContext,
    q0: &SpdMatrix,
    r0: &SpdMatrix,
    params: &TrustRegionParams,
) -> Result<(SpdMatrix, SpdMatrix, RtrTrace)> {
    params.validate()?;
    let (n, p) = ctx.dims();
    if q0.dim() != n || r0.dim() != p {
        return Err(contract("rtr_solve: starting point has the wrong dimensions"));
    }
    let mut at = ctx.evaluate(q0, r0);
    let mut delta = params.delta_init;
    let mut trace = RtrTrace::default();

    for _ in 0..params.max_outer {
        if at.grad_norm <= params.grad_tol {
            trace.converged = true;
            break;
        }
        let sol = tcg_at(ctx, &at, delta, params);
        let hv = ctx.hess_at(&at, &sol.step);
        let predicted = -(at.grad.inner(&sol.step, &at.q, &at.r)
            + 0.5 * hv.inner(&sol.step, &at.q, &at.r));
        if !(predicted > 1e-15 * (1.0 + at.cost.abs())) {
            // No model decrease left: stationary up to round-off.
            trace.converged = true;
            break;
        }
        let candidate = retract(&at.q, &sol.step.v_q, 1.0)
            .and_then(|qn| retract(&at.r, &sol.step.v_r, 1.0).map(|rn| (qn, rn)));
        let (rho, next) = match candidate {
            Ok((qn, rn)) => {
                let next = ctx.evaluate(&qn, &rn);
                ((at.cost - next.cost) / predicted, Some(next))
            }
            // Under/overflow leaving the manifold numerically: treat as a failed step.
            Err(_) => (f64::NEG_INFINITY, None),
        };
        let on_boundary = sol.on_boundary();
        let used_delta = delta;
        if rho < 0.25 {
            delta *= 0.25;
        } else if rho > 0.75 && on_boundary {
            delta = (2.0 * delta).min(params.delta_bar);
        }
        let accepted = rho > params.rho_min;
        trace.iterations.push(IterRecord {
            cost: at.cost,
            grad_norm: at.grad_norm,
            delta: used_delta,
            rho,
            on_boundary,
            accepted,
            inner_iters: sol.inner_iters,
        });
        if accepted {
            at = next.expect("accepted steps have a finite ratio");
        }
    }
    if !trace.converged && at.grad_norm <= params.grad_tol {
        trace.converged = true;
    }
    trace.final_cost = at.cost;
    trace.final_grad_norm = at.grad_norm;
    Ok((at.q, at.r, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{cost, eps_shift, eps_unshift, riem_grad};
    use crate::rls::theta_to_matrices;
    use crate::spd::tests::{random_spd, random_sym};
    use nalgebra::{dmatrix, DMatrix, DVector, Matrix2, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ctx(rng: &mut impl Rng, eps: f64) -> ObjectiveContext {
        let rows = 3 + 4 * 2;
        let d = DMatrix::from_fn(rows, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| rng.random_range(-2.0..4.0));
        let prior = DVector::from_vec(vec![2.0, 0.5, 1.5, 1.0]);
        let psi_a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let psi = SpdMatrix::new(&psi_a * psi_a.transpose() + DMatrix::identity(4, 4)).unwrap();
        ObjectiveContext::from_parts(d, b, prior, psi, SpdMatrix::identity(rows), eps, 2, 1).unwrap()
    }

    fn scalar_ctx(rng: &mut impl Rng) -> ObjectiveContext {
        let d = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(3, |_, _| rng.random_range(0.5..3.0));
        let psi_a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let psi = SpdMatrix::new(&psi_a * psi_a.transpose() + DMatrix::identity(2, 2)).unwrap();
        ObjectiveContext::from_parts(d, b, DVector::from_vec(vec![1.0, 1.5]), psi, SpdMatrix::identity(3), 0.0, 1, 1)
            .unwrap()
    }

    /// Least-squares minimizer in θ-space from the normal equations.
    fn theta_minimizer(ctx: &ObjectiveContext) -> DVector<f64> {
        let dim = ctx.manifold_dim();
        let h = DMatrix::from_fn(dim, dim, |i, j| {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            ctx.hess_theta(&e)[i]
        });
        -h.lu().solve(&ctx.grad_theta(&DVector::zeros(dim))).unwrap()
    }

    fn exact_params(dim: usize) -> TrustRegionParams {
        TrustRegionParams {
            tcg_kappa: 1e-300,
            tcg_theta: 0.0,
            ..TrustRegionParams::for_dim(dim)
        }
    }

    #[test]
    fn params_validation() {
        assert!(TrustRegionParams::for_dim(4).validate().is_ok());
        let mut p = TrustRegionParams::for_dim(4);
        p.delta_init = p.delta_bar;
        assert!(p.validate().is_err());
        let mut p = TrustRegionParams::for_dim(4);
        p.rho_min = 0.25;
        assert!(p.validate().is_err());
    }

    #[test]
    fn model_at_zero_is_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ctx = random_ctx(&mut rng, 0.1);
        let q = random_spd(&mut rng, 2);
        let r = random_spd(&mut rng, 1);
        let m0 = quad_model(&ctx, &q, &r, &TangentPair::zeros(2, 1));
        assert!((m0 - cost(&ctx, &q, &r)).abs() < 1e-14 * m0.abs().max(1.0));
        // Directional derivative of the model at zero equals the gradient pairing.
        let v = TangentPair::new(random_sym(&mut rng, 2), random_sym(&mut rng, 1)).unwrap();
        let h = 1e-6;
        let fd = (quad_model(&ctx, &q, &r, &(&v * h)) - quad_model(&ctx, &q, &r, &(&v * -h))) / (2.0 * h);
        let an = riem_grad(&ctx, &q, &r).inner(&v, &q, &r);
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0));
    }

    #[test]
    fn model_matches_cost_to_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let ctx = random_ctx(&mut rng, 0.1);
            let q = random_spd(&mut rng, 2);
            let r = random_spd(&mut rng, 1);
            let v = TangentPair::new(random_sym(&mut rng, 2), random_sym(&mut rng, 1)).unwrap();
            let err = |s: f64| {
                let sv = &v * s;
                let actual = cost(&ctx, &retract(&q, &sv.v_q, 1.0).unwrap(), &retract(&r, &sv.v_r, 1.0).unwrap());
                (quad_model(&ctx, &q, &r, &sv) - actual).abs()
            };
            // Third-order remainder: shrinking s by 10 shrinks the error by ~1000.
            let (e1, e2) = (err(1e-2), err(1e-3));
            assert!(e2 <= 1e-2 * e1 + 1e-11, "{e1} {e2}");
        }
    }

    #[test]
    fn tcg_zero_gradient() {
        let theta = DVector::from_vec(vec![1.1, 0.9]);
        let ctx = ObjectiveContext::from_parts(
            dmatrix![1.0, 1.0],
            DVector::from_vec(vec![2.0]),
            theta,
            SpdMatrix::identity(2),
            SpdMatrix::identity(1),
            0.0,
            1,
            1,
        )
        .unwrap();
        let q = SpdMatrix::new(dmatrix![1.1]).unwrap();
        let r = SpdMatrix::new(dmatrix![0.9]).unwrap();
        let v = tcg(&ctx, &q, &r, 1.0, &TrustRegionParams::for_dim(2)).unwrap();
        assert!(v.is_zero());
        assert!(tcg(&ctx, &q, &r, 0.0, &TrustRegionParams::for_dim(2)).is_err());
    }

    #[test]
    fn tcg_matches_scalar_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut checked = 0;
        while checked < 20 {
            let ctx = scalar_ctx(&mut rng);
            let q = SpdMatrix::new(dmatrix![rng.random_range(0.5..3.0)]).unwrap();
            let r = SpdMatrix::new(dmatrix![rng.random_range(0.5..3.0)]).unwrap();
            let (qs, rs) = (q.matrix()[(0, 0)], r.matrix()[(0, 0)]);
            // In log-coordinates q·e^a, r·e^b the model is an explicit 2×2 quadratic.
            let theta = DVector::from_vec(vec![qs, rs]);
            let g = ctx.grad_theta(&theta);
            let col = |j: usize| {
                let mut e = DVector::zeros(2);
                e[j] = 1.0;
                ctx.hess_theta(&e)
            };
            let (h0, h1) = (col(0), col(1));
            let hm = Matrix2::new(
                qs * qs * h0[0] + qs * g[0],
                qs * rs * h1[0],
                qs * rs * h0[1],
                rs * rs * h1[1] + rs * g[1],
            );
            if hm.symmetric_eigenvalues().min() <= 1e-3 {
                continue;
            }
            let ab = -hm.lu().solve(&Vector2::new(qs * g[0], rs * g[1])).unwrap();
            let expected = (qs * ab[0], rs * ab[1]);
            let v = tcg(&ctx, &q, &r, 1e6, &exact_params(2)).unwrap();
            assert!((v.v_q[(0, 0)] - expected.0).abs() <= 1e-10 * (1.0 + expected.0.abs()));
            assert!((v.v_r[(0, 0)] - expected.1).abs() <= 1e-10 * (1.0 + expected.1.abs()));
            checked += 1;
        }
    }

    #[test]
    fn tcg_newton_step_with_large_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut checked = 0;
        while checked < 10 {
            let ctx = random_ctx(&mut rng, 0.1);
            let (qf, rf) = theta_to_matrices(&theta_minimizer(&ctx), 2, 1).unwrap();
            let (Ok(qf), Ok(rf)) = (SpdMatrix::new(qf), SpdMatrix::new(rf)) else { continue };
            let Ok((qm, rm)) = eps_shift(&qf, &rf, 0.1) else { continue };
            // A small geodesic perturbation of an interior minimizer keeps the Hessian positive definite.
            let q = retract(&qm, &random_sym(&mut rng, 2), 1e-3).unwrap();
            let r = retract(&rm, &random_sym(&mut rng, 1), 1e-3).unwrap();
            let at = ctx.evaluate(&q, &r);
            let sol = tcg_at(&ctx, &at, 1e6, &exact_params(4));
            assert_ne!(sol.stop, TcgStop::NegativeCurvature);
            assert!(!sol.on_boundary());
            let resid = &ctx.hess_at(&at, &sol.step) + &at.grad;
            assert!(resid.norm(&q, &r) <= 1e-8 * at.grad_norm);
            checked += 1;
        }
    }

    #[test]
    fn tcg_respects_radius_and_beats_cauchy_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..30 {
            let ctx = random_ctx(&mut rng, 0.1);
            let q = random_spd(&mut rng, 2);
            let r = random_spd(&mut rng, 1);
            let at = ctx.evaluate(&q, &r);
            let delta = rng.random_range(0.01..2.0);
            let sol = tcg_at(&ctx, &at, delta, &TrustRegionParams::for_dim(4));
            assert!(sol.step.norm(&q, &r) <= delta * (1.0 + 1e-10));
            // Cauchy point: minimize the model along −grad within the radius.
            let g = &at.grad;
            let gg = at.grad_norm * at.grad_norm;
            let ghg = ctx.hess_at(&at, g).inner(g, &q, &r);
            let t_max = delta / at.grad_norm;
            let t = if ghg > 0.0 { (gg / ghg).min(t_max) } else { t_max };
            let cauchy = quad_model_at(&ctx, &at, &(g * -t));
            assert!(quad_model_at(&ctx, &at, &sol.step) <= cauchy + 1e-12 * cauchy.abs().max(1.0));
        }
    }

    #[test]
    fn solve_from_optimum_takes_no_steps() {
        let theta = DVector::from_vec(vec![1.5, 0.2, 1.1, 0.7]);
        let d = dmatrix![1.0, 0.0, 0.0, 1.0; 0.0, 1.0, 1.0, 0.0; 1.0, 1.0, 0.0, 0.0];
        let b = &d * &theta;
        let ctx = ObjectiveContext::from_parts(d, b, theta.clone(), SpdMatrix::identity(4), SpdMatrix::identity(3), 0.1, 2, 1)
            .unwrap();
        let (qf, rf) = theta_to_matrices(&theta, 2, 1).unwrap();
        let (q0, r0) = eps_shift(&SpdMatrix::new(qf).unwrap(), &SpdMatrix::new(rf).unwrap(), 0.1).unwrap();
        let (q, r, trace) = rtr_solve(&ctx, &q0, &r0, &TrustRegionParams::for_dim(4)).unwrap();
        assert_eq!(trace.accepted_steps(), 0);
        assert!(trace.converged);
        assert_eq!(q.matrix(), q0.matrix());
        assert_eq!(r.matrix(), r0.matrix());
    }

    #[test]
    fn solve_matches_least_squares_when_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let mut checked = 0;
        let mut draws = 0;
        while checked < 20 {
            draws += 1;
            assert!(draws < 1000);
            let ctx = random_ctx(&mut rng, 0.1);
            let theta = theta_minimizer(&ctx);
            let (qf, rf) = theta_to_matrices(&theta, 2, 1).unwrap();
            let (Ok(qf), Ok(rf)) = (SpdMatrix::new(qf), SpdMatrix::new(rf)) else { continue };
            if eps_shift(&qf, &rf, 0.1).is_err() {
                continue;
            }
            let start = SpdMatrix::identity(2);
            let (q, r, trace) = rtr_solve(&ctx, &start, &SpdMatrix::identity(1), &TrustRegionParams::for_dim(4)).unwrap();
            let (qu, ru) = eps_unshift(&q, &r, 0.1).unwrap();
            let num = ((qu.matrix() - qf.matrix()).norm_squared() + (ru.matrix() - rf.matrix()).norm_squared()).sqrt();
            let den = (qf.matrix().norm_squared() + rf.matrix().norm_squared()).sqrt();
            assert!(num / den <= 1e-4, "rel {}", num / den);
            assert!(trace.converged);
            checked += 1;
        }
    }

    #[test]
    fn solve_stays_spd_when_least_squares_is_indefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut checked = 0;
        while checked < 10 {
            let mut ctx = random_ctx(&mut rng, 0.1);
            // Pull the Q block of b strongly negative on the diagonal.
            let d = DMatrix::from_fn(3, 4, |i, j| if i == j || (i == 2 && j == 3) { 1.0 } else { 0.0 });
            let b = DVector::from_vec(vec![-4.0 - rng.random_range(0.0..2.0), 0.3, 1.0]);
            ctx = ObjectiveContext::from_parts(
                d,
                b,
                DVector::from_vec(vec![1.0, 0.0, 1.0, 1.0]),
                SpdMatrix::scaled_identity(4, 10.0).unwrap(),
                SpdMatrix::identity(3),
                ctx.eps(),
                2,
                1,
            )
            .unwrap();
            let theta = theta_minimizer(&ctx);
            let (qf, _) = theta_to_matrices(&theta, 2, 1).unwrap();
            assert!(crate::spd::sym_eigenvalues(&qf)[0] < 0.0);
            let (q, r, trace) =
                rtr_solve(&ctx, &SpdMatrix::identity(2), &SpdMatrix::identity(1), &TrustRegionParams::for_dim(4)).unwrap();
            let (qu, ru) = eps_unshift(&q, &r, 0.1).unwrap();
            assert!(qu.eig_min() >= 0.1 - 1e-12 && ru.eig_min() >= 0.1 - 1e-12);
            // Monotone decrease on accepted steps.
            let costs: Vec<f64> = trace.iterations.iter().filter(|it| it.accepted).map(|it| it.cost).collect();
            assert!(costs.windows(2).all(|w| w[1] < w[0]));
            checked += 1;
        }
    }

    #[test]
    fn radius_rules_follow_the_trust_region_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let ctx = random_ctx(&mut rng, 0.1);
        let params = TrustRegionParams::for_dim(4);
        let (_, _, trace) = rtr_solve(&ctx, &random_spd(&mut rng, 2), &random_spd(&mut rng, 1), &params).unwrap();
        assert!(!trace.iterations.is_empty());
        for w in trace.iterations.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let expected = if a.rho < 0.25 {
                a.delta / 4.0
            } else if a.rho > 0.75 && a.on_boundary {
                (2.0 * a.delta).min(params.delta_bar)
            } else {
                a.delta
            };
            assert_eq!(b.delta, expected);
            if !a.accepted {
                assert_eq!(b.cost, a.cost);
            } else {
                assert!(b.cost < a.cost);
            }
        }
    }
}
