//! Least-squares objective on `𝕡_n × 𝕡_p` with its Riemannian gradient and Hessian.
//!
//! The cost at one filter step is
//!
//! ```text
//! J(θ) = ½ (Dθ − b)ᵀ R_W⁻¹ (Dθ − b) + ½ (θ − θ̂)ᵀ Ψ⁻¹ (θ − θ̂)
//! ```
//!
//! with `θ = [vech(εI + Q^ε); vech(εI + R^ε)]`. The optimization variables are
//! the shifted matrices `(Q^ε, R^ε)`, so every reported estimate has all of its
//! eigenvalues above `ε`.
//!
//! Euclidean gradients are mapped from `θ`-space back to matrices through
//! `∇ = BTr{sym(uvec(I) gᵀ 𝓘)}`, using the operators in [`crate::symvec`].

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};
use crate::mda::RegressorSample;
use crate::rls::ThetaEstimate;
use crate::spd::{egrad_to_rgrad, ehess_to_rhess, SpdMatrix, TangentPair};
use crate::symvec::{btr, sel_matrix, symmetrize, uvec, vech_len, vech_unchecked};

/// Default eigenvalue floor for the noise covariance estimates.
pub const DEFAULT_EPS: f64 = 0.1;

/// Immutable data defining the objective at one filter step.
#[derive(Clone, Debug)]
pub struct ObjectiveContext {
    n: usize,
    p: usize,
    eps: f64,
    d: DMatrix<f64>,
    b: DVector<f64>,
    prior_theta: DVector<f64>,
    prior_psi: SpdMatrix,
    r_w: SpdMatrix,
    sel_n: DMatrix<f64>,
    sel_p: DMatrix<f64>,
    uvec_eye_n: DVector<f64>,
    uvec_eye_p: DVector<f64>,
}

/// Cost and gradients evaluated at one point, reused by Hessian applications.
#[derive(Clone, Debug)]
pub struct PointEval {
    pub q: SpdMatrix,
    pub r: SpdMatrix,
    pub cost: f64,
    pub egrad_q: DMatrix<f64>,
    pub egrad_r: DMatrix<f64>,
    pub grad: TangentPair,
    pub grad_norm: f64,
}

impl ObjectiveContext {
    pub fn new(
        sample: &RegressorSample,
        prior: &ThetaEstimate,
        r_w: &SpdMatrix,
        eps: f64,
        n: usize,
        p: usize,
    ) -> Result<Self> {
        Self::from_parts(
            sample.d.clone(),
            sample.b.clone(),
            prior.theta.clone(),
            prior.psi.clone(),
            r_w.clone(),
            eps,
            n,
            p,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        d: DMatrix<f64>,
        b: DVector<f64>,
        prior_theta: DVector<f64>,
        prior_psi: SpdMatrix,
        r_w: SpdMatrix,
        eps: f64,
        n: usize,
        p: usize,
    ) -> Result<Self> {
        let dim = vech_len(n) + vech_len(p);
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(contract(format!("ObjectiveContext: eps = {eps} must be ≥ 0")));
        }
        if d.ncols() != dim || prior_theta.len() != dim || prior_psi.dim() != dim {
            return Err(contract(format!(
                "ObjectiveContext: expected {dim} parameters (n = {n}, p = {p}); D has {} columns, θ̂ has {}, Ψ is {}×{}",
                d.ncols(),
                prior_theta.len(),
                prior_psi.dim(),
                prior_psi.dim()
            )));
        }
        if b.len() != d.nrows() || r_w.dim() != d.nrows() {
            return Err(contract(format!(
                "ObjectiveContext: D has {} rows but b has {} and R_W is {}×{}",
                d.nrows(),
                b.len(),
                r_w.dim(),
                r_w.dim()
            )));
        }
        let eye_n = DMatrix::identity(n, n);
        let eye_p = DMatrix::identity(p, p);
        Ok(Self {
            n,
            p,
            eps,
            d,
            b,
            prior_theta,
            prior_psi,
            r_w,
            sel_n: sel_matrix(n),
            sel_p: sel_matrix(p),
            uvec_eye_n: uvec(&eye_n),
            uvec_eye_p: uvec(&eye_p),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Manifold dimension `n(n+1)/2 + p(p+1)/2`.
    pub fn manifold_dim(&self) -> usize {
        vech_len(self.n) + vech_len(self.p)
    }

    /// `θ` for manifold variables `(Q^ε, R^ε)`.
    pub fn theta_of(&self, q: &SpdMatrix, r: &SpdMatrix) -> DVector<f64> {
        let qf = q.matrix() + DMatrix::identity(self.n, self.n) * self.eps;
        let rf = r.matrix() + DMatrix::identity(self.p, self.p) * self.eps;
        stack(&vech_unchecked(&qf), &vech_unchecked(&rf))
    }

    /// Cost as a function of the full parameter vector.
    pub fn cost_theta(&self, theta: &DVector<f64>) -> f64 {
        let resid = &self.d * theta - &self.b;
        let dev = theta - &self.prior_theta;
        0.5 * resid.dot(&self.r_w.solve_vec(&resid)) + 0.5 * dev.dot(&self.prior_psi.solve_vec(&dev))
    }

    /// Euclidean gradient with respect to `θ`.
    pub fn grad_theta(&self, theta: &DVector<f64>) -> DVector<f64> {
        let resid = &self.d * theta - &self.b;
        self.d.transpose() * self.r_w.solve_vec(&resid)
            + self.prior_psi.solve_vec(&(theta - &self.prior_theta))
    }

    /// `(Dᵀ R_W⁻¹ D + Ψ⁻¹) θ_v`: the gradient is affine in `θ`, so this is
    /// its directional derivative at every point.
    pub fn hess_theta(&self, theta_v: &DVector<f64>) -> DVector<f64> {
        self.d.transpose() * self.r_w.solve_vec(&(&self.d * theta_v))
            + self.prior_psi.solve_vec(theta_v)
    }

    /// Maps a `θ`-space vector to the pair of symmetric matrices
    /// `(BTr_n{sym(uvec(I_n) g_Qᵀ 𝓘_n)}, BTr_p{sym(uvec(I_p) g_Rᵀ 𝓘_p)})`.
    fn theta_to_sym_pair(&self, g: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mq = vech_len(self.n);
        let mr = vech_len(self.p);
        let gq = g.rows(0, mq).into_owned();
        let gr = g.rows(mq, mr).into_owned();
        let aq = &self.uvec_eye_n * gq.transpose() * &self.sel_n;
        let ar = &self.uvec_eye_p * gr.transpose() * &self.sel_p;
        (
            btr(&symmetrize(&aq), self.n).expect("n² × n² by construction"),
            btr(&symmetrize(&ar), self.p).expect("p² × p² by construction"),
        )
    }

    pub fn evaluate(&self, q: &SpdMatrix, r: &SpdMatrix) -> PointEval {
        let theta = self.theta_of(q, r);
        let cost = self.cost_theta(&theta);
        let (egrad_q, egrad_r) = self.theta_to_sym_pair(&self.grad_theta(&theta));
        let grad = TangentPair {
            v_q: egrad_to_rgrad(q, &egrad_q),
            v_r: egrad_to_rgrad(r, &egrad_r),
        };
        let grad_norm = grad.norm(q, r);
        PointEval {
            q: q.clone(),
            r: r.clone(),
            cost,
            egrad_q,
            egrad_r,
            grad,
            grad_norm,
        }
    }

    /// Riemannian Hessian applied to `v` at an evaluated point.
    pub fn hess_at(&self, at: &PointEval, v: &TangentPair) -> TangentPair {
        let theta_v = stack(&vech_unchecked(&v.v_q), &vech_unchecked(&v.v_r));
        let (dq, dr) = self.theta_to_sym_pair(&self.hess_theta(&theta_v));
        TangentPair {
            v_q: ehess_to_rhess(&at.q, &at.egrad_q, &dq, &v.v_q),
            v_r: ehess_to_rhess(&at.r, &at.egrad_r, &dr, &v.v_r),
        }
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Cost at manifold variables `(Q^ε, R^ε)`.
pub fn cost(ctx: &ObjectiveContext, q: &SpdMatrix, r: &SpdMatrix) -> f64 {
    ctx.cost_theta(&ctx.theta_of(q, r))
}

/// Riemannian gradient `(Q ∇_Q J Q, R ∇_R J R)`.
pub fn riem_grad(ctx: &ObjectiveContext, q: &SpdMatrix, r: &SpdMatrix) -> TangentPair {
    ctx.evaluate(q, r).grad
}

/// Riemannian Hessian action `Hess J(Q, R)[V]`.
pub fn riem_hess_apply(
    ctx: &ObjectiveContext,
    q: &SpdMatrix,
    r: &SpdMatrix,
    v: &TangentPair,
) -> TangentPair {
    ctx.hess_at(&ctx.evaluate(q, r), v)
}

/// `(Q, R) ↦ (Q − εI, R − εI)`; both results must stay positive definite.
pub fn eps_shift(q_full: &SpdMatrix, r_full: &SpdMatrix, eps: f64) -> Result<(SpdMatrix, SpdMatrix)> {
    if q_full.eig_min() <= eps || r_full.eig_min() <= eps {
        return Err(contract(format!(
            "eps_shift: smallest eigenvalues ({:e}, {:e}) must exceed eps = {eps}",
            q_full.eig_min(),
            r_full.eig_min()
        )));
    }
    Ok((q_full.shifted(-eps)?, r_full.shifted(-eps)?))
}

/// `(Q^ε, R^ε) ↦ (εI + Q^ε, εI + R^ε)`.
pub fn eps_unshift(q: &SpdMatrix, r: &SpdMatrix, eps: f64) -> Result<(SpdMatrix, SpdMatrix)> {
    if eps == 0.0 {
        return Ok((q.clone(), r.clone()));
    }
    Ok((q.shifted(eps)?, r.shifted(eps)?))
}
