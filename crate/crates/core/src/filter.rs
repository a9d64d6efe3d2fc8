//! Kalman recursions and the adaptive filter driver.
//!
//! Time indexing: the step for measurement `y_k` first predicts from the
//! posterior at `k-1` with `F_{k-1}`, `G_{k-1} u_{k-1}` and the most recent
//! process noise estimate, then updates with `H_k` in Joseph form. Step 0 has
//! no prediction; the initial mean and covariance act as the prior.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Error, Result};
use crate::mda::{MdaHistory, RegressorSample};
use crate::objective::{eps_shift, eps_unshift, ObjectiveContext, DEFAULT_EPS};
use crate::rls::{joseph_psi, matrices_to_theta, rls_gain, theta_to_matrices, ThetaEstimate};
use crate::solver::{rtr_solve, TrustRegionParams};
use crate::spd::{sym_eigenvalues, SpdMatrix};
use crate::symvec::{check_symmetric, symmetrize, vech_len};
use crate::system::LtvSystem;

/// Posterior mean and covariance after the measurement at time `k`.
///
/// `k` is `None` for the initial prior, before any measurement.
/// `p_hat` is symmetric; it is positive definite whenever the noise
/// covariances fed to the filter are.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub x_hat: DVector<f64>,
    pub p_hat: DMatrix<f64>,
    pub k: Option<usize>,
}

impl FilterState {
    pub fn initial(x0: DVector<f64>, p0: &SpdMatrix) -> Result<Self> {
        if x0.len() != p0.dim() {
            return Err(contract("FilterState: x0 and P0 dimensions differ"));
        }
        Ok(Self {
            x_hat: x0,
            p_hat: p0.matrix().clone(),
            k: None,
        })
    }

    pub fn next_k(&self) -> usize {
        self.k.map_or(0, |k| k + 1)
    }
}

/// Intermediate quantities of one filter step.
#[derive(Clone, Debug)]
pub struct KfStep {
    pub x_pred: DVector<f64>,
    /// `P̂_{k|k-1}`.
    pub p_pred: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub innovation: DVector<f64>,
}

/// Apparent, actual and optimal one-step predictor covariances at one time.
#[derive(Clone, Debug)]
pub struct CovTriple {
    pub p_apparent: DMatrix<f64>,
    pub p_actual: DMatrix<f64>,
    pub p_optimal: DMatrix<f64>,
}

/// `F P Fᵀ + Q`.
pub fn predict_cov(p: &DMatrix<f64>, f: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(f * p * f.transpose() + q))
}

/// `(I − K H) P (I − K H)ᵀ + K R Kᵀ`.
pub fn joseph_update(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = p_pred.nrows();
    let a = DMatrix::identity(n, n) - gain * h;
    symmetrize(&(&a * p_pred * a.transpose() + gain * r * gain.transpose()))
}

/// `K = P Hᵀ (H P Hᵀ + R)⁻¹`, through Cholesky when the innovation covariance
/// is positive definite and LU otherwise.
pub fn kalman_gain(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let hp = h * p_pred;
    let s = symmetrize(&(&hp * h.transpose() + r));
    // P and S symmetric: K = (S⁻¹ H P)ᵀ.
    let solved = match s.clone().cholesky() {
        Some(chol) => chol.solve(&hp),
        None => s
            .lu()
            .solve(&hp)
            .ok_or(Error::Singular("innovation covariance"))?,
    };
    if solved.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("innovation covariance"));
    }
    Ok(solved.transpose())
}

/// Filter step with symmetric (possibly indefinite) noise covariances.
///
/// This is the path used by the unconstrained RLS baseline.
pub fn akf_step_sym(
    state: &FilterState,
    sys: &dyn LtvSystem,
    k: usize,
    u_prev: Option<&DVector<f64>>,
    y: &DVector<f64>,
    q_hat: &DMatrix<f64>,
    r_hat: &DMatrix<f64>,
) -> Result<(FilterState, KfStep)> {
    let (n, p) = (sys.state_dim(), sys.meas_dim());
    if state.next_k() != k {
        return Err(contract(format!(
            "akf_step: state is at {:?}, cannot process step {k}",
            state.k
        )));
    }
    if y.len() != p || q_hat.shape() != (n, n) || r_hat.shape() != (p, p) {
        return Err(contract("akf_step: y, Q̂ or R̂ has the wrong dimensions"));
    }
    check_symmetric(q_hat, "Q̂")?;
    check_symmetric(r_hat, "R̂")?;

    let (x_pred, p_pred) = if k == 0 {
        (state.x_hat.clone(), state.p_hat.clone())
    } else {
        let u = u_prev.ok_or_else(|| contract("akf_step: u_{k-1} required for k ≥ 1"))?;
        let f = sys.f(k - 1);
        (
            &f * &state.x_hat + sys.g(k - 1) * u,
            predict_cov(&state.p_hat, &f, q_hat),
        )
    };
    let h = sys.h(k);
    let gain = kalman_gain(&p_pred, &h, r_hat)?;
    let innovation = y - &h * &x_pred;
    let x_post = &x_pred + &gain * &innovation;
    let p_post = joseph_update(&p_pred, &h, &gain, r_hat);
    Ok((
        FilterState {
            x_hat: x_post,
            p_hat: p_post,
            k: Some(k),
        },
        KfStep {
            x_pred,
            p_pred,
            gain,
            innovation,
        },
    ))
}

/// Adaptive Kalman filter step with SPD noise covariance estimates.
pub fn akf_step(
    state: &FilterState,
    sys: &dyn LtvSystem,
    k: usize,
    u_prev: Option<&DVector<f64>>,
    y: &DVector<f64>,
    q_hat: &SpdMatrix,
    r_hat: &SpdMatrix,
) -> Result<(FilterState, KfStep)> {
    akf_step_sym(state, sys, k, u_prev, y, q_hat.matrix(), r_hat.matrix())
}

/// The filter with the true noise covariances.
pub fn optimal_kf_step(
    state: &FilterState,
    sys: &dyn LtvSystem,
    k: usize,
    u_prev: Option<&DVector<f64>>,
    y: &DVector<f64>,
    q_true: &SpdMatrix,
    r_true: &SpdMatrix,
) -> Result<(FilterState, KfStep)> {
    akf_step(state, sys, k, u_prev, y, q_true, r_true)
}

/// True one-step predictor error covariance under the adaptive gain:
/// `P_{k+1|k} = F̄ P_{k|k-1} F̄ᵀ + F K R Kᵀ Fᵀ + Q` with `F̄ = F_k (I − K H_k)`.
pub fn actual_cov_step(
    p_actual: &DMatrix<f64>,
    sys: &dyn LtvSystem,
    k: usize,
    k_hat: &DMatrix<f64>,
    q_true: &DMatrix<f64>,
    r_true: &DMatrix<f64>,
) -> DMatrix<f64> {
    let post = joseph_update(p_actual, &sys.h(k), k_hat, r_true);
    predict_cov(&post, &sys.f(k), q_true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Riemannian trust-region estimates, SPD at every step.
    Rtr,
    /// Raw recursive least squares estimates, no projection.
    Rls,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rtr" => Ok(Method::Rtr),
            "rls" => Ok(Method::Rls),
            _ => Err(Error::Config(format!("unknown method `{s}` (expected rtr or rls)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rtr => "rtr",
            Method::Rls => "rls",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FilterConfig {
    pub method: Method,
    /// Measurements stacked per window.
    pub m: usize,
    /// Autocovariance lags `P`.
    pub lags: usize,
    pub eps: f64,
    pub x0: DVector<f64>,
    pub p0: SpdMatrix,
    pub q0: SpdMatrix,
    pub r0: SpdMatrix,
    /// `Ψ₀ = psi0 · I`.
    pub psi0: f64,
    /// `R_W = r_w · I`.
    pub r_w: f64,
    /// `None` picks [`TrustRegionParams::for_dim`].
    pub trust: Option<TrustRegionParams>,
}

impl FilterConfig {
    /// Defaults: `x̂₀ = 0`, `P̂₀ = 10 I`, `Q̂₀ = I`, `R̂₀ = I`, `Ψ₀ = 10³ I`, `R_W = I`, `m = P = 3`.
    pub fn defaults(n: usize, p: usize, method: Method) -> Self {
        Self {
            method,
            m: 3,
            lags: 3,
            eps: DEFAULT_EPS,
            x0: DVector::zeros(n),
            p0: SpdMatrix::scaled_identity(n, 10.0).expect("positive scale"),
            q0: SpdMatrix::identity(n),
            r0: SpdMatrix::identity(p),
            psi0: 1e3,
            r_w: 1.0,
            trust: None,
        }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.x0.len() != n || self.p0.dim() != n || self.q0.dim() != n || self.r0.dim() != p {
            return Err(contract("FilterConfig: initial values do not match the system dimensions"));
        }
        if self.lags > self.m {
            return Err(Error::Config(format!("lags = {} must not exceed m = {}", self.lags, self.m)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps = {} must be ≥ 0", self.eps)));
        }
        if !(self.psi0 > 0.0) || !(self.r_w > 0.0) {
            return Err(Error::Config("psi0 and r_w must be positive".into()));
        }
        if self.method == Method::Rtr && (self.q0.eig_min() <= self.eps || self.r0.eig_min() <= self.eps) {
            return Err(Error::Config(format!(
                "initial Q̂₀, R̂₀ must have all eigenvalues above eps = {}",
                self.eps
            )));
        }
        if let Some(t) = &self.trust {
            t.validate()?;
        }
        Ok(())
    }
}

/// Comparison of the trust-region output with the one-step RLS solution from the same prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RlsComparison {
    /// Both RLS matrices have all eigenvalues above `ε`.
    pub rls_feasible: bool,
    /// `‖(Q_rtr − Q_rls, R_rtr − R_rls)‖_F / ‖(Q_rls, R_rls)‖_F`.
    pub rel_diff: f64,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    pub x_post: DVector<f64>,
    pub x_pred: DVector<f64>,
    /// `P̂_{k|k-1}`.
    pub p_pred: DMatrix<f64>,
    /// `P̂_{k|k}`.
    pub p_post: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Whether a new estimate was produced at this step.
    pub estimated: bool,
    /// Latest estimates after this step.
    pub q_hat: DMatrix<f64>,
    pub r_hat: DMatrix<f64>,
    /// `P̂_{k+1|k} = F_k P̂_{k|k} F_kᵀ + Q̂`.
    pub p_pred_next: DMatrix<f64>,
    /// Objective value at the new estimate (NaN when nothing was estimated).
    pub cost: f64,
    /// Riemannian gradient norm for the trust-region method, Euclidean `θ`-gradient norm for RLS.
    pub grad_norm: f64,
    pub rtr_iters: usize,
    pub rtr_converged: bool,
    pub rls_comparison: Option<RlsComparison>,
}

/// Streaming adaptive filter: feed `(u_{k-1}, y_k)` one step at a time.
#[derive(Clone, Debug)]
pub struct Rtrakf {
    cfg: FilterConfig,
    n: usize,
    p: usize,
    state: FilterState,
    mda: MdaHistory,
    est: ThetaEstimate,
    q_hat: DMatrix<f64>,
    r_hat: DMatrix<f64>,
    /// Shifted iterate `(Q^ε, R^ε)` for warm starts.
    warm: Option<(SpdMatrix, SpdMatrix)>,
    r_w: Option<SpdMatrix>,
}

impl Rtrakf {
    pub fn new(cfg: FilterConfig, n: usize, p: usize) -> Result<Self> {
        cfg.validate(n, p)?;
        let est = ThetaEstimate::from_matrices(cfg.q0.matrix(), cfg.r0.matrix(), cfg.psi0)?;
        let warm = match cfg.method {
            Method::Rtr => Some(eps_shift(&cfg.q0, &cfg.r0, cfg.eps)?),
            Method::Rls => None,
        };
        Ok(Self {
            state: FilterState::initial(cfg.x0.clone(), &cfg.p0)?,
            mda: MdaHistory::new(cfg.m, cfg.lags)?,
            q_hat: cfg.q0.matrix().clone(),
            r_hat: cfg.r0.matrix().clone(),
            est,
            warm,
            r_w: None,
            n,
            p,
            cfg,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn estimates(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.q_hat, &self.r_hat)
    }

    pub fn theta_estimate(&self) -> &ThetaEstimate {
        &self.est
    }

    /// First step that produces an estimate.
    pub fn first_estimate_step(&self) -> usize {
        self.mda.first_sample_step()
    }

    pub fn step(
        &mut self,
        sys: &dyn LtvSystem,
        u_prev: Option<&DVector<f64>>,
        y: &DVector<f64>,
    ) -> Result<StepRecord> {
        if sys.state_dim() != self.n || sys.meas_dim() != self.p {
            return Err(contract("Rtrakf::step: system dimensions changed"));
        }
        let k = self.state.next_k();
        let (state, kf) = akf_step_sym(&self.state, sys, k, u_prev, y, &self.q_hat, &self.r_hat)?;
        let sample = self.mda.push(sys, k, u_prev, y)?;

        let mut rec = StepRecord {
            k,
            x_post: state.x_hat.clone(),
            x_pred: kf.x_pred,
            p_pred: kf.p_pred,
            p_post: state.p_hat.clone(),
            gain: kf.gain,
            estimated: false,
            q_hat: DMatrix::zeros(0, 0),
            r_hat: DMatrix::zeros(0, 0),
            p_pred_next: DMatrix::zeros(0, 0),
            cost: f64::NAN,
            grad_norm: f64::NAN,
            rtr_iters: 0,
            rtr_converged: false,
            rls_comparison: None,
        };
        self.state = state;
        if let Some(sample) = sample {
            self.estimate(&sample, &mut rec)?;
        }
        rec.q_hat = self.q_hat.clone();
        rec.r_hat = self.r_hat.clone();
        rec.p_pred_next = predict_cov(&self.state.p_hat, &sys.f(k), &self.q_hat);
        Ok(rec)
    }

    fn estimate(&mut self, sample: &RegressorSample, rec: &mut StepRecord) -> Result<()> {
        let (n, p) = (self.n, self.p);
        let rows = sample.d.nrows();
        let r_w = match &self.r_w {
            Some(r_w) if r_w.dim() == rows => r_w.clone(),
            _ => {
                let r_w = SpdMatrix::scaled_identity(rows, self.cfg.r_w)?;
                self.r_w = Some(r_w.clone());
                r_w
            }
        };
        let gain = rls_gain(&self.est.psi, &sample.d, &r_w)?;
        let rls_theta = &self.est.theta + &gain * (&sample.b - &sample.d * &self.est.theta);
        let psi_next = joseph_psi(&self.est.psi, &sample.d, &gain, &r_w)?;
        let ctx = ObjectiveContext::new(sample, &self.est, &r_w, self.cfg.eps, n, p)?;
        rec.estimated = true;

        match self.cfg.method {
            Method::Rls => {
                let (q, r) = theta_to_matrices(&rls_theta, n, p)?;
                rec.cost = ctx.cost_theta(&rls_theta);
                rec.grad_norm = ctx.grad_theta(&rls_theta).norm();
                self.q_hat = q;
                self.r_hat = r;
                self.est = ThetaEstimate::new(rls_theta, psi_next)?;
            }
            Method::Rtr => {
                let params = self
                    .cfg
                    .trust
                    .clone()
                    .unwrap_or_else(|| TrustRegionParams::for_dim(ctx.manifold_dim()));
                let (q0, r0) = self.warm.as_ref().expect("warm start exists in RTR mode");
                let (q_eps, r_eps, trace) = rtr_solve(&ctx, q0, r0, &params)?;
                let (q_full, r_full) = eps_unshift(&q_eps, &r_eps, self.cfg.eps)?;
                rec.cost = trace.final_cost;
                rec.grad_norm = trace.final_grad_norm;
                rec.rtr_iters = trace.iterations.len();
                rec.rtr_converged = trace.converged;
                rec.rls_comparison = Some(compare_with_rls(&rls_theta, &q_full, &r_full, self.cfg.eps, n, p)?);

                let theta = matrices_to_theta(q_full.matrix(), r_full.matrix())?;
                self.q_hat = q_full.into_matrix();
                self.r_hat = r_full.into_matrix();
                self.est = ThetaEstimate::new(theta, psi_next)?;
                self.warm = Some((q_eps, r_eps));
            }
        }
        Ok(())
    }
}

fn compare_with_rls(
    rls_theta: &DVector<f64>,
    q: &SpdMatrix,
    r: &SpdMatrix,
    eps: f64,
    n: usize,
    p: usize,
) -> Result<RlsComparison> {
    let (q_rls, r_rls) = theta_to_matrices(rls_theta, n, p)?;
    let feasible = |m: &DMatrix<f64>| sym_eigenvalues(m).first().is_some_and(|&e| e > eps);
    let num = (q.matrix() - &q_rls).norm_squared() + (r.matrix() - &r_rls).norm_squared();
    let den = q_rls.norm_squared() + r_rls.norm_squared();
    Ok(RlsComparison {
        rls_feasible: feasible(&q_rls) && feasible(&r_rls),
        rel_diff: (num / den).sqrt(),
    })
}

/// Runs the filter over a recorded stream. `inputs[k]` is `u_k`; only
/// `u_0 … u_{N-2}` are consumed.
pub fn rtrakf_run(
    sys: &dyn LtvSystem,
    inputs: &[DVector<f64>],
    measurements: &[DVector<f64>],
    cfg: &FilterConfig,
) -> Result<Vec<StepRecord>> {
    if measurements.is_empty() || inputs.len() + 1 < measurements.len() {
        return Err(contract("rtrakf_run: need one input per measurement after the first"));
    }
    let mut filt = Rtrakf::new(cfg.clone(), sys.state_dim(), sys.meas_dim())?;
    measurements
        .iter()
        .enumerate()
        .map(|(k, y)| filt.step(sys, k.checked_sub(1).map(|j| &inputs[j]), y))
        .collect()
}

/// Dimension of `θ` for state and measurement sizes `n`, `p`.
pub fn theta_dim(n: usize, p: usize) -> usize {
    vech_len(n) + vech_len(p)
}
