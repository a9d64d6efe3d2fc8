//! Measurement-difference autocovariance (MDA) regression.
//!
//! Stacking `m` consecutive measurements and eliminating the state between two
//! overlapping windows yields a residual
//!
//! ```text
//! Z_k = Σ_{i=0..m} A_i^k y_{k-i} − Σ_{i=1..m} B_i^k G_{k-i} u_{k-i}
//!     = Σ_{i=1..m} B_i^k w_{k-i} + Σ_{i=0..m} A_i^k v_{k-i}
//! ```
//!
//! whose autocovariances are linear in `(Q, R)`. Single-sample products
//! `Z_k Z_{k-p}ᵀ` then give one regression row block `b_k ≈ D_k θ` per step,
//! with `θ = [vech Q; vech R]`.

use std::collections::VecDeque;
use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{contract, Error, Result};
use crate::spd::sym_eigenvalues;
use crate::symvec::{kron_h, kron_u, uvec, vech_len, vech_unchecked};
use crate::system::LtvSystem;

/// Observability Gramians with a condition number above this are treated as singular.
pub const GRAMIAN_COND_LIMIT: f64 = 1e12;

/// State transition matrix `φ_{k,l} = F_{k-1} ⋯ F_l`, with `φ_{k,k} = I`.
pub fn phi(sys: &dyn LtvSystem, k: usize, l: usize) -> Result<DMatrix<f64>> {
    if k < l {
        return Err(contract(format!("phi: k = {k} < l = {l}")));
    }
    let n = sys.state_dim();
    let mut out = DMatrix::identity(n, n);
    for j in l..k {
        out = sys.f(j) * out;
    }
    Ok(out)
}

/// Observability Gramian `M_{k+s,k} = Σ_{i=k..k+s} φ_{i,k}ᵀ H_iᵀ H_i φ_{i,k}`.
pub fn obs_gramian(sys: &dyn LtvSystem, k: usize, s: usize) -> DMatrix<f64> {
    let n = sys.state_dim();
    let mut out = DMatrix::zeros(n, n);
    let mut transition = DMatrix::identity(n, n);
    for i in k..=k + s {
        let hp = sys.h(i) * &transition;
        out += hp.transpose() * hp;
        transition = sys.f(i) * transition;
    }
    out
}

/// Controllability Gramian `Y_{k+s,k} = Σ_{i=k..k+s} φ_{k+s+1,i+1} E Eᵀ φ_{k+s+1,i+1}ᵀ`
/// for a constant noise input factor `E`.
pub fn ctrb_gramian(sys: &dyn LtvSystem, k: usize, s: usize, e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.state_dim();
    let mut out = DMatrix::zeros(n, n);
    // Accumulate backwards so each transition is one extra product.
    let mut transition = DMatrix::identity(n, n);
    let eet = e * e.transpose();
    for i in (k..=k + s).rev() {
        out += &transition * &eet * transition.transpose();
        transition *= sys.f(i);
    }
    out
}

/// Extreme eigenvalues of the observability and controllability Gramians over a range of `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBounds {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub ok: bool,
}

/// Uniform observability / controllability diagnostic using `E = Q^{1/2}`.
pub fn check_uniform_bounds(
    sys: &dyn LtvSystem,
    k_range: Range<usize>,
    s: usize,
    q_sqrt: &DMatrix<f64>,
) -> UniformBounds {
    let mut b = UniformBounds {
        alpha1: f64::INFINITY,
        alpha2: f64::NEG_INFINITY,
        beta1: f64::INFINITY,
        beta2: f64::NEG_INFINITY,
        ok: false,
    };
    for k in k_range {
        let obs = sym_eigenvalues(&obs_gramian(sys, k, s));
        let ctr = sym_eigenvalues(&ctrb_gramian(sys, k, s, q_sqrt));
        b.alpha1 = b.alpha1.min(obs[0]);
        b.alpha2 = b.alpha2.max(*obs.last().unwrap());
        b.beta1 = b.beta1.min(ctr[0]);
        b.beta2 = b.beta2.max(*ctr.last().unwrap());
    }
    b.ok = b.alpha1 > 0.0 && b.beta1 > 0.0 && b.alpha2.is_finite() && b.beta2.is_finite();
    b
}

/// Time-series coefficients of the residual `Z_k` at one time step.
#[derive(Clone, Debug)]
pub struct CoeffWindow {
    pub k: usize,
    /// `A_0^k … A_m^k`, each `n × p`.
    pub a: Vec<DMatrix<f64>>,
    /// `B_1^k … B_m^k`, each `n × n`; `b[i - 1]` holds `B_i^k`.
    pub b: Vec<DMatrix<f64>>,
}

impl CoeffWindow {
    pub fn window(&self) -> usize {
        self.b.len()
    }

    /// `B_i^k` for `i` in `1..=m`.
    pub fn b_coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.b[i - 1]
    }
}

/// Stacked-measurement blocks for the window `y_top, …, y_{top-m+1}`:
/// `(O, M^w)` with `O` of shape `mp × n` and `M^w` of shape `mp × (m-1)n`.
fn stacked_blocks(sys: &dyn LtvSystem, top: usize, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = (sys.state_dim(), sys.meas_dim());
    let base = top + 1 - m;
    let mut o = DMatrix::zeros(m * p, n);
    let mut mw = DMatrix::zeros(m * p, (m - 1) * n);
    for r in 0..m {
        let t = top - r;
        let h = sys.h(t);
        o.view_mut((r * p, 0), (p, n)).copy_from(&(&h * phi(sys, t, base)?));
        for c in r..m.saturating_sub(1) {
            // Column block c carries w_{top-1-c}, which reaches y_t through φ_{t, top-c}.
            mw.view_mut((r * p, c * n), (p, n))
                .copy_from(&(&h * phi(sys, t, top - c)?));
        }
    }
    Ok((o, mw))
}

/// `M⁻¹ Oᵀ` for the window ending at `top`, guarded against ill-conditioned Gramians.
fn left_inverse(k: usize, o: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = o.transpose() * o;
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= GRAMIAN_COND_LIMIT) {
        return Err(Error::Excitation { k, cond });
    }
    let chol = Cholesky::new(gram).ok_or(Error::Excitation { k, cond })?;
    Ok(chol.solve(&o.transpose()))
}

/// Builds the coefficients `A_i^k`, `B_i^k` from the block elimination of two
/// overlapping stacked windows. Requires `k ≥ m` so that `y_{k-m}` exists.
pub fn coeff_window(sys: &dyn LtvSystem, k: usize, m: usize) -> Result<CoeffWindow> {
    if m == 0 {
        return Err(contract("coeff_window: window m must be at least 1"));
    }
    if k < m {
        return Err(Error::InsufficientHistory(format!(
            "coeff_window needs k ≥ m (k = {k}, m = {m})"
        )));
    }
    let (n, p) = (sys.state_dim(), sys.meas_dim());

    let (o_now, mw_now) = stacked_blocks(sys, k, m)?;
    let (o_prev, mw_prev) = stacked_blocks(sys, k - 1, m)?;
    let t_now = left_inverse(k, &o_now)?;
    let t_prev = left_inverse(k - 1, &o_prev)?;
    let f_back = sys.f(k - m);

    let mut a_blk = DMatrix::zeros(n, (m + 1) * p);
    a_blk.view_mut((0, 0), (n, m * p)).copy_from(&t_now);
    let shifted = &f_back * &t_prev;
    let mut tail = a_blk.view_mut((0, p), (n, m * p));
    tail -= &shifted;

    let mut b_blk = DMatrix::zeros(n, m * n);
    b_blk
        .view_mut((0, 0), (n, (m - 1) * n))
        .copy_from(&(&t_now * &mw_now));
    b_blk
        .view_mut((0, (m - 1) * n), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let shifted = &f_back * &t_prev * &mw_prev;
    let mut tail = b_blk.view_mut((0, n), (n, (m - 1) * n));
    tail -= &shifted;

    Ok(CoeffWindow {
        k,
        a: (0..=m)
            .map(|i| a_blk.columns(i * p, p).into_owned())
            .collect(),
        b: (0..m).map(|i| b_blk.columns(i * n, n).into_owned()).collect(),
    })
}

/// Residual `Z_k` from `ys = [y_k, …, y_{k-m}]` and `us = [u_{k-1}, …, u_{k-m}]`.
pub fn residual_z(
    coeffs: &CoeffWindow,
    sys: &dyn LtvSystem,
    ys: &[DVector<f64>],
    us: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let m = coeffs.window();
    if ys.len() != m + 1 || us.len() != m {
        return Err(contract(format!(
            "residual_z: expected {} measurements and {m} inputs, got {} and {}",
            m + 1,
            ys.len(),
            us.len()
        )));
    }
    let k = coeffs.k;
    let mut z = DVector::zeros(sys.state_dim());
    for (i, y) in ys.iter().enumerate() {
        z += &coeffs.a[i] * y;
    }
    for (idx, u) in us.iter().enumerate() {
        let i = idx + 1;
        z -= coeffs.b_coeff(i) * (sys.g(k - i) * u);
    }
    Ok(z)
}

/// Exact autocovariance `E[Z_k Z_{k-p}ᵀ]` from the coefficients at `k` and `k - p`.
pub fn autocovariance(
    now: &CoeffWindow,
    past: &CoeffWindow,
    lag: usize,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m = now.window();
    let n = now.b[0].nrows();
    let mut c = DMatrix::zeros(n, n);
    if lag > m {
        return c;
    }
    for i in (lag + 1)..=m {
        c += now.b_coeff(i) * q * past.b_coeff(i - lag).transpose();
    }
    for i in lag..=m {
        c += &now.a[i] * r * past.a[i - lag].transpose();
    }
    c
}

/// One regression sample `b_k ≈ D_k θ`.
#[derive(Clone, Debug)]
pub struct RegressorSample {
    pub k: usize,
    pub lags: usize,
    pub d: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl RegressorSample {
    /// Number of columns belonging to `vech Q`.
    pub fn q_cols(&self, n: usize) -> usize {
        vech_len(n)
    }
}

/// Builds `(D_k, b_k)` from coefficient and residual histories indexed by lag:
/// `coeffs[p]` and `zs[p]` belong to time `k - p`, for `p = 0..=lags`.
pub fn regressor(
    coeffs: &[CoeffWindow],
    zs: &[DVector<f64>],
    lags: usize,
) -> Result<RegressorSample> {
    let now = coeffs
        .first()
        .ok_or_else(|| Error::InsufficientHistory("regressor: empty coefficient history".into()))?;
    let m = now.window();
    if lags > m {
        return Err(contract(format!(
            "regressor: lags P = {lags} exceed the window m = {m}; autocovariances vanish beyond m"
        )));
    }
    if coeffs.len() < lags + 1 || zs.len() < lags + 1 {
        return Err(Error::InsufficientHistory(format!(
            "regressor: need {} past windows, have {} coefficients and {} residuals",
            lags + 1,
            coeffs.len(),
            zs.len()
        )));
    }
    let n = now.b[0].nrows();
    let p = now.a[0].ncols();
    let (mq, mr) = (vech_len(n), vech_len(p));
    let rows = mq + lags * n * n;
    let mut d = DMatrix::zeros(rows, mq + mr);
    let mut b = DVector::zeros(rows);

    let z0 = &zs[0];
    for i in 1..=m {
        let mut blk = d.view_mut((0, 0), (mq, mq));
        blk += kron_h(now.b_coeff(i));
    }
    for i in 0..=m {
        let mut blk = d.view_mut((0, mq), (mq, mr));
        blk += kron_h(&now.a[i]);
    }
    b.rows_mut(0, mq)
        .copy_from(&vech_unchecked(&(z0 * z0.transpose())));

    for lag in 1..=lags {
        let past = &coeffs[lag];
        let row = mq + (lag - 1) * n * n;
        for i in (lag + 1)..=m {
            let mut blk = d.view_mut((row, 0), (n * n, mq));
            blk += kron_u(past.b_coeff(i - lag), now.b_coeff(i))?;
        }
        for i in lag..=m {
            let mut blk = d.view_mut((row, mq), (n * n, mr));
            blk += kron_u(&past.a[i - lag], &now.a[i])?;
        }
        b.rows_mut(row, n * n)
            .copy_from(&uvec(&(z0 * zs[lag].transpose())));
    }

    Ok(RegressorSample { k: now.k, lags, d, b })
}

/// Streaming MDA front end: keeps just enough measurement, coefficient and
/// residual history to emit one regression sample per step once `k > m + P`.
#[derive(Clone, Debug)]
pub struct MdaHistory {
    m: usize,
    lags: usize,
    next_k: usize,
    ys: VecDeque<DVector<f64>>,
    us: VecDeque<DVector<f64>>,
    coeffs: VecDeque<CoeffWindow>,
    zs: VecDeque<DVector<f64>>,
}

impl MdaHistory {
    pub fn new(m: usize, lags: usize) -> Result<Self> {
        if m == 0 {
            return Err(contract("MdaHistory: window m must be at least 1"));
        }
        if lags > m {
            return Err(contract(format!("MdaHistory: lags P = {lags} exceed m = {m}")));
        }
        Ok(Self {
            m,
            lags,
            next_k: 0,
            ys: VecDeque::with_capacity(m + 1),
            us: VecDeque::with_capacity(m),
            coeffs: VecDeque::with_capacity(lags + 1),
            zs: VecDeque::with_capacity(lags + 1),
        })
    }

    pub fn window(&self) -> usize {
        self.m
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    /// First step at which [`push`](Self::push) yields a sample.
    pub fn first_sample_step(&self) -> usize {
        self.m + self.lags + 1
    }

    /// Feeds `y_k` (and `u_{k-1}` for `k ≥ 1`). Steps must arrive in order starting at 0.
    pub fn push(
        &mut self,
        sys: &dyn LtvSystem,
        k: usize,
        u_prev: Option<&DVector<f64>>,
        y: &DVector<f64>,
    ) -> Result<Option<RegressorSample>> {
        if k != self.next_k {
            return Err(contract(format!(
                "MdaHistory: expected step {}, got {k}",
                self.next_k
            )));
        }
        if k > 0 {
            let u = u_prev.ok_or_else(|| contract("MdaHistory: missing u_{k-1}"))?;
            self.us.push_front(u.clone());
            self.us.truncate(self.m);
        }
        self.ys.push_front(y.clone());
        self.ys.truncate(self.m + 1);
        self.next_k += 1;

        if k < self.m {
            return Ok(None);
        }
        let cw = coeff_window(sys, k, self.m)?;
        let ys: Vec<_> = self.ys.iter().cloned().collect();
        let us: Vec<_> = self.us.iter().cloned().collect();
        let z = residual_z(&cw, sys, &ys, &us)?;
        self.coeffs.push_front(cw);
        self.coeffs.truncate(self.lags + 1);
        self.zs.push_front(z);
        self.zs.truncate(self.lags + 1);

        if k < self.first_sample_step() {
            return Ok(None);
        }
        let coeffs: Vec<_> = self.coeffs.iter().cloned().collect();
        let zs: Vec<_> = self.zs.iter().cloned().collect();
        regressor(&coeffs, &zs, self.lags).map(Some)
    }

    /// Most recent residual `Z_k`, if one has been formed.
    pub fn last_residual(&self) -> Option<&DVector<f64>> {
        self.zs.front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::LtiSystem;
    use crate::symvec::vech;
    use nalgebra::{dmatrix, dvector};

    fn integrator() -> LtiSystem {
        LtiSystem::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0])
    }

    #[test]
    fn phi_basics() {
        let sys = integrator();
        assert_eq!(phi(&sys, 4, 4).unwrap(), dmatrix![1.0]);
        assert!(phi(&sys, 2, 3).is_err());
        let f = dmatrix![0.9, 0.1; -0.2, 0.8];
        let sys2 = LtiSystem::new(f.clone(), dmatrix![1.0; 0.0], dmatrix![1.0, 0.0]);
        assert_eq!(phi(&sys2, 6, 5).unwrap(), f);
    }

    #[test]
    fn gramian_examples() {
        let sys = integrator();
        assert_eq!(obs_gramian(&sys, 0, 2), dmatrix![3.0]);
        let blind = LtiSystem::new(DMatrix::identity(2, 2), dmatrix![1.0; 1.0], DMatrix::zeros(1, 2));
        assert_eq!(obs_gramian(&blind, 3, 4), DMatrix::zeros(2, 2));
    }

    #[test]
    fn uniform_bounds_examples() {
        let sys = integrator();
        let b = check_uniform_bounds(&sys, 0..5, 2, &dmatrix![1.0]);
        assert_eq!((b.alpha1, b.alpha2, b.beta1, b.beta2), (3.0, 3.0, 3.0, 3.0));
        assert!(b.ok);
        let blind = LtiSystem::new(dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]);
        assert!(!check_uniform_bounds(&blind, 0..5, 2, &dmatrix![1.0]).ok);
    }

    #[test]
    fn integrator_coefficients() {
        let cw = coeff_window(&integrator(), 1, 1).unwrap();
        assert_eq!(cw.a.len(), 2);
        assert!((cw.a[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((cw.a[1][(0, 0)] + 1.0).abs() < 1e-15);
        assert!((cw.b_coeff(1)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coeff_window_requires_history() {
        assert!(matches!(
            coeff_window(&integrator(), 2, 3),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn excitation_error_on_short_window() {
        // Only the first state is measured; one sample cannot see the second.
        let sys = LtiSystem::new(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![0.0; 1.0], dmatrix![1.0, 0.0]);
        assert!(matches!(coeff_window(&sys, 3, 1), Err(Error::Excitation { .. })));
        assert!(coeff_window(&sys, 3, 2).is_ok());
    }

    #[test]
    fn residual_window_mismatch() {
        let sys = integrator();
        let cw = coeff_window(&sys, 2, 1).unwrap();
        assert!(residual_z(&cw, &sys, &[dvector![1.0]], &[dvector![0.0]]).is_err());
        let z = residual_z(&cw, &sys, &[dvector![0.0], dvector![0.0]], &[dvector![0.0]]).unwrap();
        assert_eq!(z, dvector![0.0]);
    }

    #[test]
    fn integrator_regressor_row() {
        let sys = integrator();
        let cw = coeff_window(&sys, 1, 1).unwrap();
        let s = regressor(std::slice::from_ref(&cw), &[dvector![0.5]], 0).unwrap();
        assert_eq!(s.d.shape(), (1, 2));
        assert!((s.d[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((s.d[(0, 1)] - 2.0).abs() < 1e-15);
        assert!((s.b[0] - 0.25).abs() < 1e-15);
        assert!(regressor(&[cw], &[dvector![0.5]], 2).is_err());
    }

    #[test]
    fn regressor_matches_exact_autocovariance() {
        let sys = LtiSystem::new(
            dmatrix![0.5, 1.0; -0.3, 0.2],
            dmatrix![1.0; 0.5],
            dmatrix![1.0, 0.4],
        );
        let m = 3;
        let q = dmatrix![1.5, 0.3; 0.3, 0.8];
        let r = dmatrix![0.7];
        let k = 10;
        let coeffs: Vec<_> = (0..=m).map(|p| coeff_window(&sys, k - p, m).unwrap()).collect();
        let theta = vech(&q).unwrap().iter().chain(vech(&r).unwrap().iter()).copied().collect::<Vec<_>>();
        let theta = DVector::from_vec(theta);
        // Substitute exact autocovariances for the sample products.
        let mut b = vech(&autocovariance(&coeffs[0], &coeffs[0], 0, &q, &r)).unwrap();
        for lag in 1..=m {
            let c = autocovariance(&coeffs[0], &coeffs[lag], lag, &q, &r);
            b = DVector::from_iterator(b.len() + 4, b.iter().copied().chain(uvec(&c).iter().copied()));
        }
        let zs = vec![DVector::zeros(2); m + 1];
        let s = regressor(&coeffs, &zs, m).unwrap();
        assert_eq!(s.d.shape(), (3 + m * 4, 4));
        assert!((&s.d * theta - b).amax() < 1e-10);
    }
}
