//! Recursive least squares on the MDA regression, `θ = [vech Q; vech R]`.
//!
//! This is the unconstrained baseline: nothing keeps `unvech` of the estimate
//! positive definite. The same Joseph-form information update is reused by the
//! trust-region filter to propagate `Ψ`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{contract, Error, Result};
use crate::mda::RegressorSample;
use crate::spd::SpdMatrix;
use crate::symvec::{symmetrize, unvech, vech, vech_len};

/// Parameter estimate `θ̂` together with its covariance `Ψ`.
#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    pub theta: DVector<f64>,
    pub psi: SpdMatrix,
}

impl ThetaEstimate {
    pub fn new(theta: DVector<f64>, psi: SpdMatrix) -> Result<Self> {
        if theta.len() != psi.dim() {
            return Err(contract(format!(
                "ThetaEstimate: θ has {} entries but Ψ is {}×{}",
                theta.len(),
                psi.dim(),
                psi.dim()
            )));
        }
        Ok(Self { theta, psi })
    }

    /// `θ̂₀ = [vech Q₀; vech R₀]`, `Ψ₀ = psi_scale · I`.
    pub fn from_matrices(q0: &DMatrix<f64>, r0: &DMatrix<f64>, psi_scale: f64) -> Result<Self> {
        let theta = matrices_to_theta(q0, r0)?;
        let psi = SpdMatrix::scaled_identity(theta.len(), psi_scale)?;
        Ok(Self { theta, psi })
    }
}

/// `[vech Q; vech R]`.
pub fn matrices_to_theta(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (vq, vr) = (vech(q)?, vech(r)?);
    Ok(DVector::from_iterator(
        vq.len() + vr.len(),
        vq.iter().chain(vr.iter()).copied(),
    ))
}

/// Splits `θ` back into symmetric `(Q, R)` of sides `n` and `p`. The matrices
/// are returned as-is; they may be indefinite.
pub fn theta_to_matrices(
    theta: &DVector<f64>,
    n: usize,
    p: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (mq, mr) = (vech_len(n), vech_len(p));
    if theta.len() != mq + mr {
        return Err(contract(format!(
            "theta_to_matrices: expected length {} for n = {n}, p = {p}, got {}",
            mq + mr,
            theta.len()
        )));
    }
    Ok((
        unvech(&theta.rows(0, mq).into_owned())?,
        unvech(&theta.rows(mq, mr).into_owned())?,
    ))
}

/// Gain `L = Ψ Dᵀ (R_W + D Ψ Dᵀ)⁻¹`.
pub fn rls_gain(psi: &SpdMatrix, d: &DMatrix<f64>, r_w: &SpdMatrix) -> Result<DMatrix<f64>> {
    if d.ncols() != psi.dim() || d.nrows() != r_w.dim() {
        return Err(contract(format!(
            "rls_gain: D is {}×{}, Ψ is {}×{}, R_W is {}×{}",
            d.nrows(),
            d.ncols(),
            psi.dim(),
            psi.dim(),
            r_w.dim(),
            r_w.dim()
        )));
    }
    let dpsi = d * psi.matrix();
    let innovation = symmetrize(&(r_w.matrix() + &dpsi * d.transpose()));
    let chol = Cholesky::new(innovation).ok_or(Error::Singular("RLS innovation matrix"))?;
    // Ψ symmetric: L = (S⁻¹ D Ψ)ᵀ.
    Ok(chol.solve(&dpsi).transpose())
}

/// Joseph-form covariance update `(I − L D) Ψ (I − L D)ᵀ + L R_W Lᵀ`.
pub fn joseph_psi(
    psi: &SpdMatrix,
    d: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    r_w: &SpdMatrix,
) -> Result<SpdMatrix> {
    let dim = psi.dim();
    let a = DMatrix::identity(dim, dim) - gain * d;
    let next = &a * psi.matrix() * a.transpose() + gain * r_w.matrix() * gain.transpose();
    SpdMatrix::new(symmetrize(&next))
}

/// One recursive least squares step.
pub fn rls_update(
    est: &ThetaEstimate,
    sample: &RegressorSample,
    r_w: &SpdMatrix,
) -> Result<ThetaEstimate> {
    if sample.b.len() != sample.d.nrows() {
        return Err(contract("rls_update: b and D row counts differ"));
    }
    let gain = rls_gain(&est.psi, &sample.d, r_w)?;
    let innovation = &sample.b - &sample.d * &est.theta;
    Ok(ThetaEstimate {
        theta: &est.theta + &gain * innovation,
        psi: joseph_psi(&est.psi, &sample.d, &gain, r_w)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::sym_eigenvalues;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(d: DMatrix<f64>, b: DVector<f64>) -> RegressorSample {
        RegressorSample { k: 0, lags: 0, d, b }
    }

    #[test]
    fn scalar_hand_example() {
        let est = ThetaEstimate::new(dvector![0.0], SpdMatrix::identity(1)).unwrap();
        let r_w = SpdMatrix::identity(1);
        let s = sample(dmatrix![1.0], dvector![2.0]);
        let gain = rls_gain(&est.psi, &s.d, &r_w).unwrap();
        assert!((gain[(0, 0)] - 0.5).abs() < 1e-12);
        let next = rls_update(&est, &s, &r_w).unwrap();
        assert!((next.theta[0] - 1.0).abs() < 1e-12);
        assert!((next.psi.matrix()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_regressor_is_no_information() {
        let est = ThetaEstimate::new(dvector![1.0, -2.0], SpdMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap()).unwrap();
        let r_w = SpdMatrix::identity(3);
        let next = rls_update(&est, &sample(DMatrix::zeros(3, 2), dvector![1.0, 2.0, 3.0]), &r_w).unwrap();
        assert_eq!(next.theta, est.theta);
        assert!((next.psi.matrix() - est.psi.matrix()).amax() < 1e-15);
    }

    #[test]
    fn matches_batch_regularized_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = dvector![3.0, 1.0, 2.0, 2.0];
        let mut est = ThetaEstimate::from_matrices(&DMatrix::identity(2, 2), &dmatrix![1.0], 1e3).unwrap();
        let theta0 = est.theta.clone();
        let r_w = SpdMatrix::identity(3);
        let mut info = DMatrix::identity(4, 4) * 1e-3;
        let mut rhs = &info * &theta0;
        for _ in 0..200 {
            let d = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let b = &d * &truth;
            info += d.transpose() * &d;
            rhs += d.transpose() * &b;
            est = rls_update(&est, &sample(d, b), &r_w).unwrap();
            assert!(est.psi.eig_min() > 0.0);
        }
        // Normal equations of the prior-regularized batch problem.
        let batch = info.clone().cholesky().unwrap().solve(&rhs);
        assert!((&est.theta - &batch).amax() < 1e-9);
        assert!((est.psi.matrix() - info.try_inverse().unwrap()).amax() < 1e-12);
        assert!((&est.theta - &truth).amax() < 1e-4);
    }

    #[test]
    fn theta_matrix_split() {
        let theta = dvector![1.0, 0.0, 1.0, 2.0];
        let (q, r) = theta_to_matrices(&theta, 2, 1).unwrap();
        assert_eq!(q, DMatrix::identity(2, 2));
        assert_eq!(r, dmatrix![2.0]);
        assert_eq!(matrices_to_theta(&q, &r).unwrap(), theta);
        assert!(theta_to_matrices(&theta, 2, 2).is_err());
        let (q, _) = theta_to_matrices(&dvector![-1.0, 0.0, 1.0, 2.0], 2, 1).unwrap();
        assert!(sym_eigenvalues(&q)[0] < 0.0);
    }
}
