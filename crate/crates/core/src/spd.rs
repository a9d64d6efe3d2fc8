//! Geometry of the manifold of symmetric positive definite matrices under the
//! affine-invariant metric `⟨V₁, V₂⟩_X = Tr{X⁻¹ V₁ X⁻¹ V₂}`.
//!
//! Matrix functions (square roots, powers, exponentials) go through the
//! symmetric eigendecomposition, which every [`SpdMatrix`] caches on
//! construction together with a Cholesky factor used for all `X⁻¹` products.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{contract, Error, Result};
use crate::symvec::{check_symmetric, symmetrize};

/// Construction rejects matrices with `eig_min ≤ SPD_REL_TOL · eig_max`.
pub const SPD_REL_TOL: f64 = 1e-12;

/// A symmetric positive definite matrix with a certified smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    data: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Validates symmetry (relative tolerance `1e-10`) and positive
    /// definiteness, storing the exactly symmetrized matrix.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&data, "SpdMatrix")?;
        if data.nrows() == 0 {
            return Err(contract("SpdMatrix: empty matrix"));
        }
        let data = symmetrize(&data);
        let eig = SymmetricEigen::new(data.clone());
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if !(eig_min > 0.0 && eig_min > SPD_REL_TOL * eig_max) || !eig_max.is_finite() {
            return Err(Error::NotSpd { eig_min, eig_max });
        }
        let chol = Cholesky::new(data.clone()).ok_or(Error::NotSpd { eig_min, eig_max })?;
        Ok(Self {
            data,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
            chol,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n) * scale)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn eig_min(&self) -> f64 {
        self.eigvals.min()
    }

    pub fn eig_max(&self) -> f64 {
        self.eigvals.max()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted(self.eigvals.as_slice())
    }

    /// `X⁻¹ B` through the cached Cholesky factor.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `U f(Λ) Uᵀ` for the cached eigendecomposition.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = self.eigvals.map(f);
        let scaled = &self.eigvecs * DMatrix::from_diagonal(&d);
        symmetrize(&(scaled * self.eigvecs.transpose()))
    }

    /// `X + shift · I`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let n = self.dim();
        Self::new(&self.data + DMatrix::identity(n, n) * shift)
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Ascending eigenvalues of a symmetric matrix (no definiteness requirement).
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    sorted(SymmetricEigen::new(symmetrize(a)).eigenvalues.as_slice())
}

/// `U f(Λ) Uᵀ` for a symmetric matrix.
pub fn sym_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let d = eig.eigenvalues.map(f);
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

/// Unique SPD square root.
pub fn spd_sqrt(x: &SpdMatrix) -> Result<SpdMatrix> {
    SpdMatrix::new(x.map_eigenvalues(f64::sqrt))
}

/// Affine-invariant inner product `Tr{X⁻¹ V₁ X⁻¹ V₂}`.
pub fn ai_inner(x: &SpdMatrix, v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> f64 {
    let a = x.solve(v1);
    let b = x.solve(v2);
    // Tr{A B} without forming the product.
    a.component_mul(&b.transpose()).sum()
}

/// Point at parameter `s ∈ [0, 1]` on the geodesic from `X` to `Y`:
/// `X^{1/2} (X^{-1/2} Y X^{-1/2})^s X^{1/2}`.
pub fn geodesic(x: &SpdMatrix, y: &SpdMatrix, s: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(contract(format!("geodesic: s = {s} outside [0, 1]")));
    }
    if x.dim() != y.dim() {
        return Err(contract("geodesic: dimension mismatch"));
    }
    let half = x.map_eigenvalues(f64::sqrt);
    let inv_half = x.map_eigenvalues(|l| 1.0 / l.sqrt());
    let inner = &inv_half * y.matrix() * &inv_half;
    let powered = sym_map(&inner, |l| l.powf(s));
    SpdMatrix::new(symmetrize(&(&half * powered * &half)))
}

/// Geodesic emanating from `X` in direction `V`, evaluated at `s`:
/// `X^{1/2} Exp(s X^{-1/2} V X^{-1/2}) X^{1/2}`.
///
/// This is the exponential map of the affine-invariant metric and stays in
/// the manifold for every real `s`; an error is only possible when the result
/// under- or overflows double precision.
pub fn retract(x: &SpdMatrix, v: &DMatrix<f64>, s: f64) -> Result<SpdMatrix> {
    check_symmetric(v, "retract direction")?;
    if v.nrows() != x.dim() {
        return Err(contract("retract: dimension mismatch"));
    }
    let half = x.map_eigenvalues(f64::sqrt);
    let inv_half = x.map_eigenvalues(|l| 1.0 / l.sqrt());
    let inner = (&inv_half * v * &inv_half) * s;
    let expd = sym_map(&inner, f64::exp);
    SpdMatrix::new(symmetrize(&(&half * expd * &half)))
}

/// Riemannian gradient from a Euclidean gradient: `X sym(G) X`.
pub fn egrad_to_rgrad(x: &SpdMatrix, egrad: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.matrix();
    symmetrize(&(m * symmetrize(egrad) * m))
}

/// Riemannian Hessian action from Euclidean quantities:
/// `X sym(D∇f[V]) X + sym(V sym(∇f) X)`.
pub fn ehess_to_rhess(
    x: &SpdMatrix,
    egrad: &DMatrix<f64>,
    ederiv: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m = x.matrix();
    let curvature = symmetrize(&(v * symmetrize(egrad) * m));
    symmetrize(&(m * symmetrize(ederiv) * m)) + curvature
}

/// A tangent vector `(V_Q, V_R)` of the product manifold `𝕡_n × 𝕡_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentPair {
    pub v_q: DMatrix<f64>,
    pub v_r: DMatrix<f64>,
}

impl TangentPair {
    pub fn new(v_q: DMatrix<f64>, v_r: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&v_q, "TangentPair.v_q")?;
        check_symmetric(&v_r, "TangentPair.v_r")?;
        Ok(Self {
            v_q: symmetrize(&v_q),
            v_r: symmetrize(&v_r),
        })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            v_q: DMatrix::zeros(n, n),
            v_r: DMatrix::zeros(p, p),
        }
    }

    /// Product-metric inner product at `(Q, R)`.
    pub fn inner(&self, other: &TangentPair, q: &SpdMatrix, r: &SpdMatrix) -> f64 {
        ai_inner(q, &self.v_q, &other.v_q) + ai_inner(r, &self.v_r, &other.v_r)
    }

    pub fn norm(&self, q: &SpdMatrix, r: &SpdMatrix) -> f64 {
        self.inner(self, q, r).max(0.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.v_q.iter().chain(self.v_r.iter()).all(|&v| v == 0.0)
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &TangentPair) -> TangentPair {
        TangentPair {
            v_q: &self.v_q + &other.v_q * alpha,
            v_r: &self.v_r + &other.v_r * alpha,
        }
    }
}

impl Add for &TangentPair {
    type Output = TangentPair;
    fn add(self, rhs: &TangentPair) -> TangentPair {
        TangentPair {
            v_q: &self.v_q + &rhs.v_q,
            v_r: &self.v_r + &rhs.v_r,
        }
    }
}

impl Sub for &TangentPair {
    type Output = TangentPair;
    fn sub(self, rhs: &TangentPair) -> TangentPair {
        TangentPair {
            v_q: &self.v_q - &rhs.v_q,
            v_r: &self.v_r - &rhs.v_r,
        }
    }
}

impl Mul<f64> for &TangentPair {
    type Output = TangentPair;
    fn mul(self, rhs: f64) -> TangentPair {
        TangentPair {
            v_q: &self.v_q * rhs,
            v_r: &self.v_r * rhs,
        }
    }
}

impl Neg for &TangentPair {
    type Output = TangentPair;
    fn neg(self) -> TangentPair {
        self * -1.0
    }
}
