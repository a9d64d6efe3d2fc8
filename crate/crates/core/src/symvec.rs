//! Symmetry-aware vectorization algebra.
//!
//! Conventions used throughout the crate:
//!
//! * `uvec` stacks all entries column-major, so `uvec(A X B) = (Bᵀ ⊗ A) uvec(X)`.
//! * `vech` stacks the lower triangle column-major:
//!   `[X₁₁, X₂₁, …, Xₙ₁, X₂₂, …, Xₙₙ]`.
//! * `kron_h(A)` is the two-sided compressed Kronecker product,
//!   `vech(A X Aᵀ) = kron_h(A) vech(X)`.
//! * `kron_u(Bᵀ, A)` is the one-sided compressed product,
//!   `uvec(A X B) = kron_u(Bᵀ, A) vech(X)`.
//!
//! Everything is materialized as dense matrices; the dimensions involved are
//! a handful of rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};

/// Relative tolerance used when validating symmetric inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Number of unique entries of an `n × n` symmetric matrix.
pub const fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` (with `i ≥ j`) inside `vech` of an `n × n` matrix.
#[inline]
pub fn vech_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * j.saturating_sub(1) / 2 + i - j
}

/// Inverse of [`vech_len`]; `None` when `len` is not triangular.
pub fn side_from_vech_len(len: usize) -> Option<usize> {
    let mut n = 0;
    while vech_len(n) < len {
        n += 1;
    }
    (vech_len(n) == len).then_some(n)
}

/// Largest absolute entry of `a - aᵀ` relative to the largest absolute entry of `a`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(contract(format!(
            "{what}: expected a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = asymmetry(a);
    if !(asym <= SYMMETRY_TOL) {
        return Err(contract(format!(
            "{what}: matrix is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Half-vectorization of a symmetric matrix.
pub fn vech(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_symmetric(x, "vech")?;
    Ok(vech_unchecked(x))
}

/// Half-vectorization reading only the lower triangle; no symmetry check.
pub fn vech_unchecked(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows();
    let mut out = DVector::zeros(vech_len(n));
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            out[idx] = x[(i, j)];
            idx += 1;
        }
    }
    out
}

/// Inverse of [`vech`]; the side length is inferred from the vector length.
pub fn unvech(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = side_from_vech_len(v.len())
        .ok_or_else(|| contract(format!("unvech: length {} is not n(n+1)/2", v.len())))?;
    let mut out = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            out[(i, j)] = v[idx];
            out[(j, i)] = v[idx];
            idx += 1;
        }
    }
    Ok(out)
}

/// Column-major vectorization.
pub fn uvec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Two-sided compressed Kronecker product for `A` of shape `r × n`.
///
/// Returns the `r(r+1)/2 × n(n+1)/2` matrix with `vech(A X Aᵀ) = kron_h(A) vech(X)`.
pub fn kron_h(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, n) = a.shape();
    let mut out = DMatrix::zeros(vech_len(r), vech_len(n));
    let mut col = 0;
    for j in 0..n {
        for i in j..n {
            // A E Aᵀ with E the symmetric basis element for (i, j).
            let mut image = a.column(i) * a.column(j).transpose();
            if i != j {
                image += a.column(j) * a.column(i).transpose();
            }
            out.set_column(col, &vech_unchecked(&image));
            col += 1;
        }
    }
    out
}

/// One-sided compressed Kronecker product.
///
/// With `A` of shape `r × n` and `Bᵀ` of shape `c × n`, returns the
/// `rc × n(n+1)/2` matrix with `uvec(A X B) = kron_u(Bᵀ, A) vech(X)` for every
/// symmetric `n × n` matrix `X`.
pub fn kron_u(bt: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if bt.ncols() != a.ncols() {
        return Err(contract(format!(
            "kron_u: A is {}×{} but Bᵀ is {}×{}; inner dimensions must agree",
            a.nrows(),
            a.ncols(),
            bt.nrows(),
            bt.ncols()
        )));
    }
    let n = a.ncols();
    let mut out = DMatrix::zeros(a.nrows() * bt.nrows(), vech_len(n));
    let mut col = 0;
    for j in 0..n {
        for i in j..n {
            let mut image = a.column(i) * bt.column(j).transpose();
            if i != j {
                image += a.column(j) * bt.column(i).transpose();
            }
            out.set_column(col, &uvec(&image));
            col += 1;
        }
    }
    Ok(out)
}

/// Block trace: the sum of the `n` diagonal `n × n` blocks of an `n² × n²` matrix.
///
/// This is the adjoint of `B ↦ I_n ⊗ B` under the trace pairing:
/// `Tr{A (I ⊗ B)} = Tr{btr(A) B}`.
pub fn btr(a: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if a.nrows() != n * n || a.ncols() != n * n {
        return Err(contract(format!(
            "btr: expected a {0}×{0} matrix for n = {n}, got {1}×{2}",
            n * n,
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    for blk in 0..n {
        out += a.view((blk * n, blk * n), (n, n));
    }
    Ok(out)
}

/// Selection matrix `𝓘_n` of shape `n(n+1)/2 × n²`: block-diagonal with block
/// `i` equal to the identity with its first `i` rows deleted.
///
/// Satisfies `vech(X) = 𝓘_n (I_n ⊗ X) uvec(I_n)` for symmetric `X`.
pub fn sel_matrix(n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(vech_len(n), n * n);
    let mut row = 0;
    for blk in 0..n {
        for i in blk..n {
            out[(row, blk * n + i)] = 1.0;
            row += 1;
        }
    }
    out
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
