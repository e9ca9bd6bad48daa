//! Dense matrix utilities and the two structured products everything else is
//! built on: the Hadamard (entrywise) product and the column-wise Khatri-Rao
//! product.
//!
//! Matrices are plain `nalgebra` dynamic matrices. Shape errors are reported
//! through [`Error::Shape`]; finiteness is checked where data enters the
//! crate (see [`ensure_finite`]).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative asymmetry above which a matrix handed to the symmetric solvers
/// is logged as suspicious.
const ASYMMETRY_TOLERANCE: f64 = 1e-10;

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Entrywise product `P[i,j] = M[i,j] * N[i,j]`.
pub fn hadamard(m: &Matrix, n: &Matrix) -> Result<Matrix> {
    if m.shape() != n.shape() {
        return Err(Error::Shape(format!(
            "hadamard of {:?} and {:?}",
            m.shape(),
            n.shape()
        )));
    }
    Ok(m.component_mul(n))
}

/// Column-wise Khatri-Rao product of an `S x m` and an `n x m` matrix.
///
/// Row `(nu, i)` of the `(S*n) x m` result lives at index `nu * n + i`, and
/// its column `j` holds `A[nu, j] * X[i, j]`.
pub fn khatri_rao(a: &Matrix, x: &Matrix) -> Result<Matrix> {
    if a.ncols() != x.ncols() {
        return Err(Error::Shape(format!(
            "khatri_rao needs equal column counts, got {} and {}",
            a.ncols(),
            x.ncols()
        )));
    }
    let (s, n) = (a.nrows(), x.nrows());
    Ok(Matrix::from_fn(s * n, a.ncols(), |row, j| {
        a[(row / n, j)] * x[(row % n, j)]
    }))
}

/// `MᵀM`, routed through the blocked GEMM kernel.
pub fn gram(m: &Matrix) -> Matrix {
    let mut g = m.transpose() * m;
    symmetrize_in_place(&mut g);
    g
}

/// `(XᵀX) ∘ (AᵀA)`, which equals the Gram matrix of `A * X` without ever
/// materializing the Khatri-Rao product.
pub fn khatri_rao_gram(a: &Matrix, x: &Matrix) -> Result<Matrix> {
    if a.ncols() != x.ncols() {
        return Err(Error::Shape(format!(
            "khatri_rao_gram needs equal column counts, got {} and {}",
            a.ncols(),
            x.ncols()
        )));
    }
    hadamard(&gram(x), &gram(a))
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest absolute entry (the entrywise infinity norm).
pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn symmetrize_in_place(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn symmetrized(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {:?}",
            m.shape()
        )));
    }
    let scale = max_abs(m.iter().copied());
    let asym = max_abs(m.iter().zip(m.transpose().iter()).map(|(a, b)| a - b));
    if scale > 0.0 && asym > ASYMMETRY_TOLERANCE * scale {
        log::warn!("symmetric solver received matrix with relative asymmetry {:e}", asym / scale);
    }
    let mut s = m.clone();
    symmetrize_in_place(&mut s);
    Ok(s)
}

/// All eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let s = symmetrized(m)?;
    if s.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_eigen_sym(m: &Matrix) -> Result<f64> {
    sym_eigenvalues(m)?
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("empty matrix".into()))
}

/// Largest eigenvalue of the symmetric part of a square matrix.
pub fn max_eigen_sym(m: &Matrix) -> Result<f64> {
    sym_eigenvalues(m)?
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("empty matrix".into()))
}

/// Smallest eigenvalue together with a unit eigenvector.
pub fn min_eigenpair_sym(m: &Matrix) -> Result<(f64, Vector)> {
    let s = symmetrized(m)?;
    if s.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let eig = SymmetricEigen::new(s);
    let idx = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(idx).into_owned();
    Ok((eig.eigenvalues[idx], v))
}

/// Largest eigenvalue together with a unit eigenvector.
pub fn max_eigenpair_sym(m: &Matrix) -> Result<(f64, Vector)> {
    let s = symmetrized(m)?;
    if s.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let eig = SymmetricEigen::new(s);
    let idx = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(idx).into_owned();
    Ok((eig.eigenvalues[idx], v))
}

/// Largest singular value. Empty matrices have norm zero.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() {
        gram(m)
    } else {
        gram(&m.transpose())
    };
    // Gram matrices are square by construction.
    max_eigen_sym(&g).unwrap_or(0.0).max(0.0).sqrt()
}

/// `σ_min(M) = sqrt(λ_min(MᵀM))`, clamped at zero. Requires `rows >= cols`.
pub fn min_singular(m: &Matrix) -> Result<f64> {
    if m.nrows() < m.ncols() {
        return Err(Error::Shape(format!(
            "min_singular needs rows >= cols, got {:?}; transpose first",
            m.shape()
        )));
    }
    if m.ncols() == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    Ok(min_eigen_sym(&gram(m))?.max(0.0).sqrt())
}

/// The `min(rows, cols)`-th singular value, for either orientation.
pub fn smallest_singular_value(m: &Matrix) -> Result<f64> {
    if m.nrows() >= m.ncols() {
        min_singular(m)
    } else {
        min_singular(&m.transpose())
    }
}
