//! Small dense helpers on top of nalgebra used across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) fn ensure_square<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `|M^T M - I|_F`.
pub fn orthonormality_defect<T: Real>(m: &DMatrix<T>) -> T {
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<T>::identity(n, n)).norm()
}

/// `|M - M^T|_F`.
pub fn symmetry_defect<T: Real>(m: &DMatrix<T>) -> T {
    (m - m.transpose()).norm()
}

pub fn frobenius_sq<T: Real>(m: &DMatrix<T>) -> T {
    m.norm_squared()
}

/// Squared Frobenius norm of the off-diagonal part.
pub fn off_diagonal_sq<T: Real>(m: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
///
/// Ties keep the solver's column order, so the output is deterministic.
pub fn sym_eigen_ascending<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    // Exact symmetrization; callers pass matrices that are symmetric up to rounding.
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Flips `v` so its first entry that is not negligible is positive.
pub fn orient_first_positive<T: Real>(v: &mut DVector<T>) {
    let scale = v.amax();
    let floor = scale * T::tol(1e-12);
    if let Some(x) = v.iter().find(|x| x.abs() > floor) {
        if *x < T::zero() {
            v.neg_mut();
        }
    }
}

/// `M <- (I - 2uu^T) M (I - 2uu^T)` for unit `u`, in O(n^2).
pub fn reflect_congruence<T: Real>(m: &mut DMatrix<T>, u: &DVector<T>) {
    let w = &*m * u;
    let c = u.dot(&w);
    let two = T::lit(2.0);
    let p = w * two - u * (two * c);
    m.ger(-T::one(), u, &p, T::one());
    m.ger(-T::one(), &p, u, T::one());
}

/// `M <- D M D` for a sign vector `d`.
pub fn sign_congruence<T: Real>(m: &mut DMatrix<T>, d: &DVector<T>) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= d[i] * d[j];
        }
    }
}

/// `(I - 2uu^T) x` in place.
#[inline]
pub(crate) fn reflect_in_place<T: Real>(x: &mut DVector<T>, u: &DVector<T>) {
    let c = T::lit(2.0) * u.dot(x);
    x.axpy(-c, u, T::one());
}
