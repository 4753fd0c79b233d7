//! Seeded random matrix ensembles and deterministic test matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::reflector::ReflectorProduct;
use crate::scalar::Real;

/// The generator used by every seeded entry point in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` matrix with i.i.d. standard Gaussian entries.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

pub fn gaussian_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Uniformly distributed unit vector.
pub fn random_unit_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    loop {
        let v = gaussian_vector::<T, _>(n, rng);
        let norm = v.norm();
        if norm > T::lit(1e-8) {
            return v / norm;
        }
    }
}

/// Orthonormal factor of the QR decomposition of a Gaussian matrix.
///
/// Columns are rescaled by `sign(r_ii)` so the result is Haar distributed
/// rather than biased by the Householder sign convention.
pub fn random_orthonormal<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let x = gaussian_matrix::<T, _>(n, n, rng);
    let qr = x.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Indefinite ensemble `S = (X + X^T) / 2`.
pub fn random_indefinite<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let x = gaussian_matrix::<T, _>(n, n, rng);
    (&x + x.transpose()) * T::lit(0.5)
}

/// Wishart ensemble `S = X X^T`.
pub fn random_wishart<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let x = gaussian_matrix::<T, _>(n, n, rng);
    &x * x.transpose()
}

/// Product of `h` reflectors with random unit vectors and random signs.
pub fn random_reflector_product<T: Real, R: Rng + ?Sized>(n: usize, h: usize, rng: &mut R) -> ReflectorProduct<T> {
    let vectors = (0..h).map(|_| random_unit_vector::<T, _>(n, rng)).collect();
    let signs = DVector::from_fn(n, |_, _| if rng.random::<bool>() { T::one() } else { -T::one() });
    ReflectorProduct::from_parts_unchecked(n, vectors, signs)
}

/// Normalized Sylvester-Hadamard matrix `H_n / sqrt(n)`; `n` must be a power of two.
pub fn hadamard<T: Real>(n: usize) -> Option<DMatrix<T>> {
    if n == 0 || !n.is_power_of_two() {
        return None;
    }
    let scale = T::one() / T::lit(n as f64).sqrt();
    Some(DMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            scale
        } else {
            -scale
        }
    }))
}

/// Planar rotation by `angle` (radians) as a 2x2 matrix.
pub fn rotation2<T: Real>(angle: f64) -> DMatrix<T> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[T::lit(c), T::lit(-s), T::lit(s), T::lit(c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn orthonormal_samples_are_orthonormal() {
        let mut rng = seeded_rng(3);
        let u = random_orthonormal::<f64, _>(40, &mut rng);
        assert!(linalg::orthonormality_defect(&u) < 1e-12);
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = random_indefinite::<f64, _>(6, &mut seeded_rng(11));
        let b = random_indefinite::<f64, _>(6, &mut seeded_rng(11));
        assert_eq!(a, b);
        assert!(linalg::symmetry_defect(&a) == 0.0);
    }

    #[test]
    fn wishart_is_positive_definite() {
        let s = random_wishart::<f64, _>(10, &mut seeded_rng(5));
        let (vals, _) = linalg::sym_eigen_ascending(&s);
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn hadamard_is_orthonormal_and_symmetric() {
        let h = hadamard::<f64>(8).unwrap();
        assert!(linalg::orthonormality_defect(&h) < 1e-14);
        assert_eq!(h, h.transpose());
        assert!(hadamard::<f64>(6).is_none());
    }
}
