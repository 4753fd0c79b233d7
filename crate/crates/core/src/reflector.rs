//! Products of Householder reflectors and factored symmetric operators.
//!
//! A [`ReflectorProduct`] stores `D * U_h * ... * U_1` where every
//! `U_k = I - 2 u_k u_k^T` has a unit vector `u_k` and `D` is a diagonal of
//! signs. Vectors are kept in application order: `u_1` acts on an input
//! first. Applying the product costs `4nh + n` flops and never forms a dense
//! matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Accumulates floating point operation counts of the factored kernels.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FlopCounter {
    pub flops: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

pub(crate) trait Tally {
    fn add(&mut self, flops: u64);
}

impl Tally for () {
    #[inline]
    fn add(&mut self, _: u64) {}
}

impl Tally for FlopCounter {
    #[inline]
    fn add(&mut self, flops: u64) {
        self.flops += flops;
    }
}

/// Flops of a dense `n x n` matrix-vector product.
pub fn dense_matvec_flops(n: usize) -> u64 {
    let n = n as u64;
    n * (2 * n - 1)
}

/// Tolerance used when validating unit reflector vectors at construction.
fn unit_tol<T: Real>() -> T {
    T::tol(1e-12).max(T::default_epsilon() * T::lit(64.0))
}

fn check_len<T: Real>(n: usize, x: &DVector<T>) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

// Each reflector costs one dot product (2n - 1), one scaling (1) and one
// axpy (2n): 4n flops.
#[inline]
fn reflect_tally<T: Real, C: Tally>(x: &mut DVector<T>, u: &DVector<T>, tally: &mut C) {
    linalg::reflect_in_place(x, u);
    tally.add(4 * x.len() as u64);
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorProduct<T: Real> {
    n: usize,
    vectors: Vec<DVector<T>>,
    signs: DVector<T>,
}

impl<T: Real> ReflectorProduct<T> {
    /// Builds a product from unit reflector vectors (application order) and
    /// a sign diagonal.
    pub fn new(n: usize, vectors: Vec<DVector<T>>, signs: DVector<T>) -> Result<Self> {
        check_len(n, &signs)?;
        for (index, s) in signs.iter().enumerate() {
            if *s != T::one() && *s != -T::one() {
                return Err(Error::InvalidSign { index });
            }
        }
        let tol = unit_tol::<T>();
        for (index, v) in vectors.iter().enumerate() {
            check_len(n, v)?;
            let norm = v.norm();
            if (norm - T::one()).abs() > tol {
                return Err(Error::NonUnitVector {
                    index,
                    norm: norm.as_f64(),
                });
            }
        }
        Ok(Self { n, vectors, signs })
    }

    /// Constructor for callers that validated the invariants already.
    pub(crate) fn from_parts_unchecked(n: usize, vectors: Vec<DVector<T>>, signs: DVector<T>) -> Self {
        Self { n, vectors, signs }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            vectors: Vec::new(),
            signs: DVector::from_element(n, T::one()),
        }
    }

    /// Product of the given reflectors with identity signs.
    pub fn from_reflectors(n: usize, vectors: Vec<DVector<T>>) -> Result<Self> {
        Self::new(n, vectors, DVector::from_element(n, T::one()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (true) reflectors.
    pub fn h(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<T>] {
        &self.vectors
    }

    pub fn signs(&self) -> &DVector<T> {
        &self.signs
    }

    pub fn with_signs(mut self, signs: DVector<T>) -> Result<Self> {
        self = Self::new(self.n, self.vectors, signs)?;
        Ok(self)
    }

    /// `-P`, obtained by negating the sign diagonal.
    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            vectors: self.vectors.clone(),
            signs: -&self.signs,
        }
    }

    /// Returns `P * E` for a sign diagonal `E`, kept in `D * U_h ... U_1` form
    /// as `(D E) * (E U_h E) ... (E U_1 E)`.
    pub fn right_sign_scaled(&self, e: &DVector<T>) -> Result<Self> {
        check_len(self.n, e)?;
        let vectors = self.vectors.iter().map(|v| v.component_mul(e)).collect();
        Self::new(self.n, vectors, self.signs.component_mul(e))
    }

    /// `D * U_h ... U_1 * x`.
    pub fn apply(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.apply_tallied(x, &mut ())
    }

    /// [`Self::apply`] while counting flops.
    pub fn apply_counted(&self, x: &DVector<T>, counter: &mut FlopCounter) -> Result<DVector<T>> {
        self.apply_tallied(x, counter)
    }

    fn apply_tallied<C: Tally>(&self, x: &DVector<T>, tally: &mut C) -> Result<DVector<T>> {
        check_len(self.n, x)?;
        let mut y = x.clone();
        for u in &self.vectors {
            reflect_tally(&mut y, u, tally);
        }
        y.component_mul_assign(&self.signs);
        tally.add(self.n as u64);
        Ok(y)
    }

    /// `U_1 ... U_h * D * x`, the inverse of [`Self::apply`].
    pub fn apply_transpose(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.apply_transpose_tallied(x, &mut ())
    }

    /// [`Self::apply_transpose`] while counting flops (same cost as `apply`).
    pub fn apply_transpose_counted(&self, x: &DVector<T>, counter: &mut FlopCounter) -> Result<DVector<T>> {
        self.apply_transpose_tallied(x, counter)
    }

    fn apply_transpose_tallied<C: Tally>(&self, x: &DVector<T>, tally: &mut C) -> Result<DVector<T>> {
        check_len(self.n, x)?;
        let mut y = x.component_mul(&self.signs);
        tally.add(self.n as u64);
        for u in self.vectors.iter().rev() {
            reflect_tally(&mut y, u, tally);
        }
        Ok(y)
    }

    /// Reflector part only, `U_h ... U_1 * x`, without the sign diagonal.
    pub(crate) fn apply_reflectors_in_place(&self, x: &mut DVector<T>) {
        for u in &self.vectors {
            linalg::reflect_in_place(x, u);
        }
    }

    /// Dense realization; column `j` is `apply(e_j)`.
    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::<T>::identity(self.n, self.n);
        for u in &self.vectors {
            // (I - 2uu^T) M
            let row = m.tr_mul(u);
            m.ger(-T::lit(2.0), u, &row, T::one());
        }
        for i in 0..self.n {
            let s = self.signs[i];
            m.row_mut(i).scale_mut(s);
        }
        m
    }
}

/// `Ubar * diag(spectrum) * Ubar^T` with `Ubar` a [`ReflectorProduct`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredSymmetric<T: Real> {
    basis: ReflectorProduct<T>,
    spectrum: DVector<T>,
    // Reflector vectors with the sign diagonal folded in: D U D = I - 2(Du)(Du)^T.
    folded: Vec<DVector<T>>,
}

impl<T: Real> FactoredSymmetric<T> {
    pub fn new(basis: ReflectorProduct<T>, spectrum: DVector<T>) -> Result<Self> {
        check_len(basis.n(), &spectrum)?;
        let folded = basis
            .vectors()
            .iter()
            .map(|u| u.component_mul(basis.signs()))
            .collect();
        Ok(Self {
            basis,
            spectrum,
            folded,
        })
    }

    pub fn basis(&self) -> &ReflectorProduct<T> {
        &self.basis
    }

    pub fn spectrum(&self) -> &DVector<T> {
        &self.spectrum
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn into_parts(self) -> (ReflectorProduct<T>, DVector<T>) {
        (self.basis, self.spectrum)
    }

    pub fn apply(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.apply_tallied(x, &mut ())
    }

    pub fn apply_counted(&self, x: &DVector<T>, counter: &mut FlopCounter) -> Result<DVector<T>> {
        self.apply_tallied(x, counter)
    }

    // S x = (D R D) diag(s) (D R D)^T x, so the signs cost nothing at apply
    // time: two reflector passes and one scaling, (8h + 1) n flops.
    fn apply_tallied<C: Tally>(&self, x: &DVector<T>, tally: &mut C) -> Result<DVector<T>> {
        check_len(self.n(), x)?;
        let mut y = x.clone();
        for u in self.folded.iter().rev() {
            reflect_tally(&mut y, u, tally);
        }
        y.component_mul_assign(&self.spectrum);
        tally.add(self.n() as u64);
        for u in &self.folded {
            reflect_tally(&mut y, u, tally);
        }
        Ok(y)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let u = self.basis.to_dense();
        let mut scaled = u.clone();
        for j in 0..self.n() {
            let s = self.spectrum[j];
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * u.transpose()
    }
}

/// Measured quality of an approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport<T: Real> {
    /// `|X - Xbar|_F^2`.
    pub measured_error: T,
    /// `|X - Xbar|_F^2 / (4 |X|_F^2)`.
    pub normalized_error: T,
    /// Closed-form error prediction, when one exists for the method.
    pub predicted_error: Option<T>,
    /// Objective value per outer iteration (iterative methods only).
    pub trace: Vec<T>,
    pub requested_h: usize,
    pub effective_h: usize,
}

impl<T: Real> ApproxReport<T> {
    pub(crate) fn measure(
        target: &DMatrix<T>,
        approx: &DMatrix<T>,
        requested_h: usize,
        effective_h: usize,
    ) -> Result<Self> {
        let measured_error = (target - approx).norm_squared();
        let normalized_error = relative_error(target, approx)?;
        Ok(Self {
            measured_error,
            normalized_error,
            predicted_error: None,
            trace: Vec::new(),
            requested_h,
            effective_h,
        })
    }
}

/// Normalized representation error `|X - Xbar|_F^2 / (4 |X|_F^2)`.
pub fn relative_error<T: Real>(x: &DMatrix<T>, approx: &DMatrix<T>) -> Result<T> {
    if x.shape() != approx.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: approx.len(),
        });
    }
    let denom = x.norm_squared();
    if denom == T::zero() {
        return Err(Error::ZeroReference);
    }
    Ok((x - approx).norm_squared() / (T::lit(4.0) * denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn random_product(n: usize, h: usize, seed: u64) -> ReflectorProduct<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ensemble::random_reflector_product(n, h, &mut rng)
    }

    #[test]
    fn identity_product_is_identity() {
        let p = ReflectorProduct::<f64>::identity(5);
        let x = DVector::from_fn(5, |i, _| i as f64 - 1.5);
        assert_eq!(p.apply(&x).unwrap(), x);
        assert_eq!(p.apply_transpose(&x).unwrap(), x);
        assert_eq!(p.to_dense(), DMatrix::identity(5, 5));
    }

    #[test]
    fn single_axis_reflector_flips_axis() {
        let p = ReflectorProduct::from_reflectors(4, vec![e(4, 0)]).unwrap();
        assert_eq!(p.apply(&e(4, 0)).unwrap(), -e(4, 0));
        let mut expected = DMatrix::<f64>::identity(4, 4);
        expected[(0, 0)] = -1.0;
        assert_eq!(p.to_dense(), expected);
    }

    #[test]
    fn apply_matches_dense_oracle() {
        let p = random_product(16, 3, 7);
        let dense = p.to_dense();
        let x = DVector::from_fn(16, |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
        let y = p.apply(&x).unwrap();
        assert!((y - &dense * &x).norm() <= 1e-10 * x.norm());
        assert!(linalg::orthonormality_defect(&dense) < 1e-10 * 16.0);
    }

    #[test]
    fn dense_oracle_is_built_independently() {
        // Multiply the explicit matrices rather than applying column by column.
        let p = random_product(8, 2, 3);
        let mut dense = DMatrix::<f64>::identity(8, 8);
        for u in p.vectors() {
            dense = (DMatrix::identity(8, 8) - u * u.transpose() * 2.0) * dense;
        }
        dense = DMatrix::from_diagonal(p.signs()) * dense;
        assert!((dense.clone() - p.to_dense()).norm() < 1e-12);
        let x = DVector::from_fn(8, |i, _| (i as f64).sin());
        let yt = p.apply_transpose(&x).unwrap();
        assert!((yt - dense.transpose() * &x).norm() < 1e-10 * x.norm());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = random_product(6, 2, 1);
        let x = DVector::<f64>::zeros(5);
        assert!(matches!(p.apply(&x), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(p.apply_transpose(&x), Err(Error::DimensionMismatch { .. })));
        let f = FactoredSymmetric::new(p, DVector::from_element(6, 1.0)).unwrap();
        assert!(f.apply(&x).is_err());
    }

    #[test]
    fn construction_validates_invariants() {
        let bad = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!(matches!(
            ReflectorProduct::from_reflectors(3, vec![bad]),
            Err(Error::NonUnitVector { .. })
        ));
        let signs = DVector::from_vec(vec![1.0, 0.5, -1.0]);
        assert!(matches!(
            ReflectorProduct::new(3, vec![], signs),
            Err(Error::InvalidSign { index: 1 })
        ));
    }

    #[test]
    fn determinant_tracks_signs_and_reflector_count() {
        for (h, seed) in [(0, 1), (1, 2), (2, 3), (3, 4), (5, 5)] {
            let p = random_product(6, h, seed);
            let det = p.to_dense().determinant();
            let sign_prod: f64 = p.signs().iter().product();
            let expected = sign_prod * if h % 2 == 0 { 1.0 } else { -1.0 };
            assert!((det - expected).abs() < 1e-9, "h={h}: det {det}");
        }
    }

    #[test]
    fn symmetric_apply_identity_cases() {
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let f = FactoredSymmetric::new(ReflectorProduct::identity(4), DVector::from_element(4, 1.0)).unwrap();
        assert_eq!(f.apply(&x).unwrap(), x);

        let signs = DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]);
        let s = DVector::from_vec(vec![2.0, -3.0, 0.25, 7.0]);
        let basis = ReflectorProduct::new(4, vec![], signs).unwrap();
        let f = FactoredSymmetric::new(basis, s.clone()).unwrap();
        assert!((f.apply(&x).unwrap() - s.component_mul(&x)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_apply_matches_dense_oracle() {
        let p = random_product(16, 4, 11);
        let s = DVector::from_fn(16, |i, _| (i as f64) - 6.5);
        let u = p.to_dense();
        let dense = &u * DMatrix::from_diagonal(&s) * u.transpose();
        let f = FactoredSymmetric::new(p, s.clone()).unwrap();
        let x = DVector::from_fn(16, |i, _| ((3 * i) % 5) as f64 - 2.0);
        let y = f.apply(&x).unwrap();
        let expected = &dense * &x;
        assert!((y - &expected).norm() <= 1e-9 * expected.norm());
        assert!((f.to_dense() - &dense).norm() < 1e-10);
        assert!(linalg::symmetry_defect(&f.to_dense()) < 1e-10 * 16.0);
    }

    #[test]
    fn factored_spectrum_is_preserved() {
        let p = random_product(8, 3, 21);
        let s = DVector::from_vec(vec![4.0, -2.0, 1.0, 0.5, 0.0, -7.0, 3.0, 2.5]);
        let f = FactoredSymmetric::new(p, s.clone()).unwrap();
        let (vals, _) = linalg::sym_eigen_ascending(&f.to_dense());
        let mut sorted: Vec<f64> = s.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in vals.iter().zip(sorted) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn flop_counts_match_cost_model() {
        let (n, h) = (64, 5);
        let p = random_product(n, h, 9);
        let x = DVector::from_element(n, 1.0);
        let mut c = FlopCounter::new();
        p.apply_counted(&x, &mut c).unwrap();
        assert_eq!(c.flops, (4 * n * h + n) as u64);

        let f = FactoredSymmetric::new(p, DVector::from_element(n, 2.0)).unwrap();
        let mut c = FlopCounter::new();
        f.apply_counted(&x, &mut c).unwrap();
        assert_eq!(c.flops, ((8 * h + 1) * n) as u64);
    }

    #[test]
    fn right_sign_scaling_is_a_column_scaling() {
        let p = random_product(7, 3, 5);
        let e = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0]);
        let q = p.right_sign_scaled(&e).unwrap();
        let expected = p.to_dense() * DMatrix::from_diagonal(&e);
        assert!((q.to_dense() - expected).norm() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        let i = DMatrix::<f64>::identity(5, 5);
        assert_eq!(relative_error(&i, &i).unwrap(), 0.0);
        assert!((relative_error(&i, &(-&i)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            relative_error(&DMatrix::<f64>::zeros(3, 3), &i.resize(3, 3, 0.0)),
            Err(Error::ZeroReference)
        ));
    }

    #[test]
    fn relative_error_of_orthonormal_pairs_is_a_fraction() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ensemble::random_orthonormal::<f64, _>(32, &mut rng);
            let b = ensemble::random_orthonormal::<f64, _>(32, &mut rng);
            let eps = relative_error(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&eps));
        }
    }

    #[test]
    fn single_precision_products_work() {
        let u = DVector::<f32>::from_vec(vec![0.6, 0.8, 0.0]);
        let p = ReflectorProduct::from_reflectors(3, vec![u]).unwrap();
        let y = p.apply(&DVector::from_vec(vec![0.6, 0.8, 0.0])).unwrap();
        assert!((y + DVector::from_vec(vec![0.6f32, 0.8, 0.0])).norm() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transpose_inverts_apply(seed in any::<u64>(), n in 1usize..24, h in 0usize..6) {
            let p = random_product(n, h, seed);
            let x = DVector::from_fn(n, |i, _| ((seed >> (i % 32)) & 7) as f64 - 3.5);
            let back = p.apply_transpose(&p.apply(&x).unwrap()).unwrap();
            prop_assert!((back - &x).norm() <= 1e-10 * x.norm().max(1.0));
            let dense = p.to_dense();
            prop_assert!(linalg::orthonormality_defect(&dense) <= 1e-10 * n as f64);
        }

        #[test]
        fn apply_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let p = random_product(12, 4, seed);
            let x = DVector::from_fn(12, |i, _| (i as f64 * 0.7).cos());
            let y = DVector::from_fn(12, |i, _| (i as f64 * 1.3).sin());
            let lhs = p.apply(&(&x * a + &y * b)).unwrap();
            let rhs = p.apply(&x).unwrap() * a + p.apply(&y).unwrap() * b;
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + a.abs() + b.abs()) * 4.0);
        }
    }
}
