//! Constructive baseline: a partial eigendecomposition carried out with
//! Householder reflectors.

use nalgebra::{DMatrix, DVector};

use super::shf::eigen_by_magnitude;
use crate::error::{Error, Result};
use crate::linalg::{self, reflect_congruence};
use crate::reflector::{ApproxReport, FactoredSymmetric, ReflectorProduct};
use crate::scalar::Real;

/// Reflector slots (algorithm order), spectrum and squared error.
pub(crate) type BaselineParts<T> = (Vec<Option<DVector<T>>>, DVector<T>, T);

pub(crate) fn partial_eig_baseline_parts<T: Real>(s: &DMatrix<T>, h: usize) -> Result<BaselineParts<T>> {
    let n = linalg::ensure_square(s)?;
    if h > n {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            range: format!("0..={n}"),
        });
    }
    let (values, vectors) = eigen_by_magnitude(s);

    // J_k maps the k-th eigenvector, as transformed by J_{k-1} ... J_1, to
    // -+e_k. Transformed eigenvectors are zero above index k.
    let mut slots: Vec<Option<DVector<T>>> = Vec::with_capacity(h);
    let mut reduced = s.clone();
    for k in 0..h {
        let mut w = vectors.column(k).into_owned();
        for j in slots.iter().flatten() {
            let c = T::lit(2.0) * j.dot(&w);
            w.axpy(-c, j, T::one());
        }
        for x in w.rows_mut(0, k).iter_mut() {
            *x = T::zero();
        }
        let tail = w.rows(k + 1, n - k - 1).norm();
        if tail <= T::tol(1e-14) {
            slots.push(None);
            continue;
        }
        let sigma = if w[k] >= T::zero() { -T::one() } else { T::one() };
        let mut j = w;
        j[k] -= sigma;
        let j = j.normalize();
        reflect_congruence(&mut reduced, &j);
        slots.push(Some(j));
    }

    let mut spectrum = reduced.diagonal();
    for k in 0..h {
        spectrum[k] = values[k];
    }
    let trailing = reduced.view((h, h), (n - h, n - h));
    let err = trailing.norm_squared() - trailing.diagonal().norm_squared();
    Ok((slots, spectrum, err.max(T::zero())))
}

/// `S ~ J_1 ... J_h diag(lambda_1..lambda_h, diag(S~)) J_h ... J_1`, where
/// the reflectors deflate the `h` eigenvalues of largest magnitude and `S~`
/// is the remaining trailing block. The error is the off-diagonal energy of
/// `S~`.
pub fn partial_eig_baseline<T: Real>(s: &DMatrix<T>, h: usize) -> Result<(FactoredSymmetric<T>, ApproxReport<T>)> {
    let (slots, spectrum, err) = partial_eig_baseline_parts(s, h)?;
    let n = s.nrows();
    let used = slots.iter().flatten().count();
    let vectors = slots.into_iter().rev().flatten().collect();
    let basis = ReflectorProduct::from_parts_unchecked(n, vectors, DVector::from_element(n, T::one()));
    let factor = FactoredSymmetric::new(basis, spectrum)?;
    let mut report = ApproxReport::measure(s, &factor.to_dense(), h, used)?;
    report.predicted_error = Some(err);
    Ok((factor, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{random_indefinite, random_wishart, seeded_rng};

    #[test]
    fn diagonal_example() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, -3.0, 1.0]));
        let (f, r) = partial_eig_baseline(&s, 1).unwrap();
        assert_eq!(f.basis().h(), 0);
        assert_eq!(f.spectrum().as_slice(), &[5.0, -3.0, 1.0]);
        assert_eq!(r.measured_error, 0.0);
    }

    #[test]
    fn full_budget_is_exact() {
        let mut rng = seeded_rng(1);
        for n in [1, 2, 5, 9] {
            let s = random_indefinite::<f64, _>(n, &mut rng);
            let (_, r) = partial_eig_baseline(&s, n).unwrap();
            assert!(r.measured_error <= 1e-8);
        }
        let s = random_indefinite::<f64, _>(3, &mut rng);
        assert!(partial_eig_baseline(&s, 4).is_err());
    }

    #[test]
    fn trailing_block_identity() {
        let mut rng = seeded_rng(2);
        let (n, h) = (64, 16);
        for _ in 0..3 {
            let s = random_indefinite::<f64, _>(n, &mut rng);
            let (f, r) = partial_eig_baseline(&s, h).unwrap();
            let (vals, _) = eigen_by_magnitude(&s);
            let tail: f64 = vals.iter().skip(h).map(|x| x * x).sum();
            // Independent route: the trailing diagonal is the spectrum tail of sbar.
            let diag_sq: f64 = f.spectrum().iter().skip(h).map(|x| x * x).sum();
            assert!((r.measured_error - (tail - diag_sq)).abs() < 1e-6);
            assert!((r.measured_error - r.predicted_error.unwrap()).abs() < 1e-8);
            assert!(r.measured_error <= tail + 1e-9);
        }
    }

    #[test]
    fn deflates_the_leading_block() {
        let mut rng = seeded_rng(3);
        let s = random_wishart::<f64, _>(10, &mut rng);
        let (f, _) = partial_eig_baseline(&s, 4).unwrap();
        let u = f.basis().to_dense();
        let reduced = u.transpose() * &s * &u;
        let (vals, _) = eigen_by_magnitude(&s);
        for k in 0..4 {
            assert!((reduced[(k, k)] - vals[k]).abs() < 1e-8);
            for j in 0..10 {
                if j != k {
                    assert!(reduced[(k, j)].abs() < 1e-8);
                }
            }
        }
    }
}
