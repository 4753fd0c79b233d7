//! Few-reflector approximations of orthonormal matrices.
//!
//! Two constructions are provided, both driven by the spectrum of
//! `Z = U + U^T` (eigenvalues in `[-2, 2]`):
//!
//! * [`constrained_approx`] uses mutually orthogonal reflector vectors, the
//!   eigenvectors of the most negative eigenvalues of `Z`. The result
//!   `I - 2 W W^T` is symmetric.
//! * [`unconstrained_approx`] works on the real Schur form of `U`. A real
//!   eigenvalue `-1` costs one reflector; a conjugate pair `alpha +- i beta`
//!   with `alpha < 0` is reproduced exactly by two reflectors in its
//!   invariant plane.
//!
//! [`partial_qr_approx`] is the constructive baseline: the first `h` steps of
//! a Householder QR factorization plus a sign diagonal.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_square};
use crate::reflector::{ApproxReport, ReflectorProduct};
use crate::scalar::Real;

/// Real eigenvalue (`+1` or `-1`) of an orthonormal matrix and its eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEigenpair<T: Real> {
    pub lambda: T,
    pub vector: DVector<T>,
}

/// Conjugate eigenvalue pair `alpha +- i beta` with `beta > 0`.
///
/// `t = re_t + i im_t` is the unit eigenvector of `alpha + i beta`;
/// `re_t` and `im_t` are orthogonal with squared norm `1/2` each.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPair<T: Real> {
    pub alpha: T,
    pub beta: T,
    pub re_t: DVector<T>,
    pub im_t: DVector<T>,
}

/// Eigen-structure of an orthonormal matrix used by the constructions.
#[derive(Debug, Clone)]
pub struct SpectralData<T: Real> {
    /// Eigenvalues of `Z = U + U^T`, ascending.
    pub z: DVector<T>,
    /// Eigenvectors of `Z`, columns matching `z`.
    pub v: DMatrix<T>,
    pub real_pairs: Vec<RealEigenpair<T>>,
    pub complex_pairs: Vec<ComplexPair<T>>,
    /// Number of strictly negative entries of `z`.
    pub n_minus: usize,
}

impl<T: Real> SpectralData<T> {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n_plus(&self) -> usize {
        self.n() - self.n_minus
    }

    /// `2 n_+ - sum_{k > n_-} z_k`, the best error of the unconstrained
    /// construction once every negative eigenvalue is consumed.
    pub fn unconstrained_error_bound(&self) -> T {
        let tail: T = self.z.iter().skip(self.n_minus).fold(T::zero(), |a, &b| a + b);
        T::lit(2.0 * self.n_plus() as f64) - tail
    }
}

/// Threshold below which an eigenvalue of `Z` counts as negative.
fn negative_threshold<T: Real>() -> T {
    T::tol(1e-10)
}

/// Below this imaginary part a pair at `alpha = -1` is a repeated real `-1`.
fn degenerate_beta<T: Real>() -> T {
    T::tol(1e-10)
}

/// Rejects inputs with `|U^T U - I|_F > 1e-8 n`.
pub fn check_orthonormal<T: Real>(u: &DMatrix<T>) -> Result<usize> {
    let n = ensure_square(u)?;
    let defect = linalg::orthonormality_defect(u);
    if defect > T::tol(1e-8) * T::lit(n.max(1) as f64) {
        return Err(Error::NotOrthonormal {
            deviation: defect.as_f64(),
        });
    }
    Ok(n)
}

fn z_spectrum<T: Real>(u: &DMatrix<T>) -> (DVector<T>, DMatrix<T>, usize) {
    let z = u + u.transpose();
    let (values, vectors) = linalg::sym_eigen_ascending(&z);
    let tau = negative_threshold::<T>();
    let n_minus = values.iter().filter(|&&x| x < -tau).count();
    (values, vectors, n_minus)
}

/// Eigen-structure of `U` and of `Z = U + U^T`.
///
/// The complex eigenvectors are read from the real Schur form: 1x1 blocks
/// give real eigenpairs and 2x2 blocks the invariant planes of conjugate
/// pairs. Schur vectors are orthonormal, so repeated eigenvalues come with an
/// orthogonal eigenbasis.
pub fn spectral_prep<T: Real>(u: &DMatrix<T>) -> Result<SpectralData<T>> {
    let n = check_orthonormal(u)?;
    let (z, v, n_minus) = z_spectrum(u);

    let schur = Schur::try_new(u.clone(), T::default_epsilon(), 0).ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();

    let mut real_pairs = Vec::new();
    let mut complex_pairs = Vec::new();
    let split = T::tol(1e-12);
    let half_sqrt = T::one() / T::lit(2.0).sqrt();
    let mut i = 0;
    while i < n {
        let block2 = i + 1 < n && t[(i + 1, i)].abs() > split;
        if !block2 {
            let lambda = if t[(i, i)] < T::zero() { -T::one() } else { T::one() };
            real_pairs.push(RealEigenpair {
                lambda,
                vector: q.column(i).into_owned(),
            });
            i += 1;
            continue;
        }

        let q1: DVector<T> = q.column(i).into_owned();
        let mut q2: DVector<T> = q.column(i + 1).into_owned();
        let uq1 = u * &q1;
        let uq2 = u * &q2;
        let m = [[q1.dot(&uq1), q1.dot(&uq2)], [q2.dot(&uq1), q2.dot(&uq2)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];

        if det < T::zero() {
            // A reflection inside the plane: eigenvalues -1 and +1.
            let plane = DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
            let (vals, vecs) = linalg::sym_eigen_ascending(&plane);
            for k in 0..2 {
                let w = &q1 * vecs[(0, k)] + &q2 * vecs[(1, k)];
                let lambda = if vals[k] < T::zero() { -T::one() } else { T::one() };
                real_pairs.push(RealEigenpair { lambda, vector: w });
            }
        } else {
            let alpha = (m[0][0] + m[1][1]) * T::lit(0.5);
            let mut beta = (m[1][0] - m[0][1]) * T::lit(0.5);
            if beta < T::zero() {
                q2.neg_mut();
                beta = -beta;
            }
            if beta < degenerate_beta::<T>() {
                let lambda = if alpha < T::zero() { -T::one() } else { T::one() };
                real_pairs.push(RealEigenpair { lambda, vector: q1 });
                real_pairs.push(RealEigenpair { lambda, vector: q2 });
            } else {
                // U (q1 - i q2) = (alpha + i beta)(q1 - i q2).
                complex_pairs.push(ComplexPair {
                    alpha,
                    beta,
                    re_t: q1 * half_sqrt,
                    im_t: -q2 * half_sqrt,
                });
            }
        }
        i += 2;
    }

    Ok(SpectralData {
        z,
        v,
        real_pairs,
        complex_pairs,
        n_minus,
    })
}

fn trace<T: Real>(m: &DMatrix<T>) -> T {
    m.diagonal().iter().fold(T::zero(), |a, &b| a + b)
}

/// Orthogonal reflector vectors: the eigenvectors of the `min(h, n_-)` most
/// negative eigenvalues of `Z`, giving the symmetric `I - 2 W W^T`.
pub fn constrained_approx<T: Real>(u: &DMatrix<T>, h: usize) -> Result<(ReflectorProduct<T>, ApproxReport<T>)> {
    let n = check_orthonormal(u)?;
    let (z, v, n_minus) = z_spectrum(u);
    let used = h.min(n_minus);
    let vectors: Vec<DVector<T>> = (0..used).map(|k| v.column(k).into_owned()).collect();
    let product = ReflectorProduct::from_parts_unchecked(n, vectors, DVector::from_element(n, T::one()));

    let mut report = ApproxReport::measure(u, &product.to_dense(), h, used)?;
    let consumed: T = z.iter().take(used).fold(T::zero(), |a, &b| a + b);
    let two = T::lit(2.0);
    report.predicted_error = Some(two * T::lit(n as f64) - two * trace(u) + two * consumed);
    Ok((product, report))
}

enum Item<'a, T: Real> {
    Real(&'a DVector<T>),
    Pair(&'a ComplexPair<T>),
}

/// Reflector that, placed after `u_a = sqrt(2) re(t)`, completes the
/// rotation of the pair's invariant plane. Both phase conventions are tried
/// and the one with the smaller in-plane residual is kept.
fn second_pair_reflector<T: Real>(u: &DMatrix<T>, pair: &ComplexPair<T>) -> DVector<T> {
    let two = T::lit(2.0);
    let gamma = -(T::one() + pair.alpha).max(T::zero()).sqrt() / two;
    let delta = -(T::one() - pair.alpha).max(T::zero()).sqrt() / two;

    let sqrt2 = two.sqrt();
    let q1 = &pair.re_t * sqrt2;
    let q2 = &pair.im_t * (-sqrt2);
    let uq1 = u * &q1;
    let uq2 = u * &q2;
    let m = nalgebra::Matrix2::new(q1.dot(&uq1), q1.dot(&uq2), q2.dot(&uq1), q2.dot(&uq2));
    let ra = nalgebra::Matrix2::new(-T::one(), T::zero(), T::zero(), T::one());

    let mut best: Option<(T, DVector<T>)> = None;
    for flip in [T::one(), -T::one()] {
        let ub = (&pair.re_t * gamma - &pair.im_t * (delta * flip)) * two;
        let b = nalgebra::Vector2::new(ub.dot(&q1), ub.dot(&q2));
        let rb = nalgebra::Matrix2::identity() - b * b.transpose() * two;
        let residual = (m - rb * ra).norm();
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, ub));
        }
    }
    best.expect("two candidates").1
}

/// Greedy reflector construction from the Schur structure of `U`.
///
/// Eigenvalues with negative real part are consumed in ascending order of
/// their `Z` eigenvalue until `h` reflectors are placed or none are left. The
/// report carries the closed-form prediction only when `h >= n_-`.
pub fn unconstrained_approx<T: Real>(u: &DMatrix<T>, h: usize) -> Result<(ReflectorProduct<T>, ApproxReport<T>)> {
    let spectral = spectral_prep(u)?;
    let n = spectral.n();
    let tau = negative_threshold::<T>();

    let mut items: Vec<(T, Item<'_, T>)> = Vec::new();
    for rp in &spectral.real_pairs {
        if rp.lambda < T::zero() {
            items.push((-T::lit(2.0), Item::Real(&rp.vector)));
        }
    }
    for cp in &spectral.complex_pairs {
        let z = cp.alpha * T::lit(2.0);
        if z < -tau {
            items.push((z, Item::Pair(cp)));
        }
    }
    // Stable: ties keep Schur order.
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let sqrt2 = T::lit(2.0).sqrt();
    let mut vectors: Vec<DVector<T>> = Vec::new();
    for (_, item) in &items {
        if vectors.len() >= h {
            break;
        }
        match item {
            Item::Real(v) => vectors.push((*v).clone()),
            Item::Pair(cp) => {
                vectors.push(&cp.re_t * sqrt2);
                if vectors.len() < h {
                    vectors.push(second_pair_reflector(u, cp));
                }
            }
        }
    }

    let used = vectors.len();
    let product = ReflectorProduct::from_parts_unchecked(n, vectors, DVector::from_element(n, T::one()));
    let mut report = ApproxReport::measure(u, &product.to_dense(), h, used)?;
    if h >= spectral.n_minus {
        report.predicted_error = Some(spectral.unconstrained_error_bound());
    }
    Ok((product, report))
}

/// Chooses between approximating `U` and `-U`.
///
/// Returns the sign whose full-budget unconstrained error
/// `2 n_+ - sum_{k > n_-} z_k` is smaller, and the matching signed matrix.
/// On a tie the branch needing fewer reflectors (smaller `n_-`) wins, then
/// `+1`.
pub fn sign_select<T: Real>(u: &DMatrix<T>) -> Result<(T, DMatrix<T>)> {
    let n = check_orthonormal(u)?;
    let score = |m: &DMatrix<T>| {
        let (z, _, n_minus) = z_spectrum(m);
        let tail = z.iter().skip(n_minus).fold(T::zero(), |a, &b| a + b);
        (T::lit(2.0 * (z.len() - n_minus) as f64) - tail, n_minus)
    };
    let neg = -u;
    let (e_pos, k_pos) = score(u);
    let (e_neg, k_neg) = score(&neg);
    let tie = T::tol(1e-10) * T::lit(n.max(1) as f64);
    let take_neg = if (e_pos - e_neg).abs() <= tie {
        k_neg < k_pos
    } else {
        e_neg < e_pos
    };
    if take_neg {
        Ok((-T::one(), neg))
    } else {
        Ok((T::one(), u.clone()))
    }
}

/// Replaces the sign diagonal of `p` with the one minimizing `|U - D R|_F`,
/// where `R` is the reflector part of `p`: `d_i = sign((R U^T)_ii)`.
pub fn fit_signs<T: Real>(u: &DMatrix<T>, p: &ReflectorProduct<T>) -> Result<ReflectorProduct<T>> {
    let n = ensure_square(u)?;
    if n != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: n });
    }
    let signs = DVector::from_fn(n, |i, _| {
        let mut row: DVector<T> = u.row(i).transpose();
        p.apply_reflectors_in_place(&mut row);
        if row[i] < T::zero() {
            -T::one()
        } else {
            T::one()
        }
    });
    Ok(ReflectorProduct::from_parts_unchecked(n, p.vectors().to_vec(), signs))
}

/// Unconstrained construction with the sign diagonal also optimized: the
/// better of `U` and `-U` is factored, then `D` is refit.
pub fn unconstrained_with_signs<T: Real>(u: &DMatrix<T>, h: usize) -> Result<(ReflectorProduct<T>, ApproxReport<T>)> {
    let (sign, su) = sign_select(u)?;
    let (mut product, _) = unconstrained_approx(&su, h)?;
    if sign < T::zero() {
        product = product.negated();
    }
    let product = fit_signs(u, &product)?;
    let report = ApproxReport::measure(u, &product.to_dense(), h, product.h())?;
    Ok((product, report))
}

/// `Ubar_2 D` with at most `h` reflectors: the better of the signed
/// spectral construction and the partial QR factorization.
///
/// The greedy spectral construction gains at most 4 per reflector, while a
/// partial QR step with a fitted sign diagonal can gain more when `h` is
/// small, so neither dominates.
pub fn signed_approx<T: Real>(u: &DMatrix<T>, h: usize) -> Result<(ReflectorProduct<T>, ApproxReport<T>)> {
    let n = check_orthonormal(u)?;
    let spectral = unconstrained_with_signs(u, h)?;
    if n == 0 || h > n - 1 {
        return Ok(spectral);
    }
    let qr = partial_qr_approx(u, h)?;
    if qr.1.measured_error < spectral.1.measured_error {
        let (p, mut r) = qr;
        r.predicted_error = None;
        Ok((p, r))
    } else {
        Ok(spectral)
    }
}

/// First `h` Householder QR steps on `U` plus the sign diagonal that makes
/// the reduced matrix's diagonal positive. Returns `J_1 ... J_h D` with the
/// error `2(n - h) - 2 tr(D_1 U~)` as the prediction.
pub fn partial_qr_approx<T: Real>(u: &DMatrix<T>, h: usize) -> Result<(ReflectorProduct<T>, ApproxReport<T>)> {
    let n = check_orthonormal(u)?;
    if n == 0 || h > n - 1 {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            range: format!("0..={}", n.saturating_sub(1)),
        });
    }

    let mut w = u.clone();
    let mut reflectors: Vec<DVector<T>> = Vec::new();
    let two = T::lit(2.0);
    for k in 0..h {
        let x = w.view((k, k), (n - k, 1)).column(0).into_owned();
        let norm = x.norm();
        let tail = x.rows(1, n - k - 1).norm();
        if tail <= T::tol(1e-14) * norm.max(T::one()) {
            continue;
        }
        let mut v = x;
        let sign = if v[0] < T::zero() { -T::one() } else { T::one() };
        v[0] += sign * norm;
        let v = v.normalize();
        let mut sub = w.view_mut((k, 0), (n - k, n));
        let proj = sub.tr_mul(&v);
        sub.ger(-two, &v, &proj, T::one());
        let mut full = DVector::zeros(n);
        full.rows_mut(k, n - k).copy_from(&v);
        reflectors.push(full);
    }

    let signs = DVector::from_fn(n, |i, _| if w[(i, i)] < T::zero() { -T::one() } else { T::one() });
    let trailing: T = (h..n).fold(T::zero(), |acc, i| acc + w[(i, i)].abs());

    // J_1 ... J_h D = D (D J_1 D) ... (D J_h D): J_h's folded vector acts first.
    let vectors: Vec<DVector<T>> = reflectors.iter().rev().map(|j| j.component_mul(&signs)).collect();
    let used = vectors.len();
    let product = ReflectorProduct::from_parts_unchecked(n, vectors, signs);

    let mut report = ApproxReport::measure(u, &product.to_dense(), h, used)?;
    report.predicted_error = Some(two * T::lit((n - h) as f64) - two * trailing);
    Ok((product, report))
}

/// Expected partial-QR error for a random orthonormal matrix:
/// `2(n - h) - (2 sqrt 2 / sqrt pi) sqrt(n - h)`.
pub fn expected_bound_ortho(n: usize, h: usize) -> Result<f64> {
    if h > n {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            range: format!("0..={n}"),
        });
    }
    let m = (n - h) as f64;
    Ok(2.0 * m - 2.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI.sqrt() * m.sqrt())
}
