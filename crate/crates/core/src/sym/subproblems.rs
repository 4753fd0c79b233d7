//! Single-reflector subproblem of the symmetric factorization.
//!
//! With every reflector but the k-th frozen, the error depends on `u_k`
//! only through
//!
//! `C(u) = u^T (AB + BA) u - 2 (u^T A u)(u^T B u)`,
//!
//! and replacing an identity slot by `I - 2uu^T` changes the squared error
//! by `4 C(u)`. Everything here minimizes `C` on the unit sphere.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orient_first_positive, sym_eigen_ascending};
use crate::linesearch::bracketed_minimize;
use crate::scalar::Real;

/// Grid resolution of the arc searches before golden-section refinement.
const ARC_GRID: usize = 32;

pub(crate) fn check_unit<T: Real>(u: &DVector<T>, index: usize) -> Result<()> {
    let norm = u.norm();
    if (norm - T::one()).abs() > T::tol(1e-9) {
        return Err(Error::NonUnitVector {
            index,
            norm: norm.as_f64(),
        });
    }
    Ok(())
}

fn check_pair<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, u: Option<&DVector<T>>) -> Result<()> {
    let n = crate::linalg::ensure_square(a)?;
    let nb = crate::linalg::ensure_square(b)?;
    if nb != n {
        return Err(Error::DimensionMismatch { expected: n, got: nb });
    }
    if let Some(u) = u {
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn cost_unchecked<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, u: &DVector<T>) -> T {
    let au = a * u;
    let bu = b * u;
    let two = T::lit(2.0);
    two * au.dot(&bu) - two * u.dot(&au) * u.dot(&bu)
}

/// `C(u)` for unit `u`.
pub fn cost_c<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, u: &DVector<T>) -> Result<T> {
    check_pair(a, b, Some(u))?;
    check_unit(u, 0)?;
    Ok(cost_unchecked(a, b, u))
}

/// Euclidean gradient of `C` at `u`:
/// `2(AB + BA)u - 4((u^T A u) B + (u^T B u) A) u`.
pub fn grad_c<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, u: &DVector<T>) -> DVector<T> {
    let au = a * u;
    let bu = b * u;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let qa = u.dot(&au);
    let qb = u.dot(&bu);
    (a * &bu + b * &au) * two - (&bu * qa + &au * qb) * four
}

/// Eigenvector of the smallest eigenvalue of `AB + BA`.
pub fn u_dagger<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
    check_pair(a, b, None)?;
    let m = a * b + b * a;
    let (_, vecs) = sym_eigen_ascending(&m);
    let mut u = vecs.column(0).into_owned();
    orient_first_positive(&mut u);
    Ok(u)
}

/// Maximizer of `(u^T A u)(u^T B u)` through the top eigenvector of `B (x) A`.
///
/// The top eigenvalue of the Kronecker product is the largest product of
/// extreme eigenvalues of `A` and `B`; its eigenvector `b (x) a` reshapes to
/// `V = a b^T`. The dominant eigenvectors of `V + V^T` are `a + b` and
/// `a - b`; the one with the larger objective is kept and then polished by
/// ascent on the objective, since the Kronecker bound is not always tight.
pub fn u_ddagger<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
    check_pair(a, b, None)?;
    let n = a.nrows();
    let (la, va) = sym_eigen_ascending(a);
    let (lb, vb) = sym_eigen_ascending(b);
    let (amin, amax, bmin, bmax) = (0, n - 1, 0, n - 1);

    let candidates = [(amax, bmax), (amax, bmin), (amin, bmax), (amin, bmin)];
    let mut win = candidates[0];
    let mut best = la[win.0] * lb[win.1];
    for &(i, j) in &candidates[1..] {
        let p = la[i] * lb[j];
        if p > best {
            best = p;
            win = (i, j);
        }
    }
    let ea = va.column(win.0).into_owned();
    let eb = vb.column(win.1).into_owned();

    let objective = |u: &DVector<T>| u.dot(&(a * u)) * u.dot(&(b * u));
    let floor = T::tol(1e-10);
    let mut pick: Option<(T, DVector<T>)> = None;
    for w in [&ea + &eb, &ea - &eb] {
        let norm = w.norm();
        if norm <= floor {
            continue;
        }
        let w = w / norm;
        let f = objective(&w);
        if pick.as_ref().is_none_or(|(g, _)| f > *g) {
            pick = Some((f, w));
        }
    }
    let u = pick.map(|p| p.1).unwrap_or(ea);
    let mut u = polish_product(a, b, u);
    orient_first_positive(&mut u);
    Ok(u)
}

/// Projected-gradient ascent on `(u^T A u)(u^T B u)` along sphere arcs;
/// only improving steps are taken.
fn polish_product<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, mut u: DVector<T>) -> DVector<T> {
    let tol = T::lit(1e-10);
    let mut f = u.dot(&(a * &u)) * u.dot(&(b * &u));
    for _ in 0..100 {
        let au = a * &u;
        let bu = b * &u;
        let grad = &au * u.dot(&bu) + &bu * u.dot(&au);
        let g = &grad - &u * u.dot(&grad);
        let gnorm = g.norm();
        if gnorm <= T::tol(1e-12) * grad.norm() {
            break;
        }
        let g = g / gnorm;
        let arc = Arc::new(a, b, &u, &g);
        let (gamma, _) = bracketed_minimize(|x| -arc.product(x, T::one()), T::zero(), T::lit(2.0).sqrt(), ARC_GRID, tol);
        if gamma == T::zero() {
            break;
        }
        let w = arc_point(&u, &g, gamma, T::one());
        let fw = w.dot(&(a * &w)) * w.dot(&(b * &w));
        if fw <= f {
            break;
        }
        let gain = fw - f;
        u = w;
        f = fw;
        if gain <= T::tol(1e-13) * f.abs() {
            break;
        }
    }
    u
}

/// Generalized Rayleigh-quotient initializer for PD `B`.
///
/// With `B = L L^T` and `y = L^T x`, the product objective becomes a
/// generalized Rayleigh quotient once the factor `y^T y` is held fixed. Its
/// maximizer is the top eigenvector `y` of `N = L^T A L^{-T}`, mapped back by
/// `x = L^{-T} y`. `N` is similar to `A`, so `y = L^T v` for the top
/// eigenvector `v` of `A`; the dropped factor means `B` only enters through
/// the positive-definiteness check.
pub fn rayleigh_init<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
    check_pair(a, b, None)?;
    let chol = Cholesky::new(b.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let (_, vecs) = sym_eigen_ascending(a);
    let v = vecs.column(a.nrows() - 1).into_owned();
    let y = l.tr_mul(&v);
    let x = l.tr_solve_lower_triangular(&y).ok_or(Error::NotPositiveDefinite)?;
    let mut x = x.normalize();
    orient_first_positive(&mut x);
    Ok(x)
}

/// `C` along `w(gamma) = c u + sigma s g` with orthonormal `u`, `g`,
/// `c = 1 - gamma^2/2`, `s = sqrt(gamma^2 - gamma^4/4)`, evaluated in O(1)
/// from dot products prepared once in O(n^2).
pub(crate) struct Arc<T: Real> {
    p_uu: T,
    p_ug: T,
    p_gg: T,
    a_uu: T,
    a_ug: T,
    a_gg: T,
    b_uu: T,
    b_ug: T,
    b_gg: T,
}

impl<T: Real> Arc<T> {
    pub(crate) fn new(a: &DMatrix<T>, b: &DMatrix<T>, u: &DVector<T>, g: &DVector<T>) -> Self {
        let au = a * u;
        let ag = a * g;
        let bu = b * u;
        let bg = b * g;
        Self {
            p_uu: au.dot(&bu),
            p_ug: au.dot(&bg) + ag.dot(&bu),
            p_gg: ag.dot(&bg),
            a_uu: u.dot(&au),
            a_ug: u.dot(&ag),
            a_gg: g.dot(&ag),
            b_uu: u.dot(&bu),
            b_ug: u.dot(&bg),
            b_gg: g.dot(&bg),
        }
    }

    pub(crate) fn coeffs(gamma: T) -> (T, T) {
        let g2 = gamma * gamma;
        let c = T::one() - g2 * T::lit(0.5);
        let s = (g2 - g2 * g2 * T::lit(0.25)).max(T::zero()).sqrt();
        (c, s)
    }

    pub(crate) fn eval(&self, gamma: T, sigma: T) -> T {
        let (x, s) = Self::coeffs(gamma);
        let y = sigma * s;
        let two = T::lit(2.0);
        let p = x * x * self.p_uu + x * y * self.p_ug + y * y * self.p_gg;
        let qa = x * x * self.a_uu + two * x * y * self.a_ug + y * y * self.a_gg;
        let qb = x * x * self.b_uu + two * x * y * self.b_ug + y * y * self.b_gg;
        two * p - two * qa * qb
    }

    /// `(w^T A w)(w^T B w)` on the arc.
    pub(crate) fn product(&self, gamma: T, sigma: T) -> T {
        let (x, s) = Self::coeffs(gamma);
        let y = sigma * s;
        let two = T::lit(2.0);
        let qa = x * x * self.a_uu + two * x * y * self.a_ug + y * y * self.a_gg;
        let qb = x * x * self.b_uu + two * x * y * self.b_ug + y * y * self.b_gg;
        qa * qb
    }

    /// Best `gamma` in `[0, sqrt 2]` for one branch; `gamma = 0` is kept
    /// unless something strictly better is found.
    pub(crate) fn minimize(&self, sigma: T, tol: T) -> (T, T) {
        bracketed_minimize(|g| self.eval(g, sigma), T::zero(), T::lit(2.0).sqrt(), ARC_GRID, tol)
    }
}

pub(crate) fn arc_point<T: Real>(u: &DVector<T>, g: &DVector<T>, gamma: T, sigma: T) -> DVector<T> {
    let (c, s) = Arc::<T>::coeffs(gamma);
    (u * c + g * (sigma * s)).normalize()
}

/// Sweeps the half circle through `u_dag` and the part of `u_ddag`
/// orthogonal to it, in both directions, for the smallest `C`.
pub fn combine_init<T: Real>(
    u_dag: &DVector<T>,
    u_ddag: &DVector<T>,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    line_tol: f64,
) -> Result<DVector<T>> {
    check_pair(a, b, Some(u_dag))?;
    check_pair(a, b, Some(u_ddag))?;
    check_unit(u_dag, 0)?;
    check_unit(u_ddag, 1)?;
    Ok(combine_unchecked(u_dag, u_ddag, a, b, line_tol).0)
}

pub(crate) fn combine_unchecked<T: Real>(
    u_dag: &DVector<T>,
    u_ddag: &DVector<T>,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    line_tol: f64,
) -> (DVector<T>, T) {
    let base = cost_unchecked(a, b, u_dag);
    let g = u_ddag - u_dag * u_dag.dot(u_ddag);
    let norm = g.norm();
    if norm <= T::tol(1e-10) {
        return (u_dag.clone(), base);
    }
    let g = g / norm;
    let arc = Arc::new(a, b, u_dag, &g);
    let tol = T::lit(line_tol);
    let mut best = (T::zero(), T::one(), base);
    for sigma in [T::one(), -T::one()] {
        let (gamma, val) = arc.minimize(sigma, tol);
        if val < best.2 {
            best = (gamma, sigma, val);
        }
    }
    if best.0 == T::zero() {
        return (u_dag.clone(), base);
    }
    let w = arc_point(u_dag, &g, best.0, best.1);
    let c = cost_unchecked(a, b, &w);
    if c <= base {
        (w, c)
    } else {
        (u_dag.clone(), base)
    }
}

/// Inner-loop controls for [`refine_reflector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub inner_max: usize,
    pub line_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            inner_max: 200,
            line_tol: 1e-6,
        }
    }
}

/// Projected-gradient descent on the sphere with a bounded arc search per
/// step. Stops when a step lowers `C` by less than
/// `line_tol * |A|_F |B|_F`, after `inner_max` steps, or at a stationary
/// point. Returns the final vector and its `C`.
pub fn refine_reflector<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    u_init: &DVector<T>,
    cfg: &RefineConfig,
) -> Result<DVector<T>> {
    check_pair(a, b, Some(u_init))?;
    check_unit(u_init, 0)?;
    Ok(refine_unchecked(a, b, u_init, cfg, |_| {}).0)
}

pub(crate) fn refine_unchecked<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    u_init: &DVector<T>,
    cfg: &RefineConfig,
    mut on_step: impl FnMut(T),
) -> (DVector<T>, T) {
    let mut u = u_init.clone();
    let mut cu = cost_unchecked(a, b, &u);
    on_step(cu);
    let scale = (a.norm() * b.norm()).max(T::default_epsilon());
    let stop = T::lit(cfg.line_tol) * scale;
    let tol = T::lit(cfg.line_tol);
    for _ in 0..cfg.inner_max {
        let grad = grad_c(a, b, &u);
        let g = &grad - &u * u.dot(&grad);
        let gnorm = g.norm();
        if gnorm < T::lit(1e-12) {
            break;
        }
        let g = g / gnorm;
        let arc = Arc::new(a, b, &u, &g);
        let (gamma, _) = arc.minimize(-T::one(), tol);
        if gamma == T::zero() {
            break;
        }
        let w = arc_point(&u, &g, gamma, -T::one());
        let cw = cost_unchecked(a, b, &w);
        if cw >= cu {
            break;
        }
        let drop = cu - cw;
        u = w;
        cu = cw;
        on_step(cu);
        if drop < stop {
            break;
        }
    }
    (u, cu)
}
