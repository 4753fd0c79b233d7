//! Symmetric Householder factorization: `S ~ Ubar diag(sbar) Ubar^T` with
//! `Ubar = D U_1 ... U_h`, fitted by block-coordinate descent over the
//! reflectors, the sign diagonal `D` and optionally the spectrum `sbar`.

use nalgebra::{DMatrix, DVector};

use super::baseline::partial_eig_baseline_parts;
use super::subproblems::{combine_unchecked, cost_unchecked, rayleigh_init, refine_unchecked, u_ddagger, u_dagger, RefineConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, reflect_congruence, sign_congruence};
use crate::reflector::{ApproxReport, FactoredSymmetric, ReflectorProduct};
use crate::scalar::Real;

/// How the reflectors are seeded before the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Identity slots filled one at a time from the subproblem initializers,
    /// with the spectrum of `S` (descending magnitude).
    #[default]
    Greedy,
    /// Reflectors, spectrum and signs of [`partial_eig_baseline`].
    Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShfConfig {
    pub h: usize,
    pub max_outer: usize,
    /// Stop when the normalized error drops by less than this in one outer
    /// iteration.
    pub outer_tol: f64,
    pub inner_max: usize,
    pub line_tol: f64,
    pub init_mode: InitMode,
    pub spectrum_update: bool,
    /// With `spectrum_update`, update the spectrum once after the loop
    /// instead of every outer iteration.
    pub spectrum_update_final_only: bool,
}

impl ShfConfig {
    pub fn new(h: usize) -> Self {
        Self {
            h,
            max_outer: 100,
            outer_tol: 1e-8,
            inner_max: 200,
            line_tol: 1e-6,
            init_mode: InitMode::Greedy,
            spectrum_update: false,
            spectrum_update_final_only: false,
        }
    }

    pub fn with_spectrum_update(mut self, on: bool) -> Self {
        self.spectrum_update = on;
        self
    }

    pub fn with_init(mut self, mode: InitMode) -> Self {
        self.init_mode = mode;
        self
    }

    pub fn with_max_outer(mut self, k: usize) -> Self {
        self.max_outer = k;
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.outer_tol) || !positive(self.line_tol) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn refine(&self) -> RefineConfig {
        RefineConfig {
            inner_max: self.inner_max,
            line_tol: self.line_tol,
        }
    }
}

/// Iterate of the factorization. `slots[k]` is `u_{k+1}` in algorithm
/// order; `None` is an identity slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShfState<T: Real> {
    pub slots: Vec<Option<DVector<T>>>,
    pub signs: DVector<T>,
    pub spectrum: DVector<T>,
    /// Normalized error after initialization and after each outer iteration.
    pub trace: Vec<T>,
}

impl<T: Real> ShfState<T> {
    /// State with `h` identity slots and `D = I`.
    pub fn identity(h: usize, spectrum: DVector<T>) -> Self {
        let n = spectrum.len();
        Self {
            slots: vec![None; h],
            signs: DVector::from_element(n, T::one()),
            spectrum,
            trace: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.spectrum.len()
    }

    pub fn h(&self) -> usize {
        self.slots.len()
    }

    /// `Ubar = D U_1 ... U_h` as a product (`u_h` acts first).
    pub fn basis(&self) -> ReflectorProduct<T> {
        let vectors = self.slots.iter().rev().flatten().cloned().collect();
        ReflectorProduct::from_parts_unchecked(self.n(), vectors, self.signs.clone())
    }

    pub fn factor(&self) -> FactoredSymmetric<T> {
        FactoredSymmetric::new(self.basis(), self.spectrum.clone()).expect("state shapes are consistent")
    }

    /// `U_1 ... U_h diag(sbar) U_h ... U_1` (no signs).
    pub fn sandwiched_spectrum(&self) -> DMatrix<T> {
        self.b_from(0)
    }

    /// `B_k` for 0-based slot index `k`: slots after `k` sandwich `diag(sbar)`.
    fn b_from(&self, k: usize) -> DMatrix<T> {
        let mut b = DMatrix::from_diagonal(&self.spectrum);
        for u in self.slots[k..].iter().rev().flatten() {
            reflect_congruence(&mut b, u);
        }
        b
    }
}

fn check_symmetric<T: Real>(s: &DMatrix<T>) -> Result<usize> {
    let n = linalg::ensure_square(s)?;
    let defect = linalg::symmetry_defect(s);
    if defect > T::tol(1e-8) * s.norm() {
        return Err(Error::NotSymmetric {
            deviation: defect.as_f64(),
        });
    }
    Ok(n)
}

/// `A_k = U_{k-1} ... U_1 D S D U_1 ... U_{k-1}` and
/// `B_k = U_{k+1} ... U_h diag(sbar) U_h ... U_{k+1}` for `1 <= k <= h`.
pub fn build_ab<T: Real>(s: &DMatrix<T>, state: &ShfState<T>, k: usize) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let n = linalg::ensure_square(s)?;
    if n != state.n() {
        return Err(Error::DimensionMismatch { expected: state.n(), got: n });
    }
    if k == 0 || k > state.h() {
        return Err(Error::OutOfRange {
            name: "k",
            value: k,
            range: format!("1..={}", state.h()),
        });
    }
    let mut a = s.clone();
    sign_congruence(&mut a, &state.signs);
    for u in state.slots[..k - 1].iter().flatten() {
        reflect_congruence(&mut a, u);
    }
    Ok((a, state.b_from(k)))
}

/// The sign rule read literally: with diagonals removed, `d_i = +1` when
/// `|s_i - b_i| >= |s_i + b_i|`, else `-1`.
pub fn diagonal_rule_literal<T: Real>(s: &DMatrix<T>, b0: &DMatrix<T>) -> DVector<T> {
    let n = s.nrows();
    DVector::from_fn(n, |i, _| {
        let (mut minus, mut plus) = (T::zero(), T::zero());
        for j in (0..n).filter(|&j| j != i) {
            let (x, y) = (s[(i, j)], b0[(i, j)]);
            minus += (x - y) * (x - y);
            plus += (x + y) * (x + y);
        }
        if minus >= plus {
            T::one()
        } else {
            -T::one()
        }
    })
}

/// `|S - D B0 D|_F^2` for a sign vector `d`.
pub fn sign_objective<T: Real>(s: &DMatrix<T>, b0: &DMatrix<T>, d: &DVector<T>) -> T {
    let mut m = b0.clone();
    sign_congruence(&mut m, d);
    (s - m).norm_squared()
}

/// Largest problem size for which all sign patterns are enumerated.
const EXHAUSTIVE_SIGNS: usize = 12;

/// Sign diagonal minimizing `|S - D B0 D|_F`.
///
/// Starts from the incumbent (all `+1` if none) and the literal rule, then
/// improves by exhaustive enumeration (`n <= 12`) or single-flip local
/// search. A pattern replaces the incumbent only on strict improvement, so
/// the result is never worse than the incumbent.
pub fn update_diagonal<T: Real>(s: &DMatrix<T>, b0: &DMatrix<T>, incumbent: Option<&DVector<T>>) -> Result<DVector<T>> {
    let n = linalg::ensure_square(s)?;
    if b0.shape() != s.shape() {
        return Err(Error::DimensionMismatch { expected: n, got: b0.nrows() });
    }
    if let Some(d) = incumbent {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d.len() });
        }
        if let Some(index) = d.iter().position(|&x| x != T::one() && x != -T::one()) {
            return Err(Error::InvalidSign { index });
        }
    }

    // |S - D B0 D|^2 = const - 2 d^T W d with W_ij = S_ij B0_ij off the diagonal.
    let mut w = s.component_mul(b0);
    w.fill_diagonal(T::zero());
    let scale = w.iter().fold(T::zero(), |acc, x| acc + x.abs());
    let eps = T::tol(1e-12) * scale;
    let quad = |d: &DVector<T>| d.dot(&(&w * d));

    let mut best = incumbent.cloned().unwrap_or_else(|| DVector::from_element(n, T::one()));
    let mut best_q = quad(&best);
    let literal = diagonal_rule_literal(s, b0);
    let lq = quad(&literal);
    if lq > best_q + eps {
        best = literal;
        best_q = lq;
    }

    if n == 0 {
        return Ok(best);
    }
    let (cand, cq) = if n <= EXHAUSTIVE_SIGNS {
        exhaustive_signs(&w)
    } else {
        local_search_signs(&w, best.clone())
    };
    if cq > best_q + eps {
        best = cand;
    }
    Ok(best)
}

/// Maximizes `d^T W d` over all patterns with `d_0 = +1` by a Gray-code walk.
fn exhaustive_signs<T: Real>(w: &DMatrix<T>) -> (DVector<T>, T) {
    let n = w.nrows();
    let mut d = DVector::from_element(n, T::one());
    let mut field = w * &d;
    let mut q = d.dot(&field);
    let mut best = (d.clone(), q);
    let two = T::lit(2.0);
    for step in 1u64..(1u64 << (n - 1)) {
        // Flip the bit that changes between consecutive Gray codes, skipping index 0.
        let i = step.trailing_zeros() as usize + 1;
        let di = d[i];
        q -= T::lit(4.0) * di * field[i];
        d[i] = -di;
        for j in 0..n {
            field[j] -= two * di * w[(j, i)];
        }
        if q > best.1 {
            best = (d.clone(), q);
        }
    }
    best
}

fn local_search_signs<T: Real>(w: &DMatrix<T>, mut d: DVector<T>) -> (DVector<T>, T) {
    let n = w.nrows();
    let mut field = w * &d;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    for _ in 0..(16 * n) {
        let (mut pick, mut gain) = (None, T::zero());
        for i in 0..n {
            let g = -four * d[i] * field[i];
            if g > gain {
                gain = g;
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        let di = d[i];
        d[i] = -di;
        for j in 0..n {
            field[j] -= two * di * w[(j, i)];
        }
    }
    let q = d.dot(&field);
    (d, q)
}

/// `sbar = diag(Ubar^T S Ubar)`, the best spectrum for a fixed basis.
pub fn update_spectrum<T: Real>(s: &DMatrix<T>, basis: &ReflectorProduct<T>) -> Result<DVector<T>> {
    let n = linalg::ensure_square(s)?;
    if n != basis.n() {
        return Err(Error::DimensionMismatch { expected: basis.n(), got: n });
    }
    let mut m = s.clone();
    sign_congruence(&mut m, basis.signs());
    for u in basis.vectors().iter().rev() {
        reflect_congruence(&mut m, u);
    }
    Ok(m.diagonal())
}

/// Eigenvalues and eigenvectors sorted by descending magnitude.
pub(crate) fn eigen_by_magnitude<T: Real>(s: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let (vals, vecs) = linalg::sym_eigen_ascending(s);
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].abs().partial_cmp(&vals[a].abs()).unwrap_or(std::cmp::Ordering::Equal));
    let values = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &vecs.column(src));
    }
    (values, vectors)
}

/// Best starting vector for a slot and its cost: `u_dagger` combined with
/// every available `u_ddagger` candidate.
fn seed_slot<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, line_tol: f64) -> Result<(DVector<T>, T)> {
    let ud = u_dagger(a, b)?;
    let mut best = (ud.clone(), cost_unchecked(a, b, &ud));
    let mut partners = vec![u_ddagger(a, b)?];
    if let Ok(r) = rayleigh_init(a, b) {
        if nalgebra::Cholesky::new(a.clone()).is_some() {
            partners.push(r);
        }
    }
    for p in &partners {
        let (w, c) = combine_unchecked(&ud, p, a, b, line_tol);
        if c < best.1 {
            best = (w, c);
        }
    }
    Ok(best)
}

struct Problem<'a, T: Real> {
    s: &'a DMatrix<T>,
    norm: T,
    cfg: &'a ShfConfig,
}

impl<T: Real> Problem<'_, T> {
    fn normalized(&self, err: T) -> T {
        err / self.norm
    }

    /// Refines the slot against its `A_k`, `B_k`; an identity slot is seeded
    /// first. A slot is kept only while its cost is negative.
    fn update_slot(&self, slot: &mut Option<DVector<T>>, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<()> {
        let rc = self.cfg.refine();
        let start = match slot.take() {
            Some(u) => Some(u),
            None => {
                let (u, c) = seed_slot(a, b, self.cfg.line_tol)?;
                (c < T::zero()).then_some(u)
            }
        };
        if let Some(u) = start {
            let c0 = cost_unchecked(a, b, &u);
            let (w, c) = refine_unchecked(a, b, &u, &rc, |_| {});
            let (w, c) = if c <= c0 { (w, c) } else { (u, c0) };
            if c < T::zero() {
                *slot = Some(w);
            }
        }
        Ok(())
    }

    /// One pass over the reflectors; returns `Ubar^T S Ubar`.
    fn sweep(&self, state: &mut ShfState<T>) -> Result<DMatrix<T>> {
        let h = state.h();
        let mut bs: Vec<DMatrix<T>> = Vec::with_capacity(h);
        let mut b = DMatrix::from_diagonal(&state.spectrum);
        for k in (0..h).rev() {
            bs.push(b.clone());
            if let Some(u) = &state.slots[k] {
                reflect_congruence(&mut b, u);
            }
        }
        bs.reverse();

        let mut a = self.s.clone();
        sign_congruence(&mut a, &state.signs);
        for (k, bk) in bs.iter().enumerate() {
            self.update_slot(&mut state.slots[k], &a, bk)?;
            if let Some(u) = &state.slots[k] {
                reflect_congruence(&mut a, u);
            }
        }
        Ok(a)
    }

    fn signs_step(&self, state: &mut ShfState<T>) -> Result<T> {
        let b0 = state.sandwiched_spectrum();
        state.signs = update_diagonal(self.s, &b0, Some(&state.signs))?;
        Ok(sign_objective(self.s, &b0, &state.signs))
    }

    fn spectrum_step(&self, state: &mut ShfState<T>) -> Result<()> {
        state.spectrum = update_spectrum(self.s, &state.basis())?;
        Ok(())
    }

    fn init(&self) -> Result<ShfState<T>> {
        let n = self.s.nrows();
        match self.cfg.init_mode {
            InitMode::Baseline => {
                let (state, _) = baseline_state(self.s, self.cfg.h)?;
                Ok(state)
            }
            InitMode::Greedy => {
                let (values, _) = eigen_by_magnitude(self.s);
                let mut state = ShfState::identity(self.cfg.h, values);
                debug_assert_eq!(state.n(), n);
                // B_k = diag(sbar) while the later slots are still identities.
                let b = DMatrix::from_diagonal(&state.spectrum);
                let mut a = self.s.clone();
                for k in 0..self.cfg.h {
                    let (u, c) = seed_slot(&a, &b, self.cfg.line_tol)?;
                    if c < T::zero() {
                        reflect_congruence(&mut a, &u);
                        state.slots[k] = Some(u);
                    }
                }
                Ok(state)
            }
        }
    }
}

pub(crate) fn baseline_state<T: Real>(s: &DMatrix<T>, h: usize) -> Result<(ShfState<T>, T)> {
    let (slots, spectrum, err) = partial_eig_baseline_parts(s, h)?;
    let n = s.nrows();
    Ok((
        ShfState {
            slots,
            signs: DVector::from_element(n, T::one()),
            spectrum,
            trace: Vec::new(),
        },
        err,
    ))
}

/// Runs the factorization and returns the final state.
pub fn shf_state<T: Real>(s: &DMatrix<T>, cfg: &ShfConfig) -> Result<ShfState<T>> {
    let n = check_symmetric(s)?;
    cfg.validate()?;
    if cfg.h > n {
        return Err(Error::OutOfRange {
            name: "h",
            value: cfg.h,
            range: format!("0..={n}"),
        });
    }
    let norm = T::lit(4.0) * s.norm_squared();
    if norm == T::zero() {
        return Err(Error::ZeroReference);
    }
    let problem = Problem { s, norm, cfg };

    let mut state = problem.init()?;
    let err = problem.signs_step(&mut state)?;
    state.trace.push(problem.normalized(err));

    let per_iteration_spectrum = cfg.spectrum_update && !cfg.spectrum_update_final_only;
    let outer_tol = T::lit(cfg.outer_tol);
    for _ in 0..cfg.max_outer {
        problem.sweep(&mut state)?;
        if per_iteration_spectrum {
            problem.spectrum_step(&mut state)?;
        }
        let err = problem.normalized(problem.signs_step(&mut state)?);
        let prev = *state.trace.last().expect("trace starts non-empty");
        state.trace.push(err);
        if prev - err < outer_tol {
            break;
        }
    }
    if cfg.spectrum_update && cfg.spectrum_update_final_only {
        problem.spectrum_step(&mut state)?;
        let err = problem.normalized(problem.signs_step(&mut state)?);
        state.trace.push(err);
    }
    Ok(state)
}

/// Fits `S ~ Ubar diag(sbar) Ubar^T` with at most `cfg.h` reflectors.
pub fn shf<T: Real>(s: &DMatrix<T>, cfg: &ShfConfig) -> Result<(FactoredSymmetric<T>, ApproxReport<T>)> {
    let state = shf_state(s, cfg)?;
    let factor = state.factor();
    let mut report = ApproxReport::measure(s, &factor.to_dense(), cfg.h, factor.basis().h())?;
    report.trace = state.trace;
    Ok((factor, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::partial_eig_baseline;
    use crate::ensemble::{random_indefinite, random_unit_vector, random_wishart, seeded_rng};

    fn random_state(n: usize, h: usize, seed: u64) -> ShfState<f64> {
        let mut rng = seeded_rng(seed);
        let slots = (0..h)
            .map(|k| (k % 3 != 1).then(|| random_unit_vector::<f64, _>(n, &mut rng)))
            .collect();
        let signs = DVector::from_fn(n, |i, _| if i % 3 == 0 { -1.0 } else { 1.0 });
        let spectrum = crate::ensemble::gaussian_vector::<f64, _>(n, &mut rng);
        ShfState {
            slots,
            signs,
            spectrum,
            trace: Vec::new(),
        }
    }

    fn reflector(u: &Option<DVector<f64>>, n: usize) -> DMatrix<f64> {
        match u {
            Some(u) => DMatrix::identity(n, n) - u * u.transpose() * 2.0,
            None => DMatrix::identity(n, n),
        }
    }

    #[test]
    fn build_ab_identity_slots() {
        let mut rng = seeded_rng(1);
        let s = random_indefinite::<f64, _>(5, &mut rng);
        let st = ShfState::identity(3, DVector::from_vec(vec![3.0, 2.0, 1.0, 0.5, 0.1]));
        for k in 1..=3 {
            let (a, b) = build_ab(&s, &st, k).unwrap();
            assert_eq!(a, s);
            assert_eq!(b, DMatrix::from_diagonal(&st.spectrum));
        }
        assert!(build_ab(&s, &st, 0).is_err());
        assert!(build_ab(&s, &st, 4).is_err());
    }

    #[test]
    fn build_ab_matches_dense_products() {
        let (n, h) = (8, 3);
        let st = random_state(n, h, 2);
        let mut rng = seeded_rng(3);
        let s = random_indefinite::<f64, _>(n, &mut rng);
        let d = DMatrix::from_diagonal(&st.signs);
        for k in 1..=h {
            let (a, b) = build_ab(&s, &st, k).unwrap();
            let mut left = DMatrix::<f64>::identity(n, n);
            for j in (0..k - 1).rev() {
                left *= reflector(&st.slots[j], n);
            }
            let a_ref = &left * &d * &s * &d * left.transpose();
            let mut right = DMatrix::<f64>::identity(n, n);
            for j in k..h {
                right *= reflector(&st.slots[j], n);
            }
            let b_ref = &right * DMatrix::from_diagonal(&st.spectrum) * right.transpose();
            assert!((a - &a_ref).norm() < 1e-10);
            assert!((&b - &b_ref).norm() < 1e-10);
            if k == h {
                assert!((b - DMatrix::from_diagonal(&st.spectrum)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn build_ab_preserves_spectra() {
        let st = random_state(10, 5, 4);
        let mut rng = seeded_rng(5);
        let s = random_wishart::<f64, _>(10, &mut rng);
        let (sv, _) = linalg::sym_eigen_ascending(&s);
        let mut sb = st.spectrum.as_slice().to_vec();
        sb.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 1..=5 {
            let (a, b) = build_ab(&s, &st, k).unwrap();
            let (av, _) = linalg::sym_eigen_ascending(&a);
            let (bv, _) = linalg::sym_eigen_ascending(&b);
            assert!((av - &sv).amax() < 1e-7 * sv.amax());
            assert!(bv.iter().zip(&sb).all(|(x, y)| (x - y).abs() < 1e-7));
        }
    }

    #[test]
    fn error_identity_via_any_slot() {
        // |S - Ubar diag(sbar) Ubar^T|^2 = |A_k - U_k B_k U_k|^2 for every k.
        let (n, h) = (7, 4);
        let st = random_state(n, h, 6);
        let mut rng = seeded_rng(7);
        let s = random_indefinite::<f64, _>(n, &mut rng);
        let direct = (&s - st.factor().to_dense()).norm_squared();
        for k in 1..=h {
            let (a, b) = build_ab(&s, &st, k).unwrap();
            let r = reflector(&st.slots[k - 1], n);
            assert!(((a - &r * b * &r).norm_squared() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn literal_rule_examples() {
        let mut rng = seeded_rng(8);
        let s = random_indefinite::<f64, _>(6, &mut rng);
        assert!(diagonal_rule_literal(&s, &s).iter().all(|&d| d == -1.0));
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 3.0]));
        let b0 = random_indefinite::<f64, _>(3, &mut rng);
        assert!(diagonal_rule_literal(&diag, &b0).iter().all(|&d| d == 1.0));
        assert!(update_diagonal(&diag, &b0, None).unwrap().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn update_diagonal_is_exhaustively_optimal() {
        for seed in 0..30 {
            let n = 3 + (seed as usize % 6);
            let mut rng = seeded_rng(100 + seed);
            let s = random_indefinite::<f64, _>(n, &mut rng);
            let b0 = random_indefinite::<f64, _>(n, &mut rng);
            let d = update_diagonal(&s, &b0, None).unwrap();
            let got = sign_objective(&s, &b0, &d);
            for mask in 0u32..(1 << n) {
                let p = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
                assert!(got <= sign_objective(&s, &b0, &p) + 1e-9);
            }
        }
    }

    #[test]
    fn local_search_never_worse_than_incumbent() {
        let mut rng = seeded_rng(9);
        let s = random_indefinite::<f64, _>(20, &mut rng);
        let b0 = random_indefinite::<f64, _>(20, &mut rng);
        let inc = DVector::from_fn(20, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let d = update_diagonal(&s, &b0, Some(&inc)).unwrap();
        assert!(sign_objective(&s, &b0, &d) <= sign_objective(&s, &b0, &inc) + 1e-12);
        assert!(sign_objective(&s, &b0, &d) <= sign_objective(&s, &b0, &diagonal_rule_literal(&s, &b0)) + 1e-12);
    }

    #[test]
    fn update_spectrum_examples() {
        let mut rng = seeded_rng(10);
        let s = random_indefinite::<f64, _>(8, &mut rng);
        let id = ReflectorProduct::identity(8);
        assert_eq!(update_spectrum(&s, &id).unwrap(), s.diagonal());

        let st = random_state(8, 4, 11);
        let before = (&s - st.factor().to_dense()).norm_squared();
        let spec = update_spectrum(&s, &st.basis()).unwrap();
        let after = (&s - FactoredSymmetric::new(st.basis(), spec).unwrap().to_dense()).norm_squared();
        assert!(after <= before + 1e-12);
    }

    #[test]
    fn update_spectrum_recovers_eigenvalues() {
        let mut rng = seeded_rng(12);
        let s = random_indefinite::<f64, _>(6, &mut rng);
        let (basis, _) = partial_eig_baseline(&s, 6).unwrap();
        let spec = update_spectrum(&s, basis.basis()).unwrap();
        let (vals, _) = eigen_by_magnitude(&s);
        assert!((spec - vals).amax() < 1e-9);
    }

    #[test]
    fn diagonal_input_is_exact_at_init() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, -4.0, 3.0, 2.0, -1.0]));
        for h in 0..=5 {
            let (f, r) = shf(&s, &ShfConfig::new(h)).unwrap();
            assert!(r.trace[0] < 1e-30);
            assert_eq!(f.basis().h(), 0);
            assert!(f.basis().signs().iter().all(|&d| d == 1.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(shf(&m, &ShfConfig::new(1)), Err(Error::NotSymmetric { .. })));
        let s = DMatrix::<f64>::identity(3, 3);
        assert!(shf(&s, &ShfConfig::new(4)).is_err());
        let mut cfg = ShfConfig::new(1);
        cfg.line_tol = 0.0;
        assert!(shf(&s, &cfg).is_err());
    }

    #[test]
    fn trace_monotone_and_matches_measurement() {
        for seed in 0..6 {
            let mut rng = seeded_rng(200 + seed);
            let n = 12;
            let s = if seed % 2 == 0 {
                random_indefinite::<f64, _>(n, &mut rng)
            } else {
                random_wishart::<f64, _>(n, &mut rng)
            };
            for su in [false, true] {
                let cfg = ShfConfig::new(4).with_spectrum_update(su).with_max_outer(30);
                let (_, r) = shf(&s, &cfg).unwrap();
                assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{:?}", r.trace);
                assert!((r.trace.last().unwrap() - r.normalized_error).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spectrum_preserved_without_update() {
        let mut rng = seeded_rng(13);
        let s = random_indefinite::<f64, _>(10, &mut rng);
        let (f, _) = shf(&s, &ShfConfig::new(3).with_max_outer(10)).unwrap();
        let (a, _) = linalg::sym_eigen_ascending(&s);
        let (b, _) = linalg::sym_eigen_ascending(&f.to_dense());
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn full_budget_baseline_start_is_exact() {
        let mut rng = seeded_rng(14);
        let s = random_indefinite::<f64, _>(8, &mut rng);
        let cfg = ShfConfig::new(8).with_init(InitMode::Baseline).with_max_outer(2);
        let (_, r) = shf(&s, &cfg).unwrap();
        assert!(r.normalized_error < 1e-12);
    }
}
