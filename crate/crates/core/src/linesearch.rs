//! Bounded scalar minimization.

use crate::scalar::Real;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns the best abscissa seen and its value. `f` is assumed unimodal on
/// the bracket; otherwise a local minimum is returned.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        iters += 1;
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid scan followed by golden-section refinement around the best grid
/// point. Handles multimodal functions as long as the grid resolves the
/// basins. The value at `lo` is always among the candidates.
pub fn bracketed_minimize<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, intervals: usize, tol: T) -> (T, T) {
    let intervals = intervals.max(2);
    let step = (hi - lo) / T::lit(intervals as f64);
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..=intervals {
        let x = lo + step * T::lit(i as f64);
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
            best_i = i;
        }
    }
    let a = lo + step * T::lit(best_i.saturating_sub(1) as f64);
    let b = lo + step * T::lit((best_i + 1).min(intervals) as f64);
    let refined = golden_section(&mut f, a, b, tol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_section(|x: f64| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_minimum() {
        let (x, _) = golden_section(|x: f64| x, 0.0, 2.0, 1e-9);
        assert!(x < 1e-8);
    }

    #[test]
    fn grid_escapes_local_minimum() {
        // Local minimum near 0.2, global near 1.3.
        let f = |x: f64| (3.0 * x).cos() * (1.0 + x) ;
        let (x, fx) = bracketed_minimize(f, 0.0, 2.0, 32, 1e-10);
        let dense = (0..20001).map(|i| f(i as f64 * 1e-4)).fold(f64::INFINITY, f64::min);
        assert!(fx <= dense + 1e-9, "{x} {fx} {dense}");
    }

    #[test]
    fn incumbent_kept_when_nothing_better() {
        let (x, fx) = bracketed_minimize(|x: f64| x * x, 0.0, 1.0, 8, 1e-8);
        assert_eq!((x, fx), (0.0, 0.0));
    }
}
