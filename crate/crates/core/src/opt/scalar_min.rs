//! Scalar minimization on an interval: coarse grid to locate the basin,
//! golden-section refinement inside the best bracket.

use crate::scalar::Real;

/// Number of grid intervals used to bracket the minimum.
pub(crate) const GRID_INTERVALS: usize = 1000;

pub(crate) struct ScalarMin<T> {
    pub u: T,
    #[allow(dead_code)] // read by tests
    pub f: T,
    /// Golden-section iterations (grid evaluations excluded).
    pub iterations: u64,
}

/// Minimize `f` on `[lo, hi]`.
///
/// Ties within `tol` on the grid, and between the grid incumbent and the
/// refined point, are broken toward `tie_pref` (smaller value on an exact
/// distance tie, for determinism).
pub(crate) fn grid_golden_min<T: Real>(
    f: impl Fn(T) -> T,
    lo: T,
    hi: T,
    tol: T,
    max_iters: usize,
    tie_pref: T,
) -> ScalarMin<T> {
    let n = GRID_INTERVALS;
    let width = hi - lo;
    let step = width / T::of(n as f64);

    let grid_point = |i: usize| {
        if i == n {
            hi
        } else {
            lo + step * T::of(i as f64)
        }
    };

    let mut best_i = 0usize;
    let mut best_f = f(lo);
    let mut values = Vec::with_capacity(n + 1);
    values.push(best_f);
    for i in 1..=n {
        let fi = f(grid_point(i));
        values.push(fi);
        if fi < best_f {
            best_f = fi;
            best_i = i;
        }
    }

    // Among grid points tying the minimum, prefer the one closest to
    // tie_pref.
    let mut inc_i = best_i;
    let mut inc_dist = (grid_point(best_i) - tie_pref).abs();
    for (i, &fi) in values.iter().enumerate() {
        if fi <= best_f + tol {
            let d = (grid_point(i) - tie_pref).abs();
            if d < inc_dist || (d == inc_dist && grid_point(i) < grid_point(inc_i)) {
                inc_i = i;
                inc_dist = d;
            }
        }
    }
    let inc_u = grid_point(inc_i);
    let inc_f = values[inc_i];

    // Golden-section refinement on the bracket around the incumbent.
    let mut a = grid_point(inc_i.saturating_sub(1));
    let mut b = grid_point((inc_i + 1).min(n));
    let ratio = T::of(0.381_966_011_250_105_2); // 2 - golden ratio
    let mut x1 = a + ratio * (b - a);
    let mut x2 = b - ratio * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0u64;
    while (b - a) > tol && (iterations as usize) < max_iters {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - ratio * (b - a);
            f2 = f(x2);
        }
        iterations += 1;
    }
    let (gu, gf) = if f1 < f2 { (x1, f1) } else { (x2, f2) };

    // Keep the clearly better candidate; on a near-tie take the one
    // closer to tie_pref.
    let (u, fv) = if gf < inc_f - tol {
        (gu, gf)
    } else if inc_f < gf - tol {
        (inc_u, inc_f)
    } else {
        let dg = (gu - tie_pref).abs();
        let di = (inc_u - tie_pref).abs();
        if dg < di || (dg == di && gu <= inc_u) {
            (gu, gf)
        } else {
            (inc_u, inc_f)
        }
    };

    ScalarMin {
        u: u.clamp_to(lo, hi),
        f: fv,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let r = grid_golden_min(|u: f64| (u - 0.3).powi(2), 0.0, 1.0, 1e-10, 200, 0.5);
        assert!((r.u - 0.3).abs() < 1e-6);
        assert!(r.f < 1e-12);
    }

    #[test]
    fn finds_boundary_minimum() {
        let r = grid_golden_min(|u: f64| u, 0.0, 1.0, 1e-10, 200, 0.5);
        assert!(r.u < 1e-6);
        assert!(r.f < 1e-6);
    }

    #[test]
    fn kinked_absolute_value() {
        let r = grid_golden_min(|u: f64| (u - 0.7171).abs(), 0.0, 1.0, 1e-10, 200, 0.5);
        assert!((r.u - 0.7171).abs() < 1e-7);
    }

    #[test]
    fn flat_region_prefers_tie_point() {
        // Flat at zero on [0.4, 0.6]; tie-break should pull toward 0.5.
        let g = |u: f64| ((u - 0.5).abs() - 0.1).max(0.0);
        let r = grid_golden_min(g, 0.0, 1.0, 1e-9, 200, 0.5);
        assert!((r.u - 0.5).abs() < 1e-3, "u = {}", r.u);
    }
}
