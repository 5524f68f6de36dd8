//! Bounded Nelder-Mead direct search with adaptive coefficients and
//! restart chains.
//!
//! Every candidate vertex is projected onto the box before evaluation, so
//! the incumbent is always feasible. The best vertex value never
//! increases, which makes the search safe to seed with an already-good
//! point: the returned value is at most the value of the start.
//!
//! The simplex is kept sorted and the vertex sum is maintained
//! incrementally, so one iteration costs one or two objective evaluations
//! plus O(n) bookkeeping.

use crate::scalar::Real;

pub(crate) struct NmResult<T> {
    pub x: Vec<T>,
    pub f: T,
    pub evals: u64,
}

struct Vertex<T> {
    x: Vec<T>,
    f: T,
}

fn project<T: Real>(x: &mut [T], lo: T, hi: T) {
    for v in x.iter_mut() {
        *v = v.clamp_to(lo, hi);
    }
}

/// Minimize `f` over the box `[lo, hi]^n` starting from `start`.
///
/// `max_evals` caps objective evaluations across all restarts; the search
/// restarts a fresh simplex around the incumbent whenever it converges
/// with budget left and keeps going while a restart improves the
/// incumbent by more than `tol`.
pub(crate) fn nelder_mead_box<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    start: &[T],
    lo: T,
    hi: T,
    tol: T,
    max_evals: u64,
) -> NmResult<T> {
    let n = start.len();
    assert!(n >= 1, "empty decision vector");
    let nf = T::of(n as f64);

    // Adaptive coefficients; for small n they reduce to the classic ones.
    let alpha = T::one();
    let beta = T::one() + T::of(2.0) / nf;
    let gamma = T::of(0.75) - T::one() / (T::of(2.0) * nf);
    let delta = T::one() - T::one() / nf;

    let mut evals = 0u64;
    let mut best_x = start.to_vec();
    project(&mut best_x, lo, hi);
    let mut best_f = f(&best_x);
    evals += 1;

    let step = (hi - lo) * T::of(0.05);
    let mut candidate = vec![T::zero(); n];

    'restarts: loop {
        let f_at_restart = best_f;

        // Fresh simplex around the incumbent, sorted ascending by value,
        // with the coordinate sum over all vertices kept alongside.
        let mut simplex: Vec<Vertex<T>> = Vec::with_capacity(n + 1);
        simplex.push(Vertex {
            x: best_x.clone(),
            f: best_f,
        });
        for i in 0..n {
            if evals >= max_evals {
                break 'restarts;
            }
            let mut x = best_x.clone();
            x[i] = if x[i] + step <= hi { x[i] + step } else { x[i] - step };
            project(&mut x, lo, hi);
            let fx = f(&x);
            evals += 1;
            simplex.push(Vertex { x, f: fx });
        }
        simplex.sort_by(|a, b| a.f.partial_cmp(&b.f).unwrap_or(std::cmp::Ordering::Equal));
        let mut vsum = vec![T::zero(); n];
        for v in &simplex {
            for (s, xi) in vsum.iter_mut().zip(v.x.iter()) {
                *s = *s + *xi;
            }
        }

        loop {
            if simplex[0].f < best_f {
                best_f = simplex[0].f;
                best_x.copy_from_slice(&simplex[0].x);
            }
            if evals >= max_evals {
                break 'restarts;
            }

            // Converged when the value spread collapses and, as a second
            // (rarely evaluated) check, the simplex extent does too.
            let f_spread = simplex[n].f - simplex[0].f;
            if f_spread <= tol {
                let mut x_spread = T::zero();
                for v in &simplex[1..] {
                    for (a, b) in v.x.iter().zip(simplex[0].x.iter()) {
                        x_spread = x_spread.max((*a - *b).abs());
                    }
                }
                if x_spread <= tol {
                    break;
                }
            }

            // Centroid of all but the worst vertex, from the running sum.
            let worst = &simplex[n];
            let inv = T::one() / nf;

            // Reflection.
            for i in 0..n {
                let c = (vsum[i] - worst.x[i]) * inv;
                candidate[i] = c + alpha * (c - worst.x[i]);
            }
            project(&mut candidate, lo, hi);
            let fr = f(&candidate);
            evals += 1;

            if fr < simplex[0].f {
                // Expand past the reflection.
                let reflected = candidate.clone();
                for i in 0..n {
                    let c = (vsum[i] - worst.x[i]) * inv;
                    candidate[i] = c + beta * (reflected[i] - c);
                }
                project(&mut candidate, lo, hi);
                let fe = f(&candidate);
                evals += 1;
                if fe < fr {
                    replace_worst(&mut simplex, &mut vsum, candidate.clone(), fe);
                } else {
                    replace_worst(&mut simplex, &mut vsum, reflected, fr);
                }
            } else if fr < simplex[n - 1].f {
                replace_worst(&mut simplex, &mut vsum, candidate.clone(), fr);
            } else if fr < worst.f {
                // Outside contraction.
                let reflected = candidate.clone();
                for i in 0..n {
                    let c = (vsum[i] - worst.x[i]) * inv;
                    candidate[i] = c + gamma * (reflected[i] - c);
                }
                project(&mut candidate, lo, hi);
                let fc = f(&candidate);
                evals += 1;
                if fc <= fr {
                    replace_worst(&mut simplex, &mut vsum, candidate.clone(), fc);
                } else {
                    shrink(&mut simplex, &mut vsum, delta, lo, hi, &mut f, &mut evals, max_evals);
                }
            } else {
                // Inside contraction.
                for i in 0..n {
                    let c = (vsum[i] - worst.x[i]) * inv;
                    candidate[i] = c - gamma * (c - worst.x[i]);
                }
                project(&mut candidate, lo, hi);
                let fc = f(&candidate);
                evals += 1;
                if fc < worst.f {
                    replace_worst(&mut simplex, &mut vsum, candidate.clone(), fc);
                } else {
                    shrink(&mut simplex, &mut vsum, delta, lo, hi, &mut f, &mut evals, max_evals);
                }
            }
        }

        if simplex[0].f < best_f {
            best_f = simplex[0].f;
            best_x.copy_from_slice(&simplex[0].x);
        }
        if !(f_at_restart - best_f > tol) {
            break;
        }
    }

    NmResult {
        x: best_x,
        f: best_f,
        evals,
    }
}

/// Swap the worst vertex for `x`, keeping the simplex sorted and the
/// coordinate sum current.
fn replace_worst<T: Real>(simplex: &mut [Vertex<T>], vsum: &mut [T], x: Vec<T>, fx: T) {
    let n = simplex.len() - 1;
    for i in 0..vsum.len() {
        vsum[i] = vsum[i] + x[i] - simplex[n].x[i];
    }
    simplex[n] = Vertex { x, f: fx };
    let mut i = n;
    while i > 0 && simplex[i].f < simplex[i - 1].f {
        simplex.swap(i, i - 1);
        i -= 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn shrink<T: Real, F: FnMut(&[T]) -> T>(
    simplex: &mut Vec<Vertex<T>>,
    vsum: &mut [T],
    delta: T,
    lo: T,
    hi: T,
    f: &mut F,
    evals: &mut u64,
    max_evals: u64,
) {
    let best = simplex[0].x.clone();
    for v in simplex.iter_mut().skip(1) {
        if *evals >= max_evals {
            break;
        }
        for (xi, bi) in v.x.iter_mut().zip(best.iter()) {
            *xi = *bi + delta * (*xi - *bi);
        }
        project(&mut v.x, lo, hi);
        v.f = f(&v.x);
        *evals += 1;
    }
    simplex.sort_by(|a, b| a.f.partial_cmp(&b.f).unwrap_or(std::cmp::Ordering::Equal));
    for s in vsum.iter_mut() {
        *s = T::zero();
    }
    for v in simplex.iter() {
        for (s, xi) in vsum.iter_mut().zip(v.x.iter()) {
            *s = *s + *xi;
        }
    }
}

/// Piecewise-linear upsampling of `m` control values onto `n` hours; the
/// control points sit at equal fractions of the horizon including both
/// ends. Interpolation of box-bounded values stays in the box.
pub(crate) fn upsample<T: Real>(coarse: &[T], out: &mut [T]) {
    let m = coarse.len();
    let n = out.len();
    debug_assert!(m >= 1);
    if m == 1 {
        for o in out.iter_mut() {
            *o = coarse[0];
        }
        return;
    }
    if m >= n {
        out.copy_from_slice(&coarse[..n]);
        return;
    }
    let scale = T::of((m - 1) as f64) / T::of((n - 1) as f64);
    for (h, o) in out.iter_mut().enumerate() {
        let pos = T::of(h as f64) * scale;
        let idx = pos.floor().as_f64() as usize;
        if idx + 1 >= m {
            *o = coarse[m - 1];
        } else {
            let w = pos - T::of(idx as f64);
            *o = coarse[idx] + w * (coarse[idx + 1] - coarse[idx]);
        }
    }
}
