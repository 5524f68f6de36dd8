//! Dense convex quadratic programming:
//!
//! ```text
//!     minimize   1/2 z' Q z + c' z
//!     subject to G z <= h
//! ```
//!
//! solved with a Mehrotra predictor-corrector interior-point method on the
//! normal equations, followed by an active-set polish that re-solves the
//! KKT system of the guessed active constraints exactly. The polish is
//! what pushes complementarity and stationarity residuals down to solver
//! precision; it is accepted only when it improves the worst KKT residual.
//!
//! `Q` must be positive semidefinite and every variable must appear in at
//! least one constraint (true for the box-constrained programs built by
//! the controller), which keeps the normal matrix positive definite.

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub(crate) struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.a[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x.iter()) {
                acc = acc + *a * *b;
            }
            y[i] = acc;
        }
        y
    }

    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row.iter()) {
                *yj = *yj + *a * xi;
            }
        }
        y
    }
}

/// In-place Cholesky factorization; returns false if a pivot collapses.
fn cholesky<T: Real>(m: &mut Mat<T>) -> bool {
    let n = m.rows;
    for j in 0..n {
        let mut d = m.at(j, j);
        for k in 0..j {
            let l = m.at(j, k);
            d = d - l * l;
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        *m.at_mut(j, j) = d;
        for i in (j + 1)..n {
            let mut v = m.at(i, j);
            for k in 0..j {
                v = v - m.at(i, k) * m.at(j, k);
            }
            *m.at_mut(i, j) = v / d;
        }
    }
    true
}

/// Solve `L L' x = b` given the Cholesky factor in the lower triangle.
fn cholesky_solve<T: Real>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v = v - l.at(i, k) * x[k];
        }
        x[i] = v / l.at(i, i);
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v = v - l.at(k, i) * x[k];
        }
        x[i] = v / l.at(i, i);
    }
    x
}

/// LU factorization with partial pivoting; returns None when singular.
struct Lu<T> {
    lu: Mat<T>,
    piv: Vec<usize>,
}

fn lu_factor<T: Real>(mut m: Mat<T>) -> Option<Lu<T>> {
    let n = m.rows;
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut max = m.at(k, k).abs();
        for i in (k + 1)..n {
            let v = m.at(i, k).abs();
            if v > max {
                max = v;
                p = i;
            }
        }
        if !(max > T::zero()) || !max.is_finite() {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                *m.at_mut(k, j) = m.at(p, j);
                *m.at_mut(p, j) = tmp;
            }
            piv.swap(k, p);
        }
        let pivot = m.at(k, k);
        for i in (k + 1)..n {
            let factor = m.at(i, k) / pivot;
            *m.at_mut(i, k) = factor;
            for j in (k + 1)..n {
                let v = m.at(i, j) - factor * m.at(k, j);
                *m.at_mut(i, j) = v;
            }
        }
    }
    Some(Lu { lu: m, piv })
}

fn lu_solve<T: Real>(lu: &Lu<T>, b: &[T]) -> Vec<T> {
    let n = lu.lu.rows;
    let mut x: Vec<T> = lu.piv.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        let mut v = x[i];
        for k in 0..i {
            v = v - lu.lu.at(i, k) * x[k];
        }
        x[i] = v;
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v = v - lu.lu.at(i, k) * x[k];
        }
        x[i] = v / lu.lu.at(i, i);
    }
    x
}

/// First-order optimality residuals, infinity norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals<T> {
    /// `|| Q z + c + G' lambda ||_inf`
    pub stationarity: T,
    /// `|| max(G z - h, 0) ||_inf`
    pub primal: T,
    /// `|| max(-lambda, 0) ||_inf`
    pub dual: T,
    /// `|| lambda .* (h - G z) ||_inf`
    pub complementarity: T,
}

impl<T: Real> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct QpProblem<T> {
    pub q: Mat<T>,
    pub c: Vec<T>,
    pub g: Mat<T>,
    pub h: Vec<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution<T> {
    pub z: Vec<T>,
    #[allow(dead_code)] // diagnostic; read by tests
    pub lambda: Vec<T>,
    pub kkt: KktResiduals<T>,
    pub iterations: usize,
    #[allow(dead_code)]
    pub converged: bool,
}

fn residuals<T: Real>(p: &QpProblem<T>, z: &[T], lambda: &[T]) -> KktResiduals<T> {
    let mut stat = p.q.matvec(z);
    let gtl = p.g.tr_matvec(lambda);
    for i in 0..stat.len() {
        stat[i] = stat[i] + p.c[i] + gtl[i];
    }
    let gz = p.g.matvec(z);
    let mut primal = T::zero();
    let mut comp = T::zero();
    let mut dual = T::zero();
    for i in 0..p.h.len() {
        let slack = p.h[i] - gz[i];
        primal = primal.max(-slack);
        comp = comp.max((lambda[i] * slack).abs());
        dual = dual.max(-lambda[i]);
    }
    KktResiduals {
        stationarity: stat.iter().fold(T::zero(), |a, &v| a.max(v.abs())),
        primal: primal.max(T::zero()),
        dual: dual.max(T::zero()),
        complementarity: comp,
    }
}

fn objective<T: Real>(p: &QpProblem<T>, z: &[T]) -> T {
    let qz = p.q.matvec(z);
    let mut v = T::zero();
    for i in 0..z.len() {
        v = v + z[i] * (qz[i] * T::of(0.5) + p.c[i]);
    }
    v
}

pub(crate) fn qp_objective<T: Real>(p: &QpProblem<T>, z: &[T]) -> T {
    objective(p, z)
}

/// Solve the program. `z0`, when given, seeds the interior iteration.
pub(crate) fn solve_qp<T: Real>(p: &QpProblem<T>, z0: Option<&[T]>) -> QpSolution<T> {
    let n = p.c.len();
    let m = p.h.len();
    debug_assert!(m > 0, "program must have at least one constraint");

    let mut z = match z0 {
        Some(z0) => z0.to_vec(),
        None => vec![T::zero(); n],
    };
    let gz = p.g.matvec(&z);
    let mut s: Vec<T> = (0..m)
        .map(|i| (p.h[i] - gz[i]).max(T::one()))
        .collect();
    let mut lambda = vec![T::one(); m];

    let max_iters = 150;
    let tol = T::of(1e-11);
    let mut iterations = 0;
    let mut converged = false;

    for it in 0..max_iters {
        iterations = it + 1;

        // Residuals of the perturbed KKT system.
        let mut r_d = p.q.matvec(&z);
        let gtl = p.g.tr_matvec(&lambda);
        for i in 0..n {
            r_d[i] = r_d[i] + p.c[i] + gtl[i];
        }
        let gz = p.g.matvec(&z);
        let mut r_p = vec![T::zero(); m];
        for i in 0..m {
            r_p[i] = gz[i] + s[i] - p.h[i];
        }
        let mu = s
            .iter()
            .zip(lambda.iter())
            .map(|(&si, &li)| si * li)
            .sum::<T>()
            / T::of(m as f64);

        let norm_d = r_d.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        let norm_p = r_p.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        if norm_d <= tol && norm_p <= tol && mu <= tol {
            converged = true;
            break;
        }

        // Normal matrix Q + G' diag(lambda/s) G.
        let d: Vec<T> = lambda.iter().zip(s.iter()).map(|(&l, &si)| l / si).collect();
        let mut normal = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                *normal.at_mut(i, j) = p.q.at(i, j);
            }
        }
        for r in 0..m {
            let dr = d[r];
            let row = &p.g.a[r * n..(r + 1) * n];
            for i in 0..n {
                let gi = row[i];
                if gi == T::zero() {
                    continue;
                }
                let w = dr * gi;
                for j in 0..=i {
                    let v = normal.at(i, j) + w * row[j];
                    *normal.at_mut(i, j) = v;
                }
            }
        }
        // Mirror to the upper triangle.
        for i in 0..n {
            for j in (i + 1)..n {
                *normal.at_mut(i, j) = normal.at(j, i);
            }
        }

        let mut chol = normal.clone();
        let mut reg = T::of(1e-13);
        while !cholesky(&mut chol) {
            chol = normal.clone();
            for i in 0..n {
                let v = chol.at(i, i) + reg;
                *chol.at_mut(i, i) = v;
            }
            reg = reg * T::of(100.0);
            if reg > T::one() {
                // Hopeless conditioning; bail out with what we have.
                let kkt = residuals(p, &z, &lambda);
                return QpSolution {
                    z,
                    lambda,
                    kkt,
                    iterations,
                    converged: false,
                };
            }
        }

        let solve_direction = |rc: &[T]| -> (Vec<T>, Vec<T>, Vec<T>) {
            // rhs = -r_d - G'(D r_p) + G'(rc / s)
            let mut w = vec![T::zero(); m];
            for i in 0..m {
                w[i] = d[i] * r_p[i] - rc[i] / s[i];
            }
            let gtw = p.g.tr_matvec(&w);
            let mut rhs = vec![T::zero(); n];
            for i in 0..n {
                rhs[i] = -r_d[i] - gtw[i];
            }
            let dz = cholesky_solve(&chol, &rhs);
            let gdz = p.g.matvec(&dz);
            let mut dl = vec![T::zero(); m];
            let mut ds = vec![T::zero(); m];
            for i in 0..m {
                dl[i] = d[i] * (r_p[i] + gdz[i]) - rc[i] / s[i];
                ds[i] = -r_p[i] - gdz[i];
            }
            (dz, dl, ds)
        };

        let step_len = |v: &[T], dv: &[T]| -> T {
            let mut alpha = T::one();
            for i in 0..v.len() {
                if dv[i] < T::zero() {
                    alpha = alpha.min(-v[i] / dv[i]);
                }
            }
            alpha
        };

        // Affine predictor.
        let rc_aff: Vec<T> = lambda.iter().zip(s.iter()).map(|(&l, &si)| l * si).collect();
        let (_dz_a, dl_a, ds_a) = solve_direction(&rc_aff);
        let alpha_p_aff = step_len(&s, &ds_a).min(T::one());
        let alpha_d_aff = step_len(&lambda, &dl_a).min(T::one());
        let mut mu_aff = T::zero();
        for i in 0..m {
            mu_aff = mu_aff + (s[i] + alpha_p_aff * ds_a[i]) * (lambda[i] + alpha_d_aff * dl_a[i]);
        }
        mu_aff = mu_aff / T::of(m as f64);
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = ratio * ratio * ratio;

        // Corrector.
        let mut rc = vec![T::zero(); m];
        for i in 0..m {
            rc[i] = lambda[i] * s[i] + ds_a[i] * dl_a[i] - sigma * mu;
        }
        let (dz, dl, ds) = solve_direction(&rc);

        let eta = T::of(0.995);
        let alpha_p = (eta * step_len(&s, &ds)).min(T::one());
        let alpha_d = (eta * step_len(&lambda, &dl)).min(T::one());
        for i in 0..n {
            z[i] = z[i] + alpha_p * dz[i];
        }
        for i in 0..m {
            s[i] = s[i] + alpha_p * ds[i];
            lambda[i] = lambda[i] + alpha_d * dl[i];
        }
    }

    let ipm_kkt = residuals(p, &z, &lambda);

    // Active-set polish: re-solve the equality KKT system of the guessed
    // active constraints.
    if let Some((pz, pl)) = polish(p, &s, &lambda) {
        let pk = residuals(p, &pz, &pl);
        if pk.max() <= ipm_kkt.max() {
            return QpSolution {
                z: pz,
                lambda: pl,
                kkt: pk,
                iterations,
                converged: true,
            };
        }
    }

    QpSolution {
        z,
        lambda,
        kkt: ipm_kkt,
        iterations,
        converged,
    }
}

fn polish<T: Real>(p: &QpProblem<T>, s: &[T], lambda: &[T]) -> Option<(Vec<T>, Vec<T>)> {
    let n = p.c.len();
    let m = p.h.len();
    let mut active: Vec<usize> = (0..m).filter(|&i| s[i] <= lambda[i]).collect();
    let feas_tol = T::of(1e-9);

    for _pass in 0..12 {
        let na = active.len();
        let dim = n + na;
        let mut kkt = Mat::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                *kkt.at_mut(i, j) = p.q.at(i, j);
            }
        }
        for (r, &ci) in active.iter().enumerate() {
            for j in 0..n {
                let v = p.g.at(ci, j);
                *kkt.at_mut(n + r, j) = v;
                *kkt.at_mut(j, n + r) = v;
            }
        }
        // Tiny regularization keeps degenerate active sets factorable;
        // one refinement step against the unregularized system follows.
        let delta = T::of(1e-11);
        let mut reg = kkt.clone();
        for i in 0..n {
            let v = reg.at(i, i) + delta;
            *reg.at_mut(i, i) = v;
        }
        for i in n..dim {
            let v = reg.at(i, i) - delta;
            *reg.at_mut(i, i) = v;
        }
        let lu = lu_factor(reg)?;

        let mut rhs = vec![T::zero(); dim];
        for i in 0..n {
            rhs[i] = -p.c[i];
        }
        for (r, &ci) in active.iter().enumerate() {
            rhs[n + r] = p.h[ci];
        }
        let mut sol = lu_solve(&lu, &rhs);
        // One step of iterative refinement on the unregularized KKT.
        for _ in 0..2 {
            let mut resid = rhs.clone();
            for i in 0..dim {
                let mut acc = T::zero();
                for j in 0..dim {
                    acc = acc + kkt.at(i, j) * sol[j];
                }
                resid[i] = resid[i] - acc;
            }
            let corr = lu_solve(&lu, &resid);
            for i in 0..dim {
                sol[i] = sol[i] + corr[i];
            }
        }

        let pz = sol[..n].to_vec();
        let pl_active = &sol[n..];

        // Drop the most negative multiplier, if any.
        let mut drop_idx = None;
        let mut worst = -feas_tol;
        for (r, &l) in pl_active.iter().enumerate() {
            if l < worst {
                worst = l;
                drop_idx = Some(r);
            }
        }
        if let Some(r) = drop_idx {
            active.remove(r);
            continue;
        }

        // Add the most violated inactive constraint, if any.
        let gz = p.g.matvec(&pz);
        let mut add_idx = None;
        let mut worst_v = feas_tol;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let viol = gz[i] - p.h[i];
            if viol > worst_v {
                worst_v = viol;
                add_idx = Some(i);
            }
        }
        if let Some(i) = add_idx {
            active.push(i);
            active.sort_unstable();
            continue;
        }

        let mut pl = vec![T::zero(); m];
        for (r, &ci) in active.iter().enumerate() {
            pl[ci] = pl_active[r].max(T::zero());
        }
        return Some((pz, pl));
    }
    None
}
