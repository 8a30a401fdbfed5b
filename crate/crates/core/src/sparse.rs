//! Compressed-row symmetric matrices and SSOR-preconditioned conjugate
//! gradients. Just enough linear algebra for the grid operators.

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Csr<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        let mut diag = vec![T::zero(); n];
        row_ptr.push(0);
        for (r, mut entries) in rows.into_iter().enumerate() {
            entries.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in entries {
                if last == Some(c) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = Some(c);
                }
            }
            for k in row_ptr[r]..col.len() {
                if col[k] == r {
                    diag[r] = val[k];
                }
            }
            row_ptr.push(col.len());
        }
        Self {
            n,
            row_ptr,
            col,
            val,
            diag,
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for r in 0..self.n {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[r] = s;
        }
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Applies the SSOR preconditioner `M⁻¹ r` with relaxation `omega`.
    fn ssor(&self, omega: T, r: &[T], z: &mut [T]) {
        let n = self.n;
        // forward: (D/ω + L) y = r
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col[k];
                if c < i {
                    s -= self.val[k] * z[c];
                }
            }
            z[i] = s * omega / self.diag[i];
        }
        // scale by D/ω, then backward: (D/ω + U) z = (D/ω) y
        for i in 0..n {
            z[i] = z[i] * self.diag[i] / omega;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col[k];
                if c > i {
                    s -= self.val[k] * z[c];
                }
            }
            z[i] = s * omega / self.diag[i];
        }
        let scale = (T::two() - omega) / omega;
        for v in z.iter_mut() {
            *v *= scale;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
/// Returns `Err` with the final report when `max_iter` is exhausted.
pub fn pcg<T: Real>(a: &Csr<T>, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<CgReport, CgReport> {
    let n = a.n;
    let omega = T::lit(1.5);
    let bnorm = norm(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgReport {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut r = vec![T::zero(); n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![T::zero(); n];
    a.ssor(omega, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dotv(&r, &z);
    let mut q = vec![T::zero(); n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > tol {
        if it >= max_iter {
            return Err(CgReport {
                iterations: it,
                rel_residual: rel.to_f64_(),
            });
        }
        a.matvec(&p, &mut q);
        let pq = dotv(&p, &q);
        if pq <= T::zero() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = norm(&r) / bnorm;
        it += 1;
        if rel <= tol {
            break;
        }
        a.ssor(omega, &r, &mut z);
        let rz_new = dotv(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recompute the true residual to guard against drift
    a.matvec(x, &mut q);
    let mut s = T::zero();
    for i in 0..n {
        let d = b[i] - q[i];
        s += d * d;
    }
    let true_rel = s.sqrt() / bnorm;
    let report = CgReport {
        iterations: it,
        rel_residual: true_rel.to_f64_(),
    };
    // roundoff floor of the residual evaluation itself
    let floor = T::lit(1000.0) * T::epsilon() * T::from_usize_(n).sqrt();
    if true_rel > (tol * T::lit(10.0)).max(floor) {
        Err(report)
    } else {
        Ok(report)
    }
}

fn dotv<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dotv(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 200;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.5f64)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let a = Csr::from_rows(rows);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xs, &mut b);
        let mut x = vec![0.0; n];
        let rep = pcg(&a, &b, &mut x, 1e-12, 1000).unwrap();
        assert!(rep.rel_residual <= 1e-11);
        for i in 0..n {
            assert!((x[i] - xs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_rows(vec![vec![(0, 1.0f64), (0, 2.0), (1, -1.0)], vec![(1, 4.0), (0, -1.0)]]);
        assert_eq!(a.diagonal(), &[3.0, 4.0]);
        let mut y = [0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, [2.0, 3.0]);
    }

    #[test]
    fn reports_non_convergence() {
        let a = Csr::from_rows((0..50).map(|i| vec![(i, 1.0 + i as f64)]).collect::<Vec<_>>());
        let b = vec![1.0f64; 50];
        let mut x = vec![0.0; 50];
        // SSOR with a diagonal matrix is exact, so force zero iterations
        assert!(pcg(&a, &b, &mut x, 1e-12, 0).is_err());
    }
}
