//! Tensor-product cubic B-spline interpolation of node fields (natural end
//! conditions). Gives a C² surrogate whose exact gradient drives the reduced
//! laws, so that quantities conserved by the continuous flow are conserved by
//! the interpolated flow too.

use crate::grid::{DomainGrid, NodeField, Point};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Spline2<T> {
    nx: usize,
    ny: usize,
    h: T,
    /// `(nx + 2) × (ny + 2)` coefficients including one ghost layer.
    coef: Vec<T>,
}

/// Solves the natural-end interpolation system along one line in place:
/// input samples, output coefficients `c_0..c_{n-1}`.
fn solve_line<T: Real>(f: &mut [T], scratch: &mut [T]) {
    let n = f.len();
    // c_0 = f_0, c_{n-1} = f_{n-1}; interior rows (c_{k-1} + 4c_k + c_{k+1})/6 = f_k
    if n <= 2 {
        return;
    }
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let m = n - 2;
    let mut rhs: Vec<T> = (1..n - 1).map(|k| six * f[k]).collect();
    rhs[0] -= f[0];
    rhs[m - 1] -= f[n - 1];
    // Thomas algorithm for tridiag(1, 4, 1)
    let cp = &mut scratch[..m];
    cp[0] = T::one() / four;
    rhs[0] /= four;
    for k in 1..m {
        let denom = four - cp[k - 1];
        cp[k] = T::one() / denom;
        rhs[k] = (rhs[k] - rhs[k - 1]) / denom;
    }
    for k in (0..m - 1).rev() {
        rhs[k] = rhs[k] - cp[k] * rhs[k + 1];
    }
    f[1..n - 1].copy_from_slice(&rhs);
}

fn basis<T: Real>(t: T) -> ([T; 4], [T; 4], [T; 4]) {
    let s = T::one() - t;
    let six = T::lit(6.0);
    let b = [
        s * s * s / six,
        (T::lit(3.0) * t * t * t - six * t * t + T::lit(4.0)) / six,
        (-T::lit(3.0) * t * t * t + T::lit(3.0) * t * t + T::lit(3.0) * t + T::one()) / six,
        t * t * t / six,
    ];
    let d = [
        -s * s / T::two(),
        (T::lit(3.0) * t * t - T::lit(4.0) * t) / T::two(),
        (-T::lit(3.0) * t * t + T::two() * t + T::one()) / T::two(),
        t * t / T::two(),
    ];
    let dd = [s, T::lit(3.0) * t - T::two(), -T::lit(3.0) * t + T::one(), t];
    (b, d, dd)
}

impl<T: Real> Spline2<T> {
    pub fn new(grid: &DomainGrid<T>, f: &NodeField<T>) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut c = f.data.clone();
        let mut scratch = vec![T::zero(); nx.max(ny)];
        for j in 0..ny {
            solve_line(&mut c[j * nx..(j + 1) * nx], &mut scratch);
        }
        let mut col = vec![T::zero(); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = c[j * nx + i];
            }
            solve_line(&mut col, &mut scratch);
            for j in 0..ny {
                c[j * nx + i] = col[j];
            }
        }
        // ghost layer from c_{-1} = 2c_0 − c_1 (zero second derivative)
        let (gx, gy) = (nx + 2, ny + 2);
        let mut coef = vec![T::zero(); gx * gy];
        for j in 0..ny {
            for i in 0..nx {
                coef[(j + 1) * gx + i + 1] = c[j * nx + i];
            }
        }
        for j in 1..gy - 1 {
            let r = j * gx;
            coef[r] = T::two() * coef[r + 1] - coef[r + 2];
            coef[r + gx - 1] = T::two() * coef[r + gx - 2] - coef[r + gx - 3];
        }
        for i in 0..gx {
            coef[i] = T::two() * coef[gx + i] - coef[2 * gx + i];
            coef[(gy - 1) * gx + i] = T::two() * coef[(gy - 2) * gx + i] - coef[(gy - 3) * gx + i];
        }
        Self { nx, ny, h: grid.h, coef }
    }

    fn locate(&self, x: T, n: usize) -> (usize, T) {
        let u = (x / self.h).max(T::zero());
        let i = u.floor().to_usize().unwrap_or(0).min(n - 2);
        (i, u - T::from_usize_(i))
    }

    /// Value, gradient and Hessian `[f_xx, f_xy, f_yy]` at `p`.
    pub fn eval_all(&self, p: Point<T>) -> (T, Point<T>, [T; 3]) {
        let (i, tx) = self.locate(p[0], self.nx);
        let (j, ty) = self.locate(p[1], self.ny);
        let (bx, dx, ddx) = basis(tx);
        let (by, dy, ddy) = basis(ty);
        let gx = self.nx + 2;
        let mut v = T::zero();
        let mut g = [T::zero(); 2];
        let mut hs = [T::zero(); 3];
        for b in 0..4 {
            let row = (j + b) * gx + i;
            for a in 0..4 {
                let c = self.coef[row + a];
                v += c * bx[a] * by[b];
                g[0] += c * dx[a] * by[b];
                g[1] += c * bx[a] * dy[b];
                hs[0] += c * ddx[a] * by[b];
                hs[1] += c * dx[a] * dy[b];
                hs[2] += c * bx[a] * ddy[b];
            }
        }
        let ih = T::one() / self.h;
        (v, [g[0] * ih, g[1] * ih], [hs[0] * ih * ih, hs[1] * ih * ih, hs[2] * ih * ih])
    }

    pub fn value(&self, p: Point<T>) -> T {
        self.eval_all(p).0
    }

    pub fn grad(&self, p: Point<T>) -> Point<T> {
        self.eval_all(p).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_node_values() {
        let g = DomainGrid::<f64>::square(1.0, 21).unwrap();
        let f = NodeField::from_fn(&g, |p| (3.0 * p[0]).sin() * (1.0 + p[1] * p[1]));
        let s = Spline2::new(&g, &f);
        for j in 0..21 {
            for i in 0..21 {
                assert!((s.value(g.node_pos(i, j)) - f.at(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_linear_fields_exactly() {
        let g = DomainGrid::<f64>::square(1.0, 17).unwrap();
        let f = NodeField::from_fn(&g, |p| 2.0 * p[0] - 0.5 * p[1] + 1.0);
        let s = Spline2::new(&g, &f);
        let (v, gr, hs) = s.eval_all([0.3137, 0.7771]);
        assert!((v - (2.0 * 0.3137 - 0.5 * 0.7771 + 1.0)).abs() < 1e-12);
        assert!((gr[0] - 2.0).abs() < 1e-11 && (gr[1] + 0.5).abs() < 1e-11);
        assert!(hs.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn interior_gradient_is_accurate() {
        let g = DomainGrid::<f64>::square(1.0, 65).unwrap();
        let f = NodeField::from_fn(&g, |p| (2.0 * p[0]).sin() * (3.0 * p[1]).cos());
        let s = Spline2::new(&g, &f);
        let p = [0.41, 0.57];
        let gr = s.grad(p);
        let ex = [2.0 * (2.0 * p[0]).cos() * (3.0 * p[1]).cos(), -3.0 * (2.0 * p[0]).sin() * (3.0 * p[1]).sin()];
        assert!((gr[0] - ex[0]).abs() < 1e-5 && (gr[1] - ex[1]).abs() < 1e-5, "{gr:?} {ex:?}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = DomainGrid::<f64>::square(1.0, 33).unwrap();
        let f = NodeField::from_fn(&g, |p| (5.0 * p[0] * p[1]).cos());
        let s = Spline2::new(&g, &f);
        let p = [0.33, 0.61];
        let d = 1e-6;
        let fd = [
            (s.value([p[0] + d, p[1]]) - s.value([p[0] - d, p[1]])) / (2.0 * d),
            (s.value([p[0], p[1] + d]) - s.value([p[0], p[1] - d])) / (2.0 * d),
        ];
        let gr = s.grad(p);
        assert!((gr[0] - fd[0]).abs() < 1e-7 && (gr[1] - fd[1]).abs() < 1e-7);
    }
}
