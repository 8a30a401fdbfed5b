//! Staggered rectangular grid: nodes carry scalars and the order parameter,
//! edges carry vector potentials, cells carry curls.
//!
//! Storage is row-major with `y` outer and `x` inner for every site type.
//! Node `(i, j)` sits at `(i h, j h)`; x-edge `(i, j)` joins nodes `(i, j)` and
//! `(i+1, j)`; y-edge `(i, j)` joins `(i, j)` and `(i, j+1)`; cell `(i, j)` has
//! lower-left node `(i, j)`.
//!
//! Quadrature is trapezoidal: node weights are 1, ½, ¼ (interior, side,
//! corner) and edges lying on ∂Ω carry weight ½. `discrete_div` is the exact
//! negative adjoint of `discrete_grad` under these weights.

use thiserror::Error;

use crate::scalar::Real;

pub type Point<T> = [T; 2];

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 16 nodes per axis, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("cells are not square: Lx/(Nx-1) = {hx}, Ly/(Ny-1) = {hy}")]
    NonSquare { hx: f64, hy: f64 },
    #[error("domain lengths must be positive and finite")]
    BadLength,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainGrid<T> {
    pub lx: T,
    pub ly: T,
    pub nx: usize,
    pub ny: usize,
    pub h: T,
    pub perimeter: T,
}

impl<T: Real> DomainGrid<T> {
    pub fn new(lx: T, ly: T, nx: usize, ny: usize) -> Result<Self, GridError> {
        if !(lx > T::zero() && ly > T::zero() && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::BadLength);
        }
        if nx < 16 || ny < 16 {
            return Err(GridError::TooSmall { nx, ny });
        }
        let hx = lx / T::from_usize_(nx - 1);
        let hy = ly / T::from_usize_(ny - 1);
        if ((hx - hy) / hx).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) {
            return Err(GridError::NonSquare {
                hx: hx.to_f64_(),
                hy: hy.to_f64_(),
            });
        }
        Ok(Self {
            lx,
            ly,
            nx,
            ny,
            h: hx,
            perimeter: T::two() * (lx + ly),
        })
    }

    /// Grid on `[0, l] × [0, l]` with `n` nodes per side.
    pub fn square(l: T, n: usize) -> Result<Self, GridError> {
        Self::new(l, l, n, n)
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn n_xedges(&self) -> usize {
        (self.nx - 1) * self.ny
    }
    #[inline]
    pub fn n_yedges(&self) -> usize {
        self.nx * (self.ny - 1)
    }
    #[inline]
    pub fn n_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn xedge(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }
    #[inline]
    pub fn yedge(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }

    #[inline]
    pub fn node_pos(&self, i: usize, j: usize) -> Point<T> {
        [T::from_usize_(i) * self.h, T::from_usize_(j) * self.h]
    }
    #[inline]
    pub fn xedge_mid(&self, i: usize, j: usize) -> Point<T> {
        [
            (T::from_usize_(i) + T::half()) * self.h,
            T::from_usize_(j) * self.h,
        ]
    }
    #[inline]
    pub fn yedge_mid(&self, i: usize, j: usize) -> Point<T> {
        [
            T::from_usize_(i) * self.h,
            (T::from_usize_(j) + T::half()) * self.h,
        ]
    }
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point<T> {
        [
            (T::from_usize_(i) + T::half()) * self.h,
            (T::from_usize_(j) + T::half()) * self.h,
        ]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Trapezoid weight of node `(i, j)`: 1 inside, ½ on sides, ¼ at corners.
    #[inline]
    pub fn node_weight(&self, i: usize, j: usize) -> T {
        let wx = if i == 0 || i == self.nx - 1 { T::half() } else { T::one() };
        let wy = if j == 0 || j == self.ny - 1 { T::half() } else { T::one() };
        wx * wy
    }
    /// Weight of x-edges in row `j` (½ on the bottom/top sides).
    #[inline]
    pub fn xedge_weight(&self, j: usize) -> T {
        if j == 0 || j == self.ny - 1 {
            T::half()
        } else {
            T::one()
        }
    }
    /// Weight of y-edges in column `i` (½ on the left/right sides).
    #[inline]
    pub fn yedge_weight(&self, i: usize) -> T {
        if i == 0 || i == self.nx - 1 {
            T::half()
        } else {
            T::one()
        }
    }

    pub fn node_weights(&self) -> Vec<T> {
        let mut w = Vec::with_capacity(self.n_nodes());
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.push(self.node_weight(i, j));
            }
        }
        w
    }

    /// Boundary nodes counterclockwise starting at the corner (0, 0).
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity(2 * (nx + ny) - 4);
        for i in 0..nx {
            out.push((i, 0));
        }
        for j in 1..ny {
            out.push((nx - 1, j));
        }
        for i in (0..nx - 1).rev() {
            out.push((i, ny - 1));
        }
        for j in (1..ny - 1).rev() {
            out.push((0, j));
        }
        out
    }

    /// Normalized counterclockwise arclength of every boundary node, aligned
    /// with [`boundary_nodes`](Self::boundary_nodes).
    pub fn boundary_arclength(&self) -> Vec<T> {
        // square cells: boundary nodes are equally spaced by h along ∂Ω
        let total = 2 * (self.nx - 1) + 2 * (self.ny - 1);
        let t = T::from_usize_(total);
        (0..total).map(|k| T::from_usize_(k) / t).collect()
    }

    /// Bilinear interpolation of a node field; points are clamped to Ω.
    pub fn interp_node(&self, f: &NodeField<T>, p: Point<T>) -> T {
        interp_lattice(&f.data, self.nx, self.ny, [T::zero(), T::zero()], self.h, p)
    }

    /// Bilinear interpolation of an edge field, each component on its own
    /// staggered lattice.
    pub fn interp_edge(&self, b: &EdgeField<T>, p: Point<T>) -> Point<T> {
        let bx = interp_lattice(&b.x, self.nx - 1, self.ny, [self.h * T::half(), T::zero()], self.h, p);
        let by = interp_lattice(&b.y, self.nx, self.ny - 1, [T::zero(), self.h * T::half()], self.h, p);
        [bx, by]
    }

    /// Bilinear interpolation of a cell-centred field.
    pub fn interp_cell(&self, c: &CellField<T>, p: Point<T>) -> T {
        let o = self.h * T::half();
        interp_lattice(&c.data, self.nx - 1, self.ny - 1, [o, o], self.h, p)
    }

    /// Index of the node closest to `p`.
    pub fn nearest_node(&self, p: Point<T>) -> (usize, usize) {
        let fi = (p[0] / self.h).round().max(T::zero()).to_usize().unwrap_or(0);
        let fj = (p[1] / self.h).round().max(T::zero()).to_usize().unwrap_or(0);
        (fi.min(self.nx - 1), fj.min(self.ny - 1))
    }

    /// Distance from `p` to ∂Ω (negative outside).
    pub fn boundary_distance(&self, p: Point<T>) -> T {
        p[0].min(self.lx - p[0]).min(p[1]).min(self.ly - p[1])
    }
}

fn interp_lattice<T: Real>(data: &[T], ncols: usize, nrows: usize, origin: Point<T>, h: T, p: Point<T>) -> T {
    let fx = ((p[0] - origin[0]) / h)
        .max(T::zero())
        .min(T::from_usize_(ncols - 1));
    let fy = ((p[1] - origin[1]) / h)
        .max(T::zero())
        .min(T::from_usize_(nrows - 1));
    let i0 = fx.floor().to_usize().unwrap_or(0).min(ncols - 2);
    let j0 = fy.floor().to_usize().unwrap_or(0).min(nrows - 2);
    let tx = fx - T::from_usize_(i0);
    let ty = fy - T::from_usize_(j0);
    let a = data[j0 * ncols + i0];
    let b = data[j0 * ncols + i0 + 1];
    let c = data[(j0 + 1) * ncols + i0];
    let d = data[(j0 + 1) * ncols + i0 + 1];
    let one = T::one();
    (one - ty) * ((one - tx) * a + tx * b) + ty * ((one - tx) * c + tx * d)
}

/// Values on nodes; `S` is a real scalar or a complex number.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField<S> {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<S>,
}

impl<S: Copy> NodeField<S> {
    pub fn filled<T: Real>(grid: &DomainGrid<T>, value: S) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![value; grid.n_nodes()],
        }
    }

    pub fn from_fn<T: Real>(grid: &DomainGrid<T>, mut f: impl FnMut(Point<T>) -> S) -> Self {
        let mut data = Vec::with_capacity(grid.n_nodes());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.node_pos(i, j)));
            }
        }
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[j * self.nx + i]
    }

    pub fn map<R: Copy>(&self, f: impl FnMut(&S) -> R) -> NodeField<R> {
        NodeField {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Real> NodeField<T> {
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Vector field on edges: `x` on horizontal edges, `y` on vertical edges.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField<T> {
    pub nx: usize,
    pub ny: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> EdgeField<T> {
    pub fn zeros(grid: &DomainGrid<T>) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            x: vec![T::zero(); grid.n_xedges()],
            y: vec![T::zero(); grid.n_yedges()],
        }
    }

    /// Samples a continuous vector field at edge midpoints.
    pub fn from_fn(grid: &DomainGrid<T>, f: impl Fn(Point<T>) -> Point<T>) -> Self {
        let mut b = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx - 1 {
                b.x[grid.xedge(i, j)] = f(grid.xedge_mid(i, j))[0];
            }
        }
        for j in 0..grid.ny - 1 {
            for i in 0..grid.nx {
                b.y[grid.yedge(i, j)] = f(grid.yedge_mid(i, j))[1];
            }
        }
        b
    }

    pub fn axpy(&mut self, a: T, other: &EdgeField<T>) {
        for (s, o) in self.x.iter_mut().zip(&other.x) {
            *s += a * *o;
        }
        for (s, o) in self.y.iter_mut().zip(&other.y) {
            *s += a * *o;
        }
    }

    pub fn max_abs(&self) -> T {
        self.x
            .iter()
            .chain(self.y.iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// Values on plaquettes.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField<T> {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<T>,
}

impl<T: Real> CellField<T> {
    pub fn zeros(grid: &DomainGrid<T>) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![T::zero(); grid.n_cells()],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[j * (self.nx - 1) + i]
    }
}

/// Scalar samples on the boundary nodes, aligned with
/// [`DomainGrid::boundary_nodes`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace<T> {
    pub s: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn from_fn(grid: &DomainGrid<T>, f: impl Fn(T) -> T) -> Self {
        let s = grid.boundary_arclength();
        let values = s.iter().map(|&s| f(s)).collect();
        Self { s, values }
    }

    pub fn constant(grid: &DomainGrid<T>, c: T) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Samples a function of position on the boundary nodes.
    pub fn from_positions(grid: &DomainGrid<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let s = grid.boundary_arclength();
        let values = grid
            .boundary_nodes()
            .iter()
            .map(|&(i, j)| f(grid.node_pos(i, j)))
            .collect();
        Self { s, values }
    }
}

/// Forward differences onto edges.
pub fn discrete_grad<T: Real>(grid: &DomainGrid<T>, u: &NodeField<T>) -> EdgeField<T> {
    let inv_h = T::one() / grid.h;
    let mut b = EdgeField::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx - 1 {
            b.x[grid.xedge(i, j)] = (u.at(i + 1, j) - u.at(i, j)) * inv_h;
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            b.y[grid.yedge(i, j)] = (u.at(i, j + 1) - u.at(i, j)) * inv_h;
        }
    }
    b
}

/// Counterclockwise circulation per plaquette divided by h².
pub fn discrete_curl<T: Real>(grid: &DomainGrid<T>, b: &EdgeField<T>) -> CellField<T> {
    let inv_h = T::one() / grid.h;
    let mut c = CellField::zeros(grid);
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            c.data[grid.cell(i, j)] = (b.x[grid.xedge(i, j)] + b.y[grid.yedge(i + 1, j)]
                - b.x[grid.xedge(i, j + 1)]
                - b.y[grid.yedge(i, j)])
                * inv_h;
        }
    }
    c
}

/// Weighted divergence: the negative adjoint of [`discrete_grad`] under the
/// trapezoid inner products. Boundary nodes see zero normal flux through ∂Ω.
pub fn discrete_div<T: Real>(grid: &DomainGrid<T>, b: &EdgeField<T>) -> NodeField<T> {
    let mut acc = vec![T::zero(); grid.n_nodes()];
    for j in 0..grid.ny {
        let w = grid.xedge_weight(j);
        for i in 0..grid.nx - 1 {
            let f = w * b.x[grid.xedge(i, j)];
            acc[grid.node(i, j)] += f;
            acc[grid.node(i + 1, j)] -= f;
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            let f = grid.yedge_weight(i) * b.y[grid.yedge(i, j)];
            acc[grid.node(i, j)] += f;
            acc[grid.node(i, j + 1)] -= f;
        }
    }
    // acc holds Σ_tail ωB − Σ_head ωB
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.node(i, j);
            acc[k] /= grid.node_weight(i, j) * grid.h;
        }
    }
    NodeField {
        nx: grid.nx,
        ny: grid.ny,
        data: acc,
    }
}

/// ∇⊥u = (−∂₂u, ∂₁u) sampled at edge midpoints. Interior edges use the
/// four-point average stencil, so `discrete_div ∘ discrete_perp_grad`
/// vanishes at every interior node; rows/columns on ∂Ω use second-order
/// one-sided differences.
pub fn discrete_perp_grad<T: Real>(grid: &DomainGrid<T>, u: &NodeField<T>) -> EdgeField<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let four_h = T::lit(4.0) * grid.h;
    let two_h = T::two() * grid.h;
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    // ∂₂u at node (i, j), one-sided on bottom/top rows.
    let dy_one_sided = |i: usize, j: usize| -> T {
        if j == 0 {
            (-three * u.at(i, 0) + four * u.at(i, 1) - u.at(i, 2)) / two_h
        } else {
            (three * u.at(i, ny - 1) - four * u.at(i, ny - 2) + u.at(i, ny - 3)) / two_h
        }
    };
    let dx_one_sided = |i: usize, j: usize| -> T {
        if i == 0 {
            (-three * u.at(0, j) + four * u.at(1, j) - u.at(2, j)) / two_h
        } else {
            (three * u.at(nx - 1, j) - four * u.at(nx - 2, j) + u.at(nx - 3, j)) / two_h
        }
    };
    let mut b = EdgeField::zeros(grid);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let dy = if j == 0 || j == ny - 1 {
                T::half() * (dy_one_sided(i, j) + dy_one_sided(i + 1, j))
            } else {
                (u.at(i, j + 1) + u.at(i + 1, j + 1) - u.at(i, j - 1) - u.at(i + 1, j - 1)) / four_h
            };
            b.x[grid.xedge(i, j)] = -dy;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let dx = if i == 0 || i == nx - 1 {
                T::half() * (dx_one_sided(i, j) + dx_one_sided(i, j + 1))
            } else {
                (u.at(i + 1, j) + u.at(i + 1, j + 1) - u.at(i - 1, j) - u.at(i - 1, j + 1)) / four_h
            };
            b.y[grid.yedge(i, j)] = dx;
        }
    }
    b
}

/// Weighted adjoint of [`discrete_curl`] with zero continuation outside Ω,
/// negated: the edge field ∇⊥c of a cell field `c`. Used for ∇⊥h′.
pub fn cell_perp_grad<T: Real>(grid: &DomainGrid<T>, c: &CellField<T>) -> EdgeField<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let mut b = EdgeField::zeros(grid);
    for j in 0..ny {
        let w = grid.xedge_weight(j);
        for i in 0..nx - 1 {
            let above = if j < ny - 1 { c.at(i, j) } else { T::zero() };
            let below = if j > 0 { c.at(i, j - 1) } else { T::zero() };
            b.x[grid.xedge(i, j)] = -(above - below) / (w * h);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let right = if i < nx - 1 { c.at(i, j) } else { T::zero() };
            let left = if i > 0 { c.at(i - 1, j) } else { T::zero() };
            b.y[grid.yedge(i, j)] = (right - left) / (grid.yedge_weight(i) * h);
        }
    }
    b
}

/// Trapezoid inner product of node fields.
pub fn node_inner<T: Real>(grid: &DomainGrid<T>, a: &NodeField<T>, b: &NodeField<T>) -> T {
    let h2 = grid.h * grid.h;
    let mut s = T::zero();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.node(i, j);
            s += grid.node_weight(i, j) * a.data[k] * b.data[k];
        }
    }
    s * h2
}

/// Weighted inner product of edge fields.
pub fn edge_inner<T: Real>(grid: &DomainGrid<T>, a: &EdgeField<T>, b: &EdgeField<T>) -> T {
    let h2 = grid.h * grid.h;
    let mut s = T::zero();
    for j in 0..grid.ny {
        let w = grid.xedge_weight(j);
        for i in 0..grid.nx - 1 {
            let k = grid.xedge(i, j);
            s += w * a.x[k] * b.x[k];
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            let k = grid.yedge(i, j);
            s += grid.yedge_weight(i) * a.y[k] * b.y[k];
        }
    }
    s * h2
}

pub fn cell_inner<T: Real>(grid: &DomainGrid<T>, a: &CellField<T>, b: &CellField<T>) -> T {
    let h2 = grid.h * grid.h;
    a.data.iter().zip(&b.data).map(|(x, y)| *x * *y).sum::<T>() * h2
}

/// Average of the four corner values of every cell.
pub fn node_to_cell<T: Real>(grid: &DomainGrid<T>, u: &NodeField<T>) -> CellField<T> {
    let q = T::lit(0.25);
    let mut c = CellField::zeros(grid);
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            c.data[grid.cell(i, j)] =
                q * (u.at(i, j) + u.at(i + 1, j) + u.at(i, j + 1) + u.at(i + 1, j + 1));
        }
    }
    c
}

/// Average of the adjacent cells of every node (one to four of them).
pub fn cell_to_node<T: Real>(grid: &DomainGrid<T>, c: &CellField<T>) -> NodeField<T> {
    let mut out = NodeField::filled(grid, T::zero());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let mut s = T::zero();
            let mut n = 0usize;
            for (di, dj) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
                if i >= di && j >= dj && i - di < grid.nx - 1 && j - dj < grid.ny - 1 {
                    s += c.at(i - di, j - dj);
                    n += 1;
                }
            }
            out.data[grid.node(i, j)] = s / T::from_usize_(n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(n: usize) -> DomainGrid<f64> {
        DomainGrid::square(1.0, n).unwrap()
    }

    #[test]
    fn make_grid_examples() {
        let a = DomainGrid::new(1.0, 1.0, 65, 65).unwrap();
        assert_eq!(a.h, 1.0 / 64.0);
        assert_eq!(a.perimeter, 4.0);
        let b = DomainGrid::new(2.0, 1.0, 129, 65).unwrap();
        assert_eq!(b.h, 1.0 / 64.0);
        assert_eq!(b.perimeter, 6.0);
        assert!(matches!(
            DomainGrid::new(1.0, 1.0, 65, 33),
            Err(GridError::NonSquare { .. })
        ));
        assert!(matches!(
            DomainGrid::new(1.0, 1.0, 8, 8),
            Err(GridError::TooSmall { .. })
        ));
    }

    #[test]
    fn generic_over_f32() {
        let gr = DomainGrid::<f32>::square(1.0, 17).unwrap();
        let u = NodeField::from_fn(&gr, |p| p[0]);
        let b = discrete_grad(&gr, &u);
        assert!(b.x.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn grad_of_linear_and_quadratic() {
        let gr = g(65);
        let b = discrete_grad(&gr, &NodeField::from_fn(&gr, |p| p[0]));
        assert!(b.x.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(b.y.iter().all(|v| v.abs() < 1e-12));
        let q = discrete_grad(&gr, &NodeField::from_fn(&gr, |p| p[0] * p[0]));
        assert!((q.x[gr.xedge(0, 3)] - 1.0 / 64.0).abs() < 1e-15);
        let c = discrete_grad(&gr, &NodeField::filled(&gr, 3.5));
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn curl_of_rotation_field_is_one() {
        let gr = g(33);
        let b = EdgeField::from_fn(&gr, |p| [-p[1] / 2.0, p[0] / 2.0]);
        let c = discrete_curl(&gr, &b);
        assert!(c.data.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn curl_matches_loop_sum() {
        let gr = g(17);
        let mut b = EdgeField::zeros(&gr);
        for (k, v) in b.x.iter_mut().enumerate() {
            *v = ((k * 7919) % 101) as f64 / 13.0 - 3.0;
        }
        for (k, v) in b.y.iter_mut().enumerate() {
            *v = ((k * 104_729) % 89) as f64 / 11.0 - 4.0;
        }
        let c = discrete_curl(&gr, &b);
        for j in 0..16 {
            for i in 0..16 {
                // walk the boundary of the cell: (i,j)->(i+1,j)->(i+1,j+1)->(i,j+1)->(i,j)
                let mut circ = 0.0;
                circ += b.x[j * 16 + i] * gr.h;
                circ += b.y[j * 17 + i + 1] * gr.h;
                circ -= b.x[(j + 1) * 16 + i] * gr.h;
                circ -= b.y[j * 17 + i] * gr.h;
                assert!((c.at(i, j) - circ / (gr.h * gr.h)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perp_grad_of_y() {
        let gr = g(33);
        let b = discrete_perp_grad(&gr, &NodeField::from_fn(&gr, |p| p[1]));
        assert!(b.x.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(b.y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perp_grad_second_order_at_boundary() {
        let err = |n: usize| {
            let gr = g(n);
            let u = NodeField::from_fn(&gr, |p| (2.0 * p[0]).sin() * (3.0 * p[1]).cos());
            let b = discrete_perp_grad(&gr, &u);
            let exact = EdgeField::from_fn(&gr, |p| {
                [
                    3.0 * (2.0 * p[0]).sin() * (3.0 * p[1]).sin(),
                    2.0 * (2.0 * p[0]).cos() * (3.0 * p[1]).cos(),
                ]
            });
            let mut e = 0.0f64;
            for (a, x) in b.x.iter().zip(&exact.x).chain(b.y.iter().zip(&exact.y)) {
                e = e.max((a - x).abs());
            }
            e
        };
        let r = err(33) / err(65);
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }

    #[test]
    fn arclength_of_corner() {
        let gr = DomainGrid::<f64>::new(2.0, 1.0, 129, 65).unwrap();
        let nodes = gr.boundary_nodes();
        let s = gr.boundary_arclength();
        assert_eq!(nodes.len(), s.len());
        let k = nodes.iter().position(|&n| n == (128, 0)).unwrap();
        assert!((s[k] - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(nodes[0], (0, 0));
        assert_eq!(*nodes.last().unwrap(), (0, 1));
    }

    #[test]
    fn weights_integrate_area_and_perimeter() {
        let gr = DomainGrid::<f64>::new(2.0, 1.0, 33, 17).unwrap();
        let one = NodeField::filled(&gr, 1.0);
        assert!((node_inner(&gr, &one, &one) - 2.0).abs() < 1e-13);
        let mut e = EdgeField::zeros(&gr);
        e.x.iter_mut().for_each(|v| *v = 1.0);
        // x-edges integrate 1 over the area
        assert!((edge_inner(&gr, &e, &e) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear() {
        let gr = g(17);
        let u = NodeField::from_fn(&gr, |p| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1]);
        let p = [0.3141, 0.777];
        let exact = 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1];
        assert!((gr.interp_node(&u, p) - exact).abs() < 1e-13);
        let b = EdgeField::from_fn(&gr, |q| [q[0] + q[1], 2.0 * q[0] - q[1]]);
        let v = gr.interp_edge(&b, p);
        assert!((v[0] - (p[0] + p[1])).abs() < 1e-13);
        assert!((v[1] - (2.0 * p[0] - p[1])).abs() < 1e-13);
    }

    fn arb_node(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n * n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn curl_grad_vanishes(vals in arb_node(16)) {
            let gr = g(16);
            let u = NodeField { nx: 16, ny: 16, data: vals };
            let c = discrete_curl(&gr, &discrete_grad(&gr, &u));
            for v in &c.data { prop_assert!(v.abs() < 1e-12 * 160.0 / gr.h); }
        }

        #[test]
        fn div_perp_grad_vanishes_inside(vals in arb_node(16)) {
            let gr = g(16);
            let u = NodeField { nx: 16, ny: 16, data: vals };
            let d = discrete_div(&gr, &discrete_perp_grad(&gr, &u));
            for j in 1..15 { for i in 1..15 {
                prop_assert!(d.at(i, j).abs() < 1e-12 / (gr.h * gr.h) * 10.0);
            }}
        }

        #[test]
        fn summation_by_parts(vals in arb_node(16), bx in prop::collection::vec(-5.0f64..5.0, 15 * 16),
                              by in prop::collection::vec(-5.0f64..5.0, 15 * 16)) {
            let gr = g(16);
            let mut u = NodeField { nx: 16, ny: 16, data: vals };
            for j in 0..16 { for i in 0..16 {
                if gr.is_boundary(i, j) { u.data[gr.node(i, j)] = 0.0; }
            }}
            let b = EdgeField { nx: 16, ny: 16, x: bx, y: by };
            let lhs = edge_inner(&gr, &discrete_grad(&gr, &u), &b) + node_inner(&gr, &u, &discrete_div(&gr, &b));
            prop_assert!(lhs.abs() < 1e-10);
        }

        #[test]
        fn operators_are_linear(a in arb_node(16), b in arb_node(16), al in -3.0f64..3.0, be in -3.0f64..3.0) {
            let gr = g(16);
            let ua = NodeField { nx: 16, ny: 16, data: a };
            let ub = NodeField { nx: 16, ny: 16, data: b };
            let mix = NodeField { nx: 16, ny: 16,
                data: ua.data.iter().zip(&ub.data).map(|(x, y)| al * x + be * y).collect() };
            let ga = discrete_perp_grad(&gr, &ua);
            let gb = discrete_perp_grad(&gr, &ub);
            let gm = discrete_perp_grad(&gr, &mix);
            for k in 0..gm.x.len() {
                prop_assert!((gm.x[k] - al * ga.x[k] - be * gb.x[k]).abs() < 1e-12 / gr.h * 100.0);
            }
            let da = discrete_div(&gr, &discrete_grad(&gr, &ua));
            let db = discrete_div(&gr, &discrete_grad(&gr, &ub));
            let dm = discrete_div(&gr, &discrete_grad(&gr, &mix));
            for k in 0..dm.data.len() {
                prop_assert!((dm.data[k] - al * da.data[k] - be * db.data[k]).abs() < 1e-12 / (gr.h * gr.h) * 100.0);
            }
        }

        #[test]
        fn cell_perp_grad_is_curl_adjoint(c in prop::collection::vec(-5.0f64..5.0, 15 * 15),
                                          bx in prop::collection::vec(-5.0f64..5.0, 15 * 16),
                                          by in prop::collection::vec(-5.0f64..5.0, 15 * 16)) {
            let gr = g(16);
            let cf = CellField { nx: 16, ny: 16, data: c };
            let b = EdgeField { nx: 16, ny: 16, x: bx, y: by };
            // <curl B, c> = -<B, ∇⊥c>
            let lhs = cell_inner(&gr, &discrete_curl(&gr, &b), &cf);
            let rhs = -edge_inner(&gr, &b, &cell_perp_grad(&gr, &cf));
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
