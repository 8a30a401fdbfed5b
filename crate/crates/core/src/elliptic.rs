//! Screened Poisson solves `(−Δ + 1) u = f` and the regularized London
//! Green's function `S_Ω(·, y)` with `−Δ S + S = log|x − y|`,
//! `S = log|x − y|` on ∂Ω.
//!
//! All problems are assembled in the symmetric weighted (finite-volume)
//! form `Σ_e ω_e (u_h − u_t)(φ_h − φ_t) + Σ_n m w_n h² u_n φ_n`, which is the
//! five-point stencil in the interior and second-order ghost elimination for
//! Neumann data on the boundary.

use thiserror::Error;

use crate::grid::{BoundaryTrace, CellField, DomainGrid, EdgeField, NodeField, Point};
use crate::scalar::Real;
use crate::sparse::{pcg, CgReport, Csr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("tolerance {0} outside (0, 1e-6]")]
    BadTolerance(f64),
    #[error("solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("source point ({x}, {y}) is closer than 4h to the boundary")]
    SourceTooClose { x: f64, y: f64 },
    #[error("boundary data has {got} samples, grid has {want} boundary nodes")]
    TraceMismatch { got: usize, want: usize },
    #[error("x coincides with the source point; G is singular there")]
    Singular,
    #[error("source index {0} not in table")]
    UnknownSource(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct HelmholtzProblem<T> {
    pub rhs: NodeField<T>,
    pub bc_kind: BcKind,
    /// Dirichlet values, or outward normal derivative for Neumann.
    pub bc_data: BoundaryTrace<T>,
    pub tolerance: T,
    pub max_iter: usize,
}

impl<T: Real> HelmholtzProblem<T> {
    pub fn new(rhs: NodeField<T>, bc_kind: BcKind, bc_data: BoundaryTrace<T>, tolerance: T) -> Self {
        Self {
            rhs,
            bc_kind,
            bc_data,
            tolerance,
            max_iter: 100_000,
        }
    }
}

/// `stiffness·K + mass·M` restricted to the free nodes, where `K` is the
/// weighted graph Laplacian and `M = diag(w_n h²)`.
#[derive(Clone, Debug)]
pub struct ScreenedOperator<T> {
    grid: DomainGrid<T>,
    fixed: Vec<bool>,
    free_index: Vec<usize>,
    free_nodes: Vec<usize>,
    stiffness: T,
    matrix: Csr<T>,
}

impl<T: Real> ScreenedOperator<T> {
    pub fn new(grid: &DomainGrid<T>, stiffness: T, mass: T, fixed: Vec<bool>) -> Self {
        let n = grid.n_nodes();
        assert_eq!(fixed.len(), n);
        let mut free_index = vec![usize::MAX; n];
        let mut free_nodes = Vec::new();
        for (k, &f) in fixed.iter().enumerate() {
            if !f {
                free_index[k] = free_nodes.len();
                free_nodes.push(k);
            }
        }
        let h2 = grid.h * grid.h;
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::with_capacity(5); free_nodes.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.node(i, j);
                if fixed[k] {
                    continue;
                }
                rows[free_index[k]].push((free_index[k], mass * grid.node_weight(i, j) * h2));
            }
        }
        let mut add_edge = |a: usize, b: usize, w: T| {
            let c = stiffness * w;
            if !fixed[a] {
                rows[free_index[a]].push((free_index[a], c));
                if !fixed[b] {
                    rows[free_index[a]].push((free_index[b], -c));
                }
            }
            if !fixed[b] {
                rows[free_index[b]].push((free_index[b], c));
                if !fixed[a] {
                    rows[free_index[b]].push((free_index[a], -c));
                }
            }
        };
        for_each_edge(grid, |a, b, w| add_edge(a, b, w));
        Self {
            grid: grid.clone(),
            fixed,
            free_index,
            free_nodes,
            stiffness,
            matrix: Csr::from_rows(rows),
        }
    }

    /// Dirichlet on every boundary node.
    pub fn dirichlet(grid: &DomainGrid<T>, stiffness: T, mass: T) -> Self {
        let mut fixed = vec![false; grid.n_nodes()];
        for (i, j) in grid.boundary_nodes() {
            fixed[grid.node(i, j)] = true;
        }
        Self::new(grid, stiffness, mass, fixed)
    }

    pub fn neumann(grid: &DomainGrid<T>, stiffness: T, mass: T) -> Self {
        Self::new(grid, stiffness, mass, vec![false; grid.n_nodes()])
    }

    /// Solves `A u = load` on free nodes with `u = fixed_values` elsewhere.
    /// `load` is the full-grid right-hand side in integrated form
    /// (`w_n h² f_n` plus boundary flux terms).
    pub fn solve(
        &self,
        load: &[T],
        fixed_values: &[T],
        initial: Option<&[T]>,
        tol: T,
        max_iter: usize,
    ) -> Result<(Vec<T>, CgReport), EllipticError> {
        let grid = &self.grid;
        let nf = self.free_nodes.len();
        let mut b: Vec<T> = self.free_nodes.iter().map(|&k| load[k]).collect();
        // move fixed neighbours to the right-hand side
        for_each_edge(grid, |a, c, w| {
            let coef = self.stiffness * w;
            if self.fixed[a] && !self.fixed[c] {
                b[self.free_index[c]] += coef * fixed_values[a];
            } else if self.fixed[c] && !self.fixed[a] {
                b[self.free_index[a]] += coef * fixed_values[c];
            }
        });
        let mut x: Vec<T> = match initial {
            Some(x0) => self.free_nodes.iter().map(|&k| x0[k]).collect(),
            None => vec![T::zero(); nf],
        };
        let rep = pcg(&self.matrix, &b, &mut x, tol, max_iter).map_err(|r| EllipticError::NotConverged {
            iterations: r.iterations,
            residual: r.rel_residual,
        })?;
        let mut out = fixed_values.to_vec();
        for (f, &k) in self.free_nodes.iter().enumerate() {
            out[k] = x[f];
        }
        Ok((out, rep))
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        &self.grid
    }
}

/// `(stiffness·K + mass·M) u` on every node, ignoring boundary conditions.
pub fn screened_apply<T: Real>(grid: &DomainGrid<T>, stiffness: T, mass: T, u: &[T]) -> Vec<T> {
    let h2 = grid.h * grid.h;
    let mut out: Vec<T> = grid.node_weights().iter().zip(u).map(|(w, x)| mass * *w * h2 * *x).collect();
    for_each_edge(grid, |a, b, w| {
        let f = stiffness * w * (u[a] - u[b]);
        out[a] += f;
        out[b] -= f;
    });
    out
}

/// Calls `f(tail_node, head_node, weight)` for every edge.
pub(crate) fn for_each_edge<T: Real>(grid: &DomainGrid<T>, mut f: impl FnMut(usize, usize, T)) {
    for j in 0..grid.ny {
        let w = grid.xedge_weight(j);
        for i in 0..grid.nx - 1 {
            f(grid.node(i, j), grid.node(i + 1, j), w);
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            f(grid.node(i, j), grid.node(i, j + 1), grid.yedge_weight(i));
        }
    }
}

fn check_tol<T: Real>(tol: T) -> Result<(), EllipticError> {
    if !(tol > T::zero() && tol <= T::lit(1e-6)) {
        return Err(EllipticError::BadTolerance(tol.to_f64_()));
    }
    Ok(())
}

/// Solves `(−Δ + 1) u = rhs` with the requested boundary condition.
pub fn solve_helmholtz<T: Real>(grid: &DomainGrid<T>, problem: &HelmholtzProblem<T>) -> Result<NodeField<T>, EllipticError> {
    check_tol(problem.tolerance)?;
    let bnodes = grid.boundary_nodes();
    if problem.bc_data.values.len() != bnodes.len() {
        return Err(EllipticError::TraceMismatch {
            got: problem.bc_data.values.len(),
            want: bnodes.len(),
        });
    }
    let h2 = grid.h * grid.h;
    let mut load: Vec<T> = Vec::with_capacity(grid.n_nodes());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            load.push(grid.node_weight(i, j) * h2 * problem.rhs.at(i, j));
        }
    }
    let mut fixed_values = vec![T::zero(); grid.n_nodes()];
    let op = match problem.bc_kind {
        BcKind::Dirichlet => {
            for (&(i, j), &g) in bnodes.iter().zip(&problem.bc_data.values) {
                fixed_values[grid.node(i, j)] = g;
            }
            ScreenedOperator::dirichlet(grid, T::one(), T::one())
        }
        BcKind::Neumann => {
            // every boundary node owns h of arclength (corners: h/2 per side)
            for (&(i, j), &g) in bnodes.iter().zip(&problem.bc_data.values) {
                load[grid.node(i, j)] += grid.h * g;
            }
            ScreenedOperator::neumann(grid, T::one(), T::one())
        }
    };
    let (u, _) = op.solve(&load, &fixed_values, None, problem.tolerance, problem.max_iter)?;
    Ok(NodeField {
        nx: grid.nx,
        ny: grid.ny,
        data: u,
    })
}

/// `∬_{[−½,½]²} log|z| dz`, the cell average of `log|z|` on a unit cell.
pub fn c0<T: Real>() -> T {
    T::half() * (T::FRAC_PI_2() - T::lit(3.0) - T::LN_2())
}

/// Antiderivative `F` with `∂x∂y F = ½ log(x² + y²)`; odd in each argument.
fn log_antiderivative<T: Real>(x: T, y: T) -> T {
    let r2 = x * x + y * y;
    if r2 == T::zero() {
        return T::zero();
    }
    let t1 = x * y * (r2.ln() - T::lit(3.0));
    let t2 = if x == T::zero() { T::zero() } else { x * x * (y / x).atan() };
    let t3 = if y == T::zero() { T::zero() } else { y * y * (x / y).atan() };
    T::half() * (t1 + t2 + t3)
}

/// Mean of `log|x − y|` over the square of side `h` centred at `x`.
pub fn cell_average_log<T: Real>(x: Point<T>, y: Point<T>, h: T) -> T {
    let hh = h * T::half();
    let (x1, x2) = (x[0] - hh - y[0], x[0] + hh - y[0]);
    let (y1, y2) = (x[1] - hh - y[1], x[1] + hh - y[1]);
    let f = log_antiderivative::<T>;
    (f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)) / (h * h)
}

/// Right-hand side `log|x − y|`, replaced by exact cell averages on nodes
/// within two spacings of the source.
fn log_rhs<T: Real>(grid: &DomainGrid<T>, y: Point<T>) -> NodeField<T> {
    let h = grid.h;
    NodeField::from_fn(grid, |p| {
        let r = ((p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2)).sqrt();
        if r <= T::two() * h {
            cell_average_log(p, y, h)
        } else {
            r.ln()
        }
    })
}

/// `S_Ω(·, y)`.
pub fn solve_s_omega<T: Real>(grid: &DomainGrid<T>, y: Point<T>, tol: T) -> Result<NodeField<T>, EllipticError> {
    let op = ScreenedOperator::dirichlet(grid, T::one(), T::one());
    solve_s_omega_with(&op, y, tol)
}

/// `S_Ω(·, y)` reusing an assembled Dirichlet operator.
pub fn solve_s_omega_with<T: Real>(op: &ScreenedOperator<T>, y: Point<T>, tol: T) -> Result<NodeField<T>, EllipticError> {
    check_tol(tol)?;
    let grid = op.grid();
    if grid.boundary_distance(y) < T::lit(4.0) * grid.h * (T::one() - T::lit(1e-9)) {
        return Err(EllipticError::SourceTooClose {
            x: y[0].to_f64_(),
            y: y[1].to_f64_(),
        });
    }
    let rhs = log_rhs(grid, y);
    let h2 = grid.h * grid.h;
    let mut load = vec![T::zero(); grid.n_nodes()];
    let mut fixed = vec![T::zero(); grid.n_nodes()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.node(i, j);
            load[k] = grid.node_weight(i, j) * h2 * rhs.data[k];
            if grid.is_boundary(i, j) {
                let p = grid.node_pos(i, j);
                fixed[k] = ((p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2)).sqrt().ln();
            }
        }
    }
    let (u, _) = op.solve(&load, &fixed, None, tol, 200_000)?;
    Ok(NodeField {
        nx: grid.nx,
        ny: grid.ny,
        data: u,
    })
}

/// Solves `(K + 1) ψ = q` on cells, where `K = −curl ∘ ∇⊥` is the cell
/// Laplacian with `ψ = 0` continued outside Ω. Returns `ψ`, the discrete
/// London field generated by the vorticity `q`.
pub fn solve_cell_london<T: Real>(grid: &DomainGrid<T>, q: &CellField<T>, tol: T) -> Result<CellField<T>, EllipticError> {
    check_tol(tol)?;
    let (cx, cy) = (grid.nx - 1, grid.ny - 1);
    let h2 = grid.h * grid.h;
    let mut rows: Vec<Vec<(usize, T)>> = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            let k = j * cx + i;
            let mut diag = h2;
            let mut row = Vec::with_capacity(5);
            let nbrs = [
                (i > 0, k.wrapping_sub(1)),
                (i + 1 < cx, k + 1),
                (j > 0, k.wrapping_sub(cx)),
                (j + 1 < cy, k + cx),
            ];
            for (inside, nk) in nbrs {
                if inside {
                    diag += T::one();
                    row.push((nk, -T::one()));
                } else {
                    // the shared edge lies on ∂Ω with weight ½
                    diag += T::two();
                }
            }
            row.push((k, diag));
            rows.push(row);
        }
    }
    let a = Csr::from_rows(rows);
    let b: Vec<T> = q.data.iter().map(|v| *v * h2).collect();
    let mut x = vec![T::zero(); b.len()];
    pcg(&a, &b, &mut x, tol, 200_000).map_err(|r| EllipticError::NotConverged {
        iterations: r.iterations,
        residual: r.rel_residual,
    })?;
    Ok(CellField {
        nx: grid.nx,
        ny: grid.ny,
        data: x,
    })
}

/// `S_Ω(·, y_k)` and its edge gradient for a list of sources.
#[derive(Clone, Debug)]
pub struct GreenTable<T> {
    pub grid: DomainGrid<T>,
    pub sources: Vec<Point<T>>,
    pub s: Vec<NodeField<T>>,
    pub grad: Vec<EdgeField<T>>,
}

impl<T: Real> GreenTable<T> {
    pub fn build(grid: &DomainGrid<T>, sources: &[Point<T>], tol: T) -> Result<Self, EllipticError> {
        let op = ScreenedOperator::dirichlet(grid, T::one(), T::one());
        let mut s = Vec::with_capacity(sources.len());
        let mut grad = Vec::with_capacity(sources.len());
        for &y in sources {
            let field = solve_s_omega_with(&op, y, tol)?;
            grad.push(crate::grid::discrete_grad(grid, &field));
            s.push(field);
        }
        Ok(Self {
            grid: grid.clone(),
            sources: sources.to_vec(),
            s,
            grad,
        })
    }

    /// Assembles a table from stored fields (gradients are recomputed).
    pub fn from_fields(grid: &DomainGrid<T>, sources: Vec<Point<T>>, s: Vec<NodeField<T>>) -> Self {
        let grad = s.iter().map(|f| crate::grid::discrete_grad(grid, f)).collect();
        Self {
            grid: grid.clone(),
            sources,
            s,
            grad,
        }
    }

    /// `S_Ω(x, y_k)` by bilinear interpolation.
    pub fn s_at(&self, k: usize, x: Point<T>) -> T {
        self.grid.interp_node(&self.s[k], x)
    }

    /// `∇_x S_Ω(x, y_k)` by bilinear interpolation of edge differences.
    pub fn grad_at(&self, k: usize, x: Point<T>) -> Point<T> {
        self.grid.interp_edge(&self.grad[k], x)
    }
}

/// `G(x, y_k) = S_Ω(x, y_k) − log|x − y_k|`.
pub fn green_g<T: Real>(x: Point<T>, k: usize, table: &GreenTable<T>) -> Result<T, EllipticError> {
    let y = *table.sources.get(k).ok_or(EllipticError::UnknownSource(k))?;
    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    if r == T::zero() {
        return Err(EllipticError::Singular);
    }
    Ok(table.s_at(k, x) - r.ln())
}
