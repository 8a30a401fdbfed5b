//! Time stepping of the modified Ginzburg–Landau system for `(v, B)` in the
//! gauge where the electric potential equals `f`:
//!
//! ```text
//! ∂ₜv = Δ_B v + v(1 − |v|²)/ε² + 2i ∇_B v·Z − v|Z|²
//! ∂ₜB = ∇⊥h′ + (iv, ∇_B v) + (|v|² − 1) Z,        h′ = curl B
//! ```
//!
//! Covariant differences use link phases `U_e = exp(−i h B_e)`:
//! `D_e v = (v_head U_e − v_tail)/h`. The right-hand side is the weighted
//! gradient of the discrete modified energy plus the discrete forcing, so
//! `∇_B v·ν = 0` and `h′ = 0` on ∂Ω arise as natural boundary conditions.

use thiserror::Error;

use crate::applied::PrecomputedFields;
use crate::elliptic::{solve_cell_london, EllipticError, ScreenedOperator};
use crate::grid::{cell_perp_grad, discrete_curl, discrete_div, discrete_grad, DomainGrid, EdgeField, NodeField, Point};
use crate::scalar::{cis, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdglError {
    #[error("time step {dt:e} exceeds the explicit stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("dt_factor {0} outside (0, 0.5]")]
    BadDtFactor(f64),
    #[error("epsilon {0} must lie in (0, 0.5)")]
    BadEpsilon(f64),
    #[error("core under-resolved: h = {h} > epsilon/4 = {limit}")]
    CoreResolution { h: f64, limit: f64 },
    #[error("vortex {index} at distance {dist} from the boundary (< 4 epsilon = {min})")]
    NearBoundary { index: usize, dist: f64, min: f64 },
    #[error("vortices {a} and {b} are {dist} apart (< 8 epsilon = {min})")]
    TooClose { a: usize, b: usize, dist: f64, min: f64 },
    #[error("vortex {index} has degree {degree}; only +1 and -1 are supported")]
    BadDegree { index: usize, degree: i32 },
    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: u64, t: f64 },
    #[error("implicit solve did not converge at step {step}")]
    ImplicitSolve { step: u64 },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub v: NodeField<C<T>>,
    pub b: EdgeField<T>,
    /// Original (unaccelerated) time.
    pub t: T,
    pub step: u64,
}

impl<T: Real> State<T> {
    /// `v ≡ 1`, `B ≡ 0`.
    pub fn vacuum(grid: &DomainGrid<T>) -> Self {
        Self {
            v: NodeField::filled(grid, C::new(T::one(), T::zero())),
            b: EdgeField::zeros(grid),
            t: T::zero(),
            step: 0,
        }
    }

    pub fn max_modulus(&self) -> T {
        self.v.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.v.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && self.b.all_finite()
    }

    /// `h′ = curl B`.
    pub fn induced_field(&self, grid: &DomainGrid<T>) -> crate::grid::CellField<T> {
        discrete_curl(grid, &self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig<T> {
    pub epsilon: T,
    pub dt: T,
    pub scheme: Scheme,
    pub dt_factor: T,
    pub t_end: T,
    pub stride: usize,
}

impl<T: Real> StepperConfig<T> {
    /// Default step `dt_factor · min(ε², h²/4)`.
    pub fn new(grid: &DomainGrid<T>, epsilon: T, dt_factor: T, scheme: Scheme, t_end: T, stride: usize) -> Self {
        Self {
            epsilon,
            dt: dt_factor * explicit_limit(grid, epsilon),
            scheme,
            dt_factor,
            t_end,
            stride,
        }
    }

    pub fn validate(&self, grid: &DomainGrid<T>) -> Result<(), TdglError> {
        if !(self.epsilon > T::zero() && self.epsilon < T::half()) {
            return Err(TdglError::BadEpsilon(self.epsilon.to_f64_()));
        }
        if !(self.dt_factor > T::zero() && self.dt_factor <= T::half()) {
            return Err(TdglError::BadDtFactor(self.dt_factor.to_f64_()));
        }
        let limit = self.dt_factor * explicit_limit(grid, self.epsilon);
        if self.scheme == Scheme::ExplicitEuler && self.dt > limit * (T::one() + T::lit(1e-12)) {
            return Err(TdglError::Cfl {
                dt: self.dt.to_f64_(),
                limit: limit.to_f64_(),
            });
        }
        if !(self.dt > T::zero()) {
            return Err(TdglError::Cfl {
                dt: self.dt.to_f64_(),
                limit: limit.to_f64_(),
            });
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).ceil().to_u64().unwrap_or(0)
    }
}

/// `min(ε², h²/4)`.
pub fn explicit_limit<T: Real>(grid: &DomainGrid<T>, epsilon: T) -> T {
    (epsilon * epsilon).min(grid.h * grid.h * T::lit(0.25))
}

/// Per-step norms gathered while stepping (evaluated at the step's start).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats<T> {
    /// `Σ w h² |∂ₜv|²`.
    pub dv_sq: T,
    /// `Σ ω h² |∂ₜB|²`.
    pub db_sq: T,
    /// `‖(|v|² − 1) f‖₂`.
    pub f_term: T,
}

/// Owns the work buffers for repeated steps on one grid.
pub struct Stepper<T: Real> {
    pub grid: DomainGrid<T>,
    pub pre: PrecomputedFields<T>,
    pub cfg: StepperConfig<T>,
    inv_w: Vec<T>,
    w: Vec<T>,
    z2: Vec<T>,
    acc: Vec<C<T>>,
    curl: Vec<T>,
    pub dv: Vec<C<T>>,
    pub db: EdgeField<T>,
}

impl<T: Real> Stepper<T> {
    pub fn new(grid: &DomainGrid<T>, pre: &PrecomputedFields<T>, cfg: &StepperConfig<T>) -> Result<Self, TdglError> {
        cfg.validate(grid)?;
        let w = grid.node_weights();
        let inv_w = w.iter().map(|x| T::one() / *x).collect();
        Ok(Self {
            grid: grid.clone(),
            pre: pre.clone(),
            cfg: cfg.clone(),
            z2: node_z_squared(grid, &pre.z),
            w,
            inv_w,
            acc: vec![C::new(T::zero(), T::zero()); grid.n_nodes()],
            curl: vec![T::zero(); grid.n_cells()],
            dv: vec![C::new(T::zero(), T::zero()); grid.n_nodes()],
            db: EdgeField::zeros(grid),
        })
    }

    /// Evaluates `(∂ₜv, ∂ₜB)` into `self.dv`, `self.db`.
    pub fn eval_rhs(&mut self, v: &[C<T>], b: &EdgeField<T>) {
        let grid = &self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let h = grid.h;
        let inv_h = T::one() / h;
        let z = &self.pre.z;
        let zero = C::new(T::zero(), T::zero());
        self.acc.iter_mut().for_each(|a| *a = zero);
        let acc = &mut self.acc;
        let db = &mut self.db;

        let mut edge = |t: usize, hd: usize, bval: T, zval: T, w: T| -> T {
            let u = cis(-h * bval);
            let vh_u = v[hd] * u;
            let prod = v[t].conj() * vh_u;
            let d = (vh_u - v[t]) * inv_h;
            acc[t] += d * C::new(inv_h, zval) * w;
            acc[hd] += u.conj() * d * C::new(-inv_h, zval) * w;
            prod.im * inv_h + (prod.re - T::one()) * zval
        };
        for j in 0..ny {
            let w = grid.xedge_weight(j);
            for i in 0..nx - 1 {
                let k = j * (nx - 1) + i;
                let t = j * nx + i;
                db.x[k] = edge(t, t + 1, b.x[k], z.x[k], w);
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                let t = j * nx + i;
                db.y[k] = edge(t, t + nx, b.y[k], z.y[k], grid.yedge_weight(i));
            }
        }
        // h′ per cell, then ∇⊥h′ on edges
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                self.curl[j * (nx - 1) + i] = (b.x[j * (nx - 1) + i] + b.y[j * nx + i + 1]
                    - b.x[(j + 1) * (nx - 1) + i]
                    - b.y[j * nx + i])
                    * inv_h;
            }
        }
        let curl = &self.curl;
        for j in 0..ny {
            let s = inv_h / grid.xedge_weight(j);
            for i in 0..nx - 1 {
                let above = if j < ny - 1 { curl[j * (nx - 1) + i] } else { T::zero() };
                let below = if j > 0 { curl[(j - 1) * (nx - 1) + i] } else { T::zero() };
                db.x[j * (nx - 1) + i] -= (above - below) * s;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let s = inv_h / grid.yedge_weight(i);
                let right = if i < nx - 1 { curl[j * (nx - 1) + i] } else { T::zero() };
                let left = if i > 0 { curl[j * (nx - 1) + i - 1] } else { T::zero() };
                db.y[j * nx + i] += (right - left) * s;
            }
        }
        let inv_eps2 = T::one() / (self.cfg.epsilon * self.cfg.epsilon);
        for n in 0..v.len() {
            let vn = v[n];
            let m = T::one() - vn.norm_sqr();
            self.dv[n] = acc[n] * self.inv_w[n] + vn * (m * inv_eps2 - self.z2[n]);
        }
    }

    /// Advances `state` by one step in place.
    pub fn step(&mut self, state: &mut State<T>) -> Result<StepStats<T>, TdglError> {
        let dt = self.cfg.dt;
        let v0 = std::mem::take(&mut state.v.data);
        self.eval_rhs(&v0, &state.b);
        let h2 = self.grid.h * self.grid.h;
        let mut stats = StepStats {
            dv_sq: T::zero(),
            db_sq: T::zero(),
            f_term: T::zero(),
        };
        let mut vnew = v0.clone();
        match self.cfg.scheme {
            Scheme::ExplicitEuler => {
                for n in 0..vnew.len() {
                    vnew[n] += self.dv[n] * dt;
                }
                state.b.axpy(dt, &self.db);
            }
            Scheme::SemiImplicit => {
                self.semi_implicit(&v0, &mut vnew, &mut state.b, state.step)?;
            }
        }
        let mut fsq = T::zero();
        let mut finite = T::zero();
        for n in 0..vnew.len() {
            let d = (vnew[n] - v0[n]) / dt;
            stats.dv_sq += self.w[n] * d.norm_sqr();
            let f = (v0[n].norm_sqr() - T::one()) * self.pre.f.data[n];
            fsq += self.w[n] * f * f;
            finite += vnew[n].norm_sqr();
        }
        stats.dv_sq *= h2;
        stats.f_term = (fsq * h2).sqrt();
        stats.db_sq = edge_norm_sq(&self.grid, &self.db);
        state.v.data = vnew;
        state.t += dt;
        state.step += 1;
        if !finite.is_finite() || !state.b.all_finite() {
            return Err(TdglError::NonFinite {
                step: state.step,
                t: state.t.to_f64_(),
            });
        }
        Ok(stats)
    }

    /// Linear covariant Laplacian and ∇⊥h′ implicit (links frozen at the
    /// step start); reaction, forcing and supercurrent explicit.
    fn semi_implicit(&mut self, v0: &[C<T>], vnew: &mut [C<T>], b: &mut EdgeField<T>, step: u64) -> Result<(), TdglError> {
        let grid = self.grid.clone();
        let dt = self.cfg.dt;
        let h = grid.h;
        // explicit parts: full rhs minus the implicit linear operators
        let lap = covariant_laplacian(&grid, v0, b);
        let rhs_v: Vec<C<T>> = (0..v0.len())
            .map(|n| v0[n] + (self.dv[n] - lap[n]) * dt)
            .collect();
        let links = Links::new(&grid, b);
        let apply_v = |x: &[C<T>], y: &mut [C<T>]| {
            let l = links.laplacian(&grid, x);
            for n in 0..x.len() {
                y[n] = x[n] - l[n] * dt;
            }
        };
        let w = self.w.clone();
        let ok_v = weighted_cg(&apply_v, &w, &rhs_v, vnew, T::lit(1e-11), 2000);
        let curl_part = cell_perp_grad(&grid, &discrete_curl(&grid, b));
        let mut rhs_b = b.clone();
        for k in 0..b.x.len() {
            rhs_b.x[k] += dt * (self.db.x[k] - curl_part.x[k]);
        }
        for k in 0..b.y.len() {
            rhs_b.y[k] += dt * (self.db.y[k] - curl_part.y[k]);
        }
        let ex = flatten(&rhs_b);
        let mut xb = flatten(b);
        let ew = edge_weights_flat(&grid);
        let apply_b = |x: &[T], y: &mut [T]| {
            let f = unflatten(&grid, x);
            let c = cell_perp_grad(&grid, &discrete_curl(&grid, &f));
            let cf = flatten(&c);
            for k in 0..x.len() {
                y[k] = x[k] - dt * cf[k];
            }
        };
        let ok_b = weighted_cg(&apply_b, &ew, &ex, &mut xb, T::lit(1e-11), 2000);
        let _ = h;
        if !(ok_v && ok_b) {
            return Err(TdglError::ImplicitSolve { step });
        }
        let nb = unflatten(&grid, &xb);
        // report the effective rates for the diagnostics
        for k in 0..b.x.len() {
            self.db.x[k] = (nb.x[k] - b.x[k]) / dt;
        }
        for k in 0..b.y.len() {
            self.db.y[k] = (nb.y[k] - b.y[k]) / dt;
        }
        *b = nb;
        Ok(())
    }
}

/// Link phases frozen for an implicit solve.
struct Links<T> {
    x: Vec<C<T>>,
    y: Vec<C<T>>,
}

impl<T: Real> Links<T> {
    fn new(grid: &DomainGrid<T>, b: &EdgeField<T>) -> Self {
        Self {
            x: b.x.iter().map(|v| cis(-grid.h * *v)).collect(),
            y: b.y.iter().map(|v| cis(-grid.h * *v)).collect(),
        }
    }

    /// Weighted covariant Laplacian `Δ_B v`.
    fn laplacian(&self, grid: &DomainGrid<T>, v: &[C<T>]) -> Vec<C<T>> {
        let (nx, ny) = (grid.nx, grid.ny);
        let h = grid.h;
        let inv_h2 = T::one() / (h * h);
        let mut acc = vec![C::new(T::zero(), T::zero()); v.len()];
        for j in 0..ny {
            let w = grid.xedge_weight(j) * inv_h2;
            for i in 0..nx - 1 {
                let k = j * (nx - 1) + i;
                let t = j * nx + i;
                let u = self.x[k];
                let d = v[t + 1] * u - v[t];
                acc[t] += d * w;
                acc[t + 1] -= u.conj() * d * w;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let w = grid.yedge_weight(i) * inv_h2;
                let k = j * nx + i;
                let u = self.y[k];
                let d = v[k + nx] * u - v[k];
                acc[k] += d * w;
                acc[k + nx] -= u.conj() * d * w;
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                acc[j * nx + i] = acc[j * nx + i] / grid.node_weight(i, j);
            }
        }
        acc
    }
}

/// Weighted covariant Laplacian `Δ_B v` (natural boundary condition).
pub fn covariant_laplacian<T: Real>(grid: &DomainGrid<T>, v: &[C<T>], b: &EdgeField<T>) -> Vec<C<T>> {
    Links::new(grid, b).laplacian(grid, v)
}

trait Elem<T: Real>: Copy {
    fn rdot(self, o: Self) -> T;
    fn scale(self, a: T) -> Self;
    fn add(self, o: Self) -> Self;
}

impl<T: Real> Elem<T> for T {
    fn rdot(self, o: Self) -> T {
        self * o
    }
    fn scale(self, a: T) -> Self {
        self * a
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
}

impl<T: Real> Elem<T> for C<T> {
    fn rdot(self, o: Self) -> T {
        self.re * o.re + self.im * o.im
    }
    fn scale(self, a: T) -> Self {
        self * a
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
}

/// Conjugate gradients for an operator self-adjoint in the inner product
/// `Σ w_k Re(a_k conj b_k)`.
fn weighted_cg<T: Real, E: Elem<T>>(apply: &dyn Fn(&[E], &mut [E]), w: &[T], b: &[E], x: &mut [E], tol: T, max_iter: usize) -> bool {
    let n = b.len();
    let dot = |a: &[E], c: &[E]| -> T { (0..n).map(|k| w[k] * a[k].rdot(c[k])).sum() };
    let mut ax = x.to_vec();
    apply(x, &mut ax);
    let mut r: Vec<E> = (0..n).map(|k| b[k].add(ax[k].scale(-T::one()))).collect();
    let bn = dot(b, b).sqrt();
    if bn == T::zero() {
        return true;
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut q = ax;
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bn {
            return true;
        }
        apply(&p, &mut q);
        let alpha = rr / dot(&p, &q);
        for k in 0..n {
            x[k] = x[k].add(p[k].scale(alpha));
            r[k] = r[k].add(q[k].scale(-alpha));
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k].add(p[k].scale(beta));
        }
    }
    rr.sqrt() <= tol * bn
}

fn flatten<T: Real>(b: &EdgeField<T>) -> Vec<T> {
    b.x.iter().chain(b.y.iter()).copied().collect()
}

fn unflatten<T: Real>(grid: &DomainGrid<T>, x: &[T]) -> EdgeField<T> {
    let nxe = grid.n_xedges();
    EdgeField {
        nx: grid.nx,
        ny: grid.ny,
        x: x[..nxe].to_vec(),
        y: x[nxe..].to_vec(),
    }
}

fn edge_weights_flat<T: Real>(grid: &DomainGrid<T>) -> Vec<T> {
    let mut w = Vec::with_capacity(grid.n_xedges() + grid.n_yedges());
    for j in 0..grid.ny {
        for _ in 0..grid.nx - 1 {
            w.push(grid.xedge_weight(j));
        }
    }
    for _ in 0..grid.ny - 1 {
        for i in 0..grid.nx {
            w.push(grid.yedge_weight(i));
        }
    }
    w
}

/// `Σ ω h² B²`.
pub fn edge_norm_sq<T: Real>(grid: &DomainGrid<T>, b: &EdgeField<T>) -> T {
    crate::grid::edge_inner(grid, b, b)
}

/// Nodal `|Z|²` consistent with the edge quadrature:
/// `Z²_n = (1/w_n) Σ_{e∋n} ω_e Z_e² / 2`.
pub fn node_z_squared<T: Real>(grid: &DomainGrid<T>, z: &EdgeField<T>) -> Vec<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut acc = vec![T::zero(); grid.n_nodes()];
    for j in 0..ny {
        let w = grid.xedge_weight(j) * T::half();
        for i in 0..nx - 1 {
            let q = w * z.x[j * (nx - 1) + i].powi(2);
            acc[j * nx + i] += q;
            acc[j * nx + i + 1] += q;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let q = grid.yedge_weight(i) * T::half() * z.y[j * nx + i].powi(2);
            acc[j * nx + i] += q;
            acc[(j + 1) * nx + i] += q;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            acc[j * nx + i] /= grid.node_weight(i, j);
        }
    }
    acc
}

/// One step, returning the new state.
pub fn step<T: Real>(grid: &DomainGrid<T>, state: &State<T>, pre: &PrecomputedFields<T>, cfg: &StepperConfig<T>) -> Result<State<T>, TdglError> {
    let mut s = Stepper::new(grid, pre, cfg)?;
    let mut out = state.clone();
    s.step(&mut out)?;
    Ok(out)
}

/// `v ← v e^{iξ}`, `B ← B + ∇ξ`.
pub fn apply_gauge<T: Real>(grid: &DomainGrid<T>, state: &State<T>, xi: &NodeField<T>) -> State<T> {
    let g = discrete_grad(grid, xi);
    let mut out = state.clone();
    for (v, x) in out.v.data.iter_mut().zip(&xi.data) {
        *v = *v * cis(*x);
    }
    out.b.axpy(T::one(), &g);
    out
}

/// `u = v e^{if}`, `A = B + h_ex ∇⊥h₀`.
pub fn recover_physical<T: Real>(state: &State<T>, pre: &PrecomputedFields<T>) -> (NodeField<C<T>>, EdgeField<T>) {
    let mut u = state.v.clone();
    for (z, f) in u.data.iter_mut().zip(&pre.f.data) {
        *z = *z * cis(*f);
    }
    let mut a = state.b.clone();
    a.axpy(pre.h_ex, &pre.perp_h0);
    (u, a)
}

/// Gauge-transforms to `div B = 0` (weighted, all nodes, hence zero normal
/// flux) with one pure-Neumann Poisson solve.
pub fn coulomb_gauge<T: Real>(grid: &DomainGrid<T>, state: &State<T>, tol: T) -> Result<State<T>, TdglError> {
    let div = discrete_div(grid, &state.b);
    let h2 = grid.h * grid.h;
    let mut load = vec![T::zero(); grid.n_nodes()];
    let mut mean = T::zero();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.node(i, j);
            load[k] = grid.node_weight(i, j) * h2 * div.data[k];
            mean += load[k];
        }
    }
    // exact compatibility up to roundoff; remove the residue anyway
    let total_w: T = grid.node_weights().into_iter().sum();
    let w = grid.node_weights();
    for k in 0..load.len() {
        load[k] -= mean * w[k] / total_w;
    }
    let mut fixed = vec![false; grid.n_nodes()];
    fixed[0] = true;
    let op = ScreenedOperator::new(grid, T::one(), T::zero(), fixed);
    let (eta, _) = op.solve(&load, &vec![T::zero(); grid.n_nodes()], None, tol, 400_000)?;
    let eta = NodeField {
        nx: grid.nx,
        ny: grid.ny,
        data: eta,
    };
    Ok(apply_gauge(grid, state, &eta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoreProfile {
    /// `ρ(r) = tanh(r/√2)` cores with the London vector potential.
    Tanh,
    /// Unit modulus, no core structure, `B = 0` (crude data).
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VortexSpec<T> {
    pub pos: Point<T>,
    pub degree: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitSpec<T> {
    pub vortices: Vec<VortexSpec<T>>,
    pub core_profile: CoreProfile,
    pub relax_steps: usize,
    pub c0: T,
}

fn validate_init<T: Real>(spec: &InitSpec<T>, grid: &DomainGrid<T>, epsilon: T) -> Result<(), TdglError> {
    let tol = T::one() + T::lit(1e-9);
    if grid.h > epsilon * T::lit(0.25) * tol {
        return Err(TdglError::CoreResolution {
            h: grid.h.to_f64_(),
            limit: (epsilon * T::lit(0.25)).to_f64_(),
        });
    }
    for (k, a) in spec.vortices.iter().enumerate() {
        if a.degree != 1 && a.degree != -1 {
            return Err(TdglError::BadDegree {
                index: k,
                degree: a.degree,
            });
        }
        let d = grid.boundary_distance(a.pos);
        if d * tol < T::lit(4.0) * epsilon {
            return Err(TdglError::NearBoundary {
                index: k,
                dist: d.to_f64_(),
                min: (T::lit(4.0) * epsilon).to_f64_(),
            });
        }
        for (l, b) in spec.vortices.iter().enumerate().skip(k + 1) {
            let dist = ((a.pos[0] - b.pos[0]).powi(2) + (a.pos[1] - b.pos[1]).powi(2)).sqrt();
            if dist * tol < T::lit(8.0) * epsilon {
                return Err(TdglError::TooClose {
                    a: k,
                    b: l,
                    dist: dist.to_f64_(),
                    min: (T::lit(8.0) * epsilon).to_f64_(),
                });
            }
        }
    }
    Ok(())
}

/// Vortex ansatz `Π ρ(|x − aᵢ|/ε) e^{i dᵢ θᵢ}` without any field.
pub fn ansatz<T: Real>(grid: &DomainGrid<T>, vortices: &[VortexSpec<T>], epsilon: T, profile: CoreProfile) -> NodeField<C<T>> {
    let sqrt2 = T::SQRT_2();
    NodeField::from_fn(grid, |p| {
        let mut z = C::new(T::one(), T::zero());
        for a in vortices {
            let dx = p[0] - a.pos[0];
            let dy = p[1] - a.pos[1];
            let r = (dx * dx + dy * dy).sqrt();
            let th = dy.atan2(dx) * T::from_i32(a.degree).unwrap();
            let rho = match profile {
                CoreProfile::Tanh => (r / epsilon / sqrt2).tanh(),
                CoreProfile::Unit => T::one(),
            };
            z = z * cis(th) * rho;
        }
        z
    })
}

/// Builds well-prepared initial data: ansatz, London vector potential,
/// Coulomb projection, `relax_steps` current-free steps, projection again.
pub fn init_well_prepared<T: Real>(spec: &InitSpec<T>, pre: &PrecomputedFields<T>, grid: &DomainGrid<T>, cfg: &StepperConfig<T>) -> Result<State<T>, TdglError> {
    validate_init(spec, grid, cfg.epsilon)?;
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0)).min(T::lit(1e-6));
    let v = ansatz(grid, &spec.vortices, cfg.epsilon, spec.core_profile);
    let mut state = State {
        v,
        b: EdgeField::zeros(grid),
        t: T::zero(),
        step: 0,
    };
    if spec.core_profile == CoreProfile::Tanh && !spec.vortices.is_empty() {
        state.b = london_potential(grid, &state.v, tol)?;
        state = coulomb_gauge(grid, &state, tol)?;
    }
    if spec.relax_steps > 0 {
        let relax_cfg = StepperConfig {
            scheme: Scheme::ExplicitEuler,
            dt: cfg.dt_factor * explicit_limit(grid, cfg.epsilon),
            ..cfg.clone()
        };
        let mut stepper = Stepper::new(grid, &pre.current_free(), &relax_cfg)?;
        for _ in 0..spec.relax_steps {
            stepper.step(&mut state)?;
        }
        state = coulomb_gauge(grid, &state, tol)?;
    }
    state.t = T::zero();
    state.step = 0;
    Ok(state)
}

/// Vector potential whose link phases cancel the phase of `v` far from the
/// cores and whose curl is the discrete London field of the vortices:
/// `B = B_φ + ∇⊥ψ`, `B_φ` the wrapped phase gradient, `(K + 1)ψ = curl B_φ`.
pub fn london_potential<T: Real>(grid: &DomainGrid<T>, v: &NodeField<C<T>>, tol: T) -> Result<EdgeField<T>, TdglError> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut bphi = EdgeField::zeros(grid);
    let phase = |a: C<T>, b: C<T>| -> T { (b * a.conj()).arg() / grid.h };
    for j in 0..ny {
        for i in 0..nx - 1 {
            bphi.x[grid.xedge(i, j)] = phase(v.at(i, j), v.at(i + 1, j));
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            bphi.y[grid.yedge(i, j)] = phase(v.at(i, j), v.at(i, j + 1));
        }
    }
    let q = discrete_curl(grid, &bphi);
    let psi = solve_cell_london(grid, &q, tol)?;
    let mut b = bphi;
    b.axpy(T::one(), &cell_perp_grad(grid, &psi));
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applied::{precompute, DriveSpec, FourierSeries};
    use crate::grid::cell_inner;

    fn g(n: usize) -> DomainGrid<f64> {
        DomainGrid::square(1.0, n).unwrap()
    }

    fn cfg(gr: &DomainGrid<f64>, eps: f64) -> StepperConfig<f64> {
        StepperConfig::new(gr, eps, 0.2, Scheme::ExplicitEuler, 1.0, 50)
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let gr = g(33);
        let pre = PrecomputedFields::zero(&gr);
        let s0 = State::vacuum(&gr);
        let s1 = step(&gr, &s0, &pre, &cfg(&gr, 0.1)).unwrap();
        for (a, b) in s0.v.data.iter().zip(&s1.v.data) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(s1.b.max_abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let gr = g(33);
        let mut c = cfg(&gr, 0.1);
        assert!(c.validate(&gr).is_ok());
        c.dt *= 1.5;
        assert!(matches!(c.validate(&gr), Err(TdglError::Cfl { .. })));
        c.scheme = Scheme::SemiImplicit;
        assert!(c.validate(&gr).is_ok());
        c.dt_factor = 0.7;
        assert!(matches!(c.validate(&gr), Err(TdglError::BadDtFactor(_))));
    }

    #[test]
    fn gauge_round_trip() {
        let gr = g(33);
        let mut s = State::vacuum(&gr);
        s.v = ansatz(&gr, &[VortexSpec { pos: [0.4, 0.55], degree: 1 }], 0.1, CoreProfile::Tanh);
        let xi = NodeField::from_fn(&gr, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
        let back = apply_gauge(&gr, &apply_gauge(&gr, &s, &xi), &xi.map(|x| -x));
        for (a, b) in s.v.data.iter().zip(&back.v.data) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(back.b.max_abs() < 1e-12);
    }

    #[test]
    fn recover_physical_identity_without_drive() {
        let gr = g(33);
        let pre = PrecomputedFields::zero(&gr);
        let mut s = State::vacuum(&gr);
        s.v = ansatz(&gr, &[VortexSpec { pos: [0.5, 0.5], degree: -1 }], 0.1, CoreProfile::Tanh);
        let (u, a) = recover_physical(&s, &pre);
        assert_eq!(u, s.v);
        assert_eq!(a, s.b);
    }

    #[test]
    fn recover_physical_preserves_modulus() {
        let gr = g(33);
        let drive = DriveSpec {
            j_ex: 1.0,
            h_ex: 1.0,
            j_nu: FourierSeries::new(vec![0.0, 1.0]),
            ..DriveSpec::none()
        };
        let pre = precompute(&drive, &gr, 1e-12).unwrap();
        let mut s = State::vacuum(&gr);
        s.v = ansatz(&gr, &[VortexSpec { pos: [0.5, 0.5], degree: 1 }], 0.1, CoreProfile::Tanh);
        let (u, _) = recover_physical(&s, &pre);
        for (a, b) in u.data.iter().zip(&s.v.data) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn coulomb_gauge_removes_divergence() {
        let gr = g(33);
        let mut s = State::vacuum(&gr);
        s.b = EdgeField::from_fn(&gr, |p| [p[0] * p[1] + 0.3, (2.0 * p[0]).sin()]);
        let c = coulomb_gauge(&gr, &s, 1e-12).unwrap();
        let d = discrete_div(&gr, &c.b);
        assert!(d.data.iter().all(|x| x.abs() < 1e-8), "{:?}", d.data.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        // curl is gauge invariant
        let c0 = discrete_curl(&gr, &s.b);
        let c1 = discrete_curl(&gr, &c.b);
        for (a, b) in c0.data.iter().zip(&c1.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn init_rejects_bad_configurations() {
        let gr = g(65);
        let pre = PrecomputedFields::zero(&gr);
        let c = cfg(&gr, 0.1);
        let near = InitSpec {
            vortices: vec![VortexSpec { pos: [0.2, 0.5], degree: 1 }],
            core_profile: CoreProfile::Tanh,
            relax_steps: 0,
            c0: 5.0,
        };
        assert!(matches!(init_well_prepared(&near, &pre, &gr, &c), Err(TdglError::NearBoundary { .. })));
        let close = InitSpec {
            vortices: vec![VortexSpec { pos: [0.45, 0.5], degree: 1 }, VortexSpec { pos: [0.55, 0.5], degree: 1 }],
            ..near.clone()
        };
        assert!(matches!(init_well_prepared(&close, &pre, &gr, &c), Err(TdglError::TooClose { .. })));
        let deg = InitSpec {
            vortices: vec![VortexSpec { pos: [0.5, 0.5], degree: 2 }],
            ..near.clone()
        };
        assert!(matches!(init_well_prepared(&deg, &pre, &gr, &c), Err(TdglError::BadDegree { .. })));
        let coarse = g(33);
        assert!(matches!(
            init_well_prepared(&deg, &pre, &coarse, &cfg(&coarse, 0.1)),
            Err(TdglError::CoreResolution { .. })
        ));
    }

    #[test]
    fn init_gives_divergence_free_field_with_london_curl() {
        let gr = g(81);
        let pre = PrecomputedFields::zero(&gr);
        let c = cfg(&gr, 0.1);
        let spec = InitSpec {
            vortices: vec![VortexSpec { pos: [0.5, 0.5], degree: 1 }],
            core_profile: CoreProfile::Tanh,
            relax_steps: 20,
            c0: 5.0,
        };
        let s = init_well_prepared(&spec, &pre, &gr, &c).unwrap();
        let d = discrete_div(&gr, &s.b);
        assert!(d.data.iter().all(|x| x.abs() < 1e-6));
        let k = gr.nearest_node([0.5, 0.5]);
        assert!(s.v.at(k.0, k.1).norm() < 0.1);
        // with λ = 1 on the unit square most of the 2π flux is lost to ∂Ω:
        // the Dirichlet London field has total flux 2π·φ(centre) ≈ 0.46,
        // φ the torsion function
        let hp = s.induced_field(&gr);
        let flux = cell_inner(&gr, &hp, &crate::grid::CellField { nx: 81, ny: 81, data: vec![1.0; 80 * 80] });
        assert!(flux > 0.35 && flux < 0.55, "{flux}");
    }

    #[test]
    fn semi_implicit_agrees_with_explicit_on_short_runs() {
        let gr = g(41);
        let pre = PrecomputedFields::zero(&gr);
        let eps = 0.1;
        let spec = InitSpec {
            vortices: vec![VortexSpec { pos: [0.45, 0.5], degree: 1 }],
            core_profile: CoreProfile::Tanh,
            relax_steps: 0,
            c0: 5.0,
        };
        let ce = cfg(&gr, eps);
        let s0 = init_well_prepared(&spec, &pre, &gr, &ce).unwrap();
        let mut a = s0.clone();
        let mut st = Stepper::new(&gr, &pre, &ce).unwrap();
        for _ in 0..40 {
            st.step(&mut a).unwrap();
        }
        let mut ci = ce.clone();
        ci.scheme = Scheme::SemiImplicit;
        let mut b = s0.clone();
        let mut si = Stepper::new(&gr, &pre, &ci).unwrap();
        for _ in 0..40 {
            si.step(&mut b).unwrap();
        }
        let diff = a.v.data.iter().zip(&b.v.data).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        let change = a.v.data.iter().zip(&s0.v.data).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        assert!(diff < 0.2 * change, "{diff} vs {change}");
    }
}
