//! Reduced vortex dynamics: the renormalized energy `W_d`, its gradient, the
//! unified limiting law
//!
//! ```text
//! ȧᵢ = −(c_W/π) ∇_{aᵢ}W − 2dᵢ [α∇⊥f₁ + β(∇h₀ − ∇⊥f₀)](aᵢ)
//! ```
//!
//! integrated with fixed-step RK4, its conserved quantities, the London
//! field of a vortex configuration and the limiting induced-field flow.

use thiserror::Error;

use crate::applied::{PrecomputedFields, RegimeInfo};
use crate::elliptic::{cell_average_log, screened_apply, EllipticError, GreenTable, ScreenedOperator};
use crate::grid::{DomainGrid, NodeField, Point};
use crate::scalar::Real;
use crate::spline::Spline2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducedError {
    #[error("vortices {0} and {1} coincide")]
    Coincident(usize, usize),
    #[error("vortex {index} at {x}, {y} is outside the interpolation margin")]
    OutsideMargin { index: usize, x: f64, y: f64 },
    #[error("positions and degrees differ in length")]
    LengthMismatch,
    #[error("the W term needs a Green table")]
    MissingGreen,
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState<T> {
    pub positions: Vec<Point<T>>,
    pub degrees: Vec<i32>,
    /// Accelerated time.
    pub tau: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawCoefficients<T> {
    pub c_w: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> LawCoefficients<T> {
    /// Regime 1 keeps the interaction term; the others drop it.
    pub fn from_regime(info: &RegimeInfo<T>) -> Self {
        if info.regime == 1 {
            Self {
                c_w: T::one(),
                alpha: T::one(),
                beta: T::one(),
            }
        } else {
            Self {
                c_w: T::zero(),
                alpha: info.alpha,
                beta: info.beta,
            }
        }
    }
}

/// Spline surrogates of `S_Ω(·, y_k)` for a set of anchors.
#[derive(Clone, Debug)]
pub struct GreenSplines<T> {
    pub table: GreenTable<T>,
    splines: Vec<Spline2<T>>,
}

impl<T: Real> GreenSplines<T> {
    pub fn build(grid: &DomainGrid<T>, sources: &[Point<T>], tol: T) -> Result<Self, EllipticError> {
        Ok(Self::from_table(GreenTable::build(grid, sources, tol)?))
    }

    pub fn from_table(table: GreenTable<T>) -> Self {
        let splines = table.s.iter().map(|f| Spline2::new(&table.grid, f)).collect();
        Self { table, splines }
    }

    pub fn sources(&self) -> &[Point<T>] {
        &self.table.sources
    }

    /// `S_Ω(x, y_k)`.
    pub fn s(&self, k: usize, x: Point<T>) -> T {
        self.splines[k].value(x)
    }

    /// `∇_x S_Ω(x, y_k)`.
    pub fn grad(&self, k: usize, x: Point<T>) -> Point<T> {
        self.splines[k].grad(x)
    }
}

/// Keeps Green tables anchored near the current vortex positions, refreshing
/// when a vortex has moved `refresh` or more from its anchor.
#[derive(Clone, Debug)]
pub struct GreenCache<T> {
    pub grid: DomainGrid<T>,
    pub tol: T,
    pub refresh: T,
    pub splines: Option<GreenSplines<T>>,
    pub refreshes: usize,
}

impl<T: Real> GreenCache<T> {
    pub fn new(grid: &DomainGrid<T>, tol: T) -> Self {
        Self {
            grid: grid.clone(),
            tol,
            refresh: T::lit(10.0) * grid.h,
            splines: None,
            refreshes: 0,
        }
    }

    pub fn ensure(&mut self, a: &[Point<T>]) -> Result<&GreenSplines<T>, EllipticError> {
        let stale = match &self.splines {
            None => true,
            Some(g) => g.sources().len() != a.len() || g.sources().iter().zip(a).any(|(y, x)| dist(*x, *y) >= self.refresh),
        };
        if stale {
            self.splines = Some(GreenSplines::build(&self.grid, a, self.tol)?);
            self.refreshes += 1;
        }
        Ok(self.splines.as_ref().unwrap())
    }
}

fn dist<T: Real>(a: Point<T>, b: Point<T>) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn check_points<T: Real>(a: &[Point<T>], d: &[i32]) -> Result<(), ReducedError> {
    if a.len() != d.len() {
        return Err(ReducedError::LengthMismatch);
    }
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if dist(a[i], a[j]) == T::zero() {
                return Err(ReducedError::Coincident(i, j));
            }
        }
    }
    Ok(())
}

/// `W_d(a) = −π Σ_{i≠j} dᵢdⱼ log|aᵢ − aⱼ| + π Σ_{i,j} dᵢdⱼ S_Ω(aᵢ, aⱼ)`,
/// with `S_Ω(aᵢ, aⱼ)` taken from the table anchored at `aⱼ` (off-diagonal
/// pairs symmetrized). Anchors must coincide with `a`.
pub fn renormalized_energy<T: Real>(a: &[Point<T>], d: &[i32], green: &GreenSplines<T>) -> Result<T, ReducedError> {
    check_points(a, d)?;
    let pi = T::PI();
    let n = a.len();
    let df = |k: usize| T::from_i32(d[k]).unwrap();
    let mut w = T::zero();
    for i in 0..n {
        w += pi * green.s(i, a[i]);
        for j in i + 1..n {
            let dd = df(i) * df(j);
            let s = T::half() * (green.s(j, a[i]) + green.s(i, a[j]));
            w += T::two() * pi * dd * (s - dist(a[i], a[j]).ln());
        }
    }
    Ok(w)
}

/// `W_d` with a fresh Green table at `a`.
pub fn renormalized_energy_at<T: Real>(grid: &DomainGrid<T>, a: &[Point<T>], d: &[i32], tol: T) -> Result<T, ReducedError> {
    let g = GreenSplines::build(grid, a, tol)?;
    renormalized_energy(a, d, &g)
}

/// `∇_{aᵢ}W = 2π dᵢ Σⱼ dⱼ ∇ₓS_Ω(aᵢ, aⱼ) − 2π Σ_{j≠i} dᵢdⱼ (aᵢ − aⱼ)/|aᵢ − aⱼ|²`.
/// The table may be anchored near (not exactly at) `a`.
pub fn grad_renormalized_energy<T: Real>(a: &[Point<T>], d: &[i32], green: &GreenSplines<T>) -> Result<Vec<Point<T>>, ReducedError> {
    check_points(a, d)?;
    let tpi = T::TAU();
    let n = a.len();
    let df = |k: usize| T::from_i32(d[k]).unwrap();
    let mut out = vec![[T::zero(), T::zero()]; n];
    for i in 0..n {
        for l in 0..n {
            let g = green.grad(l, a[i]);
            let c = tpi * df(i) * df(l);
            out[i][0] += c * g[0];
            out[i][1] += c * g[1];
            if l != i {
                let dx = a[i][0] - a[l][0];
                let dy = a[i][1] - a[l][1];
                let r2 = dx * dx + dy * dy;
                out[i][0] -= c * dx / r2;
                out[i][1] -= c * dy / r2;
            }
        }
    }
    Ok(out)
}

/// Spline surrogates of the applied-field potentials.
#[derive(Clone, Debug)]
pub struct LawFields<T> {
    pub grid: DomainGrid<T>,
    pub f1: Spline2<T>,
    pub f0: Spline2<T>,
    pub h0: Spline2<T>,
}

impl<T: Real> LawFields<T> {
    pub fn new(grid: &DomainGrid<T>, pre: &PrecomputedFields<T>) -> Self {
        Self {
            grid: grid.clone(),
            f1: Spline2::new(grid, &pre.f1),
            f0: Spline2::new(grid, &pre.f0),
            h0: Spline2::new(grid, &pre.h0),
        }
    }

    /// `α∇⊥f₁ + β(∇h₀ − ∇⊥f₀)` at `p`.
    pub fn drift(&self, p: Point<T>, c: &LawCoefficients<T>) -> Point<T> {
        let g1 = self.f1.grad(p);
        let g0 = self.f0.grad(p);
        let gh = self.h0.grad(p);
        [
            c.alpha * (-g1[1]) + c.beta * (gh[0] + g0[1]),
            c.alpha * g1[0] + c.beta * (gh[1] - g0[0]),
        ]
    }
}

/// Per-vortex velocities of the unified law.
pub fn law_rhs<T: Real>(
    state: &ReducedState<T>,
    coeffs: &LawCoefficients<T>,
    fields: &LawFields<T>,
    green: Option<&GreenSplines<T>>,
) -> Result<Vec<Point<T>>, ReducedError> {
    let a = &state.positions;
    check_points(a, &state.degrees)?;
    let margin = T::two() * fields.grid.h;
    for (k, p) in a.iter().enumerate() {
        if fields.grid.boundary_distance(*p) < margin {
            return Err(ReducedError::OutsideMargin {
                index: k,
                x: p[0].to_f64_(),
                y: p[1].to_f64_(),
            });
        }
    }
    let mut out: Vec<Point<T>> = a
        .iter()
        .zip(&state.degrees)
        .map(|(p, d)| {
            let dr = fields.drift(*p, coeffs);
            let s = -T::two() * T::from_i32(*d).unwrap();
            [s * dr[0], s * dr[1]]
        })
        .collect();
    if coeffs.c_w != T::zero() {
        let g = green.ok_or(ReducedError::MissingGreen)?;
        let gw = grad_renormalized_energy(a, &state.degrees, g)?;
        let c = coeffs.c_w / T::PI();
        for (o, gw) in out.iter_mut().zip(&gw) {
            o[0] -= c * gw[0];
            o[1] -= c * gw[1];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub degrees: Vec<i32>,
    pub taus: Vec<T>,
    pub positions: Vec<Vec<Point<T>>>,
    /// Last time at which the separation constraint held.
    pub t_star: T,
    pub halted: bool,
}

impl<T: Real> Trajectory<T> {
    /// Position of vortex `i` at `tau`, linearly interpolated.
    pub fn position_at(&self, i: usize, tau: T) -> Option<Point<T>> {
        let ts = &self.taus;
        if ts.is_empty() || tau < ts[0] || tau > ts[ts.len() - 1] {
            return None;
        }
        let k = ts.partition_point(|t| *t <= tau);
        if k >= ts.len() {
            return Some(self.positions[ts.len() - 1][i]);
        }
        if k == 0 {
            return Some(self.positions[0][i]);
        }
        let (a, b) = (self.positions[k - 1][i], self.positions[k][i]);
        let w = (tau - ts[k - 1]) / (ts[k] - ts[k - 1]);
        Some([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])])
    }
}

/// Smallest pairwise and boundary distance.
pub fn min_separation<T: Real>(grid: &DomainGrid<T>, a: &[Point<T>]) -> T {
    let mut m = T::infinity();
    for (i, p) in a.iter().enumerate() {
        m = m.min(grid.boundary_distance(*p));
        for q in &a[i + 1..] {
            m = m.min(dist(*p, *q));
        }
    }
    m
}

/// Classical RK4 with fixed `dτ` up to `t_end`, stopping before the first
/// step whose result violates the `σ*` separation; samples every `stride`
/// steps (and the final state).
#[allow(clippy::too_many_arguments)]
pub fn integrate<T: Real>(
    state0: &ReducedState<T>,
    coeffs: &LawCoefficients<T>,
    fields: &LawFields<T>,
    mut green: Option<&mut GreenCache<T>>,
    t_end: T,
    dtau: T,
    sigma_star: T,
    stride: usize,
) -> Result<Trajectory<T>, ReducedError> {
    let grid = &fields.grid;
    let stride = stride.max(1);
    let mut st = state0.clone();
    let mut traj = Trajectory {
        degrees: st.degrees.clone(),
        taus: vec![st.tau],
        positions: vec![st.positions.clone()],
        t_star: st.tau,
        halted: false,
    };
    let n_steps = ((t_end - st.tau) / dtau - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let rhs = |s: &ReducedState<T>, green: &mut Option<&mut GreenCache<T>>| -> Result<Vec<Point<T>>, ReducedError> {
        let g = match (coeffs.c_w != T::zero(), green.as_deref_mut()) {
            (true, Some(c)) => Some(c.ensure(&s.positions)?.clone()),
            (true, None) => return Err(ReducedError::MissingGreen),
            _ => None,
        };
        law_rhs(s, coeffs, fields, g.as_ref())
    };
    let shift = |s: &ReducedState<T>, k: &[Point<T>], c: T| -> ReducedState<T> {
        ReducedState {
            positions: s.positions.iter().zip(k).map(|(p, v)| [p[0] + c * v[0], p[1] + c * v[1]]).collect(),
            degrees: s.degrees.clone(),
            tau: s.tau,
        }
    };
    let six = T::lit(6.0);
    for step in 1..=n_steps {
        let h = dtau.min(t_end - st.tau);
        let k1 = rhs(&st, &mut green)?;
        let k2 = rhs(&shift(&st, &k1, h * T::half()), &mut green)?;
        let k3 = rhs(&shift(&st, &k2, h * T::half()), &mut green)?;
        let k4 = rhs(&shift(&st, &k3, h), &mut green)?;
        let mut next = st.clone();
        for i in 0..next.positions.len() {
            for c in 0..2 {
                next.positions[i][c] += h / six * (k1[i][c] + T::two() * k2[i][c] + T::two() * k3[i][c] + k4[i][c]);
            }
        }
        next.tau = st.tau + h;
        if min_separation(grid, &next.positions) < sigma_star {
            traj.halted = true;
            if *traj.taus.last().unwrap() != st.tau {
                traj.taus.push(st.tau);
                traj.positions.push(st.positions.clone());
            }
            traj.t_star = st.tau;
            return Ok(traj);
        }
        st = next;
        if step % stride == 0 || step == n_steps {
            traj.taus.push(st.tau);
            traj.positions.push(st.positions.clone());
        }
    }
    traj.t_star = st.tau;
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservedSeries<T> {
    /// `f₁(aᵢ(τ))` per sample, per vortex.
    pub values: Vec<Vec<T>>,
    /// `max_τ |f₁(aᵢ(τ)) − f₁(aᵢ(0))|` per vortex.
    pub max_drift: Vec<T>,
}

pub fn conserved_h<T: Real>(traj: &Trajectory<T>, fields: &LawFields<T>) -> ConservedSeries<T> {
    let values: Vec<Vec<T>> = traj.positions.iter().map(|ps| ps.iter().map(|p| fields.f1.value(*p)).collect()).collect();
    let n = traj.degrees.len();
    let max_drift = (0..n)
        .map(|i| values.iter().map(|v| (v[i] - values[0][i]).abs()).fold(T::zero(), T::max))
        .collect();
    ConservedSeries { values, max_drift }
}

/// `max f − min f` over nodes.
pub fn oscillation<T: Real>(f: &NodeField<T>) -> T {
    let (lo, hi) = f.data.iter().fold((T::infinity(), -T::infinity()), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    hi - lo
}

/// `h = Σⱼ dⱼ G(·, aⱼ)` on nodes, `G = S_Ω − log|· − aⱼ|`; nodes closer than
/// `h/2` to a source use the cell average of the logarithm.
pub fn london_field<T: Real>(a: &[Point<T>], d: &[i32], green: &GreenTable<T>, grid: &DomainGrid<T>) -> Result<NodeField<T>, ReducedError> {
    check_points(a, d)?;
    let mut out = NodeField::filled(grid, T::zero());
    for (k, (y, dk)) in a.iter().zip(d).enumerate() {
        let s = &green.s[k];
        let dk = T::from_i32(*dk).unwrap();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.node_pos(i, j);
                let r = dist(p, *y);
                let lg = if r < grid.h * T::half() { cell_average_log(p, *y, grid.h) } else { r.ln() };
                out.data[grid.node(i, j)] += dk * (s.at(i, j) - lg);
            }
        }
    }
    Ok(out)
}

/// Implicit-Euler solution of `∂ₜh − Δh + h = 2πΣdᵢδ_{aᵢ}`, `h = 0` on ∂Ω,
/// with the regularized source `(−Δ_h + 1)` applied to the discrete London
/// field, so that the London field is the exact discrete equilibrium.
/// Returns `(t, h)` after every `stride` steps and at `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn limit_induced_field<T: Real>(
    a: &[Point<T>],
    d: &[i32],
    green: &GreenTable<T>,
    grid: &DomainGrid<T>,
    t_end: T,
    dt: T,
    initial: Option<&NodeField<T>>,
    stride: usize,
    tol: T,
) -> Result<Vec<(T, NodeField<T>)>, ReducedError> {
    let london = london_field(a, d, green, grid)?;
    let kl = screened_apply(grid, T::one(), T::one(), &london.data);
    let op = ScreenedOperator::dirichlet(grid, dt, T::one() + dt);
    let h2 = grid.h * grid.h;
    let w = grid.node_weights();
    let mut u = initial.map(|f| f.data.clone()).unwrap_or_else(|| vec![T::zero(); grid.n_nodes()]);
    let zeros = vec![T::zero(); grid.n_nodes()];
    let mut out = vec![(T::zero(), NodeField { nx: grid.nx, ny: grid.ny, data: u.clone() })];
    let n = (t_end / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let stride = stride.max(1);
    for step in 1..=n {
        let load: Vec<T> = (0..u.len()).map(|k| w[k] * h2 * u[k] + dt * kl[k]).collect();
        let (next, _) = op.solve(&load, &zeros, Some(&u), tol, 100_000)?;
        u = next;
        if step % stride == 0 || step == n {
            out.push((dt * T::from_usize_(step), NodeField { nx: grid.nx, ny: grid.ny, data: u.clone() }));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applied::{assemble, classify_regime};
    use crate::grid::node_inner;

    fn grid(n: usize) -> DomainGrid<f64> {
        DomainGrid::square(1.0, n).unwrap()
    }

    #[test]
    fn single_vortex_energy_is_diagonal_term() {
        let g = grid(65);
        let a = [[0.4, 0.55]];
        let gs = GreenSplines::build(&g, &a, 1e-12).unwrap();
        let w = renormalized_energy(&a, &[1], &gs).unwrap();
        assert!((w - std::f64::consts::PI * gs.s(0, a[0])).abs() < 1e-14);
    }

    #[test]
    fn like_pair_repels() {
        let g = grid(65);
        let w1 = renormalized_energy_at(&g, &[[0.45, 0.5], [0.55, 0.5]], &[1, 1], 1e-12).unwrap();
        let w2 = renormalized_energy_at(&g, &[[0.4, 0.5], [0.6, 0.5]], &[1, 1], 1e-12).unwrap();
        assert!(w1 > w2);
    }

    #[test]
    fn gradient_symmetries() {
        let g = grid(65);
        let a = [[0.4, 0.5], [0.6, 0.5]];
        let gs = GreenSplines::build(&g, &a, 1e-12).unwrap();
        let gw = grad_renormalized_energy(&a, &[1, 1], &gs).unwrap();
        assert!((gw[0][0] + gw[1][0]).abs() < 1e-6 && (gw[0][1]).abs() < 1e-6);
        let c = [[0.5, 0.5]];
        let gs = GreenSplines::build(&g, &c, 1e-12).unwrap();
        let gw = grad_renormalized_energy(&c, &[1], &gs).unwrap();
        assert!(gw[0][0].abs() < 1e-3 && gw[0][1].abs() < 1e-3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = grid(65);
        let a = vec![[0.35, 0.45], [0.62, 0.58]];
        let d = [1, -1];
        let gs = GreenSplines::build(&g, &a, 1e-12).unwrap();
        let gw = grad_renormalized_energy(&a, &d, &gs).unwrap();
        let step = 1e-3;
        for i in 0..2 {
            for c in 0..2 {
                let mut p = a.clone();
                p[i][c] += step;
                let wp = renormalized_energy_at(&g, &p, &d, 1e-12).unwrap();
                p[i][c] -= 2.0 * step;
                let wm = renormalized_energy_at(&g, &p, &d, 1e-12).unwrap();
                let fd = (wp - wm) / (2.0 * step);
                let norm = (gw[i][0].powi(2) + gw[i][1].powi(2)).sqrt();
                assert!((fd - gw[i][c]).abs() < 5e-3 * norm, "{i} {c}: {fd} vs {}", gw[i][c]);
            }
        }
    }

    fn linear_fields(g: &DomainGrid<f64>, f1: impl Fn([f64; 2]) -> f64) -> LawFields<f64> {
        let z = NodeField::filled(g, 0.0);
        let pre = assemble(g, 1.0, 0.0, z.clone(), z, NodeField::from_fn(g, f1));
        LawFields::new(g, &pre)
    }

    #[test]
    fn regime_two_velocity_formula() {
        let g = grid(33);
        let (p, q) = (0.3, -0.7);
        let fields = linear_fields(&g, |x| p * x[0] + q * x[1]);
        let info = classify_regime(2.0, 0.0, 0.05, None).unwrap();
        let c = LawCoefficients::from_regime(&info);
        assert_eq!(c.c_w, 0.0);
        let st = ReducedState { positions: vec![[0.5, 0.4]], degrees: vec![1], tau: 0.0 };
        let v = law_rhs(&st, &c, &fields, None).unwrap();
        assert!((v[0][0] - 2.0 * q).abs() < 1e-12 && (v[0][1] + 2.0 * p).abs() < 1e-12);
        let st = ReducedState { degrees: vec![-1], ..st };
        let v = law_rhs(&st, &c, &fields, None).unwrap();
        assert!((v[0][0] + 2.0 * q).abs() < 1e-12);
    }

    #[test]
    fn unified_law_reduces_to_regime_forms() {
        let g = grid(33);
        let pre = assemble(
            &g,
            1.0,
            1.0,
            NodeField::from_fn(&g, |p| (p[0] * p[1]).cos()),
            NodeField::from_fn(&g, |p| p[0] * p[0] - p[1]),
            NodeField::from_fn(&g, |p| (2.0 * p[1]).sin() + p[0]),
        );
        let f = LawFields::new(&g, &pre);
        let x = [0.37, 0.61];
        let (g1, g0, gh) = (f.f1.grad(x), f.f0.grad(x), f.h0.grad(x));
        let st = ReducedState { positions: vec![x], degrees: vec![1], tau: 0.0 };
        let r3 = law_rhs(&st, &LawCoefficients { c_w: 0.0, alpha: 0.0, beta: 1.0 }, &f, None).unwrap()[0];
        assert!((r3[0] - (-2.0 * gh[0] + 2.0 * (-g0[1]))).abs() < 1e-15);
        assert!((r3[1] - (-2.0 * gh[1] + 2.0 * g0[0])).abs() < 1e-15);
        let r2 = law_rhs(&st, &LawCoefficients { c_w: 0.0, alpha: 1.0, beta: 0.0 }, &f, None).unwrap()[0];
        assert!((r2[0] - 2.0 * g1[1]).abs() < 1e-15 && (r2[1] + 2.0 * g1[0]).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_and_halting() {
        let g = grid(65);
        let fields = linear_fields(&g, |_| 0.0);
        let c = LawCoefficients { c_w: 1.0, alpha: 1.0, beta: 1.0 };
        let mut cache = GreenCache::new(&g, 1e-12);
        let st = ReducedState { positions: vec![[0.5, 0.5]], degrees: vec![1], tau: 0.0 };
        let tr = integrate(&st, &c, &fields, Some(&mut cache), 0.05, 0.005, 0.1, 1).unwrap();
        assert!(!tr.halted);
        assert!((tr.t_star - 0.05).abs() < 1e-12);
        for p in &tr.positions {
            assert!(dist(p[0], [0.5, 0.5]) < 1e-4);
        }
        // a like pair separates under the interaction
        let st = ReducedState { positions: vec![[0.45, 0.5], [0.55, 0.5]], degrees: vec![1, 1], tau: 0.0 };
        let tr = integrate(&st, &c, &fields, Some(&mut cache), 0.002, 1e-4, 0.05, 1).unwrap();
        let seps: Vec<f64> = tr.positions.iter().map(|p| dist(p[0], p[1])).collect();
        assert!(seps.windows(2).all(|w| w[1] > w[0]));
        // a strong drift towards the wall halts the run
        let fields = linear_fields(&g, |x| -x[1]);
        let c2 = LawCoefficients { c_w: 0.0, alpha: 1.0, beta: 0.0 };
        let st = ReducedState { positions: vec![[0.5, 0.5]], degrees: vec![1], tau: 0.0 };
        let tr = integrate(&st, &c2, &fields, None, 1.0, 1e-3, 0.1, 10).unwrap();
        assert!(tr.halted);
        let last = tr.positions.last().unwrap().clone();
        assert!(min_separation(&g, &last) >= 0.1);
        assert!((tr.t_star - 0.2).abs() < 2e-3, "{}", tr.t_star);
    }

    #[test]
    fn regime_two_conserves_f1_to_integrator_accuracy() {
        let g = grid(65);
        let fields = linear_fields(&g, |x| ((x[0] - 0.5).powi(2) + 0.6 * (x[1] - 0.5).powi(2)).sqrt().sin());
        let c = LawCoefficients { c_w: 0.0, alpha: 1.0, beta: 0.0 };
        let st = ReducedState { positions: vec![[0.62, 0.5]], degrees: vec![1], tau: 0.0 };
        let drift = |dt: f64| {
            let tr = integrate(&st, &c, &fields, None, 0.2, dt, 0.05, 100).unwrap();
            conserved_h(&tr, &fields).max_drift[0]
        };
        let (a, b) = (drift(4e-3), drift(2e-3));
        assert!(a < 1e-6 && b < a / 3.0, "{a} {b}");
    }

    #[test]
    fn london_field_sign_and_boundary() {
        let g = grid(65);
        let a = [[0.45, 0.5]];
        let table = GreenTable::build(&g, &a, 1e-12).unwrap();
        let h = london_field(&a, &[1], &table, &g).unwrap();
        let hn = london_field(&a, &[-1], &table, &g).unwrap();
        for (x, y) in h.data.iter().zip(&hn.data) {
            assert_eq!(*x, -*y);
        }
        for (i, j) in g.boundary_nodes() {
            assert!(h.at(i, j).abs() <= 10.0 * g.h * g.h);
        }
        for j in 1..64 {
            for i in 1..64 {
                assert!(h.at(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn induced_field_flow() {
        let g = grid(33);
        let a = [[0.5, 0.5]];
        let table = GreenTable::build(&g, &a, 1e-12).unwrap();
        let l = london_field(&a, &[1], &table, &g).unwrap();
        let s = limit_induced_field(&a, &[1], &table, &g, 0.05, 0.01, Some(&l), 1, 1e-12).unwrap();
        for (_, f) in &s {
            for (x, y) in f.data.iter().zip(&l.data) {
                assert!((x - y).abs() < 1e-8);
            }
        }
        let s = limit_induced_field(&a, &[1], &table, &g, 0.3, 0.01, None, 3, 1e-13).unwrap();
        let gap = |f: &NodeField<f64>| {
            let d = NodeField { nx: 33, ny: 33, data: f.data.iter().zip(&l.data).map(|(x, y)| x - y).collect() };
            node_inner(&g, &d, &d).sqrt()
        };
        let g0 = gap(&s[0].1);
        let mut last = g0;
        for (t, f) in &s[1..] {
            let e = gap(f);
            assert!(e < last);
            assert!(e <= g0 * (-t).exp() * 1.0001, "{t} {e} {g0}");
            last = e;
        }
    }
}
