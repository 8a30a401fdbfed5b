//! Vorticity, velocity, vortex detection and tracking.
//!
//! `μ = curl j + curl B` with the supercurrent `j = (iv, ∇_B v)` evaluated
//! from link products, and the velocity
//! `V = 2(i∇_B v, ∂ₜv) + (|v|² − 1)∂ₜB`, which equals
//! `∇(iv, ∂ₜv) − ∂ₜ(iv, ∇_B v) − ∂ₜB`. Both live on the staggered grid:
//! `μ` on cells, `V` on edges, so `∂ₜμ + curl V = 0` is a cellwise identity.
//! The integer winding of each plaquette is kept separately.

use thiserror::Error;

use crate::grid::{discrete_curl, CellField, DomainGrid, EdgeField, Point};
use crate::scalar::{cis, Real, C};
use crate::tdgl::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VortexError {
    #[error("snapshots must be strictly ordered in time (dt = {0})")]
    NonPositiveDt(f64),
    #[error("snapshots come from different grids")]
    GridMismatch,
}

/// Link products `conj(v_t) v_h e^{−ihB}` on x- and y-edges.
pub fn link_products<T: Real>(grid: &DomainGrid<T>, v: &[C<T>], b: &EdgeField<T>) -> (Vec<C<T>>, Vec<C<T>>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut px = Vec::with_capacity(grid.n_xedges());
    for j in 0..ny {
        for i in 0..nx - 1 {
            let t = j * nx + i;
            px.push(v[t].conj() * v[t + 1] * cis(-grid.h * b.x[j * (nx - 1) + i]));
        }
    }
    let mut py = Vec::with_capacity(grid.n_yedges());
    for j in 0..ny - 1 {
        for i in 0..nx {
            let t = j * nx + i;
            py.push(v[t].conj() * v[t + nx] * cis(-grid.h * b.y[t]));
        }
    }
    (px, py)
}

/// `j = (iv, ∇_B v)` on edges.
pub fn supercurrent<T: Real>(grid: &DomainGrid<T>, state: &State<T>) -> EdgeField<T> {
    let (px, py) = link_products(grid, &state.v.data, &state.b);
    let ih = T::one() / grid.h;
    EdgeField {
        nx: grid.nx,
        ny: grid.ny,
        x: px.iter().map(|p| p.im * ih).collect(),
        y: py.iter().map(|p| p.im * ih).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VorticityField<T> {
    /// `curl j + curl B` per cell.
    pub mu: CellField<T>,
    /// Plaquette winding `Σ wrap(link phase) + h² curl B`, a multiple of 2π.
    pub winding: CellField<T>,
    /// `Σ winding`, unrounded.
    pub total_winding: T,
}

impl<T: Real> VorticityField<T> {
    /// Integer plaquette degrees.
    pub fn degrees(&self) -> Vec<i32> {
        let tau = T::TAU();
        self.winding
            .data
            .iter()
            .map(|w| (*w / tau).round().to_i32().unwrap_or(0))
            .collect()
    }

    /// `∫ μ`.
    pub fn total_mu(&self, grid: &DomainGrid<T>) -> T {
        let h2 = grid.h * grid.h;
        self.mu.data.iter().copied().sum::<T>() * h2
    }
}

pub fn vorticity<T: Real>(grid: &DomainGrid<T>, state: &State<T>) -> VorticityField<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (px, py) = link_products(grid, &state.v.data, &state.b);
    let ih = T::one() / grid.h;
    let j = EdgeField {
        nx,
        ny,
        x: px.iter().map(|p| p.im * ih).collect(),
        y: py.iter().map(|p| p.im * ih).collect(),
    };
    let cj = discrete_curl(grid, &j);
    let cb = discrete_curl(grid, &state.b);
    // an exact zero has no phase; give it the transported mean of its
    // neighbours so the plaquette phases stay consistent
    let (px, py) = if state.v.data.iter().any(|z| z.norm_sqr() == T::zero()) {
        link_products(grid, &fill_zeros(grid, state), &state.b)
    } else {
        (px, py)
    };
    let h2 = grid.h * grid.h;
    let mu = CellField {
        nx,
        ny,
        data: cj.data.iter().zip(&cb.data).map(|(a, b)| *a + *b).collect(),
    };
    let mut winding = CellField::zeros(grid);
    let mut total = T::zero();
    for cj in 0..ny - 1 {
        for ci in 0..nx - 1 {
            let k = cj * (nx - 1) + ci;
            let s = px[cj * (nx - 1) + ci].arg() + py[cj * nx + ci + 1].arg()
                - px[(cj + 1) * (nx - 1) + ci].arg()
                - py[cj * nx + ci].arg()
                + h2 * cb.data[k];
            winding.data[k] = s;
            total += s;
        }
    }
    VorticityField {
        mu,
        winding,
        total_winding: total,
    }
}

fn fill_zeros<T: Real>(grid: &DomainGrid<T>, state: &State<T>) -> Vec<C<T>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let v = &state.v.data;
    let b = &state.b;
    let mut out = v.clone();
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if v[k].norm_sqr() != T::zero() {
                continue;
            }
            // neighbour value expressed in the frame of node k
            let mut acc = C::new(T::zero(), T::zero());
            if i + 1 < nx {
                acc += v[k + 1] * cis(-h * b.x[j * (nx - 1) + i]);
            }
            if i > 0 {
                acc += v[k - 1] * cis(h * b.x[j * (nx - 1) + i - 1]);
            }
            if j + 1 < ny {
                acc += v[k + nx] * cis(-h * b.y[k]);
            }
            if j > 0 {
                acc += v[k - nx] * cis(h * b.y[k - nx]);
            }
            let tiny = T::min_positive_value().sqrt();
            out[k] = if acc.norm() > T::zero() { acc / acc.norm() * tiny } else { C::new(tiny, T::zero()) };
        }
    }
    out
}

/// Velocity between two snapshots, evaluated at the time midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField<T> {
    /// Edge values, the primary representation.
    pub edges: EdgeField<T>,
    /// Cell averages of the two components.
    pub v1: CellField<T>,
    pub v2: CellField<T>,
    pub dt: T,
}

/// Edge velocity `V_e` for midpoint state `(v, B)` and rates `(v̇, Ḃ)`.
pub fn edge_velocity<T: Real>(grid: &DomainGrid<T>, v: &[C<T>], b: &EdgeField<T>, vdot: &[C<T>], bdot: &EdgeField<T>) -> EdgeField<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let ih = T::one() / h;
    let i = C::new(T::zero(), T::one());
    let one = |t: usize, hd: usize, be: T, bd: T| -> T {
        let u = cis(-h * be);
        let vh_u = v[hd] * u;
        let d = (vh_u - v[t]) * ih;
        let prod = v[t].conj() * vh_u;
        (i * d * vdot[t].conj()).re + (i * u.conj() * d * vdot[hd].conj()).re + (prod.re - T::one()) * bd
    };
    let mut out = EdgeField::zeros(grid);
    for j in 0..ny {
        for ii in 0..nx - 1 {
            let k = j * (nx - 1) + ii;
            let t = j * nx + ii;
            out.x[k] = one(t, t + 1, b.x[k], bdot.x[k]);
        }
    }
    for j in 0..ny - 1 {
        for ii in 0..nx {
            let k = j * nx + ii;
            out.y[k] = one(k, k + nx, b.y[k], bdot.y[k]);
        }
    }
    out
}

/// Midpoint state and rates of two snapshots.
pub fn midpoint_rates<T: Real>(prev: &State<T>, next: &State<T>) -> Result<(Vec<C<T>>, EdgeField<T>, Vec<C<T>>, EdgeField<T>, T), VortexError> {
    if prev.v.data.len() != next.v.data.len() || prev.b.x.len() != next.b.x.len() {
        return Err(VortexError::GridMismatch);
    }
    let dt = next.t - prev.t;
    if !(dt > T::zero()) {
        return Err(VortexError::NonPositiveDt(dt.to_f64_()));
    }
    let half = T::half();
    let idt = T::one() / dt;
    let vm = prev.v.data.iter().zip(&next.v.data).map(|(a, b)| (*a + *b) * half).collect();
    let vd = prev.v.data.iter().zip(&next.v.data).map(|(a, b)| (*b - *a) * idt).collect();
    let mix = |f: &dyn Fn(T, T) -> T| EdgeField {
        nx: prev.b.nx,
        ny: prev.b.ny,
        x: prev.b.x.iter().zip(&next.b.x).map(|(a, b)| f(*a, *b)).collect(),
        y: prev.b.y.iter().zip(&next.b.y).map(|(a, b)| f(*a, *b)).collect(),
    };
    let bm = mix(&|a, b| (a + b) * half);
    let bd = mix(&|a, b| (b - a) * idt);
    Ok((vm, bm, vd, bd, dt))
}

pub fn velocity<T: Real>(grid: &DomainGrid<T>, prev: &State<T>, next: &State<T>) -> Result<VelocityField<T>, VortexError> {
    let (vm, bm, vd, bd, dt) = midpoint_rates(prev, next)?;
    let edges = edge_velocity(grid, &vm, &bm, &vd, &bd);
    let (v1, v2) = edges_to_cells(grid, &edges);
    Ok(VelocityField { edges, v1, v2, dt })
}

/// Averages the two x-edges (y-edges) of each cell.
pub fn edges_to_cells<T: Real>(grid: &DomainGrid<T>, e: &EdgeField<T>) -> (CellField<T>, CellField<T>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut a = CellField::zeros(grid);
    let mut b = CellField::zeros(grid);
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k = j * (nx - 1) + i;
            a.data[k] = T::half() * (e.x[j * (nx - 1) + i] + e.x[(j + 1) * (nx - 1) + i]);
            b.data[k] = T::half() * (e.y[j * nx + i] + e.y[j * nx + i + 1]);
        }
    }
    (a, b)
}

/// `Σ h² |(μ_next − μ_prev)/dt + curl V|`.
pub fn continuity_residual<T: Real>(grid: &DomainGrid<T>, mu_prev: &CellField<T>, mu_next: &CellField<T>, v: &EdgeField<T>, dt: T) -> T {
    let cv = discrete_curl(grid, v);
    let h2 = grid.h * grid.h;
    mu_prev
        .data
        .iter()
        .zip(&mu_next.data)
        .zip(&cv.data)
        .map(|((p, n), c)| ((*n - *p) / dt + *c).abs())
        .sum::<T>()
        * h2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionStatus {
    Ok,
    /// Cluster winding not within 0.2 of a multiple of 2π.
    Ambiguous,
    /// `|degree| ≥ 2`.
    HighDegree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection<T> {
    pub pos: Point<T>,
    pub degree: i32,
    pub winding: T,
    pub status: DetectionStatus,
}

/// Zero of the bilinear interpolant of `v` on cell `(ci, cj)`, with the four
/// corners transported into the frame of the lower-left node.
fn cell_zero<T: Real>(grid: &DomainGrid<T>, state: &State<T>, ci: usize, cj: usize) -> Point<T> {
    let nx = grid.nx;
    let h = grid.h;
    let v = &state.v.data;
    let b = &state.b;
    let n00 = cj * nx + ci;
    let ubot = cis(-h * b.x[cj * (nx - 1) + ci]);
    let uleft = cis(-h * b.y[cj * nx + ci]);
    let utop = cis(-h * b.x[(cj + 1) * (nx - 1) + ci]);
    let uright = cis(-h * b.y[cj * nx + ci + 1]);
    let z00 = v[n00];
    let z10 = v[n00 + 1] * ubot;
    let z01 = v[n00 + nx] * uleft;
    // the top-right corner is reached two ways; average the transports
    let z11 = (v[n00 + nx + 1] * uright * ubot + v[n00 + nx + 1] * utop * uleft) * T::half();
    let f = |s: T, t: T| -> C<T> {
        z00 * (T::one() - s) * (T::one() - t) + z10 * s * (T::one() - t) + z01 * (T::one() - s) * t + z11 * s * t
    };
    let (mut s, mut t) = (T::half(), T::half());
    for _ in 0..30 {
        let val = f(s, t);
        let ds = (z10 - z00) * (T::one() - t) + (z11 - z01) * t;
        let dt = (z01 - z00) * (T::one() - s) + (z11 - z10) * s;
        // 2×2 real Newton
        let det = ds.re * dt.im - ds.im * dt.re;
        if det.abs() < T::lit(1e-300).max(T::min_positive_value()) {
            break;
        }
        let ns = (val.re * dt.im - val.im * dt.re) / det;
        let nt = (ds.re * val.im - ds.im * val.re) / det;
        s = (s - ns).max(-T::half()).min(T::lit(1.5));
        t = (t - nt).max(-T::half()).min(T::lit(1.5));
        if ns.abs() + nt.abs() < T::lit(1e-13) {
            break;
        }
    }
    // keep the estimate within the plaquette
    let s = s.max(T::zero()).min(T::one());
    let t = t.max(T::zero()).min(T::one());
    let p = grid.node_pos(ci, cj);
    [p[0] + s * h, p[1] + t * h]
}

/// Locates vortices: plaquettes with `|winding| ≥ π` are grouped into
/// 8-connected clusters; each cluster yields one detection.
pub fn detect<T: Real>(grid: &DomainGrid<T>, state: &State<T>) -> Vec<Detection<T>> {
    let w = vorticity(grid, state);
    detect_from(grid, state, &w)
}

pub fn detect_from<T: Real>(grid: &DomainGrid<T>, state: &State<T>, w: &VorticityField<T>) -> Vec<Detection<T>> {
    let (cx, cy) = (grid.nx - 1, grid.ny - 1);
    let pi = T::PI();
    let tau = T::TAU();
    let hot: Vec<bool> = w.winding.data.iter().map(|x| x.abs() >= pi).collect();
    let mut seen = vec![false; hot.len()];
    let mut out = Vec::new();
    for start in 0..hot.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            let (i, j) = ((k % cx) as isize, (k / cx) as isize);
            for dj in -1..=1isize {
                for di in -1..=1isize {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= cx as isize || b >= cy as isize {
                        continue;
                    }
                    let q = b as usize * cx + a as usize;
                    if hot[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        members.sort_unstable();
        let total: T = members.iter().map(|&k| w.winding.data[k]).sum();
        let deg_f = total / tau;
        let degree = deg_f.round().to_i32().unwrap_or(0);
        let frac = (total - T::from_i32(degree).unwrap() * tau).abs();
        if degree == 0 && frac <= T::lit(0.2) {
            // dipole fully inside one cluster: nothing to report
            continue;
        }
        let mut wsum = T::zero();
        let mut pos = [T::zero(), T::zero()];
        for &k in &members {
            let weight = w.winding.data[k].abs();
            let p = cell_zero(grid, state, k % cx, k / cx);
            pos[0] += weight * p[0];
            pos[1] += weight * p[1];
            wsum += weight;
        }
        let status = if frac > T::lit(0.2) {
            DetectionStatus::Ambiguous
        } else if degree.abs() >= 2 {
            DetectionStatus::HighDegree
        } else {
            DetectionStatus::Ok
        };
        out.push(Detection {
            pos: [pos[0] / wsum, pos[1] / wsum],
            degree,
            winding: total,
            status,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Collided,
    Exited,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Active => "active",
            TrackStatus::Collided => "collided",
            TrackStatus::Exited => "exited",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackSample<T> {
    pub step: u64,
    pub t: T,
    pub pos: Point<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VortexTrack<T> {
    pub id: usize,
    pub degree: i32,
    pub samples: Vec<TrackSample<T>>,
    pub status: TrackStatus,
    /// Index of the frame where the track stopped being matched.
    pub end_frame: Option<usize>,
}

impl<T: Real> VortexTrack<T> {
    pub fn last(&self) -> Point<T> {
        self.samples.last().map(|s| s.pos).unwrap_or([T::zero(), T::zero()])
    }

    /// Largest distance from the first sample.
    pub fn max_displacement(&self) -> T {
        let p0 = self.samples[0].pos;
        self.samples
            .iter()
            .map(|s| ((s.pos[0] - p0[0]).powi(2) + (s.pos[1] - p0[1]).powi(2)).sqrt())
            .fold(T::zero(), T::max)
    }

    /// Position at time `t` by linear interpolation; `None` outside the
    /// sampled range.
    pub fn position_at(&self, t: T) -> Option<Point<T>> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let k = s.partition_point(|x| x.t <= t);
        if k == 0 {
            return Some(s[0].pos);
        }
        if k >= s.len() {
            return Some(s[s.len() - 1].pos);
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { T::zero() };
        Some([a.pos[0] + w * (b.pos[0] - a.pos[0]), a.pos[1] + w * (b.pos[1] - a.pos[1])])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T> {
    pub step: u64,
    pub t: T,
    pub detections: Vec<Detection<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracking<T> {
    pub tracks: Vec<VortexTrack<T>>,
    /// Tie-breaks and other notable events, one line each.
    pub events: Vec<String>,
}

fn dist<T: Real>(a: Point<T>, b: Point<T>) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Greedy nearest-neighbour tracking with a per-frame jump cap. Degrees are
/// conserved along tracks; unmatched tracks end as `exited` when their last
/// position is within `max_jump` of ∂Ω and as `collided` otherwise.
pub fn track<T: Real>(grid: &DomainGrid<T>, frames: &[Frame<T>], max_jump: T) -> Tracking<T> {
    let mut tracks: Vec<VortexTrack<T>> = Vec::new();
    let mut events = Vec::new();
    for (fi, frame) in frames.iter().enumerate() {
        let active: Vec<usize> = tracks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.status == TrackStatus::Active)
            .map(|(k, _)| k)
            .collect();
        let mut pairs: Vec<(T, usize, usize)> = Vec::new();
        for &tk in &active {
            for (dk, d) in frame.detections.iter().enumerate() {
                if d.degree != tracks[tk].degree {
                    continue;
                }
                let dd = dist(tracks[tk].last(), d.pos);
                if dd <= max_jump {
                    pairs.push((dd, tk, dk));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut t_used = vec![false; tracks.len()];
        let mut d_used = vec![false; frame.detections.len()];
        for (idx, &(dd, tk, dk)) in pairs.iter().enumerate() {
            if t_used[tk] || d_used[dk] {
                continue;
            }
            // ambiguity: another free candidate for this detection within 10%
            if let Some(&(d2, tk2, _)) = pairs[idx + 1..].iter().find(|p| p.2 == dk && !t_used[p.1] && p.1 != tk) {
                if d2 <= dd * T::lit(1.1) {
                    events.push(format!(
                        "step {}: tracks {} and {} both near detection {}; kept {}",
                        frame.step, tracks[tk].id, tracks[tk2].id, dk, tracks[tk].id
                    ));
                }
            }
            t_used[tk] = true;
            d_used[dk] = true;
            tracks[tk].samples.push(TrackSample {
                step: frame.step,
                t: frame.t,
                pos: frame.detections[dk].pos,
            });
        }
        let lost: Vec<usize> = active.iter().copied().filter(|&k| !t_used[k]).collect();
        for &k in &lost {
            let p = tracks[k].last();
            tracks[k].status = if grid.boundary_distance(p) <= max_jump {
                TrackStatus::Exited
            } else {
                TrackStatus::Collided
            };
            tracks[k].end_frame = Some(fi);
            events.push(format!("step {}: track {} {}", frame.step, tracks[k].id, tracks[k].status.as_str()));
        }
        for (dk, d) in frame.detections.iter().enumerate() {
            if d_used[dk] || d.status != DetectionStatus::Ok {
                if d.status != DetectionStatus::Ok {
                    events.push(format!("step {}: detection {} {:?} winding {:e}", frame.step, dk, d.status, d.winding.to_f64_()));
                }
                continue;
            }
            let id = tracks.len();
            if fi > 0 {
                events.push(format!("step {}: new track {}", frame.step, id));
            }
            tracks.push(VortexTrack {
                id,
                degree: d.degree,
                samples: vec![TrackSample {
                    step: frame.step,
                    t: frame.t,
                    pos: d.pos,
                }],
                status: TrackStatus::Active,
                end_frame: None,
            });
        }
    }
    Tracking { tracks, events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeField;
    use crate::tdgl::{ansatz, apply_gauge, london_potential, CoreProfile, VortexSpec};

    fn grid(n: usize) -> DomainGrid<f64> {
        DomainGrid::square(1.0, n).unwrap()
    }

    fn vs(list: &[([f64; 2], i32)]) -> Vec<VortexSpec<f64>> {
        list.iter().map(|&(pos, degree)| VortexSpec { pos, degree }).collect()
    }

    fn state_with(g: &DomainGrid<f64>, list: &[([f64; 2], i32)], eps: f64) -> State<f64> {
        let mut s = State::vacuum(g);
        s.v = ansatz(g, &vs(list), eps, CoreProfile::Tanh);
        s.b = london_potential(g, &s.v, 1e-11).unwrap();
        s
    }

    #[test]
    fn single_vortex_winding_and_detection() {
        let g = grid(81);
        let s = state_with(&g, &[([0.4, 0.6], 1)], 0.05);
        let w = vorticity(&g, &s);
        assert!((w.total_winding - 2.0 * std::f64::consts::PI).abs() < 1e-8);
        let hot = w.winding.data.iter().filter(|x| x.abs() > 1.0).count();
        assert!(hot >= 1 && hot <= 4);
        let d = detect(&g, &s);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].degree, 1);
        assert!(dist(d[0].pos, [0.4, 0.6]) < g.h, "{:?}", d[0].pos);
    }

    #[test]
    fn vacuum_has_no_vortices() {
        let g = grid(33);
        let mut s = State::vacuum(&g);
        s.b = EdgeField::from_fn(&g, |p| [p[1] * 0.3, -p[0]]);
        let w = vorticity(&g, &s);
        assert!(w.winding.data.iter().all(|x| x.abs() < 1e-12));
        assert!(detect(&g, &s).is_empty());
    }

    #[test]
    fn pair_winding_cancels() {
        let g = grid(81);
        let s = state_with(&g, &[([0.35, 0.5], 1), ([0.65, 0.5], -1)], 0.05);
        let w = vorticity(&g, &s);
        assert!(w.total_winding.abs() < 1e-8);
        let d = detect(&g, &s);
        assert_eq!(d.len(), 2);
        let degs: Vec<i32> = d.iter().map(|x| x.degree).collect();
        assert!(degs.contains(&1) && degs.contains(&-1));
    }

    #[test]
    fn like_pair_detected_separately() {
        let g = grid(101);
        let s = state_with(&g, &[([0.35, 0.5], 1), ([0.65, 0.5], 1)], 0.04);
        let mut d = detect(&g, &s);
        d.sort_by(|a, b| a.pos[0].partial_cmp(&b.pos[0]).unwrap());
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|x| x.degree == 1));
        assert!(dist(d[0].pos, [0.35, 0.5]) < g.h && dist(d[1].pos, [0.65, 0.5]) < g.h);
    }

    #[test]
    fn mu_is_gauge_invariant() {
        let g = grid(41);
        let s = state_with(&g, &[([0.45, 0.55], -1)], 0.08);
        let xi = NodeField::from_fn(&g, |p| (4.0 * p[0] * p[1]).sin() * 3.0);
        let s2 = apply_gauge(&g, &s, &xi);
        let a = vorticity(&g, &s);
        let b = vorticity(&g, &s2);
        for (x, y) in a.mu.data.iter().zip(&b.mu.data) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        for (x, y) in a.winding.data.iter().zip(&b.winding.data) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn static_velocity_vanishes_and_zero_dt_rejected() {
        let g = grid(33);
        let s = state_with(&g, &[([0.5, 0.5], 1)], 0.1);
        let mut n = s.clone();
        n.t = 0.1;
        let v = velocity(&g, &s, &n).unwrap();
        assert_eq!(v.edges.max_abs(), 0.0);
        assert!(matches!(velocity(&g, &s, &s), Err(VortexError::NonPositiveDt(_))));
        let w = vorticity(&g, &s);
        assert_eq!(continuity_residual(&g, &w.mu, &w.mu, &v.edges, 0.1), 0.0);
    }

    #[test]
    fn translated_vortex_velocity_integral() {
        // ∫V ≈ 2π δ⊥/dt for a translation δ
        let g = grid(161);
        let eps = 0.05;
        let dt = 0.01;
        // bare ansatz (B = 0): the discrete London potential is not smooth in
        // the vortex position
        let bare = |p: [f64; 2]| {
            let mut s = State::vacuum(&g);
            s.v = ansatz(&g, &vs(&[(p, 1)]), eps, CoreProfile::Tanh);
            s
        };
        let a = bare([0.5, 0.5]);
        let mut b = bare([0.51, 0.5]);
        b.t = dt;
        let v = velocity(&g, &a, &b).unwrap();
        let h2 = g.h * g.h;
        let i1: f64 = v.v1.data.iter().sum::<f64>() * h2;
        let i2: f64 = v.v2.data.iter().sum::<f64>() * h2;
        let expect = [0.0, 2.0 * std::f64::consts::PI * 0.01 / dt];
        assert!((i2 - expect[1]).abs() < 0.1 * expect[1], "{i1} {i2}");
        assert!(i1.abs() < 0.1 * expect[1], "{i1} {i2}");
    }

    #[test]
    fn velocity_is_gauge_invariant() {
        let g = grid(41);
        let a = state_with(&g, &[([0.5, 0.5], 1)], 0.08);
        let mut b = state_with(&g, &[([0.52, 0.49], 1)], 0.08);
        b.t = 0.05;
        let xi = NodeField::from_fn(&g, |p| p[0] * 2.0 - (3.0 * p[1]).cos());
        let v0 = velocity(&g, &a, &b).unwrap();
        let v1 = velocity(&g, &apply_gauge(&g, &a, &xi), &apply_gauge(&g, &b, &xi)).unwrap();
        for (x, y) in v0.edges.x.iter().zip(&v1.edges.x).chain(v0.edges.y.iter().zip(&v1.edges.y)) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn tracking_stationary_and_termination() {
        let g = grid(65);
        let d = |p: [f64; 2], deg: i32| Detection {
            pos: p,
            degree: deg,
            winding: 2.0 * std::f64::consts::PI * deg as f64,
            status: DetectionStatus::Ok,
        };
        let mut frames: Vec<Frame<f64>> = (0..100)
            .map(|k| Frame {
                step: k,
                t: k as f64,
                detections: vec![d([0.5, 0.5 + 1e-4 * (k % 3) as f64], 1)],
            })
            .collect();
        let tr = track(&g, &frames, 5.0 * g.h);
        assert_eq!(tr.tracks.len(), 1);
        assert_eq!(tr.tracks[0].samples.len(), 100);
        assert!(tr.tracks[0].max_displacement() <= g.h);
        // a vortex that reaches the wall and disappears
        frames.truncate(3);
        frames[0].detections.push(d([0.03, 0.3], -1));
        let tr = track(&g, &frames, 5.0 * g.h);
        let t1 = tr.tracks.iter().find(|t| t.degree == -1).unwrap();
        assert_eq!(t1.status, TrackStatus::Exited);
        assert_eq!(t1.end_frame, Some(1));
    }

    #[test]
    fn tracking_pair_collision() {
        let g = grid(65);
        let mk = |x: f64, deg: i32| Detection {
            pos: [x, 0.5],
            degree: deg,
            winding: 0.0,
            status: DetectionStatus::Ok,
        };
        let frames = vec![
            Frame { step: 0, t: 0.0, detections: vec![mk(0.4, 1), mk(0.6, -1)] },
            Frame { step: 1, t: 1.0, detections: vec![mk(0.45, 1), mk(0.55, -1)] },
            Frame { step: 2, t: 2.0, detections: vec![] },
        ];
        let tr = track(&g, &frames, 0.1);
        assert_eq!(tr.tracks.len(), 2);
        for t in &tr.tracks {
            assert_eq!(t.status, TrackStatus::Collided);
            assert_eq!(t.end_frame, Some(2));
        }
    }

    #[test]
    fn track_interpolation() {
        let t = VortexTrack {
            id: 0,
            degree: 1,
            samples: vec![
                TrackSample { step: 0, t: 0.0, pos: [0.0, 0.0] },
                TrackSample { step: 1, t: 1.0, pos: [1.0, 2.0] },
            ],
            status: TrackStatus::Active,
            end_frame: None,
        };
        assert_eq!(t.position_at(0.25), Some([0.25, 0.5]));
        assert_eq!(t.position_at(1.5), None);
    }
}
