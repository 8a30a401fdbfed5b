//! Orchestration of precompute / init / simulate / reduce / compare / gamma.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use glvortex_core::applied::{classify_regime, precompute, DriveError, PrecomputedFields, RegimeInfo};
use glvortex_core::energetics::{
    boundary_modulus_integral, compute_gamma, div_norm, energy_identity, energy_parts, monitors, well_prepared_check, LedgerRow, MonitorConfig, MonitorRecord,
    WellPreparedVerdict,
};
use glvortex_core::grid::{cell_to_node, DomainGrid, NodeField, Point};
use glvortex_core::reduced::{conserved_h, integrate, oscillation, renormalized_energy_at, GreenCache, LawCoefficients, LawFields, ReducedState, Trajectory};
use glvortex_core::snapshot::{write_node_field, write_state, write_edge_field};
use glvortex_core::tdgl::{init_well_prepared, State, Stepper};
use glvortex_core::vortex::{detect_from, track, vorticity, DetectionStatus, Frame, Tracking};

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::io::{calibration_value, num, OutDir};

/// Solver tolerance for the elliptic problems behind a run.
pub const TOL: f64 = 1e-10;

/// Everything a run derives from the drive before stepping.
#[derive(Clone, Debug)]
pub struct Context {
    pub grid: DomainGrid<f64>,
    pub epsilon: f64,
    pub pre: PrecomputedFields<f64>,
    /// `None` when there is no drive at all.
    pub info: Option<RegimeInfo<f64>>,
    /// Acceleration scale; `|log ε|` without a drive.
    pub lambda: f64,
    pub k_ex: f64,
}

impl Context {
    pub fn regime_label(&self) -> String {
        self.info.as_ref().map(|i| i.regime.to_string()).unwrap_or_else(|| "none".into())
    }

    pub fn law(&self, cfg: &RunConfig) -> LawCoefficients<f64> {
        let base = match &self.info {
            Some(i) => LawCoefficients::from_regime(i),
            None => LawCoefficients {
                c_w: 1.0,
                alpha: 0.0,
                beta: 0.0,
            },
        };
        LawCoefficients {
            c_w: cfg.compare.c_w.unwrap_or(base.c_w),
            alpha: cfg.compare.alpha.unwrap_or(base.alpha),
            beta: cfg.compare.beta.unwrap_or(base.beta),
        }
    }
}

pub fn context(cfg: &RunConfig, grid: &DomainGrid<f64>, epsilon: f64) -> Result<Context, HarnessError> {
    let drive = cfg.drive_spec();
    let pre = precompute(&drive, grid, TOL)?;
    let info = match classify_regime(drive.j_ex, drive.h_ex, epsilon, cfg.regime_override()) {
        Ok(i) => {
            for w in &i.warnings {
                log::warn!("{w}");
            }
            Some(i)
        }
        Err(DriveError::NoDrive) => None,
        Err(e) => return Err(e.into()),
    };
    let (lambda, k_ex) = match &info {
        Some(i) => (i.lambda, i.k_ex),
        None => (epsilon.ln().abs(), 0.0),
    };
    Ok(Context {
        grid: grid.clone(),
        epsilon,
        pre,
        info,
        lambda,
        k_ex,
    })
}

/// Smallest pairwise or boundary distance of a set of points.
fn separation(grid: &DomainGrid<f64>, pts: &[Point<f64>]) -> f64 {
    glvortex_core::reduced::min_separation(grid, pts)
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Horizon in accelerated units (`T·λ` original time).
    pub accelerated: bool,
    /// Stop once detections violate this separation or change in number.
    pub stop_at_sigma: Option<f64>,
    /// Ledger/track stride override (steps).
    pub stride: Option<usize>,
    /// Horizon override (same units as `time.T`).
    pub t_end: Option<f64>,
    /// Keep `h′` at every ledger row.
    pub keep_fields: bool,
}

impl SimOptions {
    pub fn from_config(cfg: &RunConfig, accelerated: bool) -> Self {
        Self {
            accelerated: accelerated || cfg.time.accelerated,
            stop_at_sigma: None,
            stride: None,
            t_end: None,
            keep_fields: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub ctx: Context,
    pub rows: Vec<LedgerRow<f64>>,
    pub frames: Vec<Frame<f64>>,
    pub tracking: Tracking<f64>,
    pub monitors: Vec<MonitorRecord<f64>>,
    pub initial: State<f64>,
    pub last: State<f64>,
    /// Induced field `h′` at nodes for every ledger row (when kept).
    pub fields: Vec<(f64, NodeField<f64>)>,
    /// Largest distance of a total winding from `2πℤ` over all ledger rows.
    pub winding_error: f64,
    /// Detector degrees of every detection at separation ≥ 4ε.
    pub degrees_seen: Vec<i32>,
    /// Whether every detection at separation ≥ 4ε had status Ok.
    pub detections_clean: bool,
    /// Original time at which the separation stop fired, if any.
    pub t_star: Option<f64>,
    pub abort: Option<String>,
    pub dt: f64,
    pub runtime_s: f64,
}

impl SimOutput {
    pub fn tau(&self, t: f64) -> f64 {
        t / self.ctx.lambda
    }
}

fn boundary_c(cfg: &RunConfig) -> f64 {
    cfg.monitors.boundary_c.or_else(|| calibration_value("boundary_C")).unwrap_or(f64::INFINITY)
}

pub fn monitor_config(cfg: &RunConfig, ctx: &Context) -> MonitorConfig<f64> {
    let mut m = MonitorConfig::new(ctx.pre.sup_z, cfg.init.c0, ctx.k_ex, ctx.lambda, ctx.epsilon, ctx.grid.h, boundary_c(cfg));
    m.t0 = cfg.monitors.t0;
    m
}

/// Runs the stepper for one `(grid, ε)` pair. Snapshots, CSVs and the
/// manifest go to `out` when given.
pub fn simulate_with(cfg: &RunConfig, ctx: &Context, opts: &SimOptions, mut out: Option<&mut OutDir>) -> Result<SimOutput, HarnessError> {
    let started = Instant::now();
    let grid = &ctx.grid;
    let eps = ctx.epsilon;
    let horizon = opts.t_end.unwrap_or(cfg.time.t);
    let t_end = if opts.accelerated { horizon * ctx.lambda } else { horizon };
    let scfg = cfg.stepper_config(grid, eps, t_end);
    let init = cfg.init_spec();
    let state0 = init_well_prepared(&init, &ctx.pre, grid, &scfg)?;
    let mut stepper = Stepper::new(grid, &ctx.pre, &scfg)?;
    let stride = opts.stride.unwrap_or(cfg.time.stride).max(1) as u64;
    let snap_stride = cfg.time.snapshot_stride.unwrap_or(cfg.time.stride) as u64;
    let n_steps = scfg.n_steps();
    let snap_dir = match out.as_deref_mut() {
        Some(o) => Some(o.subdir("snapshots")?),
        None => None,
    };
    let snapshot = |st: &State<f64>, out: &mut Option<&mut OutDir>| -> Result<(), HarnessError> {
        if let (Some(dir), Some(o)) = (&snap_dir, out.as_deref_mut()) {
            let files = write_state(dir, grid, &format!("state_{:08}_", st.step), st)?;
            o.register_all(files);
        }
        Ok(())
    };

    let mut rows = Vec::new();
    let mut frames = Vec::new();
    let mut fields = Vec::new();
    let mut winding_error: f64 = 0.0;
    let mut degrees_seen = Vec::new();
    let mut clean = true;
    let mut t_star = None;
    let n_init = init.vortices.len();
    let mut cum = (0.0, 0.0, 0.0);

    let mut record = |st: &State<f64>, ident: Option<(f64, f64, f64)>, cum: (f64, f64, f64), rows: &mut Vec<LedgerRow<f64>>| -> Frame<f64> {
        let parts = energy_parts(grid, st, Some(&ctx.pre), eps);
        let (dissipation, interaction, residual) = ident.unwrap_or((0.0, 0.0, 0.0));
        rows.push(LedgerRow {
            step: st.step,
            t: st.t,
            tau: st.t / ctx.lambda,
            f: parts.free(),
            ftilde: parts.modified(),
            dissipation,
            interaction,
            residual,
            supv: st.max_modulus(),
            divb_norm: div_norm(grid, &st.b),
            cum_dissipation: cum.0,
            int_dv: cum.1,
            int_fterm: cum.2,
            boundary_modulus: boundary_modulus_integral(grid, &st.v),
        });
        let w = vorticity(grid, st);
        let k = (w.total_winding / std::f64::consts::TAU).round();
        winding_error = winding_error.max((w.total_winding - k * std::f64::consts::TAU).abs());
        if opts.keep_fields {
            fields.push((st.t, cell_to_node(grid, &st.induced_field(grid))));
        }
        let detections = detect_from(grid, st, &w);
        let pts: Vec<Point<f64>> = detections.iter().map(|d| d.pos).collect();
        for (k, d) in detections.iter().enumerate() {
            let mut others = pts.clone();
            others.remove(k);
            let sep = others
                .iter()
                .map(|q| ((q[0] - d.pos[0]).powi(2) + (q[1] - d.pos[1]).powi(2)).sqrt())
                .fold(grid.boundary_distance(d.pos), f64::min);
            if sep >= 4.0 * eps {
                degrees_seen.push(d.degree);
                clean &= d.status == DetectionStatus::Ok;
            }
        }
        Frame {
            step: st.step,
            t: st.t,
            detections,
        }
    };

    let mut state = state0.clone();
    frames.push(record(&state, None, cum, &mut rows));
    snapshot(&state, &mut out)?;
    let mut abort = None;
    let mut last_good = state.clone();
    for k in 1..=n_steps {
        let at_row = k % stride == 0 || k == n_steps;
        let prev = if at_row { Some(state.clone()) } else { None };
        let stats = match stepper.step(&mut state) {
            Ok(s) => s,
            Err(e) => {
                abort = Some(e.to_string());
                state = last_good.clone();
                break;
            }
        };
        let dt = scfg.dt;
        cum.0 += dt * (stats.dv_sq + stats.db_sq);
        cum.1 += dt * stats.dv_sq.sqrt();
        cum.2 += dt * stats.f_term;
        if at_row {
            let it = energy_identity(grid, prev.as_ref().unwrap(), &state, &ctx.pre, eps).map_err(|e| HarnessError::Numerical(e.to_string()))?;
            let frame = record(&state, Some((it.dissipation, it.interaction, it.residual)), cum, &mut rows);
            let stop = opts.stop_at_sigma.map(|s| {
                let pts: Vec<Point<f64>> = frame.detections.iter().map(|d| d.pos).collect();
                pts.len() != n_init || (!pts.is_empty() && separation(grid, &pts) < s)
            });
            frames.push(frame);
            last_good = state.clone();
            if snap_stride > 0 && k % snap_stride == 0 && k != n_steps {
                snapshot(&state, &mut out)?;
            }
            if stop == Some(true) {
                t_star = Some(state.t);
                break;
            }
        }
    }
    if state.step != state0.step {
        snapshot(&state, &mut out)?;
    }
    let max_jump = cfg.time.max_jump.unwrap_or(0.1 * grid.lx.min(grid.ly));
    let tracking = track(grid, &frames, max_jump);
    let mcfg = monitor_config(cfg, ctx);
    let mons = monitors(&rows, &mcfg);
    let result = SimOutput {
        ctx: ctx.clone(),
        rows,
        frames,
        tracking,
        monitors: mons,
        initial: state0,
        last: state,
        fields,
        winding_error,
        degrees_seen,
        detections_clean: clean,
        t_star,
        abort,
        dt: scfg.dt,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    if let Some(o) = out {
        write_sim_outputs(o, &result)?;
    }
    Ok(result)
}

pub fn energy_rows(rows: &[LedgerRow<f64>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                num(r.t),
                num(r.tau),
                num(r.f),
                num(r.ftilde),
                num(r.dissipation),
                num(r.interaction),
                num(r.residual),
                num(r.supv),
                num(r.divb_norm),
            ]
        })
        .collect()
}

pub const ENERGY_HEADER: [&str; 10] = ["step", "t", "tau", "F", "Ftilde", "dissipation", "interaction", "residual", "supv", "divB_norm"];
pub const TRACK_HEADER: [&str; 7] = ["step", "t", "tau", "vortex_id", "x", "y", "degree"];

fn write_sim_outputs(o: &mut OutDir, r: &SimOutput) -> Result<(), HarnessError> {
    o.write_csv("energy.csv", &ENERGY_HEADER, energy_rows(&r.rows))?;
    let mut tracks = Vec::new();
    for f in &r.frames {
        for tr in &r.tracking.tracks {
            if let Some(s) = tr.samples.iter().find(|s| s.step == f.step) {
                tracks.push(vec![
                    s.step.to_string(),
                    num(s.t),
                    num(r.tau(s.t)),
                    tr.id.to_string(),
                    num(s.pos[0]),
                    num(s.pos[1]),
                    tr.degree.to_string(),
                ]);
            }
        }
    }
    o.write_csv("tracks.csv", &TRACK_HEADER, tracks)?;
    let mons: Vec<Vec<String>> = r
        .monitors
        .iter()
        .map(|m| vec![num(m.t), m.id.to_string(), num(m.lhs), num(m.rhs), num(m.slack), m.verdict.to_string()])
        .collect();
    o.write_csv("monitors.csv", &["t", "monitor_id", "lhs", "rhs", "slack", "verdict"], mons)?;
    let mut events = String::new();
    for f in &r.frames {
        for (ci, d) in f.detections.iter().enumerate() {
            if d.status != DetectionStatus::Ok {
                events.push_str(&format!("step={} cluster={} winding={} status={:?}\n", f.step, ci, num(d.winding), d.status));
            }
        }
    }
    for e in &r.tracking.events {
        events.push_str(e);
        events.push('\n');
    }
    o.write_text("events.log", &events)?;
    let summary = SimSummary {
        epsilon: r.ctx.epsilon,
        nx: r.ctx.grid.nx,
        ny: r.ctx.grid.ny,
        h: r.ctx.grid.h,
        dt: r.dt,
        regime: r.ctx.regime_label(),
        lambda: r.ctx.lambda,
        k_ex: r.ctx.k_ex,
        sup_z: r.ctx.pre.sup_z,
        steps: r.last.step,
        t_final: r.last.t,
        t_star: r.t_star,
        winding_error: r.winding_error,
        monitor_failures: r.monitors.iter().filter(|m| !m.verdict).count(),
        track_status: r.tracking.tracks.iter().map(|t| t.status.as_str().to_string()).collect(),
        abort: r.abort.clone(),
    };
    o.write_json("summary.json", &summary)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SimSummary {
    pub epsilon: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub dt: f64,
    pub regime: String,
    pub lambda: f64,
    pub k_ex: f64,
    pub sup_z: f64,
    pub steps: u64,
    pub t_final: f64,
    pub t_star: Option<f64>,
    pub winding_error: f64,
    pub monitor_failures: usize,
    pub track_status: Vec<String>,
    pub abort: Option<String>,
}

/// `glvortex simulate`.
pub fn simulate(cfg: &RunConfig, out_dir: &Path, accelerated: bool) -> Result<SimOutput, HarnessError> {
    let grid = cfg.domain_grid()?;
    let ctx = context(cfg, &grid, cfg.gl.epsilon)?;
    let mut out = OutDir::create(out_dir)?;
    let r = simulate_with(cfg, &ctx, &SimOptions::from_config(cfg, accelerated), Some(&mut out))?;
    out.finish()?;
    if let Some(a) = &r.abort {
        return Err(HarnessError::Numerical(a.clone()));
    }
    Ok(r)
}

/// `glvortex precompute`: writes h0, f0, f1, f, Z and the regime summary.
pub fn precompute_cmd(cfg: &RunConfig, out_dir: &Path) -> Result<Context, HarnessError> {
    let grid = cfg.domain_grid()?;
    let ctx = context(cfg, &grid, cfg.gl.epsilon)?;
    let mut out = OutDir::create(out_dir)?;
    let dir = out.subdir("fields")?;
    for (name, f) in [("h0", &ctx.pre.h0), ("f0", &ctx.pre.f0), ("f1", &ctx.pre.f1), ("f", &ctx.pre.f)] {
        out.register_all(write_node_field(&dir, &grid, name, f, 0.0)?);
    }
    out.register_all(write_edge_field(&dir, &grid, "Z", &ctx.pre.z, 0.0)?);
    let mut text = format!(
        "regime:{}\nk_ex:{}\nlambda:{}\nsup_Z:{}\nosc_f1:{}\n",
        ctx.regime_label(),
        num(ctx.k_ex),
        num(ctx.lambda),
        num(ctx.pre.sup_z),
        num(oscillation(&ctx.pre.f1))
    );
    if let Some(i) = &ctx.info {
        text.push_str(&format!("alpha:{}\nbeta:{}\n", num(i.alpha), num(i.beta)));
        for w in &i.warnings {
            text.push_str(&format!("warning:{w}\n"));
        }
    }
    out.write_text("regime.txt", &text)?;
    out.finish()?;
    Ok(ctx)
}

#[derive(Clone, Debug, Serialize)]
pub struct InitReport {
    pub ftilde0: f64,
    pub reference: f64,
    pub excess: f64,
    pub lower: f64,
    pub upper: f64,
    pub well_prepared: bool,
    pub gamma: f64,
    pub renormalized_energy: f64,
    pub detections: Vec<(f64, f64, i32)>,
}

/// Well-preparedness verdict of an initial state.
pub fn well_prepared(cfg: &RunConfig, ctx: &Context, state0: &State<f64>, gamma: f64) -> Result<(WellPreparedVerdict<f64>, f64), HarnessError> {
    let spec = cfg.init_spec();
    let pts: Vec<Point<f64>> = spec.vortices.iter().map(|v| v.pos).collect();
    let ds: Vec<i32> = spec.vortices.iter().map(|v| v.degree).collect();
    let w = if pts.is_empty() { 0.0 } else { renormalized_energy_at(&ctx.grid, &pts, &ds, TOL)? };
    let mult = calibration_value("disc_multiplier").unwrap_or(20.0);
    let v = well_prepared_check(&ctx.grid, state0, &ctx.pre, pts.len(), cfg.init.c0, ctx.k_ex.max(1.0), gamma, w, ctx.epsilon, mult);
    Ok((v, w))
}

/// Reference value of the core constant used by the well-preparedness band.
pub fn reference_gamma() -> Result<f64, HarnessError> {
    Ok(compute_gamma(20.0, 0.01).map_err(|e| HarnessError::Numerical(e.to_string()))?.gamma)
}

/// `glvortex init`.
pub fn init_cmd(cfg: &RunConfig, out_dir: &Path) -> Result<InitReport, HarnessError> {
    let grid = cfg.domain_grid()?;
    let ctx = context(cfg, &grid, cfg.gl.epsilon)?;
    let scfg = cfg.stepper_config(&grid, ctx.epsilon, 0.0);
    let st = init_well_prepared(&cfg.init_spec(), &ctx.pre, &grid, &scfg)?;
    let gamma = reference_gamma()?;
    let (v, w) = well_prepared(cfg, &ctx, &st, gamma)?;
    let mut out = OutDir::create(out_dir)?;
    let dir = out.subdir("snapshots")?;
    out.register_all(write_state(&dir, &grid, "init_", &st)?);
    let w_field = vorticity(&grid, &st);
    let det = detect_from(&grid, &st, &w_field);
    let report = InitReport {
        ftilde0: v.ftilde0,
        reference: v.reference,
        excess: v.excess,
        lower: v.lower,
        upper: v.upper,
        well_prepared: v.verdict,
        gamma,
        renormalized_energy: w,
        detections: det.iter().map(|d| (d.pos[0], d.pos[1], d.degree)).collect(),
    };
    out.write_json("init.json", &report)?;
    out.finish()?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct ReduceOutput {
    pub trajectory: Trajectory<f64>,
    pub fields: LawFields<f64>,
    pub law: LawCoefficients<f64>,
    pub osc_f1: f64,
    pub f1_drift: Vec<f64>,
}

/// Integrates the reduced law from `a0` up to accelerated time `t_end`.
pub fn reduce_with(cfg: &RunConfig, ctx: &Context, a0: &[Point<f64>], degrees: &[i32], t_end: f64) -> Result<ReduceOutput, HarnessError> {
    let fields = LawFields::new(&ctx.grid, &ctx.pre);
    let law = ctx.law(cfg);
    let st = ReducedState {
        positions: a0.to_vec(),
        degrees: degrees.to_vec(),
        tau: 0.0,
    };
    let mut cache = GreenCache::new(&ctx.grid, TOL);
    let green = if law.c_w != 0.0 { Some(&mut cache) } else { None };
    let traj = integrate(&st, &law, &fields, green, t_end, cfg.reduce.dtau, cfg.sigma_star(), cfg.reduce.stride)?;
    let cons = conserved_h(&traj, &fields);
    Ok(ReduceOutput {
        osc_f1: oscillation(&ctx.pre.f1),
        f1_drift: cons.max_drift.clone(),
        trajectory: traj,
        fields,
        law,
    })
}

fn reduce_horizon(cfg: &RunConfig) -> f64 {
    cfg.reduce.t.unwrap_or(cfg.time.t)
}

/// `glvortex reduce`.
pub fn reduce(cfg: &RunConfig, out_dir: &Path) -> Result<ReduceOutput, HarnessError> {
    let grid = cfg.domain_grid()?;
    let ctx = context(cfg, &grid, cfg.gl.epsilon)?;
    let spec = cfg.init_spec();
    let a0: Vec<Point<f64>> = spec.vortices.iter().map(|v| v.pos).collect();
    let d: Vec<i32> = spec.vortices.iter().map(|v| v.degree).collect();
    let r = reduce_with(cfg, &ctx, &a0, &d, reduce_horizon(cfg))?;
    let mut out = OutDir::create(out_dir)?;
    write_reduce_outputs(&mut out, &r)?;
    out.finish()?;
    Ok(r)
}

fn write_reduce_outputs(out: &mut OutDir, r: &ReduceOutput) -> Result<(), HarnessError> {
    let tr = &r.trajectory;
    let mut rows = Vec::new();
    let mut cons = Vec::new();
    for (tau, ps) in tr.taus.iter().zip(&tr.positions) {
        for (i, p) in ps.iter().enumerate() {
            rows.push(vec![num(*tau), i.to_string(), num(p[0]), num(p[1]), tr.degrees[i].to_string()]);
            cons.push(vec![num(*tau), i.to_string(), num(r.fields.f1.value(*p))]);
        }
    }
    out.write_csv("ode_tracks.csv", &["tau", "vortex_id", "x", "y", "degree"], rows)?;
    out.write_csv("conserved.csv", &["tau", "vortex_id", "f1_value"], cons)?;
    out.write_json(
        "reduce.json",
        &serde_json::json!({
            "c_W": r.law.c_w, "alpha": r.law.alpha, "beta": r.law.beta,
            "t_star": tr.t_star, "halted": tr.halted,
            "osc_f1": r.osc_f1, "f1_drift": r.f1_drift,
        }),
    )?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderMember {
    pub epsilon: f64,
    pub nx: usize,
    pub h: f64,
    pub dt: f64,
    pub lambda: f64,
    pub regime: String,
    #[serde(skip)]
    pub law: LawCoefficients<f64>,
    pub discrepancy: f64,
    pub t_star_pde: f64,
    pub t_star_ode: f64,
    pub samples: usize,
    /// Bound on the track-alignment interpolation error.
    pub alignment_error: f64,
    pub osc_f1: f64,
    pub f1_drift_pde: Vec<f64>,
    pub f1_drift_ode: Vec<f64>,
    pub winding_error: f64,
    pub monitor_failures: usize,
    pub runtime_s: f64,
    pub abort: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub c_w: f64,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub sigma_star: f64,
    pub members: Vec<LadderMember>,
    /// `D(ε)` strictly decreasing along the ladder.
    pub monotone: bool,
    pub diameter: f64,
}

/// One ladder member: accelerated PDE run, reduced law from the detected
/// initial vortices, and the sup discrepancy on the common τ grid.
pub fn compare_member(cfg: &RunConfig, eps: f64, out: Option<&mut OutDir>) -> Result<(LadderMember, SimOutput, ReduceOutput), HarnessError> {
    let grid = cfg.ladder_grid(eps)?;
    let ctx = context(cfg, &grid, eps)?;
    let horizon = reduce_horizon(cfg);
    let scfg = cfg.stepper_config(&grid, eps, 0.0);
    let dtau_pde = scfg.dt / ctx.lambda;
    let stride = ((1.0 / (cfg.compare.samples_per_tau.max(1) as f64)) / dtau_pde).round().max(1.0) as usize;
    let sigma = cfg.sigma_star();
    let opts = SimOptions {
        accelerated: true,
        stop_at_sigma: Some(sigma),
        stride: Some(stride),
        t_end: Some(horizon),
        keep_fields: false,
    };
    let sim = simulate_with(cfg, &ctx, &opts, out)?;
    let first = &sim.frames[0];
    let a0: Vec<Point<f64>> = first.detections.iter().map(|d| d.pos).collect();
    let d0: Vec<i32> = first.detections.iter().map(|d| d.degree).collect();
    let red = reduce_with(cfg, &ctx, &a0, &d0, horizon)?;
    let t_pde = sim.t_star.map(|t| t / ctx.lambda).unwrap_or(sim.last.t / ctx.lambda);
    let t_ode = red.trajectory.t_star;
    let limit = t_pde.min(t_ode);
    let mut disc: f64 = 0.0;
    let mut samples = 0;
    let mut vmax: f64 = 0.0;
    let mut prev: Option<(f64, Vec<Point<f64>>)> = None;
    for f in &sim.frames {
        let tau = f.t / ctx.lambda;
        if tau > limit + 1e-12 {
            break;
        }
        let mut pts = Vec::new();
        for (i, tr) in sim.tracking.tracks.iter().enumerate().take(a0.len()) {
            if let Some(s) = tr.samples.iter().find(|s| s.step == f.step) {
                if let Some(q) = red.trajectory.position_at(i, tau) {
                    disc = disc.max(((s.pos[0] - q[0]).powi(2) + (s.pos[1] - q[1]).powi(2)).sqrt());
                }
                pts.push(s.pos);
            }
        }
        if let Some((pt, pp)) = &prev {
            for (a, b) in pp.iter().zip(&pts) {
                let dtau = tau - pt;
                if dtau > 0.0 {
                    vmax = vmax.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / dtau);
                }
            }
        }
        prev = Some((tau, pts));
        samples += 1;
    }
    let f1d_pde: Vec<f64> = sim
        .tracking
        .tracks
        .iter()
        .map(|tr| {
            let f0 = red.fields.f1.value(tr.samples[0].pos);
            tr.samples
                .iter()
                .filter(|s| s.t / ctx.lambda <= limit + 1e-12)
                .map(|s| (red.fields.f1.value(s.pos) - f0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let member = LadderMember {
        epsilon: eps,
        nx: grid.nx,
        h: grid.h,
        dt: sim.dt,
        lambda: ctx.lambda,
        regime: ctx.regime_label(),
        law: red.law,
        discrepancy: disc,
        t_star_pde: t_pde,
        t_star_ode: t_ode,
        samples,
        alignment_error: stride as f64 * dtau_pde * vmax,
        osc_f1: red.osc_f1,
        f1_drift_pde: f1d_pde,
        f1_drift_ode: red.f1_drift.clone(),
        winding_error: sim.winding_error,
        monitor_failures: sim.monitors.iter().filter(|m| !m.verdict).count(),
        runtime_s: sim.runtime_s,
        abort: sim.abort.clone(),
    };
    Ok((member, sim, red))
}

/// `glvortex compare`. Ladder members run concurrently on the rayon pool.
pub fn compare(cfg: &RunConfig, out_dir: &Path) -> Result<CompareReport, HarnessError> {
    use rayon::prelude::*;
    let mut out = OutDir::create(out_dir)?;
    let ladder = if cfg.compare.epsilon_ladder.is_empty() { vec![cfg.gl.epsilon] } else { cfg.compare.epsilon_ladder.clone() };
    let dirs: Vec<_> = ladder.iter().map(|e| out.path(&format!("eps_{e}"))).collect();
    let results: Vec<Result<(LadderMember, Vec<std::path::PathBuf>), HarnessError>> = ladder
        .par_iter()
        .zip(dirs.par_iter())
        .map(|(e, d)| {
            let mut sub = OutDir::create(d)?;
            let (m, _, red) = compare_member(cfg, *e, Some(&mut sub))?;
            write_reduce_outputs(&mut sub, &red)?;
            let manifest = sub.finish()?;
            Ok((m, vec![manifest]))
        })
        .collect();
    let mut members = Vec::new();
    for r in results {
        let (m, files) = r?;
        out.register_all(files);
        members.push(m);
    }
    let report = assemble_report(cfg, members);
    let rows: Vec<Vec<String>> = report
        .members
        .iter()
        .map(|m| vec![num(m.epsilon), m.nx.to_string(), num(m.discrepancy), num(m.t_star_pde), num(m.t_star_ode), num(m.runtime_s)])
        .collect();
    out.write_csv("ladder.csv", &["epsilon", "nx", "D", "t_star_pde", "t_star_ode", "runtime_s"], rows)?;
    let mut stable = report.clone();
    for m in &mut stable.members {
        m.runtime_s = 0.0;
    }
    out.write_json("compare.json", &stable)?;
    out.finish()?;
    if let Some(m) = report.members.iter().find(|m| m.abort.is_some()) {
        return Err(HarnessError::Numerical(format!("ladder member eps = {}: {}", m.epsilon, m.abort.clone().unwrap())));
    }
    Ok(report)
}

pub fn assemble_report(cfg: &RunConfig, members: Vec<LadderMember>) -> CompareReport {
    let law = members.first().map(|m| m.law).unwrap_or(LawCoefficients {
        c_w: f64::NAN,
        alpha: f64::NAN,
        beta: f64::NAN,
    });
    let monotone = members.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
    CompareReport {
        c_w: law.c_w,
        alpha: law.alpha,
        beta: law.beta,
        horizon: reduce_horizon(cfg),
        sigma_star: cfg.sigma_star(),
        members,
        monotone,
        diameter: cfg.grid.lx.hypot(cfg.grid.ly),
    }
}

/// `glvortex gamma`.
pub fn gamma_cmd(out_dir: &Path) -> Result<f64, HarnessError> {
    let a = compute_gamma(20.0, 0.01).map_err(|e| HarnessError::Numerical(e.to_string()))?;
    let b = compute_gamma(40.0, 0.01).map_err(|e| HarnessError::Numerical(e.to_string()))?;
    let mut out = OutDir::create(out_dir)?;
    out.write_text(
        "gamma.txt",
        &format!(
            "gamma:{}\ngamma_R:{}\ngamma_2R:{}\nR:{}\ndr:{}\ngamma_doubled_domain:{}\nstability:{}\n",
            num(a.gamma),
            num(a.gamma_r),
            num(a.gamma_2r),
            num(a.r_max),
            num(a.dr),
            num(b.gamma),
            num((a.gamma - b.gamma).abs())
        ),
    )?;
    let rows: Vec<Vec<String>> = a.profile.iter().enumerate().map(|(k, r)| vec![num(k as f64 * a.dr), num(*r)]).collect();
    out.write_csv("core_profile.csv", &["r", "rho"], rows)?;
    out.finish()?;
    Ok(a.gamma)
}
