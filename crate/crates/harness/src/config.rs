//! Run configuration: TOML parsing, defaults and validation with key paths.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use glvortex_core::applied::{DriveSpec, FourierSeries};
use glvortex_core::grid::DomainGrid;
use glvortex_core::tdgl::{CoreProfile, InitSpec, Scheme, StepperConfig, VortexSpec};

/// One violated invariant, located by its dotted key path(s).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub keys: Vec<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.keys.join(", "), self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration rejected")?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn one(key: &str, message: impl Into<String>) -> Self {
        Self {
            issues: vec![Issue {
                keys: vec![key.into()],
                message: message.into(),
            }],
        }
    }

    /// True when some issue names `key`.
    pub fn mentions(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.keys.iter().any(|k| k == key))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct GridSection {
    #[serde(rename = "Lx", default = "one")]
    pub lx: f64,
    #[serde(rename = "Ly", default = "one")]
    pub ly: f64,
    pub nx: usize,
    /// Defaults to the value making cells square.
    #[serde(default)]
    pub ny: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct GlSection {
    pub epsilon: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum RegimeOverride {
    Id(i64),
    Name(String),
}

impl Default for RegimeOverride {
    fn default() -> Self {
        RegimeOverride::Name("auto".into())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Default)]
pub struct DriveSection {
    #[serde(default)]
    pub j_ex: f64,
    #[serde(default)]
    pub h_ex: f64,
    #[serde(rename = "J_nu", default)]
    pub j_nu: Vec<f64>,
    #[serde(rename = "I_nu", default)]
    pub i_nu: Vec<f64>,
    #[serde(rename = "H", default)]
    pub h: Option<Vec<f64>>,
    #[serde(default)]
    pub regime_override: RegimeOverride,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct VortexEntry {
    pub x: f64,
    pub y: f64,
    pub degree: i32,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    #[default]
    Tanh,
    Unit,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct InitSection {
    #[serde(default)]
    pub vortices: Vec<VortexEntry>,
    #[serde(default = "default_relax")]
    pub relax_steps: usize,
    #[serde(rename = "C0", default = "default_c0")]
    pub c0: f64,
    /// Separation at which reduced and tracked runs stop; defaults to half
    /// the minimal initial separation.
    #[serde(default)]
    pub sigma_star: Option<f64>,
    #[serde(default)]
    pub core_profile: ProfileName,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            vortices: Vec::new(),
            relax_steps: default_relax(),
            c0: default_c0(),
            sigma_star: None,
            core_profile: ProfileName::Tanh,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    ExplicitEuler,
    SemiImplicit,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct TimeSection {
    /// Final time: original units, or accelerated units when `accelerated`.
    #[serde(rename = "T", default)]
    pub t: f64,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    /// Explicit step; defaults to `dt_factor · min(ε², h²/4)`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Semi-implicit only: step `dt_over_eps2 · ε²`, so a ladder keeps the
    /// same step relative to the core time scale.
    #[serde(default)]
    pub dt_over_eps2: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub accelerated: bool,
    /// Ledger and tracking stride in steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Field snapshot stride in steps; 0 keeps only the first and last.
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    /// Tracking jump cap per ledger row; defaults to a tenth of the shorter side.
    #[serde(default)]
    pub max_jump: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t: 0.0,
            dt_factor: default_dt_factor(),
            dt: None,
            dt_over_eps2: None,
            scheme: SchemeName::ExplicitEuler,
            accelerated: false,
            stride: default_stride(),
            snapshot_stride: None,
            max_jump: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ReduceSection {
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    /// Horizon in accelerated time; defaults to `time.T` when accelerated.
    #[serde(rename = "T", default)]
    pub t: Option<f64>,
    #[serde(default = "default_reduce_stride")]
    pub stride: usize,
}

impl Default for ReduceSection {
    fn default() -> Self {
        Self {
            dtau: default_dtau(),
            t: None,
            stride: default_reduce_stride(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Default)]
pub struct CompareSection {
    #[serde(default)]
    pub epsilon_ladder: Vec<f64>,
    /// Grid spacing per ladder member as a fraction of ε; when absent the
    /// `grid` section is used for every member.
    #[serde(default)]
    pub h_over_eps: Option<f64>,
    /// Law switches; absent values follow the regime.
    #[serde(rename = "c_W", default)]
    pub c_w: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    /// Number of PDE samples per unit accelerated time used for `D(ε)`.
    #[serde(default = "default_samples")]
    pub samples_per_tau: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct MonitorSection {
    #[serde(rename = "T0", default = "default_t0")]
    pub t0: f64,
    /// Boundary-modulus constant; defaults to the calibration file.
    #[serde(rename = "boundary_C", default)]
    pub boundary_c: Option<f64>,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self {
            t0: default_t0(),
            boundary_c: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct VerifySection {
    #[serde(default = "default_verify_nx")]
    pub nx: usize,
    /// Flips one link phase in the gauge block (negative control).
    #[serde(default)]
    pub corrupt: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            nx: default_verify_nx(),
            corrupt: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub grid: GridSection,
    pub gl: GlSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub reduce: ReduceSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub monitors: MonitorSection,
    #[serde(default)]
    pub verify: VerifySection,
}

fn one() -> f64 {
    1.0
}
fn default_relax() -> usize {
    200
}
fn default_c0() -> f64 {
    5.0
}
fn default_dt_factor() -> f64 {
    0.2
}
fn default_stride() -> usize {
    50
}
fn default_dtau() -> f64 {
    1e-4
}
fn default_reduce_stride() -> usize {
    100
}
fn default_samples() -> usize {
    200
}
fn default_t0() -> f64 {
    0.3
}
fn default_verify_nx() -> usize {
    65
}

/// Parses and validates a TOML document. In strict mode unknown keys are
/// rejected; otherwise they are logged and ignored.
pub fn parse_str(text: &str, strict: bool) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::new(text);
    let mut unknown = Vec::new();
    let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string())).map_err(|e| {
        let msg = e.message().trim().to_string();
        let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_else(|| "<document>".into());
        ConfigError::one(&key, msg)
    })?;
    if !unknown.is_empty() {
        if strict {
            return Err(ConfigError {
                issues: unknown
                    .into_iter()
                    .map(|k| Issue {
                        keys: vec![k],
                        message: "unknown key".into(),
                    })
                    .collect(),
            });
        }
        for k in &unknown {
            log::warn!("ignoring unknown configuration key {k}");
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_file(path: &Path, strict: bool) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::one("<file>", format!("{}: {e}", path.display())))?;
    parse_str(&text, strict)
}

/// Best-effort dotted key for a byte offset, from the enclosing table header
/// and the key on that line.
fn key_at(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut line_key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') && !t.starts_with("[[") {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if pos + line.len() > offset {
            if let Some((k, _)) = t.split_once('=') {
                line_key = k.trim().to_string();
            }
            break;
        }
        pos += line.len();
    }
    match (table.is_empty(), line_key.is_empty()) {
        (true, true) => "<document>".into(),
        (true, false) => line_key,
        (false, true) => table,
        (false, false) => format!("{table}.{line_key}"),
    }
}

impl RunConfig {
    pub fn ny(&self) -> usize {
        self.grid.ny.unwrap_or_else(|| ((self.grid.ly / self.grid.lx) * (self.grid.nx as f64 - 1.0)).round() as usize + 1)
    }

    pub fn h(&self) -> f64 {
        self.grid.lx / (self.grid.nx as f64 - 1.0)
    }

    pub fn domain_grid(&self) -> Result<DomainGrid<f64>, ConfigError> {
        DomainGrid::new(self.grid.lx, self.grid.ly, self.grid.nx, self.ny()).map_err(|e| ConfigError::one("grid.nx", e.to_string()))
    }

    /// Grid used for ladder member `eps`.
    pub fn ladder_grid(&self, eps: f64) -> Result<DomainGrid<f64>, ConfigError> {
        match self.compare.h_over_eps {
            Some(r) => {
                let n = (self.grid.lx / (r * eps)).round() as usize + 1;
                let ny = ((self.grid.ly / self.grid.lx) * (n as f64 - 1.0)).round() as usize + 1;
                DomainGrid::new(self.grid.lx, self.grid.ly, n, ny).map_err(|e| ConfigError::one("compare.h_over_eps", e.to_string()))
            }
            None => self.domain_grid(),
        }
    }

    pub fn drive_spec(&self) -> DriveSpec<f64> {
        DriveSpec {
            j_ex: self.drive.j_ex,
            h_ex: self.drive.h_ex,
            j_nu: FourierSeries::new(self.drive.j_nu.clone()),
            i_nu: FourierSeries::new(self.drive.i_nu.clone()),
            h_trace: self.drive.h.clone().map(FourierSeries::new),
        }
    }

    pub fn regime_override(&self) -> Option<u8> {
        match &self.drive.regime_override {
            RegimeOverride::Id(k) => Some(*k as u8),
            RegimeOverride::Name(_) => None,
        }
    }

    pub fn init_spec(&self) -> InitSpec<f64> {
        InitSpec {
            vortices: self
                .init
                .vortices
                .iter()
                .map(|v| VortexSpec {
                    pos: [v.x, v.y],
                    degree: v.degree,
                })
                .collect(),
            core_profile: match self.init.core_profile {
                ProfileName::Tanh => CoreProfile::Tanh,
                ProfileName::Unit => CoreProfile::Unit,
            },
            relax_steps: self.init.relax_steps,
            c0: self.init.c0,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.time.scheme {
            SchemeName::ExplicitEuler => Scheme::ExplicitEuler,
            SchemeName::SemiImplicit => Scheme::SemiImplicit,
        }
    }

    /// Stepper configuration for `eps` on `grid` with original-time horizon `t_end`.
    pub fn stepper_config(&self, grid: &DomainGrid<f64>, eps: f64, t_end: f64) -> StepperConfig<f64> {
        let mut c = StepperConfig::new(grid, eps, self.time.dt_factor, self.scheme(), t_end, self.time.stride);
        if let Some(dt) = self.time.dt {
            c.dt = dt;
        } else if let Some(r) = self.time.dt_over_eps2 {
            c.dt = r * eps * eps;
        }
        c
    }

    /// Minimal pairwise and boundary separation of the configured vortices.
    pub fn min_separation(&self) -> f64 {
        let (lx, ly) = (self.grid.lx, self.grid.ly);
        let v = &self.init.vortices;
        let mut m = f64::INFINITY;
        for (i, a) in v.iter().enumerate() {
            m = m.min(a.x.min(lx - a.x).min(a.y).min(ly - a.y));
            for b in &v[i + 1..] {
                m = m.min(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt());
            }
        }
        m
    }

    pub fn sigma_star(&self) -> f64 {
        self.init.sigma_star.unwrap_or_else(|| 0.5 * self.min_separation())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |keys: &[&str], msg: String| {
            issues.push(Issue {
                keys: keys.iter().map(|k| k.to_string()).collect(),
                message: msg,
            })
        };
        let eps = self.gl.epsilon;
        if !(eps > 0.0 && eps < 0.5) {
            bad(&["gl.epsilon"], format!("epsilon {eps} outside (0, 0.5)"));
        }
        if let Err(e) = self.domain_grid() {
            bad(&["grid.nx", "grid.ny", "grid.Lx", "grid.Ly"], e.to_string());
        }
        let h = self.h();
        if h > eps / 4.0 * (1.0 + 1e-9) {
            bad(
                &["gl.epsilon", "grid.nx"],
                format!("core resolution requires h <= epsilon/4; h = {h:.6}, epsilon/4 = {:.6}", eps / 4.0),
            );
        }
        if !(self.time.dt_factor > 0.0 && self.time.dt_factor <= 0.5) {
            bad(&["time.dt_factor"], format!("dt_factor {} outside (0, 0.5]", self.time.dt_factor));
        }
        if !(self.time.t >= 0.0 && self.time.t.is_finite()) {
            bad(&["time.T"], "T must be finite and non-negative".into());
        }
        if self.time.stride == 0 {
            bad(&["time.stride"], "stride must be positive".into());
        }
        if let Some(r) = self.time.dt_over_eps2 {
            if self.time.dt.is_some() {
                bad(&["time.dt", "time.dt_over_eps2"], "give at most one of dt and dt_over_eps2".into());
            }
            if self.time.scheme != SchemeName::SemiImplicit {
                bad(&["time.dt_over_eps2", "time.scheme"], "dt_over_eps2 requires the semi-implicit scheme".into());
            }
            if !(r > 0.0 && r <= 1.0) {
                bad(&["time.dt_over_eps2"], format!("dt_over_eps2 {r} outside (0, 1]"));
            }
        }
        if let Some(dt) = self.time.dt {
            let limit = self.time.dt_factor * (eps * eps).min(h * h / 4.0);
            if !(dt > 0.0) {
                bad(&["time.dt"], "dt must be positive".into());
            } else if self.time.scheme == SchemeName::ExplicitEuler && dt > limit * (1.0 + 1e-12) {
                bad(&["time.dt", "time.dt_factor"], format!("explicit step {dt} exceeds dt_factor*min(eps^2, h^2/4) = {limit}"));
            }
        }
        if let Err(e) = self.drive_spec().validate() {
            bad(&["drive"], e.to_string());
        }
        match &self.drive.regime_override {
            RegimeOverride::Id(k) if !(1..=4).contains(k) => bad(&["drive.regime_override"], format!("{k} not in 1..=4")),
            RegimeOverride::Name(s) if s != "auto" => bad(&["drive.regime_override"], format!("'{s}' is neither 'auto' nor 1..=4")),
            _ => {}
        }
        for (k, v) in self.init.vortices.iter().enumerate() {
            if v.degree != 1 && v.degree != -1 {
                bad(&[&format!("init.vortices[{k}].degree")], format!("degree {} not in {{-1, +1}}", v.degree));
            }
            if !(v.x > 0.0 && v.x < self.grid.lx && v.y > 0.0 && v.y < self.grid.ly) {
                bad(&[&format!("init.vortices[{k}]")], "vortex outside the domain".into());
            }
        }
        if !(self.init.c0 > 0.0) {
            bad(&["init.C0"], "C0 must be positive".into());
        }
        if let Some(s) = self.init.sigma_star {
            if !self.init.vortices.is_empty() && !(s > 0.0 && s < self.min_separation()) {
                bad(&["init.sigma_star"], format!("sigma_star {s} must lie in (0, min initial separation = {:.4})", self.min_separation()));
            }
        }
        if !(self.reduce.dtau > 0.0) {
            bad(&["reduce.dtau"], "dtau must be positive".into());
        }
        let ladder = &self.compare.epsilon_ladder;
        if ladder.windows(2).any(|w| !(w[1] < w[0])) {
            bad(&["compare.epsilon_ladder"], "ladder must be strictly decreasing in epsilon".into());
        }
        for (k, e) in ladder.iter().enumerate() {
            if !(*e > 0.0 && *e < 0.5) {
                bad(&[&format!("compare.epsilon_ladder[{k}]")], format!("epsilon {e} outside (0, 0.5)"));
                continue;
            }
            let hk = match self.compare.h_over_eps {
                Some(r) => self.grid.lx / ((self.grid.lx / (r * e)).round()),
                None => h,
            };
            if hk > e / 4.0 * (1.0 + 1e-9) {
                let keys: &[&str] = if self.compare.h_over_eps.is_some() { &["compare.h_over_eps"] } else { &["compare.epsilon_ladder", "grid.nx"] };
                bad(keys, format!("ladder member epsilon = {e} needs h <= {:.6}, has {hk:.6}", e / 4.0));
            }
        }
        if !(self.monitors.t0 > 0.0) {
            bad(&["monitors.T0"], "T0 must be positive".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nnx = 81\n[gl]\nepsilon = 0.05\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_str(MINIMAL, true).unwrap();
        assert_eq!(c.time.dt_factor, 0.2);
        assert_eq!(c.init.relax_steps, 200);
        assert_eq!(c.time.stride, 50);
        assert_eq!(c.ny(), 81);
        assert_eq!(c.regime_override(), None);
    }

    #[test]
    fn coarse_grid_names_both_keys() {
        let e = parse_str("[grid]\nnx = 65\n[gl]\nepsilon = 0.05\n", true).unwrap_err();
        assert!(e.mentions("gl.epsilon") && e.mentions("grid.nx"), "{e}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = parse_str("[grid]\nnx = 81\nnx = 81\n[gl]\nepsilon = 0.05\n", false).unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
    }

    #[test]
    fn unknown_keys_depend_on_strictness() {
        let text = format!("{MINIMAL}colour = 3\n");
        let e = parse_str(&text, true).unwrap_err();
        assert!(e.mentions("gl.colour"), "{e}");
        assert!(parse_str(&text, false).is_ok());
    }

    #[test]
    fn ladder_and_sigma_rules() {
        let base = "[grid]\nnx = 161\n[gl]\nepsilon = 0.05\n[init]\nvortices = [{x = 0.5, y = 0.5, degree = 1}]\n";
        let e = parse_str(&format!("{base}sigma_star = 0.6\n"), true).unwrap_err();
        assert!(e.mentions("init.sigma_star"));
        let e = parse_str(&format!("{base}[compare]\nepsilon_ladder = [0.05, 0.1]\n"), true).unwrap_err();
        assert!(e.mentions("compare.epsilon_ladder"));
        let e = parse_str(&format!("{base}[compare]\nepsilon_ladder = [0.1, 0.02]\n"), true).unwrap_err();
        assert!(e.mentions("grid.nx"));
        let c = parse_str(&format!("{base}[compare]\nepsilon_ladder = [0.1, 0.02]\nh_over_eps = 0.25\n"), true).unwrap();
        assert_eq!(c.ladder_grid(0.02).unwrap().nx, 201);
        assert_eq!(c.ladder_grid(0.1).unwrap().nx, 41);
    }

    #[test]
    fn malformed_numbers_and_regimes() {
        let e = parse_str("[grid]\nnx = \"many\"\n[gl]\nepsilon = 0.05\n", true).unwrap_err();
        assert!(e.mentions("grid.nx"), "{e}");
        let e = parse_str(&format!("{MINIMAL}[drive]\nj_ex = 1.0\nregime_override = 7\n"), true).unwrap_err();
        assert!(e.mentions("drive.regime_override"));
        let c = parse_str(&format!("{MINIMAL}[drive]\nj_ex = 1.0\nregime_override = 2\n"), true).unwrap();
        assert_eq!(c.regime_override(), Some(2));
    }
}
