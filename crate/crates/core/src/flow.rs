//! Explicit RK4 integration of `∂ₜu = -f u^p / det(∇²u + uI) + u` with step
//! rejection, the frozen (modified) flow controller, and run diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::body::SupportField;
use crate::ellipsoid::Ellipsoid;
use crate::energy::{
    self, check_data, check_supercritical, fmt_f64, in_admissible_class, AdmissibleParams, EnergyReport,
};
use crate::error::{invalid, Result};
use crate::grid::FrameField;

// RK4 stability interval on the negative real axis
const RK4_STABILITY: f64 = 2.785;
const DT_GROWTH: f64 = 1.2;
// exact J is evaluated only when the O(N) estimate reaches this share of A0
const CROSSING_PRESCREEN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    Raw,
    Modified,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub p: f64,
    /// Prescribed data sampled on the grid.
    pub f: Vec<f64>,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Floor for the smallest eigenvalue of `b` in accepted states.
    pub eps_b: f64,
    pub tol_residual: f64,
    pub t_max: f64,
    pub mode: FlowMode,
    /// Fraction of the linearized RK4 stability bound used to cap steps;
    /// `None` leaves step control to rejection alone.
    pub cfl_safety: Option<f64>,
    /// Minimum time between recorded samples; `0` records every step.
    pub sample_every: f64,
    /// Times at which the full state is snapshotted.
    pub snapshot_times: Vec<f64>,
    /// End the run as soon as the residual drops to `tol_residual`.
    pub stop_when_converged: bool,
}

impl FlowConfig {
    pub const DEFAULT_DT_INIT: f64 = 1e-3;
    pub const DEFAULT_DT_MIN: f64 = 1e-9;
    pub const DEFAULT_DT_MAX: f64 = 1e-2;
    pub const DEFAULT_EPS_B: f64 = 1e-6;
    pub const DEFAULT_TOL_RESIDUAL: f64 = 1e-10;
    pub const DEFAULT_CFL_SAFETY: f64 = 0.9;
    pub const DEFAULT_SAMPLE_EVERY: f64 = 0.05;

    pub fn new(p: f64, f: Vec<f64>, t_max: f64) -> Self {
        FlowConfig {
            p,
            f,
            dt_init: Self::DEFAULT_DT_INIT,
            dt_min: Self::DEFAULT_DT_MIN,
            dt_max: Self::DEFAULT_DT_MAX,
            eps_b: Self::DEFAULT_EPS_B,
            tol_residual: Self::DEFAULT_TOL_RESIDUAL,
            t_max,
            mode: FlowMode::Raw,
            cfl_safety: Some(Self::DEFAULT_CFL_SAFETY),
            sample_every: Self::DEFAULT_SAMPLE_EVERY,
            snapshot_times: Vec::new(),
            stop_when_converged: false,
        }
    }

    /// Fixed step `dt`: no growth, no stability cap.
    pub fn fixed_step(mut self, dt: f64) -> Self {
        self.dt_init = dt;
        self.dt_max = dt;
        self.dt_min = self.dt_min.min(dt);
        self.cfl_safety = None;
        self
    }

    pub fn validate(&self, u: &SupportField) -> Result<()> {
        check_data(u.grid(), &self.f, self.p)?;
        check_supercritical(u.dim(), self.p)?;
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return invalid(format!(
                "step bounds must satisfy 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !self.dt_max.is_finite() {
            return invalid("dt_max must be finite");
        }
        if !(self.eps_b > 0.0) {
            return invalid(format!("convexity floor eps_b = {} must be positive", self.eps_b));
        }
        if !(self.tol_residual > 0.0) {
            return invalid(format!("tol_residual = {} must be positive", self.tol_residual));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return invalid(format!("T_max = {} must be finite and non-negative", self.t_max));
        }
        if let Some(c) = self.cfl_safety {
            if !(c > 0.0 && c <= 1.0) {
                return invalid(format!("cfl_safety = {c} must lie in (0, 1]"));
            }
        }
        if !(self.sample_every >= 0.0 && self.sample_every.is_finite()) {
            return invalid(format!("sample interval {} must be non-negative", self.sample_every));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowStatus {
    Running,
    FrozenAtA0,
    StationaryInitial,
    Converged,
    Failed(String),
}

impl FlowStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, FlowStatus::Failed(_))
    }

    /// Frozen states never change again.
    pub fn is_frozen(&self) -> bool {
        matches!(self, FlowStatus::FrozenAtA0 | FlowStatus::StationaryInitial)
    }
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowStatus::Running => f.write_str("running"),
            FlowStatus::FrozenAtA0 => f.write_str("frozen-at-A0"),
            FlowStatus::StationaryInitial => f.write_str("stationary-initial"),
            FlowStatus::Converged => f.write_str("converged"),
            FlowStatus::Failed(r) => write!(f, "failed({r})"),
        }
    }
}

impl FromStr for FlowStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "running" => FlowStatus::Running,
            "frozen-at-A0" => FlowStatus::FrozenAtA0,
            "stationary-initial" => FlowStatus::StationaryInitial,
            "converged" => FlowStatus::Converged,
            _ => match s.strip_prefix("failed(").and_then(|r| r.strip_suffix(')')) {
                Some(r) => FlowStatus::Failed(r.to_string()),
                None => return Err(format!("unknown flow status {s:?}")),
            },
        })
    }
}

impl Serialize for FlowStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FlowStatus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Curvature extremes and C⁰ bounds of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureDiagnostics {
    #[serde(rename = "maxK")]
    pub max_k: f64,
    pub min_kappa: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub max_grad: f64,
}

/// `maxK`, the smallest principal curvature, and `(min u, max u, max |∇u|)`.
pub fn curvature_diagnostics(u: &SupportField) -> Result<CurvatureDiagnostics> {
    let data = u.curvature_data()?;
    let max_k = data.gauss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_kappa = data.kappa.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max_grad = u
        .grid()
        .gradient(u.values())?
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
        .fold(0.0, f64::max);
    Ok(CurvatureDiagnostics { max_k, min_kappa, min_u: u.min(), max_u: u.max(), max_grad })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyReport,
    pub curvature: CurvatureDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: SupportField,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: SupportField,
    pub t: f64,
    /// Step size proposed for the next attempt.
    pub dt: f64,
    /// Samples with strictly increasing times.
    pub history: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub status: FlowStatus,
    pub accepted: usize,
    pub rejected: usize,
    /// Time of the retained pre-crossing state for `frozen-at-A0`.
    pub frozen_at: Option<f64>,
    /// `J` of the initial body, `+∞` when the origin is on its boundary.
    pub j_initial: f64,
    // right-hand side and `b` of the current `u`, reused by the next attempt
    stage_cache: Option<(Vec<f64>, FrameField)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Accepted { dt: f64 },
    Rejected { next_dt: f64 },
    Failed,
    /// The state is not running; nothing was done.
    Idle,
}

impl FlowState {
    pub fn new(u: SupportField, cfg: &FlowConfig) -> Self {
        FlowState {
            u,
            t: 0.0,
            dt: cfg.dt_init,
            history: Vec::new(),
            snapshots: Vec::new(),
            status: FlowStatus::Running,
            accepted: 0,
            rejected: 0,
            frozen_at: None,
            j_initial: f64::NAN,
            stage_cache: None,
        }
    }

    /// Largest `J` among recorded samples.
    pub fn sup_j(&self) -> f64 {
        self.history.iter().map(|s| s.energy.j).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last_sample(&self) -> Option<&Sample> {
        self.history.last()
    }

    fn record(&mut self, cfg: &FlowConfig) {
        let sample = energy::energy_report(&self.u, &cfg.f, cfg.p)
            .and_then(|energy| Ok(Sample { t: self.t, energy, curvature: curvature_diagnostics(&self.u)? }));
        match sample {
            Ok(s) => {
                if self.history.last().is_none_or(|l| s.t > l.t) {
                    self.history.push(s);
                }
            }
            Err(e) => self.status = FlowStatus::Failed(format!("diagnostics: {e}")),
        }
    }

    /// Series CSV: one row per sample, energy columns then curvature columns.
    pub fn series_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for s in &self.history {
            let c = &s.curvature;
            out.push_str(&s.energy.csv_row(s.t));
            for v in [c.max_k, c.min_kappa, c.min_u, c.max_u, c.max_grad] {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn final_state(&self) -> FinalState {
        FinalState {
            status: self.status.clone(),
            t: self.t,
            dt: self.dt,
            accepted_steps: self.accepted,
            rejected_steps: self.rejected,
            frozen_at: self.frozen_at,
            j_initial: self.j_initial,
            sup_j: self.sup_j(),
            last: self.history.last().copied(),
            u: self.u.clone(),
        }
    }
}

pub const SERIES_HEADER: &str =
    "t,J,dissipation,vol,ecc,origin_dist,residual,maxK,min_kappa,min_u,max_u,max_grad";

/// End-of-run record written as `final.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalState {
    pub status: FlowStatus,
    pub t: f64,
    pub dt: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub frozen_at: Option<f64>,
    #[serde(rename = "J_initial", with = "extended_f64")]
    pub j_initial: f64,
    #[serde(rename = "sup_J", with = "extended_f64")]
    pub sup_j: f64,
    pub last: Option<Sample>,
    pub u: SupportField,
}

// JSON has no infinities; they travel as strings.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.collect_str(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `-f u^p / det b + u`, or `None` when the state is not uniformly convex
/// with positive support values.
fn rhs(u: &SupportField, cfg: &FlowConfig) -> Option<(Vec<f64>, FrameField)> {
    let b = u.b();
    let mut out = Vec::with_capacity(b.len());
    for ((m, u), f) in b.entries.iter().zip(u.values()).zip(&cfg.f) {
        let det = m.det();
        if !(*u > 0.0 && det > 0.0 && m.trace() > 0.0) {
            return None;
        }
        let r = -f * pow(*u, cfg.p) / det + u;
        if !r.is_finite() {
            return None;
        }
        out.push(r);
    }
    Some((out, b))
}

/// Linearized RK4 step bound from the diffusion coefficient
/// `f u^p / det(b)²` times the cofactor of `b` against the stencil stiffness.
fn stability_bound(u: &SupportField, b: &FrameField, cfg: &FlowConfig, safety: f64) -> f64 {
    let grid = u.grid();
    let mut lam: f64 = 0.0;
    for (i, m) in b.entries.iter().enumerate() {
        let det = m.det();
        let c = cfg.f[i] * pow(u.values()[i], cfg.p) / (det * det);
        let s = grid.stencil_stiffness(i);
        let l = match b.dim {
            1 => c * s[0],
            _ => c * (m.m[2].abs() * s[0] + m.m[0].abs() * s[1]),
        };
        lam = lam.max(l);
    }
    if lam > 0.0 {
        safety * RK4_STABILITY / lam
    } else {
        f64::INFINITY
    }
}

fn axpy(u: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    u.iter().zip(k).map(|(u, k)| u + h * k).collect()
}

/// One RK4 trial of size `h`; `None` on any stage that leaves the convex
/// cone.
fn rk4_trial(u: &SupportField, k1: &[f64], h: f64, cfg: &FlowConfig) -> Option<Vec<f64>> {
    let stage = |v: Vec<f64>| -> Option<Vec<f64>> { rhs(&u.with_values(v).ok()?, cfg).map(|r| r.0) };
    let k2 = stage(axpy(u.values(), 0.5 * h, k1))?;
    let k3 = stage(axpy(u.values(), 0.5 * h, &k2))?;
    let k4 = stage(axpy(u.values(), h, &k3))?;
    let out: Vec<f64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// One step attempt toward `t_end`. Rejected trials halve `dt`; falling below
/// `dt_min` fails the run with "convexity lost".
pub fn step_until(state: &mut FlowState, cfg: &FlowConfig, t_end: f64) -> StepOutcome {
    if state.status != FlowStatus::Running || state.t >= t_end {
        return StepOutcome::Idle;
    }
    let mut h = state.dt.min(t_end - state.t);
    let first = state.stage_cache.take().map(Some).unwrap_or_else(|| {
        let b = state.u.b();
        if b.min_eigenvalue().1 >= cfg.eps_b {
            rhs(&state.u, cfg)
        } else {
            None
        }
    });
    let trial = first.as_ref().and_then(|(k1, b)| {
        if let Some(s) = cfg.cfl_safety {
            h = h.min(stability_bound(&state.u, b, cfg, s));
        }
        rk4_trial(&state.u, k1, h, cfg)
    });
    let accepted = trial.and_then(|v| {
        let next = state.u.with_values(v).ok()?;
        let stage = rhs(&next, cfg)?;
        (next.min() > 0.0 && stage.1.min_eigenvalue().1 >= cfg.eps_b).then_some((next, stage))
    });
    match accepted {
        Some((next, stage)) => {
            state.u = next;
            state.stage_cache = Some(stage);
            state.t = if h == t_end - state.t { t_end } else { state.t + h };
            state.accepted += 1;
            if h >= state.dt {
                state.dt = (state.dt * DT_GROWTH).min(cfg.dt_max);
            }
            StepOutcome::Accepted { dt: h }
        }
        None => {
            state.stage_cache = first;
            state.rejected += 1;
            let next_dt = 0.5 * h;
            if next_dt < cfg.dt_min {
                state.status = FlowStatus::Failed("convexity lost".into());
                StepOutcome::Failed
            } else {
                state.dt = next_dt;
                StepOutcome::Rejected { next_dt }
            }
        }
    }
}

/// One step attempt toward `cfg.t_max`.
pub fn step(state: &mut FlowState, cfg: &FlowConfig) -> StepOutcome {
    step_until(state, cfg, cfg.t_max)
}

fn check_horizon(cfg: &FlowConfig, t_end: f64) -> Result<()> {
    if !(t_end >= 0.0 && t_end <= cfg.t_max) {
        return invalid(format!("horizon {t_end} must lie in [0, T_max = {}]", cfg.t_max));
    }
    Ok(())
}

/// `J` from the O(N) mixed-volume identity.
fn quick_j(u: &SupportField, cfg: &FlowConfig) -> f64 {
    let fup: Vec<f64> = u.values().iter().zip(&cfg.f).map(|(u, f)| f * pow(*u, cfg.p)).collect();
    u.volume_mixed() - u.grid().integrate(&fup).expect("same grid") / cfg.p
}

fn integrate(state: &mut FlowState, cfg: &FlowConfig, t_end: f64, a0: Option<f64>) {
    let mut next_sample = state.t + cfg.sample_every;
    let mut snaps: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|s| *s >= 0.0).collect();
    snaps.sort_by(|a, b| b.total_cmp(a));
    let mut take_snapshots = |state: &mut FlowState| {
        while snaps.last().is_some_and(|s| *s <= state.t) {
            snaps.pop();
            state.snapshots.push(Snapshot { t: state.t, u: state.u.clone() });
        }
    };
    state.record(cfg);
    take_snapshots(state);
    while state.status == FlowStatus::Running && state.t < t_end {
        let prev = (state.u.clone(), state.t);
        match step_until(state, cfg, t_end) {
            StepOutcome::Accepted { .. } => {}
            StepOutcome::Rejected { .. } => continue,
            _ => break,
        }
        if let Some(a0) = a0 {
            let q = quick_j(&state.u, cfg);
            let crossed = q >= CROSSING_PRESCREEN * a0
                && energy::functional_j(&state.u, &cfg.f, cfg.p).map_or(true, |j| j >= a0);
            if crossed {
                state.u = prev.0;
                state.t = prev.1;
                state.stage_cache = None;
                state.status = FlowStatus::FrozenAtA0;
                state.frozen_at = Some(prev.1);
                break;
            }
        }
        take_snapshots(state);
        if state.t >= next_sample || state.t >= t_end {
            state.record(cfg);
            next_sample = state.t + cfg.sample_every;
        }
        if cfg.stop_when_converged
            && state.status == FlowStatus::Running
            && energy::residual(&state.u, &cfg.f, cfg.p).is_ok_and(|r| r <= cfg.tol_residual)
        {
            state.status = FlowStatus::Converged;
        }
    }
    if !state.status.is_failed() && state.history.last().is_none_or(|s| s.t < state.t) {
        state.record(cfg);
    }
    if state.status == FlowStatus::Running
        && energy::residual(&state.u, &cfg.f, cfg.p).is_ok_and(|r| r <= cfg.tol_residual)
    {
        state.status = FlowStatus::Converged;
    }
}

/// The unmodified flow from `u0` over `[0, t_end]`.
pub fn run_raw(u0: SupportField, cfg: &FlowConfig, t_end: f64) -> Result<FlowState> {
    cfg.validate(&u0)?;
    check_horizon(cfg, t_end)?;
    if u0.min() <= 0.0 {
        return invalid("initial support function must be positive (origin interior)");
    }
    let mut state = FlowState::new(u0, cfg);
    state.j_initial = energy::functional_j(&state.u, &cfg.f, cfg.p)?;
    integrate(&mut state, cfg, t_end, None);
    Ok(state)
}

/// The flow frozen at the last state before `J` reaches `A₀`, or never
/// started when `J(E0) ≥ A₀`.
pub fn run_modified(
    e0: &Ellipsoid,
    grid: std::sync::Arc<crate::grid::SphereGrid>,
    cfg: &FlowConfig,
    params: &AdmissibleParams,
    t_end: f64,
) -> Result<FlowState> {
    params.validate()?;
    let adm = in_admissible_class(e0, params);
    if !adm.admitted {
        return invalid(format!(
            "initial ellipsoid is not admissible ({})",
            adm.reason.expect("rejected ellipsoids carry a reason")
        ));
    }
    let u0 = SupportField::from_ellipsoid(e0, grid, false)?;
    run_modified_from(u0, cfg, params.a0, t_end)
}

/// Modified flow from a sampled support function.
pub fn run_modified_from(u0: SupportField, cfg: &FlowConfig, a0: f64, t_end: f64) -> Result<FlowState> {
    cfg.validate(&u0)?;
    check_horizon(cfg, t_end)?;
    if !(a0 > 0.0) {
        return invalid(format!("threshold A0 = {a0} must be positive"));
    }
    let mut state = FlowState::new(u0, cfg);
    state.j_initial = if state.u.min() > 0.0 {
        energy::functional_j(&state.u, &cfg.f, cfg.p)?
    } else {
        f64::INFINITY
    };
    if state.j_initial >= a0 {
        state.status = FlowStatus::StationaryInitial;
        if state.j_initial.is_finite() {
            state.record(cfg);
        }
        return Ok(state);
    }
    integrate(&mut state, cfg, t_end, Some(a0));
    Ok(state)
}

/// Continue a running state to `t_end`; with `a0` the modified-flow freeze
/// applies.
pub fn resume(state: &mut FlowState, cfg: &FlowConfig, t_end: f64, a0: Option<f64>) -> Result<()> {
    cfg.validate(&state.u)?;
    check_horizon(cfg, t_end)?;
    if t_end < state.t {
        return invalid(format!("cannot resume backwards from t = {} to {t_end}", state.t));
    }
    if state.status == FlowStatus::Running || state.status == FlowStatus::Converged {
        state.status = FlowStatus::Running;
        integrate(state, cfg, t_end, a0);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub t0: f64,
    pub t1: f64,
    pub drop: f64,
    pub tol: f64,
}

/// Centred difference of `J` at an interior sample against the dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub t: f64,
    pub discrete: f64,
    pub dissipation: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub violations: Vec<MonotonicityViolation>,
    pub derivative: Option<DerivativeCheck>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Consecutive decreases of `J` beyond `10·Δt²·max(1,|J|)`, and the
/// mid-run comparison of `dJ/dt` with the dissipation.
pub fn monotonicity_check(state: &FlowState) -> Result<MonotonicityReport> {
    let h = &state.history;
    if h.len() < 2 {
        return invalid("monotonicity check needs at least two samples");
    }
    let violations = h
        .windows(2)
        .filter_map(|w| {
            let dt = w[1].t - w[0].t;
            let tol = 10.0 * dt * dt * w[0].energy.j.abs().max(1.0);
            let drop = w[0].energy.j - w[1].energy.j;
            (drop > tol).then_some(MonotonicityViolation { t0: w[0].t, t1: w[1].t, drop, tol })
        })
        .collect();
    let derivative = (h.len() >= 3).then(|| {
        let mid = 0.5 * (h[0].t + h[h.len() - 1].t);
        let m = (1..h.len() - 1)
            .min_by(|&a, &b| (h[a].t - mid).abs().total_cmp(&(h[b].t - mid).abs()))
            .expect("at least one interior sample");
        let discrete = (h[m + 1].energy.j - h[m - 1].energy.j) / (h[m + 1].t - h[m - 1].t);
        let dissipation = h[m].energy.dissipation;
        let abs_err = (discrete - dissipation).abs();
        let rel_err = if dissipation.abs() > 0.0 { abs_err / dissipation.abs() } else { abs_err };
        DerivativeCheck { t: h[m].t, discrete, dissipation, abs_err, rel_err }
    });
    Ok(MonotonicityReport { violations, derivative })
}
