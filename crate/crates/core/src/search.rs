//! Shooting for ellipsoidal initial data whose modified-flow state at a
//! horizon `t` has the unit ball as its John ellipsoid, continued over a
//! sequence of horizons.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::SupportField;
use crate::ellipsoid::Ellipsoid;
use crate::energy::{fmt_f64, in_admissible_class, AdmissibleParams};
use crate::error::{invalid, Result};
use crate::flow::{self, FlowConfig, FlowState, FlowStatus};
use crate::grid::SphereGrid;
use crate::john;

pub const PENALTY: f64 = 1e3;
pub const DEFAULT_TOL_SEARCH: f64 = 1e-2;
pub const DEFAULT_HORIZONS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Chart on ellipsoids: centre, log semi-axes, and a rotation (one angle in
/// the plane, Z-Y-Z Euler angles in space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipsoidParams {
    pub center: Vec<f64>,
    pub log_semi_axes: Vec<f64>,
    pub rotation: Vec<f64>,
}

fn rotation_len(d: usize) -> Result<usize> {
    match d {
        2 => Ok(1),
        3 => Ok(3),
        _ => invalid(format!("ellipsoid charts cover R^2 and R^3, not R^{d}")),
    }
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

impl EllipsoidParams {
    pub fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    /// Length of the flat parameter vector: 5 in the plane, 9 in space.
    pub fn len_for(ambient_dim: usize) -> Result<usize> {
        Ok(2 * ambient_dim + rotation_len(ambient_dim)?)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.center.iter().chain(&self.log_semi_axes).chain(&self.rotation).copied().collect()
    }

    pub fn from_vec(ambient_dim: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::len_for(ambient_dim)? {
            return invalid(format!("parameter vector of length {} for R^{ambient_dim}", v.len()));
        }
        let d = ambient_dim;
        Ok(EllipsoidParams {
            center: v[..d].to_vec(),
            log_semi_axes: v[d..2 * d].to_vec(),
            rotation: v[2 * d..].to_vec(),
        })
    }

    pub fn decode(&self) -> Result<Ellipsoid> {
        let d = self.ambient_dim();
        if self.log_semi_axes.len() != d || self.rotation.len() != rotation_len(d)? {
            return invalid("ellipsoid parameters disagree on dimension");
        }
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return invalid("ellipsoid parameters must be finite");
        }
        let semi: Vec<f64> = self.log_semi_axes.iter().map(|l| l.exp()).collect();
        // axis i is column i of the rotation
        let axes: Vec<Vec<f64>> = if d == 2 {
            let (s, c) = self.rotation[0].sin_cos();
            vec![vec![c, s], vec![-s, c]]
        } else {
            let r = matmul(
                &matmul(&rot_z(self.rotation[0]), &rot_y(self.rotation[1])),
                &rot_z(self.rotation[2]),
            );
            (0..3).map(|j| (0..3).map(|i| r[i][j]).collect()).collect()
        };
        Ellipsoid::new(self.center.clone(), axes, semi)
    }

    pub fn encode(e: &Ellipsoid) -> Result<Self> {
        let d = e.ambient_dim();
        rotation_len(d)?;
        let mut axes = e.axes().to_vec();
        let det = if d == 2 {
            axes[0][0] * axes[1][1] - axes[0][1] * axes[1][0]
        } else {
            let a = &axes;
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        if det < 0.0 {
            for x in axes[d - 1].iter_mut() {
                *x = -*x;
            }
        }
        let rotation = if d == 2 {
            vec![axes[0][1].atan2(axes[0][0])]
        } else {
            // r[i][j] = axes[j][i]
            let r = |i: usize, j: usize| axes[j][i];
            let beta = r(2, 2).clamp(-1.0, 1.0).acos();
            if beta.sin().abs() > 1e-12 {
                vec![r(1, 2).atan2(r(0, 2)), beta, r(2, 1).atan2(-r(2, 0))]
            } else if r(2, 2) > 0.0 {
                vec![0.0, 0.0, r(1, 0).atan2(r(0, 0))]
            } else {
                vec![0.0, std::f64::consts::PI, (-r(1, 0)).atan2(-r(0, 0))]
            }
        };
        Ok(EllipsoidParams {
            center: e.center().to_vec(),
            log_semi_axes: e.semi_axes().iter().map(|r| r.ln()).collect(),
            rotation,
        })
    }
}

/// Everything an objective evaluation needs besides the candidate.
#[derive(Debug, Clone)]
pub struct SearchContext {
    pub grid: Arc<SphereGrid>,
    pub flow: FlowConfig,
    pub params: AdmissibleParams,
}

impl SearchContext {
    pub fn new(grid: Arc<SphereGrid>, flow: FlowConfig, params: AdmissibleParams) -> Result<Self> {
        flow.validate(&SupportField::constant(grid.clone(), 1.0))?;
        params.validate()?;
        Ok(SearchContext { grid, flow, params })
    }

    fn run_config(&self, t: f64) -> FlowConfig {
        let mut cfg = self.flow.clone();
        // only the endpoints matter to the objective
        cfg.sample_every = t.max(1.0);
        cfg.snapshot_times.clear();
        cfg.stop_when_converged = false;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveFlag {
    /// Candidate outside the admissible class.
    Inadmissible,
    /// The flow failed before the horizon.
    FlowFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub flag: Option<ObjectiveFlag>,
    pub status: Option<&'static str>,
}

fn status_tag(s: &FlowStatus) -> &'static str {
    match s {
        FlowStatus::Running => "running",
        FlowStatus::FrozenAtA0 => "frozen-at-A0",
        FlowStatus::StationaryInitial => "stationary-initial",
        FlowStatus::Converged => "converged",
        FlowStatus::Failed(_) => "failed",
    }
}

/// Sup-norm distance on the grid between the support function of `e` and 1.
pub fn distance_to_unit_ball(e: &Ellipsoid, grid: &SphereGrid) -> f64 {
    grid.sample(|x| e.support(x)).iter().map(|h| (h - 1.0).abs()).fold(0.0, f64::max)
}

/// Hausdorff distance between the John ellipsoid of the modified-flow state
/// at time `t` and the unit ball. Inadmissible candidates score
/// `PENALTY·(1 + violation)`; flow failures score `PENALTY·(1 + lost time
/// fraction)`.
pub fn objective(ep: &EllipsoidParams, t: f64, ctx: &SearchContext) -> ObjectiveValue {
    let penalty = |extra: f64, flag| ObjectiveValue { value: PENALTY * (1.0 + extra), flag: Some(flag), status: None };
    let e = match ep.decode() {
        Ok(e) => e,
        Err(_) => return penalty(1.0, ObjectiveFlag::Inadmissible),
    };
    let adm = in_admissible_class(&e, &ctx.params);
    if !adm.admitted {
        return penalty(adm.amount, ObjectiveFlag::Inadmissible);
    }
    let state = match flow::run_modified(&e, ctx.grid.clone(), &ctx.run_config(t), &ctx.params, t) {
        Ok(s) => s,
        Err(_) => return penalty(1.0, ObjectiveFlag::FlowFailed),
    };
    if state.status.is_failed() {
        let lost = if t > 0.0 { (t - state.t) / t } else { 1.0 };
        return penalty(lost, ObjectiveFlag::FlowFailed);
    }
    match john::min_ellipsoid_of_body(&state.u, john::DEFAULT_TOL) {
        Ok(j) => ObjectiveValue {
            value: distance_to_unit_ball(&j, &ctx.grid),
            flag: None,
            status: Some(status_tag(&state.status)),
        },
        Err(_) => penalty(1.0, ObjectiveFlag::FlowFailed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Success threshold on the objective.
    pub tol_search: f64,
    /// Optimization stops early once the objective is this small.
    pub target: f64,
    pub restarts: usize,
    /// Scale of the random perturbation applied to restart points.
    pub jitter: f64,
    /// Objective evaluations per Nelder–Mead run.
    pub max_evals: usize,
    /// Intermediate horizons `t/2^k`, `k = ladder..1`, solved before `t`.
    pub ladder: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tol_search: DEFAULT_TOL_SEARCH,
            target: 1e-7,
            restarts: 3,
            jitter: 0.02,
            max_evals: 1500,
            ladder: 3,
            seed: 0,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_search > 0.0 && self.target >= 0.0 && self.jitter >= 0.0) {
            return invalid("search tolerances and jitter must be non-negative (tol_search positive)");
        }
        if self.restarts == 0 || self.max_evals == 0 {
            return invalid("search needs at least one restart and one evaluation");
        }
        Ok(())
    }
}

/// One optimizer evaluation, for trace output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub horizon: f64,
    pub restart: usize,
    pub evaluation: usize,
    pub objective: f64,
    pub best: f64,
}

pub const TRACE_HEADER: &str = "horizon,restart,evaluation,objective,best";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.horizon),
            r.restart,
            r.evaluation,
            fmt_f64(r.objective),
            fmt_f64(r.best)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindResult {
    pub horizon: f64,
    pub params: EllipsoidParams,
    pub objective: f64,
    /// Objective of the seed at this horizon.
    pub seed_objective: f64,
    pub found: bool,
    pub evaluations: usize,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

struct NelderMead<'a, F: Fn(&[f64]) -> f64 + Sync> {
    f: &'a F,
    evals: usize,
    trace: Vec<(f64, f64)>,
    best: f64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> NelderMead<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        self.note(v);
        v
    }

    fn note(&mut self, v: f64) {
        self.evals += 1;
        self.best = self.best.min(v);
        self.trace.push((v, self.best));
    }

    fn eval_many(&mut self, xs: &[Vec<f64>]) -> Vec<f64> {
        let vals: Vec<f64> = xs.par_iter().map(|x| (self.f)(x)).collect();
        for v in &vals {
            self.note(*v);
        }
        vals
    }

    /// Adaptive-coefficient Nelder–Mead from `x0` with per-coordinate initial
    /// steps.
    fn minimize(&mut self, x0: &[f64], steps: &[f64], max_evals: usize, target: f64) -> (Vec<f64>, f64) {
        let n = x0.len();
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
        let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += steps[i];
            pts.push(p);
        }
        let vals = self.eval_many(&pts);
        let mut simplex: Vec<(Vec<f64>, f64)> = pts.into_iter().zip(vals).collect();
        let start = self.evals - (n + 1);
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[n].1);
            let diam = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if best <= target
                || self.evals - start >= max_evals
                || diam <= 1e-12
                || (worst - best).abs() <= 1e-14 * best.abs().max(1e-300)
            {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / nf).collect();
            let along = |c: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(m, w)| m + c * (m - w)).collect()
            };
            let xr = along(alpha);
            let fr = self.eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(alpha * gamma);
                let fe = self.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst {
                    let x = along(alpha * rho);
                    let v = self.eval(&x);
                    (x, v)
                } else {
                    let x = along(-rho);
                    let v = self.eval(&x);
                    (x, v)
                };
                if fc < fr.min(worst) {
                    simplex[n] = (xc, fc);
                } else {
                    let b = simplex[0].0.clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..]
                        .iter()
                        .map(|(p, _)| b.iter().zip(p).map(|(b, p)| b + sigma * (p - b)).collect())
                        .collect();
                    let vals = self.eval_many(&shrunk);
                    for (slot, (p, v)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(vals)) {
                        *slot = (p, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        simplex.swap_remove(0)
    }
}

fn initial_steps(d: usize) -> Vec<f64> {
    let rot = rotation_len(d).unwrap_or(0);
    std::iter::repeat_n(0.05, 2 * d)
        .chain(std::iter::repeat_n(0.2, rot))
        .collect()
}

fn check_seed(seed: &EllipsoidParams, ctx: &SearchContext) -> Result<()> {
    if seed.ambient_dim() != ctx.grid.ambient_dim() {
        return invalid(format!(
            "seed lives in R^{}, grid in R^{}",
            seed.ambient_dim(),
            ctx.grid.ambient_dim()
        ));
    }
    seed.decode()?;
    Ok(())
}

/// Nelder–Mead with jittered restarts at one horizon.
fn optimize_at(
    t: f64,
    start: &[f64],
    ctx: &SearchContext,
    opts: &SearchOptions,
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<TraceRow>,
) -> (Vec<f64>, f64, usize) {
    let d = ctx.grid.ambient_dim();
    let f = |x: &[f64]| -> f64 {
        EllipsoidParams::from_vec(d, x).map_or(PENALTY * 2.0, |p| objective(&p, t, ctx).value)
    };
    let steps = initial_steps(d);
    let mut nm = NelderMead { f: &f, evals: 0, trace: Vec::new(), best: f64::INFINITY };
    let mut best = (start.to_vec(), f64::INFINITY);
    for restart in 0..opts.restarts {
        let x0: Vec<f64> = if restart == 0 {
            start.to_vec()
        } else {
            best.0.iter().zip(&steps).map(|(x, s)| x + opts.jitter * s / 0.05 * rng.gen_range(-1.0..1.0)).collect()
        };
        let before = nm.trace.len();
        let scale = if restart == 0 { 1.0 } else { 0.5f64.powi(restart as i32) };
        let st: Vec<f64> = steps.iter().map(|s| s * scale).collect();
        let (x, v) = nm.minimize(&x0, &st, opts.max_evals, opts.target);
        for (k, (obj, b)) in nm.trace[before..].iter().enumerate() {
            trace.push(TraceRow { horizon: t, restart, evaluation: before + k, objective: *obj, best: *b });
        }
        if v < best.1 {
            best = (x, v);
        }
        if best.1 <= opts.target {
            break;
        }
    }
    (best.0, best.1, nm.evals)
}

/// Minimize the objective at horizon `t` from `seed`. Intermediate horizons
/// `t/2^k` are solved first so the minimizer is tracked as the flow's
/// sensitivity to the initial data grows with `t`.
pub fn find_initial(t: f64, ctx: &SearchContext, seed: &EllipsoidParams, opts: &SearchOptions) -> Result<FindResult> {
    opts.validate()?;
    check_seed(seed, ctx)?;
    if !(t >= 0.0 && t <= ctx.flow.t_max) {
        return invalid(format!("horizon {t} must lie in [0, T_max = {}]", ctx.flow.t_max));
    }
    let d = ctx.grid.ambient_dim();
    let seed_objective = objective(seed, t, ctx).value;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ t.to_bits());
    let mut trace = Vec::new();
    let mut x = seed.to_vec();
    let mut evaluations = 0;
    let mut rungs: Vec<f64> = (1..=opts.ladder).rev().map(|k| t / 2f64.powi(k as i32)).collect();
    rungs.push(t);
    let mut value = seed_objective;
    for (i, rung) in rungs.iter().enumerate() {
        let (xb, v, n) = optimize_at(*rung, &x, ctx, opts, &mut rng, &mut trace);
        evaluations += n;
        if i + 1 == rungs.len() {
            if v < value {
                x = xb;
                value = v;
            }
        } else {
            x = xb;
        }
    }
    if value > seed_objective {
        x = seed.to_vec();
        value = seed_objective;
    }
    Ok(FindResult {
        horizon: t,
        params: EllipsoidParams::from_vec(d, &x)?,
        objective: value,
        seed_objective,
        found: value <= opts.tol_search,
        evaluations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: Ellipsoid,
    pub params: EllipsoidParams,
    pub objective: f64,
    pub seed_objective: f64,
    pub found: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(rename = "E_star")]
    pub e_star: Ellipsoid,
    pub horizon_results: Vec<HorizonResult>,
    /// Energy cap held and the flow never failed along the verification run.
    pub certified: bool,
    pub failing_horizon: Option<f64>,
    /// Largest `J` seen on the verification run.
    #[serde(rename = "sup_J")]
    pub sup_j: Option<f64>,
    #[serde(rename = "A0")]
    pub a0: f64,
    pub verification_status: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// `find_initial` over increasing horizons, each warm-started from the
/// previous minimizer, then a verification run of the last minimizer over
/// `[0, t_m]` checking `sup J ≤ ¾A₀`.
pub fn limiting_initial(
    horizons: &[f64],
    ctx: &SearchContext,
    seed: &EllipsoidParams,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    if horizons.is_empty() || horizons[0] <= 0.0 || horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("horizons must be positive and strictly increasing");
    }
    let last = *horizons.last().expect("non-empty");
    if ctx.flow.t_max < last {
        return invalid(format!("T_max = {} is below the largest horizon {last}", ctx.flow.t_max));
    }
    opts.validate()?;
    check_seed(seed, ctx)?;
    let mut warm = seed.clone();
    let mut results = Vec::new();
    let mut trace = Vec::new();
    let mut failing = None;
    for &t in horizons {
        let r = find_initial(t, ctx, &warm, opts)?;
        trace.extend_from_slice(&r.trace);
        results.push(HorizonResult {
            t,
            e: r.params.decode()?,
            params: r.params.clone(),
            objective: r.objective,
            seed_objective: r.seed_objective,
            found: r.found,
            evaluations: r.evaluations,
        });
        warm = r.params;
        if !r.found {
            failing = Some(t);
            break;
        }
    }
    let e_star = warm.decode()?;
    let a0 = ctx.params.a0;
    let (certified, sup_j, status) = if failing.is_none() {
        let v = verification_run(&e_star, ctx, last)?;
        let sup = v.sup_j();
        let ok = sup <= 0.75 * a0 && !v.status.is_failed();
        (ok, Some(sup), Some(v.status.to_string()))
    } else {
        (false, None, None)
    };
    Ok(SearchResult {
        e_star,
        horizon_results: results,
        certified,
        failing_horizon: failing,
        sup_j,
        a0,
        verification_status: status,
        trace,
    })
}

/// Modified flow from `e` over `[0, t]` with every step sampled.
pub fn verification_run(e: &Ellipsoid, ctx: &SearchContext, t: f64) -> Result<FlowState> {
    let mut cfg = ctx.flow.clone();
    cfg.sample_every = 0.0;
    cfg.t_max = cfg.t_max.max(t);
    flow::run_modified(e, ctx.grid.clone(), &cfg, &ctx.params, t)
}

/// Outcome of running the modified flow toward a solution of the equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// First sampled time with residual and dissipation both under their
    /// tolerances.
    pub reached_at: Option<f64>,
    pub status: FlowStatus,
    pub final_residual: f64,
    pub final_dissipation: f64,
    /// `(t, residual, dissipation)` per sample.
    pub trajectory: Vec<(f64, f64, f64)>,
}

/// Modified flow from `e` until residual ≤ `tol_residual` and dissipation ≤
/// `tol_dissipation`, or `t_end`.
pub fn convergence_run(
    e: &Ellipsoid,
    ctx: &SearchContext,
    t_end: f64,
    tol_residual: f64,
    tol_dissipation: f64,
) -> Result<ConvergenceReport> {
    let mut cfg = ctx.flow.clone();
    cfg.t_max = cfg.t_max.max(t_end);
    cfg.stop_when_converged = false;
    let chunk = cfg.sample_every.max(0.05);
    let mut state = flow::run_modified(e, ctx.grid.clone(), &cfg, &ctx.params, 0.0)?;
    let hit = |s: &FlowState| {
        s.last_sample().and_then(|x| {
            (x.energy.residual <= tol_residual && x.energy.dissipation <= tol_dissipation).then_some(x.t)
        })
    };
    let mut reached_at = hit(&state);
    while reached_at.is_none() && !state.status.is_failed() && !state.status.is_frozen() && state.t < t_end {
        let next = (state.t + chunk).min(t_end);
        flow::resume(&mut state, &cfg, next, Some(ctx.params.a0))?;
        reached_at = hit(&state);
    }
    let trajectory =
        state.history.iter().map(|s| (s.t, s.energy.residual, s.energy.dissipation)).collect::<Vec<_>>();
    let (final_residual, final_dissipation) =
        state.last_sample().map_or((f64::NAN, f64::NAN), |s| (s.energy.residual, s.energy.dissipation));
    Ok(ConvergenceReport { reached_at, status: state.status, final_residual, final_dissipation, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::SupportField;

    fn ctx(res: usize, t_max: f64) -> SearchContext {
        let g = Arc::new(SphereGrid::new(1, res).unwrap());
        let f = vec![1.0; g.len()];
        let params = AdmissibleParams::defaults(&g, &f, -3.0).unwrap();
        SearchContext::new(g, FlowConfig::new(-3.0, f, t_max), params).unwrap()
    }

    fn hausdorff(a: &Ellipsoid, b: &Ellipsoid, dim: usize) -> f64 {
        let g = Arc::new(SphereGrid::new(dim, 64).unwrap());
        let ua = SupportField::from_ellipsoid(a, g.clone(), false).unwrap();
        let ub = SupportField::from_ellipsoid(b, g, false).unwrap();
        ua.hausdorff_distance(&ub).unwrap()
    }

    #[test]
    fn chart_round_trips() {
        let e = Ellipsoid::ellipse([0.1, -0.2], 1.3, 0.7, 2.5).unwrap();
        let back = EllipsoidParams::encode(&e).unwrap().decode().unwrap();
        assert!(hausdorff(&e, &back, 1) <= 1e-10);
        let p = EllipsoidParams { center: vec![0.1, 0.0, -0.1], log_semi_axes: vec![0.1, -0.2, 0.3], rotation: vec![0.4, 1.1, -0.7] };
        let e = p.decode().unwrap();
        let back = EllipsoidParams::encode(&e).unwrap().decode().unwrap();
        assert!(hausdorff(&e, &back, 2) <= 1e-10);
        assert_eq!(EllipsoidParams::from_vec(3, &p.to_vec()).unwrap(), p);
        assert!(EllipsoidParams::from_vec(2, &[0.0; 4]).is_err());
    }

    #[test]
    fn objective_examples() {
        let c = ctx(64, 2.0);
        let ball = EllipsoidParams::encode(&Ellipsoid::unit_ball(2)).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let v = objective(&ball, t, &c);
            assert!(v.value <= 1e-3, "t = {t}: {v:?}");
        }
        let b2 = EllipsoidParams::encode(&Ellipsoid::ball(vec![0.0, 0.0], 2.0).unwrap()).unwrap();
        assert!((objective(&b2, 0.0, &c).value - 1.0).abs() < 1e-6);
        let e = EllipsoidParams::encode(&Ellipsoid::ellipse([0.0, 0.0], 1.5, 1.0 / 1.5, 0.0).unwrap()).unwrap();
        let (a, b) = (objective(&e, 1.0, &c), objective(&e, 1.0, &c));
        assert!(a.value > 0.0);
        assert_eq!(a, b);
        let outside = EllipsoidParams::encode(&Ellipsoid::ball(vec![3.0, 0.0], 1.0).unwrap()).unwrap();
        let v = objective(&outside, 1.0, &c);
        assert_eq!(v.flag, Some(ObjectiveFlag::Inadmissible));
        assert!(v.value >= PENALTY);
    }

    #[test]
    fn find_initial_from_unit_ball_stays() {
        let c = ctx(64, 2.0);
        let ball = EllipsoidParams::encode(&Ellipsoid::unit_ball(2)).unwrap();
        let r = find_initial(1.0, &c, &ball, &SearchOptions::default()).unwrap();
        assert!(r.found && r.objective <= 1e-6, "{}", r.objective);
        assert!(hausdorff(&r.params.decode().unwrap(), &Ellipsoid::unit_ball(2), 1) <= 1e-6);
    }

    #[test]
    fn limiting_initial_validates_horizons() {
        let c = ctx(32, 1.0);
        let ball = EllipsoidParams::encode(&Ellipsoid::unit_ball(2)).unwrap();
        let o = SearchOptions::default();
        assert!(limiting_initial(&[1.0, 0.5], &c, &ball, &o).is_err());
        assert!(limiting_initial(&[0.5, 2.0], &c, &ball, &o).is_err());
        assert!(limiting_initial(&[], &c, &ball, &o).is_err());
    }

    #[test]
    fn trace_rows_are_csv() {
        let rows = [TraceRow { horizon: 1.0, restart: 0, evaluation: 3, objective: 0.5, best: 0.25 }];
        let csv = trace_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("1.0000000000000000e0,0,3,"));
    }
}
