//! Run configuration, experiment orchestration and run-directory output.
//!
//! A run directory holds `config.json` (the effective configuration, which
//! reproduces the run), plus per-experiment artifacts: `series.csv` and
//! `final.json` for flows, `search.json` and `trace.csv` for searches,
//! `scan.csv` for property scans and `homology.json` for the homology suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::SupportField;
use crate::ellipsoid::Ellipsoid;
use crate::energy::{self, fmt_f64, least_squares_slope, AdmissibleParams};
use crate::error::{invalid, Error, Result};
use crate::flow::{self, FlowConfig, FlowMode, FlowState};
use crate::grid::SphereGrid;
use crate::homology::{self, standard, HomologyProfile, SimplicialComplex};
use crate::search::{self, EllipsoidParams, SearchContext, SearchOptions};

pub const WORKERS_ENV: &str = "LPFLOW_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_FOUND: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Flow,
    ModifiedFlow,
    Search,
    PropertyScan,
    HomologySuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub eps_b: f64,
    pub tol_residual: f64,
    pub cfl_safety: Option<f64>,
    pub sample_every: f64,
    pub snapshot_times: Vec<f64>,
    pub stop_when_converged: bool,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            dt_init: FlowConfig::DEFAULT_DT_INIT,
            dt_min: FlowConfig::DEFAULT_DT_MIN,
            dt_max: FlowConfig::DEFAULT_DT_MAX,
            eps_b: FlowConfig::DEFAULT_EPS_B,
            tol_residual: FlowConfig::DEFAULT_TOL_RESIDUAL,
            cfl_safety: Some(FlowConfig::DEFAULT_CFL_SAFETY),
            sample_every: FlowConfig::DEFAULT_SAMPLE_EVERY,
            snapshot_times: Vec::new(),
            stop_when_converged: false,
        }
    }
}

/// Overrides for the admissible-class caps; `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissibleOverrides {
    pub bar_e: Option<f64>,
    pub bar_v: Option<f64>,
    pub bar_d: Option<f64>,
    #[serde(rename = "A0")]
    pub a0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub horizons: Vec<f64>,
    pub tol_search: f64,
    pub target: f64,
    pub restarts: usize,
    pub jitter: f64,
    pub max_evals: usize,
    pub ladder: usize,
    /// Follow the limiting initial condition up to this time and record
    /// whether it settles on a solution.
    pub converge_until: Option<f64>,
    pub converge_tol_residual: f64,
    pub converge_tol_dissipation: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let o = SearchOptions::default();
        SearchSettings {
            horizons: vec![0.5, 1.0, 2.0],
            tol_search: o.tol_search,
            target: o.target,
            restarts: o.restarts,
            jitter: o.jitter,
            max_evals: o.max_evals,
            ladder: o.ladder,
            converge_until: None,
            converge_tol_residual: 1e-4,
            converge_tol_dissipation: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSettings {
    /// Distances `d` of the origin to the boundary of `B₁((1-d)e₁)`.
    pub distances: Vec<f64>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { distances: vec![0.2, 0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomologySuite {
    #[default]
    Paper,
    Corpus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomologySettings {
    pub suite: HomologySuite,
    /// A complex in `{dim: [[v..]]}` JSON form; replaces the suite.
    pub complex: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub dim: usize,
    pub resolution: usize,
    pub p: f64,
    /// `const:c`, `cosine-bump:A` (`1 + A·x₁`) or `file:path`.
    pub f: String,
    /// `ball:r[,center..]`, `ellipse:a,b[,angle[,cx,cy]]` or
    /// `ellipsoid:a,b,c[,cx,cy,cz]`.
    pub init: String,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub flow: FlowSettings,
    pub admissible: AdmissibleOverrides,
    pub search: SearchSettings,
    pub scan: ScanSettings,
    pub homology: HomologySettings,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ExperimentKind::Flow,
            dim: 1,
            resolution: 256,
            p: -3.0,
            f: "const:1".into(),
            init: "ball:1".into(),
            t_end: 1.0,
            flow: FlowSettings::default(),
            admissible: AdmissibleOverrides::default(),
            search: SearchSettings::default(),
            scan: ScanSettings::default(),
            homology: HomologySettings::default(),
            output: PathBuf::from("lpflow-run"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Arc<SphereGrid>> {
        if self.dim != 1 && self.dim != 2 {
            return invalid(format!("dimension {} is not supported (1 or 2)", self.dim));
        }
        Ok(Arc::new(SphereGrid::new(self.dim, self.resolution)?))
    }

    pub fn f_samples(&self, grid: &SphereGrid) -> Result<Vec<f64>> {
        parse_f(&self.f, grid)
    }

    pub fn initial(&self) -> Result<Ellipsoid> {
        parse_init(&self.init, self.dim + 1)
    }

    pub fn flow_config(&self, f: Vec<f64>) -> FlowConfig {
        let s = &self.flow;
        let mut cfg = FlowConfig::new(self.p, f, self.t_end);
        cfg.dt_init = s.dt_init;
        cfg.dt_min = s.dt_min;
        cfg.dt_max = s.dt_max;
        cfg.eps_b = s.eps_b;
        cfg.tol_residual = s.tol_residual;
        cfg.cfl_safety = s.cfl_safety;
        cfg.sample_every = s.sample_every;
        cfg.snapshot_times = s.snapshot_times.clone();
        cfg.stop_when_converged = s.stop_when_converged;
        cfg.mode = if self.kind == ExperimentKind::ModifiedFlow { FlowMode::Modified } else { FlowMode::Raw };
        cfg
    }

    pub fn admissible_params(&self, grid: &SphereGrid, f: &[f64]) -> Result<AdmissibleParams> {
        let o = &self.admissible;
        let a0 = match o.a0 {
            Some(a) => a,
            None => energy::compute_a0(grid, f, self.p)?,
        };
        AdmissibleParams::new(
            o.bar_e.unwrap_or(AdmissibleParams::DEFAULT_BAR_E),
            o.bar_v.unwrap_or(AdmissibleParams::DEFAULT_BAR_V),
            o.bar_d.unwrap_or(AdmissibleParams::DEFAULT_BAR_D),
            a0,
        )
    }

    pub fn search_options(&self) -> SearchOptions {
        let s = &self.search;
        SearchOptions {
            tol_search: s.tol_search,
            target: s.target,
            restarts: s.restarts,
            jitter: s.jitter,
            max_evals: s.max_evals,
            ladder: s.ladder,
            seed: self.seed,
        }
    }

    /// Checks every precondition of the target experiment without running it.
    pub fn validate(&self) -> Result<()> {
        if self.kind == ExperimentKind::HomologySuite {
            return Ok(());
        }
        let grid = self.grid()?;
        let f = self.f_samples(&grid)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return invalid(format!("T = {} must be finite and non-negative", self.t_end));
        }
        match self.kind {
            ExperimentKind::PropertyScan => {
                energy::check_supercritical(self.dim, self.p)?;
                if self.scan.distances.len() < 2 || self.scan.distances.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                    return invalid("scan needs at least two distances in (0, 1)");
                }
                Ok(())
            }
            ExperimentKind::Flow | ExperimentKind::ModifiedFlow => {
                let e = self.initial()?;
                let cfg = self.flow_config(f.clone());
                cfg.validate(&SupportField::constant(grid.clone(), 1.0))?;
                if self.kind == ExperimentKind::ModifiedFlow {
                    self.admissible_params(&grid, &f)?;
                } else if !(e.quadratic_form(&vec![0.0; self.dim + 1]) < 1.0) {
                    return invalid("the raw flow needs the origin inside the initial body");
                }
                Ok(())
            }
            ExperimentKind::Search => {
                let e = self.initial()?;
                let params = self.admissible_params(&grid, &f)?;
                let adm = energy::in_admissible_class(&e, &params);
                if !adm.admitted {
                    return invalid(format!("search seed is not admissible ({:?})", adm.reason));
                }
                self.search_options().validate()?;
                let h = &self.search.horizons;
                if h.is_empty() || h[0] <= 0.0 || h.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("horizons must be positive and strictly increasing");
                }
                let mut cfg = self.flow_config(f);
                cfg.t_max = cfg.t_max.max(*h.last().expect("non-empty"));
                SearchContext::new(grid, cfg, params).map(|_| ())
            }
            ExperimentKind::HomologySuite => unreachable!(),
        }
    }
}

fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("{what}: cannot parse {t:?}"))))
        .collect()
}

/// Samples `f` on the grid from its textual specification.
pub fn parse_f(spec: &str, grid: &SphereGrid) -> Result<Vec<f64>> {
    let (kind, arg) = spec.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("f spec {spec:?} lacks a kind")))?;
    let f = match kind {
        "const" => {
            let c = numbers(arg, "f")?;
            if c.len() != 1 {
                return invalid("const f takes one value");
            }
            vec![c[0]; grid.len()]
        }
        "cosine-bump" => {
            let a = numbers(arg, "f")?;
            if a.len() != 1 || !(a[0].abs() < 1.0) {
                return invalid("cosine-bump amplitude must be a single value with |A| < 1");
            }
            grid.sample(|x| 1.0 + a[0] * x[0])
        }
        "file" => {
            let v = numbers(&fs::read_to_string(arg)?, "f file")?;
            grid.check_len(&v)?;
            v
        }
        _ => return invalid(format!("unknown f kind {kind:?}")),
    };
    if let Some(v) = f.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return invalid(format!("f must be positive and finite, found {v}"));
    }
    Ok(f)
}

/// Initial ellipsoid in `R^{ambient}` from its textual specification.
pub fn parse_init(spec: &str, ambient: usize) -> Result<Ellipsoid> {
    let (kind, arg) =
        spec.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("init spec {spec:?} lacks a kind")))?;
    let v = numbers(arg, "init")?;
    let center = |rest: &[f64]| -> Result<Vec<f64>> {
        match rest.len() {
            0 => Ok(vec![0.0; ambient]),
            n if n == ambient => Ok(rest.to_vec()),
            _ => invalid(format!("init center needs {ambient} coordinates")),
        }
    };
    match kind {
        "ball" if !v.is_empty() => Ellipsoid::ball(center(&v[1..])?, v[0]),
        "ellipse" if ambient == 2 && (2..=5).contains(&v.len()) && v.len() != 4 => {
            let angle = v.get(2).copied().unwrap_or(0.0);
            let c = center(v.get(3..).unwrap_or(&[]))?;
            Ellipsoid::ellipse([c[0], c[1]], v[0], v[1], angle)
        }
        "ellipsoid" if ambient == 3 && (v.len() == 3 || v.len() == 6) => {
            Ellipsoid::axis_aligned(center(&v[3..])?, v[..3].to_vec())
        }
        _ => invalid(format!("init spec {spec:?} does not describe a body in R^{ambient}")),
    }
}

/// Sizes the global worker pool from `LPFLOW_WORKERS` when set.
pub fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{WORKERS_ENV}={v:?} is not a positive integer")))?;
    // a pool built earlier in the process wins; that is not an error
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The flow lost convexity or a suite check failed.
    NumericalFailure(String),
    /// The search did not meet its tolerance or its certificate.
    NotFound(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => EXIT_OK,
            Outcome::NumericalFailure(_) => EXIT_NUMERICAL,
            Outcome::NotFound(_) => EXIT_NOT_FOUND,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub summary: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::InvalidComplex(_) | Error::Json(_) => EXIT_VALIDATION,
        Error::ConvexityLost { .. } | Error::DegenerateInput(_) | Error::IterationLimit(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(name, &s)
    }
}

/// Validates `cfg`, runs the experiment and writes its run directory.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut w = Writer::new(&cfg.output)?;
    let mut effective = cfg.to_json();
    effective.push('\n');
    w.put("config.json", &effective)?;
    let (outcome, summary) = match cfg.kind {
        ExperimentKind::Flow | ExperimentKind::ModifiedFlow => run_flow(cfg, &mut w)?,
        ExperimentKind::Search => run_search(cfg, &mut w)?,
        ExperimentKind::PropertyScan => run_scan(cfg, &mut w)?,
        ExperimentKind::HomologySuite => run_homology(cfg, &mut w)?,
    };
    Ok(RunReport { outcome, files: w.files, summary })
}

fn write_flow(state: &FlowState, w: &mut Writer) -> Result<()> {
    w.put("series.csv", &state.series_csv())?;
    w.json("final.json", &state.final_state())?;
    if !state.snapshots.is_empty() {
        w.json("snapshots.json", &state.snapshots)?;
    }
    Ok(())
}

fn run_flow(cfg: &RunConfig, w: &mut Writer) -> Result<(Outcome, String)> {
    let grid = cfg.grid()?;
    let f = cfg.f_samples(&grid)?;
    let e = cfg.initial()?;
    let fc = cfg.flow_config(f.clone());
    let state = if cfg.kind == ExperimentKind::ModifiedFlow {
        let params = cfg.admissible_params(&grid, &f)?;
        flow::run_modified(&e, grid, &fc, &params, cfg.t_end)?
    } else {
        flow::run_raw(SupportField::from_ellipsoid(&e, grid, true)?, &fc, cfg.t_end)?
    };
    write_flow(&state, w)?;
    let summary = format!(
        "status {} at t = {} after {} accepted / {} rejected steps, sup J = {}",
        state.status,
        fmt_f64(state.t),
        state.accepted,
        state.rejected,
        fmt_f64(state.sup_j())
    );
    let outcome = if state.status.is_failed() { Outcome::NumericalFailure(state.status.to_string()) } else { Outcome::Success };
    Ok((outcome, summary))
}

fn run_search(cfg: &RunConfig, w: &mut Writer) -> Result<(Outcome, String)> {
    let grid = cfg.grid()?;
    let f = cfg.f_samples(&grid)?;
    let params = cfg.admissible_params(&grid, &f)?;
    let horizons = &cfg.search.horizons;
    let last = *horizons.last().expect("validated");
    let mut fc = cfg.flow_config(f);
    fc.mode = FlowMode::Modified;
    fc.t_max = fc.t_max.max(last).max(cfg.search.converge_until.unwrap_or(0.0));
    let ctx = SearchContext::new(grid, fc, params)?;
    let seed = EllipsoidParams::encode(&cfg.initial()?)?;
    let result = search::limiting_initial(horizons, &ctx, &seed, &cfg.search_options())?;
    w.json("search.json", &result)?;
    w.put("trace.csv", &search::trace_csv(&result.trace))?;
    if result.failing_horizon.is_none() {
        let v = search::verification_run(&result.e_star, &ctx, last)?;
        write_flow(&v, w)?;
    }
    if let (Some(t), true) = (cfg.search.converge_until, result.certified) {
        let s = &cfg.search;
        let c = search::convergence_run(&result.e_star, &ctx, t, s.converge_tol_residual, s.converge_tol_dissipation)?;
        w.json("convergence.json", &c)?;
    }
    let summary = format!(
        "certified {} with worst objective {} over {} horizons",
        result.certified,
        fmt_f64(result.horizon_results.iter().map(|h| h.objective).fold(0.0, f64::max)),
        result.horizon_results.len()
    );
    let outcome = match (result.failing_horizon, result.certified) {
        (Some(t), _) => Outcome::NotFound(format!("no admissible initial ellipsoid met the tolerance at horizon {t}")),
        (None, false) => Outcome::NotFound("the limiting initial condition failed the energy certificate".into()),
        (None, true) => Outcome::Success,
    };
    Ok((outcome, summary))
}

pub const SCAN_HEADER: &str = "d,J";

fn run_scan(cfg: &RunConfig, w: &mut Writer) -> Result<(Outcome, String)> {
    let grid = cfg.grid()?;
    let f = cfg.f_samples(&grid)?;
    let family = cfg
        .scan
        .distances
        .iter()
        .map(|&d| {
            let mut c = vec![0.0; cfg.dim + 1];
            c[0] = 1.0 - d;
            let e = Ellipsoid::ball(c, 1.0)?;
            Ok((d, SupportField::from_ellipsoid(&e, grid.clone(), true)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = energy::property_p_scan(&family, &f, cfg.p)?;
    let mut csv = format!("{SCAN_HEADER}\n");
    for (d, j) in &table {
        csv.push_str(&format!("{},{}\n", fmt_f64(*d), fmt_f64(*j)));
    }
    w.put("scan.csv", &csv)?;
    let slope = energy::loglog_slope(&table)?;
    Ok((Outcome::Success, format!("log-log slope of J against d: {}", fmt_f64(slope))))
}

/// Outcome of the homology suite written to `homology.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub profiles: std::collections::BTreeMap<String, HomologyProfile>,
    pub checks: std::collections::BTreeMap<String, bool>,
    pub passed: bool,
}

/// Named complexes and identity checks. The `paper` suite adds the circle of
/// fixed-eccentricity ellipses, `S¹ × S²` and the Künneth and
/// sphere-product identities to the corpus.
pub fn homology_suite(suite: HomologySuite, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = homology::corpus(&mut rng);
    let mut profiles = std::collections::BTreeMap::new();
    let mut checks = std::collections::BTreeMap::new();
    let mut suspension_ok = true;
    for (name, x) in &corpus {
        profiles.insert(name.clone(), homology::homology(x)?);
        suspension_ok &= homology::suspension_identity(x)?;
    }
    checks.insert("suspension_identity".to_string(), suspension_ok);
    if suite == HomologySuite::Paper {
        let angles: Vec<f64> = (0..12).map(|i| std::f64::consts::PI * i as f64 / 12.0).collect();
        let family = homology::eccentric_family_complex(&angles, 1.5)?;
        profiles.insert("eccentric-ellipses".into(), homology::homology(&family)?);
        checks.insert("eccentric_family_h1_is_z".into(), homology::verify_n1_eccentric_family(12, 1.5)?);
        let rp2 = &profiles["RP2"];
        checks.insert("rp2_h1_is_z2".into(), rp2.group(1).betti == 0 && rp2.torsion(1) == [2]);
        let s1 = standard::sphere(1);
        let s2 = standard::octahedron();
        let prod = homology::homology(&homology::product(&s1, &s2))?;
        let predicted = homology::kunneth_ranks(&homology::homology(&s1)?, &homology::homology(&s2)?)?;
        checks.insert("kunneth_s1_x_s2".into(), prod.betti() == predicted);
        profiles.insert("S1xS2".into(), prod);
        checks.insert("sphere_product_shift".into(), homology::sphere_product_identity(&s1, 2)?);
    }
    let passed = checks.values().all(|v| *v);
    let suite = match suite {
        HomologySuite::Paper => "paper",
        HomologySuite::Corpus => "corpus",
    };
    Ok(SuiteReport { suite: suite.into(), profiles, checks, passed })
}

fn run_homology(cfg: &RunConfig, w: &mut Writer) -> Result<(Outcome, String)> {
    if let Some(path) = &cfg.homology.complex {
        let x: SimplicialComplex = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidComplex(format!("{}: {e}", path.display())))?;
        let h = homology::homology(&x)?;
        w.json("homology.json", &h)?;
        return Ok((Outcome::Success, format!("betti numbers {:?}", h.betti())));
    }
    let report = homology_suite(cfg.homology.suite, cfg.seed)?;
    w.json("homology.json", &report)?;
    let failed: Vec<&String> = report.checks.iter().filter(|(_, v)| !**v).map(|(k, _)| k).collect();
    let summary = format!("{} complexes, {} checks, failed: {failed:?}", report.profiles.len(), report.checks.len());
    let outcome = if report.passed { Outcome::Success } else { Outcome::NumericalFailure(format!("failed checks {failed:?}")) };
    Ok((outcome, summary))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| numbers(l, &path.display().to_string()))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::InvalidArgument(format!("column {name} missing")))
}

/// Two-column gnuplot files from a run directory: `J.dat`,
/// `dissipation.dat` and `maxK.dat` from `series.csv`, and `loglog.dat`
/// (with a trailing `# slope` fit line) from `scan.csv`.
pub fn emit_plotdata(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let series = dir.join("series.csv");
    let scan = dir.join("scan.csv");
    if series.is_file() {
        let (header, rows) = read_table(&series)?;
        let t = column(&header, "t")?;
        for name in ["J", "dissipation", "maxK"] {
            let c = column(&header, name)?;
            let mut s = format!("# t {name}\n");
            for r in &rows {
                s.push_str(&format!("{} {}\n", fmt_f64(r[t]), fmt_f64(r[c])));
            }
            let path = dir.join(format!("{name}.dat"));
            fs::write(&path, s)?;
            out.push(path);
        }
    }
    if scan.is_file() {
        let (header, rows) = read_table(&scan)?;
        let (d, j) = (column(&header, "d")?, column(&header, "J")?);
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[d].ln(), r[j].ln())).collect();
        if pts.len() < 2 || pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return invalid("scan table needs at least two positive rows");
        }
        let mut s = String::from("# log_d log_J\n");
        for (x, y) in &pts {
            s.push_str(&format!("{} {}\n", fmt_f64(*x), fmt_f64(*y)));
        }
        s.push_str(&format!("# slope {}\n", fmt_f64(least_squares_slope(&pts))));
        let path = dir.join("loglog.dat");
        fs::write(&path, s)?;
        out.push(path);
    }
    if out.is_empty() {
        return invalid(format!("no run artifacts (series.csv or scan.csv) in {}", dir.display()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        let partial = RunConfig::from_json(r#"{"p": -4, "flow": {"cfl_safety": null}}"#).unwrap();
        assert_eq!(partial.p, -4.0);
        assert_eq!(partial.flow.cfl_safety, None);
        assert_eq!(partial.resolution, 256);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"flow": {"dt": 1}}"#).is_err());
    }

    #[test]
    fn f_specs() {
        let g = SphereGrid::new(1, 32).unwrap();
        assert!(parse_f("const:2", &g).unwrap().iter().all(|v| *v == 2.0));
        let f = parse_f("cosine-bump:0.5", &g).unwrap();
        for (i, v) in f.iter().enumerate() {
            assert!((v - (1.0 + 0.5 * g.node(i)[0])).abs() < 1e-15);
        }
        assert!(parse_f("cosine-bump:1.5", &g).is_err());
        assert!(parse_f("const:-1", &g).is_err());
        assert!(parse_f("gauss:1", &g).is_err());
        assert!(parse_f("nonsense", &g).is_err());
    }

    #[test]
    fn init_specs() {
        let e = parse_init("ellipse:1.2,0.8,0.3,0.1,-0.1", 2).unwrap();
        assert_eq!(e.center(), &[0.1, -0.1]);
        assert!((e.volume() - std::f64::consts::PI * 0.96).abs() < 1e-12);
        assert_eq!(parse_init("ball:2", 3).unwrap().semi_axes(), &[2.0, 2.0, 2.0]);
        assert!(parse_init("ellipsoid:1,2,3", 3).is_ok());
        assert!(parse_init("ellipse:1,2", 3).is_err());
        assert!(parse_init("ball:1,0.5", 2).is_err());
        assert!(parse_init("ellipse:1,2,0,0.5", 2).is_err());
    }

    #[test]
    fn validation_gates() {
        let mut c = RunConfig { resolution: 64, ..RunConfig::default() };
        assert!(c.validate().is_ok());
        c.p = -1.5;
        assert!(matches!(c.validate(), Err(Error::InvalidArgument(_))));
        c.p = -3.0;
        c.dim = 3;
        assert!(c.validate().is_err());
        c.dim = 1;
        c.init = "ball:1,2,0".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn plotdata_from_empty_dir_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plotdata(dir.path()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_VALIDATION);
    }

    #[test]
    fn scan_and_plotdata() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            kind: ExperimentKind::PropertyScan,
            p: -4.0,
            output: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let r = run(&c).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        let files = emit_plotdata(dir.path()).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        let pts: Vec<(f64, f64)> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let v: Vec<f64> = l.split(' ').map(|x| x.parse().unwrap()).collect();
                (v[0], v[1])
            })
            .collect();
        assert_eq!(pts.len(), 4);
        // closed-form least squares over the emitted points
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let line = text.lines().last().unwrap();
        let reported: f64 = line.strip_prefix("# slope ").unwrap().parse().unwrap();
        assert!((reported - slope).abs() <= 1e-12 * slope.abs());
    }

    #[test]
    fn suite_passes() {
        let r = homology_suite(HomologySuite::Paper, 0).unwrap();
        assert!(r.passed, "{:?}", r.checks);
        assert_eq!(r.profiles["RP2"].torsion(1), &[2]);
    }
}
