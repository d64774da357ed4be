use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpflow::harness::{self, ExperimentKind, HomologySuite, RunConfig};

#[derive(Parser)]
#[command(name = "lpflow", version, about = "Gauss curvature flow experiments for the super-critical L_p-Minkowski problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve an initial body by the raw or modified flow.
    Flow(FlowArgs),
    /// Search for initial ellipsoids whose evolved John ellipsoid is the unit ball.
    Search(SearchArgs),
    /// Tabulate J over balls approaching the origin.
    Scan(ScanArgs),
    /// Run the homology suite or compute the homology of a complex.
    Homology(HomologyArgs),
    /// Write gnuplot data files for a finished run directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct Model {
    /// Start from a saved config.json; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, short = 'N')]
    resolution: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// const:c, cosine-bump:A or file:path
    #[arg(long)]
    f: Option<String>,
    /// ball:r[,center], ellipse:a,b[,angle[,cx,cy]] or ellipsoid:a,b,c[,cx,cy,cz]
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt_init: Option<f64>,
    #[arg(long)]
    dt_min: Option<f64>,
    #[arg(long)]
    dt_max: Option<f64>,
    /// Fixed time step; disables growth and the stability cap.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    eps_b: Option<f64>,
    /// Stability cap as a fraction of the explicit bound, or 0 to disable.
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    sample_every: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshot: Option<Vec<f64>>,
    #[arg(long = "A0")]
    a0: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Modified,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    tol_search: Option<f64>,
    /// Follow the result up to this time and record convergence.
    #[arg(long)]
    converge_until: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    model: Model,
    /// Distances of the origin to the boundary.
    #[arg(long = "d", value_delimiter = ',')]
    distances: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Paper,
    Corpus,
}

#[derive(Args)]
struct HomologyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    /// Complex JSON `{"0": [[0], ..], "1": [[0, 1], ..]}`.
    #[arg(long)]
    complex: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn base(config: &Option<PathBuf>) -> lpflow::Result<RunConfig> {
    config.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn apply(m: &Model, c: &mut RunConfig) {
    macro_rules! set {
        ($src:expr, $dst:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    set!(m.dim, c.dim);
    set!(m.resolution, c.resolution);
    set!(m.p, c.p);
    set!(m.f, c.f);
    set!(m.init, c.init);
    set!(m.t_end, c.t_end);
    set!(m.out, c.output);
    set!(m.seed, c.seed);
    set!(m.dt_init, c.flow.dt_init);
    set!(m.dt_min, c.flow.dt_min);
    set!(m.dt_max, c.flow.dt_max);
    set!(m.eps_b, c.flow.eps_b);
    set!(m.sample_every, c.flow.sample_every);
    set!(m.snapshot, c.flow.snapshot_times);
    if let Some(dt) = m.dt {
        c.flow.dt_init = dt;
        c.flow.dt_max = dt;
        c.flow.dt_min = c.flow.dt_min.min(dt);
        c.flow.cfl_safety = None;
    }
    if let Some(s) = m.cfl {
        c.flow.cfl_safety = (s > 0.0).then_some(s);
    }
    if m.a0.is_some() {
        c.admissible.a0 = m.a0;
    }
}

fn config(cmd: &Command) -> lpflow::Result<RunConfig> {
    let mut c;
    match cmd {
        Command::Flow(a) => {
            c = base(&a.model.config)?;
            apply(&a.model, &mut c);
            c.kind = match (a.mode, c.kind) {
                (Some(Mode::Modified), _) | (None, ExperimentKind::ModifiedFlow) => ExperimentKind::ModifiedFlow,
                _ => ExperimentKind::Flow,
            };
        }
        Command::Search(a) => {
            c = base(&a.model.config)?;
            apply(&a.model, &mut c);
            c.kind = ExperimentKind::Search;
            if let Some(h) = &a.horizons {
                c.search.horizons = h.clone();
            }
            if let Some(v) = a.restarts {
                c.search.restarts = v;
            }
            if let Some(v) = a.max_evals {
                c.search.max_evals = v;
            }
            if let Some(v) = a.tol_search {
                c.search.tol_search = v;
            }
            if a.converge_until.is_some() {
                c.search.converge_until = a.converge_until;
            }
        }
        Command::Scan(a) => {
            c = base(&a.model.config)?;
            apply(&a.model, &mut c);
            c.kind = ExperimentKind::PropertyScan;
            if let Some(d) = &a.distances {
                c.scan.distances = d.clone();
            }
        }
        Command::Homology(a) => {
            c = base(&a.config)?;
            c.kind = ExperimentKind::HomologySuite;
            if let Some(s) = a.suite {
                c.homology.suite = match s {
                    Suite::Paper => HomologySuite::Paper,
                    Suite::Corpus => HomologySuite::Corpus,
                };
            }
            if a.complex.is_some() {
                c.homology.complex = a.complex.clone();
            }
            if let Some(o) = &a.out {
                c.output = o.clone();
            }
            if let Some(s) = a.seed {
                c.seed = s;
            }
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { harness::EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    let fail = |e: lpflow::Error| {
        eprintln!("error: {e}");
        ExitCode::from(harness::exit_code(&e) as u8)
    };
    if let Err(e) = harness::configure_workers() {
        return fail(e);
    }
    if let Command::Report { dir } = &cli.command {
        return match harness::emit_plotdata(dir) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        };
    }
    let report = match config(&cli.command).and_then(|c| harness::run(&c)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("{}", report.summary);
    match &report.outcome {
        harness::Outcome::Success => {}
        harness::Outcome::NumericalFailure(m) => eprintln!("numerical failure: {m}"),
        harness::Outcome::NotFound(m) => eprintln!("not found: {m}"),
    }
    ExitCode::from(report.outcome.exit_code() as u8)
}
