//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs sequentially so the runtime budgets are measured without contention.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lpflow::body::SupportField;
use lpflow::energy::{self, AdmissibleParams};
use lpflow::flow::{self, FlowConfig};
use lpflow::homology::{self, standard};
use lpflow::john;
use lpflow::search::{self, EllipsoidParams, SearchContext, SearchOptions};
use lpflow::{Ellipsoid, SphereGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass,
    Fail,
    /// Experimental criterion whose outcome is reported, not enforced.
    NotReproduced,
}

struct Line {
    id: usize,
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn check(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn grid(dim: usize, n: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(dim, n).unwrap())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn stationarity() -> Line {
    let start = Instant::now();
    let g = grid(1, 256);
    let f = vec![1.0; g.len()];
    let u0 = SupportField::constant(g.clone(), 1.0);
    let res = energy::residual(&u0, &f, -3.0).unwrap();
    let state = flow::run_raw(u0.clone(), &FlowConfig::new(-3.0, f, 5.0), 5.0).unwrap();
    let drift = sup_diff(state.u.values(), u0.values());
    let took = start.elapsed();
    let ok = res <= 1e-10 && drift <= 1e-8 && state.t == 5.0 && took < Duration::from_secs(1);
    Line {
        id: 1,
        name: "stationarity",
        verdict: check(ok),
        detail: format!("residual {res:.2e}, sup|u(5)-1| {drift:.2e}, {}", secs(took)),
    }
}

/// Raw flow from the (1.2, 1.0) ellipse at fixed dt = 1e-3, shared by the
/// monotonicity and curvature criteria.
fn ellipse_run() -> (flow::FlowState, Duration) {
    let start = Instant::now();
    let g = grid(1, 64);
    let f = vec![1.0; g.len()];
    let e = Ellipsoid::ellipse([0.0, 0.0], 1.2, 1.0, 0.0).unwrap();
    let mut cfg = FlowConfig::new(-3.0, f, 2.0).fixed_step(1e-3);
    cfg.sample_every = 0.0;
    let u0 = SupportField::from_ellipsoid(&e, g, true).unwrap();
    let state = flow::run_raw(u0, &cfg, 2.0).unwrap();
    (state, start.elapsed())
}

fn monotonicity(state: &flow::FlowState, took: Duration) -> Line {
    let start = Instant::now();
    let report = flow::monotonicity_check(state).unwrap();
    let took = took + start.elapsed();
    let d = report.derivative.expect("mid-run derivative check");
    let ok = !state.status.is_failed()
        && (state.t - 2.0).abs() < 1e-9
        && report.violations.is_empty()
        && d.rel_err <= 0.02
        && took < Duration::from_secs(10);
    Line {
        id: 2,
        name: "monotonicity",
        verdict: check(ok),
        detail: format!(
            "ellipse (1.2, 1.0), {} steps to t = {:.3}, {} violations, dJ/dt {:.6e} vs dissipation {:.6e} at t = {:.3} (rel {:.2e}), {}",
            state.accepted,
            state.t,
            report.violations.len(),
            d.discrete,
            d.dissipation,
            d.t,
            d.rel_err,
            secs(took)
        ),
    }
}

fn property_p() -> Line {
    let start = Instant::now();
    let g = grid(1, 256);
    let f = vec![1.0; g.len()];
    let p = -4.0;
    let family: Vec<(f64, SupportField)> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&d| {
            let e = Ellipsoid::ball(vec![1.0 - d, 0.0], 1.0).unwrap();
            (d, SupportField::from_ellipsoid(&e, g.clone(), true).unwrap())
        })
        .collect();
    let table = energy::property_p_scan(&family, &f, p).unwrap();
    let slope = energy::loglog_slope(&table).unwrap();
    // J = π - (1/p)∫(1 + c cosθ)^{-4} with ∫ = π(2 + 3c²)(1 - c²)^{-7/2}, c = 1 - d
    let oracle = |d: f64| {
        let c: f64 = 1.0 - d;
        PI - PI * (2.0 + 3.0 * c * c) * (1.0 - c * c).powf(-3.5) / p
    };
    let worst = table.iter().map(|(d, j)| ((j - oracle(*d)) / oracle(*d)).abs()).fold(0.0, f64::max);
    let took = start.elapsed();
    let ok = slope <= -0.5 && worst <= 1e-4 && took < Duration::from_secs(5);
    Line {
        id: 3,
        name: "property P power law",
        verdict: check(ok),
        detail: format!("log-log slope {slope:.4}, J vs closed form rel {worst:.1e}, {}", secs(took)),
    }
}

fn a0_formula() -> Line {
    let g = grid(1, 256);
    let f = vec![1.0; g.len()];
    let a0 = energy::compute_a0(&g, &f, -3.0).unwrap();
    // 2(‖f‖/(3·4⁻³) + 4·vol(B₁)) with ‖f‖ = 2π
    let closed = 2.0 * (2.0 * PI * 64.0 / 3.0 + 4.0 * PI);
    let rel = ((a0 - closed) / closed).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dirs: Vec<[f64; 2]> = (0..4096).map(|k| (2.0 * PI * k as f64 / 4096.0).sin_cos()).map(|(s, c)| [c, s]).collect();
    let mut members = vec![Ellipsoid::ball(vec![0.0, 0.0], 0.25).unwrap(), Ellipsoid::ball(vec![0.0, 0.0], 2.0).unwrap()];
    while members.len() < 40 {
        let e = Ellipsoid::ellipse(
            [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)],
            rng.gen_range(0.3..1.9),
            rng.gen_range(0.3..1.9),
            rng.gen_range(0.0..PI),
        )
        .unwrap();
        let h: Vec<f64> = dirs.iter().map(|x| e.support(x)).collect();
        let (lo, hi) = (h.iter().copied().fold(f64::INFINITY, f64::min), h.iter().copied().fold(0.0, f64::max));
        if lo >= 0.25 + 1e-3 && hi <= 2.0 - 1e-3 {
            members.push(e);
        }
    }
    let worst = members
        .iter()
        .map(|e| energy::functional_j(&SupportField::from_ellipsoid(e, g.clone(), true).unwrap(), &f, -3.0).unwrap())
        .fold(0.0, f64::max);
    let ok = rel <= 1e-9 && worst <= a0 / 2.0;
    Line {
        id: 4,
        name: "A0 formula",
        verdict: check(ok),
        detail: format!(
            "A0 {a0:.12} vs 280π/3 rel {rel:.1e}; max J over {} sandwiched ellipses {worst:.4} ≤ A0/2 = {:.4}",
            members.len(),
            a0 / 2.0
        ),
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..if d == 2 { 1 } else { 3 }).map(|_| rng.gen_range(-PI..PI)).collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// `sup |h_a - h_b|` over a dense direction set.
fn ellipsoid_hausdorff(a: &Ellipsoid, b: &Ellipsoid, dirs: &[Vec<f64>]) -> f64 {
    dirs.iter().map(|x| (a.support(x) - b.support(x)).abs()).fold(0.0, f64::max)
}

fn direction_set(d: usize) -> Vec<Vec<f64>> {
    if d == 2 {
        return (0..8192).map(|k| (2.0 * PI * k as f64 / 8192.0).sin_cos()).map(|(s, c)| vec![c, s]).collect();
    }
    // Fibonacci sphere
    let m = 40_000;
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn john_recovery() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 2];
    let mut certified = 0;
    let mut total = 0;
    for (slot, d) in [(0usize, 2usize), (1, 3)] {
        let dirs = direction_set(d);
        let g = grid(d - 1, if d == 2 { 256 } else { 32 });
        for _ in 0..50 {
            let p = EllipsoidParams {
                center: (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                log_semi_axes: (0..d).map(|_| rng.gen_range(-0.7f64..0.7)).collect(),
                rotation: random_rotation(&mut rng, d),
            };
            let e = p.decode().unwrap();
            let pts: Vec<Vec<f64>> = (0..512).map(|_| e.boundary_point(&unit_vector(&mut rng, d))).collect();
            let m = john::mvee(&pts, john::DEFAULT_TOL).unwrap();
            worst[slot] = worst[slot].max(ellipsoid_hausdorff(&e, &m, &dirs));
            let body = SupportField::from_ellipsoid(&e, g.clone(), false).unwrap();
            total += 1;
            if john::john_certificate(&body, &m, john::DEFAULT_TOL).unwrap().holds {
                certified += 1;
            }
        }
    }
    let took = start.elapsed();
    let ok = worst.iter().all(|w| *w <= 1e-4) && certified == total && took < Duration::from_secs(30);
    Line {
        id: 5,
        name: "John ellipsoid",
        verdict: check(ok),
        detail: format!(
            "worst Hausdorff {:.1e} (R²) / {:.1e} (R³) over 50 + 50 ellipsoids, certificate {certified}/{total}, {}",
            worst[0],
            worst[1],
            secs(took)
        ),
    }
}

fn search_context() -> SearchContext {
    let g = grid(1, 64);
    let f = vec![1.0; g.len()];
    let params = AdmissibleParams::defaults(&g, &f, -3.0).unwrap();
    SearchContext::new(g, FlowConfig::new(-3.0, f, 20.0), params).unwrap()
}

fn initial_search(ctx: &SearchContext) -> (Line, Option<Ellipsoid>) {
    let start = Instant::now();
    let seed = EllipsoidParams::encode(&Ellipsoid::ellipse([0.03, -0.02], 1.1, 0.95, 0.4).unwrap()).unwrap();
    let r = search::limiting_initial(&[0.5, 1.0, 2.0], ctx, &seed, &SearchOptions::default()).unwrap();
    let took = start.elapsed();
    let objectives: Vec<String> = r.horizon_results.iter().map(|h| format!("t={} {:.1e}", h.t, h.objective)).collect();
    let all_found = r.horizon_results.len() == 3 && r.horizon_results.iter().all(|h| h.objective <= 1e-2);
    let ok = all_found && r.certified && took < Duration::from_secs(300);
    let line = Line {
        id: 6,
        name: "initial search",
        verdict: check(ok),
        detail: format!(
            "objectives [{}], certified {} (sup J {:.4} vs 0.75·A0 = {:.4}), E_star semi-axes {:?}, {}",
            objectives.join(", "),
            r.certified,
            r.sup_j.unwrap_or(f64::NAN),
            0.75 * r.a0,
            r.e_star.semi_axes().iter().map(|a| format!("{a:.6}")).collect::<Vec<_>>(),
            secs(took)
        ),
    };
    (line, all_found.then_some(r.e_star))
}

fn convergence(ctx: &SearchContext, e_star: Option<&Ellipsoid>) -> Line {
    let Some(e) = e_star else {
        return Line {
            id: 7,
            name: "convergence to a solution",
            verdict: Verdict::NotReproduced,
            detail: "no limiting initial condition to follow".into(),
        };
    };
    let start = Instant::now();
    let c = search::convergence_run(e, ctx, 20.0, 1e-4, 1e-8).unwrap();
    let took = start.elapsed();
    match c.reached_at {
        Some(t) => Line {
            id: 7,
            name: "convergence to a solution",
            verdict: Verdict::Pass,
            detail: format!(
                "residual {:.1e} and dissipation {:.1e} reached at t = {t:.3}, {}",
                c.final_residual,
                c.final_dissipation,
                secs(took)
            ),
        },
        None => {
            let tail: Vec<String> = c
                .trajectory
                .iter()
                .rev()
                .take(5)
                .map(|(t, r, d)| format!("(t={t:.3}, res={r:.1e}, diss={d:.1e})"))
                .collect();
            Line {
                id: 7,
                name: "convergence to a solution",
                verdict: Verdict::NotReproduced,
                detail: format!(
                    "not reproduced at this scale: status {}, final residual {:.1e}, dissipation {:.1e}; trajectory tail {}",
                    c.status,
                    c.final_residual,
                    c.final_dissipation,
                    tail.join(" ")
                ),
            }
        }
    }
}

fn homology_suite() -> Line {
    let start = Instant::now();
    let family = homology::verify_n1_eccentric_family(12, 1.5).unwrap();
    let rp2 = homology::homology(&standard::rp2()).unwrap();
    let rp2_ok = rp2.group(1).betti == 0 && rp2.torsion(1) == [2];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = homology::corpus(&mut rng);
    let suspension = corpus.iter().all(|(_, x)| homology::suspension_identity(x).unwrap());
    let (s1, s2) = (standard::sphere(1), standard::octahedron());
    let prod = homology::homology(&homology::product(&s1, &s2)).unwrap();
    let predicted =
        homology::kunneth_ranks(&homology::homology(&s1).unwrap(), &homology::homology(&s2).unwrap()).unwrap();
    let shift = homology::sphere_product_identity(&s1, 2).unwrap();
    let took = start.elapsed();
    let ok = family && rp2_ok && suspension && prod.betti() == predicted && shift && took < Duration::from_secs(10);
    Line {
        id: 8,
        name: "homology suite",
        verdict: check(ok),
        detail: format!(
            "H1(ellipse circle) = Z: {family}; H1(RP2) torsion {:?}; suspension on {} complexes: {suspension}; S1xS2 betti {:?} vs Künneth {:?}; sphere-product shift: {shift}; {}",
            rp2.torsion(1),
            corpus.len(),
            prod.betti(),
            predicted,
            secs(took)
        ),
    }
}

fn curvature_bounds(state: &flow::FlowState) -> Line {
    let cutoff = 0.1 * state.t;
    let early = state.history.iter().filter(|s| s.t <= cutoff);
    let (k0, inv0) = early.fold((0.0f64, 0.0f64), |(k, i), s| (k.max(s.curvature.max_k), i.max(1.0 / s.curvature.min_kappa)));
    let (k, inv) = state
        .history
        .iter()
        .fold((0.0f64, 0.0f64), |(k, i), s| (k.max(s.curvature.max_k), i.max(1.0 / s.curvature.min_kappa)));
    let ok = k0 > 0.0 && k <= 10.0 * k0 && inv <= 10.0 * inv0;
    Line {
        id: 9,
        name: "curvature diagnostics",
        verdict: check(ok),
        detail: format!(
            "max K {k:.4} vs early {k0:.4}; max 1/min_kappa {inv:.4} vs early {inv0:.4} over {} samples",
            state.history.len()
        ),
    }
}

fn sphere_smoke() -> Line {
    let start = Instant::now();
    let g = grid(2, 64);
    let f = vec![1.0; g.len()];
    let mut cfg = FlowConfig::new(-4.0, f, 1.0);
    cfg.cfl_safety = None;
    cfg.sample_every = 0.25;
    let u0 = SupportField::constant(g, 1.0);
    let state = flow::run_raw(u0.clone(), &cfg, 1.0).unwrap();
    let drift = sup_diff(state.u.values(), u0.values());
    let took = start.elapsed();
    let ok = !state.status.is_failed() && state.t == 1.0 && drift <= 1e-6 && took < Duration::from_secs(120);
    Line {
        id: 10,
        name: "n=2 smoke test",
        verdict: check(ok),
        detail: format!("64x128 grid, sup|u(1)-1| {drift:.2e}, {} steps, {}", state.accepted, secs(took)),
    }
}

fn main() {
    let mut lines = Vec::new();
    let mut emit = |l: Line| {
        let tag = match l.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotReproduced => "NOT REPRODUCED",
        };
        println!("criterion {:>2} [{}] {tag}: {}", l.id, l.name, l.detail);
        lines.push(l);
    };
    emit(stationarity());
    let (run, took) = ellipse_run();
    emit(monotonicity(&run, took));
    emit(property_p());
    emit(a0_formula());
    emit(john_recovery());
    let ctx = search_context();
    let (line, e_star) = initial_search(&ctx);
    emit(line);
    emit(convergence(&ctx, e_star.as_ref()));
    emit(homology_suite());
    emit(curvature_bounds(&run));
    emit(sphere_smoke());
    let failed: Vec<usize> = lines.iter().filter(|l| matches!(l.verdict, Verdict::Fail)).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
