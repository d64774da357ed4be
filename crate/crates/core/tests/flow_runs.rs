use std::sync::Arc;

use lpflow::body::SupportField;
use lpflow::energy::AdmissibleParams;
use lpflow::flow::{self, FlowConfig};
use lpflow::{Ellipsoid, FlowStatus, SphereGrid};

fn setup() -> (Arc<SphereGrid>, Vec<f64>, Ellipsoid) {
    let g = Arc::new(SphereGrid::new(1, 64).unwrap());
    let f = vec![1.0; g.len()];
    // area π, axis ratio 1.2: on the shrinking side of the unit ball
    let e = Ellipsoid::ellipse([0.0, 0.0], 1.2, 1.0 / 1.2, 0.0).unwrap();
    (g, f, e)
}

#[test]
fn collapsing_ellipse_is_monotone_until_failure() {
    let (g, f, e) = setup();
    let mut cfg = FlowConfig::new(-3.0, f, 2.0).fixed_step(1e-3);
    cfg.sample_every = 0.0;
    let state = flow::run_raw(SupportField::from_ellipsoid(&e, g, true).unwrap(), &cfg, 2.0).unwrap();
    assert!(state.status.is_failed(), "{}", state.status);
    assert!(state.t > 0.3 && state.t < 2.0, "failed at {}", state.t);
    let report = flow::monotonicity_check(&state).unwrap();
    assert!(report.violations.is_empty(), "{:?}", &report.violations[..report.violations.len().min(3)]);
    let js: Vec<f64> = state.history.iter().map(|s| s.energy.j).collect();
    assert!(js.last().unwrap() > &js[0]);
}

#[test]
fn modified_flow_freezes_the_collapsing_ellipse_below_a0() {
    let (g, f, e) = setup();
    let params = AdmissibleParams::defaults(&g, &f, -3.0).unwrap();
    let mut cfg = FlowConfig::new(-3.0, f, 2.0);
    cfg.mode = flow::FlowMode::Modified;
    cfg.sample_every = 0.02;
    let state = flow::run_modified(&e, g, &cfg, &params, 2.0).unwrap();
    assert_eq!(state.status, FlowStatus::FrozenAtA0);
    assert!(state.sup_j() < params.a0);
    assert_eq!(state.frozen_at, Some(state.t));
    assert!(state.t > 0.3 && state.t < 2.0);
}
