use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use lpflow_ffi::*;

fn last_error() -> String {
    let p = lpf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid(dim: usize, n: usize) -> *mut LpfGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { lpf_grid_new(dim, n, &mut g) }, LpfStatus::Ok);
    g
}

#[test]
fn unit_ball_energy_and_stationary_flow() {
    unsafe {
        let g = grid(1, 64);
        let n = lpf_grid_len(g);
        assert_eq!(n, 64);
        let mut x = [0.0; 2];
        assert_eq!(lpf_grid_node(g, 5, x.as_mut_ptr()), LpfStatus::Ok);
        assert!((x[0].hypot(x[1]) - 1.0).abs() < 1e-12);

        let ones = vec![1.0; n];
        let mut b = ptr::null_mut();
        assert_eq!(lpf_body_from_values(g, ones.as_ptr(), n, &mut b), LpfStatus::Ok);
        let mut vol = 0.0;
        assert_eq!(lpf_body_volume(b, &mut vol), LpfStatus::Ok);
        assert!((vol - std::f64::consts::PI).abs() < 1e-6);

        let mut e = LpfEnergy::default();
        assert_eq!(lpf_energy(b, ones.as_ptr(), n, -3.0, &mut e), LpfStatus::Ok);
        // J(B₁) = π - (1/p)·2π at p = -3
        assert!((e.j - 5.0 * std::f64::consts::PI / 3.0).abs() < 1e-9);
        assert!(e.residual < 1e-10);

        let mut out = ptr::null_mut();
        let mut status = LpfFlowStatus::Failed;
        let mut t = 0.0;
        assert_eq!(lpf_flow_run(b, ones.as_ptr(), n, -3.0, 0.5, &mut out, &mut status, &mut t), LpfStatus::Ok);
        assert_ne!(status, LpfFlowStatus::Failed);
        assert!((t - 0.5).abs() < 1e-12);
        let mut v = vec![0.0; n];
        assert_eq!(lpf_body_values(out, v.as_mut_ptr(), n), LpfStatus::Ok);
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-8));

        lpf_body_free(out);
        lpf_body_free(b);
        lpf_grid_free(g);
    }
}

#[test]
fn ellipsoid_body_matches_closed_form_support() {
    unsafe {
        let g = grid(1, 32);
        let (a, c) = ([1.5, 0.5], [0.1, -0.2]);
        let axes = [1.0, 0.0, 0.0, 1.0];
        let mut b = ptr::null_mut();
        assert_eq!(lpf_body_from_ellipsoid(g, c.as_ptr(), a.as_ptr(), axes.as_ptr(), &mut b), LpfStatus::Ok);
        let mut v = vec![0.0; 32];
        assert_eq!(lpf_body_values(b, v.as_mut_ptr(), 32), LpfStatus::Ok);
        for (i, h) in v.iter().enumerate() {
            let mut x = [0.0; 2];
            lpf_grid_node(g, i, x.as_mut_ptr());
            let want = c[0] * x[0] + c[1] * x[1] + ((a[0] * x[0]).powi(2) + (a[1] * x[1]).powi(2)).sqrt();
            assert!((h - want).abs() < 1e-14);
        }
        assert_eq!(lpf_body_values(b, v.as_mut_ptr(), 31), LpfStatus::InvalidArgument);
        lpf_body_free(b);
        lpf_grid_free(g);
    }
}

#[test]
fn mvee_of_ellipse_samples() {
    let (a, b, cx, cy) = (2.0, 0.5, 0.3, -0.1);
    let pts: Vec<f64> = (0..200)
        .flat_map(|k| {
            let s = 2.0 * std::f64::consts::PI * k as f64 / 200.0;
            [cx + a * s.cos(), cy + b * s.sin()]
        })
        .collect();
    let (mut c, mut m) = ([0.0; 2], [0.0; 4]);
    let st = unsafe { lpf_mvee(pts.as_ptr(), 200, 2, 1e-7, c.as_mut_ptr(), m.as_mut_ptr()) };
    assert_eq!(st, LpfStatus::Ok);
    assert!((c[0] - cx).abs() < 1e-5 && (c[1] - cy).abs() < 1e-5);
    assert!((m[0] - 1.0 / (a * a)).abs() < 1e-4);
    assert!((m[3] - 1.0 / (b * b)).abs() < 1e-4);
    assert!(m[1].abs() < 1e-5);
    let st = unsafe { lpf_mvee(pts.as_ptr(), 2, 2, 1e-7, c.as_mut_ptr(), m.as_mut_ptr()) };
    assert_eq!(st, LpfStatus::DegenerateInput);
}

#[test]
fn complex_homology() {
    let rp2 = r#"{"0":[[0],[1],[2],[3],[4],[5]],
        "1":[[0,1],[0,2],[0,3],[0,4],[0,5],[1,2],[1,3],[1,4],[1,5],[2,3],[2,4],[2,5],[3,4],[3,5],[4,5]],
        "2":[[0,1,2],[0,2,3],[0,3,4],[0,4,5],[0,1,5],[1,2,4],[2,3,5],[1,3,4],[2,4,5],[1,3,5]]}"#;
    let json = CString::new(rp2).unwrap();
    unsafe {
        let mut x = ptr::null_mut();
        assert_eq!(lpf_complex_from_json(json.as_ptr(), &mut x), LpfStatus::Ok);
        let mut betti = [usize::MAX; 4];
        let mut len = 0;
        assert_eq!(lpf_complex_betti(x, betti.as_mut_ptr(), 4, &mut len), LpfStatus::Ok);
        assert_eq!(&betti[..len], &[1, 0, 0]);
        let mut s = ptr::null_mut();
        assert_eq!(lpf_complex_homology_json(x, &mut s), LpfStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        assert!(text.contains(r#""1":{"betti":0,"torsion":[2]}"#), "{text}");
        lpf_string_free(s);
        lpf_complex_free(x);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let missing_face = CString::new(r#"{"1":[[0,1]]}"#).unwrap();
        let mut x = ptr::null_mut();
        assert_eq!(lpf_complex_from_json(missing_face.as_ptr(), &mut x), LpfStatus::InvalidComplex);
        assert!(x.is_null());
        assert!(last_error().contains("missing"));

        let mut g = ptr::null_mut();
        assert_eq!(lpf_grid_new(5, 64, &mut g), LpfStatus::InvalidArgument);
        assert!(!last_error().is_empty());

        assert_eq!(lpf_grid_new(1, 64, ptr::null_mut()), LpfStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut v = 0.0;
        assert_eq!(lpf_body_volume(ptr::null(), &mut v), LpfStatus::NullPointer);

        let g = grid(1, 32);
        assert_eq!(lpf_grid_node(g, 32, [0.0; 2].as_mut_ptr()), LpfStatus::InvalidArgument);
        assert!(!lpf_last_error().is_null());
        let mut x = [0.0; 2];
        assert_eq!(lpf_grid_node(g, 0, x.as_mut_ptr()), LpfStatus::Ok);
        assert!(lpf_last_error().is_null());
        lpf_grid_free(g);

        // freeing null is a no-op
        lpf_grid_free(ptr::null_mut());
        lpf_body_free(ptr::null_mut());
        lpf_complex_free(ptr::null_mut());
        lpf_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lpflow.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["lpf_grid_new", "lpf_mvee", "lpf_complex_homology_json", "LPF_STATUS_INVALID_COMPLEX"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"lpflow.h\"\nint main(void) { LpfGrid *g = 0; return lpf_grid_new(1, 64, &g) == LPF_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let inc = header.parent().unwrap();
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(cc).args(["-fsyntax-only", "-Wall", "-x", lang, "-I"]).arg(inc).arg(&src).output()
        else {
            eprintln!("{cc} not available; skipping");
            continue;
        };
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
