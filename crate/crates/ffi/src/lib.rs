//! C ABI over `lpflow`. Objects cross the boundary as opaque handles that
//! the caller frees with the matching `*_free`. Every fallible call returns
//! an [`LpfStatus`]; the message for the last failure on the calling thread
//! is available from [`lpf_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use lpflow::body::SupportField;
use lpflow::flow::{self, FlowConfig, FlowStatus};
use lpflow::homology::{self, SimplicialComplex};
use lpflow::{energy, john, Ellipsoid, Error, SphereGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConvexityLost = 2,
    DegenerateInput = 3,
    IterationLimit = 4,
    InvalidComplex = 5,
    NullPointer = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfFlowStatus {
    Running = 0,
    FrozenAtA0 = 1,
    StationaryInitial = 2,
    Converged = 3,
    Failed = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LpfEnergy {
    pub j: f64,
    pub dissipation: f64,
    pub vol: f64,
    pub ecc: f64,
    pub origin_dist: f64,
    pub residual: f64,
}

/// Sampling grid on `S^n`.
pub struct LpfGrid(Arc<SphereGrid>);

/// Convex body given by support-function samples.
pub struct LpfBody(SupportField);

/// Finite simplicial complex.
pub struct LpfComplex(SimplicialComplex);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LpfStatus {
    match err {
        Error::InvalidArgument(_) | Error::Json(_) => LpfStatus::InvalidArgument,
        Error::ConvexityLost { .. } => LpfStatus::ConvexityLost,
        Error::DegenerateInput(_) => LpfStatus::DegenerateInput,
        Error::IterationLimit(_) => LpfStatus::IterationLimit,
        Error::InvalidComplex(_) => LpfStatus::InvalidComplex,
        Error::Io(_) => LpfStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LpfStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            LpfStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LpfStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn lpf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lpf_grid_new(dim: usize, resolution: usize, out: *mut *mut LpfGrid) -> LpfStatus {
    guard(|| {
        let g = SphereGrid::new(dim, resolution)?;
        put(out, Box::into_raw(Box::new(LpfGrid(Arc::new(g)))), "out")
    })
}

/// # Safety
/// `grid` must come from [`lpf_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpf_grid_free(grid: *mut LpfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of nodes, or 0 for a null grid.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn lpf_grid_len(grid: *const LpfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Writes the `n + 1` coordinates of node `i` to `out`.
///
/// # Safety
/// `out` must hold `n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn lpf_grid_node(grid: *const LpfGrid, i: usize, out: *mut f64) -> LpfStatus {
    guard(|| {
        let g = &as_ref(grid, "grid")?.0;
        if i >= g.len() {
            return Err(Error::InvalidArgument(format!("node {i} out of range for {} nodes", g.len())).into());
        }
        let x = g.node(i);
        slice_mut(out, x.len(), "out")?.copy_from_slice(x);
        Ok(())
    })
}

/// Body of the ellipsoid with the given centre, semi-axes and row-major
/// orthonormal axes, all in `R^{n+1}`.
///
/// # Safety
/// `center` and `semi_axes` hold `n + 1` doubles, `axes` holds `(n + 1)²`.
#[no_mangle]
pub unsafe extern "C" fn lpf_body_from_ellipsoid(
    grid: *const LpfGrid,
    center: *const f64,
    semi_axes: *const f64,
    axes: *const f64,
    out: *mut *mut LpfBody,
) -> LpfStatus {
    guard(|| {
        let g = &as_ref(grid, "grid")?.0;
        let d = g.ambient_dim();
        let axes = slice(axes, d * d, "axes")?.chunks(d).map(<[f64]>::to_vec).collect();
        let e = Ellipsoid::new(slice(center, d, "center")?.to_vec(), axes, slice(semi_axes, d, "semi_axes")?.to_vec())?;
        let u = SupportField::from_ellipsoid(&e, g.clone(), false)?;
        put(out, Box::into_raw(Box::new(LpfBody(u))), "out")
    })
}

/// # Safety
/// `values` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lpf_body_from_values(
    grid: *const LpfGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut LpfBody,
) -> LpfStatus {
    guard(|| {
        let g = &as_ref(grid, "grid")?.0;
        let u = SupportField::new(g.clone(), slice(values, len, "values")?.to_vec())?;
        put(out, Box::into_raw(Box::new(LpfBody(u))), "out")
    })
}

/// # Safety
/// `body` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpf_body_free(body: *mut LpfBody) {
    if !body.is_null() {
        drop(Box::from_raw(body));
    }
}

/// Copies the support values into `out`, which must have room for the
/// grid's node count.
///
/// # Safety
/// `out` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lpf_body_values(body: *const LpfBody, out: *mut f64, len: usize) -> LpfStatus {
    guard(|| {
        let v = as_ref(body, "body")?.0.values();
        if len != v.len() {
            return Err(Error::InvalidArgument(format!("buffer holds {len} values, body has {}", v.len())).into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lpf_body_volume(body: *const LpfBody, out: *mut f64) -> LpfStatus {
    guard(|| put(out, as_ref(body, "body")?.0.volume(), "out"))
}

/// # Safety
/// `f` holds `f_len` doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lpf_energy(
    body: *const LpfBody,
    f: *const f64,
    f_len: usize,
    p: f64,
    out: *mut LpfEnergy,
) -> LpfStatus {
    guard(|| {
        let r = energy::energy_report(&as_ref(body, "body")?.0, slice(f, f_len, "f")?, p)?;
        let e = LpfEnergy {
            j: r.j,
            dissipation: r.dissipation,
            vol: r.vol,
            ecc: r.ecc,
            origin_dist: r.origin_dist,
            residual: r.residual,
        };
        put(out, e, "out")
    })
}

/// Raw flow with default step control from `body` up to `t_end`. The final
/// body is returned even when the flow fails; `out_status` and `out_t`
/// report how far it got.
///
/// # Safety
/// `f` holds `f_len` doubles; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lpf_flow_run(
    body: *const LpfBody,
    f: *const f64,
    f_len: usize,
    p: f64,
    t_end: f64,
    out_body: *mut *mut LpfBody,
    out_status: *mut LpfFlowStatus,
    out_t: *mut f64,
) -> LpfStatus {
    guard(|| {
        let u = as_ref(body, "body")?.0.clone();
        if out_body.is_null() || out_status.is_null() || out_t.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = FlowConfig::new(p, slice(f, f_len, "f")?.to_vec(), t_end);
        let state = flow::run_raw(u, &cfg, t_end)?;
        let status = match state.status {
            FlowStatus::Running => LpfFlowStatus::Running,
            FlowStatus::FrozenAtA0 => LpfFlowStatus::FrozenAtA0,
            FlowStatus::StationaryInitial => LpfFlowStatus::StationaryInitial,
            FlowStatus::Converged => LpfFlowStatus::Converged,
            FlowStatus::Failed(_) => LpfFlowStatus::Failed,
        };
        out_status.write(status);
        out_t.write(state.t);
        out_body.write(Box::into_raw(Box::new(LpfBody(state.u))));
        Ok(())
    })
}

/// Minimum-volume enclosing ellipsoid of `n_points` points in `R^dim`
/// stored row-major. Writes the centre (`dim` values) and the shape matrix
/// `A` of `{x : (x-c)ᵀA(x-c) ≤ 1}` (`dim²` values, row-major).
///
/// # Safety
/// `points` holds `n_points · dim` doubles; the out buffers are sized as
/// above.
#[no_mangle]
pub unsafe extern "C" fn lpf_mvee(
    points: *const f64,
    n_points: usize,
    dim: usize,
    tol: f64,
    out_center: *mut f64,
    out_shape: *mut f64,
) -> LpfStatus {
    guard(|| {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()).into());
        }
        let pts: Vec<Vec<f64>> = slice(points, n_points * dim, "points")?.chunks(dim).map(<[f64]>::to_vec).collect();
        let e = john::mvee(&pts, tol)?;
        let center = slice_mut(out_center, dim, "out_center")?;
        let shape = slice_mut(out_shape, dim * dim, "out_shape")?;
        center.copy_from_slice(e.center());
        let a = e.shape_matrix();
        for i in 0..dim {
            for j in 0..dim {
                shape[i * dim + j] = a[(i, j)];
            }
        }
        Ok(())
    })
}

/// Complex from its JSON form `{"0": [[0], [1]], "1": [[0, 1]]}`.
///
/// # Safety
/// `json` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lpf_complex_from_json(json: *const c_char, out: *mut *mut LpfComplex) -> LpfStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::InvalidArgument("complex JSON is not UTF-8".into()))?;
        let x: SimplicialComplex =
            serde_json::from_str(text).map_err(|e| Error::InvalidComplex(e.to_string()))?;
        put(out, Box::into_raw(Box::new(LpfComplex(x))), "out")
    })
}

/// # Safety
/// `complex` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpf_complex_free(complex: *mut LpfComplex) {
    if !complex.is_null() {
        drop(Box::from_raw(complex));
    }
}

/// Betti numbers `b_0..b_dim`. `out_len` receives `dim + 1`; at most `cap`
/// values are written.
///
/// # Safety
/// `out` holds `cap` values; `out_len` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lpf_complex_betti(
    complex: *const LpfComplex,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> LpfStatus {
    guard(|| {
        let h = homology::homology(&as_ref(complex, "complex")?.0)?;
        let b = h.betti();
        put(out_len, b.len(), "out_len")?;
        let n = b.len().min(cap);
        slice_mut(out, n, "out")?.copy_from_slice(&b[..n]);
        Ok(())
    })
}

/// Homology profile as JSON `{"k": {"betti": b, "torsion": [..]}}`. Free the
/// string with [`lpf_string_free`].
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lpf_complex_homology_json(complex: *const LpfComplex, out: *mut *mut c_char) -> LpfStatus {
    guard(|| {
        let h = homology::homology(&as_ref(complex, "complex")?.0)?;
        let s = serde_json::to_string(&h).map_err(Error::from)?;
        put(out, CString::new(s).expect("JSON has no nul").into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
