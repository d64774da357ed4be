//! Minimum-volume enclosing (John) ellipsoids.
//!
//! `mvee` lifts the points to `(p_i, 1)`, finds the minimum centred ellipsoid
//! of the lifted set by a log-barrier Newton method, and slices it with the
//! hyperplane of the lift. The returned `log det` is within `tol` of optimal,
//! so the volume is within a factor `e^{tol/2}` of the minimum.

use nalgebra::{DMatrix, DVector};

use crate::body::SupportField;
use crate::ellipsoid::Ellipsoid;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const MAX_ITERATIONS: usize = 100_000;

/// Minimum-volume ellipsoid containing `points` (all of equal dimension).
pub fn mvee(points: &[Vec<f64>], tol: f64) -> Result<Ellipsoid> {
    mvee_with_limit(points, tol, MAX_ITERATIONS)
}

pub fn mvee_with_limit(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Ellipsoid> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return invalid(format!("mvee tolerance {tol} outside (0, 1e-2]"));
    }
    let d = points.first().map(Vec::len).unwrap_or(0);
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return invalid("points must be non-empty and share one dimension");
    }
    if points.len() < d + 1 {
        return Err(Error::DegenerateInput(format!(
            "{} points cannot span R^{d} affinely",
            points.len()
        )));
    }
    check_affine_span(points)?;

    let lifted: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_iterator(d + 1, p.iter().copied().chain(std::iter::once(1.0))))
        .collect();
    let m = lifted_mvee(&lifted, tol, max_iter)?;

    // slice the lifted ellipsoid {y : yᵀMy ≤ 1} with the hyperplane y_{d+1} = 1
    let a = m.view((0, 0), (d, d)).clone_owned();
    let b = m.view((0, d), (d, 1)).clone_owned();
    let gamma = m[(d, d)];
    let a_inv = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateInput("lifted shape lost definiteness".into()))?
        .inverse();
    let center = -(&a_inv * &b);
    let r2 = 1.0 - gamma + (b.transpose() * &a_inv * &b)[(0, 0)];
    if !(r2 > 0.0) {
        return Err(Error::DegenerateInput("lifted ellipsoid misses the slicing hyperplane".into()));
    }
    let mut shape = a / r2;
    // rescale so the farthest point lies exactly on the boundary
    let worst = points
        .iter()
        .map(|p| {
            let y = DVector::from_column_slice(p) - &center;
            (y.transpose() * &shape * &y)[(0, 0)]
        })
        .fold(0.0, f64::max);
    shape /= worst;
    Ellipsoid::from_shape_matrix(center.iter().copied().collect(), &shape)
}

/// Minimizes `-log det M` subject to `qᵢᵀ M qᵢ ≤ 1` by a log-barrier path
/// with damped Newton centering. `M` is parametrized by its upper triangle,
/// which makes each constraint linear: `qᵀMq = φ(q)·v`.
fn lifted_mvee(q: &[DVector<f64>], tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    let k = q[0].len();
    let idx: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let nv = idx.len();
    let phi: Vec<DVector<f64>> = q
        .iter()
        .map(|q| {
            DVector::from_iterator(
                nv,
                idx.iter().map(|&(a, b)| if a == b { q[a] * q[a] } else { 2.0 * q[a] * q[b] }),
            )
        })
        .collect();
    let to_matrix = |v: &DVector<f64>| {
        let mut m = DMatrix::zeros(k, k);
        for (j, &(a, b)) in idx.iter().enumerate() {
            m[(a, b)] = v[j];
            m[(b, a)] = v[j];
        }
        m
    };
    let basis: Vec<DMatrix<f64>> = (0..nv)
        .map(|j| {
            let mut e = DVector::zeros(nv);
            e[j] = if idx[j].0 == idx[j].1 { 1.0 } else { 0.5 };
            to_matrix(&e)
        })
        .collect();
    // f(v) = -t log det M - Σ log(1 - φᵢ·v); None outside the domain
    let objective = |v: &DVector<f64>, t: f64| -> Option<f64> {
        let chol = to_matrix(v).cholesky()?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let mut barrier = 0.0;
        for p in &phi {
            let slack = 1.0 - p.dot(v);
            if !(slack > 0.0) {
                return None;
            }
            barrier -= slack.ln();
        }
        Some(-t * logdet + barrier)
    };

    let r2 = q.iter().map(|q| q.norm_squared()).fold(0.0, f64::max);
    let mut v = DVector::from_iterator(nv, idx.iter().map(|&(a, b)| if a == b { 0.5 / r2 } else { 0.0 }));
    let npts = q.len() as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    loop {
        // centering
        loop {
            if iterations >= max_iter {
                return Err(Error::IterationLimit(max_iter));
            }
            iterations += 1;
            let minv = to_matrix(&v)
                .cholesky()
                .ok_or_else(|| Error::DegenerateInput("lifted shape lost definiteness".into()))?
                .inverse();
            let mut grad = DVector::zeros(nv);
            let mut hess = DMatrix::zeros(nv, nv);
            for (j, e) in basis.iter().enumerate() {
                let me = &minv * e;
                grad[j] = -t * me.trace() * if idx[j].0 == idx[j].1 { 1.0 } else { 2.0 };
                for (l, f) in basis.iter().enumerate().skip(j) {
                    let w = (if idx[j].0 == idx[j].1 { 1.0 } else { 2.0 })
                        * (if idx[l].0 == idx[l].1 { 1.0 } else { 2.0 });
                    let h = t * w * (&me * &minv * f).trace();
                    hess[(j, l)] = h;
                    hess[(l, j)] = h;
                }
            }
            for p in &phi {
                let s = 1.0 / (1.0 - p.dot(&v));
                grad.axpy(s, p, 1.0);
                hess.ger(s * s, p, p, 1.0);
            }
            let step = hess
                .clone()
                .cholesky()
                .ok_or_else(|| Error::DegenerateInput("barrier Hessian is singular".into()))?
                .solve(&(-&grad));
            let decrement = -grad.dot(&step);
            let f0 = objective(&v, t).expect("iterate stays interior");
            // below this the decrease is lost in the rounding of f
            if decrement <= 1e-10_f64.max(1e-13 * f0.abs()) {
                break;
            }
            let mut alpha = 1.0;
            loop {
                let trial = &v + &step * alpha;
                if let Some(f1) = objective(&trial, t) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        v = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    // no further progress is representable at this t
                    break;
                }
            }
            if alpha < 1e-20 {
                break;
            }
        }
        // log det is within npts/t of optimal on the central path
        if npts / t <= tol {
            return Ok(to_matrix(&v));
        }
        t = (t * 20.0).min(npts / tol);
    }
}

fn check_affine_span(points: &[Vec<f64>]) -> Result<()> {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let y = DVector::from_iterator(d, p.iter().zip(&mean).map(|(a, b)| a - b));
        cov += &y * y.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-20 * max {
        return Err(Error::DegenerateInput("points do not span the ambient space affinely".into()));
    }
    Ok(())
}

/// John ellipsoid of a sampled body: `mvee` of its boundary points.
pub fn min_ellipsoid_of_body(u: &SupportField, tol: f64) -> Result<Ellipsoid> {
    mvee(&u.boundary_points(), tol)
}

/// Largest-over-smallest semi-axis.
pub fn eccentricity(e: &Ellipsoid) -> f64 {
    e.eccentricity()
}

/// Outcome of checking `(1/(n+1)) E ⊆ Ω` through support functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JohnCertificate {
    /// `min_x (u_Ω(x) - u_{E'}(x))`; negative means `E'` pokes out.
    pub margin: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Shrink `e` about its centre by `1/(n+1)` and compare support functions
/// with slack `10·tol`.
pub fn john_certificate(u: &SupportField, e: &Ellipsoid, tol: f64) -> Result<JohnCertificate> {
    let inner = e.scaled(1.0 / u.grid().ambient_dim() as f64)?;
    let margin = (0..u.grid().len())
        .map(|i| u.values()[i] - inner.support(u.grid().node(i)))
        .fold(f64::INFINITY, f64::min);
    let slack = 10.0 * tol;
    Ok(JohnCertificate { margin, slack, holds: margin >= -slack })
}
