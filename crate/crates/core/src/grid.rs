//! Discretizations of S¹ and S² with quadrature and covariant derivative
//! stencils in the orthonormal frame.
//!
//! * `n = 1`: uniform periodic angle grid, `x_i = (cos θ_i, sin θ_i)`,
//!   `θ_i = 2πi/N`, weights `2π/N`.
//! * `n = 2`: latitude–longitude grid with `N` colatitude rings at cell
//!   centres `θ_k = (k + ½)π/N` (poles excluded) and `2N` longitudes
//!   `φ_l = 2πl/(2N)`. Node index is `k * 2N + l`. Stencils that reach past a
//!   pole continue along the meridian great circle, i.e. `(θ_{-1}, φ)` is the
//!   node `(θ_0, φ + π)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest accepted resolution for either dimension.
pub const MIN_RESOLUTION: usize = 16;

// sixth-order centred first derivative
const D1_COEFFS: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    North,
    South,
}

/// Symmetric matrix in the orthonormal frame, stored as `[b11, b12, b22]`.
/// For `n = 1` only `b11` is meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatrix {
    pub dim: usize,
    pub m: [f64; 3],
}

impl FrameMatrix {
    pub fn scalar(v: f64) -> Self {
        FrameMatrix { dim: 1, m: [v, 0.0, 0.0] }
    }

    pub fn sym2(b11: f64, b12: f64, b22: f64) -> Self {
        FrameMatrix { dim: 2, m: [b11, b12, b22] }
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0],
            _ => self.m[0] * self.m[2] - self.m[1] * self.m[1],
        }
    }

    pub fn trace(&self) -> f64 {
        match self.dim {
            1 => self.m[0],
            _ => self.m[0] + self.m[2],
        }
    }

    /// Eigenvalues in ascending order; `n = 1` yields a single value.
    pub fn eigenvalues(&self) -> ([f64; 2], usize) {
        match self.dim {
            1 => ([self.m[0], self.m[0]], 1),
            _ => {
                let [a, b, c] = self.m;
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                ([mean - r, mean + r], 2)
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let (e, k) = self.eigenvalues();
        e[k - 1]
    }

    /// Matrix inverse; `None` when singular.
    pub fn inverse(&self) -> Option<FrameMatrix> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(match self.dim {
            1 => FrameMatrix::scalar(1.0 / d),
            _ => FrameMatrix::sym2(self.m[2] / d, -self.m[1] / d, self.m[0] / d),
        })
    }
}

/// Per-node field of frame matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub dim: usize,
    pub entries: Vec<FrameMatrix>,
}

impl FrameField {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> FrameMatrix {
        self.entries[i]
    }

    pub fn dets(&self) -> Vec<f64> {
        self.entries.iter().map(FrameMatrix::det).collect()
    }

    /// `(node, value)` of the smallest eigenvalue over the field.
    pub fn min_eigenvalue(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, m) in self.entries.iter().enumerate() {
            let e = m.min_eigenvalue();
            // NaN counts as the worst possible value
            if e.is_nan() {
                return (i, f64::NAN);
            }
            if e < best.1 {
                best = (i, e);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SphereGrid {
    dim: usize,
    resolution: usize,
    n_lon: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    // n=1: angle of every node; n=2: colatitude of every ring
    theta: Vec<f64>,
    h_theta: f64,
    h_phi: f64,
}

impl PartialEq for SphereGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.resolution == other.resolution
    }
}

impl SphereGrid {
    /// Build a grid on `S^dim`. For `dim = 1`, `resolution` is the node count;
    /// for `dim = 2` it is the number of colatitude rings (longitudes are
    /// `2 * resolution`).
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        match dim {
            1 => {
                if resolution < MIN_RESOLUTION {
                    return invalid(format!(
                        "resolution {resolution} below minimum {MIN_RESOLUTION} for n=1"
                    ));
                }
                let h = 2.0 * PI / resolution as f64;
                let theta: Vec<f64> = (0..resolution).map(|i| i as f64 * h).collect();
                let nodes = theta.iter().map(|&t| [t.cos(), t.sin(), 0.0]).collect();
                Ok(SphereGrid {
                    dim,
                    resolution,
                    n_lon: resolution,
                    nodes,
                    weights: vec![h; resolution],
                    theta,
                    h_theta: h,
                    h_phi: h,
                })
            }
            2 => {
                if resolution < MIN_RESOLUTION {
                    return invalid(format!(
                        "resolution {resolution} below minimum {MIN_RESOLUTION} per latitude band for n=2"
                    ));
                }
                let n_lat = resolution;
                let n_lon = 2 * resolution;
                let h_theta = PI / n_lat as f64;
                let h_phi = 2.0 * PI / n_lon as f64;
                let theta: Vec<f64> = (0..n_lat).map(|k| (k as f64 + 0.5) * h_theta).collect();
                let ring_w = fejer_weights(&theta);
                let mut nodes = Vec::with_capacity(n_lat * n_lon);
                let mut weights = Vec::with_capacity(n_lat * n_lon);
                for (k, &t) in theta.iter().enumerate() {
                    let (st, ct) = t.sin_cos();
                    for l in 0..n_lon {
                        let (sp, cp) = (l as f64 * h_phi).sin_cos();
                        nodes.push([st * cp, st * sp, ct]);
                        weights.push(ring_w[k] * h_phi);
                    }
                }
                Ok(SphereGrid { dim, resolution, n_lon, nodes, weights, theta, h_theta, h_phi })
            }
            _ => invalid(format!("sphere dimension must be 1 or 2, got {dim}")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Unit vector of node `i` in `R^{n+1}`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim + 1]
    }

    pub fn node3(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|S^n|`.
    pub fn area(&self) -> f64 {
        match self.dim {
            1 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Coarsest stencil spacing measured along the sphere.
    pub fn spacing(&self) -> f64 {
        self.h_theta.max(self.h_phi)
    }

    /// Finest arc-length spacing; drives explicit time-step limits.
    pub fn min_arc_spacing(&self) -> f64 {
        match self.dim {
            1 => self.h_theta,
            _ => self.h_theta.min(self.h_phi * self.theta[0].sin()),
        }
    }

    /// Largest eigenvalue scale `4/h²` of the second-difference stencil along
    /// each frame direction at node `i`.
    pub fn stencil_stiffness(&self, i: usize) -> [f64; 2] {
        let a = 4.0 / (self.h_theta * self.h_theta);
        match self.dim {
            1 => [a, 0.0],
            _ => {
                let s = self.theta[i / self.n_lon].sin() * self.h_phi;
                [a, 4.0 / (s * s)]
            }
        }
    }

    pub fn same_layout(&self, other: &SphereGrid) -> bool {
        self == other
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return invalid(format!(
                "field has {} samples, grid has {} nodes",
                field.len(),
                self.len()
            ));
        }
        Ok(())
    }

    /// Quadrature `Σ w_i f_i`.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        self.check_len(field)?;
        Ok(self.weights.iter().zip(field).map(|(w, f)| w * f).sum())
    }

    /// Evaluate a closure at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.node(i))).collect()
    }

    /// Average of the ring nearest to the requested pole (`n = 2` only).
    pub fn pole_value(&self, field: &[f64], pole: Pole) -> Result<f64> {
        self.check_len(field)?;
        if self.dim != 2 {
            return invalid("pole values exist only on the n=2 grid");
        }
        let k = match pole {
            Pole::North => 0,
            Pole::South => self.resolution - 1,
        };
        let ring = &field[k * self.n_lon..(k + 1) * self.n_lon];
        Ok(ring.iter().sum::<f64>() / self.n_lon as f64)
    }

    // Index of the node reached from ring `k`, longitude `l` by moving `dk`
    // rings and `dl` longitudes, continuing across the poles.
    fn offset(&self, k: usize, l: usize, dk: isize, dl: isize) -> usize {
        let n_lat = self.resolution as isize;
        let n_lon = self.n_lon as isize;
        let mut kk = k as isize + dk;
        let mut ll = l as isize + dl;
        if kk < 0 {
            kk = -1 - kk;
            ll += n_lon / 2;
        } else if kk >= n_lat {
            kk = 2 * n_lat - 1 - kk;
            ll += n_lon / 2;
        }
        (kk * n_lon + ll.rem_euclid(n_lon)) as usize
    }

    fn periodic(&self, i: usize, di: isize) -> usize {
        let n = self.resolution as isize;
        let j = i as isize + di;
        if j < 0 {
            (j + n) as usize
        } else if j >= n {
            (j - n) as usize
        } else {
            j as usize
        }
    }

    /// `b_ij = ∇²_ij u + u δ_ij` in the orthonormal frame, second-order
    /// centred differences.
    pub fn hessian_plus_identity(&self, u: &[f64]) -> Result<FrameField> {
        self.check_len(u)?;
        let entries = match self.dim {
            1 => {
                let inv_h2 = 1.0 / (self.h_theta * self.h_theta);
                (0..self.len())
                    .map(|i| {
                        let upp = (u[self.periodic(i, 1)] - 2.0 * u[i] + u[self.periodic(i, -1)]) * inv_h2;
                        FrameMatrix::scalar(upp + u[i])
                    })
                    .collect()
            }
            _ => {
                let (ht, hp) = (self.h_theta, self.h_phi);
                let mut out = Vec::with_capacity(self.len());
                for k in 0..self.resolution {
                    let (st, ct) = self.theta[k].sin_cos();
                    let cot = ct / st;
                    for l in 0..self.n_lon {
                        let i = k * self.n_lon + l;
                        let at = |dk, dl| u[self.offset(k, l, dk, dl)];
                        let c = u[i];
                        let u_tt = (at(1, 0) - 2.0 * c + at(-1, 0)) / (ht * ht);
                        let u_t = (at(1, 0) - at(-1, 0)) / (2.0 * ht);
                        let u_pp = (at(0, 1) - 2.0 * c + at(0, -1)) / (hp * hp);
                        let u_p = (at(0, 1) - at(0, -1)) / (2.0 * hp);
                        let u_tp = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * ht * hp);
                        let b11 = u_tt + c;
                        let b12 = (u_tp - cot * u_p) / st;
                        let b22 = u_pp / (st * st) + cot * u_t + c;
                        out.push(FrameMatrix::sym2(b11, b12, b22));
                    }
                }
                out
            }
        };
        Ok(FrameField { dim: self.dim, entries })
    }

    /// Tangential gradient `∇u` as an ambient vector at every node.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check_len(u)?;
        let out = match self.dim {
            1 => (0..self.len())
                .map(|i| {
                    let mut d = 0.0;
                    for (j, c) in D1_COEFFS.iter().enumerate() {
                        let s = j as isize + 1;
                        d += c * (u[self.periodic(i, s)] - u[self.periodic(i, -s)]);
                    }
                    d /= self.h_theta;
                    let t = self.theta[i];
                    [-t.sin() * d, t.cos() * d, 0.0]
                })
                .collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for k in 0..self.resolution {
                    let (st, ct) = self.theta[k].sin_cos();
                    for l in 0..self.n_lon {
                        let (mut u_t, mut u_p) = (0.0, 0.0);
                        for (j, c) in D1_COEFFS.iter().enumerate() {
                            let s = j as isize + 1;
                            u_t += c * (u[self.offset(k, l, s, 0)] - u[self.offset(k, l, -s, 0)]);
                            u_p += c * (u[self.offset(k, l, 0, s)] - u[self.offset(k, l, 0, -s)]);
                        }
                        u_t /= self.h_theta;
                        u_p /= self.h_phi * st;
                        let (sp, cp) = (l as f64 * self.h_phi).sin_cos();
                        let e_t = [ct * cp, ct * sp, -st];
                        let e_p = [-sp, cp, 0.0];
                        out.push([
                            u_t * e_t[0] + u_p * e_p[0],
                            u_t * e_t[1] + u_p * e_p[1],
                            u_t * e_t[2] + u_p * e_p[2],
                        ]);
                    }
                }
                out
            }
        };
        Ok(out)
    }
}

/// Fejér's first rule on `x = cos θ` for cell-centred colatitudes; the
/// weights integrate `∫_{-1}^{1} g(x) dx` exactly for polynomials of degree
/// below the ring count.
fn fejer_weights(theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    theta
        .iter()
        .map(|&t| {
            let mut s = 0.0;
            for j in 1..=n / 2 {
                let j = j as f64;
                s += (2.0 * j * t).cos() / (4.0 * j * j - 1.0);
            }
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}
