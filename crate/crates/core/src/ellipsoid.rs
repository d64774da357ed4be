use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const FRAME_TOL: f64 = 1e-10;

/// Ellipsoid `{ζ + Σ y_i r_i q_i : |y| ≤ 1}` in `R^{n+1}`.
///
/// Semi-axes are kept ascending; `axes[i]` is the unit direction of
/// `semi_axes[i]`. Axis signs are normalised so the first non-negligible
/// component is positive, and equal semi-axes are ordered by lexicographic
/// axis direction, which makes extraction from a quadratic form reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidRepr", into = "EllipsoidRepr")]
pub struct Ellipsoid {
    center: Vec<f64>,
    axes: Vec<Vec<f64>>,
    semi_axes: Vec<f64>,
}

/// Wire form: `{center, axes (row-major, row i = axis i), semi_axes}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EllipsoidRepr {
    center: Vec<f64>,
    axes: Vec<f64>,
    semi_axes: Vec<f64>,
}

impl From<Ellipsoid> for EllipsoidRepr {
    fn from(e: Ellipsoid) -> Self {
        EllipsoidRepr {
            axes: e.axes.iter().flatten().copied().collect(),
            center: e.center,
            semi_axes: e.semi_axes,
        }
    }
}

impl TryFrom<EllipsoidRepr> for Ellipsoid {
    type Error = Error;

    fn try_from(r: EllipsoidRepr) -> Result<Self> {
        let d = r.center.len();
        if r.axes.len() != d * d {
            return invalid(format!("axes must hold {} entries, got {}", d * d, r.axes.len()));
        }
        // keep the stored order bit-for-bit
        let e = Ellipsoid {
            axes: r.axes.chunks(d).map(<[f64]>::to_vec).collect(),
            center: r.center,
            semi_axes: r.semi_axes,
        };
        e.validate()?;
        Ok(e)
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

impl Ellipsoid {
    /// Build from a centre, axis directions (rows) and semi-axis lengths in
    /// any order.
    pub fn new(center: Vec<f64>, axes: Vec<Vec<f64>>, semi_axes: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if axes.len() != d || semi_axes.len() != d || axes.iter().any(|a| a.len() != d) {
            return invalid("ellipsoid centre, axes and semi-axes disagree on dimension");
        }
        if let Some(r) = semi_axes.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return invalid(format!("semi-axis {r} must be positive"));
        }
        let mut pairs: Vec<(f64, Vec<f64>)> = semi_axes
            .into_iter()
            .zip(axes)
            .map(|(r, mut a)| {
                normalise_sign(&mut a);
                (r, a)
            })
            .collect();
        let scale = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
        pairs.sort_by(|a, b| {
            if (a.0 - b.0).abs() <= 1e-12 * scale {
                lex_cmp(&a.1, &b.1)
            } else {
                a.0.partial_cmp(&b.0).unwrap()
            }
        });
        let e = Ellipsoid {
            center,
            semi_axes: pairs.iter().map(|p| p.0).collect(),
            axes: pairs.into_iter().map(|p| p.1).collect(),
        };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        let d = self.center.len();
        if d == 0 {
            return invalid("ellipsoid must live in at least one dimension");
        }
        if self.axes.len() != d || self.semi_axes.len() != d {
            return invalid("ellipsoid centre, axes and semi-axes disagree on dimension");
        }
        for i in 0..d {
            if !(self.semi_axes[i] > 0.0) {
                return invalid(format!("semi-axis {} must be positive", self.semi_axes[i]));
            }
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(&self.axes[i], &self.axes[j]) - target).abs() > FRAME_TOL {
                    return invalid("ellipsoid axes are not orthonormal");
                }
            }
        }
        if self.semi_axes.windows(2).any(|w| w[0] > w[1]) {
            return invalid("semi-axes must be sorted ascending");
        }
        Ok(())
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        let axes = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Ellipsoid::new(center, axes, vec![radius; d])
    }

    pub fn unit_ball(ambient_dim: usize) -> Self {
        Ellipsoid::ball(vec![0.0; ambient_dim], 1.0).expect("unit ball is valid")
    }

    /// Ellipsoid with semi-axes along the coordinate directions.
    pub fn axis_aligned(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        let d = center.len();
        let axes = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Ellipsoid::new(center, axes, semi_axes)
    }

    /// Planar ellipse with semi-axis `a` along angle `angle` and `b`
    /// perpendicular to it.
    pub fn ellipse(center: [f64; 2], a: f64, b: f64, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Ellipsoid::new(center.to_vec(), vec![vec![c, s], vec![-s, c]], vec![a, b])
    }

    /// Ellipsoid from a centre and a symmetric positive definite shape matrix
    /// `A`, i.e. `{x : (x-ζ)ᵀ A (x-ζ) ≤ 1}`.
    pub fn from_shape_matrix(center: Vec<f64>, shape: &DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if shape.nrows() != d || shape.ncols() != d {
            return invalid("shape matrix dimension mismatch");
        }
        let sym = (shape + shape.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut semi = Vec::with_capacity(d);
        let mut axes = Vec::with_capacity(d);
        for i in 0..d {
            let lam = eig.eigenvalues[i];
            if !(lam > 0.0) || !lam.is_finite() {
                return Err(Error::DegenerateInput(format!(
                    "shape matrix is not positive definite (eigenvalue {lam:e})"
                )));
            }
            semi.push(1.0 / lam.sqrt());
            axes.push(eig.eigenvectors.column(i).iter().copied().collect());
        }
        Ellipsoid::new(center, axes, semi)
    }

    pub fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.ambient_dim()) * self.semi_axes.iter().product::<f64>()
    }

    /// Largest over smallest semi-axis.
    pub fn eccentricity(&self) -> f64 {
        self.semi_axes[self.semi_axes.len() - 1] / self.semi_axes[0]
    }

    /// `A = Σ q_i q_iᵀ / r_i²`.
    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let d = self.ambient_dim();
        let mut a = DMatrix::zeros(d, d);
        for (q, r) in self.axes.iter().zip(&self.semi_axes) {
            let v = DVector::from_column_slice(q);
            a += &v * v.transpose() / (r * r);
        }
        a
    }

    /// `(x-ζ)ᵀ A (x-ζ)`; at most 1 inside.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.axes
            .iter()
            .zip(&self.semi_axes)
            .map(|(q, r)| {
                let t = dot(&y, q) / r;
                t * t
            })
            .sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.quadratic_form(x) <= 1.0
    }

    /// Support function `⟨ζ,x⟩ + sqrt(Σ r_i² ⟨x,q_i⟩²)`.
    pub fn support(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .axes
            .iter()
            .zip(&self.semi_axes)
            .map(|(q, r)| {
                let t = r * dot(x, &q[..x.len()]);
                t * t
            })
            .sum();
        dot(&self.center[..x.len()], x) + s.sqrt()
    }

    /// Closed-form radial function `max{λ : λξ ∈ E}`; `None` when the origin
    /// is not inside.
    pub fn radial(&self, xi: &[f64]) -> Option<f64> {
        if !self.contains(&vec![0.0; self.ambient_dim()]) {
            return None;
        }
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (q, r) in self.axes.iter().zip(&self.semi_axes) {
            let xq = dot(xi, q) / r;
            let zq = dot(&self.center, q) / r;
            a += xq * xq;
            b += xq * zq;
            c += zq * zq;
        }
        Some((b + (b * b - a * (c - 1.0)).max(0.0).sqrt()) / a)
    }

    /// Boundary point `ζ + Σ y_i r_i q_i` for a unit vector `y`.
    pub fn boundary_point(&self, y: &[f64]) -> Vec<f64> {
        let mut p = self.center.clone();
        for ((q, r), yi) in self.axes.iter().zip(&self.semi_axes).zip(y) {
            for (pj, qj) in p.iter_mut().zip(q) {
                *pj += yi * r * qj;
            }
        }
        p
    }

    /// Homothety about the centre.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ellipsoid::new(
            self.center.clone(),
            self.axes.clone(),
            self.semi_axes.iter().map(|r| r * factor).collect(),
        )
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        Ellipsoid::new(
            self.center.iter().zip(shift).map(|(a, b)| a + b).collect(),
            self.axes.clone(),
            self.semi_axes.clone(),
        )
    }

    /// Image under `x ↦ M x + c`.
    pub fn affine_image(&self, m: &DMatrix<f64>, c: &[f64]) -> Result<Self> {
        let d = self.ambient_dim();
        let mut gen = DMatrix::zeros(d, d);
        for (j, (q, r)) in self.axes.iter().zip(&self.semi_axes).enumerate() {
            for i in 0..d {
                gen[(i, j)] = q[i] * r;
            }
        }
        let g = m * gen;
        let cov = &g * g.transpose();
        let shape = cov
            .try_inverse()
            .ok_or_else(|| Error::DegenerateInput("affine map is singular".into()))?;
        let center = m * DVector::from_column_slice(&self.center);
        let center = center.iter().zip(c).map(|(a, b)| a + b).collect();
        Ellipsoid::from_shape_matrix(center, &shape)
    }
}
