//! Support-function calculus for convex bodies sampled on a [`SphereGrid`].

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{invalid, Error, Result};
use crate::grid::{FrameField, SphereGrid};

// below this many nodes the radial-function scan is not worth threading
const PAR_THRESHOLD: usize = 2048;

/// Samples of a support function `u` on a sphere grid; the body's state.
#[derive(Debug, Clone)]
pub struct SupportField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportFieldRepr {
    dim: usize,
    resolution: usize,
    values: Vec<f64>,
}

impl Serialize for SupportField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SupportFieldRepr {
            dim: self.grid.dim(),
            resolution: self.grid.resolution(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SupportField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SupportFieldRepr::deserialize(d)?;
        let grid = SphereGrid::new(r.dim, r.resolution).map_err(serde::de::Error::custom)?;
        SupportField::new(Arc::new(grid), r.values).map_err(serde::de::Error::custom)
    }
}

/// Curvature quantities derived from `b = ∇²u + uI`.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    /// Principal radii matrix `b_ij`.
    pub b: FrameField,
    /// Inverse field `h^ij`.
    pub h: FrameField,
    /// Gauss curvature `K = 1/det b`.
    pub gauss: Vec<f64>,
    /// Principal curvatures (eigenvalues of `h`), ascending per node.
    pub kappa: Vec<Vec<f64>>,
}

impl SupportField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("support value {v} is not finite"));
        }
        Ok(SupportField { grid, values })
    }

    /// Ball of radius `r` about the origin.
    pub fn constant(grid: Arc<SphereGrid>, r: f64) -> Self {
        let n = grid.len();
        SupportField { grid, values: vec![r; n] }
    }

    /// Exact samples of an ellipsoid's support function. With
    /// `require_origin_interior`, the result must be positive at every node.
    pub fn from_ellipsoid(e: &Ellipsoid, grid: Arc<SphereGrid>, require_origin_interior: bool) -> Result<Self> {
        if e.ambient_dim() != grid.ambient_dim() {
            return invalid(format!(
                "ellipsoid lives in R^{}, grid in R^{}",
                e.ambient_dim(),
                grid.ambient_dim()
            ));
        }
        let values = grid.sample(|x| e.support(x));
        if require_origin_interior {
            if let Some(i) = values.iter().position(|v| *v <= 0.0) {
                return invalid(format!("origin is not interior: u = {} at node {i}", values[i]));
            }
        }
        SupportField::new(grid, values)
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        SupportField::new(self.grid.clone(), values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `dist(O, ∂Ω) = min u`, exact for support functions.
    pub fn origin_distance(&self) -> f64 {
        self.min()
    }

    /// The frame matrix field `b_ij = ∇²u + u δ_ij`.
    pub fn b(&self) -> FrameField {
        self.grid.hessian_plus_identity(&self.values).expect("field length checked at construction")
    }

    /// `det(∇²u + uI)` per node. Non-positive values are reported, not
    /// rejected.
    pub fn ma_det(&self) -> Vec<f64> {
        self.b().dets()
    }

    /// Radial function at every grid direction via the discrete polar-dual
    /// formula `r(ξ) = min_{⟨x,ξ⟩>0} u(x)/⟨x,ξ⟩`.
    pub fn radial_function(&self) -> Vec<f64> {
        let g = &*self.grid;
        let u = &self.values;
        let one = |j: usize| {
            let xi = g.node3(j);
            let mut best = f64::INFINITY;
            for (i, ui) in u.iter().enumerate() {
                let x = g.node3(i);
                let c = x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2];
                if c > 0.0 {
                    let r = ui / c;
                    if r < best {
                        best = r;
                    }
                }
            }
            best
        };
        if g.len() >= PAR_THRESHOLD {
            (0..g.len()).into_par_iter().map(one).collect()
        } else {
            (0..g.len()).map(one).collect()
        }
    }

    /// `vol = (1/(n+1)) ∫ r^{n+1}`.
    pub fn volume(&self) -> f64 {
        let k = self.dim() as i32 + 1;
        let rk: Vec<f64> = self.radial_function().iter().map(|r| r.powi(k)).collect();
        self.grid.integrate(&rk).expect("same grid") / k as f64
    }

    /// Volume from the mixed-volume identity `(1/(n+1)) ∫ u det(∇²u + uI)`.
    /// O(N) and independent of the radial-function route.
    pub fn volume_mixed(&self) -> f64 {
        let k = self.dim() as f64 + 1.0;
        let ud: Vec<f64> = self.values.iter().zip(self.ma_det()).map(|(u, d)| u * d).collect();
        self.grid.integrate(&ud).expect("same grid") / k
    }

    /// Boundary points `z = u x + ∇u`, one per node.
    pub fn boundary_points(&self) -> Vec<Vec<f64>> {
        let grad = self.grid.gradient(&self.values).expect("field length checked at construction");
        let d = self.grid.ambient_dim();
        (0..self.grid.len())
            .map(|i| {
                let x = self.grid.node3(i);
                (0..d).map(|c| self.values[i] * x[c] + grad[i][c]).collect()
            })
            .collect()
    }

    /// Hausdorff distance through the support sup-norm identity.
    pub fn hausdorff_distance(&self, other: &SupportField) -> Result<f64> {
        if !self.grid.same_layout(&other.grid) {
            return invalid("support fields live on different grids");
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// p-area density `u^{1-p} det(∇²u + uI)`.
    pub fn p_area_density(&self, p: f64) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.ma_det())
            .map(|(u, d)| u.powf(1.0 - p) * d)
            .collect()
    }

    /// Fails with [`Error::ConvexityLost`] when `b` is not positive definite.
    pub fn curvature_data(&self) -> Result<CurvatureData> {
        let b = self.b();
        let (node, min_eig) = b.min_eigenvalue();
        if !(min_eig > 0.0) {
            return Err(Error::ConvexityLost { node, min_eig });
        }
        let h = FrameField {
            dim: b.dim,
            entries: b.entries.iter().map(|m| m.inverse().expect("positive definite")).collect(),
        };
        let gauss = b.entries.iter().map(|m| 1.0 / m.det()).collect();
        let kappa = h
            .entries
            .iter()
            .map(|m| {
                let (e, k) = m.eigenvalues();
                e[..k].to_vec()
            })
            .collect();
        Ok(CurvatureData { b, h, gauss, kappa })
    }
}

/// Exact support-function samples of `e` on `grid`.
pub fn support_of_ellipsoid(e: &Ellipsoid, grid: Arc<SphereGrid>) -> Result<SupportField> {
    SupportField::from_ellipsoid(e, grid, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, res: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(dim, res).unwrap())
    }

    fn ellipse21(res: usize) -> SupportField {
        let e = Ellipsoid::ellipse([0.0, 0.0], 2.0, 1.0, 0.0).unwrap();
        support_of_ellipsoid(&e, grid(1, res)).unwrap()
    }

    #[test]
    fn support_examples() {
        let u = support_of_ellipsoid(&Ellipsoid::unit_ball(2), grid(1, 64)).unwrap();
        assert!(u.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
        assert!((ellipse21(64).values()[0] - 2.0).abs() < 1e-15);
        let b = Ellipsoid::ball(vec![0.5, 0.0], 1.0).unwrap();
        let u = support_of_ellipsoid(&b, grid(1, 64)).unwrap();
        assert!((u.values()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn origin_interior_flag() {
        let b = Ellipsoid::ball(vec![2.0, 0.0], 1.0).unwrap();
        assert!(SupportField::from_ellipsoid(&b, grid(1, 32), true).is_err());
        assert!(SupportField::from_ellipsoid(&b, grid(1, 32), false).is_ok());
    }

    #[test]
    fn ma_det_examples() {
        let g = grid(2, 16);
        let u = SupportField::constant(g.clone(), 3.0);
        assert!(u.ma_det().iter().all(|d| (*d - 9.0).abs() < 1e-12));
        // θ = π/2 on a 512 grid is node 128; det = a²b²/u³ = 4
        let e = ellipse21(512);
        assert!((e.values()[128] - 1.0).abs() < 1e-14);
        assert!((e.ma_det()[128] - 4.0).abs() < 1e-3);
    }

    #[test]
    fn radial_examples() {
        let u = SupportField::constant(grid(1, 128), 2.5);
        assert!(u.radial_function().iter().all(|r| (*r - 2.5).abs() < 1e-14));
        let e = ellipse21(256);
        assert!((e.radial_function()[0] - 2.0).abs() < 1e-3);
        let c = 0.5;
        let b = Ellipsoid::ball(vec![c, 0.0], 1.0).unwrap();
        let u = support_of_ellipsoid(&b, grid(1, 256)).unwrap();
        let want = c + (1.0 - c * c + c * c).sqrt();
        assert!((u.radial_function()[0] - want).abs() < 1e-3);
    }

    #[test]
    fn volume_examples() {
        assert!((SupportField::constant(grid(1, 256), 1.0).volume() - PI).abs() < 1e-4);
        assert!((ellipse21(256).volume() - 2.0 * PI).abs() < 1e-3);
        let v = SupportField::constant(grid(2, 32), 1.0).volume();
        assert!((v - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn boundary_points_examples() {
        let u = SupportField::constant(grid(1, 32), 1.0);
        for (i, z) in u.boundary_points().iter().enumerate() {
            assert!((z[0] - u.grid().node(i)[0]).abs() < 1e-15);
            assert!((z[1] - u.grid().node(i)[1]).abs() < 1e-15);
        }
        let z = ellipse21(256).boundary_points();
        assert!((z[0][0] - 2.0).abs() < 1e-6 && z[0][1].abs() < 1e-6);

        let c = [0.3, -0.2, 0.1];
        let b = Ellipsoid::ball(c.to_vec(), 1.0).unwrap();
        for g in [grid(1, 256), grid(2, 64)] {
            let d = g.ambient_dim();
            let u = support_of_ellipsoid(&Ellipsoid::ball(c[..d].to_vec(), 1.0).unwrap(), g).unwrap();
            for z in u.boundary_points() {
                let r: f64 = z.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!((r - 1.0).abs() < 1e-6, "|z-c| = {r}");
            }
        }
        let _ = b;
    }

    #[test]
    fn hausdorff_examples() {
        let g = grid(1, 64);
        let a = SupportField::constant(g.clone(), 1.0);
        let b = SupportField::constant(g.clone(), 3.0);
        assert!((a.hausdorff_distance(&b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(a.hausdorff_distance(&a).unwrap(), 0.0);
        let c = support_of_ellipsoid(&Ellipsoid::ball(vec![0.3, 0.4], 1.0).unwrap(), g).unwrap();
        assert!((a.hausdorff_distance(&c).unwrap() - 0.5).abs() < 1e-3);
        let other = SupportField::constant(grid(1, 32), 1.0);
        assert!(a.hausdorff_distance(&other).is_err());
    }

    #[test]
    fn p_area_density_examples() {
        let u = SupportField::constant(grid(1, 64), 1.0);
        assert!(u.p_area_density(-3.0).iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let u = SupportField::constant(grid(1, 64), 2.0);
        assert!(u.p_area_density(-3.0).iter().all(|v| (*v - 32.0).abs() < 1e-12));
        let e = ellipse21(1024);
        assert!((e.p_area_density(-3.0)[0] - 8.0).abs() < 1e-2);
    }

    #[test]
    fn curvature_examples() {
        let cd = SupportField::constant(grid(2, 16), 1.0).curvature_data().unwrap();
        assert!(cd.gauss.iter().all(|k| (*k - 1.0).abs() < 1e-14));
        assert!(cd.kappa.iter().all(|k| k == &vec![1.0, 1.0]));
        let cd = SupportField::constant(grid(2, 16), 2.0).curvature_data().unwrap();
        assert!(cd.gauss.iter().all(|k| (*k - 0.25).abs() < 1e-14));
        assert!(cd.kappa.iter().all(|k| k.iter().all(|v| (*v - 0.5).abs() < 1e-14)));
        let cd = ellipse21(1024).curvature_data().unwrap();
        assert!((cd.kappa[0][0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn curvature_rejects_nonconvex() {
        let g = grid(1, 64);
        let mut v = vec![1.0; 64];
        v[10] = 1.2;
        let u = SupportField::new(g, v).unwrap();
        match u.curvature_data() {
            Err(Error::ConvexityLost { node, .. }) => assert_eq!(node, 10),
            other => panic!("expected convexity error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let e = ellipse21(64);
        let s = serde_json::to_string(&e).unwrap();
        let back: SupportField = serde_json::from_str(&s).unwrap();
        assert_eq!(back.values(), e.values());
        assert_eq!(back.grid().resolution(), 64);
        assert!(serde_json::from_str::<SupportField>(r#"{"dim":1,"resolution":16,"values":[1]}"#).is_err());
    }
}
