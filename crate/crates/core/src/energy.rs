//! The functional `J(Ω) = vol(Ω) - (1/p) ∫ f u^p`, its dissipation along
//! the flow, the threshold `A₀`, and admissible-class bookkeeping.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::SupportField;
use crate::ellipsoid::{unit_ball_volume, Ellipsoid};
use crate::error::{invalid, Error, Result};
use crate::grid::SphereGrid;
use crate::john;

pub const CSV_HEADER: &str = "t,J,dissipation,vol,ecc,origin_dist,residual";

/// Snapshot of energy quantities for one body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "J")]
    pub j: f64,
    pub dissipation: f64,
    pub vol: f64,
    pub ecc: f64,
    pub origin_dist: f64,
    pub residual: f64,
}

impl EnergyReport {
    /// One CSV row with 17 significant digits per value.
    pub fn csv_row(&self, t: f64) -> String {
        [t, self.j, self.dissipation, self.vol, self.ecc, self.origin_dist, self.residual]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibleParams {
    pub bar_e: f64,
    pub bar_v: f64,
    pub bar_d: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
}

impl AdmissibleParams {
    pub const DEFAULT_BAR_E: f64 = 10.0;
    pub const DEFAULT_BAR_V: f64 = 0.05;
    pub const DEFAULT_BAR_D: f64 = 0.05;

    pub fn new(bar_e: f64, bar_v: f64, bar_d: f64, a0: f64) -> Result<Self> {
        let p = AdmissibleParams { bar_e, bar_v, bar_d, a0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bar_e > 1.0) {
            return invalid(format!("eccentricity cap {} must exceed 1", self.bar_e));
        }
        if !(self.bar_v > 0.0 && self.bar_v < 1.0) {
            return invalid(format!("volume floor {} must lie in (0, 1)", self.bar_v));
        }
        if !(self.bar_d > 0.0) {
            return invalid(format!("origin-distance floor {} must be positive", self.bar_d));
        }
        if !(self.a0 > 0.0) {
            return invalid(format!("threshold A0 {} must be positive", self.a0));
        }
        Ok(())
    }

    /// Default caps with `A₀` computed from `f` and `p`.
    pub fn defaults(grid: &SphereGrid, f: &[f64], p: f64) -> Result<Self> {
        AdmissibleParams::new(
            Self::DEFAULT_BAR_E,
            Self::DEFAULT_BAR_V,
            Self::DEFAULT_BAR_D,
            compute_a0(grid, f, p)?,
        )
    }
}

pub(crate) fn check_data(grid: &SphereGrid, f: &[f64], p: f64) -> Result<()> {
    grid.check_len(f)?;
    if p == 0.0 || !p.is_finite() {
        return invalid(format!("exponent p = {p} must be finite and nonzero"));
    }
    if let Some(v) = f.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return invalid(format!("f must be positive, found {v}"));
    }
    Ok(())
}

/// Super-critical range `p < -n-1`.
pub fn check_supercritical(n: usize, p: f64) -> Result<()> {
    if !(p < -(n as f64) - 1.0) {
        return invalid(format!("p = {p} is not super-critical: need p < {}", -(n as f64) - 1.0));
    }
    Ok(())
}

/// `J(Ω) = vol(Ω) - (1/p) ∫ f u^p`.
pub fn functional_j(u: &SupportField, f: &[f64], p: f64) -> Result<f64> {
    check_data(u.grid(), f, p)?;
    let fup: Vec<f64> = u.values().iter().zip(f).map(|(u, f)| f * u.powf(p)).collect();
    Ok(u.volume() - u.grid().integrate(&fup)? / p)
}

/// `∫ (det b - f u^{p-1})² u / det b`, the rate of change of `J` along the
/// flow.
pub fn dissipation(u: &SupportField, f: &[f64], p: f64) -> Result<f64> {
    check_data(u.grid(), f, p)?;
    let b = u.b();
    let (node, min_eig) = b.min_eigenvalue();
    if !(min_eig > 0.0) {
        return Err(Error::ConvexityLost { node, min_eig });
    }
    let integrand: Vec<f64> = b
        .entries
        .iter()
        .zip(u.values())
        .zip(f)
        .map(|((m, u), f)| {
            let det = m.det();
            let r = det - f * u.powf(p - 1.0);
            r * r * u / det
        })
        .collect();
    u.grid().integrate(&integrand)
}

/// Max-norm of `det(∇²u + uI) - f u^{p-1}`.
pub fn residual(u: &SupportField, f: &[f64], p: f64) -> Result<f64> {
    check_data(u.grid(), f, p)?;
    Ok(u.ma_det()
        .iter()
        .zip(u.values())
        .zip(f)
        .map(|((d, u), f)| (d - f * u.powf(p - 1.0)).abs())
        .fold(0.0, f64::max))
}

/// `A₀ = 2(-‖f‖_{L¹}/(p [2(n+1)]^p) + 2^{n+1} vol(B₁))`.
pub fn compute_a0(grid: &SphereGrid, f: &[f64], p: f64) -> Result<f64> {
    check_data(grid, f, p)?;
    let n = grid.dim();
    check_supercritical(n, p)?;
    let l1 = grid.integrate(&f.iter().map(|v| v.abs()).collect::<Vec<_>>())?;
    let nf = n as f64;
    let first = -l1 / (p * (2.0 * (nf + 1.0)).powf(p));
    let second = 2f64.powi(n as i32 + 1) * unit_ball_volume(n + 1);
    Ok(2.0 * (first + second))
}

pub fn energy_report(u: &SupportField, f: &[f64], p: f64) -> Result<EnergyReport> {
    let j = functional_j(u, f, p)?;
    let dissipation = dissipation(u, f, p)?;
    let ecc = john::min_ellipsoid_of_body(u, john::DEFAULT_TOL)?.eccentricity();
    Ok(EnergyReport {
        j,
        dissipation,
        vol: u.volume(),
        ecc,
        origin_dist: u.origin_distance(),
        residual: residual(u, f, p)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    VolumeFloor,
    VolumeCeiling,
    EccentricityCap,
    OriginOutside,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::VolumeFloor => "volume floor",
            Violation::VolumeCeiling => "volume ceiling",
            Violation::EccentricityCap => "eccentricity cap",
            Violation::OriginOutside => "origin outside",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admitted: bool,
    /// First violated constraint, checked in the order volume, eccentricity,
    /// origin.
    pub reason: Option<Violation>,
    /// Sum of relative constraint violations; zero when admitted.
    pub amount: f64,
}

/// Membership of `E` in the admissible ellipsoid class.
pub fn in_admissible_class(e: &Ellipsoid, params: &AdmissibleParams) -> Admissibility {
    let vol = e.volume();
    let ecc = e.eccentricity();
    let q0 = e.quadratic_form(&vec![0.0; e.ambient_dim()]);
    let mut reason = None;
    let mut amount = 0.0;
    let mut flag = |hit: bool, v: Violation, a: f64| {
        if hit {
            reason.get_or_insert(v);
            amount += a;
        }
    };
    flag(vol < params.bar_v, Violation::VolumeFloor, (params.bar_v - vol) / params.bar_v);
    flag(vol > 1.0 / params.bar_v, Violation::VolumeCeiling, vol * params.bar_v - 1.0);
    flag(ecc > params.bar_e, Violation::EccentricityCap, ecc / params.bar_e - 1.0);
    flag(q0 > 1.0, Violation::OriginOutside, q0 - 1.0);
    Admissibility { admitted: reason.is_none(), reason, amount }
}

/// `(parameter, J)` for each member of a body family.
pub fn property_p_scan(family: &[(f64, SupportField)], f: &[f64], p: f64) -> Result<Vec<(f64, f64)>> {
    family
        .par_iter()
        .map(|(s, u)| functional_j(u, f, p).map(|j| (*s, j)))
        .collect()
}

/// Least-squares slope of `log J` against `log parameter`.
pub fn loglog_slope(table: &[(f64, f64)]) -> Result<f64> {
    if table.len() < 2 || table.iter().any(|(s, j)| !(*s > 0.0 && *j > 0.0)) {
        return invalid("log-log fit needs at least two positive rows");
    }
    let pts: Vec<(f64, f64)> = table.iter().map(|(s, j)| (s.ln(), j.ln())).collect();
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
