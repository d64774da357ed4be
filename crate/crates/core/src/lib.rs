//! Numerical laboratory for the super-critical L_p-Minkowski problem
//! `det(∇²u + uI) = f u^{p-1}` on `S^n`, `p < -n-1`.
//!
//! Bodies are represented by samples of their support function on a
//! [`grid::SphereGrid`]; [`flow`] evolves them by the Gauss curvature flow in
//! support-function form while [`energy`] monitors the functional and its
//! dissipation. [`john`] computes minimum enclosing ellipsoids, [`search`]
//! shoots for ellipsoidal initial data whose evolved John ellipsoid is the
//! unit ball, and [`homology`] checks the finite-complex topology identities
//! behind that search.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod body;
pub mod ellipsoid;
pub mod energy;
pub mod flow;
pub mod error;
pub mod grid;
pub mod harness;
pub mod homology;
pub mod john;
pub mod search;

pub use body::{support_of_ellipsoid, CurvatureData, SupportField};
pub use ellipsoid::Ellipsoid;
pub use energy::{AdmissibleParams, EnergyReport};
pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowState, FlowStatus};
pub use grid::SphereGrid;
