//! Grid-based optimal and robust path planning when the target (or the
//! environment) is only identified at a later certainty time.
//!
//! Until that time only a probability distribution over outcomes is known,
//! and the planner chooses a waypoint (or a mixed strategy over waypoints)
//! to occupy when certainty arrives. The crate provides:
//!
//! - uniform-grid fields, masks and upwind stencils ([`grid`]);
//! - a Fast Marching solver for min-cost-to-target fields, reachable sets
//!   and descent trajectories ([`eikonal`]), with Gauss-Seidel sweeping
//!   counterparts for validation ([`sweep`]);
//! - backward time marching and the fixed / discretely distributed
//!   certainty-time planners ([`marching`]);
//! - the free-boundary solver for exponentially distributed certainty times
//!   and its motionless set ([`termination`]);
//! - robustness criteria over a target ensemble: worst-case, risk-sensitive,
//!   hard-constrained, Pareto fronts, chance-constrained mixed strategies,
//!   distributionally robust fields and the coarsening bound ([`robust`],
//!   [`lp`]);
//! - fully parameterized scenario builders and a JSON config format
//!   ([`scenario`]);
//! - marching-squares contour extraction for plot-ready output ([`contour`]).

pub mod contour;
mod descent;
pub mod eikonal;
pub mod error;
pub mod grid;
pub mod lp;
pub mod marching;
pub mod robust;
pub mod scenario;
pub mod sweep;
pub mod termination;

pub use error::{Error, Result};
pub use grid::{DomainMask, GridSpec, Point, ScalarField};
