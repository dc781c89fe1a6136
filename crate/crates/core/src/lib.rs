//! Sparse multi-marginal optimal transport and free-support Wasserstein-2
//! barycenters.
//!
//! Given `N` discrete measures `μ¹,…,μᴺ` in `ℝᵈ` and weights `λ` on the open
//! simplex, the crate computes sparse feasible multi-marginal plans with two
//! approximation schemes built on an exact two-marginal solver:
//!
//! * [`mot::reference_algorithm`] couples every measure to `μ¹` and glues the
//!   couplings along the shared first marginal.
//! * [`mot::greedy_algorithm`] couples the running partial barycenter to each
//!   next measure in turn.
//!
//! Both return plans with at most `Σ n_i − N + 1` atoms; the barycenter
//! approximation is the mean pushforward [`plan::pushforward_mean`].
//!
//! [`oracle`] solves the full multi-marginal LP on small instances and
//! [`analysis`] evaluates costs, lower bounds and ratio constants.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod instances;
pub mod io;
pub mod measure;
pub mod mot;
pub mod oracle;
pub mod ot2;
pub mod pipeline;
pub mod plan;

pub use error::{Error, Result};
pub use measure::{DiscreteMeasure, SimplexWeights};
pub use plan::{Atom, Coupling, MultiMarginalPlan};
