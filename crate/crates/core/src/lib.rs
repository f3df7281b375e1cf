//! Randomized caching with multicast delivery in Poisson cellular networks.
//!
//! Base stations form a homogeneous Poisson point process; each station
//! independently caches a fixed-size subset of a file catalog drawn from a
//! common *caching distribution*, and users attach, per request, to the
//! nearest station holding the requested file. Stations multicast: all users
//! asking one station for the same file share a single transmission, and the
//! station splits its bandwidth over the distinct files requested of it.
//!
//! The crate provides three coordinated layers:
//!
//! * **Analysis** — exact expressions for the probability that a typical
//!   request meets its target rate, built from interference integrals
//!   ([`coverage`]), the station-load distribution, and mixtures over the
//!   caching distribution ([`analysis`]).
//! * **Optimization** — water-filling solutions of the asymptotic (noise-free)
//!   design problem, gradient projection for the exact objective, and a
//!   marginal-then-refine pipeline that scales to large catalogs
//!   ([`optimize`]).
//! * **Simulation** — a Monte Carlo engine that realizes the network on a
//!   finite window and measures success rates directly, for validating the
//!   analysis and comparing caching policies ([`sim`]).
//!
//! [`content`] holds the catalog-side vocabulary (popularity laws, cache
//! combinations, caching distributions and their marginals), [`policy`] the
//! samplable caching policies, and [`config`] the shared network parameters.

// Validation guards are written as `!(x > 0.0)` so that NaN fails them; the
// de-negated `x <= 0.0` the lint suggests would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod content;
pub mod coverage;
pub mod error;
pub mod optimize;
pub mod policy;
pub mod sim;
pub mod special;

mod lp;
mod quad;

pub use config::{NetworkConfig, Snr};
pub use error::{Error, Result};
