//! Deterministic simulator for committee-mechanism federated learning (CMFL).
//!
//! The crate models a serverless federated round as a pipeline of roles:
//! activated *training clients* upload mini-batch gradients, a *committee*
//! scores each upload by its distance to the committee members' own
//! gradients, a selection strategy keeps the top- or bottom-scored `m`
//! uploads as the *aggregation set*, whose leader applies the weighted
//! global update, and the next committee is elected from the middle band of
//! the sorted aggregation set. Byzantine clients corrupt their uploads
//! (scaling / zeroing / sign-flip); classic robust aggregators (coordinate
//! median, trimmed mean, Krum, Multi-Krum) run under the same loop for
//! comparison.
//!
//! Everything is deterministic given a seed: every random decision draws
//! from its own derived stream (see [`rng`]), and all reductions run in a
//! fixed order. The [`diagnostics`] module measures the constants of the
//! mechanism's convergence theory (smoothness, gradient variance and norm
//! bounds, heterogeneity, aggregation-committee gap) and evaluates the
//! resulting error bound against the observed trajectory.

pub mod adversary;
pub mod aggregation;
pub mod cli;
pub mod committee;
pub mod dataset;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
