#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

//! Partial optimal transport toolkit for partial domain adaptation.
//!
//! The crate is organised bottom-up:
//!
//! * [`measures`]: discrete measures, cost matrices, losses and `w = g ∘ f` hypotheses.
//! * [`pot`]: exact and entropic partial Wasserstein solvers plus a vertex-enumeration oracle.
//! * [`weights`]: transport-derived source/target weights, the TV correction and competing schemes.
//! * [`bounds`]: evaluators for the feature-based and joint-distribution bounds and the PAC-Bayes wrapper.
//! * [`warmpot`]: minibatch training with partial-OT alignment and transport-derived weights.
//! * [`synthbench`]: synthetic partial domain adaptation tasks, scheme comparison and sweeps.
//! * [`dataset`]: the CSV task format shared by the command line tools.

pub mod bounds;
pub mod dataset;
mod error;
pub mod measures;
pub mod pot;
pub mod synthbench;
pub mod warmpot;
pub mod weights;

pub use error::{Error, Result};
