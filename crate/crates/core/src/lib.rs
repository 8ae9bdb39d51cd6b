//! Zero-false-positive classification for intrusion prevention.
//!
//! The [`swarm`] engine wraps a cost-minimising core classifier (CART by
//! default) and searches for the largest set of attack samples that can be
//! separated from *every* normal sample, so the resulting model never rejects
//! known-good traffic. [`rulegen`] compiles the learned tree into ordered,
//! non-overlapping REJECT rules for a default-allow firewall. [`zsvm`] and
//! [`removal`] are the cost-weighted SVM and greedy removal baselines.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cart;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod oracle;
pub mod removal;
pub mod rulegen;
pub mod swarm;
pub mod zsvm;

pub use error::{Error, Result};
