//! Regression-forest pruning toolkit.
//!
//! Trains bagged CART forests with random feature subspaces, prunes them by
//! greedy forward selection (SFS), modified backward selection (SBS'),
//! exhaustive best sub-forest search (BSF) or non-negative Lasso, merges the
//! surviving trees into one equivalent tree, and evaluates generalization
//! bounds for the pruned ensembles.

pub mod analysis;
pub mod bounds;
pub mod cart;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod matrix;
pub mod merge;
pub mod nnlasso;
pub mod pruning;
pub mod rng;

pub use error::{Error, Result};
