//! Continual-learning engine built around node-wise group sparsity.
//!
//! A small feed-forward network is trained on a sequence of tasks. Each hidden
//! node's incoming weights form a group; after every task a per-node importance
//! value is updated from mean ReLU activations. Unimportant nodes receive a
//! group-Lasso penalty (exact sparsification), important nodes a group drift
//! penalty toward their previous values (exact freezing). Both penalties are
//! applied through closed-form proximal maps interleaved with adaptive-moment
//! gradient steps, so zeros and freezes are bitwise-exact rather than
//! threshold-approximate.
//!
//! The crate is `no_std` (alloc required); all IO, file formats, and the
//! experiment CLI live in the companion `agscl` crate.

#![no_std]
// Negated float comparisons like `!(x > 0.0)` are deliberate: they reject NaN
// where the direct comparison would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod importance;
pub mod layout;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tasks;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
