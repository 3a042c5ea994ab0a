//! Federated, distributionally robust learning of RIS phase-configuration
//! classifiers.
//!
//! The crate simulates heterogeneous RIS deployments ([`channel`],
//! [`profile`]), labels channel draws with their rate-optimal codeword
//! ([`labeling`]), trains a small MLP ([`mlp`]) across workers with FGDRA,
//! DRFA or FedAvg ([`fed`]), checks the convergence guarantee empirically
//! ([`diagnostics`]) and drives experiments ([`harness`]).

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod diagnostics;
pub mod error;
pub mod fed;
pub mod harness;
pub mod labeling;
pub mod mlp;
pub mod profile;
pub mod rng;

pub use error::{Error, Result};
