//! Bidirectional MMSE adaptive receivers for fast-fading DS-CDMA channels.
//!
//! The crate is split along the simulation pipeline:
//!
//! - [`fading`]: Clarke/Jakes Rayleigh fading generation and channel correlation statistics.
//! - [`cdma`]: the chip-rate DS-CDMA uplink observation model, modulation and detection.
//! - [`scenario`]: random packets (codes, fading, data, noise) drawn from the model.
//! - [`receivers`]: pair errors, adaptive mixing, bidirectional NLMS and CG, and the
//!   conventional baselines (NLMS, RLS, instantaneous MMSE).
//! - [`analysis`]: moment matrices and the K/G weight-error recursions for analytical SINR.
//! - [`harness`]: Monte Carlo experiments, configuration and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cdma;
pub mod error;
pub mod fading;
pub mod harness;
pub mod linalg;
pub mod receivers;
pub mod rng;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
