//! Impulsive optimal control via space-time reparameterization.
//!
//! Controls that may concentrate into impulses are represented as
//! Lipschitz space-time curves `(V, W)` on a pseudo-time axis. This crate
//! provides the curve metrics, the control types, the auxiliary dynamics and
//! cost, and a direct-transcription solver for the relaxed problem.

pub mod controls;
pub mod cost;
pub mod curves;
pub mod dynamics;
pub mod error;
pub mod par;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
