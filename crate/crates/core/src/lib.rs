//! Numerical laboratory for sampled-data and event-triggered stabilization of
//! modal truncations of a 1-D reaction-diffusion system.
//!
//! The pipeline goes: discretize the spatial operator and extract its modal
//! system ([`spectral`]), stabilize the unstable block with a finite-rank gain
//! ([`feedback`]), pass the control through a certified sector nonlinearity
//! ([`nonlinearity`]), estimate semigroup/contraction certificates for the
//! sampled loop ([`certificates`]), simulate exactly ([`simulator`]), build a
//! coercive Lyapunov functional for the disturbed loop ([`lyapunov`]), and run
//! the switching-based event-triggered controller with its decay verdicts
//! ([`event_trigger`]). [`config`] + [`pipeline`] bind the stages into a
//! reproducible experiment runner; [`report`] owns the CSV/JSON artifact
//! formats.

// `!(x > 0.0)` guards are used on purpose: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod config;
pub mod event_trigger;
pub mod feedback;
pub mod linalg;
pub mod lyapunov;
pub mod nonlinearity;
pub mod pipeline;
pub mod report;
pub mod simulator;
pub mod spectral;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
