//! Deterministic-equivalent analysis of cooperative multi-cell regularized
//! zero-forcing (RZF) downlink precoding under limited CSIT feedback, with a
//! Monte-Carlo oracle for validation.
//!
//! The crate has two independent computation paths for the ergodic sum-rate:
//!
//! * [`det_sinr`]: the large-system deterministic equivalent, assembled from
//!   a coupled fixed point ([`rmt_core`]) over per-link trace functionals;
//! * [`montecarlo`]: direct simulation of correlated channels, imperfect
//!   CSIT, and the per-BS power-normalized RZF precoder.
//!
//! On top of those sit the regularization-parameter optimizer ([`regopt`]),
//! the feedback-bit allocation search ([`bitalloc`]), and a batch experiment
//! harness ([`harness`]) used by the CLI.
//!
//! All numerics are generic over the scalar type ([`scalar::Real`], `f32` or
//! `f64`); the `*64` aliases at the crate root are the concrete types the
//! shipped binaries use.

pub mod bitalloc;
pub mod det_sinr;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod montecarlo;
pub mod regopt;
pub mod rmt_core;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

/// Working-precision matrix.
pub type Mat64 = linalg::Mat<f64>;
/// Working-precision scenario.
pub type Scenario64 = scenario::Scenario<f64>;
/// Working-precision fixed-point solution.
pub type FixedPointSolution64 = rmt_core::FixedPointSolution<f64>;
/// Working-precision deterministic equivalent.
pub type DetEquivalent64 = det_sinr::DetEquivalent<f64>;
/// Working-precision alpha-optimization result.
pub type AlphaResult64 = regopt::AlphaResult<f64>;
