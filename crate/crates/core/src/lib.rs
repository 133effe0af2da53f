//! Measurement-based wide-area damping of inter-area oscillations.
//!
//! The crate covers the whole chain: a linear grid surrogate and its
//! measurement channel, identification of a MIMO transfer-function model
//! with one shared denominator, modal and residue analysis for control-loop
//! selection, and a DLQR + Kalman-filter damping controller evaluated in
//! closed loop.
//!
//! Linear-systems and controller code is generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64`, which is what the
//! identification and pipeline layers use.

pub mod error;
pub mod ident;
pub mod lti;
pub mod metrics;
pub mod modal;
pub mod pipeline;
pub mod plant;
pub mod scalar;
pub mod wadc;
pub mod window;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Polynomial = lti::Polynomial<f64>;
pub type RationalTf = lti::RationalTf<f64>;
pub type StateSpaceModel = lti::StateSpace<f64>;
pub type PoleResidueForm = lti::PoleResidueForm<f64>;
pub type DataWindow = window::DataWindow<f64>;
pub type Domain = lti::Domain<f64>;

pub type StateSpaceModelF32 = lti::StateSpace<f32>;
pub type DataWindowF32 = window::DataWindow<f32>;
