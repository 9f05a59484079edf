//! Solver and verification toolkit for fully nonlinear, even-order parabolic
//! systems on flat tori.
//!
//! The pipeline: represent the operator through jets ([`jet`], [`operator`]),
//! check strong ellipticity of its linearization ([`linop`]), solve the
//! frozen-coefficient linear systems spectrally ([`linear`]), and drive the
//! nonlinear Cauchy problem to a fixed point of the contraction map
//! ([`fixed_point`]), measuring every analytic ingredient along the way
//! ([`holder`], [`transport`], [`verify`]).
//!
//! All numerics are generic over the scalar type (`f32`/`f64`) through the
//! [`Scalar`] trait; `*64` aliases below pin the common double-precision
//! instantiations.


pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod holder;
pub mod jet;
pub mod linear;
pub mod linop;
pub mod multi_index;
pub mod operator;
pub mod problems;
pub mod scalar;
pub mod section;
pub mod spectral;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use grid::TorusGrid;
pub use holder::{HolderConfig, HolderExponent, HolderNormReport};
pub use multi_index::MultiIndex;
pub use scalar::{lit, Scalar};
pub use section::SpaceTimeSection;

/// Double-precision aliases for the main value types.
pub type Jet64 = jet::Jet<f64>;
pub type JetField64 = jet::JetField<f64>;
pub type NonlinearOperatorSpec64 = operator::NonlinearOperatorSpec<f64>;
pub type LinearOperatorSpec64 = linop::LinearOperatorSpec<f64>;
pub type EllipticityReport64 = linop::EllipticityReport<f64>;
pub type SpaceTimeSection64 = section::SpaceTimeSection<f64>;
pub type HolderNormReport64 = holder::HolderNormReport<f64>;

/// Single-precision aliases.
pub type Jet32 = jet::Jet<f32>;
pub type SpaceTimeSection32 = section::SpaceTimeSection<f32>;
pub type NonlinearOperatorSpec32 = operator::NonlinearOperatorSpec<f32>;
