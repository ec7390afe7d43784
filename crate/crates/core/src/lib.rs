//! Numerical laboratory for the modified Ricci-deTurck flow on hyperbolic cusps.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: the cusp model, the moving-boundary domain `D`, local scales and weights;
//! - [`tensor`]: frame tensor fields, covariant derivatives, block decompositions;
//! - [`einstein`]: the Einstein operator `L` and its invariant reduction;
//! - [`flow`]: assembly and time integration of the flow;
//! - [`heat`]: one-dimensional heat kernels, singular convolutions, Duhamel quadrature;
//! - [`norms`]: weighted parabolic norms, the bootstrap monitor and weighted integrals;
//! - [`harness`]: experiment presets, configuration and verdict emission.

pub mod einstein;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod heat;
pub mod norms;
pub mod tensor;

pub use error::{CuspError, Result};
pub use geometry::{CuspModel, SpaceTimeDomain, TorusDerivative, WeightParams};
pub use tensor::{FrameField, FrameTensor, InvariantBlock, ReducedState};
