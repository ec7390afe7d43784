pub mod blocks;
pub mod frame;
pub mod io;
pub mod linalg;

pub use blocks::{cross_section_osc_bound, split_inv_osc, InvariantBlock, OscBound, ReducedState};
pub use frame::{covariant_derivative, divergence, laplacian, second_covariant_derivative, FrameField, FrameTensor};
pub use linalg::{matrix_log, matrix_log_with, trace_log, LogMethod};
