//! Sparse semidefinite programs solved through clique-tree conversion, a
//! dualized conic form whose normal matrix is block-tree structured, and a
//! homogeneous self-dual interior-point method.
//!
//! Everything numeric is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64` or `f32`.

pub mod chordal;
pub mod cone;
pub mod converter;
mod error;
pub mod generators;
pub mod ipm;
pub mod linalg;
pub mod normal;
pub mod oracle;
pub mod pipeline;
pub mod problem;
pub mod recovery;
pub mod scalar;
pub mod sdpa;
pub mod splitter;

pub use error::{Error, Result};
pub use pipeline::{Method, PipelineOptions};
pub use problem::{ObjectiveSense, Sense};
pub use scalar::Real;

pub type Problem = problem::SdpProblem<f64>;
pub type Problem32 = problem::SdpProblem<f32>;
pub type Solution = pipeline::PipelineSolution<f64>;
pub type Solution32 = pipeline::PipelineSolution<f32>;
pub type Converted = converter::ConvertedProblem<f64>;
pub type Conic = cone::ConicProblem<f64>;
pub type Matrix = linalg::Mat<f64>;
pub type SparseMatrix = linalg::SparseSymmetric<f64>;
