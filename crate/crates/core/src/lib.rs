//! Fast classification of imbalanced data with missing values.
//!
//! The pipeline: z-score normalization, regularized-EM imputation, and a
//! class-weighted RBF SVM trained inside a multilevel coarsen / train /
//! refine hierarchy built on approximate k-nearest-neighbor graphs, with
//! nested uniform-design model selection that maximizes G-mean.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod imputation;
pub mod kernel_solver;
mod linalg;
pub mod knn_graph;
pub mod metrics;
pub mod model_select;
pub mod multiclass;
pub mod multilevel;
mod seeds;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type SvmModel64 = kernel_solver::SvmModel<f64>;
pub type SvmModel32 = kernel_solver::SvmModel<f32>;
pub type SvmParams64 = kernel_solver::SvmParams<f64>;
pub type SvmParams32 = kernel_solver::SvmParams<f32>;
pub type MlConfig64 = multilevel::MlConfig<f64>;
pub type MlConfig32 = multilevel::MlConfig<f32>;
pub type OvaModel64 = multiclass::OvaModel<f64>;
pub type OvaModel32 = multiclass::OvaModel<f32>;
