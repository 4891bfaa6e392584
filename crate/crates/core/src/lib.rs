//! Numerical block-spin renormalisation of correlation hierarchies.
//!
//! The crate coarse-grains synthetic truncated correlation functions with
//! smooth scaled kernels, extracts critical exponents, classifies scaling
//! limits and runs the quantum-limit experiments (commutator decay, KMS
//! identities, critical slowing down).
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the partition
//! algebra in [`truncation`] works over any commutative ring, including exact
//! rationals. The `*F64` aliases name the instantiations the CLI uses.

pub mod error;
pub mod qmc;
pub mod quadrature;
pub mod scalar;
pub mod smearing;
pub mod truncation;
pub mod corrmodels;
pub mod scaling;
pub mod exponents;
pub mod classifier;
pub mod quantumlim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CorrelationFamilyF64 = corrmodels::CorrelationFamily<f64>;
pub type SmearingKernelF64 = smearing::SmearingKernel<f64>;
pub type SpectralModelF64 = corrmodels::SpectralModel<f64>;
