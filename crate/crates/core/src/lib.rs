//! Incomplete symmetric tensor decomposition by generating polynomials, and
//! method-of-moments learning of diagonal Gaussian mixtures built on it.
//!
//! The numerical core is generic over the real type ([`Real`]: `f32`,
//! `f64`) and, for tensors, over real or complex entries ([`Scalar`]).
//! Concrete double-precision aliases are exported below.

pub mod align;
pub mod decomp;
pub mod error;
pub mod gmm;
pub mod io;
pub mod numkit;
pub mod scalar;
pub mod simulate;
pub mod symtensor;

pub use error::{Error, Result};
pub use scalar::{Complex, Real, Scalar};

pub type C64 = Complex<f64>;

pub type SymTensor3F64 = symtensor::SymTensor3<f64>;
pub type OmegaTensorF64 = symtensor::OmegaTensor<f64>;
pub type OmegaTensorC64 = symtensor::OmegaTensor<C64>;
pub type GeneratingMatrixF64 = decomp::GeneratingMatrix<f64>;
pub type DecompositionF64 = decomp::Decomposition<f64>;
pub type GmmParamsF64 = gmm::GmmParams<f64>;
pub type MomentPairF64 = gmm::MomentPair<f64>;
