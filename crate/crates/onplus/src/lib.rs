//! Representation calculus of the free orthogonal quantum group `O_N^+`.
//!
//! The core is generic over a real scalar `T` (see [`scalar::Real`]); the
//! aliases below fix `T = f64`, which is what the experiments use.

pub mod error;
pub mod estimates;
pub mod fourier;
pub mod linalg;
pub mod qcore;
pub mod rep;
pub mod scalar;
pub mod weingarten;

pub use error::{Error, Result};
pub use scalar::Real;

pub type QParams = qcore::QParams<f64>;
pub type CMat = linalg::CMat<f64>;
pub type Mat = linalg::Mat<f64>;
pub type HVec = rep::HVec<f64>;
pub type CoupledBackend = rep::coupled::CoupledBackend<f64>;
pub type TensorBackend = rep::tensor::TensorBackend<f64>;
pub type FourierElement = fourier::FourierElement<f64>;
pub type Complex = num_complex::Complex<f64>;
