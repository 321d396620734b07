//! Heat exchanged by a quantum system under sequences of projective
//! measurements separated by random waiting times.
//!
//! Numeric code is generic over [`scalar::Real`] (`f64` or `f32`); the aliases
//! below fix the scalar type.

pub mod disorder;
pub mod error;
pub mod heat;
pub mod numdiff;
pub mod quantum;
pub mod scalar;
pub mod tls;

pub use error::{Error, Result};

pub type HermitianOperatorF64 = quantum::HermitianOperator<f64>;
pub type MeasurementBasisF64 = quantum::MeasurementBasis<f64>;
pub type DensityMatrixF64 = quantum::DensityMatrix<f64>;
pub type DiscreteWaitingDistF64 = disorder::DiscreteWaitingDist<f64>;
pub type WaitingTimeModelF64 = disorder::WaitingTimeModel<f64>;
pub type ProtocolConfigF64 = heat::ProtocolConfig<f64>;
pub type HeatDistributionF64 = heat::HeatDistribution<f64>;
pub type TlsParamsF64 = tls::TlsParams<f64>;

pub type HermitianOperatorF32 = quantum::HermitianOperator<f32>;
pub type MeasurementBasisF32 = quantum::MeasurementBasis<f32>;
pub type DensityMatrixF32 = quantum::DensityMatrix<f32>;
pub type DiscreteWaitingDistF32 = disorder::DiscreteWaitingDist<f32>;
pub type WaitingTimeModelF32 = disorder::WaitingTimeModel<f32>;
pub type ProtocolConfigF32 = heat::ProtocolConfig<f32>;
pub type HeatDistributionF32 = heat::HeatDistribution<f32>;
pub type TlsParamsF32 = tls::TlsParams<f32>;

#[cfg(test)]
mod test_support;
