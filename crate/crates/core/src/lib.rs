//! Point counts, Frobenius traces and L-series for the double cover
//! `t² = xy(x²−1)(y²−1)(x²−y²+zxy)` of the plane.

pub mod arith;
pub mod counting;
pub mod extraction;
pub mod field;
pub mod gaussian;
pub mod lfunction;
pub mod moments;
pub mod numeric;
pub mod pipeline;
pub mod probes;
pub mod verification;

pub use gaussian::Gaussian;

/// Gaussian integers with machine-word parts.
pub type GaussianInt = Gaussian<i64>;
/// Gaussian integers with arbitrary-precision parts.
pub type BigGaussian = Gaussian<num_bigint::BigInt>;
