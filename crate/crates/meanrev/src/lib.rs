//! Extraction and trading of sparse mean-reverting (or momentum) portfolios
//! from multivariate price panels.
//!
//! The pipeline: load a price panel ([`data`]), estimate a VAR(1) model and
//! covariances ([`estimate`], [`covsel`]), rank portfolios by predictability
//! through canonical decompositions ([`canonical`]), search for
//! small-cardinality portfolios via greedy or semidefinite-relaxation solvers
//! ([`sparse`]), then fit Ornstein-Uhlenbeck dynamics and run convergence
//! trading backtests ([`ou`]).
//!
//! All numeric code is generic over the scalar type through the [`Scalar`]
//! trait; `f64` is the default used by the CLI and the `*64` aliases below.

pub mod canonical;
pub mod covsel;
pub mod data;
pub mod error;
pub mod estimate;
pub mod geneig;
pub mod ou;
pub mod sdp;
pub mod sparse;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numeric kernels are generic over: `f32` or `f64`.
///
/// Bundles nalgebra's `RealField` (factorizations, eigen solvers) with
/// num-traits conversions so tolerances written as `f64` literals can be
/// injected into generic code via [`sc`].
pub trait Scalar: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

/// Convert an `f64` literal (tolerance, tuning constant) into the working scalar.
#[inline]
pub fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Round-trip a scalar through `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}

pub type TimePanel64 = data::TimePanel<f64>;
pub type LaggedPair64 = data::LaggedPair<f64>;
pub type VarModel64 = estimate::VarModel<f64>;
pub type PrecisionEstimate64 = covsel::PrecisionEstimate<f64>;
pub type CanonicalBasis64 = canonical::CanonicalBasis<f64>;
pub type SparseProblem64 = sparse::SparseProblem<f64>;
pub type SparsePortfolio64 = sparse::SparsePortfolio<f64>;
pub type OuParams64 = ou::OuParams<f64>;
pub type BacktestResult64 = ou::BacktestResult<f64>;

pub type TimePanel32 = data::TimePanel<f32>;
pub type VarModel32 = estimate::VarModel<f32>;
pub type SparsePortfolio32 = sparse::SparsePortfolio<f32>;
