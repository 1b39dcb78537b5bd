//! Point-process dissimilarity analysis of micro-earthquake spike trains.
//!
//! Two station logs are reduced to spike trains, compared over a sliding
//! window with the Victor-Purpura distance or the Cauchy-Schwarz divergence,
//! and tested against a causal dithering surrogate ensemble. Windows whose
//! dissimilarity exceeds the upper acceptance limit are reported as
//! anomalies and scored against a target earthquake catalog.
//!
//! The numerical core ([`spiketrain`], [`measures`], [`rates`],
//! [`surrogate`], [`pipeline`], [`synth`]) is generic over a [`Scalar`]
//! (`f32` or `f64`). The aliases at the crate root fix the scalar to `f64`,
//! which is what the catalog, evaluation and CLI layers use.

pub mod catalog;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod measures;
pub mod pipeline;
pub mod rates;
pub mod scalar;
pub mod spiketrain;
pub mod surrogate;
pub mod svg;
pub mod synth;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SpikeTrain = spiketrain::SpikeTrain<f64>;
pub type SpikeTrainF32 = spiketrain::SpikeTrain<f32>;
pub type BinnedCounts = spiketrain::BinnedCounts<f64>;
pub type VpParams = measures::VpParams<f64>;
pub type CsParams = measures::CsParams<f64>;
pub type RateProfile = rates::RateProfile<f64>;
pub type Correlogram = surrogate::Correlogram<f64>;
pub type AcceptanceBand = surrogate::AcceptanceBand<f64>;
pub type SurrogateParams = surrogate::SurrogateParams<f64>;
pub type Measure = pipeline::Measure<f64>;
pub type DissimilarityProfile = pipeline::DissimilarityProfile<f64>;
pub type Anomaly = pipeline::Anomaly<f64>;
pub type DetectConfig = pipeline::DetectConfig<f64>;
pub type Detection = pipeline::Detection<f64>;
