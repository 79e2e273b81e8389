//! Online recalibration of black-box probability forecasters.
//!
//! A [`Recalibrator`] wraps any forecaster: raw probabilities are bucketed
//! and each bucket runs an internal-regret-minimizing [`OnlineCalibrator`]
//! over the grid {i/N}. The output is calibrated against arbitrary (even
//! adaptive, adversarial) outcome sequences, and for proper losses it loses
//! at most O(1/N) accuracy relative to the raw forecasts.
//!
//! ```
//! use recal_core::Recalibrator;
//!
//! let mut recal = Recalibrator::with_resolution(10, 42).unwrap();
//! for t in 0..100u32 {
//!     let p = recal.observe_forecast(0.7).unwrap();
//!     assert!((0.0..=1.0).contains(&p));
//!     recal.observe_outcome((t % 3 != 0) as u8).unwrap();
//! }
//! ```
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod calibrator;
pub mod error;
pub mod forecasters;
pub mod losses;
pub mod metrics;
pub mod recalibrator;
pub mod rng;
pub mod streams;

pub use calibrator::{fixed_point, GridDistribution, GridPrediction, OnlineCalibrator};
pub use error::{Error, Result};
pub use forecasters::{
    noise_predict, FixedLogisticForecaster, LinearKind, OnlineLinearForecaster, TwoValueExpert,
};
pub use losses::{LossKind, LossSpec};
pub use metrics::{
    external_regret, internal_regret, CalibrationCurve, CurveBucket, MetricsAccumulator, SeriesRow,
};
pub use recalibrator::{bucket_index, Recalibrator};
pub use streams::{adversarial_outcome, bernoulli_stream, pattern_stream, StreamRecord};
