//! Validation of fixed-length time-series scenario sets.
//!
//! A [`ScenarioSet`] holds `S` scenarios of `T` samples each. The validators
//! compare a candidate set against a reference set with four methods:
//!
//! * [`density`]: Gaussian kernel density estimates of all samples and of the
//!   per-scenario means, on linear and log scales.
//! * [`autocorr`]: per-scenario Pearson autocorrelation and best-match search.
//! * [`spectral`]: periodogram and Welch PSD of the concatenated set, with
//!   periods longer than half a scenario flagged.
//! * [`mfdfa`]: sliding-window multifractal detrended fluctuation analysis
//!   and generalized Hurst exponents.
//!
//! [`ingest`] reads and cleans CSV input, and [`synthetic`] produces seeded
//! series with known statistics for testing.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocorr;
pub mod density;
mod error;
pub mod ingest;
pub mod mfdfa;
pub mod scenario;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use scenario::{Provenance, SampleCollection, ScenarioSet, TimeSeries};
