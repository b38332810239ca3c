//! Learning nonhomogeneous Poisson rate functions from repeated daily event
//! data with adaptive, test-driven binning.
//!
//! The crate covers the whole pipeline: simulating arrivals from a
//! piecewise-linear rate, testing the Poisson property of an interval,
//! per-bin polynomial regression, randomized recursive partition search
//! (Ivanov, Tikhonov and relaxed variants), k-means spatial areas, and the
//! experiment drivers used by the `nhpp` binary and the examples.

pub mod binning;
pub mod domain;
pub mod error;
pub mod harness;
pub mod regression;
pub mod risk;
pub mod rng;
pub mod simulator;
pub mod spatial;
pub mod stat_tests;

pub use binning::{learn, LearnOutcome, Learner, Method, SearchConfig};
pub use domain::{CountTable, EventSeries, FitReport, ModelSpec, Partition, RateFunction, RateModel, TimeWindow, DAY_SECONDS};
pub use error::{Error, Result};
pub use regression::FitConfig;
pub use simulator::{make_dataset, GenerationMode, PiecewiseLinearRate};
