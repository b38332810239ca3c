//! Adaptive data binning.
//!
//! Three randomized recursive dividers share one search engine:
//!
//! * **Ivanov**: a split is admitted when the arrivals on both halves pass a
//!   Poisson-property test. Bins that still fail the test are refined further.
//! * **Tikhonov**: every drawn split is admitted; the best partition is the
//!   one minimizing the binned risk plus a length-scaled penalty.
//! * **Relaxed**: like Ivanov, but intervals longer than `2 eta` are divided
//!   even when no tested split is found, and shorter ones are never divided.
//!   Used to sweep the bin count for overfitting curves.
//!
//! [`learn`] wraps a divider in the restart loop, keeps the global best
//! partition and reports train/test RMSE. Equal-length binning is the
//! baseline.

mod learn;
mod search;
mod trace;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stat_tests::{DayPooling, TestMethod};

pub use learn::{compare_with_equal, learn, tune_gamma, Comparison, LearnOutcome, Learner};
pub use search::{ivanov_divide, relaxed_divide, tikhonov_divide, SearchInput};
pub use trace::{write_traces, Admission, SearchTrace, SplitRecord, TraceEntry};

/// Which partitioning strategy [`learn`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Ivanov,
    Tikhonov,
    Relaxed,
    /// `n` equal-length bins; `Equal(1)` is the unbinned fit.
    Equal(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ivanov => f.write_str("ivanov"),
            Method::Tikhonov => f.write_str("tikhonov"),
            Method::Relaxed => f.write_str("relaxed"),
            Method::Equal(n) => write!(f, "equal:{n}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Unknown { kind: "binning method", name: s.to_string() };
        match s {
            "ivanov" | "dbm-i" => Ok(Method::Ivanov),
            "tikhonov" | "dbm-t" => Ok(Method::Tikhonov),
            "relaxed" => Ok(Method::Relaxed),
            "unbinned" => Ok(Method::Equal(1)),
            _ => {
                let n = s.strip_prefix("equal:").ok_or_else(unknown)?;
                match n.parse::<usize>() {
                    Ok(n) if n >= 1 => Ok(Method::Equal(n)),
                    _ => Err(unknown()),
                }
            }
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Variant of the Ivanov divider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IvanovMode {
    /// Bins passing the test are final; failing bins are divided, at a split
    /// whose halves both pass when one is found within the retry budget,
    /// otherwise at the best-scoring drawn split.
    #[default]
    RefineUntilPoisson,
    /// Only splits with two passing halves are admitted; an interval with no
    /// admissible split within the retry budget stays whole, and admitted
    /// halves keep being divided until the stop criteria.
    Literal,
}

/// What the Poisson-property test is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFrame {
    /// Raw arrival times: tests homogeneity within the interval.
    Raw,
    /// Arrivals mapped through the interval's fitted cumulative rate first,
    /// so the null is a Poisson process with the fitted rate. Equals `Raw`
    /// for degree-0 fits.
    #[default]
    FittedRate,
}

/// Which risk the restart loop minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterObjective {
    /// Penalized risk for Tikhonov, binned risk otherwise.
    #[default]
    Auto,
    Binned,
    Penalized,
}

/// Stop criteria and tuning knobs of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_depth: usize,
    pub max_bins: usize,
    pub max_restarts: usize,
    pub max_retries: usize,
    /// Tikhonov penalty weight.
    pub gamma: f64,
    /// Significance of the Poisson-property test.
    pub epsilon: f64,
    /// Relaxed-mode length floor in seconds: intervals of length `<= 2 eta`
    /// are not divided.
    pub eta_seconds: f64,
    pub seed: u64,
    pub test_method: TestMethod,
    pub pooling: DayPooling,
    pub test_frame: TestFrame,
    pub ivanov_mode: IvanovMode,
    pub outer_objective: OuterObjective,
    /// Days used by the interval test (the first ones); `None` uses all.
    /// With the pooled rule this caps the days superposed.
    pub max_test_days: Option<usize>,
    /// Write every trace as JSON lines here.
    pub trace_path: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            max_bins: 64,
            max_restarts: 50,
            max_retries: 20,
            gamma: 1e-2,
            epsilon: 0.05,
            eta_seconds: 3600.0,
            seed: 0,
            test_method: TestMethod::Log,
            pooling: DayPooling::PerDay,
            test_frame: TestFrame::FittedRate,
            ivanov_mode: IvanovMode::RefineUntilPoisson,
            outer_objective: OuterObjective::Auto,
            max_test_days: None,
            trace_path: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, method: Method) -> Result<()> {
        if self.max_depth < 1 || self.max_bins < 1 || self.max_restarts < 1 {
            return Err(Error::domain("max_depth, max_bins and max_restarts must be at least 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if method == Method::Relaxed && !(self.eta_seconds > 0.0) {
            return Err(Error::domain(format!("eta must be positive, got {}", self.eta_seconds)));
        }
        if let DayPooling::PerDayThreshold { min_pass_fraction } = self.pooling {
            if !(0.0..=1.0).contains(&min_pass_fraction) {
                return Err(Error::domain("min_pass_fraction must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub(crate) fn uses_penalty(&self, method: Method) -> bool {
        match self.outer_objective {
            OuterObjective::Auto => method == Method::Tikhonov,
            OuterObjective::Binned => false,
            OuterObjective::Penalized => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_roundtrip() {
        for m in [Method::Ivanov, Method::Tikhonov, Method::Relaxed, Method::Equal(7)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("unbinned".parse::<Method>().unwrap(), Method::Equal(1));
        assert!("equal:0".parse::<Method>().is_err());
        assert!("quantile".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SearchConfig::default();
        assert!(c.validate(Method::Ivanov).is_ok());
        c.eta_seconds = 0.0;
        assert!(c.validate(Method::Relaxed).is_err());
        assert!(c.validate(Method::Ivanov).is_ok());
        c.gamma = -1.0;
        assert!(c.validate(Method::Tikhonov).is_err());
    }
}
