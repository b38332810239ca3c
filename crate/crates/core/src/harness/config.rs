use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{load_events, load_geo};
use crate::binning::{Method, SearchConfig};
use crate::domain::EventSeries;
use crate::error::{Error, Result};
use crate::regression::FitConfig;
use crate::simulator::{make_dataset, GenerationMode, PiecewiseLinearRate};
use crate::spatial::{demo_city, simulate_geo, GeoEventSeries, Hotspot, Metric};
use crate::stat_tests::DayPooling;

/// Where experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Dataset {
    /// Simulated days; a missing rate means the AF benchmark.
    Synthetic {
        #[serde(default)]
        rate: Option<PiecewiseLinearRate>,
        mode: GenerationMode,
    },
    /// An event CSV; the first `days_train` days train, the next
    /// `days_test` days test.
    Events { path: PathBuf },
    /// A geo CSV, split the same way.
    Geo { path: PathBuf },
    /// Simulated located events; missing hotspots mean [`demo_city`].
    SyntheticGeo {
        #[serde(default)]
        hotspots: Option<Vec<Hotspot>>,
        mode: GenerationMode,
    },
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::Synthetic { rate: None, mode: GenerationMode::af() }
    }
}

/// Everything an experiment run needs. Loaded from JSON; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance label written to result tables.
    pub name: String,
    pub dataset: Dataset,
    pub days_train: usize,
    pub days_test: usize,
    pub methods: Vec<Method>,
    pub fit: FitConfig,
    pub search: SearchConfig,
    /// Search settings used for Tikhonov instead of `search`. Unconditional
    /// splitting explores depth first, so a bin cap reached mid-tree leaves
    /// the right end of the window unsplit; a shallow depth limit keeps the
    /// tree balanced.
    pub tikhonov_search: Option<SearchConfig>,
    /// Cell width in seconds for count tables.
    pub resolution: f64,
    /// Relaxed-division floors, in minutes.
    pub eta_sweep: Vec<f64>,
    /// Penalty weights tried for Tikhonov on a validation split; empty uses
    /// `search.gamma` as is.
    pub gamma_grid: Vec<f64>,
    pub clusters: usize,
    pub metric: Metric,
    pub kmeans_iters: usize,
    pub out_dir: PathBuf,
    /// Global seed; copied into `search.seed`.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "AF".into(),
            dataset: Dataset::default(),
            days_train: 365,
            days_test: 31,
            methods: vec![Method::Equal(1), Method::Ivanov, Method::Tikhonov],
            fit: FitConfig::linear(),
            search: SearchConfig {
                max_restarts: 10,
                pooling: DayPooling::Pooled,
                max_test_days: Some(120),
                ..SearchConfig::default()
            },
            tikhonov_search: Some(SearchConfig {
                max_depth: 4,
                max_bins: 16,
                max_restarts: 200,
                pooling: DayPooling::Pooled,
                max_test_days: Some(120),
                ..SearchConfig::default()
            }),
            resolution: 300.0,
            eta_sweep: vec![600.0, 480.0, 120.0, 100.0, 80.0, 60.0, 50.0, 40.0, 30.0, 20.0, 10.0],
            gamma_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            clusters: 20,
            metric: Metric::Euclidean,
            kmeans_iters: 100,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// The overfitting sweep: relaxed division with cubic fits.
    pub fn exp1() -> Self {
        let base = Self::default();
        // fewer training days so the finest partitions overfit visibly
        Self {
            days_train: 60,
            methods: vec![Method::Relaxed],
            fit: FitConfig::cubic(),
            search: SearchConfig {
                max_depth: 12,
                max_bins: 1024,
                max_restarts: 3,
                max_retries: 3,
                max_test_days: Some(60),
                ..base.search.clone()
            },
            ..base
        }
    }

    /// Linear fits, unbinned and both regularized methods.
    pub fn exp2() -> Self {
        Self::default()
    }

    /// Per-area learning on synthetic located events.
    pub fn exp3() -> Self {
        let base = Self::default();
        Self {
            name: "city".into(),
            dataset: Dataset::SyntheticGeo { hotspots: None, mode: GenerationMode::Thinning { upper_bound: None } },
            days_train: 60,
            days_test: 14,
            methods: vec![Method::Ivanov],
            clusters: 5,
            search: SearchConfig { max_restarts: 3, ..base.search.clone() },
            ..base
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        cfg.search.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::domain("at least one method is required"));
        }
        if self.days_train == 0 || self.days_test == 0 {
            return Err(Error::domain("need at least one training and one test day"));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::domain(format!("resolution must be positive, got {}", self.resolution)));
        }
        if self.eta_sweep.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::domain("eta values must be positive"));
        }
        if self.gamma_grid.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::domain("gamma values must be nonnegative"));
        }
        self.fit.validate()?;
        for &m in &self.methods {
            self.search_for(m).validate(m)?;
        }
        Ok(())
    }

    /// Search settings with the global seed applied.
    pub fn search(&self) -> SearchConfig {
        SearchConfig { seed: self.seed, ..self.search.clone() }
    }

    /// Search settings for `method`, seed applied.
    pub fn search_for(&self, method: Method) -> SearchConfig {
        match (&self.tikhonov_search, method) {
            (Some(t), Method::Tikhonov) => SearchConfig { seed: self.seed, ..t.clone() },
            _ => self.search(),
        }
    }

    /// Disjoint train and test days.
    pub fn load_split(&self) -> Result<(EventSeries, EventSeries)> {
        match &self.dataset {
            Dataset::Synthetic { rate, mode } => {
                let af = PiecewiseLinearRate::af();
                make_dataset(rate.as_ref().unwrap_or(&af), self.days_train, self.days_test, *mode, self.seed)
            }
            Dataset::Events { path } => {
                let all = load_events(path)?;
                self.check_days(all.num_days())?;
                let (a, b) = (self.days_train, self.days_train + self.days_test);
                Ok((all.select_days(|d| d < a), all.select_days(|d| d >= a && d < b)))
            }
            Dataset::Geo { .. } | Dataset::SyntheticGeo { .. } => {
                let (train, test) = self.load_geo_split()?;
                Ok((train.temporal(), test.temporal()))
            }
        }
    }

    pub fn load_geo_split(&self) -> Result<(GeoEventSeries, GeoEventSeries)> {
        match &self.dataset {
            Dataset::Geo { path } => {
                let all = load_geo(path)?;
                self.check_days(all.num_days())?;
                let (a, b) = (self.days_train, self.days_train + self.days_test);
                Ok((all.select_days(|d| d < a), all.select_days(|d| d >= a && d < b)))
            }
            Dataset::SyntheticGeo { hotspots, mode } => {
                let city = demo_city();
                simulate_geo(hotspots.as_deref().unwrap_or(&city), self.days_train, self.days_test, *mode, self.seed)
            }
            _ => Err(Error::domain("this experiment needs a geo dataset")),
        }
    }

    fn check_days(&self, available: usize) -> Result<()> {
        if self.days_train + self.days_test > available {
            return Err(Error::domain(format!(
                "{} train + {} test days requested but the file has {available}",
                self.days_train, self.days_test
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_roundtrip() {
        for cfg in [ExperimentConfig::exp1(), ExperimentConfig::exp2(), ExperimentConfig::exp3()] {
            let text = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 4, "methods": ["ivanov", "equal:6"], "search": {"max_restarts": 2}}"#).unwrap();
        assert_eq!(cfg.methods, vec![Method::Ivanov, Method::Equal(6)]);
        assert_eq!(cfg.search.max_restarts, 2);
        assert_eq!(cfg.days_train, 365);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede": 4}"#).is_err());
    }

    #[test]
    fn rejects_empty_method_list() {
        let cfg = ExperimentConfig { methods: vec![], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
