use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{ivanov_divide, relaxed_divide, tikhonov_divide, SearchInput};
use super::trace::{write_traces, SearchTrace};
use super::{Method, SearchConfig};
use crate::domain::{CellStat, CountTable, EventSeries, FitReport, Partition};
use crate::error::{Error, Result};
use crate::regression::{evaluate_cells, CellFitter, FitConfig};
use crate::rng::{substream, Stream};

/// Result of [`learn`]: the report for the selected partition plus the trace
/// of every restart (empty for equal-length binning).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub report: FitReport,
    pub traces: Vec<SearchTrace>,
    /// Restart that produced the selected partition.
    pub best_restart: Option<usize>,
}

/// Prepared training and test data for repeated runs over one split.
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    train: &'a EventSeries,
    pooled: Vec<f64>,
    fitter: CellFitter,
    test_cells: Vec<CellStat>,
}

impl<'a> Learner<'a> {
    /// Bins both series into cells of `resolution` seconds.
    pub fn new(train: &'a EventSeries, test: &EventSeries, fit: FitConfig, resolution: f64) -> Result<Self> {
        train.window().check_same(&test.window())?;
        let train_counts = CountTable::from_events(train, resolution)?;
        let test_counts = CountTable::from_events(test, resolution)?;
        if test_counts.num_points() == 0 {
            return Err(Error::Empty("the test set has no days"));
        }
        Ok(Self { train, pooled: train.pooled(), fitter: CellFitter::new(&train_counts, fit)?, test_cells: test_counts.cell_stats() })
    }

    pub fn fit_config(&self) -> &FitConfig {
        self.fitter.config()
    }

    /// Fits `partition` and scores it on both sets.
    pub fn report(&self, method: Method, partition: &Partition, search: &SearchConfig) -> Result<FitReport> {
        let fit = self.fitter.fit_partition(partition);
        let binned_risk = fit.binned_risk()?;
        let penalized_risk = if search.uses_penalty(method) { Some(fit.penalized_risk(search.gamma)?) } else { None };
        Ok(FitReport {
            method: method.to_string(),
            partition: partition.clone(),
            rmse_train: binned_risk.sqrt(),
            rmse_test: evaluate_cells(&fit.model, &self.test_cells),
            binned_risk,
            penalized_risk,
            bins: partition.num_bins(),
            seed: search.seed,
            bin_sizes: fit.sizes,
            model: fit.model,
        })
    }

    /// Runs `method`; randomized methods go through the restart loop.
    pub fn run(&self, method: Method, search: &SearchConfig) -> Result<LearnOutcome> {
        let window = self.train.window();
        if let Method::Equal(n) = method {
            let partition = Partition::equal(window, n)?;
            let report = self.report(method, &partition, search)?;
            return Ok(LearnOutcome { report, traces: Vec::new(), best_restart: None });
        }
        search.validate(method)?;
        let subset;
        let pooled = match search.max_test_days {
            Some(n) if n < self.train.num_days() => {
                subset = self.train.select_days(|i| i < n).pooled();
                &subset
            }
            _ => &self.pooled,
        };
        let input = SearchInput { events: self.train, pooled, fitter: &self.fitter };
        let divide = match method {
            Method::Ivanov => ivanov_divide,
            Method::Tikhonov => tikhonov_divide,
            Method::Relaxed => relaxed_divide,
            Method::Equal(_) => unreachable!(),
        };
        let traces = (0..search.max_restarts)
            .into_par_iter()
            .map(|r| divide(input, search, r))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (r, t) in traces.iter().enumerate() {
            if t.best_entry().objective < traces[best].best_entry().objective {
                best = r;
            }
        }
        if let Some(path) = &search.trace_path {
            write_traces(&traces, path)?;
        }
        let partition = traces[best].best_partition(window)?;
        let report = self.report(method, &partition, search)?;
        Ok(LearnOutcome { report, traces, best_restart: Some(best) })
    }
}

/// Learns a rate model from `train` and scores it on `test`.
pub fn learn(
    train: &EventSeries,
    test: &EventSeries,
    method: Method,
    fit: FitConfig,
    search: &SearchConfig,
    resolution: f64,
) -> Result<LearnOutcome> {
    Learner::new(train, test, fit, resolution)?.run(method, search)
}

/// A learned model against equal-length binning with the same bin count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub bins: usize,
    pub rmse_test: f64,
    pub rmse_test_equal: f64,
    /// Relative test-RMSE improvement over the baseline, in percent.
    pub rho: f64,
}

/// Scores the equal-length partition with as many bins as `report`.
pub fn compare_with_equal(learner: &Learner<'_>, report: &FitReport, search: &SearchConfig) -> Result<Comparison> {
    let equal = learner.run(Method::Equal(report.bins), search)?.report;
    let rho = if equal.rmse_test > 0.0 {
        (equal.rmse_test - report.rmse_test) * 100.0 / equal.rmse_test
    } else {
        0.0
    };
    Ok(Comparison { bins: report.bins, rmse_test: report.rmse_test, rmse_test_equal: equal.rmse_test, rho })
}

/// Picks the Tikhonov penalty weight from `grid` by validation RMSE on a
/// random fifth of the training days. Returns the chosen weight and the
/// validation RMSE of every grid value; ties go to the earlier grid entry.
pub fn tune_gamma(
    train: &EventSeries,
    fit: FitConfig,
    search: &SearchConfig,
    grid: &[f64],
    resolution: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::Empty("the gamma grid is empty"));
    }
    let n = train.num_days();
    if n < 2 {
        return Err(Error::domain("tuning gamma needs at least two training days"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(search.seed, Stream::Validation, &[]));
    let held = (n / 5).max(1);
    let mut is_held = vec![false; n];
    for &i in &order[..held] {
        is_held[i] = true;
    }
    let fit_days = train.select_days(|i| !is_held[i]);
    let val_days = train.select_days(|i| is_held[i]);
    let learner = Learner::new(&fit_days, &val_days, fit, resolution)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &gamma in grid {
        let cfg = SearchConfig { gamma, trace_path: None, ..search.clone() };
        scores.push((gamma, learner.run(Method::Tikhonov, &cfg)?.report.rmse_test));
    }
    let best = scores.iter().fold(scores[0], |b, &s| if s.1 < b.1 { s } else { b });
    Ok((best.0, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{make_dataset, GenerationMode, PiecewiseLinearRate};

    fn split(days: usize, seed: u64) -> (EventSeries, EventSeries) {
        make_dataset(&PiecewiseLinearRate::af(), days, days, GenerationMode::Thinning { upper_bound: None }, seed).unwrap()
    }

    fn quick() -> SearchConfig {
        SearchConfig { max_restarts: 3, max_retries: 4, max_depth: 4, max_test_days: Some(30), ..SearchConfig::default() }
    }

    #[test]
    fn equal_baseline_has_requested_bins() {
        let (train, test) = split(10, 1);
        let out = learn(&train, &test, Method::Equal(8), FitConfig::linear(), &quick(), 300.0).unwrap();
        assert_eq!(out.report.bins, 8);
        assert!(out.traces.is_empty());
        assert!((out.report.rmse_train - out.report.binned_risk.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn selected_partition_is_the_best_restart() {
        let (train, test) = split(30, 2);
        let out = learn(&train, &test, Method::Tikhonov, FitConfig::linear(), &quick(), 300.0).unwrap();
        assert_eq!(out.traces.len(), 3);
        let best = out.traces.iter().map(|t| t.best_entry().objective).fold(f64::INFINITY, f64::min);
        let chosen = &out.traces[out.best_restart.unwrap()];
        assert_eq!(chosen.best_entry().objective, best);
        assert_eq!(out.report.partition.knots(), chosen.best_entry().knots.as_slice());
        assert!((out.report.penalized_risk.unwrap() - best).abs() < 1e-9 * best.max(1.0));
    }

    #[test]
    fn learning_is_deterministic() {
        let (train, test) = split(20, 3);
        let a = learn(&train, &test, Method::Ivanov, FitConfig::linear(), &quick(), 300.0).unwrap();
        let b = learn(&train, &test, Method::Ivanov, FitConfig::linear(), &quick(), 300.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_tuning_picks_a_grid_value() {
        let (train, _) = split(20, 4);
        let grid = [1e-3, 1e-2];
        let (g, scores) = tune_gamma(&train, FitConfig::linear(), &quick(), &grid, 300.0).unwrap();
        assert!(grid.contains(&g));
        assert_eq!(scores.len(), 2);
        assert!(tune_gamma(&train, FitConfig::linear(), &quick(), &[], 300.0).is_err());
    }
}
