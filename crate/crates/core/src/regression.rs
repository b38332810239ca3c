//! Per-bin least-squares polynomial fits and RMSE evaluation.
//!
//! Each bin is fitted independently in bin-local coordinates `s` in `[-1, 1]`.
//! Count tables are reduced to per-cell sufficient statistics first: with every
//! day observed on the same cell grid, least squares over all `(day, cell)`
//! points equals weighted least squares over cell means, and the residual sum
//! of squares splits into a within-cell part plus the fitted part.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{horner, local_to_global, to_local, CellStat, CountTable, Partition, RateModel};
use crate::error::{Error, Result};
use crate::risk;

/// Hypothesis space of a per-bin fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "FitSpec")]
pub struct FitConfig {
    /// Polynomial degree; 0 constant, 1 linear, 3 for the piecewise-polynomial runs.
    pub degree: usize,
    /// Floor the fitted rate at zero when evaluating.
    pub clamp: bool,
    /// Distinct times a bin needs for the full-degree fit.
    pub min_points: usize,
}

/// Serialized form; `min_points` defaults to `degree + 1` and `clamp` to true.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSpec {
    degree: usize,
    #[serde(default = "yes")]
    clamp: bool,
    min_points: Option<usize>,
}

fn yes() -> bool {
    true
}

impl From<FitSpec> for FitConfig {
    fn from(s: FitSpec) -> Self {
        Self { min_points: s.min_points.unwrap_or(s.degree + 1), ..Self::new(s.degree, s.clamp) }
    }
}

impl FitConfig {
    pub fn new(degree: usize, clamp: bool) -> Self {
        Self { degree, clamp, min_points: degree + 1 }
    }

    pub fn linear() -> Self {
        Self::new(1, true)
    }

    pub fn cubic() -> Self {
        Self::new(3, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_points < self.degree + 1 {
            return Err(Error::domain(format!(
                "min_points {} is below degree + 1 = {}",
                self.min_points,
                self.degree + 1
            )));
        }
        Ok(())
    }

    /// Degree actually fitted when only `distinct` distinct times are available.
    fn effective_degree(&self, distinct: usize) -> usize {
        if distinct == 0 {
            return 0;
        }
        let cap = distinct - 1;
        if distinct >= self.min_points {
            self.degree.min(cap)
        } else {
            self.degree.saturating_sub(1).min(cap)
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::cubic()
    }
}

/// One fitted bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinFit {
    /// Bin bounds defining the local coordinate map.
    pub lo: f64,
    pub hi: f64,
    /// Local coefficients, zero-padded to the configured degree.
    pub coefficients: Vec<f64>,
    pub fitted_degree: usize,
    /// Training points in the bin, `m_k`.
    pub points: usize,
    /// Mean squared training error in the bin, `R_k` (0 when empty).
    pub risk: f64,
    pub(crate) clamp: bool,
}

impl BinFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        let v = horner(&self.coefficients, to_local(t, self.lo, self.hi));
        if self.clamp {
            v.max(0.0)
        } else {
            v
        }
    }

    /// Coefficients in raw time monomials, ascending powers.
    pub fn global_coefficients(&self) -> Vec<f64> {
        local_to_global(&self.coefficients, self.lo, self.hi)
    }
}

/// Weighted least squares of `values` on powers of `s` up to `degree`.
fn solve_weighted(s: &[f64], values: &[f64], weights: &[f64], degree: usize) -> Vec<f64> {
    let rows = s.len();
    let cols = degree + 1;
    let mut design = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for i in 0..rows {
        let w = weights[i].sqrt();
        let mut p = w;
        for j in 0..cols {
            design[(i, j)] = p;
            p *= s[i];
        }
        rhs[i] = w * values[i];
    }
    let qr = design.qr();
    let qtb = qr.q().transpose() * rhs;
    match qr.r().solve_upper_triangular(&qtb) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol.iter().copied().collect(),
        // numerically singular: fall back to the weighted mean
        _ => {
            let wsum: f64 = weights.iter().sum();
            let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
            let mut out = vec![0.0; cols];
            out[0] = mean;
            out
        }
    }
}

fn count_distinct(sorted_times: &[f64]) -> usize {
    let mut n = 0;
    let mut last = f64::NAN;
    for &t in sorted_times {
        if t != last {
            n += 1;
            last = t;
        }
    }
    n
}

/// Least-squares fit of raw `(time, count)` points. The local coordinate map
/// spans the range of the point times.
pub fn fit_bin(points: &[(f64, f64)], config: &FitConfig) -> BinFit {
    if points.is_empty() {
        return BinFit {
            lo: 0.0,
            hi: 1.0,
            coefficients: vec![0.0; config.degree + 1],
            fitted_degree: 0,
            points: 0,
            risk: 0.0,
            clamp: config.clamp,
        };
    }
    let mut times: Vec<f64> = points.iter().map(|p| p.0).collect();
    times.sort_by(f64::total_cmp);
    let (lo, hi) = (times[0], *times.last().unwrap());
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let degree = config.effective_degree(count_distinct(&times));
    let s: Vec<f64> = points.iter().map(|p| to_local(p.0, lo, hi)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut coefficients = solve_weighted(&s, &y, &vec![1.0; points.len()], degree);
    coefficients.resize(config.degree + 1, 0.0);
    let mut fit = BinFit { lo, hi, coefficients, fitted_degree: degree, points: points.len(), risk: 0.0, clamp: config.clamp };
    fit.risk = points.iter().map(|&(t, y)| (y - fit.evaluate(t)).powi(2)).sum::<f64>() / points.len() as f64;
    fit
}

/// Fits arbitrary intervals of a count table from its per-cell statistics.
#[derive(Debug, Clone)]
pub struct CellFitter {
    cells: Vec<CellStat>,
    times: Vec<f64>,
    config: FitConfig,
}

impl CellFitter {
    pub fn new(counts: &CountTable, config: FitConfig) -> Result<Self> {
        config.validate()?;
        let cells = counts.cell_stats();
        let times = cells.iter().map(|c| c.time).collect();
        Ok(Self { cells, times, config })
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Total number of training points.
    pub fn total_points(&self) -> usize {
        self.cells.iter().map(|c| c.days).sum()
    }

    /// Cells whose midpoint lies in `[lo, hi)`.
    fn cells_in(&self, lo: f64, hi: f64) -> &[CellStat] {
        let a = self.times.partition_point(|&t| t < lo);
        let b = self.times.partition_point(|&t| t < hi);
        &self.cells[a..b]
    }

    pub fn fit_interval(&self, lo: f64, hi: f64) -> BinFit {
        let cells: Vec<&CellStat> = self.cells_in(lo, hi).iter().filter(|c| c.days > 0).collect();
        let points: usize = cells.iter().map(|c| c.days).sum();
        let empty = BinFit {
            lo,
            hi,
            coefficients: vec![0.0; self.config.degree + 1],
            fitted_degree: 0,
            points: 0,
            risk: 0.0,
            clamp: self.config.clamp,
        };
        if points == 0 {
            return empty;
        }
        let degree = self.config.effective_degree(cells.len());
        let s: Vec<f64> = cells.iter().map(|c| to_local(c.time, lo, hi)).collect();
        let means: Vec<f64> = cells.iter().map(|c| c.mean).collect();
        let weights: Vec<f64> = cells.iter().map(|c| c.days as f64).collect();
        let mut coefficients = solve_weighted(&s, &means, &weights, degree);
        coefficients.resize(self.config.degree + 1, 0.0);
        let mut fit = BinFit { coefficients, fitted_degree: degree, points, ..empty };
        let sse: f64 = cells
            .iter()
            .map(|c| c.within + c.days as f64 * (c.mean - fit.evaluate(c.time)).powi(2))
            .sum();
        fit.risk = sse / points as f64;
        fit
    }

    /// Fits every bin of `partition` in parallel.
    pub fn fit_partition(&self, partition: &Partition) -> PartitionFit {
        let fits: Vec<BinFit> = partition.bins().collect::<Vec<_>>().par_iter().map(|&(a, b)| self.fit_interval(a, b)).collect();
        PartitionFit::from_fits(partition.clone(), fits, &self.config)
    }
}

/// A fitted partition: the rate model plus per-bin risks and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFit {
    pub model: RateModel,
    pub risks: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl PartitionFit {
    pub(crate) fn from_fits(partition: Partition, fits: Vec<BinFit>, config: &FitConfig) -> Self {
        let risks = fits.iter().map(|f| f.risk).collect();
        let sizes = fits.iter().map(|f| f.points).collect();
        let coefficients = fits.into_iter().map(|f| f.coefficients).collect();
        let model = RateModel::new(partition, config.degree, coefficients, config.clamp).expect("one fit per bin");
        Self { model, risks, sizes }
    }

    pub fn binned_risk(&self) -> Result<f64> {
        risk::binned_risk(&self.risks, &self.sizes)
    }

    pub fn penalized_risk(&self, gamma: f64) -> Result<f64> {
        risk::penalized_risk(&self.risks, &self.sizes, self.model.partition(), gamma)
    }
}

/// Assigns the table's cells to bins and fits each bin.
pub fn fit_partition(counts: &CountTable, partition: &Partition, config: &FitConfig) -> Result<PartitionFit> {
    counts.window().check_same(&partition.window())?;
    Ok(CellFitter::new(counts, *config)?.fit_partition(partition))
}

/// RMSE of `model` over every `(day, cell)` point of `counts`, evaluated at
/// cell midpoints.
pub fn evaluate(model: &RateModel, counts: &CountTable) -> Result<f64> {
    let mw = model.partition().window();
    let cw = counts.window();
    if cw.start() < mw.start() || cw.end() > mw.end() {
        return Err(Error::WindowMismatch {
            data_start: cw.start(),
            data_end: cw.end(),
            part_start: mw.start(),
            part_end: mw.end(),
        });
    }
    Ok(evaluate_cells(model, &counts.cell_stats()))
}

pub(crate) fn evaluate_cells(model: &RateModel, cells: &[CellStat]) -> f64 {
    let (mut sse, mut n) = (0.0, 0usize);
    for c in cells {
        sse += c.within + c.days as f64 * (c.mean - model.evaluate(c.time)).powi(2);
        n += c.days;
    }
    if n == 0 {
        0.0
    } else {
        (sse / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EventSeries, TimeWindow};
    use crate::risk::empirical_risk;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = fit_bin(&pts, &FitConfig::new(1, false));
        let g = fit.global_coefficients();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8, "{g:?}");
        assert!(fit.risk < 1e-20);
    }

    #[test]
    fn constant_fit_is_mean() {
        let pts = [(1.0, 2.0), (2.0, 7.0), (5.0, 3.0)];
        let fit = fit_bin(&pts, &FitConfig::new(0, false));
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scarce_points_reduce_degree() {
        let fit = fit_bin(&[(1.0, 2.0), (1.0, 4.0), (3.0, 1.0)], &FitConfig::new(3, false));
        assert_eq!(fit.fitted_degree, 1);
        assert_eq!(fit.coefficients.len(), 4);
        let empty = fit_bin(&[], &FitConfig::new(3, false));
        assert_eq!(empty.coefficients, vec![0.0; 4]);
    }

    #[test]
    fn cubic_fit_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|_| {
                let t = rng.random_range(100.0..200.0);
                (t, rng.random_range(0.0..20.0))
            })
            .collect();
        let fit = fit_bin(&pts, &FitConfig::new(3, false));
        for _ in 0..1000 {
            let mut other = fit.clone();
            for c in &mut other.coefficients {
                *c += rng.random_range(-0.5..0.5);
            }
            let r: f64 = pts.iter().map(|&(t, y)| (y - other.evaluate(t)).powi(2)).sum::<f64>() / 50.0;
            assert!(fit.risk <= r + 1e-12);
        }
    }

    #[test]
    fn residuals_orthogonal_to_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = (0..80).map(|i| (i as f64 * 30.0, rng.random_range(0.0..9.0))).collect();
        let fit = fit_bin(&pts, &FitConfig::new(3, false));
        for j in 0..4 {
            let (mut dot, mut norm_r, mut norm_b) = (0.0, 0.0, 0.0);
            for &(t, y) in &pts {
                let r = y - fit.evaluate(t);
                let b = to_local(t, fit.lo, fit.hi).powi(j);
                dot += r * b;
                norm_r += r * r;
                norm_b += b * b;
            }
            assert!(dot.abs() < 1e-8 * (norm_r.sqrt() * norm_b.sqrt()).max(1.0), "basis {j}: {dot}");
        }
    }

    fn small_table() -> CountTable {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = TimeWindow::new(0.0, 3600.0).unwrap();
        let days = (0..6)
            .map(|_| {
                let n = rng.random_range(20..60);
                (0..n).map(|_| rng.random_range(0.0..3600.0)).collect()
            })
            .collect();
        CountTable::from_events(&EventSeries::new(w, days).unwrap(), 60.0).unwrap()
    }

    #[test]
    fn cell_statistics_match_raw_points() {
        let table = small_table();
        let part = Partition::new(table.window(), vec![1000.0, 2500.0]).unwrap();
        let cfg = FitConfig::new(2, false);
        let pf = fit_partition(&table, &part, &cfg).unwrap();
        let pts = table.points();
        for (k, (a, b)) in part.bins().enumerate() {
            let inside: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 >= a && p.0 < b).collect();
            assert_eq!(inside.len(), pf.sizes[k]);
            let direct = empirical_risk(&pf.model, &inside).unwrap();
            assert!((direct - pf.risks[k]).abs() < 1e-9 * direct.max(1.0));
        }
        let rmse = evaluate(&pf.model, &table).unwrap();
        assert!((rmse * rmse - pf.binned_risk().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn single_bin_equals_global_fit() {
        let table = small_table();
        let cfg = FitConfig::new(1, false);
        let pf = fit_partition(&table, &Partition::trivial(table.window()), &cfg).unwrap();
        let global = fit_bin(&table.points(), &cfg);
        for t in [30.0, 1800.0, 3570.0] {
            assert!((pf.model.evaluate(t) - global.evaluate(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_bin_gets_zero_model() {
        let w = TimeWindow::new(0.0, 600.0).unwrap();
        let ev = EventSeries::new(w, vec![vec![10.0, 20.0, 500.0]]).unwrap();
        let table = CountTable::from_events(&ev, 60.0).unwrap();
        // the bin [200, 205) contains no cell midpoint
        let part = Partition::new(w, vec![200.0, 205.0]).unwrap();
        let pf = fit_partition(&table, &part, &FitConfig::linear()).unwrap();
        assert_eq!(pf.sizes[1], 0);
        assert_eq!(pf.risks[1], 0.0);
        assert_eq!(pf.model.evaluate(202.0), 0.0);
        assert_eq!(pf.sizes.iter().sum::<usize>(), table.num_points());
    }

    #[test]
    fn zero_model_on_zero_counts() {
        let w = TimeWindow::new(0.0, 600.0).unwrap();
        let table = CountTable::from_events(&EventSeries::new(w, vec![vec![], vec![]]).unwrap(), 60.0).unwrap();
        assert_eq!(evaluate(&RateModel::constant(w, 0.0), &table).unwrap(), 0.0);
    }

    #[test]
    fn degree_never_hurts_training_fit() {
        let table = small_table();
        let fitter: Vec<f64> = (0..5)
            .map(|d| CellFitter::new(&table, FitConfig::new(d, false)).unwrap().fit_interval(0.0, 3600.0).risk)
            .collect();
        for w in fitter.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{fitter:?}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = FitConfig { degree: 3, clamp: false, min_points: 2 };
        assert!(cfg.validate().is_err());
    }
}
