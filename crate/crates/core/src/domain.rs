//! Domain types shared by every module: the observation window, event
//! series, per-cell count tables, partitions and piecewise rate models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in one day; every window lives inside `[0, DAY_SECONDS]`.
pub const DAY_SECONDS: f64 = 86_400.0;

/// Something that maps a time of day to an expected rate.
pub trait RateFunction {
    fn rate(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> RateFunction for F {
    fn rate(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Half-open interval `[start, end)` of seconds-of-day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    start: f64,
    end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let bad = |reason| Err(Error::InvalidWindow { start, end, reason });
        if !start.is_finite() || !end.is_finite() {
            return bad("bounds must be finite");
        }
        if start < 0.0 || end > DAY_SECONDS {
            return bad("bounds must lie within one day [0, 86400]");
        }
        if end <= start {
            return bad("end must exceed start");
        }
        Ok(Self { start, end })
    }

    /// The whole day `[0, 86400)`.
    pub fn day() -> Self {
        Self { start: 0.0, end: DAY_SECONDS }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub(crate) fn check_same(&self, other: &TimeWindow) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::WindowMismatch {
                data_start: self.start,
                data_end: self.end,
                part_start: other.start,
                part_end: other.end,
            })
        }
    }
}

/// Arrival timestamps of repeated daily realizations over one window.
///
/// Day `i` of the series is `days()[i]`; each day's list is ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    window: TimeWindow,
    days: Vec<Vec<f64>>,
}

impl EventSeries {
    /// Validates the window constraint and sorts each day.
    pub fn new(window: TimeWindow, mut days: Vec<Vec<f64>>) -> Result<Self> {
        for day in &mut days {
            if let Some(&t) = day.iter().find(|t| !window.contains(**t)) {
                return Err(Error::OutOfWindow { time: t, start: window.start, end: window.end });
            }
            day.sort_by(f64::total_cmp);
        }
        Ok(Self { window, days })
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn days(&self) -> &[Vec<f64>] {
        &self.days
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    pub fn total_events(&self) -> usize {
        self.days.iter().map(Vec::len).sum()
    }

    /// Per-day slices of the arrivals falling in `[lo, hi)`.
    pub fn slices_in(&self, lo: f64, hi: f64) -> Vec<&[f64]> {
        self.days
            .iter()
            .map(|d| {
                let a = d.partition_point(|&t| t < lo);
                let b = d.partition_point(|&t| t < hi);
                &d[a..b]
            })
            .collect()
    }

    /// All arrivals of all days merged into one sorted list.
    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.days.iter().flatten().copied().collect();
        all.sort_unstable_by(f64::total_cmp);
        all
    }

    /// Keeps the days whose index satisfies `keep`, preserving order.
    pub fn select_days(&self, mut keep: impl FnMut(usize) -> bool) -> EventSeries {
        let days = self
            .days
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, d)| d.clone())
            .collect();
        EventSeries { window: self.window, days }
    }
}

/// Per-(day, cell) arrival counts. These are the regression training points:
/// the point for cell `c` of day `d` sits at the cell midpoint with value
/// `counts[d][c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    window: TimeWindow,
    resolution: f64,
    counts: Vec<Vec<u32>>,
}

impl CountTable {
    pub const DEFAULT_RESOLUTION: f64 = 60.0;

    pub fn from_events(events: &EventSeries, resolution: f64) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::domain(format!("cell resolution must be positive, got {resolution}")));
        }
        let window = events.window();
        let cells = (window.length() / resolution).ceil() as usize;
        let counts = events
            .days()
            .iter()
            .map(|day| {
                let mut row = vec![0u32; cells];
                for &t in day {
                    let c = (((t - window.start) / resolution) as usize).min(cells - 1);
                    row[c] += 1;
                }
                row
            })
            .collect();
        Ok(Self { window, resolution, counts })
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn num_days(&self) -> usize {
        self.counts.len()
    }

    pub fn num_cells(&self) -> usize {
        (self.window.length() / self.resolution).ceil() as usize
    }

    /// Midpoint of cell `c`; the last cell may be shorter than `resolution`.
    pub fn cell_mid(&self, c: usize) -> f64 {
        let lo = self.window.start + c as f64 * self.resolution;
        let hi = (lo + self.resolution).min(self.window.end);
        0.5 * (lo + hi)
    }

    pub fn cell_mids(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|c| self.cell_mid(c)).collect()
    }

    /// Total number of training points (days x cells).
    pub fn num_points(&self) -> usize {
        self.num_days() * self.num_cells()
    }

    /// Flattened `(time, count)` points, day-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mids = self.cell_mids();
        self.counts
            .iter()
            .flat_map(|row| row.iter().zip(&mids).map(|(&y, &t)| (t, y as f64)))
            .collect()
    }

    /// Per-cell sufficient statistics pooled over days.
    pub fn cell_stats(&self) -> Vec<CellStat> {
        let days = self.num_days();
        (0..self.num_cells())
            .map(|c| {
                let (mut sum, mut sq) = (0.0, 0.0);
                for row in &self.counts {
                    let y = row[c] as f64;
                    sum += y;
                    sq += y * y;
                }
                let n = days as f64;
                let mean = if days > 0 { sum / n } else { 0.0 };
                // sum of squared deviations from the cell mean
                let within = if days > 0 { (sq - sum * mean).max(0.0) } else { 0.0 };
                CellStat { time: self.cell_mid(c), days, mean, within }
            })
            .collect()
    }
}

/// Sufficient statistics of one cell across days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStat {
    pub time: f64,
    pub days: usize,
    pub mean: f64,
    /// Sum over days of `(y - mean)^2`.
    pub within: f64,
}

/// Ordered interior knots dividing a window into half-open bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    window: TimeWindow,
    knots: Vec<f64>,
}

impl Partition {
    pub fn new(window: TimeWindow, knots: Vec<f64>) -> Result<Self> {
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidPartition(format!(
                    "knots must be strictly ascending, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&k) = knots.iter().find(|&&k| !(k > window.start && k < window.end)) {
            return Err(Error::InvalidPartition(format!(
                "knot {k} is not strictly inside [{}, {})",
                window.start, window.end
            )));
        }
        Ok(Self { window, knots })
    }

    /// The single-bin partition.
    pub fn trivial(window: TimeWindow) -> Self {
        Self { window, knots: Vec::new() }
    }

    /// `n` bins of equal length.
    pub fn equal(window: TimeWindow, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("at least one bin is required".into()));
        }
        let w = window.length() / n as f64;
        let knots = (1..n).map(|k| window.start + k as f64 * w).collect();
        Self::new(window, knots)
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_bins(&self) -> usize {
        self.knots.len() + 1
    }

    /// Bounds `(b_{k-1}, b_k)` of bin `k` (zero-based).
    pub fn bin_bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { self.window.start } else { self.knots[k - 1] };
        let hi = if k == self.knots.len() { self.window.end } else { self.knots[k] };
        (lo, hi)
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.num_bins()).map(|k| self.bin_bounds(k))
    }

    /// Bin holding `t` under the half-open rule; `t == end` maps to the last bin.
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        if t < self.window.start || t > self.window.end {
            return None;
        }
        Some(self.knots.partition_point(|&k| k <= t))
    }

    /// Adds a knot; `p` must fall strictly inside an existing bin.
    pub fn with_knot(&self, p: f64) -> Result<Self> {
        let idx = self.knots.partition_point(|&k| k < p);
        if self.knots.get(idx) == Some(&p) {
            return Err(Error::InvalidPartition(format!("knot {p} already present")));
        }
        let mut knots = self.knots.clone();
        knots.insert(idx, p);
        Self::new(self.window, knots)
    }

    /// True when every knot of `coarse` is also a knot of `self`.
    pub fn refines(&self, coarse: &Partition) -> bool {
        self.window == coarse.window
            && coarse.knots.iter().all(|k| self.knots.binary_search_by(|x| x.total_cmp(k)).is_ok())
    }
}

/// Piecewise polynomial rate: one polynomial per bin, stored in bin-local
/// coordinates `s = (2t - a - b) / (b - a)` so that `s` spans `[-1, 1]` on
/// bin `[a, b)`. Coefficients are in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct RateModel {
    partition: Partition,
    degree: usize,
    coefficients: Vec<Vec<f64>>,
    clamp: bool,
}

/// On-disk form of a [`RateModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub window: [f64; 2],
    pub knots: Vec<f64>,
    pub degree: usize,
    pub coefficients: Vec<Vec<f64>>,
    pub clamp: bool,
}

impl TryFrom<ModelSpec> for RateModel {
    type Error = Error;

    fn try_from(m: ModelSpec) -> Result<Self> {
        let window = TimeWindow::new(m.window[0], m.window[1]).map_err(|e| Error::schema("window", e.to_string()))?;
        let partition = Partition::new(window, m.knots).map_err(|e| Error::schema("knots", e.to_string()))?;
        RateModel::new(partition, m.degree, m.coefficients, m.clamp)
    }
}

impl From<RateModel> for ModelSpec {
    fn from(m: RateModel) -> Self {
        let w = m.partition.window;
        ModelSpec {
            window: [w.start, w.end],
            knots: m.partition.knots,
            degree: m.degree,
            coefficients: m.coefficients,
            clamp: m.clamp,
        }
    }
}

impl RateModel {
    pub fn new(partition: Partition, degree: usize, coefficients: Vec<Vec<f64>>, clamp: bool) -> Result<Self> {
        if coefficients.len() != partition.num_bins() {
            return Err(Error::schema(
                "coefficients",
                format!("expected {} coefficient vectors, found {}", partition.num_bins(), coefficients.len()),
            ));
        }
        for (k, c) in coefficients.iter().enumerate() {
            if c.len() != degree + 1 {
                return Err(Error::schema(
                    format!("coefficients[{k}]"),
                    format!("degree {degree} needs {} coefficients, found {}", degree + 1, c.len()),
                ));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::schema(format!("coefficients[{k}]"), "non-finite coefficient"));
            }
        }
        Ok(Self { partition, degree, coefficients, clamp })
    }

    /// A model that is the same constant everywhere.
    pub fn constant(window: TimeWindow, value: f64) -> Self {
        Self { partition: Partition::trivial(window), degree: 0, coefficients: vec![vec![value]], clamp: false }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn clamp(&self) -> bool {
        self.clamp
    }

    /// Evaluates the model; times outside the window use the nearest bin's
    /// polynomial.
    pub fn evaluate(&self, t: f64) -> f64 {
        let w = self.partition.window();
        let k = self.partition.bin_of(t.clamp(w.start(), w.end())).unwrap_or(0);
        let (a, b) = self.partition.bin_bounds(k);
        let v = horner(&self.coefficients[k], to_local(t, a, b));
        if self.clamp {
            v.max(0.0)
        } else {
            v
        }
    }

    /// Bin `k`'s polynomial re-expressed in raw time-of-day monomials.
    pub fn global_coefficients(&self, k: usize) -> Vec<f64> {
        let (a, b) = self.partition.bin_bounds(k);
        local_to_global(&self.coefficients[k], a, b)
    }
}

impl RateFunction for RateModel {
    fn rate(&self, t: f64) -> f64 {
        self.evaluate(t)
    }
}

pub(crate) fn to_local(t: f64, a: f64, b: f64) -> f64 {
    (2.0 * t - a - b) / (b - a)
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Expands `sum c_j s^j` with `s = alpha t + beta` into powers of `t`.
pub(crate) fn local_to_global(local: &[f64], a: f64, b: f64) -> Vec<f64> {
    let alpha = 2.0 / (b - a);
    let beta = -(a + b) / (b - a);
    let mut out = vec![0.0; local.len()];
    // running power (alpha t + beta)^j as coefficients in t
    let mut power = vec![1.0];
    for &c in local {
        for (i, &p) in power.iter().enumerate() {
            out[i] += c * p;
        }
        let mut next = vec![0.0; power.len() + 1];
        for (i, &p) in power.iter().enumerate() {
            next[i] += beta * p;
            next[i + 1] += alpha * p;
        }
        power = next;
    }
    out
}

/// Everything recorded about one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub partition: Partition,
    pub model: RateModel,
    /// Training RMSE (events per cell).
    pub rmse_train: f64,
    /// Test RMSE (events per cell).
    pub rmse_test: f64,
    pub binned_risk: f64,
    pub penalized_risk: Option<f64>,
    pub bins: usize,
    pub seed: u64,
    /// Training points per bin.
    pub bin_sizes: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(a: f64, b: f64) -> TimeWindow {
        TimeWindow::new(a, b).unwrap()
    }

    #[test]
    fn window_rejects_bad_bounds() {
        assert!(TimeWindow::new(10.0, 10.0).is_err());
        assert!(TimeWindow::new(-1.0, 10.0).is_err());
        assert!(TimeWindow::new(0.0, 86_401.0).is_err());
        assert!(TimeWindow::new(0.0, f64::NAN).is_err());
        assert_eq!(TimeWindow::day().length(), DAY_SECONDS);
    }

    #[test]
    fn events_must_lie_in_window() {
        let w = win(0.0, 100.0);
        assert!(EventSeries::new(w, vec![vec![5.0, 100.0]]).is_err());
        let s = EventSeries::new(w, vec![vec![50.0, 5.0], vec![]]).unwrap();
        assert_eq!(s.days()[0], vec![5.0, 50.0]);
        assert_eq!(s.total_events(), 2);
    }

    #[test]
    fn count_table_conserves_events() {
        let w = win(0.0, 150.0);
        let s = EventSeries::new(w, vec![vec![0.0, 59.9, 60.0, 149.9], vec![120.0]]).unwrap();
        let t = CountTable::from_events(&s, 60.0).unwrap();
        assert_eq!(t.num_cells(), 3);
        assert_eq!(t.counts()[0], vec![2, 1, 1]);
        assert_eq!(t.counts()[1], vec![0, 0, 1]);
        // partial last cell [120, 150)
        assert_eq!(t.cell_mid(2), 135.0);
        for (d, row) in t.counts().iter().enumerate() {
            assert_eq!(row.iter().sum::<u32>() as usize, s.days()[d].len());
        }
    }

    #[test]
    fn cell_stats_match_direct_sums() {
        let w = win(0.0, 120.0);
        let s = EventSeries::new(w, vec![vec![1.0, 2.0, 70.0], vec![3.0], vec![]]).unwrap();
        let t = CountTable::from_events(&s, 60.0).unwrap();
        let st = t.cell_stats();
        assert_eq!(st[0].mean, 1.0);
        // deviations (2-1)^2 + (1-1)^2 + (0-1)^2
        assert!((st[0].within - 2.0).abs() < 1e-12);
        assert!((st[1].mean - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn partition_validation() {
        let w = win(0.0, 10.0);
        assert!(Partition::new(w, vec![5.0, 5.0]).is_err());
        assert!(Partition::new(w, vec![6.0, 5.0]).is_err());
        assert!(Partition::new(w, vec![0.0]).is_err());
        assert!(Partition::new(w, vec![10.0]).is_err());
        let p = Partition::new(w, vec![2.0, 5.0]).unwrap();
        assert_eq!(p.num_bins(), 3);
        assert_eq!(p.bins().collect::<Vec<_>>(), vec![(0.0, 2.0), (2.0, 5.0), (5.0, 10.0)]);
    }

    #[test]
    fn half_open_bin_rule() {
        let p = Partition::new(win(0.0, 10.0), vec![5.0]).unwrap();
        assert_eq!(p.bin_of(4.999), Some(0));
        assert_eq!(p.bin_of(5.0), Some(1));
        assert_eq!(p.bin_of(10.0), Some(1));
        assert_eq!(p.bin_of(10.5), None);
    }

    #[test]
    fn refinement_relation() {
        let w = win(0.0, 10.0);
        let coarse = Partition::new(w, vec![5.0]).unwrap();
        let fine = coarse.with_knot(2.5).unwrap();
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
        assert!(coarse.with_knot(5.0).is_err());
    }

    #[test]
    fn local_and_global_forms_agree() {
        let p = Partition::new(win(0.0, 86_400.0), vec![30_000.0, 33_600.0]).unwrap();
        let m = RateModel::new(p, 3, vec![vec![1.0, 0.0, 0.0, 0.0], vec![5.0, -2.0, 0.5, 0.25], vec![0.0; 4]], false)
            .unwrap();
        let g = m.global_coefficients(1);
        for t in [30_000.0, 31_234.5, 33_599.0] {
            let direct = horner(&g, t);
            let local = m.evaluate(t);
            assert!((direct - local).abs() <= 1e-10 * local.abs().max(1.0), "{direct} vs {local}");
        }
    }

    #[test]
    fn clamp_floors_at_zero() {
        let p = Partition::trivial(win(0.0, 10.0));
        let m = RateModel::new(p.clone(), 1, vec![vec![0.0, 1.0]], true).unwrap();
        assert_eq!(m.evaluate(1.0), 0.0);
        let m = RateModel::new(p, 1, vec![vec![0.0, 1.0]], false).unwrap();
        assert!(m.evaluate(1.0) < 0.0);
    }

    #[test]
    fn model_shape_checks() {
        let p = Partition::new(win(0.0, 10.0), vec![5.0]).unwrap();
        assert!(RateModel::new(p.clone(), 1, vec![vec![1.0, 2.0]], false).is_err());
        assert!(RateModel::new(p, 1, vec![vec![1.0, 2.0], vec![1.0]], false).is_err());
    }
}
