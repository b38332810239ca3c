use rand::Rng;

use super::trace::{Admission, SearchTrace, SplitRecord, TraceEntry};
use super::{IvanovMode, Method, SearchConfig, TestFrame};
use crate::domain::{EventSeries, TimeWindow};
use crate::error::{Error, Result};
use crate::regression::{BinFit, CellFitter};
use crate::rng::{substream, Stream};
use crate::stat_tests::{interval_test, pooled_verdict, DayPooling, IntervalVerdict};

/// Grid segments used to integrate a fitted bin rate.
const FRAME_GRID: usize = 64;

/// Deepest tree the node numbering supports.
const MAX_TREE_DEPTH: usize = 60;

/// Training data seen by the dividers.
#[derive(Debug, Clone, Copy)]
pub struct SearchInput<'a> {
    pub events: &'a EventSeries,
    /// Sorted superposition of the days the pooled test rule uses, normally
    /// `events.pooled()`.
    pub pooled: &'a [f64],
    pub fitter: &'a CellFitter,
}

impl SearchInput<'_> {
    fn pooled_in(&self, lo: f64, hi: f64) -> &[f64] {
        let a = self.pooled.partition_point(|&t| t < lo);
        let b = self.pooled.partition_point(|&t| t < hi);
        &self.pooled[a..b]
    }

    fn window(&self) -> TimeWindow {
        self.events.window()
    }
}

/// Ivanov divider for one restart.
pub fn ivanov_divide(input: SearchInput<'_>, config: &SearchConfig, restart: usize) -> Result<SearchTrace> {
    run(input, config, Method::Ivanov, restart)
}

/// Tikhonov divider for one restart.
pub fn tikhonov_divide(input: SearchInput<'_>, config: &SearchConfig, restart: usize) -> Result<SearchTrace> {
    run(input, config, Method::Tikhonov, restart)
}

/// Relaxed divider for one restart.
pub fn relaxed_divide(input: SearchInput<'_>, config: &SearchConfig, restart: usize) -> Result<SearchTrace> {
    run(input, config, Method::Relaxed, restart)
}

fn run(input: SearchInput<'_>, config: &SearchConfig, method: Method, restart: usize) -> Result<SearchTrace> {
    config.validate(method)?;
    if config.max_depth > MAX_TREE_DEPTH {
        return Err(Error::domain(format!("max_depth is capped at {MAX_TREE_DEPTH}")));
    }
    let window = input.window();
    if input.fitter.total_points() == 0 {
        return Err(Error::Empty("the training table has no points"));
    }
    let root = input.fitter.fit_interval(window.start(), window.end());
    let mut s = Searcher {
        input,
        config,
        restart,
        penalize: config.uses_penalty(method),
        total: input.fitter.total_points() as f64,
        knots: Vec::new(),
        bins: vec![root],
        trace: SearchTrace { method: method.to_string(), restart, entries: Vec::new(), best: 0 },
        best_objective: f64::INFINITY,
    };
    let (binned, penalized) = s.risks(&s.bins, &s.knots);
    s.push(Vec::new(), binned, penalized, true, None);
    let (lo, hi) = (window.start(), window.end());
    match method {
        Method::Ivanov => s.ivanov(lo, hi, 0, 1, None)?,
        Method::Relaxed => s.relaxed(lo, hi, 0, 1)?,
        Method::Tikhonov => s.tikhonov(lo, hi, 0, 1),
        Method::Equal(_) => return Err(Error::domain("equal-length binning has no divider")),
    }
    Ok(s.trace)
}

struct Candidate {
    point: f64,
    attempt: usize,
    left: BinFit,
    right: BinFit,
    left_verdict: Option<IntervalVerdict>,
    right_verdict: Option<IntervalVerdict>,
    objective: f64,
}

impl Candidate {
    fn both_pass(&self) -> bool {
        matches!((&self.left_verdict, &self.right_verdict), (Some(l), Some(r)) if l.passed && r.passed)
    }
}

struct Searcher<'a> {
    input: SearchInput<'a>,
    config: &'a SearchConfig,
    restart: usize,
    penalize: bool,
    total: f64,
    knots: Vec<f64>,
    bins: Vec<BinFit>,
    trace: SearchTrace,
    best_objective: f64,
}

impl Searcher<'_> {
    fn can_split(&self, depth: usize) -> bool {
        depth < self.config.max_depth && self.bins.len() < self.config.max_bins
    }

    /// Binned and (when configured) penalized risk of a bin list.
    fn risks(&self, bins: &[BinFit], knots: &[f64]) -> (f64, Option<f64>) {
        let weighted: f64 = bins.iter().map(|b| b.points as f64 * b.risk).sum();
        let binned = weighted / self.total;
        if !self.penalize {
            return (binned, None);
        }
        let window = self.input.window();
        let mut penalty = 0.0;
        for (k, b) in bins.iter().enumerate().take(bins.len() - 1) {
            let lo = if k == 0 { window.start() } else { knots[k - 1] };
            penalty += b.points as f64 * b.risk / (knots[k] - lo);
        }
        (binned, Some(binned + self.config.gamma * penalty))
    }

    fn objective(&self, binned: f64, penalized: Option<f64>) -> f64 {
        penalized.unwrap_or(binned)
    }

    fn push(&mut self, knots: Vec<f64>, binned: f64, penalized: Option<f64>, accepted: bool, split: Option<SplitRecord>) {
        let objective = self.objective(binned, penalized);
        if accepted && objective < self.best_objective {
            self.best_objective = objective;
            self.trace.best = self.trace.entries.len();
        }
        self.trace.entries.push(TraceEntry {
            restart: self.restart,
            knots,
            binned_risk: binned,
            penalized_risk: penalized,
            objective,
            accepted,
            split,
        });
    }

    /// Index of the bin starting at `lo`.
    fn bin_index(&self, lo: f64) -> usize {
        self.knots.partition_point(|&k| k <= lo)
    }

    /// The partition obtained by splitting the bin at `lo` with `c`.
    fn spliced(&self, lo: f64, c: &Candidate) -> (Vec<f64>, Vec<BinFit>) {
        let k = self.bin_index(lo);
        let mut knots = self.knots.clone();
        knots.insert(k, c.point);
        let mut bins = self.bins.clone();
        bins.splice(k..=k, [c.left.clone(), c.right.clone()]);
        (knots, bins)
    }

    fn record(&self, c: &Candidate, lo: f64, hi: f64, depth: usize, admission: Option<Admission>) -> SplitRecord {
        SplitRecord {
            point: c.point,
            lower: lo,
            upper: hi,
            depth,
            attempt: c.attempt,
            admission,
            left: c.left_verdict,
            right: c.right_verdict,
        }
    }

    fn accept(&mut self, lo: f64, hi: f64, depth: usize, c: &Candidate, admission: Admission) {
        let (knots, bins) = self.spliced(lo, c);
        let (binned, penalized) = self.risks(&bins, &knots);
        let split = self.record(c, lo, hi, depth, Some(admission));
        self.knots = knots.clone();
        self.bins = bins;
        self.push(knots, binned, penalized, true, Some(split));
    }

    fn reject(&mut self, lo: f64, hi: f64, depth: usize, c: &Candidate) {
        let (knots, bins) = self.spliced(lo, c);
        let (binned, penalized) = self.risks(&bins, &knots);
        let split = self.record(c, lo, hi, depth, None);
        self.push(knots, binned, penalized, false, Some(split));
    }

    /// Draws a split point of `(lo, hi)`; the stream depends only on the
    /// restart, the tree node and the attempt.
    fn draw(&self, lo: f64, hi: f64, node: u64, attempt: usize) -> f64 {
        let mut rng = substream(self.config.seed, Stream::Split, &[self.restart as u64, node, attempt as u64]);
        loop {
            let p = lo + rng.random::<f64>() * (hi - lo);
            if p > lo && p < hi {
                return p;
            }
        }
    }

    fn candidate(&self, lo: f64, hi: f64, node: u64, attempt: usize, tested: bool) -> Result<Candidate> {
        let point = self.draw(lo, hi, node, attempt);
        let left = self.input.fitter.fit_interval(lo, point);
        let right = self.input.fitter.fit_interval(point, hi);
        // the right half is only tested when the left one passes
        let mut left_verdict = None;
        let mut right_verdict = None;
        if tested {
            let l = self.test(lo, point, &left)?;
            if l.passed {
                right_verdict = Some(self.test(point, hi, &right)?);
            }
            left_verdict = Some(l);
        }
        let mut c = Candidate { point, attempt, left, right, left_verdict, right_verdict, objective: 0.0 };
        let (knots, bins) = self.spliced(lo, &c);
        let (binned, penalized) = self.risks(&bins, &knots);
        c.objective = self.objective(binned, penalized);
        Ok(c)
    }

    fn test(&self, lo: f64, hi: f64, fit: &BinFit) -> Result<IntervalVerdict> {
        let c = self.config;
        let frame = match c.test_frame {
            TestFrame::Raw => None,
            TestFrame::FittedRate => FittedFrame::new(fit, lo, hi),
        };
        if c.pooling == DayPooling::Pooled {
            let all = self.input.pooled_in(lo, hi);
            let days = c.max_test_days.map_or(self.input.events.num_days(), |n| n.min(self.input.events.num_days()));
            return match frame {
                Some(f) => {
                    let mapped: Vec<f64> = all.iter().map(|&t| f.map(t)).collect();
                    pooled_verdict(&mapped, days, lo, hi, c.epsilon, c.test_method)
                }
                None => pooled_verdict(all, days, lo, hi, c.epsilon, c.test_method),
            };
        }
        let mut days = self.input.events.slices_in(lo, hi);
        if let Some(n) = c.max_test_days {
            days.truncate(n);
        }
        match frame {
            Some(f) => {
                let mapped: Vec<Vec<f64>> = days.iter().map(|d| d.iter().map(|&t| f.map(t)).collect()).collect();
                let refs: Vec<&[f64]> = mapped.iter().map(Vec::as_slice).collect();
                interval_test(&refs, lo, hi, c.epsilon, c.test_method, c.pooling)
            }
            None => interval_test(&days, lo, hi, c.epsilon, c.test_method, c.pooling),
        }
    }

    fn fit_of(&self, lo: f64) -> &BinFit {
        &self.bins[self.bin_index(lo)]
    }

    fn ivanov(&mut self, lo: f64, hi: f64, depth: usize, node: u64, verdict: Option<bool>) -> Result<()> {
        if !self.can_split(depth) {
            return Ok(());
        }
        let refine = self.config.ivanov_mode == IvanovMode::RefineUntilPoisson;
        if refine {
            let passes = match verdict {
                Some(v) => v,
                None => self.test(lo, hi, self.fit_of(lo))?.passed,
            };
            if passes {
                return Ok(());
            }
        }
        let mut best: Option<Candidate> = None;
        for attempt in 0..=self.config.max_retries {
            let c = self.candidate(lo, hi, node, attempt, true)?;
            if c.both_pass() {
                self.accept(lo, hi, depth, &c, Admission::Tested);
                return self.ivanov_children(lo, hi, depth, node, &c);
            }
            self.reject(lo, hi, depth, &c);
            if best.as_ref().is_none_or(|b| c.objective < b.objective) {
                best = Some(c);
            }
        }
        match best {
            Some(c) if refine => {
                self.accept(lo, hi, depth, &c, Admission::Refined);
                self.ivanov_children(lo, hi, depth, node, &c)
            }
            _ => Ok(()),
        }
    }

    fn ivanov_children(&mut self, lo: f64, hi: f64, depth: usize, node: u64, c: &Candidate) -> Result<()> {
        let lv = c.left_verdict.map(|v| v.passed);
        let rv = c.right_verdict.map(|v| v.passed);
        let rv = if lv == Some(false) { None } else { rv };
        self.ivanov(lo, c.point, depth + 1, 2 * node, lv)?;
        self.ivanov(c.point, hi, depth + 1, 2 * node + 1, rv)
    }

    fn relaxed(&mut self, lo: f64, hi: f64, depth: usize, node: u64) -> Result<()> {
        if !self.can_split(depth) || hi - lo <= 2.0 * self.config.eta_seconds {
            return Ok(());
        }
        let mut best: Option<Candidate> = None;
        for attempt in 0..=self.config.max_retries {
            let c = self.candidate(lo, hi, node, attempt, true)?;
            if c.both_pass() {
                self.accept(lo, hi, depth, &c, Admission::Tested);
                self.relaxed(lo, c.point, depth + 1, 2 * node)?;
                return self.relaxed(c.point, hi, depth + 1, 2 * node + 1);
            }
            self.reject(lo, hi, depth, &c);
            if best.as_ref().is_none_or(|b| c.objective < b.objective) {
                best = Some(c);
            }
        }
        let c = best.expect("at least one attempt");
        self.accept(lo, hi, depth, &c, Admission::Relaxed);
        self.relaxed(lo, c.point, depth + 1, 2 * node)?;
        self.relaxed(c.point, hi, depth + 1, 2 * node + 1)
    }

    fn tikhonov(&mut self, lo: f64, hi: f64, depth: usize, node: u64) {
        if !self.can_split(depth) {
            return;
        }
        let c = self.candidate(lo, hi, node, 0, false).expect("untested candidates cannot fail");
        self.accept(lo, hi, depth, &c, Admission::Unconditional);
        self.tikhonov(lo, c.point, depth + 1, 2 * node);
        self.tikhonov(c.point, hi, depth + 1, 2 * node + 1);
    }
}

/// Maps arrivals on `[lo, hi)` through the normalized cumulative of a fitted
/// (zero-floored) bin rate.
struct FittedFrame {
    lo: f64,
    hi: f64,
    step: f64,
    rates: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FittedFrame {
    fn new(fit: &BinFit, lo: f64, hi: f64) -> Option<Self> {
        let step = (hi - lo) / FRAME_GRID as f64;
        let rates: Vec<f64> = (0..=FRAME_GRID).map(|j| fit.evaluate(lo + j as f64 * step).max(0.0)).collect();
        let mut cumulative = Vec::with_capacity(FRAME_GRID + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for j in 0..FRAME_GRID {
            acc += 0.5 * step * (rates[j] + rates[j + 1]);
            cumulative.push(acc);
        }
        (acc > 0.0 && acc.is_finite()).then_some(Self { lo, hi, step, rates, cumulative })
    }

    fn map(&self, t: f64) -> f64 {
        let x = ((t - self.lo) / self.step).clamp(0.0, FRAME_GRID as f64);
        let j = (x.floor() as usize).min(FRAME_GRID - 1);
        let frac = x - j as f64;
        let (r0, r1) = (self.rates[j], self.rates[j + 1]);
        let partial = self.step * frac * (r0 + 0.5 * frac * (r1 - r0));
        let total = self.cumulative[FRAME_GRID];
        let mapped = self.lo + (self.hi - self.lo) * (self.cumulative[j] + partial) / total;
        mapped.min(self.hi.next_down()).max(self.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CountTable;
    use crate::regression::FitConfig;
    use crate::simulator::{make_dataset, GenerationMode, PiecewiseLinearRate};

    fn data(rate: &PiecewiseLinearRate, days: usize, seed: u64) -> (EventSeries, Vec<f64>, CellFitter) {
        let (train, _) = make_dataset(rate, days, 1, GenerationMode::Thinning { upper_bound: None }, seed).unwrap();
        let counts = CountTable::from_events(&train, 300.0).unwrap();
        let fitter = CellFitter::new(&counts, FitConfig::linear()).unwrap();
        (train.clone(), train.pooled(), fitter)
    }

    fn small_config() -> SearchConfig {
        SearchConfig { max_restarts: 1, max_retries: 5, max_test_days: Some(40), ..SearchConfig::default() }
    }

    #[test]
    fn frame_of_constant_fit_is_identity() {
        let fit = BinFit { lo: 10.0, hi: 20.0, coefficients: vec![3.0, 0.0], fitted_degree: 0, points: 5, risk: 0.0, clamp: true };
        let f = FittedFrame::new(&fit, 10.0, 20.0).unwrap();
        for t in [10.0, 12.5, 17.0, 19.99] {
            assert!((f.map(t) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_of_linear_fit_matches_closed_form() {
        // rate 1 + s on s in [-1, 1] over [0, 2]: cumulative t^2 / 2, total 2
        let fit = BinFit { lo: 0.0, hi: 2.0, coefficients: vec![1.0, 1.0], fitted_degree: 1, points: 5, risk: 0.0, clamp: true };
        let f = FittedFrame::new(&fit, 0.0, 2.0).unwrap();
        for t in [0.3, 1.0, 1.7] {
            assert!((f.map(t) - t * t / 2.0).abs() < 1e-12, "{t}");
        }
        let zero = BinFit { coefficients: vec![0.0, 0.0], ..fit };
        assert!(FittedFrame::new(&zero, 0.0, 2.0).is_none());
    }

    #[test]
    fn homogeneous_data_stays_unsplit() {
        let w = TimeWindow::day();
        let rate = PiecewiseLinearRate::constant(w, 1.0, 300.0).unwrap();
        let (events, pooled, fitter) = data(&rate, 40, 3);
        let trace = ivanov_divide(SearchInput { events: &events, pooled: &pooled, fitter: &fitter }, &small_config(), 0).unwrap();
        assert_eq!(trace.final_partition(w).unwrap().num_bins(), 1);
    }

    #[test]
    fn trace_invariants() {
        let rate = PiecewiseLinearRate::af();
        let (events, pooled, fitter) = data(&rate, 40, 5);
        let input = SearchInput { events: &events, pooled: &pooled, fitter: &fitter };
        let cfg = SearchConfig { max_depth: 4, ..small_config() };
        for trace in [
            ivanov_divide(input, &cfg, 0).unwrap(),
            tikhonov_divide(input, &cfg, 0).unwrap(),
            relaxed_divide(input, &SearchConfig { eta_seconds: 3000.0, ..cfg.clone() }, 0).unwrap(),
        ] {
            assert!(trace.entries[0].accepted && trace.entries[0].knots.is_empty());
            let best = trace.best_entry();
            assert!(best.accepted);
            let min = trace.entries.iter().filter(|e| e.accepted).map(|e| e.objective).fold(f64::INFINITY, f64::min);
            assert_eq!(best.objective, min);
            let running = trace.running_best();
            assert!(running.windows(2).all(|w| w[1] <= w[0]));
            for e in &trace.entries {
                assert!(e.knots.windows(2).all(|w| w[0] < w[1]));
                assert!(e.knots.len() < cfg.max_bins);
            }
        }
    }

    #[test]
    fn restarts_are_reproducible() {
        let rate = PiecewiseLinearRate::af();
        let (events, pooled, fitter) = data(&rate, 20, 9);
        let input = SearchInput { events: &events, pooled: &pooled, fitter: &fitter };
        let cfg = SearchConfig { max_depth: 3, ..small_config() };
        assert_eq!(ivanov_divide(input, &cfg, 2).unwrap(), ivanov_divide(input, &cfg, 2).unwrap());
        assert_ne!(tikhonov_divide(input, &cfg, 0).unwrap(), tikhonov_divide(input, &cfg, 1).unwrap());
    }
}
