//! Synthetic NHPP data: piecewise-linear rate functions, the AF benchmark
//! rate, thinning and count-conditioned samplers, and train/test dataset
//! generation with one random substream per day.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{EventSeries, RateFunction, TimeWindow};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Piecewise-linear rate `max(0, slope * u + intercept)` with `u = t / scale`.
///
/// Breakpoints are in seconds; the rate is expressed per `scale` seconds, so
/// the expected number of events over `[a, b)` is `integral(a, b)` computed in
/// `u` units. Outside the breakpoint span the rate is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateSpec", into = "RateSpec")]
pub struct PiecewiseLinearRate {
    breakpoints: Vec<f64>,
    segments: Vec<(f64, f64)>,
    scale: f64,
}

/// Serialized form of [`PiecewiseLinearRate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSpec {
    pub breakpoints: Vec<f64>,
    /// `[slope, intercept]` per segment.
    pub segments: Vec<[f64; 2]>,
    pub scale: f64,
}

impl TryFrom<RateSpec> for PiecewiseLinearRate {
    type Error = Error;

    fn try_from(spec: RateSpec) -> Result<Self> {
        Self::new(spec.breakpoints, spec.segments.into_iter().map(|[s, c]| (s, c)).collect(), spec.scale)
    }
}

impl From<PiecewiseLinearRate> for RateSpec {
    fn from(r: PiecewiseLinearRate) -> Self {
        RateSpec {
            breakpoints: r.breakpoints,
            segments: r.segments.into_iter().map(|(s, c)| [s, c]).collect(),
            scale: r.scale,
        }
    }
}

impl PiecewiseLinearRate {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        if breakpoints.len() < 2 || segments.len() + 1 != breakpoints.len() {
            return Err(Error::domain(format!(
                "{} breakpoints cannot tile {} segments",
                breakpoints.len(),
                segments.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("breakpoints must be finite and strictly ascending"));
        }
        if segments.iter().any(|(s, c)| !s.is_finite() || !c.is_finite()) {
            return Err(Error::domain("segment coefficients must be finite"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("time scale must be positive, got {scale}")));
        }
        Ok(Self { breakpoints, segments, scale })
    }

    /// Constant `level` events per `scale` seconds over `window`.
    pub fn constant(window: TimeWindow, level: f64, scale: f64) -> Result<Self> {
        Self::new(vec![window.start(), window.end()], vec![(0.0, level)], scale)
    }

    /// The eight-piece AF benchmark rate. Case boundaries are in seconds and
    /// the linear formulas take time in 5-minute units.
    pub fn af() -> Self {
        let breakpoints = (0..=8).map(|k| k as f64 * 10_800.0).collect();
        let segments = vec![
            (13.0 / 36.0, 7.0),
            (5.0 / 36.0, 15.0),
            (25.0 / 36.0, -25.0),
            (-1.0 / 2.0, 104.0),
            (-1.0 / 18.0, 40.0),
            (1.0 / 3.0, -30.0),
            (-4.0 / 9.0, 138.0),
            (-5.0 / 9.0, 166.0),
        ];
        Self::new(breakpoints, segments, 300.0).expect("AF constants are valid")
    }

    /// The same shape multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.breakpoints.clone(),
            self.segments.iter().map(|&(s, c)| (s * factor, c * factor)).collect(),
            self.scale,
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Span of the breakpoints as a window.
    pub fn window(&self) -> Result<TimeWindow> {
        TimeWindow::new(self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    fn segment_of(&self, t: f64) -> Option<usize> {
        if t < self.breakpoints[0] || t >= *self.breakpoints.last().unwrap() {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= t) - 1)
    }

    /// Rate at `t` seconds, per `scale` seconds.
    pub fn evaluate(&self, t: f64) -> f64 {
        match self.segment_of(t) {
            Some(k) => {
                let (s, c) = self.segments[k];
                (s * t / self.scale + c).max(0.0)
            }
            None => 0.0,
        }
    }

    /// Value of segment `k`'s line at `t`, unclamped.
    pub fn segment_value(&self, k: usize, t: f64) -> f64 {
        let (s, c) = self.segments[k];
        s * t / self.scale + c
    }

    /// Maximum of the rate over `window`.
    pub fn max_rate(&self, window: TimeWindow) -> f64 {
        self.pieces(window).iter().map(|p| p.rate0.max(p.rate1)).fold(0.0, f64::max)
    }

    /// Expected number of events over `[lo, hi)`: the integral of the rate
    /// with time measured in `scale` units.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match TimeWindow::new(lo.max(0.0), hi.min(crate::domain::DAY_SECONDS)) {
            Ok(w) => self.pieces(w).iter().map(Piece::mass).sum(),
            Err(_) => 0.0,
        }
    }

    /// Linear pieces restricted to `window`, split where the line crosses zero
    /// so that the rate is linear and nonnegative on each piece.
    fn pieces(&self, window: TimeWindow) -> Vec<Piece> {
        let mut out = Vec::new();
        for k in 0..self.segments.len() {
            let lo = self.breakpoints[k].max(window.start());
            let hi = self.breakpoints[k + 1].min(window.end());
            if hi <= lo {
                continue;
            }
            let (s, c) = self.segments[k];
            let mut cuts = vec![lo, hi];
            if s != 0.0 {
                let zero = -c * self.scale / s;
                if zero > lo && zero < hi {
                    cuts.insert(1, zero);
                }
            }
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                let positive = self.segment_value(k, mid) > 0.0;
                let (r0, r1) = if positive {
                    (self.segment_value(k, a).max(0.0), self.segment_value(k, b).max(0.0))
                } else {
                    (0.0, 0.0)
                };
                out.push(Piece { t0: a, t1: b, rate0: r0, rate1: r1, scale: self.scale });
            }
        }
        out
    }
}

impl RateFunction for PiecewiseLinearRate {
    fn rate(&self, t: f64) -> f64 {
        self.evaluate(t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    t0: f64,
    t1: f64,
    rate0: f64,
    rate1: f64,
    scale: f64,
}

impl Piece {
    fn mass(&self) -> f64 {
        0.5 * (self.rate0 + self.rate1) * (self.t1 - self.t0) / self.scale
    }

    /// Time at which the mass accumulated from `t0` reaches `target`.
    fn invert(&self, target: f64) -> f64 {
        let du = (self.t1 - self.t0) / self.scale;
        let slope = (self.rate1 - self.rate0) / du;
        // solve slope/2 y^2 + rate0 y = target for y >= 0
        let disc = (self.rate0 * self.rate0 + 2.0 * slope * target).max(0.0);
        let denom = self.rate0 + disc.sqrt();
        let y = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
        (self.t0 + y * self.scale).clamp(self.t0, self.t1)
    }
}

/// Inverse-CDF sampler for arrival times with density proportional to the rate.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
    window: TimeWindow,
}

impl ArrivalSampler {
    pub fn new(rate: &PiecewiseLinearRate, window: TimeWindow) -> Self {
        let pieces: Vec<Piece> = rate.pieces(window).into_iter().filter(|p| p.mass() > 0.0).collect();
        let mut acc = 0.0;
        let cumulative = pieces
            .iter()
            .map(|p| {
                acc += p.mass();
                acc
            })
            .collect();
        Self { pieces, cumulative, window }
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Normalized cumulative rate at `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let total = self.total_mass();
        if total <= 0.0 || t <= self.window.start() {
            return 0.0;
        }
        let mut acc = 0.0;
        for p in &self.pieces {
            if t >= p.t1 {
                acc += p.mass();
            } else {
                if t > p.t0 {
                    let du = (t - p.t0) / p.scale;
                    let r_t = p.rate0 + (p.rate1 - p.rate0) * (t - p.t0) / (p.t1 - p.t0);
                    acc += 0.5 * (p.rate0 + r_t) * du;
                }
                break;
            }
        }
        (acc / total).min(1.0)
    }

    /// Maps a uniform draw in `[0, 1)` to an arrival time.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q * self.total_mass();
        let k = self.cumulative.partition_point(|&c| c <= target).min(self.pieces.len() - 1);
        let before = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        let t = self.pieces[k].invert(target - before);
        // keep the half-open window contract under rounding
        if t >= self.window.end() {
            self.window.end().next_down()
        } else {
            t
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out: Vec<f64> = (0..n).map(|_| self.quantile(rng.random::<f64>())).collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// One day by thinning a homogeneous process at `upper_bound`.
pub fn simulate_thinning(rate: &PiecewiseLinearRate, window: TimeWindow, upper_bound: f64, seed: u64) -> Result<Vec<f64>> {
    thinning_day(rate, window, upper_bound, &mut substream(seed, Stream::Day, &[]))
}

fn thinning_day<R: Rng + ?Sized>(
    rate: &PiecewiseLinearRate,
    window: TimeWindow,
    upper_bound: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let peak = rate.max_rate(window);
    if !(upper_bound >= peak * (1.0 - 1e-12)) || !upper_bound.is_finite() {
        return Err(Error::domain(format!(
            "thinning bound {upper_bound} is below the maximum rate {peak} on the window"
        )));
    }
    if upper_bound <= 0.0 {
        return Ok(Vec::new());
    }
    let gaps = Exp::new(upper_bound / rate.scale()).map_err(|e| Error::domain(e.to_string()))?;
    let mut out = Vec::new();
    let mut t = window.start();
    loop {
        t += gaps.sample(rng);
        if t >= window.end() {
            break;
        }
        if rng.random::<f64>() * upper_bound < rate.evaluate(t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// One day with a total count drawn uniformly from `count_range` (inclusive)
/// and arrivals placed i.i.d. with density proportional to the rate.
pub fn simulate_conditioned(
    rate: &PiecewiseLinearRate,
    window: TimeWindow,
    count_range: (usize, usize),
    seed: u64,
) -> Result<Vec<f64>> {
    let sampler = ArrivalSampler::new(rate, window);
    conditioned_day(&sampler, count_range, &mut substream(seed, Stream::Day, &[]))
}

fn conditioned_day<R: Rng + ?Sized>(sampler: &ArrivalSampler, (lo, hi): (usize, usize), rng: &mut R) -> Result<Vec<f64>> {
    if lo > hi {
        return Err(Error::domain(format!("empty count range [{lo}, {hi}]")));
    }
    let n = rng.random_range(lo..=hi);
    if n > 0 && sampler.total_mass() <= 0.0 {
        return Err(Error::domain("cannot place arrivals under an identically zero rate"));
    }
    Ok(sampler.sample(rng, n))
}

/// How each simulated day is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Thinning; a missing bound defaults to the rate's maximum.
    Thinning { upper_bound: Option<f64> },
    /// Uniform total count in `[min_count, max_count]`, arrivals by inverse CDF.
    Conditioned { min_count: usize, max_count: usize },
}

impl GenerationMode {
    /// The AF protocol: between 7000 and 8000 requests per day.
    pub fn af() -> Self {
        GenerationMode::Conditioned { min_count: 7000, max_count: 8000 }
    }
}

/// Independent train and test days; day `i` (train days first, then test
/// days) uses substream `(seed, i)`.
pub fn make_dataset(
    rate: &PiecewiseLinearRate,
    train_days: usize,
    test_days: usize,
    mode: GenerationMode,
    seed: u64,
) -> Result<(EventSeries, EventSeries)> {
    if train_days == 0 || test_days == 0 {
        return Err(Error::domain("need at least one training and one test day"));
    }
    let window = rate.window()?;
    let sampler = ArrivalSampler::new(rate, window);
    let days: Vec<Vec<f64>> = (0..train_days + test_days)
        .into_par_iter()
        .map(|day| {
            let mut rng = substream(seed, Stream::Day, &[day as u64]);
            match mode {
                GenerationMode::Thinning { upper_bound } => {
                    let bound = upper_bound.unwrap_or_else(|| rate.max_rate(window));
                    thinning_day(rate, window, bound, &mut rng)
                }
                GenerationMode::Conditioned { min_count, max_count } => {
                    conditioned_day(&sampler, (min_count, max_count), &mut rng)
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut days = days;
    let test = days.split_off(train_days);
    Ok((EventSeries::new(window, days)?, EventSeries::new(window, test)?))
}
