//! Spatial reduction: cluster event locations with k-means and learn one
//! temporal rate model per area.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::binning::{Learner, Method, SearchConfig};
use crate::domain::{EventSeries, FitReport, TimeWindow};
use crate::error::{Error, Result};
use crate::regression::FitConfig;
use crate::rng::{substream, Stream};
use crate::simulator::{make_dataset, GenerationMode, PiecewiseLinearRate};

/// One located event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoEvent {
    pub day: usize,
    pub seconds: f64,
    pub lon: f64,
    pub lat: f64,
}

/// Located events over `num_days` days, sorted by day then time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoEventSeries {
    window: TimeWindow,
    num_days: usize,
    events: Vec<GeoEvent>,
}

impl GeoEventSeries {
    pub fn new(window: TimeWindow, num_days: usize, mut events: Vec<GeoEvent>) -> Result<Self> {
        for e in &events {
            if !(e.lon.is_finite() && e.lat.is_finite()) {
                return Err(Error::domain(format!("non-finite coordinates ({}, {})", e.lon, e.lat)));
            }
            if !window.contains(e.seconds) {
                return Err(Error::OutOfWindow { time: e.seconds, start: window.start(), end: window.end() });
            }
            if e.day >= num_days {
                return Err(Error::domain(format!("day {} outside 0..{num_days}", e.day)));
            }
        }
        events.sort_by(|a, b| a.day.cmp(&b.day).then(a.seconds.total_cmp(&b.seconds)));
        Ok(Self { window, num_days, events })
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn num_days(&self) -> usize {
        self.num_days
    }

    pub fn events(&self) -> &[GeoEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.events.iter().map(|e| [e.lon, e.lat]).collect()
    }

    /// The temporal series of all events, ignoring location.
    pub fn temporal(&self) -> EventSeries {
        self.temporal_where(|_| true)
    }

    fn temporal_where(&self, mut keep: impl FnMut(usize) -> bool) -> EventSeries {
        let mut days = vec![Vec::new(); self.num_days];
        for (i, e) in self.events.iter().enumerate() {
            if keep(i) {
                days[e.day].push(e.seconds);
            }
        }
        EventSeries::new(self.window, days).expect("validated on construction")
    }

    /// Keeps the days whose index satisfies `keep`, renumbering them in order.
    pub fn select_days(&self, mut keep: impl FnMut(usize) -> bool) -> GeoEventSeries {
        let mut map = vec![None; self.num_days];
        let mut next = 0;
        for (d, slot) in map.iter_mut().enumerate() {
            if keep(d) {
                *slot = Some(next);
                next += 1;
            }
        }
        let events = self
            .events
            .iter()
            .filter_map(|e| map[e.day].map(|day| GeoEvent { day, ..*e }))
            .collect();
        GeoEventSeries { window: self.window, num_days: next, events }
    }
}

/// A synthetic demand source: arrivals follow `rate` and scatter around
/// `(lon, lat)` with standard deviation `spread` degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub lon: f64,
    pub lat: f64,
    pub spread: f64,
    pub rate: PiecewiseLinearRate,
}

/// Five hotspots around a city centre with AF-shaped rates of different
/// magnitudes.
pub fn demo_city() -> Vec<Hotspot> {
    let af = PiecewiseLinearRate::af();
    [(-122.42, 37.78, 0.30), (-122.40, 37.79, 0.25), (-122.45, 37.76, 0.15), (-122.39, 37.75, 0.20), (-122.47, 37.80, 0.10)]
        .iter()
        .map(|&(lon, lat, f)| Hotspot { lon, lat, spread: 0.004, rate: af.scaled(f).expect("positive factor") })
        .collect()
}

/// Simulates every hotspot for `train_days + test_days` days and returns the
/// train and test halves. Counts per hotspot follow `mode` (use thinning
/// unless every hotspot should get the same count range).
pub fn simulate_geo(
    hotspots: &[Hotspot],
    train_days: usize,
    test_days: usize,
    mode: GenerationMode,
    seed: u64,
) -> Result<(GeoEventSeries, GeoEventSeries)> {
    let first = hotspots.first().ok_or(Error::Empty("no hotspots"))?;
    let window = first.rate.window()?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (h, spot) in hotspots.iter().enumerate() {
        if !(spot.spread >= 0.0 && spot.spread.is_finite()) {
            return Err(Error::domain(format!("hotspot {h} has an invalid spread {}", spot.spread)));
        }
        spot.rate.window()?.check_same(&window)?;
        let spot_seed = substream(seed, Stream::Location, &[h as u64, 0]).random::<u64>();
        let (tr, te) = make_dataset(&spot.rate, train_days, test_days, mode, spot_seed)?;
        let scatter = Normal::new(0.0, spot.spread).expect("validated spread");
        let mut rng = substream(seed, Stream::Location, &[h as u64, 1]);
        for (series, out) in [(&tr, &mut train), (&te, &mut test)] {
            for (day, times) in series.days().iter().enumerate() {
                for &seconds in times {
                    let lon = spot.lon + scatter.sample(&mut rng);
                    let lat = spot.lat + scatter.sample(&mut rng);
                    out.push(GeoEvent { day, seconds, lon, lat });
                }
            }
        }
    }
    Ok((GeoEventSeries::new(window, train_days, train)?, GeoEventSeries::new(window, test_days, test)?))
}

/// Distance used for clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Plain Euclidean distance on (lon, lat).
    #[default]
    Euclidean,
    /// Longitude scaled by the cosine of the mean latitude first.
    Equirectangular,
}

/// K centroids and the nearest-centroid assignment of the clustered points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPartition {
    pub centroids: Vec<[f64; 2]>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub metric: Metric,
    /// Longitude factor applied before measuring distances.
    lon_scale: f64,
}

impl AreaPartition {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, p: [f64; 2]) -> usize {
        let q = [p[0] * self.lon_scale, p[1]];
        let scaled: Vec<[f64; 2]> = self.centroids.iter().map(|c| [c[0] * self.lon_scale, c[1]]).collect();
        nearest(&scaled, q).0
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Euclidean k-means with k-means++ seeding and Lloyd iterations.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64, max_iters: usize) -> Result<AreaPartition> {
    kmeans_with(points, k, seed, max_iters, Metric::Euclidean)
}

pub fn kmeans_with(points: &[[f64; 2]], k: usize, seed: u64, max_iters: usize, metric: Metric) -> Result<AreaPartition> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::domain(format!("k = {k} exceeds the {} points", points.len())));
    }
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::domain("non-finite point"));
    }
    let lon_scale = match metric {
        Metric::Euclidean => 1.0,
        Metric::Equirectangular => {
            let mean_lat = points.iter().map(|p| p[1]).sum::<f64>() / points.len() as f64;
            mean_lat.to_radians().cos()
        }
    };
    let xs: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * lon_scale, p[1]]).collect();
    let mut centroids = seed_plus_plus(&xs, k, seed);
    let mut assignment = vec![usize::MAX; xs.len()];
    let mut wcss_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut cost = 0.0;
        for (i, &p) in xs.iter().enumerate() {
            let (j, d) = nearest(&centroids, p);
            cost += d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        wcss_history.push(cost);
        if !changed {
            converged = true;
            break;
        }
        update_centroids(&xs, &assignment, &mut centroids);
    }
    let centroids = centroids.into_iter().map(|c| [c[0] / lon_scale, c[1]]).collect();
    Ok(AreaPartition { centroids, assignment, wcss_history, iterations, converged, metric, lon_scale })
}

fn seed_plus_plus(xs: &[[f64; 2]], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = substream(seed, Stream::KMeans, &[]);
    let mut chosen = vec![rng.random_range(0..xs.len())];
    let mut d2: Vec<f64> = xs.iter().map(|&p| dist2(p, xs[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            // fewer distinct locations than clusters
            (0..xs.len()).find(|i| !chosen.contains(i)).expect("points >= k")
        };
        chosen.push(next);
        for (i, &p) in xs.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, xs[next]));
        }
    }
    chosen.into_iter().map(|i| xs[i]).collect()
}

/// Moves each centroid to its cluster mean; an empty cluster is reseeded at
/// the point farthest from its current centroid.
fn update_centroids(xs: &[[f64; 2]], assignment: &[usize], centroids: &mut [[f64; 2]]) {
    let k = centroids.len();
    let mut sums = vec![[0.0, 0.0]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in xs.iter().zip(assignment) {
        sums[a][0] += p[0];
        sums[a][1] += p[1];
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            let far = (0..xs.len())
                .max_by(|&a, &b| {
                    let da = dist2(xs[a], centroids[assignment[a]]);
                    let db = dist2(xs[b], centroids[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("nonempty");
            centroids[j] = xs[far];
        }
    }
}

/// Learned model of one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub area: usize,
    pub centroid: [f64; 2],
    pub train_events: usize,
    pub test_events: usize,
    pub report: FitReport,
}

/// Clustering of the training locations plus one report per area.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaModels {
    pub areas: AreaPartition,
    pub reports: Vec<AreaReport>,
}

/// Per-area learning settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaConfig {
    pub k: usize,
    pub metric: Metric,
    pub max_iters: usize,
    pub method: Method,
    pub fit: FitConfig,
    pub search: SearchConfig,
    pub resolution: f64,
}

/// Clusters the training locations and learns each area's rate
/// independently; test events go to their nearest training centroid.
pub fn learn_per_area(train: &GeoEventSeries, test: &GeoEventSeries, config: &AreaConfig) -> Result<AreaModels> {
    train.window().check_same(&test.window())?;
    let areas = kmeans_with(&train.points(), config.k, config.search.seed, config.max_iters, config.metric)?;
    let test_area: Vec<usize> = test.events().iter().map(|e| areas.nearest([e.lon, e.lat])).collect();
    let mut reports = Vec::with_capacity(config.k);
    for a in 0..config.k {
        let tr = train.temporal_where(|i| areas.assignment[i] == a);
        let te = test.temporal_where(|i| test_area[i] == a);
        let learner = Learner::new(&tr, &te, config.fit, config.resolution)?;
        let report = if tr.total_events() == 0 {
            learner.run(Method::Equal(1), &config.search)?.report
        } else {
            learner.run(config.method, &config.search)?.report
        };
        reports.push(AreaReport {
            area: a,
            centroid: areas.centroids[a],
            train_events: tr.total_events(),
            test_events: te.total_events(),
            report,
        });
    }
    Ok(AreaModels { areas, reports })
}
