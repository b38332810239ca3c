//! Kolmogorov-Smirnov machinery and the Log test of within-interval
//! Poisson homogeneity.
//!
//! Under a homogeneous Poisson process on `[l, u)`, the arrival offsets
//! `t_1 <= ... <= t_m` from `l` transform to i.i.d. standard exponentials via
//! `X_i = -(m + 1 - i) ln((L - t_i) / (L - t_{i-1}))` with `L = u - l` and
//! `t_0 = 0`. The Log test runs a one-sample KS test of the `X_i` against
//! `1 - exp(-x)`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of one KS-type test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub sample_size: usize,
    pub epsilon: f64,
    pub passed: bool,
}

impl TestOutcome {
    fn new(statistic: f64, critical_value: f64, sample_size: usize, epsilon: f64) -> Self {
        Self { statistic, critical_value, sample_size, epsilon, passed: statistic <= critical_value }
    }
}

/// `sup_x |F(x) - F*(x)|` evaluated at the order statistics.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("KS statistic needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(ks_statistic_sorted(&sorted, cdf))
}

pub(crate) fn ks_statistic_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / m - f;
            let below = f - i as f64 / m;
            above.abs().max(below.abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value `sqrt(-0.5 ln(eps / 2) / m)`.
pub fn ks_critical(m: usize, epsilon: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("KS critical value needs m >= 1"));
    }
    check_epsilon(epsilon)?;
    Ok((-0.5 * (epsilon / 2.0).ln() / m as f64).sqrt())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("significance must lie in (0, 1), got {epsilon}")))
    }
}

/// The exponential spacings `X_1..X_m` of arrivals on `[lower, upper)`.
pub fn log_transform(arrivals: &[f64], lower: f64, upper: f64) -> Result<Vec<f64>> {
    let len = upper - lower;
    if !(len > 0.0) {
        return Err(Error::domain(format!("empty interval [{lower}, {upper})")));
    }
    let m = arrivals.len();
    let mut out = Vec::with_capacity(m);
    let mut prev_gap = len;
    for (i, &a) in arrivals.iter().enumerate() {
        if !(a >= lower && a < upper) {
            return Err(Error::OutOfWindow { time: a, start: lower, end: upper });
        }
        let gap = len - (a - lower);
        if gap > prev_gap {
            return Err(Error::domain("arrivals must be ascending"));
        }
        out.push(-((m - i) as f64) * (gap / prev_gap).ln());
        prev_gap = gap;
    }
    Ok(out)
}

/// Log test on one interval. Intervals with at most one arrival pass.
pub fn log_test(arrivals: &[f64], lower: f64, upper: f64, epsilon: f64) -> Result<TestOutcome> {
    check_epsilon(epsilon)?;
    let mut xs = log_transform(arrivals, lower, upper)?;
    xs.sort_unstable_by(f64::total_cmp);
    Ok(ks_outcome(&xs, |x| 1.0 - (-x.max(0.0)).exp(), epsilon))
}

/// KS test of arrival times against the uniform law on `[lower, upper)`.
pub fn ks_uniform_test(arrivals: &[f64], lower: f64, upper: f64, epsilon: f64) -> Result<TestOutcome> {
    check_epsilon(epsilon)?;
    if let Some(&a) = arrivals.iter().find(|&&a| !(a >= lower && a < upper)) {
        return Err(Error::OutOfWindow { time: a, start: lower, end: upper });
    }
    let len = upper - lower;
    let mut xs = arrivals.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    Ok(ks_outcome(&xs, |x| ((x - lower) / len).clamp(0.0, 1.0), epsilon))
}

/// Statistic and verdict on sorted samples; `m <= 1` always passes.
fn ks_outcome(sorted: &[f64], cdf: impl Fn(f64) -> f64, epsilon: f64) -> TestOutcome {
    let m = sorted.len();
    if m == 0 {
        return TestOutcome::new(0.0, 1.0, 0, epsilon);
    }
    let d = ks_statistic_sorted(sorted, cdf);
    let crit = ks_critical(m, epsilon).expect("validated");
    if m == 1 {
        // a single point cannot refute the hypothesis; D <= 1 always
        return TestOutcome::new(d, crit.max(1.0), 1, epsilon);
    }
    TestOutcome::new(d, crit, m, epsilon)
}

/// Which distribution test certifies the Poisson property of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    #[default]
    Log,
    KsUniform,
}

impl FromStr for TestMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(TestMethod::Log),
            "ks-uniform" => Ok(TestMethod::KsUniform),
            other => Err(Error::Unknown { kind: "test method", name: other.to_string() }),
        }
    }
}

/// Tests arrivals on `[lower, upper)` with the chosen method.
pub fn poisson_property_test(
    arrivals: &[f64],
    lower: f64,
    upper: f64,
    epsilon: f64,
    method: TestMethod,
) -> Result<TestOutcome> {
    match method {
        TestMethod::Log => log_test(arrivals, lower, upper, epsilon),
        TestMethod::KsUniform => ks_uniform_test(arrivals, lower, upper, epsilon),
    }
}

/// How repeated daily realizations enter the interval test.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DayPooling {
    /// Test each day; pass when at least `1 - 2 eps` of the days pass.
    #[default]
    PerDay,
    /// Per-day testing with an explicit minimum pass fraction.
    PerDayThreshold { min_pass_fraction: f64 },
    /// Superpose all days into one arrival list and test once.
    Pooled,
}

/// Verdict on one interval across days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalVerdict {
    pub passed: bool,
    pub days_tested: usize,
    pub days_passed: usize,
    pub events: usize,
    /// Set in pooled mode.
    pub pooled: Option<TestOutcome>,
}

/// Multi-day interval test. Per-day mode stops early once the verdict can no
/// longer change.
pub fn interval_test(
    days: &[&[f64]],
    lower: f64,
    upper: f64,
    epsilon: f64,
    method: TestMethod,
    pooling: DayPooling,
) -> Result<IntervalVerdict> {
    let events = days.iter().map(|d| d.len()).sum();
    let threshold = match pooling {
        DayPooling::Pooled => {
            let mut all: Vec<f64> = days.iter().flat_map(|d| d.iter().copied()).collect();
            all.sort_unstable_by(f64::total_cmp);
            return pooled_verdict(&all, days.len(), lower, upper, epsilon, method);
        }
        DayPooling::PerDay => 1.0 - 2.0 * epsilon,
        DayPooling::PerDayThreshold { min_pass_fraction } => min_pass_fraction,
    };
    let n = days.len();
    if n == 0 {
        return Ok(IntervalVerdict { passed: true, days_tested: 0, days_passed: 0, events, pooled: None });
    }
    let needed = (threshold * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let allowed_failures = n - needed.min(n);
    let (mut passed, mut failed, mut tested) = (0usize, 0usize, 0usize);
    for day in days {
        tested += 1;
        if day.len() <= 1 || poisson_property_test(day, lower, upper, epsilon, method)?.passed {
            passed += 1;
        } else {
            failed += 1;
            if failed > allowed_failures {
                break;
            }
        }
        if passed >= needed {
            break;
        }
    }
    Ok(IntervalVerdict { passed: failed <= allowed_failures, days_tested: tested, days_passed: passed, events, pooled: None })
}

/// Pooled-mode verdict from the already sorted superposition of `days` days.
pub fn pooled_verdict(
    sorted: &[f64],
    days: usize,
    lower: f64,
    upper: f64,
    epsilon: f64,
    method: TestMethod,
) -> Result<IntervalVerdict> {
    let out = poisson_property_test(sorted, lower, upper, epsilon, method)?;
    Ok(IntervalVerdict {
        passed: out.passed,
        days_tested: days,
        days_passed: if out.passed { days } else { 0 },
        events: sorted.len(),
        pooled: Some(out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quantiles_give_half_step() {
        let m = 40;
        let xs: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        let d = ks_statistic(&xs, |x| x).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-12);
    }

    #[test]
    fn single_sample_exponential() {
        let d = ks_statistic(&[2f64.ln()], |x| 1.0 - (-x).exp()).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn critical_values() {
        let c = ks_critical(100, 0.05).unwrap();
        assert!((c - 0.135_810).abs() < 1e-6, "{c}");
        let a = ks_critical(25, 0.1).unwrap();
        let b = ks_critical(100, 0.1).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
        let eps = 2.0 / std::f64::consts::E.powi(2);
        assert!((ks_critical(49, eps).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(ks_critical(0, 0.05).is_err());
        assert!(ks_critical(10, 1.0).is_err());
    }

    #[test]
    fn one_arrival_at_midpoint() {
        let xs = log_transform(&[0.5], 0.0, 1.0).unwrap();
        assert!((xs[0] - 2f64.ln()).abs() < 1e-15);
        assert!(log_test(&[0.5], 0.0, 1.0, 0.05).unwrap().passed);
    }

    #[test]
    fn log_test_rejects_out_of_interval() {
        assert!(log_test(&[0.2, 1.0], 0.0, 1.0, 0.05).is_err());
        assert!(log_test(&[-0.1], 0.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn empty_interval_passes() {
        let out = poisson_property_test(&[], 0.0, 1.0, 0.05, TestMethod::Log).unwrap();
        assert!(out.passed);
        let v = interval_test(&[&[], &[]], 0.0, 1.0, 0.05, TestMethod::Log, DayPooling::PerDay).unwrap();
        assert!(v.passed);
    }

    #[test]
    fn method_names() {
        assert_eq!("log".parse::<TestMethod>().unwrap(), TestMethod::Log);
        assert_eq!("ks-uniform".parse::<TestMethod>().unwrap(), TestMethod::KsUniform);
        assert!("chi2".parse::<TestMethod>().is_err());
    }

    #[test]
    fn affine_rescaling_leaves_log_test_unchanged() {
        let arrivals = [0.05, 0.11, 0.4, 0.41, 0.77, 0.9];
        let a = log_test(&arrivals, 0.0, 1.0, 0.05).unwrap();
        let scaled: Vec<f64> = arrivals.iter().map(|t| 3600.0 + 250.0 * t).collect();
        let b = log_test(&scaled, 3600.0, 3850.0, 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9);
        assert_eq!(a.passed, b.passed);
    }

    #[test]
    fn per_day_threshold_counts_days() {
        // evenly spaced arrivals are far too regular to be Poisson
        let regular: Vec<f64> = (0..400).map(|i| i as f64 / 400.0).collect();
        let clumped: Vec<f64> = vec![0.1, 0.6];
        let days: Vec<&[f64]> = vec![&regular, &clumped, &clumped, &clumped];
        let strict = interval_test(&days, 0.0, 1.0, 0.05, TestMethod::Log, DayPooling::PerDay).unwrap();
        assert!(!strict.passed);
        let lenient = DayPooling::PerDayThreshold { min_pass_fraction: 0.5 };
        let v = interval_test(&days, 0.0, 1.0, 0.05, TestMethod::Log, lenient).unwrap();
        assert!(v.passed);
        // stops as soon as two passing days settle the verdict
        assert_eq!(v.days_passed, 2);
    }
}
