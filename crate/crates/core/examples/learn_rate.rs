//! Learns the AF rate with Ivanov and Tikhonov binning and compares each to
//! equal-length bins at the same bin count.
//!
//! cargo run --release --example learn_rate

use nhpp::binning::{compare_with_equal, tune_gamma, Learner, Method, SearchConfig};
use nhpp::stat_tests::DayPooling;
use nhpp::{make_dataset, FitConfig, GenerationMode, PiecewiseLinearRate};

pub fn main() -> nhpp::Result<()> {
    let (train, test) = make_dataset(&PiecewiseLinearRate::af(), 60, 14, GenerationMode::af(), 5)?;
    let learner = Learner::new(&train, &test, FitConfig::linear(), 300.0)?;
    let ivanov = SearchConfig { max_restarts: 3, pooling: DayPooling::Pooled, seed: 5, ..SearchConfig::default() };
    let tikhonov = SearchConfig { max_depth: 4, max_bins: 16, max_restarts: 50, ..ivanov.clone() };

    let unbinned = learner.run(Method::Equal(1), &ivanov)?.report;
    println!("unbinned: test rmse {:.3}", unbinned.rmse_test);

    let out = learner.run(Method::Ivanov, &ivanov)?;
    let cmp = compare_with_equal(&learner, &out.report, &ivanov)?;
    println!(
        "ivanov: {} bins, train {:.3}, test {:.3}, equal-length test {:.3}, improvement {:.2}%",
        cmp.bins, out.report.rmse_train, cmp.rmse_test, cmp.rmse_test_equal, cmp.rho
    );
    let knots_h: Vec<String> = out.report.partition.knots().iter().map(|k| format!("{:.1}", k / 3600.0)).collect();
    println!("  knots (h): {}", knots_h.join(" "));

    let (gamma, scores) = tune_gamma(&train, FitConfig::linear(), &tikhonov, &[1e-4, 1e-3, 1e-2], 300.0)?;
    println!("tikhonov gamma scores {scores:?}, chose {gamma}");
    let tikhonov = SearchConfig { gamma, ..tikhonov };
    let out = learner.run(Method::Tikhonov, &tikhonov)?;
    let cmp = compare_with_equal(&learner, &out.report, &tikhonov)?;
    println!(
        "tikhonov: {} bins, test {:.3}, equal-length test {:.3}, improvement {:.2}%",
        cmp.bins, cmp.rmse_test, cmp.rmse_test_equal, cmp.rho
    );
    Ok(())
}
