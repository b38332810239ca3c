//! Overfitting: relaxed division with cubic fits over shrinking minimum bin
//! lengths. Training error keeps falling; test error turns back up.

use nhpp::binning::{Learner, Method, SearchConfig};
use nhpp::stat_tests::DayPooling;
use nhpp::{make_dataset, FitConfig, GenerationMode, PiecewiseLinearRate};

pub fn main() -> nhpp::Result<()> {
    let (train, test) = make_dataset(&PiecewiseLinearRate::af(), 30, 14, GenerationMode::af(), 2)?;
    let learner = Learner::new(&train, &test, FitConfig::cubic(), 300.0)?;
    println!("eta_min bins rmse_train rmse_test");
    for eta in [600.0, 120.0, 60.0, 30.0, 10.0] {
        let search = SearchConfig {
            eta_seconds: eta * 60.0,
            max_depth: 12,
            max_bins: 1024,
            max_restarts: 1,
            max_retries: 3,
            pooling: DayPooling::Pooled,
            seed: 2,
            ..SearchConfig::default()
        };
        let r = learner.run(Method::Relaxed, &search)?.report;
        println!("{eta:7} {:4} {:10.4} {:9.4}", r.bins, r.rmse_train, r.rmse_test);
    }
    Ok(())
}
