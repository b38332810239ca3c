//! Splits a synthetic city into k-means areas and learns one rate per area.

use nhpp::binning::{Method, SearchConfig};
use nhpp::spatial::{demo_city, learn_per_area, simulate_geo, AreaConfig, Metric};
use nhpp::stat_tests::DayPooling;
use nhpp::{FitConfig, GenerationMode};

pub fn main() -> nhpp::Result<()> {
    let city = demo_city();
    let (train, test) = simulate_geo(&city, 14, 4, GenerationMode::Thinning { upper_bound: None }, 9)?;
    println!("{} training events, {} test events", train.len(), test.len());
    let config = AreaConfig {
        k: 5,
        metric: Metric::Equirectangular,
        max_iters: 100,
        method: Method::Ivanov,
        fit: FitConfig::linear(),
        search: SearchConfig { max_restarts: 2, max_retries: 5, pooling: DayPooling::Pooled, seed: 9, ..SearchConfig::default() },
        resolution: 300.0,
    };
    let models = learn_per_area(&train, &test, &config)?;
    println!("k-means: {} iterations, converged {}, wcss {:.3e}", models.areas.iterations, models.areas.converged, models.areas.wcss());
    for a in &models.reports {
        println!(
            "area {} at ({:.4}, {:.4}): {} events, {} bins, test rmse {:.3}",
            a.area, a.centroid[0], a.centroid[1], a.train_events, a.report.bins, a.report.rmse_test
        );
    }
    Ok(())
}
