//! Per-bin polynomial regression on a fixed partition, and the risks the
//! search compares.

use nhpp::regression::{evaluate, fit_partition};
use nhpp::simulator::GenerationMode;
use nhpp::{make_dataset, CountTable, FitConfig, Partition, PiecewiseLinearRate, TimeWindow};

pub fn main() -> nhpp::Result<()> {
    let (train, test) = make_dataset(&PiecewiseLinearRate::af(), 30, 10, GenerationMode::af(), 3)?;
    let counts = CountTable::from_events(&train, 300.0)?;
    let held_out = CountTable::from_events(&test, 300.0)?;
    println!("{} days x {} five-minute cells", counts.num_days(), counts.num_cells());

    for degree in [0, 1, 3] {
        for bins in [1, 4, 8] {
            let part = Partition::equal(TimeWindow::day(), bins)?;
            let fit = fit_partition(&counts, &part, &FitConfig::new(degree, true))?;
            println!(
                "degree {degree}, {bins} bins: train rmse {:.3}, test rmse {:.3}, penalized risk (gamma 0.01) {:.3}",
                fit.binned_risk()?.sqrt(),
                evaluate(&fit.model, &held_out)?,
                fit.penalized_risk(0.01)?
            );
        }
    }

    // a linear fit on the AF breakpoints recovers the rate
    let knots: Vec<f64> = (1..8).map(|k| k as f64 * 10_800.0).collect();
    let fit = fit_partition(&counts, &Partition::new(TimeWindow::day(), knots)?, &FitConfig::linear())?;
    println!("rate at noon: fitted {:.2}, true {:.2}", fit.model.evaluate(43_200.0), PiecewiseLinearRate::af().evaluate(43_200.0));
    Ok(())
}
