//! Saves a learned model as JSON, loads it back and scores it on fresh days.

use nhpp::harness::{load_model, save_model};
use nhpp::regression::evaluate;
use nhpp::{make_dataset, CountTable, FitConfig, GenerationMode, Partition, PiecewiseLinearRate, TimeWindow};

pub fn main() -> nhpp::Result<()> {
    let (train, test) = make_dataset(&PiecewiseLinearRate::af(), 20, 5, GenerationMode::af(), 4)?;
    let counts = CountTable::from_events(&train, 300.0)?;
    let part = Partition::equal(TimeWindow::day(), 8)?;
    let model = nhpp::regression::fit_partition(&counts, &part, &FitConfig::linear())?.model;

    let path = std::env::temp_dir().join(format!("nhpp_model_{}.json", std::process::id()));
    save_model(&model, &path)?;
    let back = load_model(&path)?;
    std::fs::remove_file(&path).ok();
    assert_eq!(back, model);
    println!("{}", serde_json::to_string(&back)?);

    let held_out = CountTable::from_events(&test, 300.0)?;
    println!("test rmse {:.3}", evaluate(&back, &held_out)?);
    println!("coefficients of bin 0 in seconds: {:?}", back.global_coefficients(0));
    Ok(())
}
