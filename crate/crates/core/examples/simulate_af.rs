//! Simulates AF days both ways and writes them as an event CSV.
//!
//! cargo run --example simulate_af [out.csv]

use nhpp::harness::save_events;
use nhpp::simulator::{ArrivalSampler, GenerationMode};
use nhpp::{make_dataset, PiecewiseLinearRate, TimeWindow};

pub fn main() -> nhpp::Result<()> {
    let af = PiecewiseLinearRate::af();
    let day = TimeWindow::day();
    println!("expected events per day: {}", af.integral(0.0, 86_400.0));

    let thinning = GenerationMode::Thinning { upper_bound: None };
    let (train, test) = make_dataset(&af, 7, 2, thinning, 1)?;
    println!("thinning: {} train days, {} events; {} test events", train.num_days(), train.total_events(), test.total_events());

    let (train, _) = make_dataset(&af, 7, 2, GenerationMode::af(), 1)?;
    let counts: Vec<usize> = train.days().iter().map(Vec::len).collect();
    println!("conditioned on 7000..=8000 per day: {counts:?}");

    // the sampler behind the conditioned mode
    let sampler = ArrivalSampler::new(&af, day);
    for q in [0.25, 0.5, 0.75] {
        println!("quantile {q}: {:.0} s", sampler.quantile(q));
    }

    if let Some(path) = std::env::args().nth(1) {
        save_events(&train, path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
