//! Data ingestion, experiment configuration and the experiment drivers
//! behind the `nhpp` binary.

mod config;
mod experiments;
mod io;

pub use config::{Dataset, ExperimentConfig};
pub use experiments::{run_experiment_1, run_experiment_2, run_experiment_3, EXP1_HEADER, EXP2_HEADER, EXP3_HEADER};
pub use io::{
    load_events, load_geo, load_model, save_events, save_geo, save_model, sig6, write_json, Table, EVENT_HEADER,
    GEO_HEADER,
};
