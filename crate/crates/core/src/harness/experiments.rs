use std::fs;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::io::{save_model, sig6, write_json, Table};
use crate::binning::{tune_gamma, Learner, Method, SearchConfig};
use crate::domain::FitReport;
use crate::error::{Error, Result};
use crate::spatial::{learn_per_area, AreaConfig};

pub const EXP1_HEADER: [&str; 4] = ["eta", "bins", "rmse_train", "rmse_test"];
pub const EXP2_HEADER: [&str; 8] =
    ["instance", "method", "rmse_train", "rmse_test", "bins", "rmse_train_equal", "rmse_test_equal", "rho"];
pub const EXP3_HEADER: [&str; 7] = ["area", "lon", "lat", "events", "bins", "rmse_train", "rmse_test"];

fn prepare(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

/// Relaxed division over the eta sweep; writes `exp1.csv`.
pub fn run_experiment_1(config: &ExperimentConfig) -> Result<Table> {
    prepare(config)?;
    if config.eta_sweep.is_empty() {
        return Err(Error::Empty("the eta sweep is empty"));
    }
    let (train, test) = config.load_split()?;
    let learner = Learner::new(&train, &test, config.fit, config.resolution)?;
    let mut table = Table::new(&EXP1_HEADER);
    for &eta in &config.eta_sweep {
        let search = SearchConfig { eta_seconds: eta * 60.0, ..config.search() };
        let r = learner.run(Method::Relaxed, &search)?.report;
        table.push(vec![sig6(eta), r.bins.to_string(), sig6(r.rmse_train), sig6(r.rmse_test)]);
    }
    table.save(&config.out_dir.join("exp1.csv"))?;
    Ok(table)
}

#[derive(Serialize)]
struct MethodRecord<'a> {
    report: &'a FitReport,
    gamma: Option<f64>,
    gamma_scores: Option<&'a [(f64, f64)]>,
}

/// Every configured method against equal-length binning at the same bin
/// count; writes `exp2.csv` plus a report and model file per method.
pub fn run_experiment_2(config: &ExperimentConfig) -> Result<Table> {
    prepare(config)?;
    let (train, test) = config.load_split()?;
    let learner = Learner::new(&train, &test, config.fit, config.resolution)?;
    let mut table = Table::new(&EXP2_HEADER);
    for &method in &config.methods {
        let mut search = config.search_for(method);
        let mut scores = None;
        if method == Method::Tikhonov && !config.gamma_grid.is_empty() {
            let (gamma, s) = tune_gamma(&train, config.fit, &search, &config.gamma_grid, config.resolution)?;
            search.gamma = gamma;
            scores = Some(s);
        }
        let report = learner.run(method, &search)?.report;
        let adaptive = !matches!(method, Method::Equal(_));
        let mut row = vec![
            config.name.clone(),
            method.to_string(),
            sig6(report.rmse_train),
            sig6(report.rmse_test),
            report.bins.to_string(),
        ];
        if adaptive {
            let eq = learner.run(Method::Equal(report.bins), &search)?.report;
            // rho from the printed values so the table is self-consistent
            let (s2, e2) = (round6(report.rmse_test), round6(eq.rmse_test));
            let rho = if e2 > 0.0 { (e2 - s2) * 100.0 / e2 } else { 0.0 };
            row.extend([sig6(eq.rmse_train), sig6(eq.rmse_test), sig6(rho)]);
        } else {
            row.extend([String::new(), String::new(), String::new()]);
        }
        table.push(row);
        let stem = method.to_string().replace(':', "_");
        save_model(&report.model, &config.out_dir.join(format!("model_{stem}.json")))?;
        let record = MethodRecord {
            report: &report,
            gamma: (method == Method::Tikhonov).then_some(search.gamma),
            gamma_scores: scores.as_deref(),
        };
        write_json(&record, &config.out_dir.join(format!("report_{stem}.json")))?;
    }
    table.save(&config.out_dir.join("exp2.csv"))?;
    Ok(table)
}

fn round6(x: f64) -> f64 {
    sig6(x).parse().expect("sig6 output parses")
}

#[derive(Serialize)]
struct AreaIndexEntry {
    area: usize,
    centroid: [f64; 2],
    model: String,
    train_events: usize,
    test_events: usize,
}

/// Clusters located events, learns one model per area and writes
/// `area_XX.json` models, `areas.json` and `exp3_summary.csv`.
pub fn run_experiment_3(config: &ExperimentConfig) -> Result<Table> {
    prepare(config)?;
    let method = *config.methods.first().expect("validated");
    let (train, test) = config.load_geo_split()?;
    let area_config = AreaConfig {
        k: config.clusters,
        metric: config.metric,
        max_iters: config.kmeans_iters,
        method,
        fit: config.fit,
        search: config.search(),
        resolution: config.resolution,
    };
    let models = learn_per_area(&train, &test, &area_config)?;
    let mut table = Table::new(&EXP3_HEADER);
    let mut index = Vec::new();
    for a in &models.reports {
        let file = format!("area_{:02}.json", a.area);
        save_model(&a.report.model, &config.out_dir.join(&file))?;
        index.push(AreaIndexEntry {
            area: a.area,
            centroid: a.centroid,
            model: file,
            train_events: a.train_events,
            test_events: a.test_events,
        });
        table.push(vec![
            a.area.to_string(),
            sig6(a.centroid[0]),
            sig6(a.centroid[1]),
            (a.train_events + a.test_events).to_string(),
            a.report.bins.to_string(),
            sig6(a.report.rmse_train),
            sig6(a.report.rmse_test),
        ]);
    }
    write_json(&index, &config.out_dir.join("areas.json"))?;
    table.save(&config.out_dir.join("exp3_summary.csv"))?;
    Ok(table)
}
