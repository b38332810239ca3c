use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhpp::binning::Method;
use nhpp::harness::{self, ExperimentConfig, Table};
use nhpp::regression::{self, FitConfig};
use nhpp::stat_tests::{interval_test, DayPooling, TestMethod};
use nhpp::{CountTable, Result};

#[derive(Parser)]
#[command(name = "nhpp", version, about = "Learn NHPP rate functions with adaptive data binning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test event files from the configured dataset
    Simulate(Common),
    /// Test the Poisson property of the events in an interval
    TestPoisson(TestArgs),
    /// Learn one model with the configured (or given) method
    Learn(Common),
    /// Overfitting sweep over eta
    Exp1(Common),
    /// Methods against equal-length binning
    Exp2(Common),
    /// Per-area models from located events
    Exp3(Common),
    /// RMSE of a saved model on an event file
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// ivanov, tikhonov, relaxed, unbinned or equal:N
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated eta values in minutes
    #[arg(long, value_delimiter = ',')]
    eta_sweep: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    days_train: Option<usize>,
    #[arg(long)]
    days_test: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Write the search trace (JSON lines) here
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Event CSV
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lower: f64,
    #[arg(long, default_value_t = nhpp::DAY_SECONDS)]
    upper: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// log or ks-uniform
    #[arg(long, default_value = "log")]
    test: TestMethod,
    /// Superpose all days instead of testing each day
    #[arg(long)]
    pooled: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Event CSV
    #[arg(long)]
    input: PathBuf,
    /// Cell width in seconds
    #[arg(long, default_value_t = 300.0)]
    resolution: f64,
}

fn config_for(c: &Common, preset: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => preset,
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.method {
        cfg.methods = vec![m];
    }
    if let Some(d) = c.degree {
        cfg.fit = FitConfig { degree: d, min_points: d + 1, ..cfg.fit };
    }
    let searches = std::iter::once(&mut cfg.search).chain(cfg.tikhonov_search.as_mut());
    for s in searches {
        if let Some(g) = c.gamma {
            s.gamma = g;
        }
        if let Some(e) = c.epsilon {
            s.epsilon = e;
        }
        if c.trace.is_some() {
            s.trace_path = c.trace.clone();
        }
    }
    if c.gamma.is_some() {
        cfg.gamma_grid.clear();
    }
    if let Some(v) = &c.eta_sweep {
        cfg.eta_sweep = v.clone();
    }
    if let Some(o) = &c.out_dir {
        cfg.out_dir = o.clone();
    }
    if let Some(d) = c.days_train {
        cfg.days_train = d;
    }
    if let Some(d) = c.days_test {
        cfg.days_test = d;
    }
    if let Some(k) = c.clusters {
        cfg.clusters = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print(table: &Table) {
    print!("{}", table.to_csv());
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| nhpp::Error::Io { path: cfg.out_dir.clone(), source: e })?;
    let (n_train, n_test) = if let Ok((train, test)) = cfg.load_geo_split() {
        harness::save_geo(&train, &cfg.out_dir.join("train.csv"))?;
        harness::save_geo(&test, &cfg.out_dir.join("test.csv"))?;
        (train.len(), test.len())
    } else {
        let (train, test) = cfg.load_split()?;
        harness::save_events(&train, &cfg.out_dir.join("train.csv"))?;
        harness::save_events(&test, &cfg.out_dir.join("test.csv"))?;
        (train.total_events(), test.total_events())
    };
    println!("train_events={n_train} test_events={n_test}");
    Ok(())
}

fn learn(cfg: &ExperimentConfig) -> Result<()> {
    let method = cfg.methods[0];
    let (train, test) = cfg.load_split()?;
    let mut search = cfg.search_for(method);
    if method == Method::Tikhonov && !cfg.gamma_grid.is_empty() {
        search.gamma = nhpp::binning::tune_gamma(&train, cfg.fit, &search, &cfg.gamma_grid, cfg.resolution)?.0;
    }
    let out = nhpp::learn(&train, &test, method, cfg.fit, &search, cfg.resolution)?;
    harness::save_model(&out.report.model, &cfg.out_dir.join("model.json"))?;
    harness::write_json(&out.report, &cfg.out_dir.join("report.json"))?;
    println!(
        "method={} bins={} rmse_train={} rmse_test={}",
        out.report.method,
        out.report.bins,
        harness::sig6(out.report.rmse_train),
        harness::sig6(out.report.rmse_test)
    );
    Ok(())
}

fn test_poisson(a: &TestArgs) -> Result<()> {
    let events = harness::load_events(&a.input)?;
    let days = events.slices_in(a.lower, a.upper);
    let pooling = if a.pooled { DayPooling::Pooled } else { DayPooling::PerDay };
    let verdict = interval_test(&days, a.lower, a.upper, a.epsilon, a.test, pooling)?;
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = harness::load_model(&a.model)?;
    let counts = CountTable::from_events(&harness::load_events(&a.input)?, a.resolution)?;
    println!("rmse={}", harness::sig6(regression::evaluate(&model, &counts)?));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => simulate(&config_for(&c, ExperimentConfig::default())?),
        Command::TestPoisson(a) => test_poisson(&a),
        Command::Learn(c) => {
            let cfg = config_for(&c, ExperimentConfig { methods: vec![Method::Ivanov], ..ExperimentConfig::default() })?;
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| nhpp::Error::Io { path: cfg.out_dir.clone(), source: e })?;
            learn(&cfg)
        }
        Command::Exp1(c) => harness::run_experiment_1(&config_for(&c, ExperimentConfig::exp1())?).map(|t| print(&t)),
        Command::Exp2(c) => harness::run_experiment_2(&config_for(&c, ExperimentConfig::exp2())?).map(|t| print(&t)),
        Command::Exp3(c) => harness::run_experiment_3(&config_for(&c, ExperimentConfig::exp3())?).map(|t| print(&t)),
        Command::Eval(a) => eval(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
