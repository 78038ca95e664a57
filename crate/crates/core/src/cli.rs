//! `livealloc` command line: generate traces, train the viewer predictor,
//! solve single periods, run the full simulation sweep and the solver
//! equivalence check.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{
    self, load_cost_params, load_region_set, read_json, write_json, DEFAULT_THRESHOLDS_MS,
};
use crate::domain::{CostParams, RegionSet};
use crate::error::{Error, Result};
use crate::optimizer::{
    self, brute_force_solve, solve_period, SolveOptions, SolveReport, VideoInstance,
};
use crate::predictor::{
    evaluate, fit_forest, Dataset, EncoderConfig, ForestParams, ModelFile, R2Report,
};
use crate::simulator::{
    latency_gap_report, run_sweep, write_latency_csv, write_metrics_csv, DemandSource, SimConfig,
    ThresholdSummary,
};
use crate::workload::{generate, load_trace, save_trace, GeneratorConfig};

// stdout may be a closed pipe (`| head`); losing report lines is fine there
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_part {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "livealloc",
    version,
    about = "Proactive replica placement for crowdsourced live streaming"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// regions.json: list of {id, name, lat, lon}
    #[arg(long, global = true)]
    pub regions: Option<PathBuf>,
    /// rtt.json: n x n round-trip delays in ms (default: derived from distance)
    #[arg(long, global = true)]
    pub rtt: Option<PathBuf>,
    /// prices.json: a price sheet or a cost-parameter object
    #[arg(long, global = true)]
    pub prices: Option<PathBuf>,
    /// Comma-separated delay thresholds in ms
    #[arg(long, global = true, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Period length in hours, used to prorate monthly storage prices
    #[arg(long, global = true, default_value_t = 1.0)]
    pub period_hours: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic trace
    Generate(GenerateArgs),
    /// Train the per-region viewer predictor on a trace
    Train(TrainArgs),
    /// Solve one period's placement problems
    Solve(SolveArgs),
    /// Run the period-by-period simulation for every threshold
    Simulate(SimulateArgs),
    /// Compare the solver with exhaustive search on random small instances
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = config::DEFAULT_PERIODS)]
    pub periods: u32,
    /// Mean arrivals per period
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub locality: Option<f64>,
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Output file (default: <out-dir>/trace.ndjson)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Forest sizes to try
    #[arg(long, value_delimiter = ',', default_values_t = [100usize])]
    pub trees: Vec<usize>,
    /// Depth limits to try; 0 means unlimited
    #[arg(long, value_delimiter = ',', default_values_t = [0usize])]
    pub max_depth: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Output model (default: <out-dir>/model.json)
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON list of {broadcaster_region, demand, size_gb}
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long, default_value_t = optimizer::DEFAULT_RESOLUTION_MS)]
    pub resolution_ms: f64,
    /// Use exhaustive search instead of the solver (small instances only)
    #[arg(long)]
    pub brute_force: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Trained model file, or "oracle" to use the recorded viewers
    #[arg(long, default_value = "oracle")]
    pub model: String,
    #[arg(long, default_value_t = config::DEFAULT_PERIODS)]
    pub periods: u32,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 5)]
    pub max_regions: usize,
    #[arg(long, default_value_t = 4)]
    pub max_viewer_regions: usize,
}

/// Runs the CLI and maps failures to exit codes: 2 for usage and input
/// configuration problems, 1 for everything else.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { error, usage }) => {
            let kind = if usage { "usage" } else { "runtime" };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": error.to_string() })
            );
            if usage {
                eprintln!("Run `livealloc --help` for usage.");
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

struct Failure {
    error: Error,
    usage: bool,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            usage: false,
        }
    }
}

fn usage(error: Error) -> Failure {
    Failure { error, usage: true }
}

struct Inputs {
    regions: RegionSet,
    prices: CostParams,
    thresholds: Vec<f64>,
}

fn inputs(c: &Common) -> std::result::Result<Inputs, Failure> {
    let regions = load_region_set(c.regions.as_deref(), c.rtt.as_deref()).map_err(usage)?;
    let prices =
        load_cost_params(c.prices.as_deref(), c.period_hours, regions.len()).map_err(usage)?;
    let thresholds = c
        .thresholds
        .clone()
        .unwrap_or_else(|| DEFAULT_THRESHOLDS_MS.to_vec());
    if let Some(bad) = thresholds.iter().find(|d| !(**d >= 0.0)) {
        return Err(usage(Error::InvalidConfig(format!(
            "threshold {bad} must be non-negative"
        ))));
    }
    Ok(Inputs {
        regions,
        prices,
        thresholds,
    })
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let c = &cli.common;
    let input = inputs(c)?;
    fs::create_dir_all(&c.out_dir).map_err(|e| usage(Error::io(&c.out_dir, e)))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = c.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(c, &input, a),
        Command::Train(a) => cmd_train(c, &input, a),
        Command::Solve(a) => cmd_solve(c, &input, a),
        Command::Simulate(a) => cmd_simulate(c, &input, a),
        Command::OracleCheck(a) => cmd_oracle_check(c, a),
    })
}

fn cmd_generate(c: &Common, input: &Inputs, a: &GenerateArgs) -> std::result::Result<(), Failure> {
    let mut cfg = GeneratorConfig::new(input.regions.len(), c.seed);
    if let Some(r) = a.rate {
        cfg.videos_per_period = r;
    }
    if let Some(l) = a.locality {
        cfg.locality = l;
    }
    if let Some(e) = a.exponent {
        cfg.popularity_exponent = e;
    }
    cfg.validate(input.regions.len()).map_err(usage)?;
    let trace = generate(&cfg, a.periods, &input.regions.regions)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| c.out_dir.join("trace.ndjson"));
    save_trace(&out, &trace)?;
    say!(
        "wrote {} videos over {} periods to {}",
        trace.records.len(),
        a.periods,
        out.display()
    );
    Ok(())
}

struct Fitted {
    label: String,
    params: ForestParams,
    report: R2Report,
    model: crate::predictor::ForestModel,
}

fn cmd_train(c: &Common, input: &Inputs, a: &TrainArgs) -> std::result::Result<(), Failure> {
    let trace = load_trace(&a.trace).map_err(usage)?;
    let encoder = EncoderConfig::new(input.regions.len());
    let data = Dataset::from_records(&trace.records, &input.regions.regions, &encoder)?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet.into());
    }
    let (train, test) = data.split(a.train_frac, c.seed);
    if test.is_empty() || train.is_empty() {
        return Err(usage(Error::InvalidConfig(
            "train/validation split leaves an empty side".into(),
        )));
    }
    let depth = |d: usize| (d > 0).then_some(d);

    let mut fitted: Vec<Fitted> = Vec::new();
    for &d in &a.max_depth {
        let params = ForestParams::single_tree(depth(d), c.seed);
        let model = fit_forest(&train.x, &train.y, params)?;
        let report = evaluate(&model, &test)?;
        fitted.push(Fitted {
            label: format!("DT(depth={})", depth_label(d)),
            params,
            report,
            model,
        });
        for &t in &a.trees {
            let params = ForestParams {
                n_trees: t,
                max_depth: depth(d),
                min_samples_leaf: a.min_samples_leaf,
                rng_seed: c.seed,
                ..ForestParams::default()
            };
            let model = fit_forest(&train.x, &train.y, params)?;
            let report = evaluate(&model, &test)?;
            fitted.push(Fitted {
                label: format!("RF(trees={t},depth={})", depth_label(d)),
                params,
                report,
                model,
            });
        }
    }

    let mut w = csv::Writer::from_path(c.out_dir.join("r2.csv")).map_err(Error::from)?;
    w.write_record(["model", "region", "r2"])
        .map_err(Error::from)?;
    for f in &fitted {
        for (r, v) in f.report.per_region.iter().enumerate() {
            let name = &input.regions.regions[r].name;
            w.write_record([
                f.label.as_str(),
                name,
                &v.map(|x| x.to_string()).unwrap_or_default(),
            ])
            .map_err(Error::from)?;
        }
        w.write_record([f.label.as_str(), "pooled", &f.report.pooled.to_string()])
            .map_err(Error::from)?;
    }
    w.flush()
        .map_err(|e| Error::io(c.out_dir.join("r2.csv"), e))?;

    say_part!("{:<12}", "region");
    for f in &fitted {
        say_part!(" {:>22}", f.label);
    }
    say!();
    for (r, region) in input.regions.regions.iter().enumerate() {
        say_part!("{:<12}", region.name);
        for f in &fitted {
            match f.report.per_region[r] {
                Some(v) => say_part!(" {v:>22.3}"),
                None => say_part!(" {:>22}", "-"),
            }
        }
        say!();
    }
    say_part!("{:<12}", "pooled");
    for f in &fitted {
        say_part!(" {:>22.3}", f.report.pooled);
    }
    say!();

    let best = fitted
        .iter()
        .filter(|f| f.params.n_trees > 1 || a.trees.iter().all(|&t| t <= 1))
        .max_by(|x, y| x.report.pooled.total_cmp(&y.report.pooled))
        .expect("at least one model fitted");
    let out = a
        .model_out
        .clone()
        .unwrap_or_else(|| c.out_dir.join("model.json"));
    // refit the chosen configuration on all rows
    let model = fit_forest(&data.x, &data.y, best.params)?;
    debug_assert_eq!(model.width, best.model.width);
    ModelFile::new(encoder, model).save(&out)?;
    say!(
        "selected {} (validation pooled R² {:.3}); wrote {}",
        best.label,
        best.report.pooled,
        out.display()
    );
    Ok(())
}

fn depth_label(d: usize) -> String {
    if d == 0 {
        "none".into()
    } else {
        d.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveEntry {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<SolveError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveError {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_avg_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub threshold_ms: f64,
    pub results: Vec<SolveEntry>,
}

fn entry(index: usize, r: Result<SolveReport>) -> SolveEntry {
    match r {
        Ok(report) => SolveEntry {
            index,
            report: Some(report),
            error: None,
        },
        Err(e) => {
            let (kind, min) = match &e {
                Error::Infeasible {
                    min_avg_delay_ms, ..
                } => ("infeasible", Some(*min_avg_delay_ms)),
                Error::InstanceTooLarge(_) => ("too_large", None),
                _ => ("invalid", None),
            };
            SolveEntry {
                index,
                report: None,
                error: Some(SolveError {
                    kind: kind.into(),
                    message: e.to_string(),
                    min_avg_delay_ms: min,
                }),
            }
        }
    }
}

fn cmd_solve(c: &Common, input: &Inputs, a: &SolveArgs) -> std::result::Result<(), Failure> {
    let instances: Vec<VideoInstance> = read_json(&a.instances).map_err(usage)?;
    let opts = SolveOptions {
        resolution_ms: a.resolution_ms,
        ..SolveOptions::default()
    };
    let mut outputs = Vec::new();
    for &d in &input.thresholds {
        let results: Vec<Result<SolveReport>> = if a.brute_force {
            instances
                .iter()
                .map(|i| brute_force_solve(i, &input.regions, &input.prices, d))
                .collect()
        } else {
            solve_period(&instances, &input.regions, &input.prices, d, &opts)
        };
        outputs.push(SolveOutput {
            threshold_ms: d,
            results: results
                .into_iter()
                .enumerate()
                .map(|(i, r)| entry(i, r))
                .collect(),
        });
    }
    write_json(&c.out_dir.join("solve.json"), &outputs)?;

    let path = c.out_dir.join("solve_summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record([
        "threshold_ms",
        "index",
        "status",
        "storage_cost",
        "migration_cost",
        "serving_cost",
        "total_cost",
        "avg_delay_ms",
        "sites",
    ])
    .map_err(Error::from)?;
    for out in &outputs {
        for e in &out.results {
            let row = match (&e.report, &e.error) {
                (Some(r), _) => vec![
                    out.threshold_ms.to_string(),
                    e.index.to_string(),
                    "ok".into(),
                    r.storage_cost.to_string(),
                    r.migration_cost.to_string(),
                    r.serving_cost.to_string(),
                    r.total_cost().to_string(),
                    r.avg_delay_ms.to_string(),
                    r.decision
                        .allocated()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                ],
                (None, err) => vec![
                    out.threshold_ms.to_string(),
                    e.index.to_string(),
                    err.as_ref().map_or("error".into(), |e| e.kind.clone()),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            w.write_record(row).map_err(Error::from)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    say!(
        "solved {} instances at {} thresholds; wrote {}",
        instances.len(),
        outputs.len(),
        c.out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub periods: u32,
    pub predictor: String,
    pub thresholds: Vec<ThresholdSummary>,
}

fn cmd_simulate(c: &Common, input: &Inputs, a: &SimulateArgs) -> std::result::Result<(), Failure> {
    let trace = load_trace(&a.trace).map_err(usage)?;
    let source = if a.model == "oracle" {
        DemandSource::Oracle
    } else {
        DemandSource::Model(Box::new(
            ModelFile::load(Path::new(&a.model)).map_err(usage)?,
        ))
    };
    let cfg = SimConfig {
        periods: a.periods,
        thresholds_ms: input.thresholds.clone(),
        prices: input.prices.clone(),
        solve: SolveOptions::default(),
    };
    cfg.validate(input.regions.len()).map_err(usage)?;
    let started = Instant::now();
    let results = run_sweep(&trace, &source, &input.regions, &cfg)?;
    write_metrics_csv(&c.out_dir.join("metrics.csv"), &results)?;

    let mut gaps = Vec::new();
    if trace.records.iter().all(|r| r.actual_viewers.is_some()) {
        for r in &results {
            gaps.extend(latency_gap_report(r, &trace, &input.regions)?);
        }
        write_latency_csv(&c.out_dir.join("latency_gap.csv"), &gaps)?;
    }
    let summary = SimulationSummary {
        periods: a.periods,
        predictor: a.model.clone(),
        thresholds: results.iter().map(ThresholdSummary::from_result).collect(),
    };
    write_json(&c.out_dir.join("summary.json"), &summary)?;

    say!(
        "{:>10} {:>14} {:>10} {:>12} {:>12} {:>10}",
        "D (ms)",
        "total cost",
        "hits %",
        "pred ms",
        "actual ms",
        "infeasible"
    );
    for s in &summary.thresholds {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        say!(
            "{:>10} {:>14.6} {:>10} {:>12} {:>12} {:>10}",
            s.threshold_ms,
            s.system_total_cost,
            f(s.mean_hits_pct),
            f(s.max_pred_latency_ms),
            f(s.max_actual_latency_ms),
            s.infeasible_videos
        );
    }
    let over = gaps.iter().filter(|g| g.exceeded).count();
    eprintln!(
        "simulated {} periods x {} thresholds in {:.2?}; {over} period(s) with actual latency above threshold",
        a.periods,
        results.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_oracle_check(c: &Common, a: &OracleCheckArgs) -> std::result::Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let started = Instant::now();
    let mut mismatches = 0;
    let mut infeasible = 0;
    for i in 0..a.instances {
        let case = optimizer::random_case(&mut rng, a.max_regions, a.max_viewer_regions);
        match optimizer::compare_with_brute_force(&case) {
            Ok(outcome) => infeasible += usize::from(outcome.infeasible),
            Err(msg) => {
                mismatches += 1;
                eprintln!("instance {i}: {msg}");
            }
        }
    }
    say!(
        "{} instances, {} infeasible, {} mismatches, {:.2?}",
        a.instances,
        infeasible,
        mismatches,
        started.elapsed()
    );
    if mismatches > 0 {
        return Err(
            Error::InvalidDecision(format!("{mismatches} solver/oracle mismatches")).into(),
        );
    }
    Ok(())
}
