use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hallu_core::bounds::{hallucination_lower_bound, mc_verify_bound, BoundInputs, SpreadVariant};
use hallu_core::coinflip::{run_coinflip, CoinflipConfig};
use hallu_core::constructions::ConstructionFile;
use hallu_core::detector::embedding::EmbeddingMatrix;
use hallu_core::detector::{fit_detector, hallucination_rate_trace, DetectorBundle, DetectorConfig};
use hallu_core::regions::{region_plot_data, DensityRegion, GridSpec, HcdrLevel};
use hallu_core::report::{read_json, resolve_seed, write_json, ExitStatus, RunConfig, RunReport, SEED_ENV};
use hallu_core::rng::with_workers;
use hallu_core::{HalluError, LatentMixture, Result};

#[derive(Parser)]
#[command(name = "hallu", version, about = "Build, bound and detect δ-hallucinations")]
struct Cli {
    /// JSON config for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Overrides HALLU_SEED, which overrides the config's "seed".
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = current thread pool).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Run directory.
    #[arg(long, global = true, default_value = "hallu-run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and verify hallucinating-mixture witnesses.
    Construct {
        /// Construction spec (defaults to --config).
        spec: Option<PathBuf>,
    },
    /// Evaluate the hallucination-probability lower bound.
    Bound {
        /// Bound inputs (defaults to --config).
        spec: Option<PathBuf>,
        /// Monte Carlo check, e.g. `trials=100000`.
        #[arg(long, value_parser = parse_trials)]
        verify: Option<u64>,
        #[arg(long, value_enum)]
        d_variant: Option<DVariant>,
    },
    /// Coin-flip training run and two-latent verdict.
    Coinflip,
    #[command(subcommand)]
    Detector(DetectorCmd),
    #[command(subcommand)]
    Hdr(HdrCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum DVariant {
    Statement,
    Proof,
}

#[derive(Subcommand)]
enum DetectorCmd {
    /// Fit the pipeline and per-class mixtures, calibrate, and save a bundle.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Bundle directory (default: <out>/bundle).
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Recompute thresholds at a new percentile.
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        percentile: f64,
    },
    /// Score embeddings against a saved bundle.
    Detect {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Summarize a bundle; one rate-trace row per --checkpoint file.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// EMB1 or CSV embeddings.
    #[arg(long)]
    data: PathBuf,
    /// Manifest for EMB1 input (default: next to the data file).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HdrCmd {
    /// Grid CSV with marginal HDR, per-state and HCDR membership.
    PlotData {
        /// Mixture JSON (defaults to --config).
        mixture: Option<PathBuf>,
        /// Marginal HDR mass.
        #[arg(long, default_value_t = 0.5)]
        mass: f64,
        /// Per-state HDR mass for the HCDR.
        #[arg(long, conflicts_with = "delta")]
        state_mass: Option<f64>,
        /// Per-state density bound for the HCDR instead of a mass.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
    },
}

fn parse_trials(s: &str) -> std::result::Result<u64, String> {
    let v = s.strip_prefix("trials=").unwrap_or(s);
    match v.parse::<u64>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected trials=N with N > 0, got {s:?}")),
    }
}

/// Command result: JSON outputs, trace files written, and the exit status.
struct Outcome {
    outputs: Value,
    traces: Vec<String>,
    status: ExitStatus,
}

impl Outcome {
    fn ok(outputs: Value, traces: Vec<String>) -> Self {
        Self { outputs, traces, status: ExitStatus::Success }
    }
}

fn read_value(path: &Path) -> Result<Value> {
    read_json(path)
}

fn input_path(positional: &Option<PathBuf>, config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    positional
        .clone()
        .or_else(|| config.clone())
        .ok_or_else(|| HalluError::Input(format!("no {what} given (positional path or --config)")))
}

fn file_seed(v: &Value) -> Option<u64> {
    v.get("seed").and_then(Value::as_u64)
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Seed for commands whose randomness is optional; falls back to 0.
fn optional_seed(cli: &Cli, params: &Value) -> Result<u64> {
    resolve_seed(cli.seed, env_seed().as_deref(), Some(file_seed(params).unwrap_or(0)))
}

fn required_seed(cli: &Cli, params: &Value) -> Result<u64> {
    resolve_seed(cli.seed, env_seed().as_deref(), file_seed(params))
}

fn config_value(cli: &Cli) -> Result<Value> {
    match &cli.config {
        Some(p) => read_value(p),
        None => Ok(json!({})),
    }
}

fn name(cfg: &RunConfig, file: &str) -> String {
    cfg.path(file).display().to_string()
}

fn run(cli: &Cli) -> Result<ExitStatus> {
    let started = Instant::now();
    let (command, params, seed) = prepare(cli)?;
    let cfg = RunConfig::new(&command, params, seed, cli.workers, cli.out.clone())?;
    let outcome = with_workers(cli.workers, || dispatch(cli, &cfg))?;
    let report = RunReport::new(&cfg, outcome.outputs, outcome.traces, started.elapsed().as_millis());
    report.write(&cfg.path("report.json"))?;
    Ok(outcome.status)
}

/// Command label, recorded parameters and master seed.
fn prepare(cli: &Cli) -> Result<(String, Value, u64)> {
    Ok(match &cli.command {
        Command::Construct { spec } => {
            let v = read_value(&input_path(spec, &cli.config, "construction spec")?)?;
            let seed = optional_seed(cli, &v)?;
            ("construct".into(), v, seed)
        }
        Command::Bound { spec, verify, d_variant } => {
            let mut v = read_value(&input_path(spec, &cli.config, "bound inputs")?)?;
            if let (Some(dv), Some(obj)) = (d_variant, v.as_object_mut()) {
                let s = match dv {
                    DVariant::Statement => "statement",
                    DVariant::Proof => "proof",
                };
                obj.insert("d_variant".into(), json!(s));
            }
            let seed = if verify.is_some() { required_seed(cli, &v)? } else { optional_seed(cli, &v)? };
            let params = json!({ "inputs": v, "verify_trials": verify });
            ("bound".into(), params, seed)
        }
        Command::Coinflip => {
            let v = config_value(cli)?;
            let seed = required_seed(cli, &v)?;
            ("coinflip".into(), v, seed)
        }
        Command::Detector(sub) => {
            let v = config_value(cli)?;
            let (label, extra, seed) = match sub {
                DetectorCmd::Fit { data, .. } => {
                    ("detector fit", json!({ "data": data.data }), required_seed(cli, &v)?)
                }
                DetectorCmd::Calibrate { data, percentile, bundle } => (
                    "detector calibrate",
                    json!({ "data": data.data, "percentile": percentile, "bundle": bundle }),
                    optional_seed(cli, &v)?,
                ),
                DetectorCmd::Detect { data, bundle } => (
                    "detector detect",
                    json!({ "data": data.data, "bundle": bundle }),
                    optional_seed(cli, &v)?,
                ),
                DetectorCmd::Report { bundle, checkpoint } => (
                    "detector report",
                    json!({ "bundle": bundle, "checkpoints": checkpoint }),
                    optional_seed(cli, &v)?,
                ),
            };
            (label.into(), json!({ "config": v, "args": extra }), seed)
        }
        Command::Hdr(HdrCmd::PlotData { mixture, mass, state_mass, delta, cells }) => {
            let v = read_value(&input_path(mixture, &cli.config, "mixture")?)?;
            let seed = optional_seed(cli, &v)?;
            let params = json!({
                "mixture": v, "mass": mass, "state_mass": state_mass, "delta": delta, "cells": cells,
            });
            ("hdr plot-data".into(), params, seed)
        }
    })
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    match &cli.command {
        Command::Construct { .. } => cmd_construct(cfg),
        Command::Bound { verify, .. } => cmd_bound(cfg, *verify),
        Command::Coinflip => cmd_coinflip(cfg),
        Command::Detector(sub) => cmd_detector(cfg, sub),
        Command::Hdr(HdrCmd::PlotData { mass, state_mass, delta, cells, .. }) => {
            cmd_plot_data(cfg, *mass, *state_mass, *delta, *cells)
        }
    }
}

fn cmd_construct(cfg: &RunConfig) -> Result<Outcome> {
    let file: ConstructionFile = serde_json::from_value(cfg.params.clone())?;
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    let mut all_passed = true;
    for (i, spec) in file.specs().into_iter().enumerate() {
        for (j, report) in spec.run(Some(cfg.seed))?.into_iter().enumerate() {
            let file = format!("construction_{i}_{j}.json");
            write_json(&cfg.path(&file), &report)?;
            if !report.passed {
                eprintln!("construction {i}.{j} ({}) failed: densities {:?}", report.construction, report.per_state_density);
            }
            all_passed &= report.passed;
            summaries.push(json!({
                "file": file,
                "construction": report.construction,
                "passed": report.passed,
                "max_density": report.per_state_density.iter().cloned().fold(0.0, f64::max),
            }));
            traces.push(name(cfg, &file));
        }
    }
    let status = if all_passed { ExitStatus::Success } else { ExitStatus::Failed };
    Ok(Outcome { outputs: json!({ "all_passed": all_passed, "constructions": summaries }), traces, status })
}

fn cmd_bound(cfg: &RunConfig, verify: Option<u64>) -> Result<Outcome> {
    let inputs: BoundInputs = serde_json::from_value(cfg.params["inputs"].clone())?;
    let mut report = hallucination_lower_bound(&inputs)?;
    let mut status = ExitStatus::Success;
    if !report.all_feasible() {
        for (i, s) in report.states.iter().enumerate() {
            if !report.feasible[i] {
                eprintln!("state {i}: infeasible (σ = {}, d = {}, r_x = {}): {:?}", s.sigma_d, report.d, inputs.r_x, s.alpha);
            }
        }
        status = ExitStatus::Failed;
    } else if let Some(trials) = verify {
        let var = inputs
            .component_variance
            .ok_or_else(|| HalluError::Input("--verify needs \"component_variance\" in the bound inputs".into()))?;
        let mc = mc_verify_bound(&inputs, var, trials, cfg.seed, cfg.workers)?;
        let bound = report.product_bound.unwrap_or(0.0);
        if mc.hallucination.estimate < bound {
            eprintln!("verification frequency {} is below the bound {bound}", mc.hallucination.estimate);
            status = ExitStatus::Failed;
        }
        report.empirical = Some(mc);
    }
    if inputs.d_variant == SpreadVariant::Proof {
        eprintln!("using the product-form spread aggregate");
    }
    write_json(&cfg.path("bound.json"), &report)?;
    Ok(Outcome { outputs: serde_json::to_value(&report)?, traces: vec![name(cfg, "bound.json")], status })
}

fn cmd_coinflip(cfg: &RunConfig) -> Result<Outcome> {
    let conf: CoinflipConfig = serde_json::from_value(cfg.params.clone())?;
    let outcome = run_coinflip(&conf, cfg.seed)?;
    outcome.trace.write_csv(&cfg.path("trace.csv"))?;
    write_json(&cfg.path("verdict.json"), &outcome)?;
    Ok(Outcome::ok(serde_json::to_value(&outcome)?, vec![name(cfg, "trace.csv"), name(cfg, "verdict.json")]))
}

fn load_data(args: &DataArgs) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load_any(&args.data, args.manifest.as_deref())
}

fn rate_summary(report: &hallu_core::detector::DetectionReport) -> Value {
    let per_class: Vec<Value> = report
        .classes
        .iter()
        .enumerate()
        .map(|(c, name)| json!({ "class": name, "inside_rate": report.class_inside_rate(c) }))
        .collect();
    json!({
        "samples": report.samples.len(),
        "hallucination_rate": report.hallucination_rate,
        "per_class": per_class,
    })
}

fn cmd_detector(cfg: &RunConfig, sub: &DetectorCmd) -> Result<Outcome> {
    match sub {
        DetectorCmd::Fit { data, bundle } => {
            let conf: DetectorConfig = serde_json::from_value(strip_seed(&cfg.params["config"]))?;
            let matrix = load_data(data)?;
            let fitted = fit_detector(&matrix, &conf, cfg.seed)?;
            let dir = bundle.clone().unwrap_or_else(|| cfg.path("bundle"));
            fitted.save(&dir)?;
            let outputs = json!({
                "bundle": dir,
                "classes": fitted.classes,
                "pca_dim": fitted.pipeline.output_dim(),
                "thresholds": fitted.thresholds,
                "train_counts": fitted.manifest.train_counts,
                "calibration_counts": fitted.manifest.calibration_counts,
            });
            Ok(Outcome::ok(outputs, vec![]))
        }
        DetectorCmd::Calibrate { data, bundle, percentile } => {
            let mut b = DetectorBundle::load(bundle)?;
            b.recalibrate(&load_data(data)?, *percentile)?;
            b.save(bundle)?;
            Ok(Outcome::ok(json!({ "bundle": bundle, "thresholds": b.thresholds }), vec![]))
        }
        DetectorCmd::Detect { data, bundle } => {
            let b = DetectorBundle::load(bundle)?;
            let matrix = load_data(data)?;
            let rows: Vec<&[f64]> = matrix.rows.iter().map(Vec::as_slice).collect();
            let report = b.detect(&rows)?;
            report.write_csv(&cfg.path("detections.csv"))?;
            Ok(Outcome::ok(rate_summary(&report), vec![name(cfg, "detections.csv")]))
        }
        DetectorCmd::Report { bundle, checkpoint } => {
            let b = DetectorBundle::load(bundle)?;
            let mut reports = Vec::with_capacity(checkpoint.len());
            for path in checkpoint {
                let m = EmbeddingMatrix::load_any(path, None)?;
                let rows: Vec<&[f64]> = m.rows.iter().map(Vec::as_slice).collect();
                reports.push(b.detect(&rows)?);
            }
            let mut traces = vec![];
            if !reports.is_empty() {
                hallucination_rate_trace(&reports, &cfg.path("rate_trace.csv"))?;
                traces.push(name(cfg, "rate_trace.csv"));
            }
            let outputs = json!({
                "classes": b.classes,
                "seed": b.manifest.seed,
                "config_hash": b.manifest.config_hash,
                "pca_dim": b.pipeline.output_dim(),
                "explained_fraction": b.pipeline.explained_fraction,
                "thresholds": b.thresholds,
                "fit_iterations": b.manifest.fit_traces.iter().map(|t| t.log_likelihood.len()).collect::<Vec<_>>(),
                "checkpoints": reports.iter().map(rate_summary).collect::<Vec<_>>(),
            });
            Ok(Outcome::ok(outputs, traces))
        }
    }
}

fn strip_seed(v: &Value) -> Value {
    let mut v = v.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("seed");
    }
    v
}

fn cmd_plot_data(
    cfg: &RunConfig,
    mass: f64,
    state_mass: Option<f64>,
    delta: Option<f64>,
    cells: Option<usize>,
) -> Result<Outcome> {
    let mixture: LatentMixture = serde_json::from_value(strip_seed(&cfg.params["mixture"]))?;
    let n = mixture.n_states();
    let level = match delta {
        Some(d) => HcdrLevel::Density(vec![d; n]),
        None => HcdrLevel::Mass(vec![state_mass.unwrap_or(mass); n]),
    };
    let mut spec = GridSpec::for_dim(mixture.dim());
    if let Some(c) = cells {
        spec.cells_per_axis = c;
    }
    let data = region_plot_data(&mixture, mass, &level, &spec)?;
    let file = std::fs::File::create(cfg.path("plot_data.csv"))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    let mut outputs = json!({
        "marginal_threshold": data.marginal.threshold,
        "marginal_mass": data.marginal.achieved_mass,
        "cells": data.grid.len(),
    });
    if mixture.dim() == 1 {
        let DensityRegion::Grid(g) = &data.marginal.region else { unreachable!("grid method") };
        outputs["marginal_intervals"] = json!(g.intervals());
        outputs["hcdr_intervals"] = json!(flag_intervals(&data.grid, &data.hcdr));
    }
    Ok(Outcome::ok(outputs, vec![name(cfg, "plot_data.csv")]))
}

/// Maximal runs of flagged cells on a 1-D grid, as closed cell-edge intervals.
fn flag_intervals(grid: &hallu_core::regions::GridRegion, flags: &[bool]) -> Vec<(f64, f64)> {
    let axis = &grid.axes[0];
    let half = 0.5 * axis.width();
    let mut out = Vec::new();
    let mut start = None;
    for (k, f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((axis.center(s) - half, axis.center(k - 1) + half));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((axis.center(s) - half, axis.center(flags.len() - 1) + half));
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::from(&e).code() as u8)
        }
    }
}
