//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 solver failure, 3 domain error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result, Stage};
use crate::experiment::{
    evaluate, load_records, summary_table, trajectories, CohortSpec, ExperimentSpec, MileUnit, Target,
};
use crate::export::{forecast_geojson, forecast_rows, sig17, write_forecast_csv, ExportFormat};
use crate::fitting::fit;
use crate::forecast::{forecast_all, tune, ForecastConfig, ForecastReport, TimeScale};
use crate::hurdat::{find, select_cohort, serialize_hurdat2, write_records_csv, Experiment, IngestFilter, ParseMode};
use crate::optim::SolverSettings;
use crate::ridge::{Prior, DEFAULT_LOADING_REL};

#[derive(Parser, Debug)]
#[command(name = "manifold-ridge", version, about = "Ridge-regularized Bézier regression and forecasting of storm tracks and intensities")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a dataset and write the normalized record dump and cohort manifests.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a Bézier polynomial to one storm.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        storm: String,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Build the prior from an experiment's prior cohort.
    Prior {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Grid-search (λ, α) on an experiment's validation cohort.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        forecast: ForecastArgs,
        /// Prior file from `prior`; built from the cohort when omitted.
        #[arg(long)]
        prior: Option<PathBuf>,
    },
    /// Forecast one storm or an experiment's test cohort with fixed (λ, α).
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        forecast: ForecastArgs,
        #[arg(long)]
        storm: Option<String>,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
        format: Vec<ExportFormat>,
    },
    /// Run an experiment end to end: prior, tuning, forecasts and error summary.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        forecast: ForecastArgs,
        /// Use --lambda and --alpha instead of tuning.
        #[arg(long)]
        no_tune: bool,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,geojson")]
        format: Vec<ExportFormat>,
    },
    /// Write a synthetic HURDAT2 file with 2020- and 2021-like seasons.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// HURDAT2 file.
    #[arg(long, env = "HURDAT2_PATH")]
    data: PathBuf,
    /// Abort on the first malformed storm (default).
    #[arg(long, overrides_with = "lenient")]
    strict: bool,
    /// Skip malformed storms with a warning.
    #[arg(long, overrides_with = "strict")]
    lenient: bool,
    #[arg(long, value_enum, default_value = "exp1")]
    experiment: Experiment,
    /// Minimum number of usable observations per storm.
    #[arg(long, default_value_t = 13)]
    min_samples: usize,
    /// Keep special (non-synoptic) observations.
    #[arg(long)]
    all_times: bool,
}

impl DataArgs {
    fn mode(&self) -> ParseMode {
        if self.lenient {
            ParseMode::Lenient
        } else {
            ParseMode::Strict
        }
    }

    fn filter(&self) -> IngestFilter {
        IngestFilter {
            min_samples: self.min_samples,
            synoptic_only: !self.all_times,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Track,
    Intensity,
    Both,
}

impl TargetArg {
    fn targets(self) -> Vec<Target> {
        match self {
            TargetArg::Track => vec![Target::Track],
            TargetArg::Intensity => vec![Target::Intensity],
            TargetArg::Both => vec![Target::Track, Target::Intensity],
        }
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Number of control points.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u16).range(2..=16))]
    n: u16,
    #[arg(long, value_enum, default_value = "both")]
    target: TargetArg,
    /// Diagonal loading relative to trace(Σ)/dim.
    #[arg(long, default_value_t = DEFAULT_LOADING_REL)]
    loading_rel: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Unit of track errors.
    #[arg(long, value_enum, default_value = "statute")]
    miles: MileUnit,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// First predicted index at a one-step horizon.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(2..))]
    i0: u16,
    /// 6-hour steps between the last known sample and the target.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(1..))]
    horizon_steps: u16,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1,1,10,100")]
    grid_lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.25")]
    grid_alpha: Vec<f64>,
    /// Sample count m̂ for the forecast time scale; the prior's mean length when omitted.
    #[arg(long)]
    time_scale_samples: Option<f64>,
}

impl ForecastArgs {
    fn config(&self, n: usize) -> ForecastConfig {
        ForecastConfig {
            lambda: self.lambda,
            alpha: self.alpha,
            n,
            i0: self.i0 as usize,
            horizon_steps: self.horizon_steps as usize,
            time_scale: self.time_scale_samples.map_or(TimeScale::PriorMean, TimeScale::SampleCount),
            lambda_grid: self.grid_lambda.clone(),
            alpha_grid: self.grid_alpha.clone(),
        }
    }
}

fn spec(data: &DataArgs, model: &ModelArgs, forecast: Option<&ForecastArgs>, tune: bool) -> ExperimentSpec {
    let n = model.n as usize;
    let mut s = ExperimentSpec::new(data.data.clone(), data.experiment);
    s.parse_mode = data.mode();
    s.cohort = CohortSpec::Preset(data.experiment);
    s.filter = data.filter();
    s.targets = model.target.targets();
    s.forecast = forecast.map_or_else(
        || ForecastConfig {
            n,
            ..Default::default()
        },
        |f| f.config(n),
    );
    s.tune = tune;
    s.loading_rel = model.loading_rel;
    s.solver = SolverSettings {
        max_iters: model.max_iters,
        grad_tol: model.grad_tol,
        ..Default::default()
    };
    s.miles = model.miles;
    s.out = model.out.clone();
    s
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let (code, stage) = match e.stage() {
                Stage::Input => (1, "input"),
                Stage::Solver => (2, "solver"),
                Stage::Domain => (3, "domain"),
            };
            eprintln!("error ({stage}): {e}");
            code
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest { data, out } => cmd_ingest(&data, &out),
        Command::Fit { data, storm, model } => cmd_fit(&data, &storm, &model),
        Command::Prior { data, model } => cmd_prior(&data, &model),
        Command::Tune {
            data,
            model,
            forecast,
            prior,
        } => cmd_tune(&data, &model, &forecast, prior.as_deref()),
        Command::Forecast {
            data,
            model,
            forecast,
            storm,
            prior,
            format,
        } => cmd_forecast(&data, &model, &forecast, storm.as_deref(), prior.as_deref(), &format),
        Command::Eval {
            data,
            model,
            forecast,
            no_tune,
            format,
        } => cmd_eval(&data, &model, &forecast, !no_tune, &format),
        Command::Synth { out, seed } => {
            let records = crate::synthetic::atlantic_2020_2021(seed);
            write_text(&out, &serialize_hurdat2(&records))?;
            println!("wrote {} synthetic storms to {}", records.len(), out.display());
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn cmd_ingest(data: &DataArgs, out: &Path) -> Result<()> {
    let mode = data.mode();
    let mut s = ExperimentSpec::new(data.data.clone(), data.experiment);
    s.parse_mode = mode;
    s.filter = data.filter();
    s.out = out.to_path_buf();
    let records = load_records(&s)?;
    fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf)?;
    write_text(&out.join("records.csv"), &String::from_utf8(buf).expect("csv is utf-8"))?;
    println!("{} storms parsed", records.len());
    for e in [Experiment::Exp1, Experiment::Exp2] {
        match select_cohort(&records, &s.filter, e) {
            Ok(c) => {
                write_json(&out.join(format!("cohort-{}.json", e.name())), &json!({ "config": s.to_json_value(), "cohort": c }))?;
                println!(
                    "{}: prior {}, validation {}, test {}",
                    e.name(),
                    c.prior.len(),
                    c.validation.len(),
                    c.test.len()
                );
            }
            Err(err) => println!("{}: {err}", e.name()),
        }
    }
    Ok(())
}

fn cmd_fit(data: &DataArgs, storm_id: &str, model: &ModelArgs) -> Result<()> {
    let s = spec(data, model, None, false);
    s.validate()?;
    let records = load_records(&s)?;
    let storm = find(&records, storm_id)?;
    for target in &s.targets {
        let tr = target.trajectory(storm, &s.filter)?;
        let res = fit(&target.manifold(), &tr, s.forecast.n, &s.solver)?;
        let control: Vec<Vec<String>> = res.control.points().iter().map(|p| p.coords().iter().map(|c| sig17(*c)).collect()).collect();
        let artifact = json!({
            "config": s.to_json_value(),
            "storm_id": storm.id,
            "target": target.name(),
            "n": s.forecast.n,
            "samples": tr.len(),
            "control_points": control,
            "r_squared": sig17(res.r_squared),
            "h_min": sig17(res.h_min),
            "g_min": sig17(res.g_min),
            "iterations": res.iterations,
            "grad_norm": sig17(res.grad_norm),
            "stop": res.stop,
        });
        write_json(&s.out.join(format!("fit-{}-{}.json", storm.id, target.name())), &artifact)?;
        println!(
            "{} {}: R² = {:.4} (n = {}, {} samples, {} iterations)",
            storm.id,
            target.name(),
            res.r_squared,
            s.forecast.n,
            tr.len(),
            res.iterations
        );
    }
    Ok(())
}

fn cmd_prior(data: &DataArgs, model: &ModelArgs) -> Result<()> {
    let s = spec(data, model, None, false);
    s.validate()?;
    let records = load_records(&s)?;
    let cohort = s.cohort.resolve(&records, &s.filter)?;
    for target in &s.targets {
        let prior = crate::experiment::cohort_prior(&s, &records, &cohort, *target)?;
        let path = s.out.join(format!("prior-{}.json", target.name()));
        write_text(&path, &(prior.to_json_with_config(&s.to_json_value())? + "\n"))?;
        println!(
            "{} prior: {} members, dim {}, loading {:.3e} -> {}",
            target.name(),
            prior.members.len(),
            prior.dim(),
            prior.loading,
            path.display()
        );
    }
    Ok(())
}

fn single_target(s: &ExperimentSpec, prior: Option<&Path>) -> Result<()> {
    if prior.is_some() && s.targets.len() != 1 {
        return Err(Error::InvalidArgument("--prior needs --target track or --target intensity".into()));
    }
    Ok(())
}

fn prior_for(s: &ExperimentSpec, records: &[crate::hurdat::StormRecord], cohort: &crate::hurdat::Cohort, target: Target, file: Option<&Path>) -> Result<Prior> {
    match file {
        Some(path) => {
            let p = Prior::load(path).map_err(|e| e.context(format!("loading prior {}", path.display())))?;
            if p.base != target.manifold() || p.n != s.forecast.n {
                return Err(Error::InvalidArgument(format!(
                    "prior {} is on {} with n = {}; the {} target needs {} with n = {}",
                    path.display(),
                    p.base.name(),
                    p.n,
                    target.name(),
                    target.manifold().name(),
                    s.forecast.n
                )));
            }
            Ok(p)
        }
        None => crate::experiment::cohort_prior(s, records, cohort, target),
    }
}

fn cmd_tune(data: &DataArgs, model: &ModelArgs, fa: &ForecastArgs, prior_file: Option<&Path>) -> Result<()> {
    let s = spec(data, model, Some(fa), true);
    s.validate()?;
    single_target(&s, prior_file)?;
    let records = load_records(&s)?;
    let cohort = s.cohort.resolve(&records, &s.filter)?;
    for target in &s.targets {
        let prior = prior_for(&s, &records, &cohort, *target, prior_file)?;
        let validation = trajectories(&records, &cohort.validation, *target, &s.filter)?;
        let res = tune(&prior, &s.forecast, &validation, &s.solver)?;
        let cells: Vec<Value> = res
            .cells
            .iter()
            .map(|c| match &c.residual {
                Ok(r) => json!({"lambda": c.lambda, "alpha": c.alpha, "residual": sig17(*r)}),
                Err(m) => json!({"lambda": c.lambda, "alpha": c.alpha, "failure": m}),
            })
            .collect();
        let artifact = json!({
            "config": s.to_json_value(),
            "target": target.name(),
            "lambda": res.lambda,
            "alpha": res.alpha,
            "residual": sig17(res.residual),
            "cells": cells,
        });
        write_json(&s.out.join(format!("tune-{}.json", target.name())), &artifact)?;
        println!("{}: λ = {}, α = {}, residual = {:.6e}", target.name(), res.lambda, res.alpha, res.residual);
    }
    Ok(())
}

fn write_forecasts(
    s: &ExperimentSpec,
    records: &[crate::hurdat::StormRecord],
    track: &[ForecastReport],
    intensity: &[ForecastReport],
    formats: &[ExportFormat],
) -> Result<()> {
    let config = s.to_json_value();
    for f in formats {
        match f {
            ExportFormat::Csv => {
                let rows = forecast_rows(records, &s.filter, track, intensity, s.miles.earth_radius())?;
                let mut buf = Vec::new();
                write_forecast_csv(&rows, &config, &mut buf)?;
                write_text(&s.out.join("forecast.csv"), &String::from_utf8(buf).expect("csv is utf-8"))?;
            }
            ExportFormat::Geojson => {
                if track.is_empty() {
                    log::warn!("GeoJSON export needs track forecasts; skipped");
                    continue;
                }
                write_json(&s.out.join("forecast.geojson"), &forecast_geojson(records, &s.filter, track, &config)?)?;
            }
        }
    }
    Ok(())
}

fn cmd_forecast(
    data: &DataArgs,
    model: &ModelArgs,
    fa: &ForecastArgs,
    storm: Option<&str>,
    prior_file: Option<&Path>,
    formats: &[ExportFormat],
) -> Result<()> {
    let s = spec(data, model, Some(fa), false);
    s.validate()?;
    single_target(&s, prior_file)?;
    let records = load_records(&s)?;
    let cohort = s.cohort.resolve(&records, &s.filter)?;
    let ids = match storm {
        Some(id) => vec![find(&records, id)?.id.clone()],
        None => cohort.test.clone(),
    };
    let mut track = Vec::new();
    let mut intensity = Vec::new();
    for target in &s.targets {
        let prior = prior_for(&s, &records, &cohort, *target, prior_file)?;
        let trajs = trajectories(&records, &ids, *target, &s.filter)?;
        let reports = forecast_all(&prior, &s.forecast, &trajs, &s.solver)?;
        let errors: Vec<f64> = reports.iter().flat_map(|r| r.errors()).collect();
        let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
        match target {
            Target::Track => {
                println!("track: {} forecasts, mean error {:.1} mi", errors.len(), mean * s.miles.earth_radius());
                track = reports;
            }
            Target::Intensity => {
                println!("intensity: {} forecasts, mean error {:.1} kt", errors.len(), mean);
                intensity = reports;
            }
        }
    }
    write_forecasts(&s, &records, &track, &intensity, formats)
}

fn cmd_eval(data: &DataArgs, model: &ModelArgs, fa: &ForecastArgs, tune: bool, formats: &[ExportFormat]) -> Result<()> {
    let s = spec(data, model, Some(fa), tune);
    let records = load_records(&s)?;
    let outcome = evaluate(&s, &records)?;
    let table = summary_table(std::slice::from_ref(&outcome), s.miles);
    print!("{table}");
    let mut tuning = serde_json::Map::new();
    for o in &outcome.targets {
        let secs = o.forecast_seconds();
        let worst = secs.iter().copied().fold(0.0, f64::max);
        let failed: usize = o.reports.iter().map(|r| r.failures()).sum();
        eprintln!(
            "{}: λ = {}, α = {}, {} forecasts ({} failed), {:.2} s total, slowest forecast {:.3} s",
            o.target.name(),
            o.lambda,
            o.alpha,
            secs.len(),
            failed,
            o.seconds,
            worst
        );
        tuning.insert(
            o.target.name().into(),
            json!({ "lambda": o.lambda, "alpha": o.alpha, "mae": sig17(o.mae), "tuning": o.tuning }),
        );
    }
    let track = outcome.target(Target::Track).map(|o| o.reports.clone()).unwrap_or_default();
    let intensity = outcome.target(Target::Intensity).map(|o| o.reports.clone()).unwrap_or_default();
    write_forecasts(&s, &records, &track, &intensity, formats)?;
    write_text(&s.out.join("summary.txt"), &table)?;
    write_json(&s.out.join("config.json"), &s.to_json_value())?;
    write_json(
        &s.out.join("eval.json"),
        &json!({ "config": s.to_json_value(), "cohort": outcome.cohort, "targets": tuning }),
    )?;
    Ok(())
}
