//! End-to-end forecasting experiments on best-track data.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Trajectory;
use crate::forecast::{
    forecast_all, mae_intensity, mae_track, tune, ForecastConfig, ForecastReport, TuneResult, EARTH_RADIUS_MI,
    EARTH_RADIUS_NMI,
};
use crate::hurdat::{
    find, read_hurdat2, select_cohort, to_intensity_trajectory, to_track_trajectory, Cohort, Experiment,
    IngestFilter, ParseMode, StormRecord,
};
use crate::manifold::Manifold;
use crate::optim::SolverSettings;
use crate::ridge::{build_prior, Prior, DEFAULT_LOADING_REL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Positions on the sphere.
    Track,
    /// Maximum sustained wind on the real line.
    Intensity,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Track => "track",
            Target::Intensity => "intensity",
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            Target::Track => Manifold::Sphere,
            Target::Intensity => Manifold::euclidean(1),
        }
    }

    pub fn trajectory(&self, storm: &StormRecord, filter: &IngestFilter) -> Result<Trajectory> {
        match self {
            Target::Track => to_track_trajectory(storm, filter),
            Target::Intensity => to_intensity_trajectory(storm, filter),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MileUnit {
    Statute,
    Nautical,
}

impl MileUnit {
    pub fn earth_radius(&self) -> f64 {
        match self {
            MileUnit::Statute => EARTH_RADIUS_MI,
            MileUnit::Nautical => EARTH_RADIUS_NMI,
        }
    }
}

/// Which storms play which role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortSpec {
    Preset(Experiment),
    /// All eligible storms of the listed years, per role.
    Years {
        prior: Vec<i32>,
        validation: Vec<i32>,
        test: Vec<i32>,
    },
}

impl CohortSpec {
    pub fn label(&self) -> String {
        match self {
            CohortSpec::Preset(e) => e.name().to_string(),
            CohortSpec::Years { prior, test, .. } => format!("years {prior:?} -> {test:?}"),
        }
    }

    pub fn resolve(&self, records: &[StormRecord], filter: &IngestFilter) -> Result<Cohort> {
        match self {
            CohortSpec::Preset(e) => select_cohort(records, filter, *e),
            CohortSpec::Years { prior, validation, test } => {
                let pick = |years: &[i32]| -> Vec<String> {
                    let f = filter.clone().with_years(years.iter().copied());
                    let mut s: Vec<&StormRecord> = records.iter().filter(|r| f.accepts(r)).collect();
                    s.sort_by_key(|r| (r.start(), r.id.clone()));
                    s.iter().map(|r| r.id.clone()).collect()
                };
                let c = Cohort {
                    experiment: Experiment::Exp1,
                    prior: pick(prior),
                    validation: pick(validation),
                    test: pick(test),
                };
                if c.prior.len() < 2 || c.validation.is_empty() || c.test.is_empty() {
                    return Err(Error::InsufficientData(format!(
                        "custom cohort too small (prior {}, validation {}, test {})",
                        c.prior.len(),
                        c.validation.len(),
                        c.test.len()
                    )));
                }
                Ok(c)
            }
        }
    }
}

/// Fully resolved description of an experiment run, echoed into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: PathBuf,
    pub parse_mode: ParseMode,
    pub cohort: CohortSpec,
    pub filter: IngestFilter,
    pub targets: Vec<Target>,
    pub forecast: ForecastConfig,
    /// Pick `(λ, α)` on the validation set; otherwise use `forecast.lambda` and `forecast.alpha`.
    pub tune: bool,
    pub loading_rel: f64,
    pub solver: SolverSettings,
    pub miles: MileUnit,
    /// Output directory; not part of the echoed configuration.
    #[serde(skip)]
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn new(data: PathBuf, experiment: Experiment) -> Self {
        ExperimentSpec {
            data,
            parse_mode: ParseMode::Strict,
            cohort: CohortSpec::Preset(experiment),
            filter: IngestFilter::default(),
            targets: vec![Target::Track, Target::Intensity],
            forecast: ForecastConfig::default(),
            tune: true,
            loading_rel: DEFAULT_LOADING_REL,
            solver: SolverSettings::default(),
            miles: MileUnit::Statute,
            out: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.forecast.validate()?;
        self.solver.validate()?;
        if self.targets.is_empty() {
            return Err(Error::InvalidArgument("no forecast target selected".into()));
        }
        if !(self.loading_rel >= 0.0 && self.loading_rel.is_finite()) {
            return Err(Error::InvalidArgument(format!("loading must be non-negative, got {}", self.loading_rel)));
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("experiment spec serializes")
    }
}

pub fn load_records(spec: &ExperimentSpec) -> Result<Vec<StormRecord>> {
    if !spec.data.exists() {
        return Err(Error::NotFound(format!("dataset {} does not exist", spec.data.display())));
    }
    let out = read_hurdat2(&spec.data, spec.parse_mode)?;
    if !out.skipped.is_empty() {
        log::warn!("{} storms skipped while parsing", out.skipped.len());
    }
    Ok(out.records)
}

/// Trajectories of the listed storms, in list order.
pub fn trajectories(records: &[StormRecord], ids: &[String], target: Target, filter: &IngestFilter) -> Result<Vec<Trajectory>> {
    ids.iter().map(|id| target.trajectory(find(records, id)?, filter)).collect()
}

/// Prior for one target from the cohort's prior storms.
pub fn cohort_prior(spec: &ExperimentSpec, records: &[StormRecord], cohort: &Cohort, target: Target) -> Result<Prior> {
    let trajs = trajectories(records, &cohort.prior, target, &spec.filter)?;
    build_prior(&target.manifold(), &trajs, spec.forecast.n, spec.loading_rel, &spec.solver)
        .map_err(|e| e.context(format!("building the {} prior", target.name())))
}

#[derive(Clone, Debug)]
pub struct TargetOutcome {
    pub target: Target,
    pub prior: Prior,
    pub tuning: Option<TuneResult>,
    pub lambda: f64,
    pub alpha: f64,
    pub reports: Vec<ForecastReport>,
    /// Miles for tracks, knots for intensities.
    pub mae: f64,
    pub seconds: f64,
}

impl TargetOutcome {
    /// Wall time of every individual forecast.
    pub fn forecast_seconds(&self) -> Vec<f64> {
        self.reports.iter().flat_map(|r| r.steps.iter().map(|s| s.seconds)).collect()
    }
}

/// Builds the prior, tunes on the validation storms and forecasts the test storms.
pub fn run_target(spec: &ExperimentSpec, records: &[StormRecord], cohort: &Cohort, target: Target) -> Result<TargetOutcome> {
    let started = Instant::now();
    let prior = cohort_prior(spec, records, cohort, target)?;
    let mut cfg = spec.forecast.clone();
    let tuning = if spec.tune {
        let validation = trajectories(records, &cohort.validation, target, &spec.filter)?;
        let t = tune(&prior, &cfg, &validation, &spec.solver).map_err(|e| e.context(format!("tuning {}", target.name())))?;
        log::info!("{}: λ = {}, α = {}, residual {:.6}", target.name(), t.lambda, t.alpha, t.residual);
        cfg.lambda = t.lambda;
        cfg.alpha = t.alpha;
        Some(t)
    } else {
        None
    };
    let test = trajectories(records, &cohort.test, target, &spec.filter)?;
    let reports = forecast_all(&prior, &cfg, &test, &spec.solver)?;
    let mae = match target {
        Target::Track => mae_track(&reports, spec.miles.earth_radius())?,
        Target::Intensity => mae_intensity(&reports)?,
    };
    Ok(TargetOutcome {
        target,
        prior,
        tuning,
        lambda: cfg.lambda,
        alpha: cfg.alpha,
        reports,
        mae,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub label: String,
    pub cohort: Cohort,
    pub targets: Vec<TargetOutcome>,
}

impl EvalOutcome {
    pub fn target(&self, t: Target) -> Option<&TargetOutcome> {
        self.targets.iter().find(|o| o.target == t)
    }
}

pub fn evaluate(spec: &ExperimentSpec, records: &[StormRecord]) -> Result<EvalOutcome> {
    spec.validate()?;
    let cohort = spec.cohort.resolve(records, &spec.filter)?;
    let targets = spec
        .targets
        .iter()
        .map(|t| run_target(spec, records, &cohort, *t))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalOutcome {
        label: spec.cohort.label(),
        cohort,
        targets,
    })
}

/// Summary table with one row per outcome, values to one decimal.
pub fn summary_table(outcomes: &[EvalOutcome], miles: MileUnit) -> String {
    let unit = match miles {
        MileUnit::Statute => "mi",
        MileUnit::Nautical => "nmi",
    };
    let mut s = format!("{:<12} {:>20} {:>18}\n", "experiment", "intensity MAE (kt)", format!("track MAE ({unit})"));
    let cell = |o: &EvalOutcome, t: Target| o.target(t).map_or("-".to_string(), |x| format!("{:.1}", x.mae));
    for o in outcomes {
        s.push_str(&format!(
            "{:<12} {:>20} {:>18}\n",
            o.label,
            cell(o, Target::Intensity),
            cell(o, Target::Track)
        ));
    }
    s
}
