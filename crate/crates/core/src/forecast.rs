//! Iterative ridge forecasting with a geodesic blend step, grid tuning of
//! `(λ, α)` and track/intensity error metrics.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bezier::de_casteljau;
use crate::error::{Error, Result};
use crate::fitting::{SampleView, Trajectory};
use crate::manifold::{Manifold, Point};
use crate::optim::{SolverSettings, StopReason};
use crate::ridge::{minimize_f, Prior, RidgeStart};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MI: f64 = 3958.8;
/// Mean Earth radius in nautical miles.
pub const EARTH_RADIUS_NMI: f64 = 3440.065;

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.25, 0.5, 0.75, 1.0, 1.25];

/// Parameter scale for partial trajectories: sample `j` (0-based) sits at
/// `j / (m̂ − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// `m̂` is the mean sample count of the prior's members.
    PriorMean,
    /// Fixed `m̂`.
    SampleCount(f64),
}

impl TimeScale {
    pub fn resolve(&self, prior: &Prior) -> Result<f64> {
        let m_hat = match self {
            TimeScale::PriorMean => {
                if prior.members.is_empty() {
                    return Err(Error::InvalidArgument(
                        "prior has no members; set an explicit sample count for the time scale".into(),
                    ));
                }
                prior.mean_sample_count()
            }
            TimeScale::SampleCount(m) => *m,
        };
        if !(m_hat > 1.0 && m_hat.is_finite()) {
            return Err(Error::InvalidArgument(format!("time scale sample count must exceed 1, got {m_hat}")));
        }
        Ok(m_hat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub n: usize,
    /// First predicted index (1-based) at a one-step horizon. The first
    /// prediction uses `i0 − 1` known samples.
    pub i0: usize,
    /// Number of sampling steps between the last known sample and the target.
    pub horizon_steps: usize,
    pub time_scale: TimeScale,
    pub lambda_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            lambda: 1.0,
            alpha: 1.0,
            n: 6,
            i0: 2,
            horizon_steps: 2,
            time_scale: TimeScale::PriorMean,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        crate::bezier::check_count(self.n)?;
        if self.i0 < 2 {
            return bad(format!("i0 must be at least 2, got {}", self.i0));
        }
        if self.horizon_steps < 1 {
            return bad("horizon must be at least one step".into());
        }
        if let TimeScale::SampleCount(m) = self.time_scale {
            if !(m > 1.0 && m.is_finite()) {
                return bad(format!("time scale sample count must exceed 1, got {m}"));
            }
        }
        Ok(())
    }

    fn validate_grids(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::InvalidArgument("tuning grids must be non-empty".into()));
        }
        for l in &self.lambda_grid {
            if !(*l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda grid value {l} is not a non-negative number")));
            }
        }
        for a in &self.alpha_grid {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!("alpha grid value {a} is not a non-negative number")));
            }
        }
        Ok(())
    }

    fn check_prior(&self, prior: &Prior) -> Result<()> {
        if prior.n != self.n {
            return Err(Error::InvalidArgument(format!(
                "forecast uses n = {} but the prior has n = {}",
                self.n, prior.n
            )));
        }
        Ok(())
    }
}

/// Read access to a ground-truth trajectory during forecasting.
///
/// Forecasting reads known samples only through [`SampleSource::prefix`] and
/// reads targets only after every prediction of the trajectory is made.
pub trait SampleSource {
    fn id(&self) -> Option<&str>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// The first `k` samples.
    fn prefix(&self, k: usize) -> &[Point];
    /// Sample `i` (0-based), used to score a prediction.
    fn target(&self, i: usize) -> &Point;
    /// Original timestamp of sample `i`.
    fn raw_time(&self, i: usize) -> f64;
}

impl SampleSource for Trajectory {
    fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }
    fn len(&self) -> usize {
        Trajectory::len(self)
    }
    fn prefix(&self, k: usize) -> &[Point] {
        &self.samples()[..k]
    }
    fn target(&self, i: usize) -> &Point {
        &self.samples()[i]
    }
    fn raw_time(&self, i: usize) -> f64 {
        self.raw_times()[i]
    }
}

/// `exp_anchor(α·log_anchor raw)`; `α = 1` returns `raw` and `α = 0` returns `anchor` exactly.
pub fn blend(m: &Manifold, anchor: &Point, raw: &Point, alpha: f64) -> Result<Point> {
    if alpha == 1.0 {
        return Ok(raw.clone());
    }
    if alpha == 0.0 {
        return Ok(anchor.clone());
    }
    let v = m.log(anchor, raw)?;
    m.exp(anchor, &v.scaled(alpha))
}

#[derive(Clone, Debug)]
pub struct Prediction {
    /// Point of the regularized polynomial at the target time.
    pub raw: Point,
    /// Blended prediction.
    pub point: Point,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Minimizes `F` on the known samples, evaluates the curve at `t_next` and
/// blends towards the last known sample.
pub fn predict_step(
    prior: &Prior,
    cfg: &ForecastConfig,
    known: SampleView<'_>,
    t_next: f64,
    settings: &SolverSettings,
) -> Result<Prediction> {
    cfg.validate()?;
    cfg.check_prior(prior)?;
    let last = known.times[known.len() - 1];
    if !(t_next > last) {
        return Err(Error::InvalidArgument(format!(
            "prediction time {t_next} must follow the last known time {last}"
        )));
    }
    let (raw, iterations, stop) = solve_raw(prior, cfg.lambda, known, t_next, settings)?;
    let point = blend(&prior.base, &known.samples[known.len() - 1], &raw, cfg.alpha)?;
    Ok(Prediction {
        raw,
        point,
        iterations,
        stop,
    })
}

fn solve_raw(
    prior: &Prior,
    lambda: f64,
    known: SampleView<'_>,
    t_next: f64,
    settings: &SolverSettings,
) -> Result<(Point, usize, StopReason)> {
    let fit = minimize_f(prior, lambda, known, &RidgeStart::Mean, settings)?;
    let raw = de_casteljau(&prior.base, &fit.control, t_next)?;
    Ok((raw, fit.iterations, fit.stop))
}

/// One scored prediction.
#[derive(Clone, Debug)]
pub struct ForecastStep {
    /// Number of known samples used.
    pub known: usize,
    /// 0-based index of the predicted sample.
    pub target: usize,
    pub raw_time: f64,
    pub truth: Point,
    /// Outcome: the blended prediction and its distance from the truth.
    pub outcome: std::result::Result<(Point, f64), String>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub seconds: f64,
}

impl ForecastStep {
    pub fn prediction(&self) -> Option<&Point> {
        self.outcome.as_ref().ok().map(|(p, _)| p)
    }

    pub fn error(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(_, e)| *e)
    }
}

#[derive(Clone, Debug)]
pub struct ForecastReport {
    pub id: Option<String>,
    pub manifold: Manifold,
    pub lambda: f64,
    pub alpha: f64,
    pub n: usize,
    pub horizon_steps: usize,
    pub steps: Vec<ForecastStep>,
}

impl ForecastReport {
    /// Distances of the successful steps.
    pub fn errors(&self) -> Vec<f64> {
        self.steps.iter().filter_map(ForecastStep::error).collect()
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.outcome.is_err()).count()
    }

    /// Sum of squared step errors.
    pub fn residual(&self) -> f64 {
        self.errors().iter().map(|e| e * e).sum()
    }
}

/// Raw predictions of one trajectory for one `λ`, before blending.
struct RawRun {
    id: Option<String>,
    steps: Vec<RawStep>,
}

struct RawStep {
    known: usize,
    target: usize,
    raw_time: f64,
    anchor: Point,
    truth: Point,
    raw: std::result::Result<Point, String>,
    iterations: usize,
    stop: Option<StopReason>,
    seconds: f64,
}

/// Predicted steps as `(known count, 0-based target)` pairs.
fn schedule(cfg: &ForecastConfig, len: usize) -> Vec<(usize, usize)> {
    let first = cfg.i0 - 1;
    (first..)
        .map(|k| (k, k + cfg.horizon_steps - 1))
        .take_while(|(_, t)| *t < len)
        .collect()
}

fn raw_run<S: SampleSource + ?Sized>(
    prior: &Prior,
    cfg: &ForecastConfig,
    lambda: f64,
    m_hat: f64,
    truth: &S,
    settings: &SolverSettings,
) -> Result<RawRun> {
    let plan = schedule(cfg, truth.len());
    if plan.is_empty() {
        return Err(Error::InsufficientData(format!(
            "trajectory {} has {} samples; at least {} are needed",
            truth.id().unwrap_or("?"),
            truth.len(),
            cfg.i0 - 1 + cfg.horizon_steps
        )));
    }
    let scale = m_hat - 1.0;
    let all_times: Vec<f64> = (0..truth.len()).map(|j| j as f64 / scale).collect();
    let mut steps = Vec::with_capacity(plan.len());
    for &(k, target) in &plan {
        let known = truth.prefix(k);
        let started = Instant::now();
        let view = SampleView::new(&all_times[..k], known)?;
        let res = solve_raw(prior, lambda, view, all_times[target], settings);
        let seconds = started.elapsed().as_secs_f64();
        let (raw, iterations, stop) = match res {
            Ok((p, it, st)) => (Ok(p), it, Some(st)),
            Err(e) => {
                let msg = format!("step {target}: {e}");
                log::debug!("{}: {msg}", truth.id().unwrap_or("?"));
                (Err(msg), 0, None)
            }
        };
        steps.push(RawStep {
            known: k,
            target,
            raw_time: truth.raw_time(target),
            anchor: known[k - 1].clone(),
            truth: Point::new(Vec::new()),
            raw,
            iterations,
            stop,
            seconds,
        });
    }
    // targets are read only after every prediction exists
    for s in &mut steps {
        s.truth = truth.target(s.target).clone();
    }
    Ok(RawRun {
        id: truth.id().map(str::to_owned),
        steps,
    })
}

fn blend_run(m: &Manifold, run: &RawRun, alpha: f64) -> Vec<ForecastStep> {
    run.steps
        .iter()
        .map(|s| {
            let outcome = match &s.raw {
                Ok(raw) => blend(m, &s.anchor, raw, alpha)
                    .and_then(|p| {
                        let d = m.distance(&p, &s.truth)?;
                        Ok((p, d))
                    })
                    .map_err(|e| format!("step {}: {e}", s.target)),
                Err(msg) => Err(msg.clone()),
            };
            ForecastStep {
                known: s.known,
                target: s.target,
                raw_time: s.raw_time,
                truth: s.truth.clone(),
                outcome,
                iterations: s.iterations,
                stop: s.stop,
                seconds: s.seconds,
            }
        })
        .collect()
}

/// Forecasts every admissible step of `truth` with `cfg.lambda` and `cfg.alpha`.
///
/// The prediction of sample `k + h − 1` uses the first `k` samples, `h` being
/// the horizon. Failed steps are recorded in the report; the remaining steps
/// still run.
pub fn forecast_trajectory<S: SampleSource + ?Sized>(
    prior: &Prior,
    cfg: &ForecastConfig,
    truth: &S,
    settings: &SolverSettings,
) -> Result<ForecastReport> {
    cfg.validate()?;
    cfg.check_prior(prior)?;
    let m_hat = cfg.time_scale.resolve(prior)?;
    let run = raw_run(prior, cfg, cfg.lambda, m_hat, truth, settings)?;
    Ok(ForecastReport {
        id: run.id.clone(),
        manifold: prior.base.clone(),
        lambda: cfg.lambda,
        alpha: cfg.alpha,
        n: cfg.n,
        horizon_steps: cfg.horizon_steps,
        steps: blend_run(&prior.base, &run, cfg.alpha),
    })
}

/// Forecasts a batch of trajectories in parallel; reports keep input order.
pub fn forecast_all(
    prior: &Prior,
    cfg: &ForecastConfig,
    truths: &[Trajectory],
    settings: &SolverSettings,
) -> Result<Vec<ForecastReport>> {
    truths
        .par_iter()
        .map(|t| forecast_trajectory(prior, cfg, t, settings))
        .collect()
}

/// Residual of one grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub lambda: f64,
    pub alpha: f64,
    /// `Σ d²(ŷ, y)` over all steps, or the first failure.
    pub residual: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub alpha: f64,
    pub residual: f64,
    /// Every cell, λ-major in grid order.
    pub cells: Vec<GridCell>,
}

/// Grid search for the `(λ, α)` minimizing the summed squared validation error.
///
/// Each `λ` is solved once per step; all `α` reuse the raw predictions. A
/// cell fails if any of its steps fails. Ties go to the smallest `λ`, then
/// the smallest `α`.
pub fn tune(
    prior: &Prior,
    cfg: &ForecastConfig,
    validation: &[Trajectory],
    settings: &SolverSettings,
) -> Result<TuneResult> {
    cfg.validate()?;
    cfg.validate_grids()?;
    cfg.check_prior(prior)?;
    if validation.is_empty() {
        return Err(Error::InsufficientData("tuning needs at least one validation trajectory".into()));
    }
    let m_hat = cfg.time_scale.resolve(prior)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.lambda_grid.len())
        .flat_map(|l| (0..validation.len()).map(move |v| (l, v)))
        .collect();
    let runs: Vec<Result<RawRun>> = jobs
        .par_iter()
        .map(|&(l, v)| raw_run(prior, cfg, cfg.lambda_grid[l], m_hat, &validation[v], settings))
        .collect();

    let mut cells = Vec::with_capacity(cfg.lambda_grid.len() * cfg.alpha_grid.len());
    for (l, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let lambda_runs = &runs[l * validation.len()..(l + 1) * validation.len()];
        for &alpha in &cfg.alpha_grid {
            let residual = cell_residual(&prior.base, lambda_runs, alpha);
            cells.push(GridCell { lambda, alpha, residual });
        }
    }

    let best = cells
        .iter()
        .filter_map(|c| c.residual.as_ref().ok().map(|r| (c, *r)))
        .fold(None::<(&GridCell, f64)>, |acc, (c, r)| match acc {
            Some((bc, br)) if !better(c.lambda, c.alpha, r, bc.lambda, bc.alpha, br) => Some((bc, br)),
            _ => Some((c, r)),
        });
    match best {
        Some((c, r)) => Ok(TuneResult {
            lambda: c.lambda,
            alpha: c.alpha,
            residual: r,
            cells: cells.clone(),
        }),
        None => {
            let detail: Vec<String> = cells
                .iter()
                .map(|c| format!("(λ={}, α={}): {}", c.lambda, c.alpha, c.residual.as_ref().unwrap_err()))
                .collect();
            Err(Error::InsufficientData(format!("every grid cell failed: {}", detail.join("; "))))
        }
    }
}

fn better(l: f64, a: f64, r: f64, bl: f64, ba: f64, br: f64) -> bool {
    r < br || (r == br && (l < bl || (l == bl && a < ba)))
}

fn cell_residual(m: &Manifold, runs: &[Result<RawRun>], alpha: f64) -> std::result::Result<f64, String> {
    let mut total = 0.0;
    for run in runs {
        let run = run.as_ref().map_err(|e| e.to_string())?;
        for step in blend_run(m, run, alpha) {
            match step.outcome {
                Ok((_, d)) => total += d * d,
                Err(msg) => return Err(format!("{}: {msg}", run.id.as_deref().unwrap_or("?"))),
            }
        }
    }
    Ok(total)
}

fn mean_error(reports: &[ForecastReport], expect: impl Fn(&Manifold) -> bool, what: &str) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in reports {
        if !expect(&r.manifold) {
            return Err(Error::InvalidArgument(format!(
                "{what} error needs {what} reports, got {}",
                r.manifold.name()
            )));
        }
        for e in r.errors() {
            sum += e;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData(format!("no scored {what} predictions")));
    }
    Ok(sum / count as f64)
}

/// Mean great-circle error over all scored steps, scaled by `radius`.
pub fn mae_track(reports: &[ForecastReport], radius: f64) -> Result<f64> {
    Ok(mean_error(reports, |m| *m == Manifold::Sphere, "track")? * radius)
}

/// Mean absolute intensity error over all scored steps, in the units of the samples.
pub fn mae_intensity(reports: &[ForecastReport]) -> Result<f64> {
    mean_error(reports, |m| *m == Manifold::euclidean(1), "intensity")
}
