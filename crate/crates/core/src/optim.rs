//! Riemannian line-search descent with Armijo backtracking.
//!
//! Iterates `x ← exp_x(s·d)` along a descent direction `d`. With the
//! steepest-descent rules `d = −grad f(x)` and the trial step is either the
//! fixed `initial_step` or a Barzilai–Borwein estimate. The L-BFGS rule builds
//! `d` from the last few step and gradient differences. Tangent vectors are
//! carried between iterates by orthogonal projection. Backtracking shrinks
//! the trial step until the Armijo condition holds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{dot, Manifold, Point, Tangent};

/// Shrink steps tried before the line search gives up.
const MAX_BACKTRACKS: usize = 60;

/// Relative size of the rounding noise in objective values.
const NOISE: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Steepest descent; every line search starts from `initial_step`.
    Constant,
    /// Steepest descent; line searches after the first start from the Barzilai–Borwein step.
    BarzilaiBorwein,
    /// Limited-memory BFGS direction keeping `memory` curvature pairs.
    Lbfgs { memory: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
    pub step_rule: StepRule,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 500,
            grad_tol: 1e-6,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            initial_step: 1.0,
            step_rule: StepRule::Lbfgs { memory: 8 },
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver settings: {what}")));
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol must be non-negative");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return bad("armijo_slope must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if self.step_rule == (StepRule::Lbfgs { memory: 0 }) {
            return bad("L-BFGS memory must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The line search could not find an acceptable step.
    LineSearchStalled,
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective value at the start and after every accepted step.
    pub history: Vec<f64>,
}

impl SolverOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientTolerance
    }
}

/// Curvature pairs `(s, y, 1/⟨s, y⟩)` in the tangent space of the current iterate.
struct Memory {
    cap: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Memory {
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut a = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let ai = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= ai * yi);
            a.push(ai);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|c| *c *= gamma);
        }
        for ((s, y, rho), ai) in self.pairs.iter().zip(a.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (ai - b) * si);
        }
        q.iter_mut().for_each(|c| *c = -*c);
        q
    }

    fn transport(&mut self, manifold: &Manifold, to: &[f64]) {
        for (s, y, rho) in self.pairs.iter_mut() {
            manifold.project_slice(to, s);
            manifold.project_slice(to, y);
            *rho = 1.0 / dot(s, y);
        }
        self.pairs.retain(|(_, _, rho)| rho.is_finite() && *rho > 0.0);
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if self.pairs.len() == self.cap {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }
}

/// Minimizes `objective` over `manifold` starting from `start`.
///
/// Returns [`Error::LineSearch`] carrying the last iterate when no step can
/// be accepted, and an outcome with [`StopReason::MaxIterations`] when the
/// iteration budget runs out.
pub fn steepest_descent<F, G>(
    manifold: &Manifold,
    start: &Point,
    mut objective: F,
    mut gradient: G,
    settings: &SolverSettings,
) -> Result<SolverOutcome>
where
    F: FnMut(&Point) -> Result<f64>,
    G: FnMut(&Point) -> Result<Tangent>,
{
    settings.validate()?;
    let mut x = start.clone();
    let mut f = objective(&x)?;
    let mut g = gradient(&x)?.vec;
    let mut gnorm2 = dot(&g, &g);
    let mut history = vec![f];
    let mut trial = settings.initial_step;
    let mut memory = match settings.step_rule {
        StepRule::Lbfgs { memory } => Some(Memory {
            cap: memory,
            pairs: VecDeque::with_capacity(memory),
        }),
        _ => None,
    };
    let mut iter = 0;

    loop {
        let gnorm = gnorm2.sqrt();
        if gnorm <= settings.grad_tol {
            return Ok(done(x, f, gnorm, iter, StopReason::GradientTolerance, history));
        }
        if iter >= settings.max_iters {
            return Ok(done(x, f, gnorm, iter, StopReason::MaxIterations, history));
        }

        let mut d: Vec<f64> = match &memory {
            Some(mem) if !mem.pairs.is_empty() => mem.direction(&g),
            _ => g.iter().map(|c| -c).collect(),
        };
        manifold.project_slice(x.coords(), &mut d);
        let mut slope = dot(&g, &d);
        if !(slope < -1e-12 * gnorm * dot(&d, &d).sqrt()) {
            // not a descent direction: restart from the gradient
            if let Some(mem) = memory.as_mut() {
                mem.pairs.clear();
            }
            d = g.iter().map(|c| -c).collect();
            slope = -gnorm2;
            trial = settings.initial_step;
        }

        let mut step = trial;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let dir: Vec<f64> = d.iter().map(|c| step * c).collect();
            let mut y = vec![0.0; x.len()];
            manifold.exp_slice(x.coords(), &dir, &mut y);
            let y = Point::new(y);
            if let Ok(fy) = objective(&y) {
                let decrease = -settings.armijo_slope * step * slope;
                let noise = NOISE * f.abs().max(fy.abs());
                if decrease > noise {
                    if fy <= f - decrease {
                        accepted = Some((y, fy, None));
                        break;
                    }
                } else if fy <= f + noise {
                    // Below the rounding level the Armijo test is uninformative;
                    // accept a step that shrinks the gradient instead.
                    if let Ok(gy) = gradient(&y) {
                        if dot(&gy.vec, &gy.vec) < gnorm2 {
                            accepted = Some((y, fy, Some(gy.vec)));
                            break;
                        }
                    }
                }
            }
            step *= settings.armijo_shrink;
        }

        let Some((y, fy, gy)) = accepted else {
            return Err(Error::LineSearch {
                iteration: iter,
                step,
                value: f,
                grad_norm: gnorm,
                last: x.into_coords(),
            });
        };
        debug_assert!(fy <= f + NOISE * f.abs().max(fy.abs()));

        let gy = match gy {
            Some(v) => v,
            None => gradient(&y)?.vec,
        };
        let mut s: Vec<f64> = d.iter().map(|c| step * c).collect();
        let mut gprev = g.clone();
        manifold.project_slice(y.coords(), &mut s);
        manifold.project_slice(y.coords(), &mut gprev);
        let diff: Vec<f64> = gy.iter().zip(&gprev).map(|(a, b)| a - b).collect();
        trial = match settings.step_rule {
            StepRule::Constant => settings.initial_step,
            StepRule::BarzilaiBorwein => {
                let sy = dot(&s, &diff);
                let ss = dot(&s, &s);
                if sy > 0.0 && ss > 0.0 {
                    (ss / sy).clamp(1e-12, 1e12)
                } else {
                    settings.initial_step
                }
            }
            StepRule::Lbfgs { .. } => 1.0,
        };
        if let Some(mem) = memory.as_mut() {
            mem.transport(manifold, y.coords());
            mem.push(s, diff);
        }

        x = y;
        f = fy;
        g = gy;
        gnorm2 = dot(&g, &g);
        history.push(f);
        iter += 1;
    }
}

fn done(point: Point, value: f64, grad_norm: f64, iterations: usize, stop: StopReason, history: Vec<f64>) -> SolverOutcome {
    SolverOutcome {
        point,
        value,
        grad_norm,
        iterations,
        stop,
        history,
    }
}

/// Runs [`steepest_descent`] and turns a line-search failure into an
/// outcome stopped at the last iterate.
pub(crate) fn descend_tolerant<F, G>(
    manifold: &Manifold,
    start: &Point,
    mut objective: F,
    mut gradient: G,
    settings: &SolverSettings,
) -> Result<SolverOutcome>
where
    F: FnMut(&Point) -> Result<f64>,
    G: FnMut(&Point) -> Result<Tangent>,
{
    match steepest_descent(manifold, start, &mut objective, &mut gradient, settings) {
        Err(Error::LineSearch {
            iteration, last, ..
        }) => {
            let point = Point::new(last);
            let value = objective(&point)?;
            let grad_norm = gradient(&point)?.norm();
            Ok(SolverOutcome {
                point,
                value,
                grad_norm,
                iterations: iteration,
                stop: StopReason::LineSearchStalled,
                history: vec![value],
            })
        }
        other => other,
    }
}
