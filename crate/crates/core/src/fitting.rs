//! Least-squares Bézier regression on manifolds.

use crate::bezier::{check_count, initial_guess, ControlTuple, Ladder};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, Tangent};
use crate::optim::{descend_tolerant, steepest_descent, SolverSettings, StopReason};

/// A time-stamped sequence of manifold samples.
///
/// `times` are the model parameters used for fitting; `raw_times` keep the
/// original timestamps (hours for storm data).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: Option<String>,
    times: Vec<f64>,
    raw_times: Vec<f64>,
    samples: Vec<Point>,
}

impl Trajectory {
    /// Builds a trajectory whose parameters are the raw times mapped affinely onto `[0, 1]`.
    pub fn new(raw_times: Vec<f64>, samples: Vec<Point>) -> Result<Self> {
        check_times(&raw_times, samples.len())?;
        let (t0, t1) = (raw_times[0], raw_times[raw_times.len() - 1]);
        let mut times: Vec<f64> = raw_times.iter().map(|r| (r - t0) / (t1 - t0)).collect();
        let last = times.len() - 1;
        times[0] = 0.0;
        times[last] = 1.0;
        Ok(Trajectory {
            id: None,
            times,
            raw_times,
            samples,
        })
    }

    /// Builds a trajectory with explicit model parameters.
    pub fn with_times(times: Vec<f64>, raw_times: Vec<f64>, samples: Vec<Point>) -> Result<Self> {
        check_times(&times, samples.len())?;
        check_times(&raw_times, samples.len())?;
        Ok(Trajectory {
            id: None,
            times,
            raw_times,
            samples,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn raw_times(&self) -> &[f64] {
        &self.raw_times
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn view(&self) -> SampleView<'_> {
        SampleView {
            times: &self.times,
            samples: &self.samples,
        }
    }

    fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| "<unnamed>".into())
    }
}

fn check_times(times: &[f64], count: usize) -> Result<()> {
    if times.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            found: times.len(),
        });
    }
    if count < 2 {
        return Err(Error::InsufficientData(format!("trajectory needs at least 2 samples, got {count}")));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Borrowed `(tᵢ, yᵢ)` pairs, possibly a prefix of a trajectory with a single sample.
#[derive(Clone, Copy, Debug)]
pub struct SampleView<'a> {
    pub times: &'a [f64],
    pub samples: &'a [Point],
}

impl<'a> SampleView<'a> {
    pub fn new(times: &'a [f64], samples: &'a [Point]) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                found: times.len(),
            });
        }
        if samples.is_empty() {
            return Err(Error::InsufficientData("no samples".into()));
        }
        Ok(SampleView { times, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub control: ControlTuple,
    pub h_min: f64,
    pub g_min: f64,
    /// `1 − h_min/g_min`; `1` when both vanish and `−∞` (undefined) when only `g_min` does.
    pub r_squared: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub stop: StopReason,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientTolerance
    }
}

/// Coefficient of determination with the degenerate cases spelled out.
pub fn r_squared(h_min: f64, g_min: f64) -> f64 {
    if g_min > 0.0 {
        1.0 - h_min / g_min
    } else if h_min == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Workspace for repeated evaluations of the least-squares objective on flat
/// control coordinates.
pub(crate) struct LeastSquares<'a> {
    m: &'a Manifold,
    n: usize,
    data: SampleView<'a>,
    ladder: Ladder,
    cot: Vec<f64>,
}

impl<'a> LeastSquares<'a> {
    pub(crate) fn new(m: &'a Manifold, n: usize, data: SampleView<'a>) -> Self {
        let k = m.ambient_dim();
        LeastSquares {
            m,
            n,
            data,
            ladder: Ladder::new(k, n),
            cot: vec![0.0; k],
        }
    }

    pub(crate) fn value(&mut self, control: &[f64]) -> Result<f64> {
        let mut h = 0.0;
        for (t, y) in self.data.times.iter().zip(self.data.samples) {
            self.ladder.eval(self.m, control, *t)?;
            h += self.m.sq_dist_slice(y.coords(), self.ladder.result());
        }
        Ok(h)
    }

    /// Riemannian gradient in ambient coordinates: the residual gradients
    /// `−2·log_p(y)` pulled back through the de Casteljau ladder.
    pub(crate) fn gradient(&mut self, control: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; control.len()];
        for (t, y) in self.data.times.iter().zip(self.data.samples) {
            self.ladder.eval(self.m, control, *t)?;
            let p = self.ladder.result().to_vec();
            self.m.log_slice(&p, y.coords(), &mut self.cot)?;
            self.cot.iter_mut().for_each(|c| *c *= -2.0);
            let g = self.cot.clone();
            self.ladder.pullback(self.m, *t, &g, &mut grad)?;
        }
        let power = Manifold::power(self.m.clone(), self.n);
        power.project_slice(control, &mut grad);
        Ok(grad)
    }
}

/// `H(b) = Σᵢ dist²(yᵢ, p(tᵢ; b))`.
pub fn objective_h(m: &Manifold, b: &ControlTuple, data: SampleView<'_>) -> Result<f64> {
    for p in b.points() {
        m.check_point(p)?;
    }
    LeastSquares::new(m, b.n(), data).value(b.to_power_point().coords())
}

/// Riemannian gradient of [`objective_h`] at `b` in `Mⁿ`.
pub fn gradient_h(m: &Manifold, b: &ControlTuple, data: SampleView<'_>) -> Result<Tangent> {
    for p in b.points() {
        m.check_point(p)?;
    }
    let x = b.to_power_point();
    let g = LeastSquares::new(m, b.n(), data).gradient(x.coords())?;
    Ok(Tangent::new(x, g))
}

/// Central finite differences of [`objective_h`] in the orthonormal chart of `Mⁿ` at `b`.
pub fn gradient_h_fd(m: &Manifold, b: &ControlTuple, data: SampleView<'_>, step: f64) -> Result<Tangent> {
    let power = Manifold::power(m.clone(), b.n());
    let x = b.to_power_point();
    let mut ls = LeastSquares::new(m, b.n(), data);
    finite_difference_gradient(&power, &x, |p| ls.value(p.coords()), step)
}

/// Central-difference gradient of a scalar function along an orthonormal tangent basis.
pub fn finite_difference_gradient(
    m: &Manifold,
    x: &Point,
    mut f: impl FnMut(&Point) -> Result<f64>,
    step: f64,
) -> Result<Tangent> {
    let basis = m.orthonormal_basis(x)?;
    let mut coords = Vec::with_capacity(basis.dim());
    for e in &basis.vectors {
        let plus = m.exp(x, &e.scaled(step))?;
        let minus = m.exp(x, &e.scaled(-step))?;
        coords.push((f(&plus)? - f(&minus)?) / (2.0 * step));
    }
    Ok(Tangent::new(x.clone(), basis.vector_from(&coords)))
}

/// `G(x) = Σᵢ dist²(yᵢ, x)`.
pub fn total_variance_g(m: &Manifold, points: &[Point], mean: &Point) -> Result<f64> {
    let mut g = 0.0;
    for p in points {
        let d = m.distance(p, mean)?;
        g += d * d;
    }
    Ok(g)
}

/// Fréchet mean: the minimizer of [`total_variance_g`], found by steepest descent
/// from the first point.
pub fn frechet_mean(m: &Manifold, points: &[Point], settings: &SolverSettings) -> Result<Point> {
    let first = points
        .first()
        .ok_or_else(|| Error::InsufficientData("Fréchet mean of an empty set".into()))?;
    for p in points {
        m.check_point(p)?;
    }
    let grad = |x: &Point| -> Result<Tangent> {
        let mut g = vec![0.0; x.len()];
        let mut v = vec![0.0; x.len()];
        for p in points {
            m.log_slice(x.coords(), p.coords(), &mut v)?;
            for (gi, vi) in g.iter_mut().zip(&v) {
                *gi -= 2.0 * vi;
            }
        }
        Ok(Tangent::new(x.clone(), g))
    };
    let out = steepest_descent(m, first, |x| total_variance_g(m, points, x), grad, settings).map_err(|e| match e {
        Error::LineSearch {
            iteration,
            grad_norm,
            last,
            ..
        } => Error::NonConvergence {
            iterations: iteration,
            grad_norm,
            last,
        },
        e => e,
    })?;
    if !out.converged() {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            last: out.point.into_coords(),
        });
    }
    Ok(out.point)
}

/// Best-fitting Bézier polynomial with `n` control points, started from the
/// geodesic initial guess.
pub fn fit(m: &Manifold, y: &Trajectory, n: usize, settings: &SolverSettings) -> Result<FitResult> {
    check_count(n)?;
    let label = y.label();
    let data = y.view();
    for p in data.samples {
        m.check_point(p).map_err(|e| e.context(format!("trajectory {label}")))?;
    }
    let start = initial_guess(m, &data.samples[0], &data.samples[data.len() - 1], n)
        .map_err(|e| e.context(format!("trajectory {label}")))?;
    let power = Manifold::power(m.clone(), n);
    let value_ls = std::cell::RefCell::new(LeastSquares::new(m, n, data));
    let out = descend_tolerant(
        &power,
        &start.to_power_point(),
        |x| value_ls.borrow_mut().value(x.coords()),
        |x| Ok(Tangent::new(x.clone(), value_ls.borrow_mut().gradient(x.coords())?)),
        settings,
    )
    .map_err(|e| e.context(format!("fitting trajectory {label}")))?;

    let mean = frechet_mean(m, data.samples, settings).map_err(|e| e.context(format!("mean of trajectory {label}")))?;
    let g_min = total_variance_g(m, data.samples, &mean)?;
    let h_min = out.value;
    Ok(FitResult {
        control: ControlTuple::from_power_point(&out.point, n)?,
        h_min,
        g_min,
        r_squared: r_squared(h_min, g_min),
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        stop: out.stop,
    })
}
