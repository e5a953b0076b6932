//! Ridge regression on manifolds: a Mahalanobis prior learned from fitted
//! control tuples and the regularized least-squares objective
//! `F(b) = H(b) + λ·d²_Mah(B, b)`.
//!
//! The covariance `Σ` of the prior lives in an orthonormal chart of the
//! tangent space at the mean `μ ∈ Mⁿ`. The Mahalanobis distance is
//! `d²(x) = cᵀ S c` where `c` are the chart coordinates of `Log_μ x` and
//! `S = (Σ + δI)⁻¹` is the loaded precision.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bezier::{check_count, initial_guess, ControlTuple};
use crate::error::{Error, Result};
use crate::fitting::{fit, frechet_mean, LeastSquares, SampleView, Trajectory};
use crate::manifold::{dot, ChartBasis, Manifold, Point, Tangent};
use crate::optim::{descend_tolerant, SolverSettings, StopReason};

/// Default relative diagonal loading.
pub const DEFAULT_LOADING_REL: f64 = 1e-6;

/// One fitted trajectory contributing to a prior.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorMember {
    pub id: String,
    pub sample_count: usize,
    pub control: ControlTuple,
}

/// Population model of control tuples.
#[derive(Clone, Debug)]
pub struct Prior {
    /// Manifold of a single sample; control tuples live in its `n`-th power.
    pub base: Manifold,
    pub n: usize,
    pub mu: Point,
    pub basis: ChartBasis,
    pub sigma: DMatrix<f64>,
    pub loading: f64,
    pub precision: DMatrix<f64>,
    /// Symmetric square root `W` of the precision.
    pub sqrt_precision: DMatrix<f64>,
    pub members: Vec<PriorMember>,
    // E·S·Eᵀ in ambient coordinates at μ
    ambient_precision: DMatrix<f64>,
}

impl Prior {
    /// Builds a prior from fitted members: Fréchet mean, covariance in the
    /// deterministic chart at the mean, and loaded precision.
    pub fn from_members(
        base: Manifold,
        n: usize,
        members: Vec<PriorMember>,
        loading_rel: f64,
        settings: &SolverSettings,
    ) -> Result<Prior> {
        check_count(n)?;
        if members.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a prior needs at least 2 members, got {}",
                members.len()
            )));
        }
        if !(loading_rel >= 0.0 && loading_rel.is_finite()) {
            return Err(Error::InvalidArgument(format!("loading_rel must be non-negative, got {loading_rel}")));
        }
        let power = Manifold::power(base.clone(), n);
        let points: Vec<Point> = members.iter().map(|m| m.control.to_power_point()).collect();
        let mu = frechet_mean(&power, &points, settings).map_err(|e| e.context("mean of prior members"))?;
        let basis = power.orthonormal_basis(&mu)?;
        let sigma = chart_covariance(&power, &mu, &basis, &points)?;
        let dim = basis.dim() as f64;
        let mut loading = loading_rel * sigma.trace() / dim;
        if loading == 0.0 {
            // zero scatter: fall back to absolute loading
            loading = loading_rel;
        }
        Prior::from_parts(base, n, mu, basis, sigma, loading, members)
    }

    /// Assembles a prior from an explicit mean, chart, covariance and loading.
    pub fn from_parts(
        base: Manifold,
        n: usize,
        mu: Point,
        basis: ChartBasis,
        sigma: DMatrix<f64>,
        loading: f64,
        members: Vec<PriorMember>,
    ) -> Result<Prior> {
        check_count(n)?;
        let power = Manifold::power(base.clone(), n);
        power.check_point(&mu)?;
        let dim = power.dim();
        if basis.dim() != dim || sigma.nrows() != dim || sigma.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: sigma.nrows(),
            });
        }
        let loaded = &sigma + DMatrix::identity(dim, dim) * loading;
        let eig = loaded.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::SingularCovariance(format!(
                "smallest eigenvalue of the loaded covariance is {min:e}; increase the loading"
            )));
        }
        let q = &eig.eigenvectors;
        let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let precision = symmetrize(q * inv * q.transpose());
        let sqrt_precision = symmetrize(q * inv_sqrt * q.transpose());
        let e = basis.matrix();
        let ambient_precision = &e * &precision * e.transpose();
        Ok(Prior {
            base,
            n,
            mu,
            basis,
            sigma,
            loading,
            precision,
            sqrt_precision,
            members,
            ambient_precision,
        })
    }

    /// The same prior expressed in another orthonormal chart at `μ`.
    pub fn rebased(&self, basis: ChartBasis) -> Result<Prior> {
        let change = self.basis.matrix().transpose() * basis.matrix();
        let sigma = change.transpose() * &self.sigma * &change;
        Prior::from_parts(
            self.base.clone(),
            self.n,
            self.mu.clone(),
            basis,
            symmetrize(sigma),
            self.loading,
            self.members.clone(),
        )
    }

    pub fn power(&self) -> Manifold {
        Manifold::power(self.base.clone(), self.n)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn mean_control(&self) -> ControlTuple {
        ControlTuple::from_power_point(&self.mu, self.n).expect("prior mean splits into n control points")
    }

    /// Average number of samples per member trajectory.
    pub fn mean_sample_count(&self) -> f64 {
        self.members.iter().map(|m| m.sample_count as f64).sum::<f64>() / self.members.len().max(1) as f64
    }

    /// Chart coordinates of `Log_μ x`.
    pub fn chart_coords(&self, x: &Point) -> Result<DVector<f64>> {
        let v = self.power().log(&self.mu, x)?;
        Ok(self.basis.coords_of(&v.vec))
    }

    fn log_mu(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; x.len()];
        self.power().log_slice(self.mu.coords(), x, &mut v)?;
        Ok(v)
    }

    fn sq_slice(&self, x: &[f64]) -> Result<f64> {
        let v = DVector::from_vec(self.log_mu(x)?);
        Ok(v.dot(&(&self.ambient_precision * &v)))
    }

    fn grad_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.log_mu(x)?;
        let w = &self.ambient_precision * DVector::from_column_slice(&v);
        let mut out = vec![0.0; x.len()];
        self.power().inverse_adjoint_dexp_slice(self.mu.coords(), &v, w.as_slice(), &mut out)?;
        out.iter_mut().for_each(|o| *o *= 2.0);
        Ok(out)
    }

    /// Serializes to the prior file format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PriorFile::from(self))?)
    }

    /// As [`Prior::to_json`] with the producing configuration embedded under `config`.
    pub fn to_json_with_config(&self, config: &serde_json::Value) -> Result<String> {
        let mut file = PriorFile::from(self);
        file.config = Some(config.clone());
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Prior> {
        let file: PriorFile = serde_json::from_str(text)?;
        file.into_prior()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Prior> {
        Prior::from_json(&std::fs::read_to_string(path)?)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `(1/(l−1))·Σⱼ cⱼcⱼᵀ` with `cⱼ` the chart coordinates of `Log_μ bʲ`.
fn chart_covariance(power: &Manifold, mu: &Point, basis: &ChartBasis, points: &[Point]) -> Result<DMatrix<f64>> {
    let dim = basis.dim();
    let mut sigma = DMatrix::zeros(dim, dim);
    for p in points {
        let c = basis.coords_of(&power.log(mu, p)?.vec);
        sigma += &c * c.transpose();
    }
    Ok(sigma / (points.len() - 1) as f64)
}

/// Fits every trajectory with `n` control points and builds the prior from
/// the resulting control tuples. Fits run in parallel.
pub fn build_prior(
    base: &Manifold,
    trajectories: &[Trajectory],
    n: usize,
    loading_rel: f64,
    settings: &SolverSettings,
) -> Result<Prior> {
    check_count(n)?;
    if trajectories.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a prior needs at least 2 trajectories, got {}",
            trajectories.len()
        )));
    }
    let fits: Vec<Result<PriorMember>> = trajectories
        .par_iter()
        .enumerate()
        .map(|(i, tr)| {
            let id = tr.id.clone().unwrap_or_else(|| format!("#{i}"));
            let res = fit(base, tr, n, settings).map_err(|e| e.context(format!("prior member {id}")))?;
            Ok(PriorMember {
                id,
                sample_count: tr.len(),
                control: res.control,
            })
        })
        .collect();
    let members = fits.into_iter().collect::<Result<Vec<_>>>()?;
    Prior::from_members(base.clone(), n, members, loading_rel, settings)
}

/// Squared Mahalanobis distance `g_μ(S·Log_μ x, Log_μ x)`.
pub fn mahalanobis_sq(prior: &Prior, x: &Point) -> Result<f64> {
    prior.power().check_point(x)?;
    prior.sq_slice(x.coords())
}

/// `F(b) = H(b) + λ·d²_Mah(B, b)`.
pub fn objective_f(prior: &Prior, lambda: f64, b: &ControlTuple, data: SampleView<'_>) -> Result<f64> {
    check_lambda(lambda)?;
    let x = b.to_power_point();
    prior.power().check_point(&x)?;
    let h = LeastSquares::new(&prior.base, prior.n, data).value(x.coords())?;
    Ok(h + lambda * prior.sq_slice(x.coords())?)
}

/// Gradient of the squared Mahalanobis distance, `2·(d_x Log_μ)*[S·Log_μ x]`.
///
/// `(d_x Log_μ)*` is the inverse adjoint of `dexp_μ` at `Log_μ x`. It
/// coincides with `dexp_μ` itself only when `S·Log_μ x` is radial (for
/// instance when `S` is a multiple of the identity) or the space is flat.
pub fn gradient_mahalanobis(prior: &Prior, x: &Point) -> Result<Tangent> {
    prior.power().check_point(x)?;
    Ok(Tangent::new(x.clone(), prior.grad_slice(x.coords())?))
}

/// Gradient of the squared Mahalanobis distance through
/// `k(x) = Exp_μ(W·Log_μ x)`: `−2·(d_x k)*(Log_{k(x)} μ)`.
///
/// `d_x Log_μ` is the inverse of `dexp_μ` at `Log_μ x`; its adjoint is
/// obtained by solving against the adjoint of `dexp_μ` in orthonormal charts.
/// On spheres `W·Log_μ x` must stay inside the injectivity radius, which is
/// a stronger requirement than [`gradient_mahalanobis`] has.
pub fn gradient_mahalanobis_alt(prior: &Prior, x: &Point) -> Result<Tangent> {
    let power = prior.power();
    power.check_point(x)?;
    let mu = prior.mu.coords();
    let e = prior.basis.matrix();
    let v = prior.log_mu(x.coords())?;
    let c = e.transpose() * DVector::from_column_slice(&v);
    let wv = &e * (&prior.sqrt_precision * c);

    let mut k = vec![0.0; mu.len()];
    power.exp_slice(mu, wv.as_slice(), &mut k);
    let mut r = vec![0.0; mu.len()];
    power.log_slice(&k, mu, &mut r)?;
    let grad_r: Vec<f64> = r.iter().map(|ri| -2.0 * ri).collect();

    // (dexp_μ at W·Log_μ x)*: T_k → T_μ
    let mut q = vec![0.0; mu.len()];
    power.adjoint_dexp_slice(mu, wv.as_slice(), &grad_r, &mut q)?;
    // Wᵀ in the chart at μ
    let qc = prior.sqrt_precision.transpose() * (e.transpose() * DVector::from_column_slice(&q));

    // (d_x Log_μ)* = (dexp_μ(v)*)⁻¹: solve A z = qc with A the chart matrix of dexp_μ(v)*.
    let at_x = power.orthonormal_basis(x)?;
    let dim = prior.dim();
    let mut a = DMatrix::zeros(dim, dim);
    let mut col = vec![0.0; mu.len()];
    for (j, ex) in at_x.vectors.iter().enumerate() {
        power.adjoint_dexp_slice(mu, &v, &ex.vec, &mut col)?;
        for i in 0..dim {
            a[(i, j)] = dot(&prior.basis.vectors[i].vec, &col);
        }
    }
    let z = a
        .lu()
        .solve(&qc)
        .ok_or_else(|| Error::CutLocus("differential of the exponential map is singular".into()))?;
    Ok(Tangent::new(x.clone(), at_x.vector_from(z.as_slice())))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge parameter must be non-negative, got {lambda}")));
    }
    Ok(())
}

/// Starting point for [`minimize_f`].
#[derive(Clone, Debug, Default)]
pub enum RidgeStart {
    /// The prior mean `μ`.
    #[default]
    Mean,
    /// Equally spaced points on the geodesic from the first to the last sample.
    InitialGuess,
    Given(ControlTuple),
}

#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub control: ControlTuple,
    pub f_min: f64,
    pub h_min: f64,
    pub mahalanobis_sq: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub stop: StopReason,
}

/// Largest control-point move, in radians, of one chart solve in [`minimize_f`].
const TRUST_RADIUS: f64 = 2.0;

/// Chart re-centerings allowed in one [`minimize_f`] call.
const MAX_RECENTER: usize = 50;

/// Minimizes `F = H + λ·d²_Mah` over `Mⁿ`.
///
/// The search runs in exponential charts `x = Exp_c(E·u)` centered at the
/// current iterate `c`, with `E` an orthonormal frame at `c`. Chart
/// coordinates are whitened with the Cholesky factor of
/// `Q = 2·Eᵀ(XᵀX ⊗ I)E + 2λ·EᵀSE`, the Hessian of `F` when the base is flat
/// and the chart is centered at `μ`, so flat problems are perfectly
/// conditioned and curved ones nearly so. A chart solve may move each
/// control point at most [`TRUST_RADIUS`]; solves that end on that boundary
/// are restarted from a chart at the new point. `settings.grad_tol` applies
/// to the whitened gradient, whose squared norm estimates twice the
/// remaining decrease of `F`; the reported `grad_norm` is the Riemannian one.
/// If the chart solves stop short of the tolerance, the remaining iteration
/// budget goes to plain Riemannian descent on `Mⁿ`, stopping on the
/// Riemannian gradient norm.
///
/// `data` may hold a single sample; the regularizer then selects among
/// the interpolating curves.
pub fn minimize_f(
    prior: &Prior,
    lambda: f64,
    data: SampleView<'_>,
    start: &RidgeStart,
    settings: &SolverSettings,
) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    settings.validate()?;
    let power = prior.power();
    let mut center = match start {
        RidgeStart::Mean => prior.mu.clone(),
        RidgeStart::InitialGuess => {
            initial_guess(&prior.base, &data.samples[0], &data.samples[data.len() - 1], prior.n)?.to_power_point()
        }
        RidgeStart::Given(b) => {
            if b.n() != prior.n {
                return Err(Error::InvalidArgument(format!("start has {} control points, prior has {}", b.n(), prior.n)));
            }
            b.to_power_point()
        }
    };
    let dim = prior.dim();
    let gram = gram_kron(&data, prior.n, prior.base.ambient_dim());
    let per = prior.base.ambient_dim();
    let curved = prior.base == Manifold::Sphere;
    let ls = std::cell::RefCell::new(LeastSquares::new(&prior.base, prior.n, data));
    let objective = |x: &[f64]| -> Result<f64> { Ok(ls.borrow_mut().value(x)? + lambda * prior.sq_slice(x)?) };
    let gradient = |x: &[f64]| -> Result<Vec<f64>> {
        let mut g = ls.borrow_mut().gradient(x)?;
        if lambda > 0.0 {
            let gm = prior.grad_slice(x)?;
            g.iter_mut().zip(&gm).for_each(|(a, b)| *a += lambda * b);
        }
        Ok(g)
    };

    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    for _ in 0..MAX_RECENTER {
        let e = power.orthonormal_basis(&center)?.matrix();
        let q = symmetrize((e.transpose() * &gram * &e + e.transpose() * &prior.ambient_precision * &e * lambda) * 2.0);
        let jitter = 1e-10 * (q.trace() / dim as f64).max(f64::MIN_POSITIVE);
        let chol = (q + DMatrix::identity(dim, dim) * jitter)
            .cholesky()
            .ok_or_else(|| Error::SingularCovariance("ridge preconditioner is not positive definite".into()))?;
        let l = chol.l();
        let lt = l.transpose();
        let c0 = center.coords();
        // chart coordinates → ambient tangent at the center
        let tangent = |z: &[f64]| -> Vec<f64> {
            let u = lt.solve_upper_triangular(&DVector::from_column_slice(z)).expect("Cholesky factor is invertible");
            (&e * u).as_slice().to_vec()
        };
        let reach = |v: &[f64]| -> f64 {
            if curved {
                v.chunks(per).map(|c| dot(c, c).sqrt()).fold(0.0, f64::max)
            } else {
                0.0
            }
        };
        let point = |v: &[f64]| -> Result<Vec<f64>> {
            let r = reach(v);
            if r > TRUST_RADIUS {
                return Err(Error::CutLocus(format!("chart step of {r:.3} rad exceeds the trust radius")));
            }
            let mut x = vec![0.0; c0.len()];
            power.exp_slice(c0, v, &mut x);
            Ok(x)
        };

        let inner = SolverSettings {
            max_iters: settings.max_iters - iterations,
            ..settings.clone()
        };
        let out = descend_tolerant(
            &Manifold::euclidean(dim),
            &Point::new(vec![0.0; dim]),
            |z| objective(&point(&tangent(z.coords()))?),
            |z| {
                let v = tangent(z.coords());
                let gx = gradient(&point(&v)?)?;
                let mut pulled = vec![0.0; gx.len()];
                power.adjoint_dexp_slice(c0, &v, &gx, &mut pulled)?;
                let gz = l
                    .solve_lower_triangular(&(e.transpose() * DVector::from_vec(pulled)))
                    .expect("Cholesky factor is invertible");
                Ok(Tangent::new(z.clone(), gz.as_slice().to_vec()))
            },
            &inner,
        )?;
        iterations += out.iterations;
        stop = out.stop;
        let v = tangent(out.point.coords());
        let moved = reach(&v);
        center = Point::new(point(&v)?);
        let on_boundary = moved > 0.9 * TRUST_RADIUS;
        if !on_boundary || stop == StopReason::MaxIterations || iterations >= settings.max_iters {
            break;
        }
    }

    let mut x = center;
    if stop != StopReason::GradientTolerance && iterations < settings.max_iters {
        // Far from the minimizer of a badly conditioned curved problem the
        // flat preconditioner can mislead; finish without a chart.
        let rest = SolverSettings {
            max_iters: settings.max_iters - iterations,
            ..settings.clone()
        };
        let polish = descend_tolerant(
            &power,
            &x,
            |p| objective(p.coords()),
            |p| Ok(Tangent::new(p.clone(), gradient(p.coords())?)),
            &rest,
        )?;
        iterations += polish.iterations;
        stop = polish.stop;
        x = polish.point;
    }
    let h_min = ls.borrow_mut().value(x.coords())?;
    let d2 = prior.sq_slice(x.coords())?;
    let g = gradient(x.coords())?;
    Ok(RidgeFit {
        control: ControlTuple::from_power_point(&x, prior.n)?,
        f_min: h_min + lambda * d2,
        h_min,
        mahalanobis_sq: d2,
        iterations,
        grad_norm: dot(&g, &g).sqrt(),
        stop,
    })
}

/// `XᵀX ⊗ I_k` in ambient control coordinates, with `X` the Bernstein design
/// matrix of the sample times.
fn gram_kron(data: &SampleView<'_>, n: usize, k: usize) -> DMatrix<f64> {
    let deg = n - 1;
    let binom: Vec<f64> = (0..n)
        .map(|j| (0..j).fold(1.0, |acc, i| acc * (deg - i) as f64 / (i + 1) as f64))
        .collect();
    let mut gram = DMatrix::zeros(n, n);
    for &t in data.times {
        let row: Vec<f64> = (0..n)
            .map(|j| binom[j] * t.powi(j as i32) * (1.0 - t).powi((deg - j) as i32))
            .collect();
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let mut out = DMatrix::zeros(n * k, n * k);
    for a in 0..n {
        for b in 0..n {
            for i in 0..k {
                out[(a * k + i, b * k + i)] = gram[(a, b)];
            }
        }
    }
    out
}

/// Floating-point number written with 17 significant digits.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(transparent)]
pub(crate) struct Exact(pub(crate) f64);

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text = format!("{:.16e}", self.0);
        let num: serde_json::Number = text.parse().map_err(serde::ser::Error::custom)?;
        num.serialize(s)
    }
}

fn exact(v: &[f64]) -> Vec<Exact> {
    v.iter().copied().map(Exact).collect()
}

fn plain(v: &[Exact]) -> Vec<f64> {
    v.iter().map(|e| e.0).collect()
}

pub const PRIOR_FORMAT: &str = "manifold-ridge/prior";

#[derive(Serialize, Deserialize)]
struct PriorFile {
    format: String,
    version: u32,
    manifold: Manifold,
    n: usize,
    dim: usize,
    mu: Vec<Exact>,
    basis: Vec<Vec<Exact>>,
    sigma: Vec<Vec<Exact>>,
    loading: Exact,
    members: Vec<MemberFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct MemberFile {
    id: String,
    sample_count: usize,
    control: Vec<Exact>,
}

impl From<&Prior> for PriorFile {
    fn from(p: &Prior) -> Self {
        PriorFile {
            format: PRIOR_FORMAT.into(),
            version: 1,
            manifold: p.base.clone(),
            n: p.n,
            dim: p.dim(),
            mu: exact(p.mu.coords()),
            basis: p.basis.vectors.iter().map(|e| exact(&e.vec)).collect(),
            sigma: p.sigma.row_iter().map(|r| r.iter().copied().map(Exact).collect()).collect(),
            loading: Exact(p.loading),
            members: p
                .members
                .iter()
                .map(|m| MemberFile {
                    id: m.id.clone(),
                    sample_count: m.sample_count,
                    control: exact(m.control.to_power_point().coords()),
                })
                .collect(),
            config: None,
        }
    }
}

impl PriorFile {
    fn into_prior(self) -> Result<Prior> {
        if self.format != PRIOR_FORMAT {
            return Err(Error::InvalidArgument(format!("not a prior file: format {:?}", self.format)));
        }
        let mu = Point::new(plain(&self.mu));
        let basis = ChartBasis {
            base: mu.clone(),
            vectors: self.basis.iter().map(|v| Tangent::new(mu.clone(), plain(v))).collect(),
        };
        if self.sigma.len() != self.dim || self.sigma.iter().any(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.sigma.len(),
            });
        }
        let sigma = DMatrix::from_fn(self.dim, self.dim, |i, j| self.sigma[i][j].0);
        let members = self
            .members
            .iter()
            .map(|m| {
                Ok(PriorMember {
                    id: m.id.clone(),
                    sample_count: m.sample_count,
                    control: ControlTuple::from_power_point(&Point::new(plain(&m.control)), self.n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Prior::from_parts(self.manifold, self.n, mu, basis, sigma, self.loading.0, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    fn member(id: &str, pts: &[&[f64]]) -> PriorMember {
        PriorMember {
            id: id.into(),
            sample_count: 10,
            control: ControlTuple::new(pts.iter().map(|c| p(c)).collect()).unwrap(),
        }
    }

    #[test]
    fn symmetric_pair_covariance() {
        // μ = (0, 0) in ℝ¹ × ℝ¹, members ±u with u = (1, 2): Σ = 2uuᵀ
        let members = vec![member("a", &[&[1.0], &[2.0]]), member("b", &[&[-1.0], &[-2.0]])];
        let prior = Prior::from_members(Manifold::euclidean(1), 2, members, 1e-6, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(prior.mu.coords()[0], 0.0, epsilon = 1e-12);
        let want = [[2.0, 4.0], [4.0, 8.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(prior.sigma[(i, j)], want[i][j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn identical_members_pure_loading() {
        let members = vec![member("a", &[&[1.0], &[2.0]]), member("b", &[&[1.0], &[2.0]])];
        let prior = Prior::from_members(Manifold::euclidean(1), 2, members, 1e-3, &SolverSettings::default()).unwrap();
        assert_eq!(prior.sigma, DMatrix::zeros(2, 2));
        assert_eq!(prior.loading, 1e-3);
        let want = DMatrix::identity(2, 2) / 1e-3;
        assert!((prior.precision.clone() - want).abs().max() < 1e-6);
    }

    #[test]
    fn singular_without_loading() {
        let members = vec![member("a", &[&[1.0], &[2.0]]), member("b", &[&[1.0], &[2.0]])];
        let err = Prior::from_members(Manifold::euclidean(1), 2, members, 0.0, &SolverSettings::default()).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance(_)));
    }

    #[test]
    fn needs_two_members() {
        let members = vec![member("a", &[&[1.0], &[2.0]])];
        assert!(Prior::from_members(Manifold::euclidean(1), 2, members, 0.0, &SolverSettings::default()).is_err());
    }

    fn isotropic_sphere_prior() -> Prior {
        let base = Manifold::Sphere;
        let mu = Point::concat([&p(&[0.0, 0.0, 1.0]), &p(&[1.0, 0.0, 0.0])]);
        let basis = Manifold::power(base.clone(), 2).orthonormal_basis(&mu).unwrap();
        Prior::from_parts(base, 2, mu, basis, DMatrix::identity(4, 4) * 0.5, 0.5, vec![]).unwrap()
    }

    #[test]
    fn isotropic_mahalanobis_is_squared_distance() {
        let prior = isotropic_sphere_prior();
        assert_eq!(mahalanobis_sq(&prior, &prior.mu.clone()).unwrap(), 0.0);
        let x = Point::concat([&p(&[0.6, 0.0, 0.8]), &p(&[0.0, 1.0, 0.0])]);
        let d = prior.power().distance(&prior.mu, &x).unwrap();
        assert_abs_diff_eq!(mahalanobis_sq(&prior, &x).unwrap(), d * d, epsilon = 1e-12);
    }

    #[test]
    fn gradients_vanish_at_mean() {
        let prior = isotropic_sphere_prior();
        let mu = prior.mu.clone();
        assert!(gradient_mahalanobis(&prior, &mu).unwrap().norm() < 1e-15);
        assert!(gradient_mahalanobis_alt(&prior, &mu).unwrap().norm() < 1e-15);
    }

    #[test]
    fn euclidean_gradient_is_linear() {
        let base = Manifold::euclidean(1);
        let mu = p(&[1.0, -1.0]);
        let basis = Manifold::power(base.clone(), 2).orthonormal_basis(&mu).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let prior = Prior::from_parts(base, 2, mu, basis, sigma, 0.0, vec![]).unwrap();
        let x = p(&[3.0, 2.0]);
        let diff = DVector::from_vec(vec![2.0, 3.0]);
        let want = &prior.precision * diff * 2.0;
        for g in [gradient_mahalanobis(&prior, &x).unwrap(), gradient_mahalanobis_alt(&prior, &x).unwrap()] {
            assert_abs_diff_eq!(g.vec[0], want[0], epsilon = 1e-12);
            assert_abs_diff_eq!(g.vec[1], want[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_zero_and_mean_reduce_f() {
        let prior = isotropic_sphere_prior();
        let tr = Trajectory::new(
            vec![0.0, 6.0, 12.0],
            vec![p(&[0.0, 0.0, 1.0]), p(&[0.6, 0.0, 0.8]), p(&[0.8, 0.0, 0.6])],
        )
        .unwrap();
        let b = ControlTuple::new(vec![p(&[0.0, 0.6, 0.8]), p(&[0.0, 0.8, 0.6])]).unwrap();
        let h = crate::fitting::objective_h(&Manifold::Sphere, &b, tr.view()).unwrap();
        assert_eq!(objective_f(&prior, 0.0, &b, tr.view()).unwrap(), h);
        let m = prior.mean_control();
        let hm = crate::fitting::objective_h(&Manifold::Sphere, &m, tr.view()).unwrap();
        assert_eq!(objective_f(&prior, 7.0, &m, tr.view()).unwrap(), hm);
        assert!(objective_f(&prior, -1.0, &m, tr.view()).is_err());
    }

    #[test]
    fn one_dimensional_closed_form() {
        // X = [[1],[1]] (constant curve), y = (1, 3), λS = 1, μ = 0 → b = 4/3
        let base = Manifold::euclidean(1);
        let mu = p(&[0.0, 0.0]);
        let basis = Manifold::power(base.clone(), 2).orthonormal_basis(&mu).unwrap();
        // both samples observe b₁ = p(0), so X = [[1],[1]] on that coordinate
        let prior = Prior::from_parts(base, 2, mu, basis, DMatrix::identity(2, 2), 0.0, vec![]).unwrap();
        let times = [0.0, 0.0];
        let samples = [p(&[1.0]), p(&[3.0])];
        let view = SampleView::new(&times, &samples).unwrap();
        let settings = SolverSettings {
            grad_tol: 1e-12,
            max_iters: 10_000,
            ..Default::default()
        };
        let res = minimize_f(&prior, 1.0, view, &RidgeStart::Mean, &settings).unwrap();
        let value = res.control.points()[0].coords()[0];
        assert_abs_diff_eq!(res.control.points()[1].coords()[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value, 4.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn prior_file_round_trip_is_exact() {
        let members = vec![
            member("A", &[&[0.1, 0.2], &[0.3, 0.5]]),
            member("B", &[&[-0.7, 0.2], &[0.3, 1.0 / 3.0]]),
            member("C", &[&[0.0, 0.9], &[2.0, -0.5]]),
        ];
        let prior = Prior::from_members(Manifold::euclidean(2), 2, members, 1e-6, &SolverSettings::default()).unwrap();
        let text = prior.to_json().unwrap();
        assert!(text.contains(PRIOR_FORMAT));
        let back = Prior::from_json(&text).unwrap();
        assert_eq!(back.mu, prior.mu);
        assert_eq!(back.sigma, prior.sigma);
        assert_eq!(back.loading, prior.loading);
        assert_eq!(back.basis, prior.basis);
        assert_eq!(back.members, prior.members);
        assert_eq!(back.precision, prior.precision);
    }
}
