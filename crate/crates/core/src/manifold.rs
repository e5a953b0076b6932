//! Riemannian geometry of the unit 2-sphere, Euclidean space and their
//! power manifolds.
//!
//! Points and tangent vectors live in ambient coordinates: ℝ³ for the
//! sphere, ℝᵈ for Euclidean space, and the concatenation of component
//! coordinates for a power manifold. The metric is always the ambient dot
//! product restricted to the tangent space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance for points on the sphere.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

/// Pairs with `⟨x, y⟩ ≤ −1 + CUT_LOCUS_MARGIN` are rejected by the sphere logarithm.
pub const CUT_LOCUS_MARGIN: f64 = 1e-9;

/// Below this angle `sin(φ)/φ` is evaluated by its Taylor series.
const SMALL_ANGLE: f64 = 1e-6;

const BASE_TOL: f64 = 1e-12;

/// A point in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenates component points into a point of a power manifold.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Point>) -> Point {
        Point(parts.into_iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// A tangent vector together with the point it is attached to.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: Vec<f64>,
}

impl Tangent {
    pub fn new(base: Point, vec: Vec<f64>) -> Self {
        Tangent { base, vec }
    }

    pub fn zero(base: Point) -> Self {
        let n = base.len();
        Tangent { base, vec: vec![0.0; n] }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    pub fn scaled(&self, s: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * s).collect(),
        }
    }
}

/// An orthonormal basis of the tangent space at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartBasis {
    pub base: Point,
    pub vectors: Vec<Tangent>,
}

impl ChartBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Basis vectors as the columns of an `ambient × dim` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.base.len();
        DMatrix::from_fn(rows, self.dim(), |r, c| self.vectors[c].vec[r])
    }

    /// Chart coordinates of an ambient tangent vector.
    pub fn coords_of(&self, vec: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.vectors.iter().map(|e| dot(&e.vec, vec)))
    }

    /// Ambient vector with the given chart coordinates.
    pub fn vector_from(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        for (e, c) in self.vectors.iter().zip(coords) {
            axpy(*c, &e.vec, &mut out);
        }
        out
    }

    /// Applies an orthogonal change of basis: new vectors are `E·R`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> ChartBasis {
        let e = self.matrix() * rotation;
        let vectors = (0..e.ncols())
            .map(|c| Tangent::new(self.base.clone(), e.column(c).iter().copied().collect()))
            .collect();
        ChartBasis {
            base: self.base.clone(),
            vectors,
        }
    }
}

/// Supported geometries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// Unit sphere S² embedded in ℝ³.
    Sphere,
    /// Flat ℝᵈ.
    Euclidean { dim: usize },
    /// The `count`-fold product of `base` with the product metric.
    Power { base: Box<Manifold>, count: usize },
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Self {
        Manifold::Euclidean { dim }
    }

    pub fn power(base: Manifold, count: usize) -> Self {
        Manifold::Power {
            base: Box::new(base),
            count,
        }
    }

    /// Length of the coordinate vector of a point.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Sphere => 3,
            Manifold::Euclidean { dim } => *dim,
            Manifold::Power { base, count } => base.ambient_dim() * count,
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere => 2,
            Manifold::Euclidean { dim } => *dim,
            Manifold::Power { base, count } => base.dim() * count,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Manifold::Sphere => "S2".into(),
            Manifold::Euclidean { dim } => format!("R{dim}"),
            Manifold::Power { base, count } => format!("({})^{count}", base.name()),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.ambient_dim();
        if len != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: len,
            });
        }
        Ok(())
    }

    /// Validates that `x` is a point of this manifold.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        self.check_len(x.len())?;
        self.check_point_slice(x.coords())
    }

    fn check_point_slice(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NotOnManifold("non-finite coordinate".into()));
        }
        match self {
            Manifold::Sphere => {
                let n = norm(x);
                if (n - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(Error::NotOnManifold(format!("sphere point has norm {n}")));
                }
                Ok(())
            }
            Manifold::Euclidean { .. } => Ok(()),
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                x.chunks(k).try_for_each(|c| base.check_point_slice(c))
            }
        }
    }

    fn check_tangent(&self, x: &Point, v: &Tangent) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(v.vec.len())?;
        same_base(x, &v.base)
    }

    pub fn exp(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(x, v)?;
        let mut out = vec![0.0; x.len()];
        self.exp_slice(x.coords(), &v.vec, &mut out);
        Ok(Point(out))
    }

    pub fn log(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let mut out = vec![0.0; x.len()];
        self.log_slice(x.coords(), y.coords(), &mut out)?;
        Ok(Tangent::new(x.clone(), out))
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(self.dist_slice(x.coords(), y.coords()))
    }

    pub fn inner(&self, x: &Point, u: &Tangent, w: &Tangent) -> Result<f64> {
        self.check_tangent(x, u)?;
        self.check_tangent(x, w)?;
        Ok(dot(&u.vec, &w.vec))
    }

    /// Differential of `exp_x` at `v`, applied to `w`. The result lives at `exp_x(v)`.
    pub fn dexp(&self, x: &Point, v: &Tangent, w: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_tangent(x, w)?;
        let mut out = vec![0.0; x.len()];
        self.dexp_slice(x.coords(), &v.vec, &w.vec, &mut out)?;
        let mut y = vec![0.0; x.len()];
        self.exp_slice(x.coords(), &v.vec, &mut y);
        Ok(Tangent::new(Point(y), out))
    }

    /// Adjoint of [`Manifold::dexp`]: maps `u` at `exp_x(v)` back to `T_x`.
    pub fn adjoint_dexp(&self, x: &Point, v: &Tangent, u: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_len(u.vec.len())?;
        let mut y = vec![0.0; x.len()];
        self.exp_slice(x.coords(), &v.vec, &mut y);
        same_base(&Point(y), &u.base)?;
        let mut out = vec![0.0; x.len()];
        self.adjoint_dexp_slice(x.coords(), &v.vec, &u.vec, &mut out)?;
        Ok(Tangent::new(x.clone(), out))
    }

    /// Inverse of [`Manifold::adjoint_dexp`]: maps `w` at `x` to `T_{exp_x(v)}`.
    ///
    /// Equals the adjoint of `d Log_x` at `exp_x(v)`.
    pub fn inverse_adjoint_dexp(&self, x: &Point, v: &Tangent, w: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_tangent(x, w)?;
        let mut out = vec![0.0; x.len()];
        self.inverse_adjoint_dexp_slice(x.coords(), &v.vec, &w.vec, &mut out)?;
        let mut y = vec![0.0; x.len()];
        self.exp_slice(x.coords(), &v.vec, &mut y);
        Ok(Tangent::new(Point(y), out))
    }

    /// Orthogonal projection of an ambient vector onto `T_x`.
    pub fn project(&self, x: &Point, ambient: &[f64]) -> Result<Tangent> {
        self.check_len(x.len())?;
        self.check_len(ambient.len())?;
        let mut out = ambient.to_vec();
        self.project_slice(x.coords(), &mut out);
        Ok(Tangent::new(x.clone(), out))
    }

    /// Deterministic orthonormal basis of `T_x`.
    ///
    /// On the sphere the two coordinate axes least aligned with `x` are
    /// orthonormalized by Gram–Schmidt, ties broken by axis index. Power
    /// manifolds concatenate their component bases block by block.
    pub fn orthonormal_basis(&self, x: &Point) -> Result<ChartBasis> {
        self.check_len(x.len())?;
        let vectors = self
            .basis_vectors(x.coords())
            .into_iter()
            .map(|v| Tangent::new(x.clone(), v))
            .collect();
        Ok(ChartBasis {
            base: x.clone(),
            vectors,
        })
    }

    fn basis_vectors(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Manifold::Sphere => sphere::basis(x).to_vec(),
            Manifold::Euclidean { dim } => (0..*dim)
                .map(|i| {
                    let mut e = vec![0.0; *dim];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            Manifold::Power { base, count } => {
                let k = base.ambient_dim();
                let mut out = Vec::with_capacity(self.dim());
                for c in 0..*count {
                    for local in base.basis_vectors(&x[c * k..(c + 1) * k]) {
                        let mut e = vec![0.0; k * count];
                        e[c * k..(c + 1) * k].copy_from_slice(&local);
                        out.push(e);
                    }
                }
                out
            }
        }
    }

    /// Splits a point of a power manifold into its components.
    pub fn components(&self, x: &Point) -> Result<Vec<Point>> {
        match self {
            Manifold::Power { base, count } => {
                self.check_len(x.len())?;
                let k = base.ambient_dim();
                Ok((0..*count)
                    .map(|c| Point(x.coords()[c * k..(c + 1) * k].to_vec()))
                    .collect())
            }
            _ => Ok(vec![x.clone()]),
        }
    }

    // Slice-level kernels. Callers guarantee matching lengths.

    pub(crate) fn exp_slice(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Manifold::Sphere => sphere::exp(x, v, out),
            Manifold::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(v) {
                    *o = a + b;
                }
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for ((xc, vc), oc) in x.chunks(k).zip(v.chunks(k)).zip(out.chunks_mut(k)) {
                    base.exp_slice(xc, vc, oc);
                }
            }
        }
    }

    pub(crate) fn log_slice(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Sphere => sphere::log(x, y, out),
            Manifold::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = b - a;
                }
                Ok(())
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for (c, ((xc, yc), oc)) in x.chunks(k).zip(y.chunks(k)).zip(out.chunks_mut(k)).enumerate() {
                    base.log_slice(xc, yc, oc)
                        .map_err(|e| e.context(format!("component {c}")))?;
                }
                Ok(())
            }
        }
    }

    pub(crate) fn dist_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        self.sq_dist_slice(x, y).sqrt()
    }

    pub(crate) fn sq_dist_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Manifold::Sphere => {
                let d = sphere::dist(x, y);
                d * d
            }
            Manifold::Euclidean { .. } => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                x.chunks(k).zip(y.chunks(k)).map(|(a, b)| base.sq_dist_slice(a, b)).sum()
            }
        }
    }

    pub(crate) fn project_slice(&self, x: &[f64], v: &mut [f64]) {
        match self {
            Manifold::Sphere => {
                let c = dot(x, v);
                axpy(-c, x, v);
            }
            Manifold::Euclidean { .. } => {}
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for (xc, vc) in x.chunks(k).zip(v.chunks_mut(k)) {
                    base.project_slice(xc, vc);
                }
            }
        }
    }

    pub(crate) fn dexp_slice(&self, x: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Sphere => sphere::dexp(x, v, w, out),
            Manifold::Euclidean { .. } => {
                out.copy_from_slice(w);
                Ok(())
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for (((xc, vc), wc), oc) in x.chunks(k).zip(v.chunks(k)).zip(w.chunks(k)).zip(out.chunks_mut(k)) {
                    base.dexp_slice(xc, vc, wc, oc)?;
                }
                Ok(())
            }
        }
    }

    pub(crate) fn adjoint_dexp_slice(&self, x: &[f64], v: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Sphere => sphere::adjoint_dexp(x, v, u, out),
            Manifold::Euclidean { .. } => {
                out.copy_from_slice(u);
                Ok(())
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for (((xc, vc), uc), oc) in x.chunks(k).zip(v.chunks(k)).zip(u.chunks(k)).zip(out.chunks_mut(k)) {
                    base.adjoint_dexp_slice(xc, vc, uc, oc)?;
                }
                Ok(())
            }
        }
    }

    pub(crate) fn inverse_adjoint_dexp_slice(&self, x: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Sphere => sphere::inverse_adjoint_dexp(x, v, w, out),
            Manifold::Euclidean { .. } => {
                out.copy_from_slice(w);
                Ok(())
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for (((xc, vc), wc), oc) in x.chunks(k).zip(v.chunks(k)).zip(w.chunks(k)).zip(out.chunks_mut(k)) {
                    base.inverse_adjoint_dexp_slice(xc, vc, wc, oc)?;
                }
                Ok(())
            }
        }
    }

    /// Point at parameter `t` on the geodesic from `a` to `b`: `exp_a(t·log_a b)`.
    pub(crate) fn interp_slice(&self, a: &[f64], b: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        if t == 0.0 {
            out.copy_from_slice(a);
            return Ok(());
        }
        if t == 1.0 {
            out.copy_from_slice(b);
            return Ok(());
        }
        match self {
            Manifold::Euclidean { .. } => {
                for ((o, p), q) in out.iter_mut().zip(a).zip(b) {
                    *o = p + t * (q - p);
                }
                Ok(())
            }
            _ => {
                let mut v = vec![0.0; a.len()];
                self.log_slice(a, b, &mut v)?;
                v.iter_mut().for_each(|c| *c *= t);
                self.exp_slice(a, &v, out);
                Ok(())
            }
        }
    }

    /// Pulls a cotangent `g` at `interp(a, b, t)` back to `a` and `b`,
    /// accumulating into `ga` and `gb`.
    pub(crate) fn interp_vjp_slice(
        &self,
        a: &[f64],
        b: &[f64],
        t: f64,
        g: &[f64],
        ga: &mut [f64],
        gb: &mut [f64],
    ) -> Result<()> {
        match self {
            Manifold::Sphere => sphere::interp_vjp(a, b, t, g, ga, gb),
            Manifold::Euclidean { .. } => {
                axpy(1.0 - t, g, ga);
                axpy(t, g, gb);
                Ok(())
            }
            Manifold::Power { base, .. } => {
                let k = base.ambient_dim();
                for c in 0..a.len() / k {
                    let r = c * k..(c + 1) * k;
                    base.interp_vjp_slice(&a[r.clone()], &b[r.clone()], t, &g[r.clone()], &mut ga[r.clone()], &mut gb[r])?;
                }
                Ok(())
            }
        }
    }
}

fn same_base(x: &Point, base: &Point) -> Result<()> {
    if x.len() != base.len() {
        return Err(Error::BaseMismatch);
    }
    let off = x.coords().iter().zip(base.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if off > BASE_TOL {
        return Err(Error::BaseMismatch);
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `sin(φ)/φ` with the removable singularity at zero.
pub(crate) fn sinc(phi: f64) -> f64 {
    if phi.abs() < SMALL_ANGLE {
        1.0 - phi * phi / 6.0
    } else {
        phi.sin() / phi
    }
}

mod sphere {
    use super::{axpy, dot, norm, sinc, CUT_LOCUS_MARGIN};
    use crate::error::{Error, Result};

    fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub(super) fn dist(x: &[f64], y: &[f64]) -> f64 {
        norm(&cross(x, y)).atan2(dot(x, y))
    }

    pub(super) fn exp(x: &[f64], v: &[f64], out: &mut [f64]) {
        let phi = norm(v);
        if phi == 0.0 {
            out.copy_from_slice(x);
            return;
        }
        let (c, s) = (phi.cos(), sinc(phi));
        for i in 0..3 {
            out[i] = c * x[i] + s * v[i];
        }
        let n = norm(out);
        out.iter_mut().for_each(|o| *o /= n);
    }

    pub(super) fn log(x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let c = dot(x, y);
        if c <= -1.0 + CUT_LOCUS_MARGIN {
            return Err(Error::CutLocus(format!(
                "sphere points are (nearly) antipodal, <x,y> = {c}"
            )));
        }
        let mut r = [y[0] - c * x[0], y[1] - c * x[1], y[2] - c * x[2]];
        let nr = norm(&r);
        if nr == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        let phi = nr.atan2(c);
        r.iter_mut().for_each(|ri| *ri *= phi / nr);
        out.copy_from_slice(&r);
        Ok(())
    }

    fn check_radius(len: f64) -> Result<()> {
        if len >= std::f64::consts::PI {
            return Err(Error::CutLocus(format!(
                "tangent vector length {len} reaches the cut locus"
            )));
        }
        Ok(())
    }

    // Along γ(s) = exp_x(s·v) the Jacobi field with J(0) = 0, J'(0) = w keeps
    // its radial part (transported) and scales the normal part by sin(L)/L.
    pub(super) fn dexp(x: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        let len = norm(v);
        check_radius(len)?;
        if len == 0.0 {
            out.copy_from_slice(w);
            let c = dot(x, out);
            axpy(-c, x, out);
            return Ok(());
        }
        let dir = [v[0] / len, v[1] / len, v[2] / len];
        let nu = cross(x, &dir);
        let radial = dot(w, &dir);
        let normal = dot(w, &nu);
        let (s, c) = len.sin_cos();
        let scale = sinc(len);
        for i in 0..3 {
            out[i] = radial * (-s * x[i] + c * dir[i]) + scale * normal * nu[i];
        }
        Ok(())
    }

    pub(super) fn adjoint_dexp(x: &[f64], v: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let len = norm(v);
        check_radius(len)?;
        if len == 0.0 {
            out.copy_from_slice(u);
            let c = dot(x, out);
            axpy(-c, x, out);
            return Ok(());
        }
        let dir = [v[0] / len, v[1] / len, v[2] / len];
        let nu = cross(x, &dir);
        let (s, c) = len.sin_cos();
        let transported = [-s * x[0] + c * dir[0], -s * x[1] + c * dir[1], -s * x[2] + c * dir[2]];
        let radial = dot(u, &transported);
        let normal = sinc(len) * dot(u, &nu);
        for i in 0..3 {
            out[i] = radial * dir[i] + normal * nu[i];
        }
        Ok(())
    }

    // Radial part transported, normal part scaled by L/sin(L).
    pub(super) fn inverse_adjoint_dexp(x: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        let len = norm(v);
        check_radius(len)?;
        if len == 0.0 {
            out.copy_from_slice(w);
            let c = dot(x, out);
            axpy(-c, x, out);
            return Ok(());
        }
        let dir = [v[0] / len, v[1] / len, v[2] / len];
        let nu = cross(x, &dir);
        let radial = dot(w, &dir);
        let normal = dot(w, &nu) / sinc(len);
        let (s, c) = len.sin_cos();
        for i in 0..3 {
            out[i] = radial * (-s * x[i] + c * dir[i]) + normal * nu[i];
        }
        Ok(())
    }

    // Jacobi fields along the geodesic a→b of length L: moving b along the
    // geodesic moves the point at t by t, moving it normally by sin(tL)/sin(L);
    // symmetrically for a with 1 − t.
    pub(super) fn interp_vjp(a: &[f64], b: &[f64], t: f64, g: &[f64], ga: &mut [f64], gb: &mut [f64]) -> Result<()> {
        let mut u = [0.0; 3];
        log(a, b, &mut u)?;
        let len = norm(&u);
        if len < 1e-12 {
            let mut pa = g.to_vec();
            let c = dot(a, &pa);
            axpy(-c, a, &mut pa);
            axpy(1.0 - t, &pa, ga);
            let mut pb = g.to_vec();
            let c = dot(b, &pb);
            axpy(-c, b, &mut pb);
            axpy(t, &pb, gb);
            return Ok(());
        }
        u.iter_mut().for_each(|c| *c /= len);
        let nu = cross(a, &u);
        let (st, ct) = (t * len).sin_cos();
        let tau_t = [-st * a[0] + ct * u[0], -st * a[1] + ct * u[1], -st * a[2] + ct * u[2]];
        let (s1, c1) = len.sin_cos();
        let tau_1 = [-s1 * a[0] + c1 * u[0], -s1 * a[1] + c1 * u[1], -s1 * a[2] + c1 * u[2]];
        let g_tau = dot(g, &tau_t);
        let g_nu = dot(g, &nu);
        let wa = ((1.0 - t) * len).sin() / s1;
        let wb = st / s1;
        for i in 0..3 {
            ga[i] += (1.0 - t) * g_tau * u[i] + wa * g_nu * nu[i];
            gb[i] += t * g_tau * tau_1[i] + wb * g_nu * nu[i];
        }
        Ok(())
    }

    pub(super) fn basis(x: &[f64]) -> [Vec<f64>; 2] {
        let mut axes = [0usize, 1, 2];
        axes.sort_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()).then(i.cmp(&j)));
        let mut out: [Vec<f64>; 2] = [vec![0.0; 3], vec![0.0; 3]];
        for k in 0..2 {
            let mut e = vec![0.0; 3];
            e[axes[k]] = 1.0;
            let c = dot(&e, x);
            axpy(-c, x, &mut e);
            if k == 1 {
                let prev = out[0].clone();
                let c = dot(&e, &prev);
                axpy(-c, &prev, &mut e);
            }
            let n = norm(&e);
            e.iter_mut().for_each(|v| *v /= n);
            out[k] = e;
        }
        out
    }
}
