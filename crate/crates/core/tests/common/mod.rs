#![allow(dead_code)]

use manifold_ridge::manifold::{Manifold, Point, Tangent};
use manifold_ridge::ridge::Prior;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn sphere_point(rng: &mut impl Rng) -> Point {
    let v: Vec<f64> = (0..3).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    Point::new(v.into_iter().map(|c| c / n).collect())
}

pub fn random_point(m: &Manifold, rng: &mut impl Rng) -> Point {
    match m {
        Manifold::Sphere => sphere_point(rng),
        Manifold::Euclidean { dim } => Point::new((0..*dim).map(|_| gaussian(rng)).collect()),
        Manifold::Power { base, count } => {
            let parts: Vec<Point> = (0..*count).map(|_| random_point(base, rng)).collect();
            Point::concat(&parts)
        }
    }
}

/// Random tangent vector at `x` with each component of length at most `scale`.
pub fn random_tangent(m: &Manifold, x: &Point, scale: f64, rng: &mut impl Rng) -> Tangent {
    let raw: Vec<f64> = (0..x.len()).map(|_| gaussian(rng)).collect();
    let t = m.project(x, &raw).unwrap();
    let per = match m {
        Manifold::Power { base, .. } => base.ambient_dim(),
        _ => x.len(),
    };
    let mut v = t.vec;
    for chunk in v.chunks_mut(per) {
        let n = chunk.iter().map(|c| c * c).sum::<f64>().sqrt();
        let len = scale * rng.gen_range(0.05..1.0);
        if n > 0.0 {
            chunk.iter_mut().for_each(|c| *c *= len / n);
        }
    }
    Tangent::new(x.clone(), v)
}

/// Point within `scale` of `x` (componentwise).
pub fn nearby(m: &Manifold, x: &Point, scale: f64, rng: &mut impl Rng) -> Point {
    let v = random_tangent(m, x, scale, rng);
    m.exp(x, &v).unwrap()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernstein weights of degree `n − 1` at `t`.
pub fn bernstein(n: usize, t: f64) -> Vec<f64> {
    let d = n - 1;
    (0..n)
        .map(|k| binomial(d, k) * t.powi(k as i32) * (1.0 - t).powi((d - k) as i32))
        .collect()
}

/// Design matrix mapping stacked control coordinates (control-major) to
/// stacked sample coordinates.
pub fn design_matrix(times: &[f64], n: usize, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(times.len() * d, n * d);
    for (i, t) in times.iter().enumerate() {
        for (k, w) in bernstein(n, *t).into_iter().enumerate() {
            for j in 0..d {
                x[(i * d + j, k * d + j)] = w;
            }
        }
    }
    x
}

pub fn random_spd(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1
}

pub fn random_rotation(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    a.qr().q()
}

/// Prior on `(S²)ⁿ` with a random mean and a random well-conditioned covariance.
pub fn random_sphere_prior(n: usize, rng: &mut impl Rng) -> Prior {
    let base = Manifold::Sphere;
    let power = Manifold::power(base.clone(), n);
    let mu = random_point(&power, rng);
    let basis = power.orthonormal_basis(&mu).unwrap();
    let sigma = random_spd(2 * n, rng) * 0.05;
    Prior::from_parts(base, n, mu, basis, sigma, 0.0, vec![]).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: Vec<f64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(want).max(1e-300)
}
