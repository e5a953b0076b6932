//! Manifold-valued Bézier polynomials via the generalized de Casteljau
//! algorithm.

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point};

/// Largest number of control points accepted by [`ControlTuple::new`].
pub const MAX_CONTROL_POINTS: usize = 16;

/// Control points `b₁, …, bₙ` of a Bézier polynomial of degree `n − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTuple {
    points: Vec<Point>,
}

impl ControlTuple {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        check_count(points.len())?;
        let len = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: p.len(),
            });
        }
        Ok(ControlTuple { points })
    }

    /// Splits a point of `Mⁿ` into `n` control points.
    pub fn from_power_point(x: &Point, n: usize) -> Result<Self> {
        check_count(n)?;
        if x.len() % n != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into {n} control points",
                x.len()
            )));
        }
        let k = x.len() / n;
        Ok(ControlTuple {
            points: x.coords().chunks(k).map(|c| Point::new(c.to_vec())).collect(),
        })
    }

    pub fn to_power_point(&self) -> Point {
        Point::concat(&self.points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn reversed(&self) -> ControlTuple {
        ControlTuple {
            points: self.points.iter().rev().cloned().collect(),
        }
    }
}

pub(crate) fn check_count(n: usize) -> Result<()> {
    if !(2..=MAX_CONTROL_POINTS).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "number of control points must lie in [2, {MAX_CONTROL_POINTS}], got {n}"
        )));
    }
    Ok(())
}

/// Evaluates `p(t; b)` on the base manifold `m`.
///
/// Parameters outside `[0, 1]` extrapolate along the same geodesic ladder.
pub fn de_casteljau(m: &Manifold, b: &ControlTuple, t: f64) -> Result<Point> {
    for p in b.points() {
        m.check_point(p)?;
    }
    let mut ladder = Ladder::new(m.ambient_dim(), b.n());
    ladder.eval(m, b.to_power_point().coords(), t)?;
    Ok(Point::new(ladder.result().to_vec()))
}

/// Control points equally spaced on the geodesic from the first to the last sample.
pub fn initial_guess(m: &Manifold, first: &Point, last: &Point, n: usize) -> Result<ControlTuple> {
    check_count(n)?;
    m.check_point(first)?;
    m.check_point(last)?;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let mut out = vec![0.0; first.len()];
        m.interp_slice(first.coords(), last.coords(), t, &mut out)
            .map_err(|e| e.context("initial guess: first and last samples"))?;
        points.push(Point::new(out));
    }
    ControlTuple::new(points)
}

/// The de Casteljau triangle for one evaluation. Level `k` holds `n − k`
/// points; all levels are kept for the reverse pass.
pub(crate) struct Ladder {
    k: usize,
    n: usize,
    data: Vec<f64>,
    cot: Vec<f64>,
}

impl Ladder {
    pub(crate) fn new(ambient: usize, n: usize) -> Self {
        let total = n * (n + 1) / 2;
        Ladder {
            k: ambient,
            n,
            data: vec![0.0; total * ambient],
            cot: vec![0.0; total * ambient],
        }
    }

    fn offset(&self, level: usize) -> usize {
        // points in levels 0..level
        level * self.n - level * (level.saturating_sub(1)) / 2
    }

    fn range(&self, level: usize, i: usize) -> std::ops::Range<usize> {
        let start = (self.offset(level) + i) * self.k;
        start..start + self.k
    }

    pub(crate) fn eval(&mut self, m: &Manifold, control: &[f64], t: f64) -> Result<()> {
        let k = self.k;
        self.data[..self.n * k].copy_from_slice(control);
        for level in 1..self.n {
            for i in 0..self.n - level {
                let a = self.range(level - 1, i);
                let b = self.range(level - 1, i + 1);
                let o = self.range(level, i);
                let (head, tail) = self.data.split_at_mut(o.start);
                m.interp_slice(&head[a], &head[b], t, &mut tail[..k]).map_err(|e| {
                    e.context(format!("de Casteljau level {level}, points {} and {}", i + 1, i + 2))
                })?;
            }
        }
        Ok(())
    }

    pub(crate) fn result(&self) -> &[f64] {
        let r = self.range(self.n - 1, 0);
        &self.data[r]
    }

    /// Reverse pass: pulls the cotangent `g` at the evaluated point back to
    /// the control points and adds it to `grad`. Requires a preceding `eval`.
    pub(crate) fn pullback(&mut self, m: &Manifold, t: f64, g: &[f64], grad: &mut [f64]) -> Result<()> {
        self.cot.iter_mut().for_each(|c| *c = 0.0);
        let top = self.range(self.n - 1, 0);
        self.cot[top].copy_from_slice(g);
        for level in (1..self.n).rev() {
            for i in 0..self.n - level {
                let a = self.range(level - 1, i);
                let b = self.range(level - 1, i + 1);
                let o = self.range(level, i);
                let (lower, upper) = self.cot.split_at_mut(o.start);
                let go = &upper[..self.k];
                let (ga, gb) = lower[a.start..b.end].split_at_mut(self.k);
                m.interp_vjp_slice(&self.data[a.clone()], &self.data[b.clone()], t, go, ga, gb)?;
            }
        }
        for (g, c) in grad.iter_mut().zip(&self.cot[..self.n * self.k]) {
            *g += c;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    #[test]
    fn two_points_is_a_geodesic() {
        let s = Manifold::Sphere;
        let a = p(&[1.0, 0.0, 0.0]);
        let b = p(&[0.0, 0.0, 1.0]);
        let ct = ControlTuple::new(vec![a.clone(), b.clone()]).unwrap();
        let t = 0.3;
        let got = de_casteljau(&s, &ct, t).unwrap();
        let v = s.log(&a, &b).unwrap().scaled(t);
        let want = s.exp(&a, &v).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(got.coords()[i], want.coords()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn euclidean_quadratic_midpoint() {
        let e = Manifold::euclidean(2);
        let ct = ControlTuple::new(vec![p(&[0.0, 0.0]), p(&[1.0, 2.0]), p(&[2.0, 0.0])]).unwrap();
        let got = de_casteljau(&e, &ct, 0.5).unwrap();
        assert_abs_diff_eq!(got.coords()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(got.coords()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn endpoints_are_exact() {
        let s = Manifold::Sphere;
        let pts = vec![
            p(&[1.0, 0.0, 0.0]),
            p(&[0.0, 1.0, 0.0]),
            p(&[0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
            p(&[0.6, 0.0, 0.8]),
        ];
        let ct = ControlTuple::new(pts.clone()).unwrap();
        assert_eq!(de_casteljau(&s, &ct, 0.0).unwrap(), pts[0]);
        assert_eq!(de_casteljau(&s, &ct, 1.0).unwrap(), pts[3]);
    }

    #[test]
    fn initial_guess_examples() {
        let e = Manifold::euclidean(1);
        let g = initial_guess(&e, &p(&[0.0]), &p(&[4.0]), 5).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|q| q.coords()[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);

        let s = Manifold::Sphere;
        let a = p(&[1.0, 0.0, 0.0]);
        let b = p(&[0.0, 1.0, 0.0]);
        let g = initial_guess(&s, &a, &b, 2).unwrap();
        assert_eq!(g.points(), &[a.clone(), b.clone()]);
        let g = initial_guess(&s, &a, &b, 3).unwrap();
        let mid = g.points()[1].coords();
        assert_abs_diff_eq!(mid[0], FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(mid[1], FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn initial_guess_rejects_antipodes() {
        let s = Manifold::Sphere;
        assert!(initial_guess(&s, &p(&[1.0, 0.0, 0.0]), &p(&[-1.0, 0.0, 0.0]), 3).is_err());
    }

    #[test]
    fn cut_locus_names_the_level() {
        let s = Manifold::Sphere;
        let ct = ControlTuple::new(vec![p(&[1.0, 0.0, 0.0]), p(&[-1.0, 0.0, 0.0])]).unwrap();
        let msg = de_casteljau(&s, &ct, 0.5).unwrap_err().to_string();
        assert!(msg.contains("level 1"), "{msg}");
    }

    #[test]
    fn count_limits() {
        assert!(ControlTuple::new(vec![p(&[0.0])]).is_err());
        assert!(ControlTuple::new(vec![p(&[0.0]); 17]).is_err());
        assert!(ControlTuple::new(vec![p(&[0.0]); 16]).is_ok());
        assert!(ControlTuple::new(vec![p(&[0.0]), p(&[0.0, 1.0])]).is_err());
    }

    #[test]
    fn power_point_round_trip() {
        let ct = ControlTuple::new(vec![p(&[1.0, 2.0]), p(&[3.0, 4.0]), p(&[5.0, 6.0])]).unwrap();
        let x = ct.to_power_point();
        assert_eq!(x.coords(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ControlTuple::from_power_point(&x, 3).unwrap(), ct);
    }
}
