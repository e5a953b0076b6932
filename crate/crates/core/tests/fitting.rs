mod common;

use common::*;
use manifold_ridge::bezier::{de_casteljau, ControlTuple};
use manifold_ridge::fitting::{
    fit, frechet_mean, gradient_h, gradient_h_fd, objective_h, total_variance_g, SampleView, Trajectory,
};
use manifold_ridge::manifold::{Manifold, Point, Tangent};
use manifold_ridge::optim::SolverSettings;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn sorted_times(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut t: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    t
}

fn tight() -> SolverSettings {
    SolverSettings {
        grad_tol: 1e-10,
        max_iters: 20_000,
        ..Default::default()
    }
}

#[test]
fn sphere_gradient_matches_finite_differences() {
    let mut r = rng(11);
    let s = Manifold::Sphere;
    for _ in 0..20 {
        let n = r.gen_range(2..=6);
        let m = r.gen_range(5..=20);
        let c = sphere_point(&mut r);
        let b = ControlTuple::new((0..n).map(|_| nearby(&s, &c, 0.8, &mut r)).collect()).unwrap();
        let times = sorted_times(m, &mut r);
        let ys: Vec<Point> = (0..m).map(|_| nearby(&s, &c, 0.8, &mut r)).collect();
        let data = SampleView::new(&times, &ys).unwrap();
        let g = gradient_h(&s, &b, data).unwrap();
        let fd = gradient_h_fd(&s, &b, data, 1e-5).unwrap();
        assert!(rel_err(&g.vec, &fd.vec) < 1e-4, "{}", rel_err(&g.vec, &fd.vec));
    }
}

#[test]
fn euclidean_gradient_is_twice_normal_equations() {
    let mut r = rng(12);
    for _ in 0..10 {
        let d = r.gen_range(1..=3);
        let n = r.gen_range(2..=5);
        let m = r.gen_range(4..=12);
        let e = Manifold::euclidean(d);
        let b = ControlTuple::new((0..n).map(|_| random_point(&e, &mut r)).collect()).unwrap();
        let times = sorted_times(m, &mut r);
        let ys: Vec<Point> = (0..m).map(|_| random_point(&e, &mut r)).collect();
        let x = design_matrix(&times, n, d);
        let bv = DVector::from_column_slice(b.to_power_point().coords());
        let yv = DVector::from_iterator(m * d, ys.iter().flat_map(|p| p.coords().to_vec()));
        let resid = &x * &bv - &yv;
        let want = x.transpose() * &resid * 2.0;
        let data = SampleView::new(&times, &ys).unwrap();
        let g = gradient_h(&e, &b, data).unwrap();
        assert!(rel_err(&g.vec, want.as_slice()) < 1e-12);
        let h = objective_h(&e, &b, data).unwrap();
        assert!((h - resid.norm_squared()).abs() < 1e-10 * (1.0 + h));
    }
}

#[test]
fn euclidean_fit_matches_least_squares() {
    let mut r = rng(13);
    for _ in 0..10 {
        let d = r.gen_range(1..=3);
        let n = r.gen_range(2..=5);
        let m = r.gen_range(n + 3..=15);
        let e = Manifold::euclidean(d);
        let raw: Vec<f64> = (0..m).map(|i| i as f64 * 6.0).collect();
        let ys: Vec<Point> = (0..m).map(|_| random_point(&e, &mut r)).collect();
        let tr = Trajectory::new(raw, ys.clone()).unwrap();
        let res = fit(&e, &tr, n, &tight()).unwrap();
        let x = design_matrix(tr.times(), n, d);
        let yv = DVector::from_iterator(m * d, ys.iter().flat_map(|p| p.coords().to_vec()));
        let want = (x.transpose() * &x).lu().solve(&(x.transpose() * yv)).unwrap();
        let got = res.control.to_power_point();
        for (a, b) in got.coords().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(res.r_squared <= 1.0);
    }
}

#[test]
fn interpolable_sphere_data_has_unit_r_squared() {
    let mut r = rng(14);
    let s = Manifold::Sphere;
    let c = sphere_point(&mut r);
    let truth = ControlTuple::new((0..4).map(|_| nearby(&s, &c, 0.6, &mut r)).collect()).unwrap();
    let raw: Vec<f64> = (0..15).map(|i| i as f64).collect();
    let tr_times: Vec<f64> = raw.iter().map(|t| t / 14.0).collect();
    let ys: Vec<Point> = tr_times.iter().map(|t| de_casteljau(&s, &truth, *t).unwrap()).collect();
    let tr = Trajectory::new(raw, ys).unwrap();
    let res = fit(&s, &tr, 4, &tight()).unwrap();
    assert!(res.h_min < 1e-12, "{}", res.h_min);
    assert!(res.r_squared > 1.0 - 1e-10);
}

/// Minimizes `G` by nested grid refinement in the chart `exp_c(a·e₁ + b·e₂)`.
fn grid_mean(points: &[Point], c: &Point) -> Point {
    let s = Manifold::Sphere;
    let basis = s.orthonormal_basis(c).unwrap();
    let at = |a: f64, b: f64| {
        let v = Tangent::new(c.clone(), basis.vector_from(&[a, b]));
        s.exp(c, &v).unwrap()
    };
    let (mut ca, mut cb, mut half) = (0.0, 0.0, 1.0);
    for _ in 0..12 {
        let mut best = (f64::INFINITY, ca, cb);
        for i in 0..=20 {
            for j in 0..=20 {
                let a = ca - half + half * i as f64 / 10.0;
                let b = cb - half + half * j as f64 / 10.0;
                let g = total_variance_g(&s, points, &at(a, b)).unwrap();
                if g < best.0 {
                    best = (g, a, b);
                }
            }
        }
        ca = best.1;
        cb = best.2;
        half /= 4.0;
    }
    at(ca, cb)
}

#[test]
fn frechet_mean_matches_grid_search() {
    let mut r = rng(15);
    let s = Manifold::Sphere;
    for _ in 0..5 {
        let c = sphere_point(&mut r);
        let pts: Vec<Point> = (0..8).map(|_| nearby(&s, &c, 0.7, &mut r)).collect();
        let mean = frechet_mean(&s, &pts, &SolverSettings::default()).unwrap();
        let oracle = grid_mean(&pts, &c);
        assert!(s.distance(&mean, &oracle).unwrap() < 1e-3);
    }
}

#[test]
fn frechet_mean_of_euclidean_points_is_average() {
    let e = Manifold::euclidean(2);
    let pts = vec![Point::new(vec![0.0, 0.0]), Point::new(vec![2.0, 0.0]), Point::new(vec![1.0, 3.0])];
    let mean = frechet_mean(&e, &pts, &tight()).unwrap();
    assert!((mean.coords()[0] - 1.0).abs() < 1e-9);
    assert!((mean.coords()[1] - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn h_is_nonnegative_and_zero_on_curve(seed in any::<u64>(), n in 2usize..6, m in 2usize..10) {
        let mut r = rng(seed);
        let s = Manifold::Sphere;
        let c = sphere_point(&mut r);
        let b = ControlTuple::new((0..n).map(|_| nearby(&s, &c, 0.8, &mut r)).collect()).unwrap();
        let times = sorted_times(m, &mut r);
        let on: Vec<Point> = times.iter().map(|t| de_casteljau(&s, &b, *t).unwrap()).collect();
        let off: Vec<Point> = (0..m).map(|_| nearby(&s, &c, 0.8, &mut r)).collect();
        prop_assert!(objective_h(&s, &b, SampleView::new(&times, &on).unwrap()).unwrap() < 1e-20);
        prop_assert!(objective_h(&s, &b, SampleView::new(&times, &off).unwrap()).unwrap() >= 0.0);
    }

    #[test]
    fn gradient_is_tangent(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let s = Manifold::Sphere;
        let c = sphere_point(&mut r);
        let b = ControlTuple::new((0..n).map(|_| nearby(&s, &c, 0.8, &mut r)).collect()).unwrap();
        let times = sorted_times(6, &mut r);
        let ys: Vec<Point> = (0..6).map(|_| nearby(&s, &c, 0.8, &mut r)).collect();
        let g = gradient_h(&s, &b, SampleView::new(&times, &ys).unwrap()).unwrap();
        for (k, p) in b.points().iter().enumerate() {
            let dot: f64 = p.coords().iter().zip(&g.vec[3 * k..3 * k + 3]).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-12);
        }
    }
}
