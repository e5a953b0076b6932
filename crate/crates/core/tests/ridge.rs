mod common;

use common::*;
use manifold_ridge::bezier::ControlTuple;
use manifold_ridge::fitting::{finite_difference_gradient, gradient_h, SampleView};
use manifold_ridge::manifold::{Manifold, Point};
use manifold_ridge::optim::SolverSettings;
use manifold_ridge::ridge::{
    gradient_mahalanobis, gradient_mahalanobis_alt, mahalanobis_sq, minimize_f, objective_f, Prior, RidgeStart,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn tight() -> SolverSettings {
    SolverSettings {
        grad_tol: 1e-10,
        max_iters: 50_000,
        ..Default::default()
    }
}

fn sorted_times(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut t: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Ambient-coordinate precision `E S Eᵀ` of a Euclidean prior.
fn ambient_precision(prior: &Prior) -> DMatrix<f64> {
    let e = prior.basis.matrix();
    &e * &prior.precision * e.transpose()
}

fn within_w_radius(prior: &Prior, x: &Point) -> bool {
    let c = prior.chart_coords(x).unwrap();
    let wv = prior.basis.vector_from((&prior.sqrt_precision * c).as_slice());
    wv.chunks(3).all(|w| norm(w) < 0.9 * std::f64::consts::PI)
}

#[test]
fn mahalanobis_gradient_matches_finite_differences() {
    let mut r = rng(21);
    for _ in 0..20 {
        let n = r.gen_range(2..=6);
        let prior = random_sphere_prior(n, &mut r);
        let power = prior.power();
        // the second formula needs Exp_μ(W·Log_μ x) inside the injectivity radius
        let x = loop {
            let x = nearby(&power, &prior.mu, 0.3, &mut r);
            if within_w_radius(&prior, &x) {
                break x;
            }
        };
        let g = gradient_mahalanobis(&prior, &x).unwrap();
        let fd = finite_difference_gradient(&power, &x, |p| mahalanobis_sq(&prior, p), 1e-5).unwrap();
        assert!(rel_err(&g.vec, &fd.vec) < 1e-4, "{}", rel_err(&g.vec, &fd.vec));
        let alt = gradient_mahalanobis_alt(&prior, &x).unwrap();
        assert!(rel_err(&alt.vec, &g.vec) < 1e-6, "{}", rel_err(&alt.vec, &g.vec));
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let mut r = rng(22);
    for _ in 0..20 {
        let n = r.gen_range(2..=5);
        let m = r.gen_range(3..=12);
        let lambda = r.gen_range(0.01..10.0);
        let prior = random_sphere_prior(n, &mut r);
        let power = prior.power();
        let x = nearby(&power, &prior.mu, 0.8, &mut r);
        let b = ControlTuple::from_power_point(&x, n).unwrap();
        let c = prior.mu.coords()[..3].to_vec();
        let times = sorted_times(m, &mut r);
        let ys: Vec<Point> = (0..m).map(|_| nearby(&Manifold::Sphere, &Point::new(c.clone()), 0.8, &mut r)).collect();
        let data = SampleView::new(&times, &ys).unwrap();

        let gh = gradient_h(&Manifold::Sphere, &b, data).unwrap();
        let gm = gradient_mahalanobis(&prior, &x).unwrap();
        let g: Vec<f64> = gh.vec.iter().zip(&gm.vec).map(|(a, c)| a + lambda * c).collect();
        let fd = finite_difference_gradient(
            &power,
            &x,
            |p| objective_f(&prior, lambda, &ControlTuple::from_power_point(p, n)?, data),
            1e-5,
        )
        .unwrap();
        assert!(rel_err(&g, &fd.vec) < 1e-4, "{}", rel_err(&g, &fd.vec));
    }
}

#[test]
fn euclidean_minimizer_matches_closed_form() {
    let mut r = rng(23);
    for _ in 0..10 {
        let d = r.gen_range(1..=4);
        let n = r.gen_range(2..=6);
        let m = r.gen_range(2..=20);
        let lambda = r.gen_range(0.05..5.0);
        let e = Manifold::euclidean(d);
        let power = Manifold::power(e.clone(), n);
        let mu = random_point(&power, &mut r);
        let basis = power.orthonormal_basis(&mu).unwrap();
        let prior = Prior::from_parts(e.clone(), n, mu.clone(), basis, random_spd(n * d, &mut r), 0.0, vec![]).unwrap();
        let times = sorted_times(m, &mut r);
        let ys: Vec<Point> = (0..m).map(|_| random_point(&e, &mut r)).collect();

        let x = design_matrix(&times, n, d);
        let s = ambient_precision(&prior);
        let yv = DVector::from_iterator(m * d, ys.iter().flat_map(|p| p.coords().to_vec()));
        let muv = DVector::from_column_slice(mu.coords());
        let lhs = x.transpose() * &x + &s * lambda;
        let rhs = x.transpose() * yv + &s * muv * lambda;
        let want = lhs.lu().solve(&rhs).unwrap();

        let out = minimize_f(&prior, lambda, SampleView::new(&times, &ys).unwrap(), &RidgeStart::Mean, &tight()).unwrap();
        for (a, b) in out.control.to_power_point().coords().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn mahalanobis_is_chart_independent() {
    let mut r = rng(24);
    for _ in 0..10 {
        let n = r.gen_range(2..=5);
        let prior = random_sphere_prior(n, &mut r);
        let rot = random_rotation(prior.dim(), &mut r);
        let rotated = prior.rebased(prior.basis.rotated(&rot)).unwrap();
        for _ in 0..5 {
            let x = nearby(&prior.power(), &prior.mu, 1.0, &mut r);
            let a = mahalanobis_sq(&prior, &x).unwrap();
            let b = mahalanobis_sq(&rotated, &x).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a), "{a} vs {b}");
        }
    }
}

#[test]
fn regularization_path_is_monotone() {
    let mut r = rng(25);
    let n = 4;
    let prior = random_sphere_prior(n, &mut r);
    let c = Point::new(prior.mu.coords()[..3].to_vec());
    let times: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
    let ys: Vec<Point> = (0..12).map(|_| nearby(&Manifold::Sphere, &c, 0.5, &mut r)).collect();
    let data = SampleView::new(&times, &ys).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for lambda in [0.01, 0.1, 1.0, 10.0] {
        let out = minimize_f(&prior, lambda, data, &RidgeStart::Mean, &tight()).unwrap();
        if let Some((h, d2)) = prev {
            assert!(out.h_min >= h - 1e-6, "H decreased at λ={lambda}");
            assert!(out.mahalanobis_sq <= d2 + 1e-6, "d² increased at λ={lambda}");
        }
        prev = Some((out.h_min, out.mahalanobis_sq));
    }
}

#[test]
fn large_lambda_pins_to_mean() {
    let mut r = rng(26);
    let prior = random_sphere_prior(3, &mut r);
    let c = Point::new(prior.mu.coords()[..3].to_vec());
    let times: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let ys: Vec<Point> = (0..8).map(|_| nearby(&Manifold::Sphere, &c, 0.5, &mut r)).collect();
    let out = minimize_f(&prior, 1e6, SampleView::new(&times, &ys).unwrap(), &RidgeStart::InitialGuess, &tight()).unwrap();
    let dist = prior.power().distance(&out.control.to_power_point(), &prior.mu).unwrap();
    assert!(dist < 1e-3, "{dist}");
}

#[test]
fn prior_file_round_trip() {
    let mut r = rng(27);
    let prior = random_sphere_prior(3, &mut r);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prior.json");
    prior.save(&path).unwrap();
    let back = Prior::load(&path).unwrap();
    assert_eq!(back.mu, prior.mu);
    assert_eq!(back.sigma, prior.sigma);
    assert_eq!(back.precision, prior.precision);
    let x = nearby(&prior.power(), &prior.mu, 0.5, &mut r);
    assert_eq!(mahalanobis_sq(&back, &x).unwrap(), mahalanobis_sq(&prior, &x).unwrap());
}
