//! Builds a prior over Bézier control tuples from a season of tracks and
//! compares Mahalanobis distances of typical and atypical storms.

use manifold_ridge::fitting::fit;
use manifold_ridge::hurdat::{to_track_trajectory, IngestFilter};
use manifold_ridge::manifold::Manifold;
use manifold_ridge::optim::SolverSettings;
use manifold_ridge::ridge::{build_prior, gradient_mahalanobis, mahalanobis_sq, DEFAULT_LOADING_REL};
use manifold_ridge::synthetic::atlantic_2020_2021;

fn main() -> manifold_ridge::error::Result<()> {
    let storms = atlantic_2020_2021(7);
    let settings = SolverSettings::default();
    let f2020 = IngestFilter::default().with_years([2020]);
    let f2021 = IngestFilter::default().with_years([2021]);
    let train: Vec<_> = storms
        .iter()
        .filter(|s| f2020.accepts(s))
        .map(|s| to_track_trajectory(s, &f2020))
        .collect::<Result<_, _>>()?;
    let prior = build_prior(&Manifold::Sphere, &train, 4, DEFAULT_LOADING_REL, &settings)?;
    println!("prior from {} tracks, {}-dimensional chart", train.len(), prior.dim());
    println!("mean sample count {:.1}", prior.mean_sample_count());

    for s in storms.iter().filter(|s| f2021.accepts(s)).take(6) {
        let y = to_track_trajectory(s, &f2021)?;
        let b = fit(&Manifold::Sphere, &y, 4, &settings)?.control.to_power_point();
        let d2 = mahalanobis_sq(&prior, &b)?;
        let g = gradient_mahalanobis(&prior, &b)?;
        println!("{}: d² = {d2:8.2}, |grad| = {:.2}", s.id, g.norm());
    }
    Ok(())
}
