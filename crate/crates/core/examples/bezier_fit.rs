//! Least-squares Bézier fit of one synthetic storm track and its R².

use manifold_ridge::fitting::fit;
use manifold_ridge::hurdat::{point_to_latlon, to_intensity_trajectory, to_track_trajectory, IngestFilter};
use manifold_ridge::manifold::Manifold;
use manifold_ridge::optim::SolverSettings;
use manifold_ridge::synthetic::atlantic_2020_2021;
use manifold_ridge::bezier::de_casteljau;

fn main() -> manifold_ridge::error::Result<()> {
    let storms = atlantic_2020_2021(42);
    let filter = IngestFilter::default();
    let storm = storms.iter().find(|s| filter.accepts(s) && s.observations.len() > 30).expect("a long storm");
    let settings = SolverSettings::default();

    let track = to_track_trajectory(storm, &filter)?;
    let wind = to_intensity_trajectory(storm, &filter)?;
    for n in [2, 4, 6] {
        let t = fit(&Manifold::Sphere, &track, n, &settings)?;
        let w = fit(&Manifold::euclidean(1), &wind, n, &settings)?;
        println!(
            "{} n={n}: track R² {:.4} ({} iterations), intensity R² {:.4}",
            storm.id, t.r_squared, t.iterations, w.r_squared
        );
    }

    let best = fit(&Manifold::Sphere, &track, 6, &settings)?;
    println!("fitted track every quarter of the storm's life:");
    for q in 0..=4 {
        let (lat, lon) = point_to_latlon(&de_casteljau(&Manifold::Sphere, &best.control, q as f64 / 4.0)?);
        println!("  t={:.2}: {lat:.2}N {:.2}W", q as f64 / 4.0, -lon);
    }
    Ok(())
}
