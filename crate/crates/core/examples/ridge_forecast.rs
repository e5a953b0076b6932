//! Forecasts one storm intensity twelve hours ahead for several ridge
//! strengths and blend factors.

use manifold_ridge::experiment::Target;
use manifold_ridge::forecast::{forecast_trajectory, ForecastConfig};
use manifold_ridge::hurdat::IngestFilter;
use manifold_ridge::optim::SolverSettings;
use manifold_ridge::ridge::{build_prior, DEFAULT_LOADING_REL};
use manifold_ridge::synthetic::atlantic_2020_2021;

fn main() -> manifold_ridge::error::Result<()> {
    let storms = atlantic_2020_2021(11);
    let settings = SolverSettings::default();
    let f = IngestFilter::default();
    let target = Target::Intensity;
    let history: Vec<_> = storms
        .iter()
        .filter(|s| s.year() == 2020 && f.accepts(s))
        .map(|s| target.trajectory(s, &f))
        .collect::<Result<_, _>>()?;
    let prior = build_prior(&target.manifold(), &history, 6, DEFAULT_LOADING_REL, &settings)?;
    let storm = storms.iter().find(|s| s.year() == 2021 && f.accepts(s)).expect("a 2021 storm");
    let truth = target.trajectory(storm, &f)?;

    println!("{} ({} samples), 12 h ahead", storm.id, truth.len());
    println!("{:>8} {:>6} {:>10}", "lambda", "alpha", "MAE (kt)");
    for lambda in [0.0, 0.01, 1.0, 100.0] {
        for alpha in [0.5, 1.0] {
            let cfg = ForecastConfig {
                lambda,
                alpha,
                ..Default::default()
            };
            let rep = forecast_trajectory(&prior, &cfg, &truth, &settings)?;
            let e = rep.errors();
            let mae = e.iter().sum::<f64>() / e.len() as f64;
            println!("{lambda:>8} {alpha:>6} {mae:>10.2}  ({} failed)", rep.failures());
        }
    }
    Ok(())
}
