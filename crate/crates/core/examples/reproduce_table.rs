//! Runs both experiments end to end and prints the MAE table. Uses
//! `HURDAT2_PATH` when set, otherwise a synthetic dataset.

use manifold_ridge::experiment::{evaluate, summary_table, ExperimentSpec, MileUnit};
use manifold_ridge::hurdat::{parse_hurdat2, read_hurdat2, serialize_hurdat2, Experiment, ParseMode};
use manifold_ridge::synthetic::atlantic_2020_2021;

fn main() -> manifold_ridge::error::Result<()> {
    let (path, records): (std::path::PathBuf, _) = match std::env::var_os("HURDAT2_PATH") {
        Some(p) => (p.clone().into(), read_hurdat2(p.as_ref(), ParseMode::Strict)?.records),
        None => {
            eprintln!("HURDAT2_PATH not set; using a synthetic dataset");
            let text = serialize_hurdat2(&atlantic_2020_2021(1));
            ("synthetic".into(), parse_hurdat2(text.as_bytes(), ParseMode::Strict)?.records)
        }
    };
    let mut outcomes = Vec::new();
    for exp in [Experiment::Exp1, Experiment::Exp2] {
        let spec = ExperimentSpec::new(path.clone(), exp);
        let out = evaluate(&spec, &records)?;
        for t in &out.targets {
            eprintln!(
                "{} {}: λ = {}, α = {}, {:.1} s",
                exp.name(),
                t.target.name(),
                t.lambda,
                t.alpha,
                t.seconds
            );
        }
        outcomes.push(out);
    }
    print!("{}", summary_table(&outcomes, MileUnit::Statute));
    Ok(())
}
