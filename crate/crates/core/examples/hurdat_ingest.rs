//! Parses a HURDAT2 file (`HURDAT2_PATH`, or a synthetic season) and prints
//! per-season statistics and the experiment cohorts.

use std::collections::BTreeMap;

use manifold_ridge::hurdat::{parse_hurdat2, read_hurdat2, select_cohort, serialize_hurdat2, Experiment, IngestFilter, ParseMode};
use manifold_ridge::synthetic::atlantic_2020_2021;

fn main() -> manifold_ridge::error::Result<()> {
    let records = match std::env::var_os("HURDAT2_PATH") {
        Some(p) => read_hurdat2(p.as_ref(), ParseMode::Strict)?.records,
        None => {
            println!("HURDAT2_PATH not set; using a synthetic file");
            parse_hurdat2(serialize_hurdat2(&atlantic_2020_2021(1)).as_bytes(), ParseMode::Strict)?.records
        }
    };
    let filter = IngestFilter::default();
    let mut seasons: BTreeMap<i32, (usize, usize, u32, usize, usize)> = BTreeMap::new();
    for s in records.iter().filter(|s| s.basin() == "AL") {
        let e = seasons.entry(s.year()).or_insert((0, 0, u32::MAX, usize::MAX, 0));
        e.0 += 1;
        if filter.accepts(s) {
            let n = filter.observations(s).len();
            e.1 += 1;
            e.3 = e.3.min(n);
            e.4 = e.4.max(n);
        }
        e.2 = e.2.min(s.observations.iter().filter_map(|o| o.wind).min().unwrap_or(u32::MAX));
    }
    println!("{:>6} {:>7} {:>9} {:>9} {:>13}", "year", "storms", "eligible", "min wind", "sample range");
    for (year, (all, ok, wind, lo, hi)) in seasons.iter().rev().take(8) {
        println!("{year:>6} {all:>7} {ok:>9} {wind:>9} {:>13}", format!("{lo}-{hi}"));
    }
    for exp in [Experiment::Exp1, Experiment::Exp2] {
        match select_cohort(&records, &filter, exp) {
            Ok(c) => println!(
                "{}: prior {}, validation {}, test {}",
                exp.name(),
                c.prior.len(),
                c.validation.len(),
                c.test.len()
            ),
            Err(e) => println!("{}: {e}", exp.name()),
        }
    }
    Ok(())
}
