//! Generates a synthetic season and writes it in HURDAT2 format to stdout.

use manifold_ridge::hurdat::serialize_hurdat2;
use manifold_ridge::synthetic::{season, SeasonSpec};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let storms = season(
        &SeasonSpec {
            year: 2030,
            storms: 12,
            length: (13, 40),
        },
        seed,
    );
    print!("{}", serialize_hurdat2(&storms));
}
