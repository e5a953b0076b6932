//! Deterministic synthetic best-track seasons in the HURDAT2 record model.
//!
//! Storms form in the tropical Atlantic, drift west-northwest, recurve to
//! the northeast and follow a rise-and-decay intensity profile. Positions are
//! rounded to 0.1° and winds to 5 kt as in the real archive.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hurdat::{Observation, StormRecord};

#[derive(Clone, Debug)]
pub struct SeasonSpec {
    pub year: i32,
    pub storms: usize,
    /// Inclusive range of synoptic observations per storm.
    pub length: (usize, usize),
}

/// Generates `spec.storms` storms numbered 1.. in order of genesis.
pub fn season(spec: &SeasonSpec, seed: u64) -> Vec<StormRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (spec.year as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let opening = NaiveDate::from_ymd_opt(spec.year, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut starts: Vec<i64> = (0..spec.storms).map(|_| rng.gen_range(0..165 * 4)).collect();
    starts.sort_unstable();
    starts
        .iter()
        .enumerate()
        .map(|(k, slot)| {
            let len = rng.gen_range(spec.length.0..=spec.length.1);
            let start = opening + Duration::hours(6 * slot);
            storm(&mut rng, spec.year, k + 1, start, len)
        })
        .collect()
}

/// Two seasons shaped like the 2020 and 2021 Atlantic cohorts: 31 and 21 storms.
pub fn atlantic_2020_2021(seed: u64) -> Vec<StormRecord> {
    let mut all = season(
        &SeasonSpec {
            year: 2020,
            storms: 31,
            length: (13, 60),
        },
        seed,
    );
    all.extend(season(
        &SeasonSpec {
            year: 2021,
            storms: 21,
            length: (13, 60),
        },
        seed,
    ));
    all
}

fn tenths(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn storm(rng: &mut ChaCha8Rng, year: i32, number: usize, start: chrono::NaiveDateTime, len: usize) -> StormRecord {
    let mut lat: f64 = rng.gen_range(11.0..22.0);
    let mut lon: f64 = rng.gen_range(-75.0..-30.0);
    // compass heading in degrees, 0 = north, 270 = west
    let mut heading: f64 = rng.gen_range(280.0..300.0);
    let recurve = rng.gen_range(0.35..0.8) * len as f64;
    let peak: f64 = rng.gen_range(15.0..130.0);
    let shape: f64 = rng.gen_range(0.6..2.0);
    let landfall = rng.gen_bool(0.3).then(|| rng.gen_range(1..len - 1));

    let mut observations = Vec::with_capacity(len + 1);
    for i in 0..len {
        let s = i as f64 / (len - 1) as f64;
        let wind = 25.0 + peak * (std::f64::consts::PI * s).sin().powf(shape) + rng.gen_range(-3.0..3.0);
        let wind = ((wind.max(20.0) / 5.0).round() * 5.0) as u32;
        let time = start + Duration::hours(6 * i as i64);
        observations.push(observation(time, None, lat, lon, wind));
        if landfall == Some(i) {
            let next = time + Duration::hours(3);
            observations.push(observation(next, Some('L'), lat + 0.1, lon - 0.1, wind));
        }

        let past = i as f64 - recurve;
        let target = if past < 0.0 { heading } else { (heading + 9.0 * past.min(10.0)).min(420.0) };
        heading = 0.7 * heading + 0.3 * target + rng.gen_range(-4.0..4.0);
        let speed = if past < 0.0 { rng.gen_range(8.0..13.0) } else { 12.0 + 1.5 * past.min(10.0) };
        let deg = speed * 6.0 / 60.0;
        let h = heading.to_radians();
        lat = (lat + deg * h.cos()).clamp(-89.0, 89.0);
        lon += deg * h.sin() / lat.to_radians().cos();
        if lon < -180.0 {
            lon += 360.0;
        } else if lon > 180.0 {
            lon -= 360.0;
        }
    }
    StormRecord {
        id: format!("AL{number:02}{year}"),
        name: format!("SYNTH{number:02}"),
        observations,
    }
}

fn observation(time: chrono::NaiveDateTime, record_id: Option<char>, lat: f64, lon: f64, wind: u32) -> Observation {
    let status = match wind {
        0..=33 => "TD",
        34..=63 => "TS",
        _ => "HU",
    };
    let pressure = (1012.0 - 0.75 * (wind as f64 - 25.0)).round() as u32;
    Observation {
        time,
        record_id,
        status: status.into(),
        lat: tenths(lat),
        lon: tenths(lon),
        wind: Some(wind),
        pressure: Some(pressure),
        extra: vec![-999; 12],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurdat::{parse_hurdat2, serialize_hurdat2, IngestFilter, ParseMode};

    #[test]
    fn deterministic_and_parseable() {
        let a = atlantic_2020_2021(7);
        let b = atlantic_2020_2021(7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 52);
        let text = serialize_hurdat2(&a);
        let back = parse_hurdat2(text.as_bytes(), ParseMode::Strict).unwrap().records;
        assert_eq!(back, a);
    }

    #[test]
    fn storms_pass_default_filter() {
        let f = IngestFilter::default();
        for s in atlantic_2020_2021(3) {
            let n = f.observations(&s).len();
            assert!((13..=60).contains(&n), "{} has {n}", s.id);
            assert!(s.observations.windows(2).all(|w| w[0].time < w[1].time));
        }
    }
}
