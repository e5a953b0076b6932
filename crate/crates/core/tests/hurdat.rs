use chrono::{Duration, NaiveDate};
use manifold_ridge::hurdat::{
    latlon_to_point, parse_hurdat2, point_to_latlon, select_cohort, serialize_hurdat2, to_intensity_trajectory,
    to_track_trajectory, Experiment, IngestFilter, Observation, ParseMode, StormRecord,
};
use manifold_ridge::synthetic::atlantic_2020_2021;
use proptest::prelude::*;

fn observation() -> impl Strategy<Value = (i64, Option<char>, f64, f64, Option<u32>, Option<u32>)> {
    (
        0i64..4,
        prop_oneof![Just(None), Just(Some('L')), Just(Some('I'))],
        -899i32..=899,
        -1799i32..=1799,
        prop_oneof![Just(None), (0u32..200).prop_map(Some)],
        prop_oneof![Just(None), (880u32..1030).prop_map(Some)],
    )
        .prop_map(|(gap, rid, lat, lon, w, p)| (gap, rid, lat as f64 / 10.0, lon as f64 / 10.0, w, p))
}

fn storm() -> impl Strategy<Value = StormRecord> {
    (1u32..40, 1990i32..2030, "[A-Z]{3,9}", prop::collection::vec(observation(), 1..30)).prop_map(
        |(num, year, name, rows)| {
            let mut t = NaiveDate::from_ymd_opt(year, 8, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
            let observations = rows
                .into_iter()
                .map(|(gap, record_id, lat, lon, wind, pressure)| {
                    t += Duration::hours(3 * (gap + 1));
                    Observation {
                        time: t,
                        record_id,
                        status: "TS".into(),
                        lat,
                        lon,
                        wind,
                        pressure,
                        extra: vec![0, 10, -999, 20, 0, 0, 0, 0, 0, 0, 0, 0],
                    }
                })
                .collect();
            StormRecord {
                id: format!("AL{num:02}{year}"),
                name,
                observations,
            }
        },
    )
}

proptest! {
    #[test]
    fn serialization_round_trips(storms in prop::collection::vec(storm(), 1..6)) {
        let text = serialize_hurdat2(&storms);
        let back = parse_hurdat2(text.as_bytes(), ParseMode::Strict).unwrap();
        prop_assert!(back.skipped.is_empty());
        prop_assert_eq!(&back.records, &storms);
        prop_assert_eq!(serialize_hurdat2(&back.records), text);
    }

    #[test]
    fn latlon_is_bijective(lat in -89.9f64..89.9, lon in -179.9f64..179.9) {
        let p = latlon_to_point(lat, lon);
        let n = p.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-12);
        let (a, b) = point_to_latlon(&p);
        prop_assert!((a - lat).abs() < 1e-9 && (b - lon).abs() < 1e-9, "({a}, {b}) vs ({lat}, {lon})");
    }
}

#[test]
fn header_count_must_match() {
    let good = serialize_hurdat2(&atlantic_2020_2021(5)[..2]);
    let first = good.lines().next().unwrap();
    let declared: usize = first.split(',').nth(2).unwrap().trim().parse().unwrap();
    let bumped = good.replacen(first, &first.replace(&format!("{declared},"), &format!("{},", declared + 1)), 1);
    let e = parse_hurdat2(bumped.as_bytes(), ParseMode::Strict).unwrap_err().to_string();
    assert!(e.contains("declares"), "{e}");

    let lenient = parse_hurdat2(bumped.as_bytes(), ParseMode::Lenient).unwrap();
    assert_eq!(lenient.skipped.len(), 1);
    assert_eq!(lenient.records.len(), 1);
    assert_eq!(lenient.records[0].id, atlantic_2020_2021(5)[1].id);
}

#[test]
fn lenient_mode_keeps_valid_storms() {
    let storms = atlantic_2020_2021(6);
    let text = serialize_hurdat2(&storms[..4]);
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == storms[0].observations.len() + 3 { l.replacen('N', "Q", 1) } else { l.to_string() })
        .collect();
    let text = broken.join("\n");
    assert!(parse_hurdat2(text.as_bytes(), ParseMode::Strict).is_err());
    let out = parse_hurdat2(text.as_bytes(), ParseMode::Lenient).unwrap();
    assert_eq!(out.skipped.len(), 1);
    let ids: Vec<&str> = out.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, [&storms[0].id, &storms[2].id, &storms[3].id]);
}

#[test]
fn trajectories_use_hours_and_unit_vectors() {
    let storms = atlantic_2020_2021(8);
    let f = IngestFilter::default();
    for s in storms.iter().filter(|s| f.accepts(s)).take(5) {
        let track = to_track_trajectory(s, &f).unwrap();
        let wind = to_intensity_trajectory(s, &f).unwrap();
        assert_eq!(track.len(), wind.len());
        assert_eq!(track.raw_times()[0], 0.0);
        assert!(track.raw_times().windows(2).all(|w| w[1] - w[0] == 6.0));
        let (lat, lon) = point_to_latlon(&track.samples()[0]);
        let o = &s.observations[0];
        assert!((lat - o.lat).abs() < 1e-9 && (lon - o.lon).abs() < 1e-9);
    }
}

#[test]
fn cohorts_follow_the_seasons() {
    let recs = atlantic_2020_2021(9);
    let f = IngestFilter::default();
    let c1 = select_cohort(&recs, &f, Experiment::Exp1).unwrap();
    assert_eq!((c1.prior.len(), c1.validation.len(), c1.test.len()), (31, 21, 21));
    assert_eq!(c1.validation, c1.prior[10..]);
    assert!(c1.test.iter().all(|id| id.ends_with("2021")));

    let c2 = select_cohort(&recs, &f, Experiment::Exp2).unwrap();
    assert_eq!((c2.prior.len(), c2.validation.len(), c2.test.len()), (16, 5, 5));
    assert_eq!(c2.prior[..], c1.test[..16]);
    assert_eq!(c2.test[..], c1.test[16..]);
    assert!(c2.test.iter().all(|id| !c2.prior.contains(id)));
}

#[test]
fn long_storm_round_trips() {
    // 69 rows under Sam's id, with special records and missing pressures
    let mut s = manifold_ridge::synthetic::season(
        &manifold_ridge::synthetic::SeasonSpec {
            year: 2021,
            storms: 1,
            length: (69, 69),
        },
        18,
    )
    .remove(0);
    s.id = "AL182021".into();
    s.name = "SAM".into();
    s.observations.truncate(69);
    s.observations[10].pressure = None;
    s.observations[20].record_id = Some('I');
    let text = serialize_hurdat2(std::slice::from_ref(&s));
    assert!(text.starts_with("AL182021,                SAM,     69,\n"));
    let back = parse_hurdat2(text.as_bytes(), ParseMode::Strict).unwrap().records;
    assert_eq!(back, vec![s]);
}
