//! HURDAT2 best-track parsing and conversion to manifold trajectories.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Trajectory;
use crate::manifold::Point;

pub const MISSING_WIND: i32 = -99;
pub const MISSING_PRESSURE: i32 = -999;
/// Sustained wind (kt) from which a hurricane is category 5.
pub const CATEGORY5_KT: u32 = 137;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}: {text:?}")]
pub struct ParseError {
    pub line: usize,
    pub text: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Abort on the first malformed storm.
    #[default]
    Strict,
    /// Skip malformed storms and keep their errors as warnings.
    Lenient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// UTC.
    pub time: NaiveDateTime,
    pub record_id: Option<char>,
    pub status: String,
    /// Degrees north.
    pub lat: f64,
    /// Degrees east.
    pub lon: f64,
    /// Knots; `None` for the missing sentinel.
    pub wind: Option<u32>,
    /// Millibars; `None` for the missing sentinel.
    pub pressure: Option<u32>,
    /// Remaining numeric columns (wind radii, radius of maximum wind).
    pub extra: Vec<i32>,
}

impl Observation {
    /// On a 0000/0600/1200/1800 UTC time.
    pub fn is_synoptic(&self) -> bool {
        self.time.minute() == 0 && self.time.hour() % 6 == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StormRecord {
    /// Basin code, 2-digit number and 4-digit year, e.g. `AL182021`.
    pub id: String,
    pub name: String,
    pub observations: Vec<Observation>,
}

impl StormRecord {
    pub fn basin(&self) -> &str {
        &self.id[..2]
    }

    pub fn year(&self) -> i32 {
        self.id[4..].parse().expect("validated storm id")
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.observations.first().map(|o| o.time)
    }

    pub fn max_wind(&self) -> Option<u32> {
        self.observations.iter().filter_map(|o| o.wind).max()
    }

    pub fn is_category5(&self) -> bool {
        self.max_wind().is_some_and(|w| w >= CATEGORY5_KT)
    }
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<StormRecord>,
    /// Storms skipped in lenient mode.
    pub skipped: Vec<ParseError>,
}

struct Header {
    id: String,
    name: String,
    count: usize,
}

fn fields(line: &str) -> Vec<&str> {
    let mut f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.last() == Some(&"") {
        f.pop();
    }
    f
}

fn valid_id(id: &str) -> bool {
    let b = id.as_bytes();
    b.len() == 8 && b[..2].iter().all(u8::is_ascii_uppercase) && b[2..].iter().all(u8::is_ascii_digit)
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let f = fields(line);
    if f.len() != 3 {
        return Err("expected storm header \"<id>, <name>, <count>,\"".into());
    }
    if !valid_id(f[0]) {
        return Err(format!("malformed storm id {:?}", f[0]));
    }
    let count = f[2].parse::<usize>().map_err(|_| format!("malformed entry count {:?}", f[2]))?;
    Ok(Header {
        id: f[0].to_string(),
        name: f[1].to_string(),
        count,
    })
}

fn parse_coord(s: &str, pos: char, neg: char, limit: f64) -> std::result::Result<f64, String> {
    let bad = || format!("malformed coordinate {s:?}");
    let hemi = s.chars().last().ok_or_else(bad)?;
    let value: f64 = s[..s.len() - hemi.len_utf8()].parse().map_err(|_| bad())?;
    if !(value >= 0.0) {
        return Err(bad());
    }
    let signed = match hemi {
        c if c == pos => value,
        c if c == neg => -value,
        _ => return Err(bad()),
    };
    if signed.abs() > limit {
        return Err(format!("coordinate {s:?} out of range"));
    }
    Ok(signed)
}

fn parse_observation(line: &str) -> std::result::Result<Observation, String> {
    let f = fields(line);
    if f.len() < 8 {
        return Err(format!("expected at least 8 fields, found {}", f.len()));
    }
    let date = NaiveDate::parse_from_str(f[0], "%Y%m%d").map_err(|_| format!("malformed date {:?}", f[0]))?;
    if f[1].len() != 4 || !f[1].bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("malformed time {:?}", f[1]));
    }
    let (hh, mm): (u32, u32) = (f[1][..2].parse().unwrap(), f[1][2..].parse().unwrap());
    let time = date.and_hms_opt(hh, mm, 0).ok_or_else(|| format!("malformed time {:?}", f[1]))?;
    let record_id = match f[2].len() {
        0 => None,
        1 => f[2].chars().next(),
        _ => return Err(format!("malformed record identifier {:?}", f[2])),
    };
    if f[3].len() != 2 {
        return Err(format!("malformed status {:?}", f[3]));
    }
    let lat = parse_coord(f[4], 'N', 'S', 90.0)?;
    let lon = parse_coord(f[5], 'E', 'W', 180.0)?;
    let int = |s: &str, what: &str| s.parse::<i32>().map_err(|_| format!("malformed {what} {s:?}"));
    let wind = match int(f[6], "wind")? {
        MISSING_WIND => None,
        w if w >= 0 => Some(w as u32),
        w => return Err(format!("negative wind {w}")),
    };
    let pressure = match int(f[7], "pressure")? {
        p if p < 0 => None,
        p => Some(p as u32),
    };
    let extra = f[8..].iter().map(|s| int(s, "field")).collect::<std::result::Result<_, _>>()?;
    Ok(Observation {
        time,
        record_id,
        status: f[3].to_string(),
        lat,
        lon,
        wind,
        pressure,
        extra,
    })
}

/// Parses HURDAT2 text.
///
/// Errors name the line (1-based) and its text. In lenient mode a malformed
/// storm is skipped up to the next valid header.
pub fn parse_hurdat2<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParseOutcome> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = ParseOutcome::default();
    let mut i = 0;
    let err = |idx: usize, message: String| ParseError {
        line: idx + 1,
        text: lines[idx].clone(),
        message,
    };
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        match parse_storm(&lines, i, &err) {
            Ok((record, next)) => {
                out.records.push(record);
                i = next;
            }
            Err((e, at)) => {
                if mode == ParseMode::Strict {
                    return Err(e.into());
                }
                log::warn!("skipping storm: {e}");
                out.skipped.push(e);
                i = at + 1;
                while i < lines.len() && parse_header(&lines[i]).is_err() {
                    i += 1;
                }
            }
        }
    }
    Ok(out)
}

type StormParse = std::result::Result<(StormRecord, usize), (ParseError, usize)>;

fn parse_storm(lines: &[String], start: usize, err: &impl Fn(usize, String) -> ParseError) -> StormParse {
    let header = parse_header(&lines[start]).map_err(|m| (err(start, m), start))?;
    let mut observations = Vec::with_capacity(header.count);
    let mut i = start + 1;
    while observations.len() < header.count {
        if i >= lines.len() {
            let msg = format!(
                "storm {} declares {} entries but the input ends after {}",
                header.id,
                header.count,
                observations.len()
            );
            return Err((err(start, msg), start));
        }
        if parse_header(&lines[i]).is_ok() {
            let msg = format!(
                "storm {} declares {} entries but the next header follows after {}",
                header.id,
                header.count,
                observations.len()
            );
            return Err((err(i, msg), i - 1));
        }
        let obs = parse_observation(&lines[i]).map_err(|m| (err(i, m), i))?;
        observations.push(obs);
        i += 1;
    }
    Ok((
        StormRecord {
            id: header.id,
            name: header.name,
            observations,
        },
        i,
    ))
}

/// Parses a HURDAT2 file.
pub fn read_hurdat2(path: &std::path::Path, mode: ParseMode) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    parse_hurdat2(std::io::BufReader::new(file), mode).map_err(|e| e.context(format!("parsing {}", path.display())))
}

fn fmt_coord(v: f64, pos: char, neg: char) -> String {
    format!("{:.1}{}", v.abs(), if v < 0.0 { neg } else { pos })
}

/// Writes records in the HURDAT2 layout with normalized spacing.
pub fn serialize_hurdat2(records: &[StormRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}, {:>18}, {:>6},", r.id, r.name, r.observations.len());
        for o in &r.observations {
            let _ = write!(
                s,
                "{}, {}, {:>1}, {:>2}, {:>5}, {:>6}, {:>3}, {:>4},",
                o.time.format("%Y%m%d"),
                o.time.format("%H%M"),
                o.record_id.map(String::from).unwrap_or_default(),
                o.status,
                fmt_coord(o.lat, 'N', 'S'),
                fmt_coord(o.lon, 'E', 'W'),
                o.wind.map_or(MISSING_WIND, |w| w as i32),
                o.pressure.map_or(MISSING_PRESSURE, |p| p as i32),
            );
            for x in &o.extra {
                let _ = write!(s, " {x:>4},");
            }
            s.push('\n');
        }
    }
    s
}

/// Selection of storms and observations for modelling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestFilter {
    /// Years to keep; empty keeps all.
    pub years: BTreeSet<i32>,
    pub basin: String,
    pub min_samples: usize,
    /// Keep only 0000/0600/1200/1800 UTC observations.
    pub synoptic_only: bool,
}

impl Default for IngestFilter {
    fn default() -> Self {
        IngestFilter {
            years: BTreeSet::new(),
            basin: "AL".into(),
            min_samples: 13,
            synoptic_only: true,
        }
    }
}

impl IngestFilter {
    pub fn with_years(mut self, years: impl IntoIterator<Item = i32>) -> Self {
        self.years = years.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples < 2 {
            return Err(Error::InvalidArgument(format!("min_samples must be at least 2, got {}", self.min_samples)));
        }
        Ok(())
    }

    /// Observations kept for modelling: rows with a wind value, synoptic if
    /// requested, one per timestamp.
    pub fn observations<'a>(&self, storm: &'a StormRecord) -> Vec<&'a Observation> {
        let mut kept: Vec<&Observation> = Vec::with_capacity(storm.observations.len());
        for o in &storm.observations {
            if o.wind.is_none() || (self.synoptic_only && !o.is_synoptic()) {
                continue;
            }
            if kept.last().is_some_and(|p| p.time >= o.time) {
                continue;
            }
            kept.push(o);
        }
        kept
    }

    pub fn accepts(&self, storm: &StormRecord) -> bool {
        self.selects(storm) && self.observations(storm).len() >= self.min_samples
    }

    fn selects(&self, storm: &StormRecord) -> bool {
        storm.basin() == self.basin && (self.years.is_empty() || self.years.contains(&storm.year()))
    }

    fn kept<'a>(&self, storm: &'a StormRecord) -> Result<Vec<&'a Observation>> {
        self.validate()?;
        if !self.selects(storm) {
            return Err(Error::InvalidArgument(format!("storm {} is outside the basin/year filter", storm.id)));
        }
        let obs = self.observations(storm);
        if obs.len() < self.min_samples {
            return Err(Error::InsufficientData(format!(
                "storm {} has {} usable observations, fewer than {}",
                storm.id,
                obs.len(),
                self.min_samples
            )));
        }
        Ok(obs)
    }
}

/// Unit vector `(cos φ cos θ, cos φ sin θ, sin φ)` for latitude φ and longitude θ in degrees.
pub fn latlon_to_point(lat: f64, lon: f64) -> Point {
    let (sp, cp) = lat.to_radians().sin_cos();
    let (sl, cl) = lon.to_radians().sin_cos();
    Point::new(vec![cp * cl, cp * sl, sp])
}

/// Latitude and longitude in degrees of a unit vector.
pub fn point_to_latlon(p: &Point) -> (f64, f64) {
    let c = p.coords();
    let lat = c[2].atan2(c[0].hypot(c[1])).to_degrees();
    let lon = c[1].atan2(c[0]).to_degrees();
    (lat, lon)
}

fn hours(obs: &[&Observation]) -> Vec<f64> {
    let t0 = obs[0].time;
    obs.iter().map(|o| (o.time - t0).num_seconds() as f64 / 3600.0).collect()
}

/// Track on `S²`; raw times in hours since the first kept observation.
pub fn to_track_trajectory(storm: &StormRecord, filter: &IngestFilter) -> Result<Trajectory> {
    let obs = filter.kept(storm)?;
    let samples = obs.iter().map(|o| latlon_to_point(o.lat, o.lon)).collect();
    Ok(Trajectory::new(hours(&obs), samples)?.with_id(storm.id.clone()))
}

/// Maximum sustained wind (kt) on `ℝ`; raw times in hours.
pub fn to_intensity_trajectory(storm: &StormRecord, filter: &IngestFilter) -> Result<Trajectory> {
    let obs = filter.kept(storm)?;
    let samples = obs.iter().map(|o| Point::new(vec![o.wind.expect("kept rows have wind") as f64])).collect();
    Ok(Trajectory::new(hours(&obs), samples)?.with_id(storm.id.clone()))
}

/// Kept observation times, aligned with the trajectory samples.
pub fn observation_times(storm: &StormRecord, filter: &IngestFilter) -> Vec<NaiveDateTime> {
    filter.observations(storm).iter().map(|o| o.time).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Prior: all 2020 storms. Validation: the last 21 of 2020. Test: all 2021 storms.
    Exp1,
    /// Prior: the first 16 storms of 2021. Validation and test: the last 5 of 2021.
    Exp2,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
        }
    }
}

/// Storms per role, in chronological order.
#[derive(Clone, Debug, Serialize)]
pub struct Cohort {
    pub experiment: Experiment,
    pub prior: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Eligible storms of `year`, sorted by first observation time.
fn season<'a>(records: &'a [StormRecord], filter: &IngestFilter, year: i32) -> Vec<&'a StormRecord> {
    let f = IngestFilter {
        years: [year].into_iter().collect(),
        ..filter.clone()
    };
    let mut s: Vec<&StormRecord> = records.iter().filter(|r| f.accepts(r)).collect();
    s.sort_by_key(|r| (r.start(), r.id.clone()));
    s
}

fn ids(s: &[&StormRecord]) -> Vec<String> {
    s.iter().map(|r| r.id.clone()).collect()
}

fn expect_count(what: &str, got: usize, want: usize) {
    if got != want {
        log::warn!("{what}: expected {want} storms, found {got}");
    }
}

/// Builds the experiment cohorts from the 2020 and 2021 seasons.
///
/// Counts that differ from 31 storms in 2020 and 21 in 2021 are logged but
/// not fatal.
pub fn select_cohort(records: &[StormRecord], filter: &IngestFilter, experiment: Experiment) -> Result<Cohort> {
    filter.validate()?;
    let s2020 = season(records, filter, 2020);
    let s2021 = season(records, filter, 2021);
    let tail = |s: &[&StormRecord], k: usize| ids(&s[s.len().saturating_sub(k)..]);
    let cohort = match experiment {
        Experiment::Exp1 => {
            expect_count("2020 season", s2020.len(), 31);
            expect_count("2021 season", s2021.len(), 21);
            Cohort {
                experiment,
                prior: ids(&s2020),
                validation: tail(&s2020, 21),
                test: ids(&s2021),
            }
        }
        Experiment::Exp2 => {
            expect_count("2021 season", s2021.len(), 21);
            let last = tail(&s2021, 5);
            Cohort {
                experiment,
                prior: ids(&s2021[..s2021.len().min(16)]),
                validation: last.clone(),
                test: last,
            }
        }
    };
    if cohort.prior.len() < 2 || cohort.test.is_empty() || cohort.validation.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: cohort too small (prior {}, validation {}, test {})",
            experiment.name(),
            cohort.prior.len(),
            cohort.validation.len(),
            cohort.test.len()
        )));
    }
    log::info!(
        "{}: prior {}, validation {}, test {}",
        experiment.name(),
        cohort.prior.len(),
        cohort.validation.len(),
        cohort.test.len()
    );
    Ok(cohort)
}

pub fn find<'a>(records: &'a [StormRecord], id: &str) -> Result<&'a StormRecord> {
    records
        .iter()
        .find(|r| r.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::NotFound(format!("storm {id} not found")))
}

/// One CSV row per observation.
pub fn write_records_csv<W: std::io::Write>(records: &[StormRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["storm_id", "name", "timestamp", "record_id", "status", "lat", "lon", "wind_kt", "pressure_mb"])?;
    for r in records {
        for o in &r.observations {
            w.write_record([
                r.id.clone(),
                r.name.clone(),
                o.time.format("%Y-%m-%dT%H:%MZ").to_string(),
                o.record_id.map(String::from).unwrap_or_default(),
                o.status.clone(),
                format!("{:.1}", o.lat),
                format!("{:.1}", o.lon),
                o.wind.map(|v| v.to_string()).unwrap_or_default(),
                o.pressure.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
