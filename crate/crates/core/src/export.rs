//! Forecast artifacts: per-step CSV and GeoJSON track pairs.
//!
//! Machine-readable numbers carry 17 significant digits.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDateTime;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::forecast::ForecastReport;
use crate::hurdat::{find, point_to_latlon, IngestFilter, StormRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Geojson,
}

/// `x` with 17 significant digits.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One predicted time of one storm.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRow {
    pub storm_id: String,
    pub time: NaiveDateTime,
    pub truth_lat: f64,
    pub truth_lon: f64,
    pub truth_wind: f64,
    pub pred_lat: Option<f64>,
    pub pred_lon: Option<f64>,
    pub pred_wind: Option<f64>,
    pub track_error: Option<f64>,
    pub intensity_error: Option<f64>,
    /// Messages of failed steps.
    pub failure: Option<String>,
}

/// Joins track and intensity reports on storm and predicted index. Storms
/// keep the order of their first appearance; rows are ordered by index.
pub fn forecast_rows(
    records: &[StormRecord],
    filter: &IngestFilter,
    track: &[ForecastReport],
    intensity: &[ForecastReport],
    earth_radius: f64,
) -> Result<Vec<ForecastRow>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<(usize, usize), ForecastRow> = BTreeMap::new();
    for (reports, is_track) in [(track, true), (intensity, false)] {
        for rep in reports {
            let id = rep
                .id
                .clone()
                .ok_or_else(|| Error::InvalidArgument("exported reports need storm ids".into()))?;
            let storm = find(records, &id)?;
            let obs = filter.observations(storm);
            let k = match order.iter().position(|s| *s == id) {
                Some(k) => k,
                None => {
                    order.push(id.clone());
                    order.len() - 1
                }
            };
            for step in &rep.steps {
                let o = obs.get(step.target).ok_or_else(|| {
                    Error::InvalidArgument(format!("{id}: step {} beyond the kept observations", step.target))
                })?;
                let row = rows.entry((k, step.target)).or_insert_with(|| ForecastRow {
                    storm_id: id.clone(),
                    time: o.time,
                    truth_lat: o.lat,
                    truth_lon: o.lon,
                    truth_wind: o.wind.unwrap_or_default() as f64,
                    pred_lat: None,
                    pred_lon: None,
                    pred_wind: None,
                    track_error: None,
                    intensity_error: None,
                    failure: None,
                });
                match &step.outcome {
                    Ok((p, d)) if is_track => {
                        let (lat, lon) = point_to_latlon(p);
                        row.pred_lat = Some(lat);
                        row.pred_lon = Some(lon);
                        row.track_error = Some(d * earth_radius);
                    }
                    Ok((p, d)) => {
                        row.pred_wind = Some(p.coords()[0]);
                        row.intensity_error = Some(*d);
                    }
                    Err(msg) => {
                        let tag = if is_track { "track" } else { "intensity" };
                        let text = format!("{tag}: {msg}");
                        row.failure = Some(match row.failure.take() {
                            Some(prev) => format!("{prev}; {text}"),
                            None => text,
                        });
                    }
                }
            }
        }
    }
    Ok(rows.into_values().collect())
}

/// CSV with a leading `# config: …` comment line.
pub fn write_forecast_csv<W: Write>(rows: &[ForecastRow], config: &Value, mut out: W) -> Result<()> {
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "storm_id",
        "timestamp",
        "truth_lat",
        "truth_lon",
        "truth_wind_kt",
        "pred_lat",
        "pred_lon",
        "pred_wind_kt",
        "track_error_mi",
        "intensity_error_kt",
        "failure",
    ])?;
    let opt = |v: Option<f64>| v.map(sig17).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.storm_id.clone(),
            r.time.format("%Y-%m-%dT%H:%MZ").to_string(),
            sig17(r.truth_lat),
            sig17(r.truth_lon),
            sig17(r.truth_wind),
            opt(r.pred_lat),
            opt(r.pred_lon),
            opt(r.pred_wind),
            opt(r.track_error),
            opt(r.intensity_error),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sig17_value(x: f64) -> Value {
    Value::Number(sig17(x).parse().expect("formatted float parses as a JSON number"))
}

/// GeoJSON feature collection with a truth and a forecast `LineString` per
/// storm in the track reports. Coordinates are `[lon, lat]`.
pub fn forecast_geojson(
    records: &[StormRecord],
    filter: &IngestFilter,
    track: &[ForecastReport],
    config: &Value,
) -> Result<Value> {
    let mut features = Vec::new();
    for rep in track {
        let id = rep
            .id
            .clone()
            .ok_or_else(|| Error::InvalidArgument("exported reports need storm ids".into()))?;
        let storm = find(records, &id)?;
        let truth: Vec<Value> = filter
            .observations(storm)
            .iter()
            .map(|o| json!([sig17_value(o.lon), sig17_value(o.lat)]))
            .collect();
        let forecast: Vec<Value> = rep
            .steps
            .iter()
            .filter_map(|s| s.prediction())
            .map(|p| {
                let (lat, lon) = point_to_latlon(p);
                json!([sig17_value(lon), sig17_value(lat)])
            })
            .collect();
        for (role, coords) in [("truth", truth), ("forecast", forecast)] {
            features.push(json!({
                "type": "Feature",
                "properties": {
                    "storm_id": id,
                    "name": storm.name,
                    "role": role,
                    "horizon_steps": rep.horizon_steps,
                },
                "geometry": { "type": "LineString", "coordinates": coords },
            }));
        }
    }
    Ok(json!({
        "type": "FeatureCollection",
        "config": config,
        "features": features,
    }))
}
