//! Minimal CSV timetable importer.
//!
//! * `stations.csv`: `station_id` (optional; otherwise stations are taken
//!   from `trips.csv` in order of appearance)
//! * `trips.csv`: `trip_id,seq,station,arr_sec,dep_sec,capacity`
//! * `demand.csv`: `origin,destination,volume`

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use transit_eq_core::rational::{Rational, Time};

use crate::format::{rat, CommoditySpec, Defaults, FormatError, InstanceFile, StopSpec, TripSpec, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
    #[error("{file} row {row}: {message}")]
    Row { file: String, row: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Deserialize)]
struct StationRow {
    station_id: String,
}

#[derive(Deserialize)]
struct TripRow {
    trip_id: String,
    seq: u32,
    station: String,
    arr_sec: Option<Time>,
    dep_sec: Option<Time>,
    #[serde(deserialize_with = "rat::text::deserialize")]
    capacity: Rational,
}

#[derive(Deserialize)]
struct DemandRow {
    origin: String,
    destination: String,
    #[serde(deserialize_with = "rat::text::deserialize")]
    volume: Rational,
}

/// Settings the CSV files do not carry.
#[derive(Clone, Debug)]
pub struct ImportOptions {
    pub window: [Time; 2],
    pub outside_cost: Rational,
}

fn rows<T: for<'de> Deserialize<'de>>(file: &str, reader: impl Read) -> Result<Vec<T>, ImportError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| ImportError::Csv { file: file.into(), source })
}

/// First-seen order, capacity and `(seq, stop)` pairs of one trip.
type TripRows = (usize, Rational, Vec<(u32, StopSpec)>);

/// Builds an instance file from CSV readers.
pub fn import(stations: Option<impl Read>, trips: impl Read, demand: impl Read, opts: &ImportOptions) -> Result<InstanceFile, ImportError> {
    let trip_rows: Vec<TripRow> = rows("trips.csv", trips)?;
    let mut station_ids: Vec<String> = match stations {
        Some(r) => rows::<StationRow>("stations.csv", r)?.into_iter().map(|s| s.station_id).collect(),
        None => Vec::new(),
    };
    let from_trips = station_ids.is_empty();
    let mut grouped: BTreeMap<String, TripRows> = BTreeMap::new();
    for (k, r) in trip_rows.into_iter().enumerate() {
        if from_trips && !station_ids.contains(&r.station) {
            station_ids.push(r.station.clone());
        }
        let order = grouped.len();
        let entry = grouped.entry(r.trip_id.clone()).or_insert_with(|| (order, r.capacity.clone(), Vec::new()));
        if entry.1 != r.capacity {
            return Err(ImportError::Row {
                file: "trips.csv".into(),
                row: k + 2,
                message: format!("capacity differs within trip `{}`", r.trip_id),
            });
        }
        entry.2.push((r.seq, StopSpec { station: r.station, arr: r.arr_sec, dep: r.dep_sec }));
    }
    let mut trips: Vec<(usize, TripSpec)> = grouped
        .into_iter()
        .map(|(id, (order, capacity, mut stops))| {
            stops.sort_by_key(|s| s.0);
            (order, TripSpec { id, capacity, stops: stops.into_iter().map(|s| s.1).collect() })
        })
        .collect();
    trips.sort_by_key(|t| t.0);

    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut commodities = Vec::new();
    for r in rows::<DemandRow>("demand.csv", demand)? {
        let n = seen.entry((r.origin.clone(), r.destination.clone())).or_insert(0);
        *n += 1;
        let id = if *n == 1 { format!("{}->{}", r.origin, r.destination) } else { format!("{}->{}#{}", r.origin, r.destination, n) };
        commodities.push(CommoditySpec {
            id,
            origin: r.origin,
            destination: r.destination,
            window: opts.window,
            target: 0,
            beta: None,
            gamma_late: None,
            gamma_early: None,
            demand: r.volume,
            outside_cost: None,
        });
    }
    let file = InstanceFile {
        version: FORMAT_VERSION,
        defaults: Defaults { outside_cost: Some(opts.outside_cost.clone()), ..Defaults::default() },
        stations: station_ids,
        trips: trips.into_iter().map(|t| t.1).collect(),
        periodic: None,
        groups: Vec::new(),
        commodities,
    };
    file.validate()?;
    Ok(file)
}

/// Reads `stations.csv` (if present), `trips.csv` and `demand.csv` from `dir`.
pub fn import_dir(dir: &Path, opts: &ImportOptions) -> Result<InstanceFile, ImportError> {
    let stations = dir.join("stations.csv");
    let stations = if stations.exists() { Some(std::fs::File::open(stations)?) } else { None };
    let trips = std::fs::File::open(dir.join("trips.csv"))?;
    let demand = std::fs::File::open(dir.join("demand.csv"))?;
    import(stations, trips, demand, opts)
}
