//! JSON instance files.
//!
//! Rationals are written as strings (`"3/2"`, `"0.25"`, `"7"`); plain JSON
//! integers are accepted on input. Times are integer seconds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use transit_eq_core::demand::{discretize_elastic, enumerate_distinct_costs, ElasticCurve, Group};
use transit_eq_core::network::{unroll_periodic, Station, Stop, Trip};
use transit_eq_core::rational::{self, Rational, Time};
use transit_eq_core::{Commodity, Instance, Window};

pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on distinct path costs when discretizing a group.
pub const GROUP_COST_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e)
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Invalid { path: path.into(), message: message.into() }
}

pub(crate) mod rat {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;
    use transit_eq_core::rational::{self, Rational};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    struct RatVisitor;

    impl Visitor<'_> for RatVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as \"n/d\", a decimal string, or an integer")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            rational::parse(v).ok_or_else(|| E::custom(format!("invalid rational `{v}`")))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(rational::int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            i64::try_from(v).map(rational::int).map_err(|_| E::custom("integer out of range"))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RatVisitor)
    }

    /// For sources like CSV that guess numeric types: always read the text.
    pub mod text {
        use super::*;

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
            d.deserialize_str(RatVisitor)
        }
    }

    pub mod opt {
        use super::*;
        use serde::Deserialize;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match q {
                Some(q) => super::serialize(q, s),
                None => s.serialize_none(),
            }
        }

        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super")] Rational);

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_late: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_early: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub outside_cost: Option<Rational>,
}

impl Defaults {
    fn is_empty(&self) -> bool {
        *self == Defaults::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub station: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arr: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripSpec {
    pub id: String,
    #[serde(with = "rat")]
    pub capacity: Rational,
    pub stops: Vec<StopSpec>,
}

/// Period-relative trip templates, copied every `period` seconds with
/// first departures in `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub period: Time,
    pub start: Time,
    pub end: Time,
    pub trips: Vec<TripSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommoditySpec {
    pub id: String,
    pub origin: String,
    pub destination: String,
    /// `[lo, hi]`; equal bounds fix the departure time.
    pub window: [Time; 2],
    #[serde(default)]
    pub target: Time,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_late: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_early: Option<Rational>,
    #[serde(with = "rat")]
    pub demand: Rational,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub outside_cost: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint(#[serde(with = "rat")] pub Rational, #[serde(with = "rat")] pub Rational);

/// Elastic demand: `curve` lists `[cost, volume]` steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub window: [Time; 2],
    #[serde(default)]
    pub target: Time,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_late: Option<Rational>,
    #[serde(default, with = "rat::opt", skip_serializing_if = "Option::is_none")]
    pub gamma_early: Option<Rational>,
    pub curve: Vec<Breakpoint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Defaults::is_empty")]
    pub defaults: Defaults,
    pub stations: Vec<String>,
    #[serde(default)]
    pub trips: Vec<TripSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub commodities: Vec<CommoditySpec>,
}

pub fn parse(text: &str) -> Result<InstanceFile, FormatError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.validate()?;
    Ok(file)
}

pub fn serialize(file: &InstanceFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("instance files always serialize");
    s.push('\n');
    s
}

/// Parses and resolves in one step.
pub fn load_instance(text: &str) -> Result<Instance, FormatError> {
    parse(text)?.to_instance()
}

pub(crate) fn trip_spec(t: &Trip) -> TripSpec {
    TripSpec {
        id: t.id.clone(),
        capacity: t.capacity.clone(),
        stops: t.stops.iter().map(|s| StopSpec { station: s.station.clone(), arr: s.arrival, dep: s.departure }).collect(),
    }
}

fn trip_of(t: &TripSpec) -> Trip {
    Trip {
        id: t.id.clone(),
        capacity: t.capacity.clone(),
        stops: t.stops.iter().map(|s| Stop { station: s.station.clone(), arrival: s.arr, departure: s.dep }).collect(),
    }
}

impl InstanceFile {
    /// Every field written explicitly; no defaults, groups or periodic block.
    pub fn from_instance(inst: &Instance) -> Self {
        InstanceFile {
            version: FORMAT_VERSION,
            defaults: Defaults::default(),
            stations: inst.stations.iter().map(|s| s.id.clone()).collect(),
            trips: inst.trips.iter().map(trip_spec).collect(),
            periodic: None,
            groups: Vec::new(),
            commodities: inst
                .commodities
                .iter()
                .map(|c| CommoditySpec {
                    id: c.id.clone(),
                    origin: c.origin.clone(),
                    destination: c.destination.clone(),
                    window: [c.window.lo, c.window.hi],
                    target: c.target,
                    beta: Some(c.beta.clone()),
                    gamma_late: Some(c.gamma_late.clone()),
                    gamma_early: Some(c.gamma_early.clone()),
                    demand: c.demand.clone(),
                    outside_cost: Some(c.outside_cost.clone()),
                })
                .collect(),
        }
    }

    /// Schema checks beyond what serde enforces, with path-addressed errors.
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.version != FORMAT_VERSION {
            return Err(invalid("version", format!("unsupported version {}, expected {FORMAT_VERSION}", self.version)));
        }
        let mut stations = BTreeSet::new();
        for (k, s) in self.stations.iter().enumerate() {
            if !stations.insert(s.as_str()) {
                return Err(invalid(format!("stations[{k}]"), format!("duplicate station `{s}`")));
            }
        }
        let station = |path: String, id: &str| {
            if stations.contains(id) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown station `{id}`")))
            }
        };
        let check_trips = |prefix: &str, trips: &[TripSpec]| -> Result<(), FormatError> {
            for (k, t) in trips.iter().enumerate() {
                if t.capacity < rational::zero() {
                    return Err(invalid(format!("{prefix}[{k}].capacity"), "capacity must be non-negative"));
                }
                for (j, s) in t.stops.iter().enumerate() {
                    let path = format!("{prefix}[{k}].stops[{j}]");
                    station(format!("{path}.station"), &s.station)?;
                    if s.arr.is_some_and(|x| x < 0) || s.dep.is_some_and(|x| x < 0) {
                        return Err(invalid(path, "times must be non-negative"));
                    }
                }
            }
            Ok(())
        };
        check_trips("trips", &self.trips)?;
        if let Some(p) = &self.periodic {
            if p.period <= 0 || p.end <= p.start || p.start < 0 {
                return Err(invalid("periodic", "need period > 0 and 0 ≤ start < end"));
            }
            check_trips("periodic.trips", &p.trips)?;
        }
        for (k, c) in self.commodities.iter().enumerate() {
            let path = format!("commodities[{k}]");
            station(format!("{path}.origin"), &c.origin)?;
            station(format!("{path}.destination"), &c.destination)?;
            check_window(&path, c.window, c.target)?;
            if c.demand < rational::zero() {
                return Err(invalid(format!("{path}.demand"), "demand must be non-negative"));
            }
            if c.outside_cost.is_none() && self.defaults.outside_cost.is_none() {
                return Err(invalid(format!("{path}.outside_cost"), "missing, and no default is set"));
            }
        }
        for (k, g) in self.groups.iter().enumerate() {
            let path = format!("groups[{k}]");
            station(format!("{path}.origin"), &g.origin)?;
            station(format!("{path}.destination"), &g.destination)?;
            check_window(&path, g.window, g.target)?;
            curve_of(g).map_err(|e| invalid(format!("{path}.curve"), e.to_string()))?;
        }
        Ok(())
    }

    /// Concrete trips: absolute ones followed by unrolled periodic copies.
    pub fn concrete_trips(&self) -> Result<Vec<Trip>, FormatError> {
        let mut trips: Vec<Trip> = self.trips.iter().map(trip_of).collect();
        if let Some(p) = &self.periodic {
            let templates: Vec<Trip> = p.trips.iter().map(trip_of).collect();
            let copies = unroll_periodic(&templates, p.period, p.start, p.end).map_err(|e| invalid("periodic", e.to_string()))?;
            trips.extend(copies);
        }
        Ok(trips)
    }

    /// Resolves defaults, unrolls periodic trips and discretizes groups.
    pub fn to_instance(&self) -> Result<Instance, FormatError> {
        self.validate()?;
        let d = &self.defaults;
        let pick = |own: &Option<Rational>, default: &Option<Rational>, fallback: Rational| {
            own.clone().or_else(|| default.clone()).unwrap_or(fallback)
        };
        let mut inst =
            Instance { stations: self.stations.iter().map(Station::new).collect(), trips: self.concrete_trips()?, commodities: Vec::new() };
        for c in &self.commodities {
            inst.commodities.push(Commodity {
                id: c.id.clone(),
                origin: c.origin.clone(),
                destination: c.destination.clone(),
                window: Window::new(c.window[0], c.window[1]),
                target: c.target,
                beta: pick(&c.beta, &d.beta, rational::one()),
                gamma_late: pick(&c.gamma_late, &d.gamma_late, rational::zero()),
                gamma_early: pick(&c.gamma_early, &d.gamma_early, rational::zero()),
                demand: c.demand.clone(),
                outside_cost: pick(&c.outside_cost, &d.outside_cost, rational::zero()),
            });
        }
        if !self.groups.is_empty() {
            let g = inst.graph().map_err(|e| invalid("trips", e.to_string()))?;
            for (k, gs) in self.groups.iter().enumerate() {
                let path = format!("groups[{k}]");
                let group = Group {
                    id: gs.id.clone(),
                    origin: gs.origin.clone(),
                    destination: gs.destination.clone(),
                    window: Window::new(gs.window[0], gs.window[1]),
                    target: gs.target,
                    beta: pick(&gs.beta, &d.beta, rational::one()),
                    gamma_late: pick(&gs.gamma_late, &d.gamma_late, rational::zero()),
                    gamma_early: pick(&gs.gamma_early, &d.gamma_early, rational::zero()),
                    curve: curve_of(gs).map_err(|e| invalid(format!("{path}.curve"), e.to_string()))?,
                };
                let costs = enumerate_distinct_costs(&group, &g, GROUP_COST_CAP);
                if costs.truncated {
                    return Err(invalid(path, format!("more than {GROUP_COST_CAP} distinct path costs")));
                }
                let parts = discretize_elastic(&group, &costs.costs).map_err(|e| invalid(path, e.to_string()))?;
                inst.commodities.extend(parts);
            }
        }
        inst.network().map_err(|e| invalid("instance", e.to_string()))?;
        Ok(inst)
    }
}

fn check_window(path: &str, w: [Time; 2], target: Time) -> Result<(), FormatError> {
    if w[0] < 0 || w[1] < w[0] {
        return Err(invalid(format!("{path}.window"), "need 0 ≤ lo ≤ hi"));
    }
    if target < 0 {
        return Err(invalid(format!("{path}.target"), "times must be non-negative"));
    }
    Ok(())
}

fn curve_of(g: &GroupSpec) -> Result<ElasticCurve, transit_eq_core::demand::DemandError> {
    ElasticCurve::new(g.curve.iter().map(|b| (b.0.clone(), b.1.clone())).collect())
}
