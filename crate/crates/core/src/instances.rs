//! Instances, catalogue generators, 3-SAT gadgets and demand shaping.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::{station_event_times, Commodity, Window};
use crate::network::{ExtendedGraph, NetworkError, Station, TimeExpandedGraph, Trip};
use crate::rational::{self, frac, int, Rational, Time};

/// Stations, trips and commodities; everything a solver needs.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Instance {
    pub stations: Vec<Station>,
    pub trips: Vec<Trip>,
    pub commodities: Vec<Commodity>,
}

impl Instance {
    pub fn graph(&self) -> Result<TimeExpandedGraph, NetworkError> {
        TimeExpandedGraph::build(&self.stations, &self.trips)
    }

    /// Builds the time-expanded graph and extends it by the commodities.
    pub fn network(&self) -> Result<ExtendedGraph, NetworkError> {
        ExtendedGraph::new(self.graph()?, self.commodities.clone())
    }

    pub fn total_demand(&self) -> Rational {
        self.commodities.iter().map(|c| &c.demand).sum()
    }

    /// True when every commodity has a singleton departure window.
    pub fn is_fixed_departure(&self) -> bool {
        self.commodities.iter().all(|c| c.window.is_singleton())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceError {
    UnknownExample(String),
    InvalidEpsilon,
    Formula(String),
    InvalidShares,
    InvalidSlot,
    NonPositiveFactor,
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::UnknownExample(name) => write!(f, "unknown example `{name}`"),
            InstanceError::InvalidEpsilon => write!(f, "epsilon must lie strictly between 0 and 1"),
            InstanceError::Formula(msg) => write!(f, "invalid formula: {msg}"),
            InstanceError::InvalidShares => write!(f, "expected 24 non-negative shares summing to 1"),
            InstanceError::InvalidSlot => write!(f, "slot length must be positive and divide one hour"),
            InstanceError::NonPositiveFactor => write!(f, "scaling factor must be positive"),
        }
    }
}

const H: Time = 3600;

/// The catalogue networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Example {
    /// Two trips sharing a corridor.
    Fig1,
    /// Departure time choice without an equilibrium.
    Fig4,
    /// Two equilibria with different social costs.
    Fig6,
    /// Red trip arrival delayed by `delay` seconds beyond the base timetable.
    Fig7 { delay: Time },
    /// Step sizes governed by the green capacity 1 − ε.
    Fig9 { eps: Rational },
    /// Cyclic heuristic behaviour.
    Fig10,
}

impl Example {
    /// Parses `fig1`, `fig4`, `fig6`, `fig7`, `fig7:<delay>`, `fig9`, `fig9:<eps>` and `fig10`.
    pub fn parse(name: &str) -> Result<Self, InstanceError> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let unknown = || InstanceError::UnknownExample(name.into());
        Ok(match (head, arg) {
            ("fig1", None) => Example::Fig1,
            ("fig4", None) => Example::Fig4,
            ("fig6", None) => Example::Fig6,
            ("fig7", None) => Example::Fig7 { delay: 0 },
            ("fig7", Some(a)) => Example::Fig7 { delay: a.parse().map_err(|_| unknown())? },
            ("fig9", None) => Example::Fig9 { eps: frac(1, 64) },
            ("fig9", Some(a)) => {
                let eps = rational::parse(a).ok_or_else(unknown)?;
                if !eps.is_positive() || eps >= int(1) {
                    return Err(InstanceError::InvalidEpsilon);
                }
                Example::Fig9 { eps }
            }
            ("fig10", None) => Example::Fig10,
            _ => return Err(unknown()),
        })
    }
}

fn stations(ids: &[&str]) -> Vec<Station> {
    ids.iter().map(|s| Station::new(*s)).collect()
}

fn hourly(c: &mut Commodity) {
    c.beta = frac(1, H);
}

pub fn gen_example(example: &Example) -> Instance {
    match example {
        Example::Fig1 => {
            let trips = vec![
                Trip::new(
                    "red",
                    int(1),
                    &[("a", None, Some(H)), ("b", Some(3 * H), Some(4 * H)), ("c", Some(6 * H), Some(7 * H)), ("d", Some(8 * H), None)],
                ),
                Trip::simple("blue", int(1), &[("a", 5 * H / 2), ("c", 9 * H / 2)]),
            ];
            let c = Commodity::new("a-c", "a", "c", Window::singleton(H), int(2), int(100_000));
            Instance { stations: stations(&["a", "b", "c", "d"]), trips, commodities: vec![c] }
        }
        Example::Fig4 => {
            let trips = vec![
                Trip::simple("blue", int(1), &[("s", H), ("v", 2 * H), ("s", 3 * H), ("t", 4 * H)]),
                Trip::simple("red", int(1), &[("s", H), ("t", 5 * H)]),
            ];
            let mut c = Commodity::new("s-t", "s", "t", Window::new(H, 5 * H), int(2), int(100));
            hourly(&mut c);
            Instance { stations: stations(&["s", "v", "t"]), trips, commodities: vec![c] }
        }
        Example::Fig6 => {
            let trips = vec![
                Trip::simple("blue", int(1), &[("s", H), ("v", 3 * H / 2), ("s", 2 * H)]),
                Trip::simple("red", int(1), &[("v", 2 * H), ("t", 9 * H / 2)]),
                Trip::simple("green", int(1), &[("s", 5 * H / 2), ("t", 7 * H / 2)]),
                Trip::simple("pink", int(1), &[("s", 9 * H / 2), ("t", 11 * H / 2)]),
            ];
            let mut c = Commodity::new("s-t", "s", "t", Window::singleton(H), int(2), int(100));
            hourly(&mut c);
            Instance { stations: stations(&["s", "v", "t"]), trips, commodities: vec![c] }
        }
        Example::Fig7 { delay } => {
            let trips = vec![
                Trip::simple("blue", int(1), &[("s", H), ("v", 2 * H), ("t", 6 * H)]),
                Trip::simple("pink", int(1), &[("v", 2 * H), ("s", 3 * H), ("t", 5 * H)]),
                Trip::simple("red", int(1), &[("s", 5 * H), ("t", 6 * H + delay)]),
            ];
            let mut c = Commodity::new("s-t", "s", "t", Window::singleton(H), int(2), int(1000));
            hourly(&mut c);
            Instance { stations: stations(&["s", "v", "t"]), trips, commodities: vec![c] }
        }
        Example::Fig9 { eps } => {
            let trips = vec![
                Trip::new(
                    "red",
                    int(1),
                    &[("s1", None, Some(H)), ("s2", Some(2 * H), Some(3 * H)), ("v", Some(4 * H), Some(5 * H)), ("t24", Some(6 * H), None)],
                ),
                Trip::new("green", int(1) - eps, &[("s4", None, Some(H)), ("s3", Some(2 * H), Some(3 * H)), ("v", Some(4 * H), None)]),
                Trip::simple("blue", int(1), &[("v", 5 * H), ("t13", 6 * H)]),
            ];
            let mk = |id: &str, o: &str, d: &str, t: Time| {
                let mut c = Commodity::new(id, o, d, Window::singleton(t), int(1), int(10));
                hourly(&mut c);
                c
            };
            let commodities =
                vec![mk("c1", "s1", "t13", H), mk("c2", "s2", "t24", 3 * H), mk("c3", "s3", "t13", 3 * H), mk("c4", "s4", "t24", H)];
            Instance { stations: stations(&["t13", "s1", "s2", "v", "s3", "s4", "t24"]), trips, commodities }
        }
        Example::Fig10 => {
            let trips = vec![
                Trip::simple("green", int(1), &[("s1", H), ("s2", 2 * H), ("u", 4 * H), ("v", 5 * H)]),
                Trip::simple("blue", int(1), &[("s3", 5 * H), ("v", 7 * H), ("t1", 8 * H), ("w", 9 * H)]),
                Trip::simple("red", int(1), &[("u", 8 * H), ("w", 11 * H), ("t23", 12 * H)]),
            ];
            let mk = |id: &str, o: &str, d: &str, t: Time| {
                let mut c = Commodity::new(id, o, d, Window::singleton(t), int(1), int(20));
                hourly(&mut c);
                c
            };
            let commodities = vec![mk("c1", "s1", "t1", H), mk("c2", "s2", "t23", 2 * H), mk("c3", "s3", "t23", 5 * H)];
            Instance { stations: stations(&["s1", "s2", "s3", "u", "v", "w", "t1", "t23"]), trips, commodities }
        }
    }
}

/// A literal: variable index (0-based) and polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Literal>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self, InstanceError> {
        let f = CnfFormula { num_vars, clauses };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        for (j, c) in self.clauses.iter().enumerate() {
            if c.is_empty() || c.len() > 3 {
                return Err(InstanceError::Formula(format!("clause {} must have 1 to 3 literals", j + 1)));
            }
            for (a, l) in c.iter().enumerate() {
                if l.var >= self.num_vars {
                    return Err(InstanceError::Formula(format!("clause {} uses an undeclared variable", j + 1)));
                }
                if c[..a].iter().any(|m| m.var == l.var) {
                    return Err(InstanceError::Formula(format!("clause {} repeats variable x{}", j + 1, l.var + 1)));
                }
            }
        }
        Ok(())
    }

    /// DIMACS-like text: optional `p cnf n m` header, clauses of signed
    /// 1-based integers terminated by `0`. Comment lines start with `c`.
    pub fn parse_dimacs(text: &str) -> Result<Self, InstanceError> {
        let mut num_vars = 0usize;
        let mut declared = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != "cnf" {
                    return Err(InstanceError::Formula("malformed header".into()));
                }
                declared = Some(parts[1].parse::<usize>().map_err(|_| InstanceError::Formula("bad variable count".into()))?);
                continue;
            }
            for tok in line.split_whitespace() {
                let v: i64 = tok.parse().map_err(|_| InstanceError::Formula(format!("bad literal `{tok}`")))?;
                if v == 0 {
                    clauses.push(core::mem::take(&mut current));
                } else {
                    let var = (v.unsigned_abs() - 1) as usize;
                    num_vars = num_vars.max(var + 1);
                    current.push(Literal { var, positive: v > 0 });
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        CnfFormula::new(declared.unwrap_or(num_vars).max(num_vars), clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let v = l.var as i64 + 1;
                out += &format!("{} ", if l.positive { v } else { -v });
            }
            out += "0\n";
        }
        out
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| assignment[l.var] == l.positive))
    }

    /// Exhaustive truth-table check.
    pub fn is_satisfiable(&self) -> bool {
        (0u64..1 << self.num_vars).any(|mask| {
            let a: Vec<bool> = (0..self.num_vars).map(|v| mask >> v & 1 == 1).collect();
            self.eval(&a)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatMode {
    /// Clause commodities may depart any time within the horizon.
    DepartureTimeChoice,
    /// Clause commodities depart at their gadget's start.
    Fixed,
}

/// Generated gadget instance plus where each part lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatInstance {
    pub instance: Instance,
    /// Commodity indices of the variables, then of the clauses.
    pub variable_commodities: Vec<usize>,
    pub clause_commodities: Vec<usize>,
    /// Green (true) and red (false) trip ids per variable.
    pub literal_trips: Vec<(String, String)>,
    pub end_time: Time,
}

/// Builds the reduction gadgets: one pair of capacity-1 vehicles per
/// variable, and per clause a blue/pink pair plus a zigzag chain over the
/// literal vehicles. Clause `j` starts at `1 + j·(9 + 2n)`.
pub fn gen_sat(formula: &CnfFormula, mode: SatMode) -> Result<SatInstance, InstanceError> {
    formula.validate()?;
    let n = formula.num_vars as Time;
    let span = 9 + 2 * n;
    let base = |j: usize| 1 + j as Time * span;
    let end = base(formula.clauses.len());

    let mut station_ids: Vec<String> = Vec::new();
    for i in 0..formula.num_vars {
        station_ids.push(format!("s_x{}", i + 1));
        station_ids.push(format!("t_x{}", i + 1));
    }
    // stops of each literal vehicle: (station, arrival = departure)
    let mut legs: Vec<[Vec<(String, Time)>; 2]> = vec![[Vec::new(), Vec::new()]; formula.num_vars];
    let mut trips = Vec::new();
    let mut commodities = Vec::new();
    let mut clause_commodities = Vec::new();
    for (j, clause) in formula.clauses.iter().enumerate() {
        let b = base(j);
        let c = j + 1;
        let v = |i: Time| format!("C{c}_v{i}");
        let (s_c, t_c) = (format!("s_C{c}"), format!("t_C{c}"));
        station_ids.push(s_c.clone());
        station_ids.push(t_c.clone());
        for i in 0..=n {
            station_ids.push(v(i));
        }
        trips.push(Trip::simple(format!("blue_C{c}"), int(1), &[(&s_c, b), (&v(n), b + 1), (&t_c, b + 7 + 2 * n)]));
        trips.push(Trip::new(
            format!("pink_C{c}"),
            int(1),
            &[(&v(0), None, Some(b + 2 + 2 * n)), (&s_c, Some(b + 3 + 2 * n), Some(b + 3 + 2 * n)), (&t_c, Some(b + 5 + 2 * n), None)],
        ));
        for i in (1..=n).rev() {
            let k = n - i;
            let (dep, arr) = (b + 2 + 2 * k, b + 3 + 2 * k);
            match clause.iter().find(|l| l.var as Time == i - 1) {
                Some(l) => {
                    let side = &mut legs[l.var][usize::from(!l.positive)];
                    side.push((v(i), dep));
                    side.push((v(i - 1), arr));
                }
                None => trips.push(Trip::simple(format!("fresh_C{c}_x{i}"), int(1), &[(&v(i), dep), (&v(i - 1), arr)])),
            }
        }
        let window = match mode {
            SatMode::DepartureTimeChoice => Window::new(0, end),
            SatMode::Fixed => Window::singleton(b),
        };
        clause_commodities.push(commodities.len());
        commodities.push(Commodity::new(format!("C{c}"), s_c, t_c, window, int(2), int(8 + 2 * n)));
    }

    let mut literal_trips = Vec::new();
    let mut variable_commodities = Vec::new();
    for (i, sides) in legs.iter().enumerate() {
        let (s_x, t_x) = (format!("s_x{}", i + 1), format!("t_x{}", i + 1));
        let mut ids = Vec::new();
        for (side, color) in sides.iter().zip(["green", "red"]) {
            let id = format!("{color}_x{}", i + 1);
            let mut stops: Vec<(&str, Option<Time>, Option<Time>)> = vec![(s_x.as_str(), None, Some(0))];
            stops.extend(side.iter().map(|(s, t)| (s.as_str(), Some(*t), Some(*t))));
            stops.push((t_x.as_str(), Some(end), None));
            trips.push(Trip::new(id.clone(), int(1), &stops));
            ids.push(id);
        }
        literal_trips.push((ids[0].clone(), ids[1].clone()));
        variable_commodities.push(commodities.len());
        commodities.push(Commodity::new(format!("x{}", i + 1), s_x, t_x, Window::singleton(0), int(1), rational::time(end + 1)));
    }
    let instance = Instance { stations: station_ids.into_iter().map(Station::new).collect(), trips, commodities };
    Ok(SatInstance { instance, variable_commodities, clause_commodities, literal_trips, end_time: end })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileMode {
    /// Each slot's commodity departs at the first event at its origin inside the slot.
    FixedDeparture,
    /// Each slot's commodity may depart any time and targets the slot start.
    DepartureTimeChoice,
}

/// Splits every commodity into one commodity per `slot` seconds of the day,
/// weighted by the share of the slot's hour.
pub fn apply_demand_profile(instance: &Instance, shares: &[Rational], slot: Time, mode: ProfileMode) -> Result<Instance, InstanceError> {
    if shares.len() != 24 || shares.iter().any(Signed::is_negative) || shares.iter().sum::<Rational>() != int(1) {
        return Err(InstanceError::InvalidShares);
    }
    if slot <= 0 || H % slot != 0 {
        return Err(InstanceError::InvalidSlot);
    }
    let events = station_event_times(instance);
    let horizon = instance
        .trips
        .iter()
        .flat_map(|t| t.stops.iter().flat_map(|s| s.arrival.into_iter().chain(s.departure)))
        .max()
        .unwrap_or(0)
        .max(24 * H);
    let per_hour = H / slot;
    let mut out = instance.clone();
    out.commodities.clear();
    for c in &instance.commodities {
        for k in 0..24 * per_hour {
            let share = &shares[(k / per_hour) as usize];
            let demand = &c.demand * share / int(per_hour);
            if demand.is_zero() {
                continue;
            }
            let start = k * slot;
            let mut piece = c.clone();
            piece.id = format!("{}@{k}", c.id);
            piece.demand = demand;
            match mode {
                ProfileMode::FixedDeparture => {
                    let t = events.get(c.origin.as_str()).and_then(|ts| ts.range(start..start + slot).next().copied()).unwrap_or(start);
                    piece.window = Window::singleton(t);
                }
                ProfileMode::DepartureTimeChoice => {
                    piece.window = Window::new(0, horizon);
                    piece.target = start;
                }
            }
            out.commodities.push(piece);
        }
    }
    Ok(out)
}

pub fn scale_demand(instance: &Instance, factor: &Rational) -> Result<Instance, InstanceError> {
    if !factor.is_positive() {
        return Err(InstanceError::NonPositiveFactor);
    }
    let mut out = instance.clone();
    for c in &mut out.commodities {
        c.demand = &c.demand * factor;
    }
    Ok(out)
}

/// Size and cost settings for [`gen_random`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomConfig {
    pub max_stations: usize,
    pub max_trips: usize,
    pub max_commodities: usize,
    pub max_driving_edges: usize,
    /// Singleton departure windows.
    pub fixed_departure: bool,
    /// Allowed β values; windows are widened only where β = 0.
    pub betas: Vec<Rational>,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            max_stations: 6,
            max_trips: 8,
            max_commodities: 3,
            max_driving_edges: 20,
            fixed_departure: true,
            betas: vec![int(1)],
        }
    }
}

/// A small random instance on a 10-minute grid, so events coincide often.
pub fn gen_random(config: &RandomConfig, seed: u64) -> Instance {
    const U: Time = 600;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.gen_range(2..=config.max_stations.max(2));
    let names: Vec<String> = (0..ns).map(|k| format!("s{k}")).collect();
    let capacities = [frac(1, 2), int(1), int(1), frac(3, 2), int(2)];
    let mut trips = Vec::new();
    let mut driving = 0;
    for z in 0..rng.gen_range(1..=config.max_trips.max(1)) {
        let hops = rng.gen_range(1..=3usize);
        if driving + hops > config.max_driving_edges {
            break;
        }
        driving += hops;
        let mut t = rng.gen_range(0..6) * U;
        let mut at = rng.gen_range(0..ns);
        let mut stops: Vec<(String, Option<Time>, Option<Time>)> = vec![(names[at].clone(), None, Some(t))];
        for h in 0..hops {
            let mut next = rng.gen_range(0..ns - 1);
            if next >= at {
                next += 1;
            }
            at = next;
            t += rng.gen_range(1..=3) * U;
            let arr = t;
            let dep = (h + 1 < hops).then(|| {
                t += rng.gen_range(0..=1) * U;
                t
            });
            stops.push((names[at].clone(), Some(arr), dep));
        }
        let refs: Vec<(&str, Option<Time>, Option<Time>)> = stops.iter().map(|(s, a, d)| (s.as_str(), *a, *d)).collect();
        trips.push(Trip::new(format!("z{z}"), capacities.choose(&mut rng).unwrap().clone(), &refs));
    }
    let base = Instance { stations: names.iter().map(Station::new).collect(), trips, commodities: Vec::new() };
    let events = station_event_times(&base);
    let demands = [frac(1, 2), int(1), int(1), frac(3, 2), int(2), int(3)];
    let mut commodities = Vec::new();
    for k in 0..rng.gen_range(1..=config.max_commodities.max(1)) {
        // origins with events make non-trivial instances likely
        let origins: Vec<&str> = events.keys().copied().collect();
        let origin = if origins.is_empty() || rng.gen_bool(0.1) {
            names[rng.gen_range(0..ns)].clone()
        } else {
            String::from(*origins.choose(&mut rng).unwrap())
        };
        let mut destination = names[rng.gen_range(0..ns)].clone();
        if destination == origin {
            destination = names[(names.iter().position(|s| *s == origin).unwrap() + 1) % ns].clone();
        }
        let times: Vec<Time> = events.get(origin.as_str()).map(|s| s.iter().copied().collect()).unwrap_or_default();
        let t0 = times.choose(&mut rng).copied().unwrap_or(rng.gen_range(0..6) * U);
        let beta = config.betas.choose(&mut rng).cloned().unwrap_or_else(|| int(1));
        let window =
            if config.fixed_departure || !beta.is_zero() { Window::singleton(t0) } else { Window::new(t0, t0 + rng.gen_range(0..=4) * U) };
        let mut c = Commodity::new(
            format!("k{k}"),
            origin,
            destination,
            window,
            demands.choose(&mut rng).unwrap().clone(),
            int(rng.gen_range(1..=16) * U),
        );
        c.beta = beta;
        c.target = rng.gen_range(0..12) * U;
        c.gamma_late = int(rng.gen_range(0..=3));
        c.gamma_early = int(rng.gen_range(0..=1));
        commodities.push(c);
    }
    Instance { commodities, ..base }
}
