//! Synthetic south-west network spanning 400 kV down to one 11 kV feeder.
//!
//! Layout:
//! - 400 kV ring around the slack boundary bus 582, with a second boundary
//!   bus 583 on a resistance-free tie so both import points price at the MIP.
//! - Three supergrid transformers feeding a 132 kV ring (101 .. 170).
//! - Five 33 kV groups, each behind one equivalent 132/33 kV transformer.
//!   Group 201 (below 170) is PV-heavy, lightly loaded and carries the
//!   11 kV feeder 280 .. 288 via 230.
//!
//! Installed capacity follows [`CapacityTable::for_case`]. 400/132 kV
//! branches are unlimited; only the 132/33 and 33/11 kV transformers carry
//! MW ratings. The 132/33 reverse ratings are computed from future-case DG
//! so that both cases share one network topology.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::netmodel::{
    Branch, Bus, BusRole, Fuel, Generator, Load, Network, VoltageLevel, DEFAULT_BASE_MVA, DEFAULT_POWER_FACTOR,
};

pub const GRID_RATING_MW: f64 = 6000.0;
pub const CCGT_COST: f64 = 50.0;
pub const OCGT_COST: f64 = 150.0;
/// Summer-minimum demand as a share of peak, used for transformer sizing.
pub const MIN_DEMAND_FACTOR: f64 = 0.3;
/// Reverse rating as a share of downstream future DG net of minimum demand.
pub const REVERSE_SIZING: f64 = 0.85;

pub const SLACK_BUS: u32 = 582;
pub const SECOND_GRID_BUS: u32 = 583;
/// Deepest bus of the 11 kV feeder.
pub const DEEPEST_11KV_BUS: u32 = 288;
/// 132 kV bus that feeds the constrained 33 kV group.
pub const CONSTRAINED_PARENT: u32 = 170;
pub const CONSTRAINED_GROUP_BUSBAR: u32 = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CapacityCase {
    Current,
    Future,
}

impl CapacityCase {
    pub const ALL: [CapacityCase; 2] = [Self::Current, Self::Future];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Current => "current",
            Self::Future => "future",
        }
    }
}

impl fmt::Display for CapacityCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown capacity case `{0}` (expected current or future)")]
pub struct UnknownCase(pub String);

impl FromStr for CapacityCase {
    type Err = UnknownCase;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "current" => Ok(Self::Current),
            "future" => Ok(Self::Future),
            _ => Err(UnknownCase(s.to_string())),
        }
    }
}

/// Installed MW per fuel and voltage level.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTable {
    pub case: CapacityCase,
    pub mw: BTreeMap<(Fuel, VoltageLevel), f64>,
}

impl CapacityTable {
    /// Fuel totals with per-level shares. Shares for the future case only
    /// fix 33 and 11 kV; 132 kV takes the remainder.
    pub fn for_case(case: CapacityCase) -> Self {
        use VoltageLevel::*;
        // (fuel, total, [400, 132, 33, 11] shares)
        let rows: [(Fuel, f64, [f64; 4]); 4] = match case {
            CapacityCase::Current => [
                (Fuel::Ccgt, 1045.0, [1.0, 0.0, 0.0, 0.0]),
                (Fuel::Wind, 263.5, [0.0, 0.45, 0.55, 0.0]),
                (Fuel::Pv, 980.0, [0.0, 0.09, 0.91, 0.0]),
                (Fuel::Biomass, 353.5, [0.0, 0.31, 0.69, 0.0]),
            ],
            CapacityCase::Future => [
                (Fuel::Ccgt, 1045.0, [1.0, 0.0, 0.0, 0.0]),
                (Fuel::Wind, 362.5, [0.0, 1.0 - 0.67 - 0.008, 0.67, 0.008]),
                (Fuel::Pv, 1601.0, [0.0, 1.0 - 0.94 - 0.007, 0.94, 0.007]),
                (Fuel::Biomass, 497.5, [0.0, 1.0 - 0.78 - 0.006, 0.78, 0.006]),
            ],
        };
        let mut mw = BTreeMap::new();
        for (fuel, total, shares) in rows {
            for (level, share) in [Kv400, Kv132, Kv33, Kv11].into_iter().zip(shares) {
                mw.insert((fuel, level), total * share);
            }
        }
        Self { case, mw }
    }

    /// Tallies installed non-grid capacity; gas units are reported as CCGT.
    pub fn from_network(case: CapacityCase, net: &Network) -> Self {
        let idx = net.bus_index_map();
        let mut mw = BTreeMap::new();
        for g in &net.generators {
            if g.fuel == Fuel::Grid {
                continue;
            }
            let fuel = if g.fuel == Fuel::Ocgt { Fuel::Ccgt } else { g.fuel };
            let level = net.buses[idx[&g.bus]].voltage_level;
            *mw.entry((fuel, level)).or_insert(0.0) += g.p_max_mw;
        }
        Self { case, mw }
    }

    pub fn get(&self, fuel: Fuel, level: VoltageLevel) -> f64 {
        self.mw.get(&(fuel, level)).copied().unwrap_or(0.0)
    }

    pub fn fuel_total(&self, fuel: Fuel) -> f64 {
        VoltageLevel::ALL.iter().map(|&l| self.get(fuel, l)).sum()
    }

    pub fn level_total(&self, level: VoltageLevel) -> f64 {
        self.mw.iter().filter(|((_, l), _)| *l == level).map(|(_, v)| v).sum()
    }

    pub fn total(&self) -> f64 {
        self.mw.values().sum()
    }
}

/// One 33 kV group: buses, internal lines, and its share of 33 kV DG and demand.
struct Group {
    parent: u32,
    busbar: u32,
    name: &'static str,
    /// (bus, load MW at peak, PV share, wind share, biomass share) of the
    /// level-wide 33 kV totals.
    buses: &'static [(u32, f64, f64, f64, f64)],
    /// (from, to, r, x) in pu.
    lines: &'static [(u32, u32, f64, f64)],
}

const GROUPS: [Group; 5] = [
    Group {
        parent: 170,
        busbar: 201,
        name: "RAME",
        buses: &[
            (201, 25.0, 0.0, 0.0, 0.0),
            (218, 20.0, 0.16, 0.0, 0.0),
            (230, 15.0, 0.1, 0.0, 0.05),
            (244, 25.0, 0.0, 0.0, 0.0),
            (250, 15.0, 0.0, 0.05, 0.0),
            (260, 10.0, 0.09, 0.0, 0.0),
        ],
        lines: &[
            (201, 218, 0.004, 0.012),
            (218, 230, 0.004, 0.012),
            (201, 244, 0.005, 0.015),
            (244, 250, 0.005, 0.015),
            (201, 260, 0.004, 0.012),
        ],
    },
    Group {
        parent: 107,
        busbar: 310,
        name: "ALVE",
        buses: &[(310, 200.0, 0.0925, 0.125, 0.125), (311, 160.0, 0.07, 0.1125, 0.1125)],
        lines: &[(310, 311, 0.002, 0.006)],
    },
    Group {
        parent: 120,
        busbar: 320,
        name: "BODM",
        buses: &[(320, 200.0, 0.0925, 0.125, 0.125), (321, 160.0, 0.07, 0.1125, 0.1125)],
        lines: &[(320, 321, 0.002, 0.006)],
    },
    Group {
        parent: 140,
        busbar: 340,
        name: "TAUN",
        buses: &[(340, 200.0, 0.0925, 0.125, 0.125), (341, 160.0, 0.07, 0.1125, 0.1125)],
        lines: &[(340, 341, 0.002, 0.006)],
    },
    Group {
        parent: 160,
        busbar: 360,
        name: "NEWT",
        buses: &[(360, 200.0, 0.0925, 0.125, 0.125), (361, 160.0, 0.07, 0.1125, 0.1125)],
        lines: &[(360, 361, 0.002, 0.006)],
    },
];

/// 11 kV feeder: (bus, load MW, PV share, wind share, biomass share) of 11 kV totals.
const FEEDER: [(u32, f64, f64, f64, f64); 6] = [
    (280, 0.0, 0.0, 0.0, 0.0),
    (282, 2.0, 0.0, 0.0, 1.0),
    (284, 2.0, 1.0, 0.0, 0.0),
    (286, 2.0, 0.0, 1.0, 0.0),
    (287, 2.3, 0.0, 0.0, 0.0),
    (288, 2.3, 0.0, 0.0, 0.0),
];
const FEEDER_PARENT: u32 = 230;
const FEEDER_R: f64 = 0.12;
const FEEDER_X: f64 = 0.08;
const FEEDER_TX_LIMIT_MW: f64 = 40.0;

fn bus(id: u32, name: &str, level: VoltageLevel, role: BusRole, region: &str) -> Bus {
    Bus {
        id,
        name: name.to_string(),
        voltage_level: level,
        role,
        region_tag: region.to_string(),
    }
}

fn load(bus: u32, mw: f64) -> Load {
    Load {
        bus,
        p_peak_mw: mw,
        power_factor: DEFAULT_POWER_FACTOR,
    }
}

/// Builds the fixture network for a capacity case.
pub fn build_fixture(case: CapacityCase) -> Network {
    use VoltageLevel::*;
    let table = CapacityTable::for_case(case);
    let future = CapacityTable::for_case(CapacityCase::Future);

    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut generators = vec![Generator::grid(SLACK_BUS, GRID_RATING_MW), Generator::grid(SECOND_GRID_BUS, GRID_RATING_MW)];
    let mut loads = Vec::new();
    let inf = f64::INFINITY;

    // 400 kV
    buses.push(bus(SLACK_BUS, "HINP", Kv400, BusRole::Slack, "SW400"));
    buses.push(bus(SECOND_GRID_BUS, "CHIC", Kv400, BusRole::Generator, "SW400"));
    for (id, name, role) in [
        (510, "MELK", BusRole::LoadOnly),
        (520, "EXET", BusRole::LoadOnly),
        (530, "LAND", BusRole::Generator),
        (540, "INDQ", BusRole::Generator),
    ] {
        buses.push(bus(id, name, Kv400, role, "SW400"));
    }
    branches.push(Branch::line(SLACK_BUS, SECOND_GRID_BUS, 0.0, 0.002, 0.0, inf));
    for (f, t) in [(582, 510), (510, 520), (520, 530), (530, 540), (540, 582)] {
        branches.push(Branch::line(f, t, 0.0002, 0.004, 0.04, inf));
    }
    for id in [510, 520, 530] {
        loads.push(load(id, 100.0));
    }
    let gas = table.fuel_total(Fuel::Ccgt);
    let ocgt = 245.0;
    generators.push(Generator::new(530, Fuel::Ccgt, gas - ocgt, CCGT_COST));
    generators.push(Generator::new(540, Fuel::Ocgt, ocgt, OCGT_COST));

    // 132 kV ring
    let ring = [101u32, 107, 120, 130, 140, 150, 160, 170];
    let ring_names = ["ABHA", "INDQ1", "BODM1", "EXET1", "TAUN1", "MELK1", "NEWT1", "RAME1"];
    for (&id, name) in ring.iter().zip(ring_names) {
        let role = if [107, 120, 140].contains(&id) { BusRole::Generator } else { BusRole::LoadOnly };
        buses.push(bus(id, name, Kv132, role, "SW132"));
    }
    for (f, t) in [(510, 101), (520, 130), (540, 150)] {
        branches.push(Branch::transformer(f, t, 0.0005, 0.008, inf, inf));
    }
    for k in 0..ring.len() {
        branches.push(Branch::line(ring[k], ring[(k + 1) % ring.len()], 0.002, 0.005, 0.01, inf));
    }
    let at132 = |f: Fuel| table.get(f, Kv132);
    generators.push(Generator::new(107, Fuel::Wind, at132(Fuel::Wind), 0.0));
    generators.push(Generator::new(120, Fuel::Pv, at132(Fuel::Pv), 0.0));
    generators.push(Generator::new(107, Fuel::Biomass, 0.6 * at132(Fuel::Biomass), 0.0));
    generators.push(Generator::new(140, Fuel::Biomass, 0.4 * at132(Fuel::Biomass), 0.0));

    // 33 kV groups
    let share33 = |t: &CapacityTable, f: Fuel| t.get(f, Kv33);
    let share11 = |t: &CapacityTable, f: Fuel| t.get(f, Kv11);
    for g in &GROUPS {
        let mut peak = 0.0;
        let mut future_dg = 0.0;
        for &(id, mw, pv, wind, bio) in g.buses {
            let has_dg = pv + wind + bio > 0.0;
            let role = if has_dg { BusRole::Generator } else { BusRole::LoadOnly };
            let name = format!("{}{}", g.name, id % 100);
            buses.push(bus(id, &name, Kv33, role, g.name));
            loads.push(load(id, mw));
            peak += mw;
            for (fuel, share) in [(Fuel::Pv, pv), (Fuel::Wind, wind), (Fuel::Biomass, bio)] {
                if share > 0.0 {
                    generators.push(Generator::new(id, fuel, share * share33(&table, fuel), 0.0));
                    future_dg += share * share33(&future, fuel);
                }
            }
        }
        if g.busbar == CONSTRAINED_GROUP_BUSBAR {
            for &(_, mw, pv, wind, bio) in &FEEDER {
                peak += mw;
                future_dg += pv * share11(&future, Fuel::Pv)
                    + wind * share11(&future, Fuel::Wind)
                    + bio * share11(&future, Fuel::Biomass);
            }
        }
        let reverse = REVERSE_SIZING * (future_dg - MIN_DEMAND_FACTOR * peak);
        let forward = 1.5 * peak;
        branches.push(Branch::transformer(g.parent, g.busbar, 0.001, 0.012, forward, reverse.round()));
        for &(f, t, r, x) in g.lines {
            branches.push(Branch::line(f, t, r, x, 0.0, inf));
        }
    }

    // 11 kV feeder
    for &(id, mw, pv, wind, bio) in &FEEDER {
        let has_dg = table.level_total(Kv11) > 0.0 && pv + wind + bio > 0.0;
        let role = if has_dg { BusRole::Generator } else { BusRole::LoadOnly };
        buses.push(bus(id, &format!("RAME11-{}", id % 100), Kv11, role, "RAME"));
        if mw > 0.0 {
            loads.push(load(id, mw));
        }
        for (fuel, share) in [(Fuel::Pv, pv), (Fuel::Wind, wind), (Fuel::Biomass, bio)] {
            let cap = share * share11(&table, fuel);
            if cap > 0.0 {
                generators.push(Generator::new(id, fuel, cap, 0.0));
            }
        }
    }
    branches.push(Branch::transformer(FEEDER_PARENT, FEEDER[0].0, 0.01, 0.06, FEEDER_TX_LIMIT_MW, FEEDER_TX_LIMIT_MW));
    for w in FEEDER.windows(2) {
        branches.push(Branch::line(w[0].0, w[1].0, FEEDER_R, FEEDER_X, 0.0, inf));
    }

    Network {
        base_mva: DEFAULT_BASE_MVA,
        buses,
        branches,
        generators,
        loads,
    }
}
