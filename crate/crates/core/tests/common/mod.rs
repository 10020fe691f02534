#![allow(dead_code)]

use chrono::NaiveDate;
use dlmp_core::netmodel::{Branch, Bus, BusRole, Fuel, Generator, Load, Network, VoltageLevel};
use dlmp_core::runner::{ResultSet, StepMeta, StepStatus};

pub fn bus(id: u32, role: BusRole, level: VoltageLevel) -> Bus {
    Bus {
        id,
        name: format!("B{id}"),
        voltage_level: level,
        role,
        region_tag: "T".into(),
    }
}

/// Radial chain 1..=n at 33 kV, slack at bus 1 with a grid unit.
pub fn chain(n: u32, r: f64, x: f64) -> Network {
    Network {
        base_mva: 100.0,
        buses: (1..=n)
            .map(|id| {
                let role = if id == 1 { BusRole::Slack } else { BusRole::LoadOnly };
                bus(id, role, VoltageLevel::Kv33)
            })
            .collect(),
        branches: (1..n).map(|i| Branch::line(i, i + 1, r, x, 0.0, f64::INFINITY)).collect(),
        generators: vec![Generator::grid(1, 1000.0), Generator::new(n, Fuel::Pv, 1.0, 0.0)],
        loads: vec![],
    }
}

pub fn load(bus: u32, p_peak_mw: f64) -> Load {
    Load {
        bus,
        p_peak_mw,
        power_factor: 0.95,
    }
}

/// Synthetic result set with every step solved.
pub fn results(bus_ids: Vec<u32>, lmp: Vec<Vec<f64>>, mip: Vec<f64>) -> ResultSet {
    let t0 = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let n = lmp.len();
    ResultSet {
        scenario_label: "t".into(),
        bus_ids,
        generator_labels: vec![],
        timestamps: (0..n).map(|t| t0 + chrono::Duration::minutes(30 * t as i64)).collect(),
        lmp,
        dispatch: vec![vec![]; n],
        curtailed: vec![vec![]; n],
        mip,
        solver_meta: vec![
            StepMeta {
                iterations: 1,
                converged: true,
                status: StepStatus::Solved,
            };
            n
        ],
    }
}
