//! Price statistics per voltage level and per bus.

use std::collections::HashMap;
use std::io::Write;

use crate::netmodel::{Network, VoltageLevel};
use crate::runner::ResultSet;
use crate::scenario::STEPS_PER_DAY;

/// Prices with magnitude below this count as zero.
pub const ZERO_LMP_TOL: f64 = 1e-6;
pub const SUMMARY_HEADER: &str = "voltage_level,mean,spatial_std,min,max,zero_pct";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("no solved timesteps")]
    NoData,
    #[error("need at least {needed} solved timesteps, found {found}")]
    TooFewSteps { needed: usize, found: usize },
    #[error("unknown bus {0}")]
    UnknownBus(u32),
    #[error("day {day} out of range: the run covers {days} whole day(s)")]
    DayOutOfRange { day: usize, days: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub voltage_level: VoltageLevel,
    pub mean_lmp: f64,
    pub spatial_std: f64,
    pub min_lmp: f64,
    pub max_lmp: f64,
    pub zero_pct: f64,
    /// Level has one bus, so `spatial_std` is 0 by construction.
    pub single_bus: bool,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn level_summary(results: &ResultSet, network: &Network) -> Result<Vec<LevelSummary>, StatsError> {
    let steps: Vec<usize> = results.usable_steps().collect();
    if steps.is_empty() {
        return Err(StatsError::NoData);
    }
    let level_of: HashMap<u32, VoltageLevel> = network.buses.iter().map(|b| (b.id, b.voltage_level)).collect();
    let mut out = Vec::new();
    for level in VoltageLevel::ALL {
        let cols: Vec<usize> = results
            .bus_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| level_of.get(id) == Some(&level))
            .map(|(c, _)| c)
            .collect();
        if cols.is_empty() {
            continue;
        }
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        let (mut spatial, mut zeros, mut eligible) = (0.0, 0usize, 0usize);
        let mut row = Vec::with_capacity(cols.len());
        for &t in &steps {
            row.clear();
            row.extend(cols.iter().map(|&c| results.lmp[t][c]));
            for &v in &row {
                sum += v;
                min = min.min(v);
                max = max.max(v);
            }
            spatial += pop_std(&row);
            if results.mip[t] > 0.0 {
                eligible += row.len();
                zeros += row.iter().filter(|v| v.abs() < ZERO_LMP_TOL).count();
            }
        }
        let cells = (steps.len() * cols.len()) as f64;
        out.push(LevelSummary {
            voltage_level: level,
            mean_lmp: sum / cells,
            spatial_std: if cols.len() > 1 { spatial / steps.len() as f64 } else { 0.0 },
            min_lmp: min,
            max_lmp: max,
            zero_pct: if eligible == 0 { 0.0 } else { 100.0 * zeros as f64 / eligible as f64 },
            single_bus: cols.len() == 1,
        });
    }
    Ok(out)
}

/// Population standard deviation of one bus's price over solved timesteps.
pub fn temporal_std(results: &ResultSet, bus: u32) -> Result<f64, StatsError> {
    let c = results.bus_column(bus).ok_or(StatsError::UnknownBus(bus))?;
    let series: Vec<f64> = results.usable_steps().map(|t| results.lmp[t][c]).collect();
    if series.len() < 2 {
        return Err(StatsError::TooFewSteps {
            needed: 2,
            found: series.len(),
        });
    }
    Ok(pop_std(&series))
}

/// The 48 half-hourly prices of `day` for each requested bus, in request order.
pub fn daily_slice(results: &ResultSet, buses: &[u32], day: usize) -> Result<Vec<(u32, Vec<f64>)>, StatsError> {
    let days = results.len() / STEPS_PER_DAY;
    if day >= days {
        return Err(StatsError::DayOutOfRange { day, days });
    }
    let span = day * STEPS_PER_DAY..(day + 1) * STEPS_PER_DAY;
    buses
        .iter()
        .map(|&b| {
            let c = results.bus_column(b).ok_or(StatsError::UnknownBus(b))?;
            Ok((b, span.clone().map(|t| results.lmp[t][c]).collect()))
        })
        .collect()
}

pub fn write_summary_csv(rows: &[LevelSummary], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.voltage_level.kv(),
            r.mean_lmp,
            r.spatial_std,
            r.min_lmp,
            r.max_lmp,
            r.zero_pct
        )?;
    }
    Ok(())
}
