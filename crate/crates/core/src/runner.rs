//! Year-scale execution: one independent dispatch per half-hour, solved in
//! parallel and collected in timestep order.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDateTime;
use rayon::prelude::*;

use crate::netmodel::{NetError, Network};
use crate::opf::{solve_opf, DispatchProblem, OpfError};
use crate::scenario::{load_profiles, ProfileError, ProfileSet, Scenario, TIMESTAMP_FORMAT};

/// Failed share of timesteps above which a run is reported as unhealthy.
pub const FAILURE_WARN_FRACTION: f64 = 0.001;
pub const NETWORK_FILE: &str = "network.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("worker count must be at least 1")]
    Workers,
    #[error("cannot build thread pool")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepStatus {
    Solved,
    Infeasible,
    Divergence,
    Failed,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Solved => "solved",
            Self::Infeasible => "infeasible",
            Self::Divergence => "divergence",
            Self::Failed => "failed",
        }
    }
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "solved" => Self::Solved,
            "infeasible" => Self::Infeasible,
            "divergence" => Self::Divergence,
            "failed" => Self::Failed,
            other => return Err(format!("unknown status `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMeta {
    pub iterations: usize,
    pub converged: bool,
    pub status: StepStatus,
}

/// Per-timestep outputs. Rows of failed timesteps hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub scenario_label: String,
    pub bus_ids: Vec<u32>,
    /// `g<index>_<bus>_<fuel>` per generator.
    pub generator_labels: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
    pub lmp: Vec<Vec<f64>>,
    pub dispatch: Vec<Vec<f64>>,
    pub curtailed: Vec<Vec<f64>>,
    pub mip: Vec<f64>,
    pub solver_meta: Vec<StepMeta>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.mip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mip.is_empty()
    }

    pub fn is_usable(&self, t: usize) -> bool {
        self.solver_meta[t].status == StepStatus::Solved
    }

    pub fn usable_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&t| self.is_usable(t))
    }

    pub fn failures(&self) -> usize {
        self.len() - self.usable_steps().count()
    }

    pub fn failure_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.failures() as f64 / self.len() as f64
        }
    }

    pub fn bus_column(&self, bus: u32) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    pub fn total_curtailed_mwh(&self) -> f64 {
        self.usable_steps().map(|t| self.curtailed[t].iter().sum::<f64>() * 0.5).sum()
    }

    /// Writes `lmp.csv`, `dispatch.csv`, `curtailed.csv` and `meta.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let bus_header: Vec<String> = self.bus_ids.iter().map(u32::to_string).collect();
        write_matrix(&dir.join("lmp.csv"), &bus_header, &self.lmp)?;
        write_matrix(&dir.join("dispatch.csv"), &self.generator_labels, &self.dispatch)?;
        write_matrix(&dir.join("curtailed.csv"), &self.generator_labels, &self.curtailed)?;

        let path = dir.join("meta.csv");
        let io = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(out, "t,timestamp,iterations,converged,status,mip").map_err(io)?;
        for t in 0..self.len() {
            let m = &self.solver_meta[t];
            writeln!(
                out,
                "{t},{},{},{},{},{}",
                self.timestamps[t].format(TIMESTAMP_FORMAT),
                m.iterations,
                m.converged,
                m.status,
                self.mip[t]
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads a directory written by [`ResultSet::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self, RunError> {
        let (bus_header, lmp) = read_matrix(&dir.join("lmp.csv"))?;
        let (generator_labels, dispatch) = read_matrix(&dir.join("dispatch.csv"))?;
        let (_, curtailed) = read_matrix(&dir.join("curtailed.csv"))?;
        let path = dir.join("meta.csv");
        let bad = |message: String| RunError::Format {
            path: path.clone(),
            message,
        };
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
        let mut timestamps = Vec::new();
        let mut mip = Vec::new();
        let mut solver_meta = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("row {}: short record", i + 1)));
            let ts = NaiveDateTime::parse_from_str(field(1)?, TIMESTAMP_FORMAT)
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
            timestamps.push(ts);
            solver_meta.push(StepMeta {
                iterations: num(field(2)?)? as usize,
                converged: field(3)? == "true",
                status: field(4)?.parse().map_err(bad)?,
            });
            mip.push(num(field(5)?)?);
        }
        let bus_ids = bus_header
            .iter()
            .map(|h| h.parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Format {
                path: dir.join("lmp.csv"),
                message: e.to_string(),
            })?;
        let label = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rs = ResultSet {
            scenario_label: label,
            bus_ids,
            generator_labels,
            timestamps,
            lmp,
            dispatch,
            curtailed,
            mip,
            solver_meta,
        };
        if rs.lmp.len() != rs.len() || rs.dispatch.len() != rs.len() || rs.curtailed.len() != rs.len() {
            return Err(RunError::Format {
                path: dir.to_path_buf(),
                message: "result files disagree on the number of timesteps".into(),
            });
        }
        Ok(rs)
    }
}

fn write_matrix(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    write!(out, "t").map_err(io)?;
    for h in header {
        write!(out, ",{h}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (t, row) in rows.iter().enumerate() {
        write!(out, "{t}").map_err(io)?;
        for v in row {
            if v.is_nan() {
                write!(out, ",").map_err(io)?;
            } else {
                write!(out, ",{v}").map_err(io)?;
            }
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let bad = |message: String| RunError::Format {
        path: path.to_path_buf(),
        message,
    };
    if !path.exists() {
        return Err(RunError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing result file"),
        });
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.parse::<f64>() })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return Err(bad(format!("row {}: expected {} values", i + 1, header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

struct StepOutput {
    lmp: Vec<f64>,
    dispatch: Vec<f64>,
    curtailed: Vec<f64>,
    meta: StepMeta,
}

fn solve_step(net: &Network, profiles: &ProfileSet, t: usize) -> StepOutput {
    let problem = DispatchProblem::for_timestep(
        net,
        profiles.demand_factor[t],
        profiles.pv_cf[t],
        profiles.wind_cf[t],
        profiles.mip_gbp_mwh[t],
    );
    match solve_opf(&problem) {
        Ok(sol) => StepOutput {
            lmp: sol.lmp_gbp_mwh,
            dispatch: sol.dispatch_mw,
            curtailed: sol.curtailed_mw,
            meta: StepMeta {
                iterations: sol.sl_iterations,
                converged: sol.converged,
                status: StepStatus::Solved,
            },
        },
        Err(e) => {
            log::debug!("timestep {t} ({}): {e}", profiles.timestamps[t]);
            let status = match e {
                OpfError::InfeasibleDispatch(_) => StepStatus::Infeasible,
                OpfError::SlpDivergence { .. } => StepStatus::Divergence,
                _ => StepStatus::Failed,
            };
            let iterations = match e {
                OpfError::SlpDivergence { iterations, .. } => iterations,
                _ => 0,
            };
            StepOutput {
                lmp: vec![f64::NAN; net.n_buses()],
                dispatch: vec![f64::NAN; net.generators.len()],
                curtailed: vec![f64::NAN; net.generators.len()],
                meta: StepMeta {
                    iterations,
                    converged: false,
                    status,
                },
            }
        }
    }
}

/// Solves `steps` of `profiles` on `net` with `workers` threads.
pub fn run_profiles(
    net: &Network,
    profiles: &ProfileSet,
    steps: Range<usize>,
    label: &str,
    workers: usize,
) -> Result<ResultSet, RunError> {
    if workers == 0 {
        return Err(RunError::Workers);
    }
    net.ensure_valid()?;
    profiles.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let outputs: Vec<StepOutput> =
        pool.install(|| steps.clone().into_par_iter().map(|t| solve_step(net, profiles, t)).collect());

    let mut rs = ResultSet {
        scenario_label: label.to_string(),
        bus_ids: net.buses.iter().map(|b| b.id).collect(),
        generator_labels: net
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| format!("g{k}_{}_{}", g.bus, g.fuel.as_str()))
            .collect(),
        timestamps: profiles.timestamps[steps.clone()].to_vec(),
        lmp: Vec::with_capacity(outputs.len()),
        dispatch: Vec::with_capacity(outputs.len()),
        curtailed: Vec::with_capacity(outputs.len()),
        mip: profiles.mip_gbp_mwh[steps].to_vec(),
        solver_meta: Vec::with_capacity(outputs.len()),
    };
    for o in outputs {
        rs.lmp.push(o.lmp);
        rs.dispatch.push(o.dispatch);
        rs.curtailed.push(o.curtailed);
        rs.solver_meta.push(o.meta);
    }
    if rs.failure_fraction() > FAILURE_WARN_FRACTION {
        log::warn!(
            "{}: {} of {} timesteps failed and are excluded from statistics",
            label,
            rs.failures(),
            rs.len()
        );
    }
    Ok(rs)
}

/// Loads the scenario's files and runs it.
pub fn run(scenario: &Scenario, workers: usize) -> Result<ResultSet, RunError> {
    let net = Network::load(&scenario.network_file)?;
    let profiles = load_profiles(&scenario.profile_file)?;
    let steps = scenario.steps(profiles.len())?;
    run_profiles(&net, &profiles, steps, &scenario.label, workers)
}

/// Writes the results and a copy of the network under `out/<label>/`.
pub fn persist(results: &ResultSet, net: &Network, out: &Path) -> Result<PathBuf, RunError> {
    let dir = out.join(&results.scenario_label);
    results.write_dir(&dir)?;
    let path = dir.join(NETWORK_FILE);
    fs::write(&path, net.to_json_string()).map_err(|source| RunError::Io { path, source })?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_fixture, synthesize_year, CapacityCase, SLACK_BUS};

    #[test]
    fn single_peak_step_imports_at_mip() {
        let net = build_fixture(CapacityCase::Current);
        let mut p = synthesize_year(3).slice(0, 1);
        p.demand_factor[0] = 1.0;
        p.pv_cf[0] = 0.0;
        p.wind_cf[0] = 0.0;
        let rs = run_profiles(&net, &p, 0..1, "smoke", 1).unwrap();
        assert!(rs.is_usable(0));
        let slack = rs.bus_column(SLACK_BUS).unwrap();
        assert!((rs.lmp[0][slack] - p.mip_gbp_mwh[0]).abs() < 1e-6);
        // grid import is positive at peak with no renewables
        assert!(rs.dispatch[0][0] + rs.dispatch[0][1] > 0.0);
    }

    #[test]
    fn csv_roundtrip_and_zero_workers() {
        let net = build_fixture(CapacityCase::Current);
        let p = synthesize_year(3);
        assert!(matches!(run_profiles(&net, &p, 0..2, "x", 0), Err(RunError::Workers)));
        let rs = run_profiles(&net, &p, 100..104, "rt", 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let run_dir = persist(&rs, &net, dir.path()).unwrap();
        let back = ResultSet::read_dir(&run_dir).unwrap();
        assert_eq!(back, rs);
        assert!(run_dir.join(NETWORK_FILE).exists());
    }
}
