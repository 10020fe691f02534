//! `dlmp`: fixtures, profiles, scenario runs, statistics and charts.

mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dlmp_core::netmodel::{Network, VoltageLevel};
use dlmp_core::runner::{self, ResultSet, FAILURE_WARN_FRACTION, NETWORK_FILE};
use dlmp_core::scenario::{self, CapacityCase, CapacityTable, STEPS_PER_DAY};
use dlmp_core::stats;

#[derive(Parser)]
#[command(name = "dlmp", version, about = "Locational marginal prices on multi-voltage distribution networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Current,
    Future,
}

impl From<Case> for CapacityCase {
    fn from(c: Case) -> Self {
        match c {
            Case::Current => CapacityCase::Current,
            Case::Future => CapacityCase::Future,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Half-hourly prices of the chosen buses over one day.
    Daily,
    /// The chosen buses over the whole run.
    Yearly,
    /// Mean price per voltage level.
    LevelBars,
}

#[derive(Subcommand)]
enum Command {
    /// Write the fixture network as JSON.
    Fixture {
        #[arg(long, value_enum, default_value = "current")]
        case: Case,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write a synthetic year of half-hourly profiles as CSV.
    Profiles {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve every half-hour of a profile file on a network.
    Run {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Run directory name; defaults to the network file stem.
        #[arg(long)]
        label: Option<String>,
        /// First half-hour to solve.
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Number of half-hours; defaults to the rest of the profile.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = default_workers(), value_parser = clap::value_parser!(u32).range(1..))]
        workers: u32,
        /// Parent directory for the run directory.
        #[arg(short, long, default_value = "runs")]
        out: PathBuf,
    },
    /// Per-level price statistics of a run directory.
    Stats {
        run_dir: PathBuf,
        /// Also report the temporal standard deviation of these buses.
        #[arg(long, value_delimiter = ',')]
        buses: Vec<u32>,
        /// Write the level summary here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Render an SVG chart from a run directory.
    Plot {
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, value_delimiter = ',')]
        buses: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        day: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn default_workers() -> u32 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u32)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fixture { case, out } => cmd_fixture(case.into(), &out),
        Command::Profiles { seed, out } => cmd_profiles(seed, &out),
        Command::Run {
            network,
            profiles,
            label,
            start,
            steps,
            workers,
            out,
        } => cmd_run(&network, &profiles, label, start, steps, workers as usize, &out),
        Command::Stats { run_dir, buses, out } => cmd_stats(&run_dir, &buses, out.as_deref()),
        Command::Plot {
            run_dir,
            kind,
            buses,
            day,
            out,
        } => cmd_plot(&run_dir, kind, &buses, day, &out),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_fixture(case: CapacityCase, out: &Path) -> Result<()> {
    let net = scenario::build_fixture(case);
    write_file(out, &net.to_json_string())?;
    let table = CapacityTable::from_network(case, &net);
    println!(
        "{case}: {} buses, {} branches, {:.1} MW non-grid capacity -> {}",
        net.n_buses(),
        net.branches.len(),
        table.total(),
        out.display()
    );
    Ok(())
}

fn cmd_profiles(seed: u64, out: &Path) -> Result<()> {
    let year = scenario::synthesize_year(seed);
    year.write_csv(out)?;
    println!("seed {seed}: {} half-hours -> {}", year.len(), out.display());
    Ok(())
}

fn cmd_run(
    network: &Path,
    profiles: &Path,
    label: Option<String>,
    start: usize,
    steps: Option<usize>,
    workers: usize,
    out: &Path,
) -> Result<()> {
    let net = Network::load(network)?;
    let prof = scenario::load_profiles(profiles)?;
    let end = match steps {
        Some(n) => start + n,
        None => prof.len(),
    };
    if start >= end || end > prof.len() {
        bail!("half-hours {start}..{end} fall outside the {} in {}", prof.len(), profiles.display());
    }
    let label = label.unwrap_or_else(|| {
        network
            .file_stem()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let clock = Instant::now();
    let results = runner::run_profiles(&net, &prof, start..end, &label, workers)?;
    let dir = runner::persist(&results, &net, out)?;
    println!(
        "{label}: {} timesteps, {} failed, {:.1}s wall time -> {}",
        results.len(),
        results.failures(),
        clock.elapsed().as_secs_f64(),
        dir.display()
    );
    if results.failure_fraction() > FAILURE_WARN_FRACTION {
        bail!(
            "{} of {} timesteps failed (limit {:.1}%)",
            results.failures(),
            results.len(),
            100.0 * FAILURE_WARN_FRACTION
        );
    }
    Ok(())
}

fn load_run(run_dir: &Path) -> Result<(Network, ResultSet)> {
    let net = Network::load(run_dir.join(NETWORK_FILE))?;
    let results = ResultSet::read_dir(run_dir)?;
    Ok((net, results))
}

fn cmd_stats(run_dir: &Path, buses: &[u32], out: Option<&Path>) -> Result<()> {
    let (net, results) = load_run(run_dir)?;
    let rows = stats::level_summary(&results, &net)?;
    let mut csv = Vec::new();
    stats::write_summary_csv(&rows, &mut csv)?;
    match out {
        Some(path) => fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?,
        None => io::stdout().write_all(&csv)?,
    }
    for &bus in buses {
        println!("bus {bus} temporal std {:.4}", stats::temporal_std(&results, bus)?);
    }
    Ok(())
}

fn cmd_plot(run_dir: &Path, kind: PlotKind, buses: &[u32], day: usize, out: &Path) -> Result<()> {
    let (net, results) = load_run(run_dir)?;
    let doc = match kind {
        PlotKind::Daily => {
            if buses.is_empty() {
                bail!("--buses is required for a daily plot");
            }
            let series = stats::daily_slice(&results, buses, day)?;
            svg::lines(&format!("{} day {day}", results.scenario_label), STEPS_PER_DAY, &series)
        }
        PlotKind::Yearly => {
            if buses.is_empty() {
                bail!("--buses is required for a yearly plot");
            }
            let series = buses
                .iter()
                .map(|&b| {
                    let c = results.bus_column(b).ok_or(stats::StatsError::UnknownBus(b))?;
                    Ok((b, results.lmp.iter().map(|row| row[c]).collect()))
                })
                .collect::<Result<Vec<(u32, Vec<f64>)>>>()?;
            svg::lines(&results.scenario_label, results.len(), &series)
        }
        PlotKind::LevelBars => {
            let rows = stats::level_summary(&results, &net)?;
            let bars: Vec<(VoltageLevel, f64)> = rows.iter().map(|r| (r.voltage_level, r.mean_lmp)).collect();
            svg::bars(&results.scenario_label, &bars)
        }
    };
    write_file(out, &doc)?;
    println!("{}", out.display());
    Ok(())
}
