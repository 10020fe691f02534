use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dlmp_core::netmodel::{Fuel, Network};

fn dlmp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlmp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn dlmp")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = dlmp(args, cwd);
    assert!(
        out.status.success(),
        "dlmp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn non_grid_capacity(path: &Path) -> f64 {
    let net = Network::load(path).unwrap();
    net.generators.iter().filter(|g| g.fuel != Fuel::Grid).map(|g| g.p_max_mw).sum()
}

/// Fixture and a year of profiles in a fresh directory.
fn workspace(case: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(&["fixture", "--case", case, "-o", "net.json"], dir.path());
    ok(&["profiles", "--seed", "1", "-o", "profiles.csv"], dir.path());
    dir
}

fn polylines(svg: &str) -> Vec<&str> {
    svg.lines().filter(|l| l.starts_with("<polyline")).collect()
}

fn attr<'a>(line: &'a str, name: &str) -> &'a str {
    let key = format!(" {name}=\"");
    let start = line.find(&key).unwrap() + key.len();
    &line[start..start + line[start..].find('"').unwrap()]
}

#[test]
fn fixture_totals_match_capacity_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["fixture", "--case", "current", "-o", "cur.json"], dir.path());
    ok(&["fixture", "--case", "future", "-o", "fut.json"], dir.path());
    assert!((non_grid_capacity(&dir.path().join("cur.json")) - 2642.0).abs() < 1e-9);
    assert!((non_grid_capacity(&dir.path().join("fut.json")) - 3506.0).abs() < 1e-9);
    ok(&["fixture", "--case", "future", "-o", "again.json"], dir.path());
    assert_eq!(fs::read(dir.path().join("fut.json")).unwrap(), fs::read(dir.path().join("again.json")).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["fixture", "--case", "someday", "-o", "x.json"][..],
        &["run", "--network", "n.json", "--profiles", "p.csv", "--workers", "0"],
        &["plot", ".", "--kind", "weekly", "-o", "x.svg"],
        &["nonsense"],
    ] {
        assert_eq!(dlmp(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_profile_file_is_a_runtime_failure() {
    let dir = workspace("current");
    let out = dlmp(&["run", "--network", "net.json", "--profiles", "absent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn day_run_writes_one_row_per_half_hour() {
    let dir = workspace("current");
    let run = ["run", "--network", "net.json", "--profiles", "profiles.csv", "--steps", "48", "--label", "day"];
    let summary = ok(&run, dir.path());
    assert!(summary.contains("48 timesteps, 0 failed"), "{summary}");
    let lmp_path = dir.path().join("runs/day/lmp.csv");
    let first = fs::read_to_string(&lmp_path).unwrap();
    assert_eq!(first.lines().count(), 49);
    assert!(first.starts_with("t,582,"));
    for file in ["dispatch.csv", "curtailed.csv", "meta.csv", "network.json"] {
        assert!(dir.path().join("runs/day").join(file).exists(), "{file}");
    }

    ok(&[&run[..], &["--workers", "1"]].concat(), dir.path());
    assert_eq!(fs::read_to_string(&lmp_path).unwrap(), first);

    let stats = ok(&["stats", "runs/day", "--buses", "582"], dir.path());
    assert!(stats.starts_with("voltage_level,mean,spatial_std,min,max,zero_pct\n400,"));
    assert!(stats.contains("bus 582 temporal std"));

    let plot = ["plot", "runs/day", "--kind", "daily", "--buses", "582,101,230,288", "-o", "daily.svg"];
    ok(&plot, dir.path());
    let svg = fs::read_to_string(dir.path().join("daily.svg")).unwrap();
    let lines = polylines(&svg);
    assert_eq!(lines.len(), 4);
    let buses: Vec<&str> = lines.iter().map(|l| attr(l, "data-bus")).collect();
    assert_eq!(buses, ["582", "101", "230", "288"]);
    let legend: Vec<&str> = svg
        .lines()
        .filter(|l| l.starts_with("<text class=\"legend\""))
        .map(|l| &l[l.find('>').unwrap() + 1..l.find("</text>").unwrap()])
        .collect();
    assert_eq!(legend, buses);
    for l in lines {
        assert_eq!(attr(l, "points").split(' ').count(), 48);
    }
    ok(&plot, dir.path());
    assert_eq!(fs::read_to_string(dir.path().join("daily.svg")).unwrap(), svg);

    let bad = dlmp(&["plot", "runs/day", "--kind", "daily", "--buses", "999", "-o", "x.svg"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let late = dlmp(&["plot", "runs/day", "--kind", "daily", "--buses", "582", "--day", "3", "-o", "x.svg"], dir.path());
    assert_eq!(late.status.code(), Some(1));
}

#[test]
fn year_run_and_yearly_plot() {
    let dir = workspace("current");
    ok(&["run", "--network", "net.json", "--profiles", "profiles.csv", "--label", "year"], dir.path());
    let lmp = fs::read_to_string(dir.path().join("runs/year/lmp.csv")).unwrap();
    assert_eq!(lmp.lines().count(), 17_521);
    ok(&["plot", "runs/year", "--kind", "yearly", "--buses", "582,288", "-o", "year.svg"], dir.path());
    let svg = fs::read_to_string(dir.path().join("year.svg")).unwrap();
    let lines = polylines(&svg);
    assert_eq!(lines.len(), 2);
    for l in lines {
        assert_eq!(attr(l, "points").split(' ').count(), 17_520);
    }
}

#[test]
fn level_bars_on_future_summer_day() {
    let dir = workspace("future");
    // 2015-07-16, a clear day with positive prices.
    let run = ["run", "--network", "net.json", "--profiles", "profiles.csv", "--start", "9408", "--steps", "48"];
    ok(&[&run[..], &["--label", "summer"]].concat(), dir.path());
    ok(&["plot", "runs/summer", "--kind", "level-bars", "-o", "bars.svg"], dir.path());
    let svg = fs::read_to_string(dir.path().join("bars.svg")).unwrap();
    let bars: Vec<(u32, f64)> = svg
        .lines()
        .filter(|l| l.starts_with("<rect class=\"bar\""))
        .map(|l| (attr(l, "data-kv").parse().unwrap(), attr(l, "data-value").parse().unwrap()))
        .collect();
    assert_eq!(bars.iter().map(|b| b.0).collect::<Vec<_>>(), [400, 132, 33, 11]);
    assert!(bars[2].1 < bars[0].1 && bars[3].1 < bars[0].1, "{bars:?}");
}

#[test]
fn too_many_failed_steps_fail_the_run() {
    let dir = workspace("current");
    let path = dir.path().join("net.json");
    let mut net = Network::load(&path).unwrap();
    // Starve one 33 kV group: its demand can no longer be met at night.
    let k = net.branches.iter().position(|b| b.is_transformer && b.to_bus == 201).unwrap();
    net.branches[k].forward_limit_mw = 1.0;
    fs::write(&path, net.to_json_string()).unwrap();
    let out = dlmp(&["run", "--network", "net.json", "--profiles", "profiles.csv", "--steps", "48"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("timesteps failed"));
    assert!(dir.path().join("runs/net/meta.csv").exists());
}
