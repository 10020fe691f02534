use dlmp_core::netmodel::VoltageLevel;
use dlmp_core::runner::{persist, run, run_profiles, ResultSet, StepStatus};
use dlmp_core::scenario::{build_fixture, synthesize_year, CapacityCase, Scenario, SLACK_BUS, STEPS_PER_DAY};

/// Summer day with the sunniest midday and positive prices throughout.
fn sunny_day() -> usize {
    let y = synthesize_year(1);
    (152..244)
        .filter(|&d| (d * 48..(d + 1) * 48).all(|t| y.mip_gbp_mwh[t] > 0.0))
        .max_by(|&a, &b| {
            let midday = |d: usize| (d * 48 + 22..d * 48 + 30).map(|t| y.pv_cf[t]).sum::<f64>();
            midday(a).total_cmp(&midday(b))
        })
        .unwrap()
}

#[test]
fn future_summer_day_zeroes_distribution_prices() {
    let y = synthesize_year(1);
    let day = sunny_day();
    let net = build_fixture(CapacityCase::Future);
    let span = day * STEPS_PER_DAY..(day + 1) * STEPS_PER_DAY;
    let rs = run_profiles(&net, &y, span, "summer", 1).unwrap();
    assert_eq!(rs.failures(), 0);
    let levels = net.buses_by_level();
    let slack = rs.bus_column(SLACK_BUS).unwrap();
    let mut binding = 0;
    for t in 0..rs.len() {
        let zero = |i: &usize| rs.lmp[t][*i].abs() < 1e-6;
        if levels[&VoltageLevel::Kv33].iter().any(zero) {
            binding += 1;
            assert!(levels[&VoltageLevel::Kv11].iter().all(zero), "t={t}");
            for &i in levels[&VoltageLevel::Kv132].iter().chain(&levels[&VoltageLevel::Kv400]) {
                assert!((rs.lmp[t][i] - rs.mip[t]).abs() < 0.05 * rs.mip[t], "t={t} bus {}", rs.bus_ids[i]);
            }
        }
        assert!((rs.lmp[t][slack] - rs.mip[t]).abs() < 1e-6);
    }
    assert!(binding > 0, "no binding steps on day {day}");
    assert!(rs.total_curtailed_mwh() > 0.0);
}

#[test]
fn worker_count_does_not_change_results() {
    let y = synthesize_year(1);
    let net = build_fixture(CapacityCase::Future);
    let span = 200 * STEPS_PER_DAY..201 * STEPS_PER_DAY;
    let one = run_profiles(&net, &y, span.clone(), "w", 1).unwrap();
    let four = run_profiles(&net, &y, span, "w", 4).unwrap();
    let bits = |rs: &ResultSet| -> Vec<u64> {
        rs.lmp.iter().chain(&rs.dispatch).chain(&rs.curtailed).flatten().map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&one), bits(&four));
    assert_eq!(one.solver_meta, four.solver_meta);
}

#[test]
fn persisted_run_reads_back() {
    let y = synthesize_year(2);
    let dir = tempfile::tempdir().unwrap();
    let net = build_fixture(CapacityCase::Current);
    let net_path = dir.path().join("net.json");
    let prof_path = dir.path().join("profiles.csv");
    std::fs::write(&net_path, net.to_json_string()).unwrap();
    y.slice(0, STEPS_PER_DAY).write_csv(&prof_path).unwrap();
    let scenario = Scenario {
        network_file: net_path,
        profile_file: prof_path,
        capacity_case: CapacityCase::Current,
        time_range: Some(10..22),
        label: "day".into(),
    };
    let rs = run(&scenario, 2).unwrap();
    assert_eq!(rs.len(), 12);
    assert!(rs.solver_meta.iter().all(|m| m.status == StepStatus::Solved));
    let out = persist(&rs, &net, dir.path()).unwrap();
    assert_eq!(out, dir.path().join("day"));
    let lmp = std::fs::read_to_string(out.join("lmp.csv")).unwrap();
    assert_eq!(lmp.lines().count(), 13);
    assert!(lmp.starts_with("t,582,583,"));
    let back = ResultSet::read_dir(&out).unwrap();
    assert_eq!(back.bus_ids, rs.bus_ids);
    assert_eq!(back.solver_meta, rs.solver_meta);
    for (a, b) in back.lmp.iter().flatten().zip(rs.lmp.iter().flatten()) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
    }
}
