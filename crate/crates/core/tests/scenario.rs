use std::io::Write;

use dlmp_core::netmodel::{Fuel, VoltageLevel};
use dlmp_core::scenario::{
    build_fixture, load_profiles, synthesize_year, CapacityCase, CapacityTable, ProfileError, Scenario,
    STEPS_PER_YEAR,
};

fn write_rows(rows: &[String]) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "timestamp,demand_factor,pv_cf,wind_cf,mip_gbp_mwh").unwrap();
    for r in rows {
        writeln!(f, "{r}").unwrap();
    }
    f
}

fn row(t: usize, pv: f64) -> String {
    let ts = chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
        + chrono::Duration::minutes(30 * t as i64);
    format!("{},0.62,{pv},0.41,38.5", ts.format("%Y-%m-%dT%H:%M"))
}

#[test]
fn fixtures_validate_and_rebuild_identically() {
    for case in CapacityCase::ALL {
        let net = build_fixture(case);
        assert!(net.validate().is_pass(), "{case}: {}", net.validate());
        assert_eq!(net, build_fixture(case));
        assert_eq!(net.to_json_string(), build_fixture(case).to_json_string());
    }
}

#[test]
fn current_fixture_matches_capacity_table() {
    let net = build_fixture(CapacityCase::Current);
    let t = CapacityTable::from_network(CapacityCase::Current, &net);
    assert!((t.total() - 2642.0).abs() < 1e-9);
    assert!((t.fuel_total(Fuel::Ccgt) - 1045.0).abs() < 1e-9);
    assert!((t.get(Fuel::Ccgt, VoltageLevel::Kv400) - 1045.0).abs() < 1e-9);
    assert!((t.fuel_total(Fuel::Pv) - 980.0).abs() < 1e-9);
    let pv33 = t.get(Fuel::Pv, VoltageLevel::Kv33) / t.fuel_total(Fuel::Pv);
    assert!((pv33 - 0.91).abs() < 0.005, "PV share at 33 kV {pv33}");
}

#[test]
fn future_fixture_matches_capacity_table() {
    let net = build_fixture(CapacityCase::Future);
    let t = CapacityTable::from_network(CapacityCase::Future, &net);
    assert!((t.total() - 3506.0).abs() < 1e-9);
    assert!((t.fuel_total(Fuel::Pv) - 1601.0).abs() < 1e-9);
    assert!((t.fuel_total(Fuel::Wind) - 362.0).abs() < 1.0);
    assert!((t.fuel_total(Fuel::Biomass) - 497.0).abs() < 1.0);
}

#[test]
fn peak_demand_is_shared_by_both_cases() {
    for case in CapacityCase::ALL {
        let net = build_fixture(case);
        let total: f64 = net.loads.iter().map(|l| l.p_peak_mw).sum();
        assert!((total - 1860.6).abs() < 1e-9, "{case}: {total}");
    }
}

#[test]
fn profile_file_round_trip() {
    let year = synthesize_year(4).slice(0, 96);
    let f = tempfile::NamedTempFile::new().unwrap();
    year.write_csv(f.path()).unwrap();
    let back = load_profiles(f.path()).unwrap();
    assert_eq!(back.len(), 96);
    assert_eq!(back.timestamps, year.timestamps);
    for (a, b) in back.mip_gbp_mwh.iter().zip(&year.mip_gbp_mwh) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn single_row_file_loads() {
    let f = write_rows(&[row(0, 0.0)]);
    let p = load_profiles(f.path()).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!((p.demand_factor[0], p.wind_cf[0], p.mip_gbp_mwh[0]), (0.62, 0.41, 38.5));
}

#[test]
fn out_of_range_capacity_factor_names_its_row() {
    let rows: Vec<String> = (0..10).map(|t| row(t, if t == 6 { 1.2 } else { 0.0 })).collect();
    let err = load_profiles(write_rows(&rows).path()).unwrap_err();
    assert_eq!(err.to_string(), "row 7: pv_cf out of range");
}

#[test]
fn short_year_is_rejected_with_expected_length() {
    let p = synthesize_year(1).slice(0, STEPS_PER_YEAR - 1);
    let err = p.ensure_full_year().unwrap_err();
    assert!(matches!(err, ProfileError::Length { expected: 17520, found: 17519 }));
    assert!(err.to_string().contains("17520"));
}

#[test]
fn missing_profile_names_path() {
    let err = load_profiles("/nonexistent/profiles.csv").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/profiles.csv"));
}

#[test]
fn scenario_range_is_checked() {
    let s = Scenario {
        network_file: "n.json".into(),
        profile_file: "p.csv".into(),
        capacity_case: CapacityCase::Current,
        time_range: Some(10..60),
        label: "x".into(),
    };
    assert_eq!(s.steps(100).unwrap(), 10..60);
    assert!(s.steps(50).is_err());
    assert_eq!(Scenario { time_range: None, ..s }.steps(48).unwrap(), 0..48);
}

#[test]
fn synthetic_year_shape() {
    let y = synthesize_year(1);
    assert_eq!(y.len(), STEPS_PER_YEAR);
    y.ensure_full_year().unwrap();
    y.validate().unwrap();
    assert!(y.demand_factor.iter().all(|&d| d > 0.0 && d <= 1.0));
    assert_eq!(y.demand_factor.iter().cloned().fold(0.0, f64::max), 1.0);
    for day in 0..365 {
        assert_eq!(y.pv_cf[day * 48], 0.0);
        assert_eq!(y.pv_cf[day * 48 + 1], 0.0);
    }
    assert!(y.mip_gbp_mwh.iter().any(|&m| m < 0.0));
    assert!(y.mip_gbp_mwh.iter().any(|&m| m > 90.0));
}
