//! Seeded synthetic year standing in for measured demand, renewables and
//! market price data.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::profiles::{ProfileSet, STEPS_PER_DAY, STEPS_PER_YEAR};

/// Summer clear-sky midday capacity factor.
const PV_PEAK: f64 = 1.0;
const MIP_BASE: f64 = 40.0;

/// 0 in mid-July, 1 in mid-January.
fn winterness(day: usize) -> f64 {
    0.5 * (1.0 + (2.0 * PI * (day as f64 - 15.0) / 365.0).cos())
}

/// Within-day demand shape in [0, 1]; overnight trough, daytime plateau,
/// evening peak that sharpens in winter.
fn diurnal(hour: f64, w: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    let day = 1.0 / (1.0 + (-(hour - 7.0) * 1.6).exp()) * (1.0 / (1.0 + ((hour - 22.5) * 1.2).exp()));
    (0.55 * day + (0.25 + 0.25 * w) * bump(17.75, 1.6) + 0.1 * bump(8.5, 1.2)).min(1.0)
}

/// Solar elevation proxy: day length and height both grow towards midsummer.
fn clear_sky(day: usize, hour: f64) -> f64 {
    let w = winterness(day);
    let half_len = 8.2 - 3.8 * w;
    let x = (hour - 12.5) / half_len;
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let height = PV_PEAK * (1.0 - 0.6 * w);
    height * (0.5 * PI * x).cos().powf(1.2)
}

pub fn synthesize_year(seed: u64) -> ProfileSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let start = NaiveDate::from_ymd_opt(2015, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start");

    // Daily clearness: mostly clear in summer, overcast spells in winter.
    let clearness: Vec<f64> = (0..365)
        .map(|d| {
            let p_clear = 0.7 - 0.45 * winterness(d);
            if rng.random::<f64>() < p_clear {
                rng.random_range(0.95..=1.0)
            } else {
                rng.random_range(0.2..0.85)
            }
        })
        .collect();

    let mut timestamps = Vec::with_capacity(STEPS_PER_YEAR);
    let mut raw_demand = Vec::with_capacity(STEPS_PER_YEAR);
    let mut pv = Vec::with_capacity(STEPS_PER_YEAR);
    let mut wind = Vec::with_capacity(STEPS_PER_YEAR);
    let mut wind_state = 0.0f64;
    let mut cloud_state = 0.0f64;
    let mut demand_noise = 0.0f64;
    for t in 0..STEPS_PER_YEAR {
        let day = t / STEPS_PER_DAY;
        let hour = (t % STEPS_PER_DAY) as f64 * 0.5;
        let w = winterness(day);
        timestamps.push(start + Duration::minutes(30 * t as i64));

        demand_noise = 0.97 * demand_noise + 0.006 * unit.sample(&mut rng);
        raw_demand.push((0.5 + 0.3 * w) * (0.52 + 0.48 * diurnal(hour, w)) + demand_noise);

        cloud_state = 0.9 * cloud_state + 0.05 * unit.sample(&mut rng);
        let c = (clearness[day] * (1.0 - cloud_state.abs() * (1.0 - clearness[day]) * 4.0)).clamp(0.0, 1.0);
        pv.push((clear_sky(day, hour) * c).clamp(0.0, 1.0));

        wind_state = 0.985 * wind_state + (1.0f64 - 0.985 * 0.985).sqrt() * unit.sample(&mut rng);
        let z = -0.9 + 0.5 * w + 1.3 * wind_state;
        wind.push(1.0 / (1.0 + (-z).exp()));
    }

    let peak = raw_demand.iter().cloned().fold(f64::MIN, f64::max);
    let demand_factor: Vec<f64> = raw_demand.iter().map(|d| (d / peak).clamp(1e-3, 1.0)).collect();
    let mean_demand = demand_factor.iter().sum::<f64>() / demand_factor.len() as f64;

    let mut mip = Vec::with_capacity(STEPS_PER_YEAR);
    let mut price_noise = 0.0f64;
    for t in 0..STEPS_PER_YEAR {
        price_noise = 0.95 * price_noise + 2.5 * unit.sample(&mut rng);
        let renewables = 0.5 * (pv[t] + wind[t]);
        let mut p = MIP_BASE + 40.0 * (demand_factor[t] - mean_demand) - 6.0 * renewables + price_noise;
        let u: f64 = rng.random();
        if u < 0.004 && demand_factor[t] > 0.7 {
            p += rng.random_range(35.0..70.0);
        } else if u < 0.004 && demand_factor[t] < 0.5 {
            p -= rng.random_range(40.0..75.0);
        }
        mip.push((p * 100.0).round() / 100.0);
    }

    ProfileSet {
        timestamps,
        demand_factor,
        pv_cf: pv,
        wind_cf: wind,
        mip_gbp_mwh: mip,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midnight_is_dark_and_ranges_hold() {
        let p = synthesize_year(7);
        assert_eq!(p.len(), STEPS_PER_YEAR);
        p.validate().unwrap();
        for d in 0..365 {
            assert_eq!(p.pv_cf[d * 48], 0.0);
            assert_eq!(p.pv_cf[d * 48 + 1], 0.0);
        }
        assert_eq!(p.demand_factor.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synthesize_year(1), synthesize_year(1));
        assert_ne!(synthesize_year(1).mip_gbp_mwh, synthesize_year(2).mip_gbp_mwh);
    }

    #[test]
    fn price_extremes_present() {
        let p = synthesize_year(1);
        assert!(p.mip_gbp_mwh.iter().any(|&m| m < 0.0));
        assert!(p.mip_gbp_mwh.iter().any(|&m| m > 90.0));
    }
}
