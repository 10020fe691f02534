//! Profile ingestion, synthetic profiles, fixture networks and scenario descriptions.

mod fixture;
mod profiles;
mod synth;

use std::ops::Range;
use std::path::PathBuf;

pub use fixture::{
    build_fixture, CapacityCase, CapacityTable, UnknownCase, CCGT_COST, CONSTRAINED_GROUP_BUSBAR,
    CONSTRAINED_PARENT, DEEPEST_11KV_BUS, GRID_RATING_MW, MIN_DEMAND_FACTOR, OCGT_COST, REVERSE_SIZING,
    SECOND_GRID_BUS, SLACK_BUS,
};
pub use profiles::{
    load_profiles, parse_profiles, ProfileError, ProfileSet, HEADER, STEPS_PER_DAY, STEPS_PER_YEAR,
    TIMESTAMP_FORMAT,
};
pub use synth::synthesize_year;

/// A run request: which network, which profiles, which half-hours.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network_file: PathBuf,
    pub profile_file: PathBuf,
    pub capacity_case: CapacityCase,
    /// Half-hour indices `[start, end)`; `None` runs the whole profile.
    pub time_range: Option<Range<usize>>,
    pub label: String,
}

impl Scenario {
    /// Resolves the time range against a profile length.
    pub fn steps(&self, profile_len: usize) -> Result<Range<usize>, ProfileError> {
        match &self.time_range {
            None => Ok(0..profile_len),
            Some(r) if r.start < r.end && r.end <= profile_len => Ok(r.clone()),
            Some(r) => Err(ProfileError::Row {
                row: r.end,
                message: format!("time range {}..{} outside profile of {profile_len} steps", r.start, r.end),
            }),
        }
    }
}
