//! Half-hourly profile series and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

pub const HEADER: [&str; 5] = ["timestamp", "demand_factor", "pv_cf", "wind_cf", "mip_gbp_mwh"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
pub const STEPS_PER_DAY: usize = 48;
pub const STEPS_PER_YEAR: usize = 365 * STEPS_PER_DAY;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("header must be `{}`", HEADER.join(","))]
    Header,
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("profile has {found} half-hours, expected {expected} for a full year")]
    Length { expected: usize, found: usize },
    #[error("series lengths differ")]
    Ragged,
}

/// Aligned half-hourly series. Row `t` of every field refers to `timestamps[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub timestamps: Vec<NaiveDateTime>,
    pub demand_factor: Vec<f64>,
    pub pv_cf: Vec<f64>,
    pub wind_cf: Vec<f64>,
    pub mip_gbp_mwh: Vec<f64>,
}

impl ProfileSet {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Rejects anything other than a 365-day half-hourly year.
    pub fn ensure_full_year(&self) -> Result<(), ProfileError> {
        if self.len() == STEPS_PER_YEAR {
            Ok(())
        } else {
            Err(ProfileError::Length {
                expected: STEPS_PER_YEAR,
                found: self.len(),
            })
        }
    }

    /// Checks alignment and value ranges. Rows are numbered from 1, header excluded.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let n = self.len();
        if [self.demand_factor.len(), self.pv_cf.len(), self.wind_cf.len(), self.mip_gbp_mwh.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(ProfileError::Ragged);
        }
        for t in 0..n {
            let row = t + 1;
            let bad = |message: String| Err(ProfileError::Row { row, message });
            if t > 0 && self.timestamps[t] <= self.timestamps[t - 1] {
                return bad("timestamps must increase".into());
            }
            let d = self.demand_factor[t];
            if !(d > 0.0 && d <= 1.0) {
                return bad("demand_factor out of range".into());
            }
            if !(0.0..=1.0).contains(&self.pv_cf[t]) {
                return bad("pv_cf out of range".into());
            }
            if !(0.0..=1.0).contains(&self.wind_cf[t]) {
                return bad("wind_cf out of range".into());
            }
            if !self.mip_gbp_mwh[t].is_finite() {
                return bad("mip_gbp_mwh is not finite".into());
            }
        }
        Ok(())
    }

    /// Contiguous sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> ProfileSet {
        ProfileSet {
            timestamps: self.timestamps[start..end].to_vec(),
            demand_factor: self.demand_factor[start..end].to_vec(),
            pv_cf: self.pv_cf[start..end].to_vec(),
            wind_cf: self.wind_cf[start..end].to_vec(),
            mip_gbp_mwh: self.mip_gbp_mwh[start..end].to_vec(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        let path = path.as_ref();
        let io = |source| ProfileError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut out).map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", HEADER.join(","))?;
        for t in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.timestamps[t].format(TIMESTAMP_FORMAT),
                self.demand_factor[t],
                self.pv_cf[t],
                self.wind_cf[t],
                self.mip_gbp_mwh[t]
            )?;
        }
        Ok(())
    }
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<ProfileSet, ProfileError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_profiles(file).map_err(|e| match e {
        ProfileError::Csv { source, .. } => ProfileError::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn parse_profiles(reader: impl std::io::Read) -> Result<ProfileSet, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |source| ProfileError::Csv {
        path: PathBuf::new(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(ProfileError::Header);
    }
    let mut set = ProfileSet {
        timestamps: Vec::new(),
        demand_factor: Vec::new(),
        pv_cf: Vec::new(),
        wind_cf: Vec::new(),
        mip_gbp_mwh: Vec::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != HEADER.len() {
            return Err(ProfileError::Row {
                row,
                message: format!("expected {} columns, found {}", HEADER.len(), record.len()),
            });
        }
        let ts = NaiveDateTime::parse_from_str(&record[0], TIMESTAMP_FORMAT).map_err(|_| ProfileError::Row {
            row,
            message: format!("timestamp `{}` is not YYYY-MM-DDTHH:MM", &record[0]),
        })?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = record[k + 1].parse().map_err(|_| ProfileError::Row {
                row,
                message: format!("{} `{}` is not a number", HEADER[k + 1], &record[k + 1]),
            })?;
        }
        set.timestamps.push(ts);
        set.demand_factor.push(vals[0]);
        set.pv_cf.push(vals[1]);
        set.wind_cf.push(vals[2]);
        set.mip_gbp_mwh.push(vals[3]);
    }
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "timestamp,demand_factor,pv_cf,wind_cf,mip_gbp_mwh\n";

    fn rows(n: usize, bad_row: Option<(usize, &str)>) -> String {
        let mut s = HEAD.to_string();
        for r in 1..=n {
            let (h, m) = ((r - 1) / 2, 30 * ((r - 1) % 2));
            match bad_row {
                Some((b, line)) if b == r => s.push_str(line),
                _ => s.push_str(&format!("2015-01-01T{h:02}:{m:02},0.62,0.0,0.41,38.5")),
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn single_row() {
        let p = parse_profiles(format!("{HEAD}2015-01-01T00:00,0.62,0.0,0.41,38.5\n").as_bytes()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.mip_gbp_mwh[0], 38.5);
    }

    #[test]
    fn out_of_range_cf_names_row() {
        let text = rows(8, Some((7, "2015-01-01T03:00,0.5,1.2,0.3,40")));
        let err = parse_profiles(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "row 7: pv_cf out of range");
    }

    #[test]
    fn structural_errors() {
        let e = parse_profiles(rows(3, Some((2, "2015-01-01T00:30,0.5,0.1"))).as_bytes()).unwrap_err();
        assert!(e.to_string().starts_with("row 2: expected 5 columns"));
        let e = parse_profiles(rows(3, Some((3, "2015-01-01T01:00,abc,0.1,0.1,1"))).as_bytes()).unwrap_err();
        assert!(e.to_string().starts_with("row 3: demand_factor"));
        let e = parse_profiles(rows(3, Some((3, "2015-01-01T00:00,0.5,0.1,0.1,1"))).as_bytes()).unwrap_err();
        assert_eq!(e.to_string(), "row 3: timestamps must increase");
        let e = parse_profiles("a,b\n".as_bytes()).unwrap_err();
        assert!(matches!(e, ProfileError::Header));
    }

    #[test]
    fn short_year_names_expected_length() {
        let p = parse_profiles(rows(4, None).as_bytes()).unwrap();
        let mut long = p.clone();
        let step = chrono::Duration::minutes(30);
        while long.len() < STEPS_PER_YEAR - 1 {
            let next = *long.timestamps.last().unwrap() + step;
            long.timestamps.push(next);
            long.demand_factor.push(0.5);
            long.pv_cf.push(0.0);
            long.wind_cf.push(0.0);
            long.mip_gbp_mwh.push(40.0);
        }
        let e = long.ensure_full_year().unwrap_err();
        assert!(e.to_string().contains("17520"), "{e}");
        assert!(e.to_string().contains("17519"));
    }

    #[test]
    fn csv_roundtrip() {
        let p = parse_profiles(rows(6, None).as_bytes()).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(parse_profiles(buf.as_slice()).unwrap(), p);
    }
}
