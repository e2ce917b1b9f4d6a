//! District-level belief imputation from group-wise survey means.
//!
//! Survey waves are irregular while outcome data is weekly. A week is
//! represented by its Sunday and takes the beliefs of the nearer of the two
//! surrounding waves; each district's value is the share-weighted mean over
//! demographic groups.
//!
//! Inputs are two CSV files:
//!
//! * `group_means.csv`: `wave_id,wave_start,dimension,group,mean`, dates as
//!   `YYYY-MM-DD`, means in `[0, 1]`; an empty `mean` marks a cell as
//!   explicitly missing.
//! * `district_shares.csv`: `district,group,share`, shares summing to one
//!   per district.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use thiserror::Error;

use crate::integrator::fmt_num;

/// Tolerance on the per-district share sum.
pub const SHARE_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected columns {expected}")]
    Header { line: u64, expected: &'static str },
    #[error("line {line}: {message}")]
    Field { line: u64, message: String },
    #[error("wave `{wave}` has two start dates ({first} and {second})")]
    InconsistentWave {
        wave: String,
        first: NaiveDate,
        second: NaiveDate,
    },
    #[error("waves `{0}` and `{1}` start on the same date")]
    DuplicateWaveStart(String, String),
    #[error("duplicate entry for {0}")]
    Duplicate(String),
    #[error("district `{district}`: shares sum to {sum}, not 1")]
    SharesNotNormalized { district: String, sum: f64 },
    #[error("no mean for group `{group}`")]
    MissingGroupMean { group: String },
    #[error("incomplete table: no mean for dimension `{dimension}`, group `{group}`, wave `{wave}`")]
    IncompleteTable {
        dimension: String,
        group: String,
        wave: String,
    },
    #[error("table has no waves")]
    NoWaves,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    pub id: String,
    pub start: NaiveDate,
}

/// Mean belief per (dimension, group, wave).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupBeliefTable {
    /// Sorted by start date, strictly increasing.
    pub waves: Vec<Wave>,
    /// In order of first appearance.
    pub groups: Vec<String>,
    /// In order of first appearance.
    pub dimensions: Vec<String>,
    /// `None` marks an explicitly missing cell.
    cells: BTreeMap<(usize, usize, usize), Option<f64>>,
}

fn index_of(list: &mut Vec<String>, name: &str) -> usize {
    match list.iter().position(|x| x == name) {
        Some(k) => k,
        None => {
            list.push(name.to_string());
            list.len() - 1
        }
    }
}

fn parse_date(line: u64, s: &str) -> Result<NaiveDate, BeliefError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| BeliefError::Field {
        line,
        message: format!("bad date `{s}`: {e}"),
    })
}

fn parse_unit(line: u64, what: &str, s: &str) -> Result<f64, BeliefError> {
    let v: f64 = s.trim().parse().map_err(|_| BeliefError::Field {
        line,
        message: format!("bad {what} `{s}`"),
    })?;
    if !(0.0..=1.0).contains(&v) {
        return Err(BeliefError::Field {
            line,
            message: format!("{what} {v} outside [0, 1]"),
        });
    }
    Ok(v)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    expected: &'static [&'static str],
    label: &'static str,
) -> Result<(), BeliefError> {
    let header = rdr.headers()?.clone();
    if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != *b) {
        return Err(BeliefError::Header {
            line: 1,
            expected: label,
        });
    }
    Ok(())
}

impl GroupBeliefTable {
    pub fn from_csv<R: Read>(input: R) -> Result<Self, BeliefError> {
        const COLS: [&str; 5] = ["wave_id", "wave_start", "dimension", "group", "mean"];
        let mut rdr = reader(input);
        check_header(&mut rdr, &COLS, "wave_id,wave_start,dimension,group,mean")?;

        let mut starts: Vec<(String, NaiveDate)> = Vec::new();
        let mut raw: Vec<(String, String, String, Option<f64>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != COLS.len() {
                return Err(BeliefError::Field {
                    line,
                    message: format!("expected {} fields, found {}", COLS.len(), rec.len()),
                });
            }
            let wave = rec[0].to_string();
            let start = parse_date(line, &rec[1])?;
            let mean = if rec[4].is_empty() {
                None
            } else {
                Some(parse_unit(line, "mean", &rec[4])?)
            };
            match starts.iter().find(|(w, _)| *w == wave) {
                Some((_, first)) if *first != start => {
                    return Err(BeliefError::InconsistentWave {
                        wave,
                        first: *first,
                        second: start,
                    })
                }
                Some(_) => {}
                None => starts.push((wave.clone(), start)),
            }
            raw.push((wave, rec[2].to_string(), rec[3].to_string(), mean));
        }

        starts.sort_by_key(|(_, d)| *d);
        if let Some(w) = starts.windows(2).find(|w| w[0].1 == w[1].1) {
            return Err(BeliefError::DuplicateWaveStart(w[0].0.clone(), w[1].0.clone()));
        }
        let mut table = GroupBeliefTable {
            waves: starts
                .into_iter()
                .map(|(id, start)| Wave { id, start })
                .collect(),
            ..Default::default()
        };
        for (wave, dim, group, mean) in raw {
            let w = table.waves.iter().position(|x| x.id == wave).expect("wave registered above");
            let d = index_of(&mut table.dimensions, &dim);
            let g = index_of(&mut table.groups, &group);
            if table.cells.insert((d, g, w), mean).is_some() {
                return Err(BeliefError::Duplicate(format!(
                    "dimension `{dim}`, group `{group}`, wave `{wave}`"
                )));
            }
        }
        Ok(table)
    }

    /// Mean for the given cell, if present and not marked missing.
    pub fn mean(&self, dimension: &str, group: &str, wave: usize) -> Option<f64> {
        let d = self.dimensions.iter().position(|x| x == dimension)?;
        let g = self.groups.iter().position(|x| x == group)?;
        self.cells.get(&(d, g, wave)).copied().flatten()
    }

    pub fn wave_starts(&self) -> Vec<NaiveDate> {
        self.waves.iter().map(|w| w.start).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistrictShares {
    pub district: String,
    /// `(group, share)` in file order.
    pub shares: Vec<(String, f64)>,
}

impl DistrictShares {
    pub fn new(district: impl Into<String>, shares: Vec<(String, f64)>) -> Result<Self, BeliefError> {
        let district = district.into();
        for (k, (g, s)) in shares.iter().enumerate() {
            if !(*s >= 0.0 && s.is_finite()) {
                return Err(BeliefError::Field {
                    line: 0,
                    message: format!("district `{district}`: negative share {s} for `{g}`"),
                });
            }
            if shares[..k].iter().any(|(h, _)| h == g) {
                return Err(BeliefError::Duplicate(format!(
                    "district `{district}`, group `{g}`"
                )));
            }
        }
        let sum: f64 = shares.iter().map(|(_, s)| s).sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOL {
            return Err(BeliefError::SharesNotNormalized { district, sum });
        }
        Ok(DistrictShares { district, shares })
    }
}

/// Parses `district,group,share`; districts keep their first-appearance order.
pub fn parse_district_shares<R: Read>(input: R) -> Result<Vec<DistrictShares>, BeliefError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["district", "group", "share"], "district,group,share")?;
    let mut grouped: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(BeliefError::Field {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let share: f64 = rec[2].parse().map_err(|_| BeliefError::Field {
            line,
            message: format!("bad share `{}`", &rec[2]),
        })?;
        if !(share >= 0.0 && share.is_finite()) {
            return Err(BeliefError::Field {
                line,
                message: format!("share {share} must be non-negative"),
            });
        }
        let entry = match grouped.iter_mut().position(|(d, _)| d == &rec[0]) {
            Some(k) => &mut grouped[k].1,
            None => {
                grouped.push((rec[0].to_string(), Vec::new()));
                &mut grouped.last_mut().unwrap().1
            }
        };
        entry.push((rec[1].to_string(), share));
    }
    grouped
        .into_iter()
        .map(|(d, s)| DistrictShares::new(d, s))
        .collect()
}

/// `sum_h n_{i,h} * b_h` over the district's groups, in share order.
pub fn impute_district(shares: &DistrictShares, week_means: &HashMap<String, f64>) -> Result<f64, BeliefError> {
    let mut acc = 0.0;
    for (group, share) in &shares.shares {
        let mean = week_means
            .get(group)
            .ok_or_else(|| BeliefError::MissingGroupMean {
                group: group.clone(),
            })?;
        acc += share * mean;
    }
    Ok(acc)
}

/// Index of the wave whose beliefs a week takes.
///
/// Between waves X and X+1 the week gets X only if its Sunday is strictly
/// closer to X's start; ties go to X+1. Weeks before the first wave or after
/// the last one take that wave. `wave_starts` must be non-empty and strictly
/// increasing.
pub fn wave_for_week(week_sunday: NaiveDate, wave_starts: &[NaiveDate]) -> usize {
    let after = wave_starts.partition_point(|&s| s <= week_sunday);
    if after == 0 {
        return 0;
    }
    let x = after - 1;
    if x + 1 >= wave_starts.len() {
        return x;
    }
    let to_x = week_sunday - wave_starts[x];
    let to_next = wave_starts[x + 1] - week_sunday;
    if to_x < to_next {
        x
    } else {
        x + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedBeliefSeries {
    pub district: String,
    pub dimension: String,
    pub weeks: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

/// One imputed series per dimension of `table` for one district.
pub fn build_series(
    table: &GroupBeliefTable,
    shares: &DistrictShares,
    weeks: &[NaiveDate],
) -> Result<Vec<ImputedBeliefSeries>, BeliefError> {
    if table.waves.is_empty() {
        return Err(BeliefError::NoWaves);
    }
    let starts = table.wave_starts();
    let week_waves: Vec<usize> = weeks.iter().map(|&w| wave_for_week(w, &starts)).collect();
    let mut out = Vec::with_capacity(table.dimensions.len());
    for dim in &table.dimensions {
        let mut values = Vec::with_capacity(weeks.len());
        let mut cache: HashMap<usize, f64> = HashMap::new();
        for &w in &week_waves {
            if let Some(&v) = cache.get(&w) {
                values.push(v);
                continue;
            }
            let mut means = HashMap::new();
            for (group, _) in &shares.shares {
                let m = table
                    .mean(dim, group, w)
                    .ok_or_else(|| BeliefError::IncompleteTable {
                        dimension: dim.clone(),
                        group: group.clone(),
                        wave: table.waves[w].id.clone(),
                    })?;
                means.insert(group.clone(), m);
            }
            let v = impute_district(shares, &means)?;
            cache.insert(w, v);
            values.push(v);
        }
        out.push(ImputedBeliefSeries {
            district: shares.district.clone(),
            dimension: dim.clone(),
            weeks: weeks.to_vec(),
            values,
        });
    }
    Ok(out)
}

/// Every Sunday in `[from, to]`.
pub fn sundays_between(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let offset = (7 - from.weekday().num_days_from_sunday()) % 7;
    let mut d = from + Duration::days(offset as i64);
    debug_assert_eq!(d.weekday(), Weekday::Sun);
    let mut out = Vec::new();
    while d <= to {
        out.push(d);
        d += Duration::days(7);
    }
    out
}

pub const IMPUTED_CSV_HEADER: &str = "district,dimension,week_sunday,value";

pub fn write_imputed_csv<W: Write>(mut out: W, series: &[ImputedBeliefSeries]) -> io::Result<()> {
    writeln!(out, "{IMPUTED_CSV_HEADER}")?;
    for s in series {
        for (week, v) in s.weeks.iter().zip(&s.values) {
            writeln!(
                out,
                "{},{},{},{}",
                csv_field(&s.district),
                csv_field(&s.dimension),
                week.format("%Y-%m-%d"),
                fmt_num(*v)
            )?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
