//! Hourly wind-farm records, feature construction, standardisation and
//! monthly sliding-window splits.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of model inputs: four wind components and four calendar terms.
pub const N_FEATURES: usize = 8;

pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["u10", "v10", "u100", "v100", "cos_hour", "sin_hour", "cos_day", "sin_day"];

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub u10: f64,
    pub v10: f64,
    pub u100: f64,
    pub v100: f64,
    /// Normalised power; `None` when the row has no observation.
    pub power: Option<f64>,
}

/// CSV column names. Matching is case-insensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub timestamp: String,
    pub u10: String,
    pub v10: String,
    pub u100: String,
    pub v100: String,
    pub power: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            timestamp: "TIMESTAMP".into(),
            u10: "U10".into(),
            v10: "V10".into(),
            u100: "U100".into(),
            v100: "V100".into(),
            power: "TARGETVAR".into(),
        }
    }
}

/// Records of one zone, sorted by time.
#[derive(Debug, Clone, Default)]
pub struct ZoneRecords {
    pub records: Vec<RawRecord>,
    /// Consecutive records not exactly one hour apart.
    pub gaps: usize,
}

const TIMESTAMP_FORMATS: [&str; 5] = [
    "%Y%m%d %H:%M",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
];

/// Parses `YYYYMMDD HH:MM` or ISO-8601 `YYYY-MM-DDTHH:MM[:SS]`.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M").to_string()
}

pub fn load_zone_csv(path: &Path, columns: &ColumnMap) -> Result<ZoneRecords> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_zone_csv(file, path, columns)
}

/// Reads zone records from any reader; `path` only labels diagnostics.
pub fn read_zone_csv<R: Read>(reader: R, path: &Path, columns: &ColumnMap) -> Result<ZoneRecords> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Ok(ZoneRecords::default());
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let idx = [
        find(&columns.timestamp)?,
        find(&columns.u10)?,
        find(&columns.v10)?,
        find(&columns.u100)?,
        find(&columns.v100)?,
    ];
    let power_idx = find(&columns.power)?;

    let mut rows: Vec<(usize, RawRecord)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |k: usize| rec.get(k).unwrap_or("");
        let timestamp = parse_timestamp(field(idx[0]))
            .ok_or_else(|| parse_err(format!("bad timestamp {:?}", field(idx[0]))))?;
        let mut wind = [0.0; 4];
        for (w, &k) in wind.iter_mut().zip(&idx[1..]) {
            *w = field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad wind value {:?}", field(k))))?;
        }
        let raw_power = field(power_idx);
        let power = if raw_power.is_empty() || raw_power.eq_ignore_ascii_case("nan") {
            None
        } else {
            Some(
                raw_power
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("bad power value {raw_power:?}")))?,
            )
        };
        rows.push((
            line,
            RawRecord {
                timestamp,
                u10: wind[0],
                v10: wind[1],
                u100: wind[2],
                v100: wind[3],
                power,
            },
        ));
    }
    rows.sort_by_key(|(line, r)| (r.timestamp, *line));
    for pair in rows.windows(2) {
        if pair[0].1.timestamp == pair[1].1.timestamp {
            return Err(Error::DuplicateTimestamp {
                path: path.to_path_buf(),
                line: pair[1].0,
                timestamp: format_timestamp(&pair[1].1.timestamp),
            });
        }
    }
    let records: Vec<RawRecord> = rows.into_iter().map(|(_, r)| r).collect();
    let gaps = records
        .windows(2)
        .filter(|w| w[1].timestamp - w[0].timestamp != Duration::hours(1))
        .count();
    if gaps > 0 {
        log::warn!("{}: {gaps} non-hourly gaps between records", path.display());
    }
    Ok(ZoneRecords { records, gaps })
}

/// Writes records with GEFCom column names and `YYYYMMDD HH:MM` timestamps.
pub fn write_zone_csv<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["TIMESTAMP", "U10", "V10", "U100", "V100", "TARGETVAR"])?;
    for r in records {
        w.write_record([
            r.timestamp.format("%Y%m%d %H:%M").to_string(),
            r.u10.to_string(),
            r.v10.to_string(),
            r.u100.to_string(),
            r.v100.to_string(),
            r.power.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<zone csv>", e))?;
    Ok(())
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub means: Vec<f64>,
    /// A zero-variance column is stored with divisor 1.
    pub stds: Vec<f64>,
}

impl FeatureStats {
    pub fn apply<T: Scalar>(&self, features: &mut Array2<T>) -> Result<()> {
        if features.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                context: "standardisation columns",
                expected: self.means.len(),
                found: features.ncols(),
            });
        }
        for (mut col, (&m, &s)) in features.axis_iter_mut(Axis(1)).zip(self.means.iter().zip(&self.stds)) {
            let (m, s) = (T::lit(m), T::lit(s));
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(())
    }
}

/// Feature matrix and targets of one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub zone: String,
    pub timestamps: Vec<NaiveDateTime>,
    pub features: Array2<T>,
    /// Observed power; NaN marks a missing observation.
    pub targets: Array1<T>,
    /// Set once [`standardize`] has been applied.
    pub stats: Option<FeatureStats>,
    /// Every observed target lies in `[0, 1]`.
    pub bounded_target: bool,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn has_target(&self, row: usize) -> bool {
        self.targets[row].is_finite()
    }

    /// Rows of `range` with an observed target.
    pub fn observed_rows(&self, range: Range<usize>) -> Vec<usize> {
        range.filter(|&i| self.has_target(i)).collect()
    }

    /// Features and targets of the given rows.
    pub fn select(&self, rows: &[usize]) -> (Array2<T>, Array1<T>) {
        (self.features.select(Axis(0), rows), self.targets.select(Axis(0), rows))
    }
}

/// Wind components plus `cos/sin(2 pi hour/24)` and `cos/sin(2 pi day/365)`,
/// with `day` the 1-based day of the year.
pub fn build_features<T: Scalar>(zone: &str, records: &[RawRecord]) -> Dataset<T> {
    let n = records.len();
    let mut features = Array2::<T>::zeros((n, N_FEATURES));
    for (mut row, r) in features.axis_iter_mut(Axis(0)).zip(records) {
        let hour = 2.0 * PI * f64::from(r.timestamp.hour()) / 24.0;
        let day = 2.0 * PI * f64::from(r.timestamp.ordinal()) / 365.0;
        let values = [r.u10, r.v10, r.u100, r.v100, hour.cos(), hour.sin(), day.cos(), day.sin()];
        for (dst, v) in row.iter_mut().zip(values) {
            *dst = T::lit(v);
        }
    }
    let targets = records
        .iter()
        .map(|r| r.power.map_or(T::nan(), T::lit))
        .collect::<Array1<T>>();
    let bounded_target = records
        .iter()
        .filter_map(|r| r.power)
        .all(|p| (0.0..=1.0).contains(&p));
    Dataset {
        zone: zone.to_string(),
        timestamps: records.iter().map(|r| r.timestamp).collect(),
        features,
        targets,
        stats: None,
        bounded_target,
    }
}

/// Z-scores every column with statistics from the rows in `train`.
pub fn standardize<T: Scalar>(dataset: &Dataset<T>, train: Range<usize>) -> Result<Dataset<T>> {
    if train.is_empty() || train.end > dataset.len() {
        return Err(Error::InvalidConfig(format!(
            "standardisation range {train:?} is empty or exceeds {} rows",
            dataset.len()
        )));
    }
    let block = dataset.features.slice(ndarray::s![train.clone(), ..]);
    let n = train.len() as f64;
    let mut means = Vec::with_capacity(block.ncols());
    let mut stds = Vec::with_capacity(block.ncols());
    for col in block.axis_iter(Axis(1)) {
        let mean = col.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
        let var = col.iter().map(|v| (v.to_f64_lossy() - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        means.push(mean);
        stds.push(if std > 0.0 { std } else { 1.0 });
    }
    let stats = FeatureStats { means, stds };
    let mut out = dataset.clone();
    stats.apply(&mut out.features)?;
    out.stats = Some(stats);
    Ok(out)
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range");
        Self { year, month }
    }

    pub fn of(ts: &NaiveDateTime) -> Self {
        Self::new(ts.year(), ts.month())
    }

    pub fn add_months(self, k: i32) -> Self {
        let idx = self.year * 12 + self.month as i32 - 1 + k;
        Self::new(idx.div_euclid(12), (idx.rem_euclid(12) + 1) as u32)
    }

    pub fn start(self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
            .expect("valid month")
            .and_hms_opt(0, 0, 0)
            .expect("midnight")
    }

    pub fn hours(self) -> i64 {
        (self.add_months(1).start() - self.start()).num_hours()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Self::new(year, month))
    }
}

/// One backtest step: train on twelve months, test on the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub test_month: YearMonth,
    /// Row range of the twelve training months.
    pub train: Range<usize>,
    /// Row range of the test month.
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowPlan {
    pub windows: Vec<Window>,
}

/// Length of the training window in months.
pub const TRAIN_MONTHS: i32 = 12;

/// Plans one window per month of `eval_year` that has test rows, each
/// trained on the twelve preceding calendar months.
///
/// `timestamps` must be sorted. Data must start no later than in January of
/// the previous year; the first record's month counts as covered.
pub fn make_windows(timestamps: &[NaiveDateTime], eval_year: i32) -> Result<WindowPlan> {
    let first = timestamps.first().ok_or_else(|| Error::InsufficientHistory {
        first_feasible: "none (no data)".into(),
    })?;
    let first_feasible = YearMonth::of(first).add_months(TRAIN_MONTHS);
    let january = YearMonth::new(eval_year, 1);
    if first_feasible > january {
        return Err(Error::InsufficientHistory {
            first_feasible: first_feasible.to_string(),
        });
    }
    let row_at = |ts: NaiveDateTime| timestamps.partition_point(|t| *t < ts);
    let windows: Vec<Window> = (0..12)
        .map(|k| january.add_months(k))
        .map(|month| {
            let train_start = row_at(month.add_months(-TRAIN_MONTHS).start());
            let test_start = row_at(month.start());
            let test_end = row_at(month.add_months(1).start());
            Window {
                test_month: month,
                train: train_start..test_start,
                test: test_start..test_end,
            }
        })
        .filter(|w| !w.test.is_empty() && !w.train.is_empty())
        .collect();
    if windows.is_empty() {
        return Err(Error::InsufficientHistory {
            first_feasible: format!("{first_feasible} (no rows fall in {eval_year})"),
        });
    }
    Ok(WindowPlan { windows })
}
