//! Multi-site power series: CSV ingestion, lag features, day-window filter
//! and normalisation.
//!
//! Input rows are `timestamp,site_1,…,site_P`. A target at time `t` uses, for
//! every site, the values at `t − (h + l)·c` for `l = 0..lags`, where `h` is
//! the horizon and `c` the cadence. Lags are looked up by timestamp, so gaps
//! in the series never produce misaligned features.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::forecast::Denormalizer;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Steps between the most recent lag and the target.
    pub horizon: usize,
    pub lags: usize,
    /// Inferred from the most common spacing when absent.
    pub cadence_minutes: Option<u32>,
    /// Local `HH:MM` bounds applied to target timestamps, inclusive.
    pub day_start: Option<String>,
    pub day_end: Option<String>,
    /// Offset of local time from the timestamps in the file.
    pub tz_offset_minutes: i32,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            horizon: 3,
            lags: 2,
            cadence_minutes: None,
            day_start: Some("07:00".into()),
            day_end: Some("19:00".into()),
            tz_offset_minutes: 0,
        }
    }
}

impl DataConfig {
    fn window(&self) -> Result<Option<(NaiveTime, NaiveTime)>> {
        let parse = |s: &str| {
            NaiveTime::parse_from_str(s, "%H:%M")
                .map_err(|e| GgpError::Config(format!("bad time of day {s:?}: {e}")))
        };
        match (&self.day_start, &self.day_end) {
            (Some(a), Some(b)) => Ok(Some((parse(a)?, parse(b)?))),
            (None, None) => Ok(None),
            _ => Err(GgpError::Config(
                "day_start and day_end must be given together".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.lags == 0 {
            return Err(GgpError::Config("horizon and lags must be positive".into()));
        }
        if self.cadence_minutes == Some(0) {
            return Err(GgpError::Config("cadence must be positive".into()));
        }
        self.window().map(|_| ())
    }
}

/// Parsed rows with no missing values.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub site_ids: Vec<String>,
    /// `rows × P`.
    pub values: Mat<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: usize,
    pub dropped_missing: usize,
    pub outside_window: usize,
    pub missing_lags: usize,
    pub usable: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnNorm {
    pub mean: f64,
    pub scale: f64,
    pub normalized: bool,
}

impl ColumnNorm {
    pub const IDENTITY: ColumnNorm = ColumnNorm {
        mean: 0.0,
        scale: 1.0,
        normalized: false,
    };

    fn fit(values: impl Iterator<Item = f64> + Clone, name: &str) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut scale = var.sqrt();
        if !(scale > 1e-12) {
            log::warn!("column {name} is constant; using unit scale");
            scale = 1.0;
        }
        ColumnNorm {
            mean,
            scale,
            normalized: true,
        }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// Per-column statistics for inputs and targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormState {
    pub x: Vec<ColumnNorm>,
    pub y: Vec<ColumnNorm>,
}

impl NormState {
    pub fn denormalizer(&self) -> Denormalizer {
        Denormalizer {
            mean: self.y.iter().map(|c| c.mean).collect(),
            scale: self.y.iter().map(|c| c.scale).collect(),
        }
    }
}

/// Model-ready data. `x` holds a time column (days, local time, never
/// normalised) followed by `lags` columns per site; `y` holds targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub raw: RawSeries,
    pub timestamps: Vec<NaiveDateTime>,
    pub site_ids: Vec<String>,
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    pub norm: NormState,
    pub report: IngestReport,
    pub horizon: usize,
    pub lags: usize,
    pub cadence: Duration,
}

impl Dataset {
    pub fn tasks(&self) -> usize {
        self.site_ids.len()
    }

    pub fn len(&self) -> usize {
        self.y.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input columns holding the lags of `site`.
    pub fn lag_columns(&self, site: usize) -> Vec<usize> {
        lag_columns(site, self.lags)
    }

    pub fn raw_y(&self) -> Mat<f64> {
        Mat::from_fn(self.y.rows(), self.y.cols(), |r, i| {
            self.norm.y[i].inverse(self.y.get(r, i))
        })
    }

    pub fn raw_x(&self) -> Mat<f64> {
        Mat::from_fn(self.x.rows(), self.x.cols(), |r, c| {
            self.norm.x[c].inverse(self.x.get(r, c))
        })
    }

    /// Most recent observed value per site, raw scale.
    pub fn persistence_raw(&self) -> Mat<f64> {
        Mat::from_fn(self.len(), self.tasks(), |r, i| {
            let c = lag_columns(i, self.lags)[0];
            self.norm.x[c].inverse(self.x.get(r, c))
        })
    }

    pub fn denormalizer(&self) -> Denormalizer {
        self.norm.denormalizer()
    }

    /// Chronological split: the last `test_fraction` of rows become the test
    /// set. Both halves keep the same normalisation.
    pub fn split(&self, test_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(GgpError::Config(format!(
                "test fraction {test_fraction} outside [0, 1)"
            )));
        }
        let n = self.len();
        let n_test = ((n as f64) * test_fraction).round() as usize;
        let cut = n - n_test;
        if cut == 0 {
            return Err(GgpError::EmptyAfterFilter);
        }
        Ok((self.rows(0..cut), self.rows(cut..n)))
    }

    pub fn rows(&self, range: std::ops::Range<usize>) -> Dataset {
        let take =
            |m: &Mat<f64>| Mat::from_fn(range.len(), m.cols(), |r, c| m.get(range.start + r, c));
        Dataset {
            raw: self.raw.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            site_ids: self.site_ids.clone(),
            x: take(&self.x),
            y: take(&self.y),
            norm: self.norm.clone(),
            report: IngestReport {
                usable: range.len(),
                ..self.report
            },
            horizon: self.horizon,
            lags: self.lags,
            cadence: self.cadence,
        }
    }
}

pub fn lag_columns(site: usize, lags: usize) -> Vec<usize> {
    (0..lags).map(|l| 1 + site * lags + l).collect()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for f in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(t);
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_utc())
}

/// Reads a CSV in the ingest schema. Rows with a missing cell are dropped
/// and counted.
pub fn read_raw(path: &Path) -> Result<(RawSeries, usize, usize)> {
    let schema = |reason: String| GgpError::SchemaError {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0) != Some("timestamp") {
        return Err(schema("header must be `timestamp,<site>,…`".into()));
    }
    let site_ids: Vec<String> = header.iter().skip(1).map(String::from).collect();
    if site_ids.iter().any(|s| s.is_empty()) {
        return Err(schema("empty site name in header".into()));
    }
    let p = site_ids.len();
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let (mut read, mut dropped) = (0, 0);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        read += 1;
        if rec.len() != p + 1 {
            return Err(schema(format!("row {} has {} fields", i + 1, rec.len())));
        }
        let t = parse_timestamp(&rec[0])
            .ok_or_else(|| schema(format!("row {}: bad timestamp {:?}", i + 1, &rec[0])))?;
        let mut row = Vec::with_capacity(p);
        let mut missing = false;
        for cell in rec.iter().skip(1) {
            if cell.is_empty()
                || cell.eq_ignore_ascii_case("nan")
                || cell.eq_ignore_ascii_case("na")
            {
                missing = true;
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| schema(format!("row {}: bad value {cell:?}", i + 1)))?;
            if !v.is_finite() {
                missing = true;
            }
            row.push(v);
        }
        if missing {
            dropped += 1;
            continue;
        }
        if let Some(&last) = timestamps.last() {
            if t <= last {
                return Err(GgpError::NonMonotoneTime { row: i + 1 });
            }
        }
        timestamps.push(t);
        values.extend(row);
    }
    let n = timestamps.len();
    Ok((
        RawSeries {
            timestamps,
            site_ids,
            values: Mat::from_vec(n, p, values)?,
        },
        read,
        dropped,
    ))
}

/// Writes a series in the ingest schema, atomically.
pub fn write_raw(raw: &RawSeries, path: &Path) -> Result<()> {
    let mut s = String::from("timestamp");
    for id in &raw.site_ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (r, t) in raw.timestamps.iter().enumerate() {
        s.push_str(&t.format(TIMESTAMP_FORMAT).to_string());
        for v in raw.values.row(r) {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn infer_cadence(ts: &[NaiveDateTime]) -> Option<Duration> {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for w in ts.windows(2) {
        *counts.entry((w[1] - w[0]).num_seconds()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(secs, c)| (c, std::cmp::Reverse(secs)))
        .map(|(secs, _)| Duration::seconds(secs))
}

/// Days since the Unix epoch in local time.
fn time_index(t: NaiveDateTime) -> f64 {
    t.and_utc().timestamp() as f64 / 86_400.0
}

pub fn ingest_csv(path: &Path, cfg: &DataConfig, norm: Option<&NormState>) -> Result<Dataset> {
    let (raw, read, dropped) = read_raw(path)?;
    let mut ds = from_raw(raw, cfg, norm)?;
    ds.report.rows_read = read;
    ds.report.dropped_missing = dropped;
    Ok(ds)
}

/// Builds features from an in-memory series. Normalisation statistics are
/// fitted unless `norm` is given.
pub fn from_raw(raw: RawSeries, cfg: &DataConfig, norm: Option<&NormState>) -> Result<Dataset> {
    cfg.validate()?;
    let cadence = match cfg.cadence_minutes {
        Some(m) => Duration::minutes(m as i64),
        None => infer_cadence(&raw.timestamps).ok_or(GgpError::EmptyAfterFilter)?,
    };
    let window = cfg.window()?;
    let offset = Duration::minutes(cfg.tz_offset_minutes as i64);
    let index: HashMap<NaiveDateTime, usize> = raw
        .timestamps
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();
    let p = raw.site_ids.len();
    let d = 1 + p * cfg.lags;
    let mut report = IngestReport {
        rows_read: raw.timestamps.len(),
        ..IngestReport::default()
    };
    let mut timestamps = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lag_rows = vec![0usize; cfg.lags];
    for (r, &t) in raw.timestamps.iter().enumerate() {
        let local = t + offset;
        if let Some((a, b)) = window {
            let tod = local.time().with_nanosecond(0).unwrap_or(local.time());
            if tod < a || tod > b {
                report.outside_window += 1;
                continue;
            }
        }
        let mut ok = true;
        for (l, slot) in lag_rows.iter_mut().enumerate() {
            match index.get(&(t - cadence * (cfg.horizon + l) as i32)) {
                Some(&i) => *slot = i,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            report.missing_lags += 1;
            continue;
        }
        timestamps.push(t);
        xs.push(time_index(local));
        for site in 0..p {
            for &lr in &lag_rows {
                xs.push(raw.values.get(lr, site));
            }
        }
        ys.extend_from_slice(raw.values.row(r));
    }
    let n = timestamps.len();
    if n == 0 {
        return Err(GgpError::EmptyAfterFilter);
    }
    report.usable = n;
    let mut x = Mat::from_vec(n, d, xs)?;
    let mut y = Mat::from_vec(n, p, ys)?;
    let norm = match norm {
        Some(ns) => {
            if ns.x.len() != d || ns.y.len() != p {
                return Err(GgpError::DimensionMismatch {
                    expected: ns.x.len() + ns.y.len(),
                    got: d + p,
                });
            }
            ns.clone()
        }
        None => {
            fn col(m: &Mat<f64>, c: usize) -> impl Iterator<Item = f64> + Clone + '_ {
                (0..m.rows()).map(move |r| m.get(r, c))
            }
            let mut xn = vec![ColumnNorm::IDENTITY];
            for site in 0..p {
                for l in 0..cfg.lags {
                    let c = 1 + site * cfg.lags + l;
                    xn.push(ColumnNorm::fit(
                        col(&x, c),
                        &format!("{}[lag {l}]", raw.site_ids[site]),
                    ));
                }
            }
            let yn = (0..p)
                .map(|i| ColumnNorm::fit(col(&y, i), &raw.site_ids[i]))
                .collect();
            NormState { x: xn, y: yn }
        }
    };
    x = Mat::from_fn(n, d, |r, c| {
        let cn = norm.x[c];
        if cn.normalized {
            cn.forward(x.get(r, c))
        } else {
            x.get(r, c)
        }
    });
    y = Mat::from_fn(n, p, |r, i| norm.y[i].forward(y.get(r, i)));
    Ok(Dataset {
        site_ids: raw.site_ids.clone(),
        raw,
        timestamps,
        x,
        y,
        norm,
        report,
        horizon: cfg.horizon,
        lags: cfg.lags,
        cadence,
    })
}

/// Site coordinates from `site,x,y` (extra columns are further
/// dimensions). Rows are matched to `site_ids` by name.
pub fn read_sites(path: &Path, site_ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let schema = |reason: String| GgpError::SchemaError {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut by_name: HashMap<String, Vec<f64>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or_default().to_string();
        let coords = rec
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| schema(format!("bad coordinate {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        by_name.insert(name, coords);
    }
    site_ids
        .iter()
        .map(|s| {
            by_name
                .get(s)
                .cloned()
                .ok_or_else(|| schema(format!("no coordinates for site {s}")))
        })
        .collect()
}

pub fn write_sites(path: &Path, site_ids: &[String], coords: &[Vec<f64>]) -> Result<()> {
    let dims = coords.first().map_or(0, |c| c.len());
    let mut s = String::from("site");
    for k in 0..dims {
        s.push_str(&format!(",c{}", k + 1));
    }
    s.push('\n');
    for (id, c) in site_ids.iter().zip(coords) {
        s.push_str(id);
        for v in c {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(cells: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,site_1,site_2").unwrap();
        for (i, c) in cells.iter().enumerate() {
            writeln!(f, "2021-03-01T10:{:02}:00,{c}", i * 5).unwrap();
        }
        f
    }

    fn cfg(horizon: usize) -> DataConfig {
        DataConfig {
            horizon,
            lags: 2,
            ..DataConfig::default()
        }
    }

    #[test]
    fn toy_counts() {
        let cells: Vec<String> = (0..10).map(|i| format!("{},{}", i, 2 * i + 1)).collect();
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        let f = toy(&refs);
        let ds = ingest_csv(f.path(), &cfg(1), None).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.x.cols(), 5);
        assert_eq!(ds.cadence, Duration::minutes(5));
        // first usable target is row 2; its lags are rows 1 and 0
        let raw = ds.raw_x();
        assert_relative_eq!(raw.get(0, 1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(raw.get(0, 2), 0.0, epsilon = 1e-12);
        assert_relative_eq!(raw.get(0, 3), 3.0, epsilon = 1e-12);
        assert_relative_eq!(ds.raw_y().get(0, 1), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_cell_drops_row() {
        let cells: Vec<String> = (0..10)
            .map(|i| {
                if i == 9 {
                    "1,".to_string()
                } else {
                    format!("{i},{i}")
                }
            })
            .collect();
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        let f = toy(&refs);
        let ds = ingest_csv(f.path(), &cfg(1), None).unwrap();
        assert_eq!(ds.report.dropped_missing, 1);
        assert_eq!(ds.len(), 7);
    }

    #[test]
    fn constant_column_has_unit_scale() {
        let cells: Vec<String> = (0..10).map(|i| format!("{i},4")).collect();
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        let f = toy(&refs);
        let ds = ingest_csv(f.path(), &cfg(1), None).unwrap();
        assert_eq!(ds.norm.y[1].scale, 1.0);
        assert!(ds.y.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn schema_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "time,a\n2021-01-01T00:00:00,1").unwrap();
        assert!(matches!(
            ingest_csv(f.path(), &cfg(1), None),
            Err(GgpError::SchemaError { .. })
        ));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "timestamp,a\n2021-01-01T10:05:00,1\n2021-01-01T10:00:00,2"
        )
        .unwrap();
        assert!(matches!(
            ingest_csv(f.path(), &cfg(1), None),
            Err(GgpError::NonMonotoneTime { row: 2 })
        ));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "timestamp,a\n2021-01-01T01:00:00,1\n2021-01-01T01:05:00,2"
        )
        .unwrap();
        assert!(matches!(
            ingest_csv(f.path(), &cfg(1), None),
            Err(GgpError::EmptyAfterFilter)
        ));
    }

    #[test]
    fn day_window_uses_offset() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,a").unwrap();
        for i in 0..24 {
            writeln!(f, "2021-01-01T{i:02}:00:00,{i}").unwrap();
        }
        let c = DataConfig {
            horizon: 1,
            lags: 1,
            ..DataConfig::default()
        };
        let ds = ingest_csv(f.path(), &c, None).unwrap();
        assert_eq!(ds.len(), 13);
        let shifted = DataConfig {
            tz_offset_minutes: 600,
            ..c
        };
        let ds2 = ingest_csv(f.path(), &shifted, None).unwrap();
        assert_eq!(ds2.timestamps[0].time().hour(), 1);
    }

    #[test]
    fn write_and_reingest() {
        let cells: Vec<String> = (0..10)
            .map(|i| format!("{}.25,{}", i, 0.1 * i as f64))
            .collect();
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        let f = toy(&refs);
        let ds = ingest_csv(f.path(), &cfg(1), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("again.csv");
        write_raw(&ds.raw, &out).unwrap();
        let again = ingest_csv(&out, &cfg(1), None).unwrap();
        assert_eq!(again.x, ds.x);
        assert_eq!(again.y, ds.y);
    }
}
