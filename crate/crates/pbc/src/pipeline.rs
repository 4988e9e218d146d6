//! Data preparation for time-series experiments: CSV ingestion, lag and
//! rolling-statistic feature construction, unit-interval normalization,
//! contiguous temporal splitting, and batch formation for streaming.
//!
//! Every feature built for time `t` is a function of values strictly before
//! `t`, so targets never leak into their own feature rows.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledPoint};
use crate::ensemble::Batch;
use crate::error::{Error, Result};

/// A univariate series with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    series_id: String,
    timestamps: Vec<DateTime<Utc>>,
    values: Vec<f64>,
}

impl SeriesFrame {
    pub fn new(
        series_id: impl Into<String>,
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let series_id = series_id.into();
        if timestamps.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "series '{series_id}' has {} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("series '{series_id}' is empty")));
        }
        if let Some(i) = (1..timestamps.len()).find(|&i| timestamps[i] <= timestamps[i - 1]) {
            return Err(Error::InvalidInput(format!(
                "series '{series_id}' timestamps not strictly increasing at position {i}"
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "series '{series_id}' has non-finite value {v} at position {i}"
            )));
        }
        Ok(Self {
            series_id,
            timestamps,
            values,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Rolling statistics computable over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollingStat {
    Mean,
    Std,
}

/// Which lagged values and trailing-window statistics become features.
///
/// For a row with target `value(t)`, the features are
/// `value(t - lag)` for each lag, then for each window `w` (outer) and each
/// statistic (inner) the statistic over `value(t-w) ..= value(t-1)`. The
/// window always excludes `t` itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub lags: Vec<usize>,
    pub rolling_windows: Vec<usize>,
    pub rolling_stats: Vec<RollingStat>,
}

impl Default for FeatureSpec {
    /// Lags 1, 2, 3, 7 and 7/28-step trailing mean and std.
    fn default() -> Self {
        Self {
            lags: vec![1, 2, 3, 7],
            rolling_windows: vec![7, 28],
            rolling_stats: vec![RollingStat::Mean, RollingStat::Std],
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lags.is_empty() || self.rolling_windows.is_empty() || self.rolling_stats.is_empty()
        {
            return Err(Error::InvalidInput(
                "lags, rolling_windows, and rolling_stats must be nonempty".into(),
            ));
        }
        if self.lags.contains(&0) || self.rolling_windows.contains(&0) {
            return Err(Error::InvalidInput(
                "lags and rolling windows must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of leading observations consumed before the first feature row.
    pub fn warmup(&self) -> usize {
        self.lags
            .iter()
            .chain(&self.rolling_windows)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn feature_count(&self) -> usize {
        self.lags.len() + self.rolling_windows.len() * self.rolling_stats.len()
    }
}

/// Training-split value range used to map a series onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: f64,
    pub max: f64,
}

impl NormalizationParams {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || max <= min {
            return Err(Error::DegenerateRange(format!(
                "normalization needs max > min, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    /// `(v - min) / (max - min)`; values outside the recorded range map
    /// outside `[0, 1]`, which is expected on validation and test data.
    pub fn apply(&self, value: f64) -> f64 {
        (value - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, normalized: f64) -> f64 {
        normalized * (self.max - self.min) + self.min
    }
}

/// Fits normalization bounds on `values` (the training range only).
pub fn fit_normalization(values: &[f64]) -> Result<NormalizationParams> {
    if values.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit normalization on an empty slice".into(),
        ));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    NormalizationParams::new(min, max)
}

/// Normalizes a series onto `[0, 1]` using its own range, returning the
/// transformed series and the parameters for reuse on held-out data.
pub fn normalize_unit_interval(series: &SeriesFrame) -> Result<(SeriesFrame, NormalizationParams)> {
    let params = fit_normalization(series.values())?;
    Ok((apply_normalization(series, &params)?, params))
}

/// Applies previously fitted bounds to any series.
pub fn apply_normalization(
    series: &SeriesFrame,
    params: &NormalizationParams,
) -> Result<SeriesFrame> {
    SeriesFrame::new(
        series.series_id().to_string(),
        series.timestamps().to_vec(),
        series.values().iter().map(|&v| params.apply(v)).collect(),
    )
}

/// Builds one feature row per time index from `warmup` onward; the row for
/// time `t` holds the configured lags and trailing-window statistics, with
/// `value(t)` as the target. Output row count is `series length - warmup`.
pub fn build_features(series: &SeriesFrame, spec: &FeatureSpec) -> Result<Dataset> {
    spec.validate()?;
    let warmup = spec.warmup();
    let n = series.len();
    if warmup >= n {
        return Err(Error::InvalidInput(format!(
            "series of length {n} is too short for a warmup of {warmup}"
        )));
    }
    let values = series.values();
    let mut points = Vec::with_capacity(n - warmup);
    for t in warmup..n {
        let mut features = Vec::with_capacity(spec.feature_count());
        for &lag in &spec.lags {
            features.push(values[t - lag]);
        }
        for &window in &spec.rolling_windows {
            let slice = &values[t - window..t];
            for stat in &spec.rolling_stats {
                features.push(match stat {
                    RollingStat::Mean => mean(slice),
                    RollingStat::Std => population_std(slice),
                });
            }
        }
        points.push(LabeledPoint::new(features, values[t])?);
    }
    Dataset::new(points, spec.feature_count())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by the window length).
fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Splits chronologically ordered rows into contiguous train, validation,
/// and test parts of sizes `floor(f1 * n)`, `floor(f2 * n)`, and the rest.
pub fn temporal_split(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
) -> Result<(Dataset, Dataset, Dataset)> {
    let (f_train, f_val, f_test) = fractions;
    if !(f_train > 0.0 && f_val > 0.0 && f_test > 0.0)
        || (f_train + f_val + f_test - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput(format!(
            "split fractions must be positive and sum to 1, got ({f_train}, {f_val}, {f_test})"
        )));
    }
    let n = dataset.len();
    let n_train = (f_train * n as f64).floor() as usize;
    let n_val = (f_val * n as f64).floor() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidInput(format!(
            "split sizes ({n_train}, {n_val}, {n_test}) of {n} rows: every split must be nonempty"
        )));
    }
    let points = dataset.points();
    let dimension = dataset.dimension();
    Ok((
        Dataset::new(points[..n_train].to_vec(), dimension)?,
        Dataset::new(points[n_train..n_train + n_val].to_vec(), dimension)?,
        Dataset::new(points[n_train + n_val..].to_vec(), dimension)?,
    ))
}

/// Cuts the rows into consecutive batches of `batch_size`; the final batch
/// keeps whatever remains.
pub fn make_batches(dataset: &Dataset, batch_size: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be at least 1".into()));
    }
    dataset
        .points()
        .chunks(batch_size)
        .map(|chunk| Batch::new(chunk.to_vec()))
        .collect()
}

/// Parses an ISO-8601 timestamp; date-only strings are taken as midnight UTC.
pub fn parse_timestamp(text: &str) -> Result<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.with_timezone(&Utc));
    }
    if let Ok(ndt) = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S") {
        return Ok(Utc.from_utc_datetime(&ndt));
    }
    if let Ok(ndt) = NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S") {
        return Ok(Utc.from_utc_datetime(&ndt));
    }
    if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
        return Ok(Utc.from_utc_datetime(&midnight));
    }
    Err(Error::Parse(format!("cannot parse timestamp '{text}'")))
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("{}: missing column '{name}'", path.display())))
}

/// Loads series from a long-format CSV with columns
/// `series_id,timestamp,value`, grouping rows by id in order of first
/// appearance. Row numbers in errors count data rows from 1 (header
/// excluded). Each series' timestamps must be strictly increasing.
pub fn load_series_csv(path: &Path) -> Result<Vec<SeriesFrame>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let id_col = column_index(&headers, "series_id", path)?;
    let ts_col = column_index(&headers, "timestamp", path)?;
    let value_col = column_index(&headers, "value", path)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<DateTime<Utc>>, Vec<f64>)> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let field = |col: usize| -> Result<&str> {
            record
                .get(col)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing field")))
        };
        let id = field(id_col)?.to_string();
        let timestamp = parse_timestamp(field(ts_col)?)
            .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let value: f64 = field(value_col)?
            .parse()
            .map_err(|_| Error::Parse(format!(
                "row {row}: cannot parse value '{}' as a number",
                field(value_col).unwrap_or("")
            )))?;

        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (Vec::new(), Vec::new())
        });
        if let Some(&last) = entry.0.last() {
            if timestamp <= last {
                return Err(Error::Parse(format!(
                    "row {row}: series '{id}' timestamps not strictly increasing"
                )));
            }
        }
        entry.0.push(timestamp);
        entry.1.push(value);
    }
    if order.is_empty() {
        return Err(Error::Parse(format!(
            "{}: file contains a header but no data rows",
            path.display()
        )));
    }
    order
        .into_iter()
        .map(|id| {
            let (timestamps, values) = groups.remove(&id).expect("grouped above");
            SeriesFrame::new(id, timestamps, values)
        })
        .collect()
}

/// Loads a wide-format CSV with columns `x1,...,xd,y` and an optional
/// trailing integer `label` column. Returns the dataset and, if present,
/// the per-row labels.
pub fn load_dataset_csv(path: &Path) -> Result<(Dataset, Option<Vec<usize>>)> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let y_col = column_index(&headers, "y", path)?;
    for (i, name) in headers.iter().take(y_col).enumerate() {
        let expected = format!("x{}", i + 1);
        if name != expected {
            return Err(Error::Parse(format!(
                "{}: expected column '{expected}' before 'y', found '{name}'",
                path.display()
            )));
        }
    }
    if y_col == 0 {
        return Err(Error::Parse(format!(
            "{}: no feature columns before 'y'",
            path.display()
        )));
    }
    let has_label = match headers.len() - y_col {
        1 => false,
        2 if headers.get(y_col + 1) == Some("label") => true,
        _ => {
            return Err(Error::Parse(format!(
                "{}: columns after 'y' must be nothing or a single 'label'",
                path.display()
            )))
        }
    };

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let number = |col: usize| -> Result<f64> {
            let text = record
                .get(col)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing field")))?;
            text.parse().map_err(|_| {
                Error::Parse(format!("row {row}: cannot parse '{text}' as a number"))
            })
        };
        let features: Vec<f64> = (0..y_col).map(number).collect::<Result<_>>()?;
        let target = number(y_col)?;
        points.push(
            LabeledPoint::new(features, target)
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))?,
        );
        if has_label {
            let text = record
                .get(y_col + 1)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing label")))?;
            let label: usize = text.parse().map_err(|_| {
                Error::Parse(format!("row {row}: cannot parse label '{text}'"))
            })?;
            labels.push(label);
        }
    }
    if points.is_empty() {
        return Err(Error::Parse(format!(
            "{}: file contains a header but no data rows",
            path.display()
        )));
    }
    Ok((
        Dataset::from_points(points)?,
        has_label.then_some(labels),
    ))
}

/// Writes a dataset in the wide format read by [`load_dataset_csv`].
pub fn save_dataset_csv(path: &Path, dataset: &Dataset, labels: Option<&[usize]>) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != dataset.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} rows",
                labels.len(),
                dataset.len()
            )));
        }
    }
    let mut writer = csv_writer(path)?;
    let mut header: Vec<String> = (1..=dataset.dimension()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if labels.is_some() {
        header.push("label".into());
    }
    write_record(&mut writer, &header, path)?;
    for (i, point) in dataset.points().iter().enumerate() {
        let mut record: Vec<String> = point.features().iter().map(|v| v.to_string()).collect();
        record.push(point.target().to_string());
        if let Some(labels) = labels {
            record.push(labels[i].to_string());
        }
        write_record(&mut writer, &record, path)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes a series in the long format read by [`load_series_csv`].
pub fn save_series_csv(path: &Path, series: &SeriesFrame) -> Result<()> {
    let mut writer = csv_writer(path)?;
    write_record(&mut writer, &["series_id", "timestamp", "value"], path)?;
    for (timestamp, value) in series.timestamps().iter().zip(series.values()) {
        write_record(
            &mut writer,
            &[
                series.series_id(),
                &timestamp.to_rfc3339(),
                &value.to_string(),
            ],
            path,
        )?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_record<W: std::io::Write, S: AsRef<[u8]>>(
    writer: &mut csv::Writer<W>,
    record: &[S],
    path: &Path,
) -> Result<()> {
    writer
        .write_record(record.iter().map(AsRef::as_ref))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    fn day(n: i64) -> DateTime<Utc> {
        let date = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(n);
        Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap())
    }

    fn series_of(values: &[f64]) -> SeriesFrame {
        let timestamps = (0..values.len() as i64).map(day).collect();
        SeriesFrame::new("s", timestamps, values.to_vec()).unwrap()
    }

    fn temp_csv(name: &str, contents: &str) -> PathBuf {
        let path = std::env::temp_dir().join(format!(
            "pbc-pipeline-{}-{name}.csv",
            std::process::id()
        ));
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn series_frame_validates_inputs() {
        assert!(SeriesFrame::new("s", vec![day(0)], vec![1.0, 2.0]).is_err());
        assert!(SeriesFrame::new("s", vec![], vec![]).is_err());
        assert!(SeriesFrame::new("s", vec![day(0), day(0)], vec![1.0, 2.0]).is_err());
        assert!(SeriesFrame::new("s", vec![day(1), day(0)], vec![1.0, 2.0]).is_err());
        assert!(SeriesFrame::new("s", vec![day(0)], vec![f64::NAN]).is_err());
    }

    #[test]
    fn load_series_csv_reads_three_rows() {
        let path = temp_csv(
            "three-rows",
            "series_id,timestamp,value\na,2020-01-01,1.5\na,2020-01-02,2.5\na,2020-01-03,3.5\n",
        );
        let series = load_series_csv(&path).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].len(), 3);
        assert_eq!(series[0].series_id(), "a");
        assert_eq!(series[0].values(), &[1.5, 2.5, 3.5]);
        assert_eq!(series[0].timestamps()[1], day(1));
    }

    #[test]
    fn load_series_csv_rejects_header_only_file() {
        let path = temp_csv("header-only", "series_id,timestamp,value\n");
        let err = load_series_csv(&path).unwrap_err().to_string();
        assert!(err.contains("no data rows"), "{err}");
    }

    #[test]
    fn load_series_csv_names_the_bad_row() {
        let mut contents = String::from("series_id,timestamp,value\n");
        for i in 0..6 {
            contents.push_str(&format!("a,2020-01-0{},{}\n", i + 1, i));
        }
        contents.push_str("a,2020-01-07,not-a-number\n");
        let path = temp_csv("bad-row", &contents);
        let err = load_series_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 7"), "{err}");
        assert!(err.contains("not-a-number"), "{err}");
    }

    #[test]
    fn load_series_csv_rejects_non_monotone_timestamps() {
        let path = temp_csv(
            "non-monotone",
            "series_id,timestamp,value\na,2020-01-02,1\na,2020-01-01,2\n",
        );
        let err = load_series_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("strictly increasing"), "{err}");
    }

    #[test]
    fn load_series_csv_rejects_missing_column() {
        let path = temp_csv("missing-col", "series_id,time,value\na,2020-01-01,1\n");
        let err = load_series_csv(&path).unwrap_err().to_string();
        assert!(err.contains("timestamp"), "{err}");
    }

    #[test]
    fn load_series_csv_groups_interleaved_series() {
        let path = temp_csv(
            "interleaved",
            "series_id,timestamp,value\nb,2020-01-01,1\na,2020-01-01,10\nb,2020-01-02,2\na,2020-01-02,20\n",
        );
        let series = load_series_csv(&path).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].series_id(), "b"); // first appearance order
        assert_eq!(series[0].values(), &[1.0, 2.0]);
        assert_eq!(series[1].series_id(), "a");
        assert_eq!(series[1].values(), &[10.0, 20.0]);
    }

    #[test]
    fn dataset_csv_round_trip_preserves_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<LabeledPoint> = (0..20)
            .map(|_| {
                LabeledPoint::new(
                    vec![rng.gen::<f64>() * 3.7 - 1.3, rng.gen::<f64>()],
                    rng.gen::<f64>() * 100.0,
                )
                .unwrap()
            })
            .collect();
        let dataset = Dataset::from_points(points).unwrap();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();

        let path = temp_csv("round-trip", "");
        save_dataset_csv(&path, &dataset, Some(&labels)).unwrap();
        let (reloaded, reloaded_labels) = load_dataset_csv(&path).unwrap();
        assert_eq!(reloaded, dataset);
        assert_eq!(reloaded_labels.unwrap(), labels);
    }

    #[test]
    fn dataset_csv_rejects_malformed_headers() {
        let path = temp_csv("no-y", "x1,x2\n1,2\n");
        assert!(load_dataset_csv(&path).is_err());
        let path = temp_csv("bad-x", "x1,z2,y\n1,2,3\n");
        assert!(load_dataset_csv(&path).is_err());
        let path = temp_csv("trailing", "x1,y,other\n1,2,3\n");
        assert!(load_dataset_csv(&path).is_err());
    }

    #[test]
    fn series_csv_round_trip() {
        let series = series_of(&[1.0, 2.5, -3.25, 4.0, 5.5, 6.0, 7.75, 8.0]);
        let path = temp_csv("series-round-trip", "");
        save_series_csv(&path, &series).unwrap();
        let reloaded = load_series_csv(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded[0], series);
    }

    #[test]
    fn build_features_direct_arithmetic() {
        // Series [1..5], lag 1 plus 2-step mean.
        let series = series_of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let spec = FeatureSpec {
            lags: vec![1],
            rolling_windows: vec![2],
            rolling_stats: vec![RollingStat::Mean],
        };
        let dataset = build_features(&series, &spec).unwrap();
        assert_eq!(dataset.len(), 3);
        let expected = [
            (vec![2.0, 1.5], 3.0),
            (vec![3.0, 2.5], 4.0),
            (vec![4.0, 3.5], 5.0),
        ];
        for (point, (features, target)) in dataset.points().iter().zip(&expected) {
            assert_eq!(point.features(), features.as_slice());
            assert_eq!(point.target(), *target);
        }
    }

    #[test]
    fn build_features_constant_series() {
        let series = series_of(&[4.5; 40]);
        let spec = FeatureSpec::default();
        let dataset = build_features(&series, &spec).unwrap();
        assert_eq!(dataset.len(), 40 - 28);
        for point in dataset.points() {
            assert_eq!(point.target(), 4.5);
            // Lags and means equal the constant; stds are zero.
            assert_eq!(point.features()[..4], [4.5; 4]);
            assert_eq!(point.features()[4], 4.5);
            assert_eq!(point.features()[5], 0.0);
            assert_eq!(point.features()[6], 4.5);
            assert_eq!(point.features()[7], 0.0);
        }
    }

    #[test]
    fn build_features_matches_recomputation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let values: Vec<f64> = (0..120).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let series = series_of(&values);
        let spec = FeatureSpec {
            lags: vec![2, 5],
            rolling_windows: vec![3, 9],
            rolling_stats: vec![RollingStat::Std, RollingStat::Mean],
        };
        let dataset = build_features(&series, &spec).unwrap();
        let warmup = 9;
        assert_eq!(dataset.len(), values.len() - warmup);

        for (row, point) in dataset.points().iter().enumerate() {
            let t = row + warmup;
            // Independent recomputation straight from the raw series.
            let mut expected = vec![values[t - 2], values[t - 5]];
            for w in [3usize, 9] {
                let mut total = 0.0;
                for back in 1..=w {
                    total += values[t - back];
                }
                let m = total / w as f64;
                let mut sq = 0.0;
                for back in 1..=w {
                    sq += (values[t - back] - m) * (values[t - back] - m);
                }
                expected.push((sq / w as f64).sqrt());
                expected.push(m);
            }
            assert_eq!(point.target(), values[t]);
            for (got, want) in point.features().iter().zip(&expected) {
                assert!((got - want).abs() < 1e-12, "row {row}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn build_features_never_reads_the_target_time() {
        let mut values: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin() * 4.0).collect();
        let spec = FeatureSpec::default();
        let base = build_features(&series_of(&values), &spec).unwrap();

        // Perturbing value(t) must leave row t's features untouched.
        let t = 45;
        values[t] += 10.0;
        let perturbed = build_features(&series_of(&values), &spec).unwrap();
        let row = t - spec.warmup();
        assert_eq!(
            base.points()[row].features(),
            perturbed.points()[row].features()
        );
        assert_ne!(base.points()[row].target(), perturbed.points()[row].target());
    }

    #[test]
    fn build_features_rejects_short_series() {
        let series = series_of(&[1.0, 2.0, 3.0]);
        assert!(build_features(&series, &FeatureSpec::default()).is_err());
        let spec = FeatureSpec {
            lags: vec![3],
            rolling_windows: vec![3],
            rolling_stats: vec![RollingStat::Mean],
        };
        // Warmup 3 on length 3: no rows left.
        assert!(build_features(&series, &spec).is_err());
    }

    #[test]
    fn feature_spec_validation() {
        let mut spec = FeatureSpec::default();
        spec.lags.clear();
        assert!(spec.validate().is_err());
        let mut spec = FeatureSpec::default();
        spec.rolling_windows.push(0);
        assert!(spec.validate().is_err());
        assert_eq!(FeatureSpec::default().warmup(), 28);
        assert_eq!(FeatureSpec::default().feature_count(), 8);
    }

    #[test]
    fn normalization_direct_and_round_trip() {
        let params = fit_normalization(&[0.0, 10.0]).unwrap();
        assert_eq!(params.min, 0.0);
        assert_eq!(params.max, 10.0);
        assert_eq!(params.apply(5.0), 0.5);
        // Out-of-range inputs extrapolate rather than clamp.
        assert!((params.apply(12.0) - 1.2).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = fit_normalization(&[-3.7, 12.9, 4.4]).unwrap();
        for _ in 0..100 {
            let v = rng.gen_range(-50.0..50.0);
            assert!((params.invert(params.apply(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_rejects_constant_training_values() {
        assert!(matches!(
            fit_normalization(&[2.0, 2.0, 2.0]),
            Err(Error::DegenerateRange(_))
        ));
        assert!(fit_normalization(&[]).is_err());
    }

    #[test]
    fn normalization_params_come_from_the_given_slice_only() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let train = &values[..80];
        let params = fit_normalization(train).unwrap();
        // Changing later values cannot change the fitted parameters.
        let mut altered = values.clone();
        for v in &mut altered[80..] {
            *v *= 100.0;
        }
        assert_eq!(params, fit_normalization(&altered[..80]).unwrap());
        assert_eq!(params.max, 79.0);
    }

    #[test]
    fn normalize_unit_interval_maps_series_to_unit_range() {
        let series = series_of(&[5.0, 10.0, 7.5, 15.0]);
        let (normalized, params) = normalize_unit_interval(&series).unwrap();
        assert_eq!(params.min, 5.0);
        assert_eq!(params.max, 15.0);
        assert_eq!(normalized.values(), &[0.0, 0.5, 0.25, 1.0]);
    }

    #[test]
    fn temporal_split_sizes_and_order() {
        let make = |n: usize| {
            let points = (0..n)
                .map(|i| LabeledPoint::new(vec![i as f64], i as f64).unwrap())
                .collect();
            Dataset::from_points(points).unwrap()
        };
        let (train, val, test) = temporal_split(&make(10), (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (8, 1, 1));

        let (train, val, test) = temporal_split(&make(100), (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));

        // Concatenation reproduces the input, and time order is preserved
        // across the boundary: every train target precedes every validation
        // target precedes every test target.
        let original = make(57);
        let (train, val, test) = temporal_split(&original, (0.8, 0.1, 0.1)).unwrap();
        let mut rebuilt = train.points().to_vec();
        rebuilt.extend_from_slice(val.points());
        rebuilt.extend_from_slice(test.points());
        assert_eq!(rebuilt, original.points());
        assert!(train.points().last().unwrap().target() < val.points()[0].target());
        assert!(val.points().last().unwrap().target() < test.points()[0].target());
    }

    #[test]
    fn temporal_split_rejects_empty_splits_and_bad_fractions() {
        let points = (0..5)
            .map(|i| LabeledPoint::new(vec![i as f64], 0.0).unwrap())
            .collect();
        let dataset = Dataset::from_points(points).unwrap();
        assert!(temporal_split(&dataset, (0.8, 0.1, 0.1)).is_err());
        assert!(temporal_split(&dataset, (0.5, 0.5, 0.5)).is_err());
        assert!(temporal_split(&dataset, (1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn make_batches_chunks_in_order() {
        let points: Vec<LabeledPoint> = (0..500)
            .map(|i| LabeledPoint::new(vec![i as f64], i as f64).unwrap())
            .collect();
        let dataset = Dataset::from_points(points).unwrap();
        let batches = make_batches(&dataset, 200).unwrap();
        let sizes: Vec<usize> = batches.iter().map(Batch::len).collect();
        assert_eq!(sizes, vec![200, 200, 100]);
        let rebuilt: Vec<LabeledPoint> = batches
            .iter()
            .flat_map(|b| b.points().iter().cloned())
            .collect();
        assert_eq!(rebuilt, dataset.points());

        let exact = Dataset::new(dataset.points()[..200].to_vec(), 1).unwrap();
        assert_eq!(make_batches(&exact, 200).unwrap().len(), 1);

        let single = Dataset::new(dataset.points()[..1].to_vec(), 1).unwrap();
        let batches = make_batches(&single, 200).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 1);

        assert!(make_batches(&dataset, 0).is_err());
    }

    #[test]
    fn parse_timestamp_accepts_common_forms() {
        assert_eq!(parse_timestamp("2020-01-02").unwrap(), day(1));
        assert_eq!(parse_timestamp("2020-01-02T00:00:00").unwrap(), day(1));
        assert_eq!(parse_timestamp("2020-01-02 00:00:00").unwrap(), day(1));
        assert_eq!(parse_timestamp("2020-01-02T00:00:00Z").unwrap(), day(1));
        assert_eq!(
            parse_timestamp("2020-01-02T01:00:00+01:00").unwrap(),
            day(1)
        );
        assert!(parse_timestamp("January 2nd").is_err());
    }
}
