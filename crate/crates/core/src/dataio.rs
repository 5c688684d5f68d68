//! Reading irregularly sampled measurements and gridded tables.
//!
//! Long curve files have one row per measurement (`unit,time,value`) where
//! `time` is a clock time within the day, either `HH:MM`, `HH:MM:SS` or a
//! decimal number of hours in `[0, 24)`. Each unit (typically a date) is
//! interpolated onto the shared grid by a natural cubic spline.
//!
//! Wide files hold pre-gridded data, one row per observation:
//! an optional `unit` column, an optional `y` column, then `x_1..x_p`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid, GridSpec};

/// Parse errors listed in a single diagnostic before truncating.
const MAX_REPORTED_ROWS: usize = 10;

/// Measurements of one unit, times already mapped onto the grid interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub unit_id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseTransform {
    /// Exactly one response per unit, used as is.
    #[default]
    Identity,
    /// Average of the unit's responses.
    Mean,
    /// Natural log of the unit's average response.
    Log,
}

impl std::str::FromStr for ResponseTransform {
    type Err = AatrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ResponseTransform::Identity),
            "mean" => Ok(ResponseTransform::Mean),
            "log" => Ok(ResponseTransform::Log),
            other => Err(AatrError::invalid(format!(
                "unknown response transform '{other}' (expected identity, mean or log)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    /// A `unit,response` file.
    File(PathBuf),
    /// An extra column of the curve file, collected per unit.
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub curve_file: PathBuf,
    pub responses: ResponseSource,
    pub grid: GridSpec,
    pub min_points_per_unit: usize,
    pub response_transform: ResponseTransform,
    /// Drop units whose measured values have a sample variance below this.
    pub min_variance: Option<f64>,
}

impl DatasetSpec {
    pub fn new(curve_file: impl Into<PathBuf>, responses: ResponseSource, grid: GridSpec) -> Self {
        DatasetSpec {
            curve_file: curve_file.into(),
            responses,
            grid,
            min_points_per_unit: 4,
            response_transform: ResponseTransform::Identity,
            min_variance: None,
        }
    }

    pub fn validate(&self) -> Result<Grid> {
        if self.grid.p < 10 {
            return Err(AatrError::invalid(format!("dataset grid needs p >= 10, got {}", self.grid.p)));
        }
        if self.min_points_per_unit < 4 {
            return Err(AatrError::invalid("min_points_per_unit must be at least 4"));
        }
        Grid::try_from(self.grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub unit_id: String,
    pub reason: String,
}

/// Result of reading a long curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongData {
    /// Retained units, sorted by id.
    pub series: Vec<RawSeries>,
    pub excluded: Vec<Exclusion>,
    /// Per-unit values of the response column, when one was requested.
    pub responses: BTreeMap<String, Vec<f64>>,
}

impl LongData {
    pub fn units_in(&self) -> usize {
        self.series.len() + self.excluded.len()
    }
}

/// Hours since midnight from `HH:MM`, `HH:MM:SS` or a decimal hour.
pub fn parse_clock(s: &str) -> Option<f64> {
    let s = s.trim();
    let hours = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() > 3 {
            return None;
        }
        let h: u32 = parts[0].parse().ok()?;
        let m: u32 = parts[1].parse().ok()?;
        let sec: f64 = match parts.get(2) {
            Some(p) => p.parse().ok()?,
            None => 0.0,
        };
        if m >= 60 || !(0.0..60.0).contains(&sec) {
            return None;
        }
        h as f64 + m as f64 / 60.0 + sec / 3600.0
    } else {
        s.parse().ok()?
    };
    (0.0..24.0).contains(&hours).then_some(hours)
}

/// Map `[00:00, 24:00)` linearly onto `[a, b)`.
pub fn clock_to_grid(hours: f64, grid: &Grid) -> f64 {
    grid.a() + grid.length() * hours / 24.0
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| AatrError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        AatrError::data(format!("{}: missing column '{name}'", path.display()))
    })
}

fn row_errors(path: &Path, errors: &[String]) -> AatrError {
    let mut msg = format!("{}: {} unparseable row(s)", path.display(), errors.len());
    for e in errors.iter().take(MAX_REPORTED_ROWS) {
        msg.push_str("\n  ");
        msg.push_str(e);
    }
    if errors.len() > MAX_REPORTED_ROWS {
        msg.push_str(&format!("\n  ... and {} more", errors.len() - MAX_REPORTED_ROWS));
    }
    AatrError::data(msg)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Read a long `unit,time,value` file, grouping and sorting rows per unit.
pub fn load_long_csv(path: impl AsRef<Path>, spec: &DatasetSpec) -> Result<LongData> {
    let path = path.as_ref();
    let grid = spec.validate()?;
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let (ui, ti, vi) = (
        column(&headers, "unit", path)?,
        column(&headers, "time", path)?,
        column(&headers, "value", path)?,
    );
    let ri = match &spec.responses {
        ResponseSource::Column(name) => Some(column(&headers, name, path)?),
        ResponseSource::File(_) => None,
    };

    let mut rows: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut responses: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        let line = line_of(&rec);
        let unit = rec.get(ui).unwrap_or("");
        let time = rec.get(ti).and_then(parse_clock);
        let value = rec.get(vi).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite());
        let (Some(time), Some(value)) = (time, value) else {
            errors.push(format!("line {line}: cannot parse time/value in {:?}", rec.iter().collect::<Vec<_>>()));
            continue;
        };
        if unit.is_empty() {
            errors.push(format!("line {line}: empty unit"));
            continue;
        }
        if let Some(ri) = ri {
            match rec.get(ri).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite()) {
                Some(r) => responses.entry(unit.to_string()).or_default().push(r),
                None => {
                    errors.push(format!("line {line}: cannot parse response"));
                    continue;
                }
            }
        }
        rows.entry(unit.to_string()).or_default().push((time, value));
    }
    if !errors.is_empty() {
        return Err(row_errors(path, &errors));
    }

    let mut series = Vec::new();
    let mut excluded = Vec::new();
    for (unit, mut pts) in rows {
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(AatrError::data(format!(
                "{}: unit '{unit}' has duplicate timestamp {} h",
                path.display(),
                w[0].0
            )));
        }
        if pts.len() < spec.min_points_per_unit {
            excluded.push(Exclusion {
                reason: format!("{} point(s), need {}", pts.len(), spec.min_points_per_unit),
                unit_id: unit,
            });
            continue;
        }
        let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if let Some(min_var) = spec.min_variance {
            let var = sample_variance(&values);
            if var < min_var {
                excluded.push(Exclusion {
                    reason: format!("variance {var:.3e} below {min_var:.3e}"),
                    unit_id: unit,
                });
                continue;
            }
        }
        series.push(RawSeries {
            unit_id: unit,
            times: pts.iter().map(|p| clock_to_grid(p.0, &grid)).collect(),
            values,
        });
    }
    if series.is_empty() {
        return Err(AatrError::data(format!(
            "{}: no unit left after filtering ({} excluded)",
            path.display(),
            excluded.len()
        )));
    }
    Ok(LongData {
        series,
        excluded,
        responses,
    })
}

/// Read a `unit,response` file; a unit may appear on several rows.
pub fn load_responses_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let (ui, ri) = (column(&headers, "unit", path)?, column(&headers, "response", path)?);
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        match (rec.get(ui).filter(|u| !u.is_empty()), rec.get(ri).and_then(|v| v.parse::<f64>().ok())) {
            (Some(u), Some(r)) if r.is_finite() => out.entry(u.to_string()).or_default().push(r),
            _ => errors.push(format!("line {}: cannot parse unit/response", line_of(&rec))),
        }
    }
    if !errors.is_empty() {
        return Err(row_errors(path, &errors));
    }
    Ok(out)
}

/// Second derivatives of the natural cubic spline through `(x, y)`.
fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    let mut upper = vec![0.0; k];
    for i in 0..k {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
    }
    for i in 1..k {
        let lower = x[i + 1] - x[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (0..k).rev() {
        let next = if i + 1 < k { m[i + 2] } else { 0.0 };
        m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

/// Interpolate a unit onto the grid midpoints with a natural cubic spline,
/// holding the end values constant outside the observed range.
pub fn resample_to_grid(series: &RawSeries, grid: &Grid) -> Result<Vec<f64>> {
    let (x, y) = (&series.times, &series.values);
    if x.len() != y.len() {
        return Err(AatrError::DimensionMismatch {
            what: "series values",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(AatrError::data(format!(
            "unit '{}' has {} point(s), need at least 4",
            series.unit_id,
            x.len()
        )));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AatrError::data(format!(
            "unit '{}' needs strictly increasing finite times and finite values",
            series.unit_id
        )));
    }
    let span = x[x.len() - 1] - x[0];
    if span < 0.6 * grid.length() {
        return Err(AatrError::data(format!(
            "unit '{}' spans {:.1}% of the interval, need at least 60%",
            series.unit_id,
            100.0 * span / grid.length()
        )));
    }
    let m = natural_spline_moments(x, y);
    let last = x.len() - 1;
    Ok(grid
        .points()
        .iter()
        .map(|&t| {
            if t <= x[0] {
                return y[0];
            }
            if t >= x[last] {
                return y[last];
            }
            let i = x.partition_point(|&v| v <= t) - 1;
            let h = x[i + 1] - x[i];
            let (a, b) = ((x[i + 1] - t) / h, (t - x[i]) / h);
            a * y[i] + b * y[i + 1] + ((a.powi(3) - a) * m[i] + (b.powi(3) - b) * m[i + 1]) * h * h / 6.0
        })
        .collect())
}

/// Reduce a unit's response rows to one value.
pub fn apply_transform(unit: &str, values: &[f64], transform: ResponseTransform) -> Result<f64> {
    if values.is_empty() {
        return Err(AatrError::data(format!("unit '{unit}' has no response")));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    match transform {
        ResponseTransform::Identity => {
            if values.len() != 1 {
                return Err(AatrError::data(format!(
                    "unit '{unit}' has {} responses; use the mean or log transform to aggregate",
                    values.len()
                )));
            }
            Ok(values[0])
        }
        ResponseTransform::Mean => Ok(mean),
        ResponseTransform::Log => {
            if !(mean > 0.0) {
                return Err(AatrError::data(format!(
                    "unit '{unit}': log transform needs a positive response, got {mean}"
                )));
            }
            Ok(mean.ln())
        }
    }
}

/// Resample each unit and pair it with its response. Rows follow the
/// lexicographic order of unit ids, which is returned alongside.
pub fn build_dataset(
    series: &[RawSeries],
    responses: &BTreeMap<String, Vec<f64>>,
    grid: &Grid,
    transform: ResponseTransform,
) -> Result<(FunctionalDataset, Vec<String>)> {
    let mut ordered: Vec<&RawSeries> = series.iter().collect();
    ordered.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
    if let Some(w) = ordered.windows(2).find(|w| w[0].unit_id == w[1].unit_id) {
        return Err(AatrError::data(format!("unit '{}' appears twice", w[0].unit_id)));
    }
    let missing: Vec<&str> = ordered
        .iter()
        .map(|s| s.unit_id.as_str())
        .filter(|u| !responses.contains_key(*u))
        .collect();
    let extra: Vec<&str> = responses
        .keys()
        .map(String::as_str)
        .filter(|u| ordered.binary_search_by(|s| s.unit_id.as_str().cmp(u)).is_err())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(AatrError::data(format!(
            "unit mismatch between curves and responses (no response: {missing:?}; no curve: {extra:?})"
        )));
    }
    let n = ordered.len();
    let mut x = DMatrix::zeros(n, grid.p());
    let mut y = DVector::zeros(n);
    for (i, s) in ordered.iter().enumerate() {
        let row = resample_to_grid(s, grid)?;
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = apply_transform(&s.unit_id, &responses[&s.unit_id], transform)?;
    }
    let units = ordered.iter().map(|s| s.unit_id.clone()).collect();
    Ok((FunctionalDataset::new(grid.clone(), x, y)?, units))
}

/// A dataset assembled from a [`DatasetSpec`].
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: FunctionalDataset,
    pub units: Vec<String>,
    pub excluded: Vec<Exclusion>,
}

/// Load curves and responses described by `spec`. Responses of units that
/// were dropped by the curve filters are discarded; any other unit mismatch
/// is an error.
pub fn load_dataset(spec: &DatasetSpec) -> Result<LoadedDataset> {
    let grid = spec.validate()?;
    let long = load_long_csv(&spec.curve_file, spec)?;
    let mut responses = match &spec.responses {
        ResponseSource::File(p) => load_responses_csv(p)?,
        ResponseSource::Column(_) => long.responses.clone(),
    };
    for ex in &long.excluded {
        responses.remove(&ex.unit_id);
    }
    let (dataset, units) = build_dataset(&long.series, &responses, &grid, spec.response_transform)?;
    Ok(LoadedDataset {
        dataset,
        units,
        excluded: long.excluded,
    })
}

/// Contents of a wide gridded file.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub units: Option<Vec<String>>,
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
}

impl WideTable {
    /// Unit labels, defaulting to 1-based row numbers.
    pub fn unit_labels(&self) -> Vec<String> {
        self.units
            .clone()
            .unwrap_or_else(|| (1..=self.x.nrows()).map(|i| i.to_string()).collect())
    }
}

/// Read a wide file with columns `[unit,][y,]x_1..x_p`. A file with a header
/// and no rows gives a `0 × p` table.
pub fn read_wide_csv(path: impl AsRef<Path>) -> Result<WideTable> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let unit_col = headers.iter().position(|h| h == "unit");
    let y_col = headers.iter().position(|h| h == "y");
    let mut x_cols = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if Some(c) == unit_col || Some(c) == y_col {
            continue;
        }
        let expected = format!("x_{}", x_cols.len() + 1);
        if h != expected {
            return Err(AatrError::data(format!(
                "{}: column {} is '{h}', expected '{expected}'",
                path.display(),
                c + 1
            )));
        }
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(AatrError::data(format!("{}: no x_1..x_p columns", path.display())));
    }

    let mut units = Vec::new();
    let mut ys = Vec::new();
    let mut data = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        let parse = |c: usize| rec.get(c).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite());
        let row: Option<Vec<f64>> = x_cols.iter().map(|&c| parse(c)).collect();
        let y = y_col.map(parse);
        match (row, y) {
            (Some(row), None) | (Some(row), Some(Some(_))) => {
                data.extend(row);
                if let Some(Some(y)) = y {
                    ys.push(y);
                }
                if let Some(uc) = unit_col {
                    units.push(rec.get(uc).unwrap_or("").to_string());
                }
            }
            _ => errors.push(format!("line {}: non-numeric or non-finite value", line_of(&rec))),
        }
    }
    if !errors.is_empty() {
        return Err(row_errors(path, &errors));
    }
    let p = x_cols.len();
    let n = data.len() / p;
    Ok(WideTable {
        units: unit_col.map(|_| units),
        x: DMatrix::from_row_slice(n, p, &data),
        y: y_col.map(|_| DVector::from_vec(ys)),
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| AatrError::io(path, e))
}

/// Write a wide file. Floats use the shortest representation that parses
/// back to the same value.
pub fn write_wide_csv(
    path: impl AsRef<Path>,
    units: Option<&[String]>,
    x: &DMatrix<f64>,
    y: Option<&DVector<f64>>,
) -> Result<()> {
    let path = path.as_ref();
    let n = x.nrows();
    if let Some(u) = units {
        if u.len() != n {
            return Err(AatrError::DimensionMismatch { what: "unit labels", expected: n, actual: u.len() });
        }
    }
    if let Some(y) = y {
        if y.len() != n {
            return Err(AatrError::DimensionMismatch { what: "responses", expected: n, actual: y.len() });
        }
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = Vec::new();
    if units.is_some() {
        header.push("unit".into());
    }
    if y.is_some() {
        header.push("y".into());
    }
    header.extend((1..=x.ncols()).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..n {
        rec.clear();
        if let Some(u) = units {
            rec.push(u[i].clone());
        }
        if let Some(y) = y {
            rec.push(y[i].to_string());
        }
        rec.extend(x.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| AatrError::io(path, e))
}

/// Write a CSV with a header and numeric columns of equal length.
pub fn write_columns(path: impl AsRef<Path>, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let path = path.as_ref();
    let n = columns.first().map_or(0, |c| c.len());
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(AatrError::invalid("column names and lengths must agree"));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(names)?;
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush().map_err(|e| AatrError::io(path, e))
}

/// Write `unit,prediction` rows.
pub fn write_predictions(path: impl AsRef<Path>, units: &[String], pred: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if units.len() != pred.len() {
        return Err(AatrError::DimensionMismatch { what: "unit labels", expected: pred.len(), actual: units.len() });
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["unit", "prediction"])?;
    for (u, p) in units.iter().zip(pred) {
        w.write_record([u.as_str(), &p.to_string()])?;
    }
    w.flush().map_err(|e| AatrError::io(path, e))
}

/// Read `unit,prediction` rows.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let mut rdr = open(path)?;
    let headers = rdr.headers()?.clone();
    let (ui, pi) = (column(&headers, "unit", path)?, column(&headers, "prediction", path)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let p = rec.get(pi).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
            AatrError::data(format!("{}: line {}: bad prediction", path.display(), line_of(&rec)))
        })?;
        out.push((rec.get(ui).unwrap_or("").to_string(), p));
    }
    Ok(out)
}

/// Write a plain text file, mapping failures to an error naming the path.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| AatrError::io(path, e))
}
