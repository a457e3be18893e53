//! CSV formats and run configuration.
//!
//! Floats are written with 17 significant digits so every file round-trips
//! bit-exactly. Row and column numbers in parse errors are 1-based file
//! positions (the header is row 1).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::analysis::{Curve, DetectionRule, FluctuationSweep};
use crate::decision::{
    Bounds, DecisionConfig, Metrics, PatientOutcome, PatientRecord, DEFAULT_HORIZON,
    MIN_INDICATORS, MIN_TIME_POINTS,
};
use crate::error::{Result, StpcaError};
use crate::series::{EmbeddingConfig, SeriesMatrix};

/// `{:.16e}`: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| StpcaError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(StpcaError::from)
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map_or(fallback, |p| p.line() as usize)
}

fn parse_cell<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    row: usize,
    col: usize,
    what: &str,
) -> Result<T> {
    let cell = record.get(col).unwrap_or("");
    cell.parse().map_err(|_| StpcaError::Parse {
        path: path.to_path_buf(),
        row,
        column: col + 1,
        message: format!("expected {what}, found '{cell}'"),
    })
}

fn parse_f64(path: &Path, record: &csv::StringRecord, row: usize, col: usize) -> Result<f64> {
    let v: f64 = parse_cell(path, record, row, col, "a number")?;
    if !v.is_finite() {
        return Err(StpcaError::Parse {
            path: path.to_path_buf(),
            row,
            column: col + 1,
            message: format!("non-finite value '{}'", &record[col]),
        });
    }
    Ok(v)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| StpcaError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| StpcaError::io(path, e))
}

/// Wide format: header `var,t1,...,tm`, then one row per variable. Numeric
/// time labels that strictly increase become the time index.
pub fn load_series_csv(path: impl AsRef<Path>) -> Result<SeriesMatrix> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let Some((header, data)) = rows.split_first() else {
        return Err(StpcaError::InsufficientSamples { needed: 1, got: 0 });
    };
    if data.is_empty() {
        return Err(StpcaError::InsufficientSamples { needed: 1, got: 0 });
    }
    let m = header.len().saturating_sub(1);
    let mut names = Vec::with_capacity(data.len());
    let mut values = Vec::with_capacity(data.len() * m);
    for (i, rec) in data.iter().enumerate() {
        let row = line_of(rec, i + 2);
        if rec.len() != m + 1 {
            return Err(StpcaError::Shape(format!(
                "{}: row {row} has {} fields, header has {}",
                path.display(),
                rec.len(),
                m + 1
            )));
        }
        names.push(rec[0].to_string());
        for col in 1..=m {
            values.push(parse_f64(path, rec, row, col)?);
        }
    }
    let n = names.len();
    let series = SeriesMatrix::new(DMatrix::from_row_slice(n, m, &values))?.with_variable_names(names)?;
    let times: Option<Vec<f64>> = header.iter().skip(1).map(|h| h.parse().ok()).collect();
    match times {
        Some(t) if t.windows(2).all(|w| w[0] < w[1]) && t.iter().all(|v| v.is_finite()) => {
            series.with_time_index(t)
        }
        _ => Ok(series),
    }
}

pub fn write_series_csv(path: impl AsRef<Path>, x: &SeriesMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut header = vec!["var".to_string()];
    match x.time_index() {
        Some(t) => header.extend(t.iter().map(|&v| format_f64(v))),
        None => header.extend((1..=x.m()).map(|j| format!("t{j}"))),
    }
    w.write_record(&header)?;
    let values = x.values();
    for i in 0..x.n() {
        let name = x
            .variable_names()
            .map_or_else(|| format!("v{}", i + 1), |names| names[i].clone());
        let mut row = vec![name];
        row.extend(values.row(i).iter().map(|&v| format_f64(v)));
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Labeled matrix: `corner,col...` header, then `row_name,values...`.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    corner: &str,
    row_names: &[String],
    col_names: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let path = path.as_ref();
    if row_names.len() != values.nrows() || col_names.len() != values.ncols() {
        return Err(StpcaError::Shape(format!(
            "{}x{} labels for a {}x{} matrix",
            row_names.len(),
            col_names.len(),
            values.nrows(),
            values.ncols()
        )));
    }
    let mut w = create(path)?;
    let mut header = vec![corner.to_string()];
    header.extend(col_names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in row_names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(values.row(i).iter().map(|&v| format_f64(v)));
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Column table with a header; every data cell must be numeric.
pub fn write_columns_csv(path: impl AsRef<Path>, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let path = path.as_ref();
    let len = columns.first().map_or(0, |c| c.len());
    if header.len() != columns.len() || columns.iter().any(|c| c.len() != len) {
        return Err(StpcaError::Shape("column table is ragged".into()));
    }
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in 0..len {
        w.write_record(columns.iter().map(|c| format_f64(c[r])))?;
    }
    finish(w, path)
}

/// One point per row under a header naming the coordinates.
pub fn load_curve_csv(path: impl AsRef<Path>) -> Result<Curve> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let Some((header, data)) = rows.split_first() else {
        return Err(StpcaError::Shape(format!("{}: empty curve file", path.display())));
    };
    let d = header.len();
    let mut points = Vec::with_capacity(data.len());
    for (i, rec) in data.iter().enumerate() {
        let row = line_of(rec, i + 2);
        if rec.len() != d {
            return Err(StpcaError::Shape(format!(
                "{}: row {row} has {} fields, header has {d}",
                path.display(),
                rec.len()
            )));
        }
        points.push((0..d).map(|c| parse_f64(path, rec, row, c)).collect::<Result<Vec<_>>>()?);
    }
    Curve::new(points)
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &Curve) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record((1..=curve.dim()).map(|k| format!("c{k}")))?;
    for p in curve.points() {
        w.write_record(p.iter().map(|&v| format_f64(v)))?;
    }
    finish(w, path)
}

/// `position,fl`, one row per window.
pub fn write_sweep_csv(path: impl AsRef<Path>, sweep: &FluctuationSweep) -> Result<()> {
    write_columns_csv(path, &["position", "fl"], &[&sweep.positions, &sweep.fl])
}

/// Positions and `Fl^z` values of a sweep file.
pub fn load_sweep_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let Some((header, data)) = rows.split_first() else {
        return Err(StpcaError::InvalidData(format!("{}: empty sweep file", path.display())));
    };
    if header.len() != 2 || &header[0] != "position" || &header[1] != "fl" {
        return Err(StpcaError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: "expected header 'position,fl'".into(),
        });
    }
    let mut positions = Vec::with_capacity(data.len());
    let mut fl = Vec::with_capacity(data.len());
    for (i, rec) in data.iter().enumerate() {
        let row = line_of(rec, i + 2);
        if rec.len() != 2 {
            return Err(StpcaError::Shape(format!(
                "{}: row {row} has {} fields, expected 2",
                path.display(),
                rec.len()
            )));
        }
        positions.push(parse_f64(path, rec, row, 0)?);
        let v = parse_f64(path, rec, row, 1)?;
        if v < 0.0 {
            return Err(StpcaError::Parse {
                path: path.to_path_buf(),
                row,
                column: 2,
                message: format!("fluctuation must be non-negative, found {v}"),
            });
        }
        fl.push(v);
    }
    Ok((positions, fl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    MinTimePoints,
    MinIndicators,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DropReason::MinTimePoints => "min time points",
            DropReason::MinIndicators => "min indicators",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedSubject {
    pub subject_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientLoad {
    /// Retained subjects in ascending id order.
    pub records: Vec<PatientRecord>,
    pub dropped: Vec<DroppedSubject>,
}

type Observations = BTreeMap<String, BTreeMap<String, BTreeMap<i64, f64>>>;

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    for (c, want) in expected.iter().enumerate() {
        if header.get(c) != Some(*want) {
            return Err(StpcaError::Parse {
                path: path.to_path_buf(),
                row: 1,
                column: c + 1,
                message: format!("expected header '{}'", expected.join(",")),
            });
        }
    }
    Ok(())
}

fn data_rows<'a>(
    path: &Path,
    rows: &'a [csv::StringRecord],
    expected: &[&str],
) -> Result<Vec<(usize, &'a csv::StringRecord)>> {
    let Some((header, data)) = rows.split_first() else {
        return Err(StpcaError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: format!("missing header '{}'", expected.join(",")),
        });
    };
    check_header(path, header, expected)?;
    data.iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = line_of(rec, i + 2);
            if rec.len() != expected.len() {
                return Err(StpcaError::Shape(format!(
                    "{}: row {row} has {} fields, expected {}",
                    path.display(),
                    rec.len(),
                    expected.len()
                )));
            }
            Ok((row, rec))
        })
        .collect()
}

fn load_observations(path: &Path) -> Result<Observations> {
    let rows = read_rows(path)?;
    let mut obs: Observations = BTreeMap::new();
    for (row, rec) in data_rows(path, &rows, &["subject_id", "hour", "indicator", "value"])? {
        let subject = rec[0].to_string();
        let hour: i64 = parse_cell(path, rec, row, 1, "an integer hour")?;
        let indicator = rec[2].to_string();
        let value = parse_f64(path, rec, row, 3)?;
        let slot = obs
            .entry(subject.clone())
            .or_default()
            .entry(indicator.clone())
            .or_default();
        if slot.insert(hour, value).is_some() {
            return Err(StpcaError::DuplicateEntry {
                subject,
                hour,
                indicator,
            });
        }
    }
    Ok(obs)
}

fn load_bounds(path: &Path, known: &BTreeSet<&str>) -> Result<BTreeMap<String, Bounds>> {
    let rows = read_rows(path)?;
    let mut bounds = BTreeMap::new();
    for (row, rec) in data_rows(path, &rows, &["indicator", "lb", "ub"])? {
        let name = rec[0].to_string();
        if !known.contains(name.as_str()) {
            return Err(StpcaError::UnknownIndicator(name));
        }
        let lb = parse_f64(path, rec, row, 1)?;
        let ub = parse_f64(path, rec, row, 2)?;
        if lb > ub {
            return Err(StpcaError::Parse {
                path: path.to_path_buf(),
                row,
                column: 2,
                message: format!("lower bound {lb} exceeds upper bound {ub} for {name}"),
            });
        }
        bounds.insert(name, Bounds { lb, ub });
    }
    Ok(bounds)
}

type Events = BTreeMap<String, (Option<i64>, Option<PatientOutcome>)>;

fn load_events(path: &Path) -> Result<Events> {
    let rows = read_rows(path)?;
    let mut events = BTreeMap::new();
    for (row, rec) in data_rows(path, &rows, &["subject_id", "discharge_hour", "outcome"])? {
        let discharge = if rec[1].is_empty() {
            None
        } else {
            Some(parse_cell(path, rec, row, 1, "an integer hour")?)
        };
        let outcome = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].parse().map_err(|_| StpcaError::Parse {
                path: path.to_path_buf(),
                row,
                column: 3,
                message: format!("expected 'survived' or 'died', found '{}'", &rec[2]),
            })?)
        };
        if events.insert(rec[0].to_string(), (discharge, outcome)).is_some() {
            return Err(StpcaError::Parse {
                path: path.to_path_buf(),
                row,
                column: 1,
                message: format!("subject {} listed twice", &rec[0]),
            });
        }
    }
    Ok(events)
}

/// Values on the contiguous hour grid, forward- then back-filled.
fn fill_row(observed: &BTreeMap<i64, f64>, hours: &[i64]) -> Vec<f64> {
    let mut row: Vec<Option<f64>> = hours.iter().map(|h| observed.get(h).copied()).collect();
    let mut last = None;
    for v in row.iter_mut() {
        match v {
            Some(x) => last = Some(*x),
            None => *v = last,
        }
    }
    let mut next = None;
    for v in row.iter_mut().rev() {
        match v {
            Some(x) => next = Some(*x),
            None => *v = next,
        }
    }
    row.into_iter()
        .map(|v| v.expect("indicator has at least one observation"))
        .collect()
}

/// Pivots long-format observations into one indicator × hour matrix per
/// subject over the contiguous hours between its first and last record.
/// Subjects with fewer than 10 observed hours or 5 indicators are dropped.
pub fn load_patient_records(
    data: impl AsRef<Path>,
    bounds: impl AsRef<Path>,
    events: Option<&Path>,
) -> Result<PatientLoad> {
    let obs = load_observations(data.as_ref())?;
    let known: BTreeSet<&str> = obs.values().flat_map(|m| m.keys().map(String::as_str)).collect();
    let bounds = load_bounds(bounds.as_ref(), &known)?;
    let events = events.map(load_events).transpose()?.unwrap_or_default();

    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for (subject, indicators) in &obs {
        let observed: BTreeSet<i64> = indicators.values().flat_map(|m| m.keys().copied()).collect();
        if observed.len() < MIN_TIME_POINTS {
            dropped.push(DroppedSubject {
                subject_id: subject.clone(),
                reason: DropReason::MinTimePoints,
            });
            continue;
        }
        if indicators.len() < MIN_INDICATORS {
            dropped.push(DroppedSubject {
                subject_id: subject.clone(),
                reason: DropReason::MinIndicators,
            });
            continue;
        }
        let first = *observed.first().expect("non-empty");
        let last = *observed.last().expect("non-empty");
        let hours: Vec<i64> = (first..=last).collect();
        let n = indicators.len();
        let mut values = DMatrix::zeros(n, hours.len());
        for (i, series) in indicators.values().enumerate() {
            for (j, v) in fill_row(series, &hours).into_iter().enumerate() {
                values[(i, j)] = v;
            }
        }
        let matrix = SeriesMatrix::new(values)?
            .with_variable_names(indicators.keys().cloned().collect())?
            .with_time_index(hours.iter().map(|&h| h as f64).collect())?;
        let (discharge, outcome) = events.get(subject).copied().unwrap_or((None, None));
        records.push(PatientRecord::new(
            subject.clone(),
            matrix,
            bounds.clone(),
            discharge,
            outcome,
        )?);
    }
    Ok(PatientLoad { records, dropped })
}

/// Marker written for undefined ratios.
pub const NO_SUCH_EVENT: &str = "NaN";

fn metric_cell(v: Option<f64>) -> String {
    v.map_or_else(|| NO_SUCH_EVENT.to_string(), format_f64)
}

pub fn metrics_row(scope: &str, m: &Metrics) -> Vec<String> {
    vec![
        scope.to_string(),
        m.tp.to_string(),
        m.fp.to_string(),
        m.tn.to_string(),
        m.fn_.to_string(),
        metric_cell(m.recall),
        metric_cell(m.precision),
        metric_cell(m.f1),
        metric_cell(m.acc),
        metric_cell(m.fpr),
    ]
}

pub const METRICS_HEADER: [&str; 10] = [
    "scope", "tp", "fp", "tn", "fn", "recall", "precision", "f1", "acc", "fpr",
];

/// Writes `rows` under `header`.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(rename = "L")]
    pub embedding_dim: usize,
    pub lambda: f64,
    pub center_rows: bool,
    pub scale_rows: bool,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let d = EmbeddingConfig::default();
        Self {
            embedding_dim: d.embedding_dim,
            lambda: d.lambda,
            center_rows: d.center_rows,
            scale_rows: d.scale_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub width: usize,
    pub stride: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { width: 50, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    /// `mean` or `fold-change`.
    pub rule: String,
    pub factor: f64,
    pub baseline: usize,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            rule: "mean".into(),
            factor: 3.0,
            baseline: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionSection {
    pub wl: usize,
    pub fc: f64,
    pub items: Vec<String>,
    pub horizon: i64,
}

impl Default for DecisionSection {
    fn default() -> Self {
        let d = DecisionConfig::default();
        Self {
            wl: d.wl,
            fc: d.fc,
            items: d.selected_items,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Settings of one run, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embedding: EmbeddingSection,
    pub window: WindowSection,
    pub detection: DetectionSection,
    pub decision: DecisionSection,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| StpcaError::Parameter(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| StpcaError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            embedding_dim: self.embedding.embedding_dim,
            lambda: self.embedding.lambda,
            center_rows: self.embedding.center_rows,
            scale_rows: self.embedding.scale_rows,
        }
    }

    pub fn detection_rule(&self) -> Result<DetectionRule> {
        match self.detection.rule.as_str() {
            "mean" => Ok(DetectionRule::MeanExceed),
            "fold-change" => Ok(DetectionRule::FoldChange {
                factor: self.detection.factor,
                baseline_len: self.detection.baseline,
            }),
            other => Err(StpcaError::Parameter(format!(
                "unknown detection rule '{other}'; expected 'mean' or 'fold-change'"
            ))),
        }
    }

    pub fn decision_config(&self) -> DecisionConfig {
        DecisionConfig::new(self.decision.wl, self.decision.fc, self.decision.items.clone())
    }

    /// Checks everything that does not depend on the data length.
    pub fn validate(&self) -> Result<()> {
        let e = self.embedding_config();
        if e.embedding_dim < 2 {
            return Err(StpcaError::Parameter("L must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&e.lambda) {
            return Err(StpcaError::Parameter(format!(
                "lambda must lie in [0, 1], got {}",
                e.lambda
            )));
        }
        if self.window.stride == 0 || self.window.width < e.embedding_dim {
            return Err(StpcaError::Parameter(format!(
                "window {}x{} incompatible with L = {}",
                self.window.width, self.window.stride, e.embedding_dim
            )));
        }
        self.detection_rule()?;
        if self
            .input
            .iter()
            .chain(self.output.iter())
            .any(|p| p.as_os_str().is_empty())
        {
            return Err(StpcaError::Parameter("paths must be non-empty".into()));
        }
        if !self.decision.items.is_empty() {
            self.decision_config().validate()?;
        }
        Ok(())
    }
}
