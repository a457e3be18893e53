//! Discharge decisions from the latent fluctuation history and indicator ranges,
//! with TP/FP/TN/FN labeling and metric scoring.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::analysis::sample_sd;
use crate::eigen::SolverOptions;
use crate::error::{Result, StpcaError};
use crate::fit::fit_stpca_with;
use crate::series::{EmbeddingConfig, SeriesMatrix};

pub const MIN_TIME_POINTS: usize = 10;
pub const MIN_INDICATORS: usize = 5;
pub const DEFAULT_HORIZON: i64 = 5;

/// Inclusive normal range `[lb, ub]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lb: f64,
    pub ub: f64,
}

impl Bounds {
    pub fn new(lb: f64, ub: f64) -> Result<Self> {
        if !(lb <= ub) {
            return Err(StpcaError::InvalidData(format!(
                "lower bound {lb} exceeds upper bound {ub}"
            )));
        }
        Ok(Self { lb, ub })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lb <= v && v <= self.ub
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatientOutcome {
    Survived,
    Died,
}

impl std::str::FromStr for PatientOutcome {
    type Err = StpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "survived" => Ok(Self::Survived),
            "died" => Ok(Self::Died),
            other => Err(StpcaError::InvalidData(format!("unknown outcome '{other}'"))),
        }
    }
}

/// One subject's indicator matrix (rows named by indicator, columns at hourly timestamps).
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub subject_id: String,
    pub indicators: SeriesMatrix,
    pub bounds: BTreeMap<String, Bounds>,
    pub discharge_hour: Option<i64>,
    pub outcome: Option<PatientOutcome>,
}

impl PatientRecord {
    /// Requires named rows, an hourly time index, and at least
    /// [`MIN_TIME_POINTS`] columns and [`MIN_INDICATORS`] rows.
    pub fn new(
        subject_id: impl Into<String>,
        indicators: SeriesMatrix,
        bounds: BTreeMap<String, Bounds>,
        discharge_hour: Option<i64>,
        outcome: Option<PatientOutcome>,
    ) -> Result<Self> {
        if indicators.m() < MIN_TIME_POINTS {
            return Err(StpcaError::InsufficientSamples {
                needed: MIN_TIME_POINTS,
                got: indicators.m(),
            });
        }
        if indicators.n() < MIN_INDICATORS {
            return Err(StpcaError::InsufficientSamples {
                needed: MIN_INDICATORS,
                got: indicators.n(),
            });
        }
        if indicators.variable_names().is_none() || indicators.time_index().is_none() {
            return Err(StpcaError::InvalidData(
                "patient indicators need row names and an hour index".into(),
            ));
        }
        if let Some((name, b)) = bounds.iter().find(|(_, b)| !(b.lb <= b.ub)) {
            return Err(StpcaError::InvalidData(format!(
                "bounds for {name}: {} > {}",
                b.lb, b.ub
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            indicators,
            bounds,
            discharge_hour,
            outcome,
        })
    }

    pub fn hours(&self) -> Vec<i64> {
        self.indicators
            .time_index()
            .expect("validated at construction")
            .iter()
            .map(|&h| h.round() as i64)
            .collect()
    }

    pub fn in_icu_at(&self, hour: i64) -> bool {
        self.discharge_hour.is_none_or(|d| hour < d)
    }

    fn row_of(&self, item: &str) -> Result<usize> {
        self.indicators
            .variable_names()
            .and_then(|names| names.iter().position(|n| n == item))
            .ok_or_else(|| {
                StpcaError::Parameter(format!(
                    "subject {} has no indicator '{item}'",
                    self.subject_id
                ))
            })
    }

    fn bounds_of(&self, item: &str) -> Result<Bounds> {
        self.bounds.get(item).copied().ok_or_else(|| {
            StpcaError::Parameter(format!("no normal range for selected item '{item}'"))
        })
    }

    /// Rows and bounds of the selected items, in selection order.
    pub fn selected(&self, items: &[String]) -> Result<(Vec<usize>, Vec<Bounds>)> {
        let rows = items.iter().map(|i| self.row_of(i)).collect::<Result<_>>()?;
        let bounds = items.iter().map(|i| self.bounds_of(i)).collect::<Result<_>>()?;
        Ok((rows, bounds))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionConfig {
    /// Window length in hours.
    pub wl: usize,
    /// Fold-change threshold on `idx_z`.
    pub fc: f64,
    pub selected_items: Vec<String>,
}

impl DecisionConfig {
    pub fn new(wl: usize, fc: f64, selected_items: Vec<String>) -> Self {
        Self {
            wl,
            fc,
            selected_items,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.wl == 0 {
            return Err(StpcaError::Parameter("window length must be at least 1".into()));
        }
        if !(self.fc > 0.0) {
            return Err(StpcaError::Parameter(format!(
                "fold-change threshold must be positive, got {}",
                self.fc
            )));
        }
        if !(2..=5).contains(&self.selected_items.len()) {
            return Err(StpcaError::Parameter(format!(
                "select 2 to 5 items, got {}",
                self.selected_items.len()
            )));
        }
        Ok(())
    }
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            wl: 5,
            fc: 2.0,
            selected_items: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::TruePositive => "TP",
            Label::FalsePositive => "FP",
            Label::TrueNegative => "TN",
            Label::FalseNegative => "FN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionOutcome {
    /// Decision hour.
    pub t: i64,
    pub decision: bool,
    /// `idx_z(t)`; NaN when the recent fluctuation mean is zero.
    pub idx: f64,
    pub itm_flg: usize,
    pub label: Option<Label>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Highest past `wl`-window mean of `fl` over the mean of the most recent
/// `wl` values, for 1-based `t`; past windows end at `j = wl..t-1`.
pub fn idx_z(fl: &[f64], wl: usize, t: usize) -> Result<f64> {
    if wl == 0 {
        return Err(StpcaError::Parameter("window length must be at least 1".into()));
    }
    if t > fl.len() {
        return Err(StpcaError::Parameter(format!(
            "t = {t} exceeds fluctuation history of length {}",
            fl.len()
        )));
    }
    if t <= wl {
        return Err(StpcaError::NoPastWindow { t, wl });
    }
    let recent = mean(&fl[t - wl..t]);
    if recent == 0.0 {
        return Err(StpcaError::ZeroRecentMean { t });
    }
    let past = (wl..t)
        .map(|j| mean(&fl[j - wl..j]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(past / recent)
}

/// Number of items inside their inclusive normal range.
pub fn item_flags(x_t: &[f64], bounds: &[Bounds]) -> Result<usize> {
    if x_t.len() != bounds.len() {
        return Err(StpcaError::Shape(format!(
            "{} item values for {} bounds",
            x_t.len(),
            bounds.len()
        )));
    }
    Ok(x_t.iter().zip(bounds).filter(|(v, b)| b.contains(**v)).count())
}

/// Decision at 1-based fluctuation index `t`: positive iff `idx_z >= FC`
/// and every selected item is in range. The outcome's `t` is set to `t`;
/// callers working in hours overwrite it.
pub fn discharge_decision(
    fl: &[f64],
    x_t: &[f64],
    cfg: &DecisionConfig,
    bounds: &[Bounds],
    t: usize,
) -> Result<DecisionOutcome> {
    let idx = idx_z(fl, cfg.wl, t)?;
    let itm_flg = item_flags(x_t, bounds)?;
    Ok(DecisionOutcome {
        t: t as i64,
        decision: idx >= cfg.fc && itm_flg == bounds.len(),
        idx,
        itm_flg,
        label: None,
    })
}

/// Per-hour `Fl^z` from trailing windows of `max(L, wl)` columns. Entry `k`
/// belongs to the window ending at the returned column index.
pub fn fluctuation_history(
    record: &PatientRecord,
    embed: &EmbeddingConfig,
    wl: usize,
    solver: &SolverOptions,
) -> Result<Vec<(usize, f64)>> {
    let width = embed.embedding_dim.max(wl);
    let m = record.indicators.m();
    if width > m {
        return Err(StpcaError::Parameter(format!(
            "window width {width} exceeds the {m} hours recorded for subject {}",
            record.subject_id
        )));
    }
    (width - 1..m)
        .map(|end| {
            let window = record.indicators.window(end + 1 - width, width)?;
            let fit = fit_stpca_with(&window, embed, solver)?;
            Ok((end, sample_sd(&fit.z_extended.values)))
        })
        .collect()
}

/// Hourly decisions for one subject, from the first hour with a past window onward.
pub fn evaluate_patient(
    record: &PatientRecord,
    embed: &EmbeddingConfig,
    cfg: &DecisionConfig,
    solver: &SolverOptions,
) -> Result<Vec<DecisionOutcome>> {
    cfg.validate()?;
    let history = fluctuation_history(record, embed, cfg.wl, solver)?;
    let fl: Vec<f64> = history.iter().map(|&(_, v)| v).collect();
    let (rows, bounds) = record.selected(&cfg.selected_items)?;
    let hours = record.hours();
    let values = record.indicators.values();
    let mut out = Vec::new();
    for t in cfg.wl + 1..=fl.len() {
        let col = history[t - 1].0;
        let x_t: Vec<f64> = rows.iter().map(|&r| values[(r, col)]).collect();
        let mut outcome = match discharge_decision(&fl, &x_t, cfg, &bounds, t) {
            Ok(o) => o,
            Err(StpcaError::ZeroRecentMean { .. }) => DecisionOutcome {
                t: t as i64,
                decision: false,
                idx: f64::NAN,
                itm_flg: item_flags(&x_t, &bounds)?,
                label: None,
            },
            Err(e) => return Err(e),
        };
        outcome.t = hours[col];
        out.push(outcome);
    }
    Ok(out)
}

/// Counts plus derived rates; `None` marks a ratio with a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub acc: Option<f64>,
    pub fpr: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let recall = ratio(tp, tp + fn_);
        let precision = ratio(tp, tp + fp);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Self {
            tp,
            fp,
            tn,
            fn_,
            recall,
            precision,
            f1,
            acc: ratio(tp + tn, tp + fp + tn + fn_),
            fpr: ratio(fp, fp + tn),
        }
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for l in labels {
            match l {
                Label::TruePositive => tp += 1,
                Label::FalsePositive => fp += 1,
                Label::TrueNegative => tn += 1,
                Label::FalseNegative => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    /// Pooled counts of several evaluations.
    pub fn merge(parts: &[Metrics]) -> Self {
        let sum = |f: fn(&Metrics) -> usize| parts.iter().map(f).sum::<usize>();
        Self::from_counts(sum(|m| m.tp), sum(|m| m.fp), sum(|m| m.tn), sum(|m| m.fn_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub outcomes: Vec<DecisionOutcome>,
    pub metrics: Metrics,
}

/// Labels each decision and scores the set.
///
/// A positive decision at hour `t` is a TP when the subject is discharged in
/// `[t, t + horizon]` or every selected item stays in range at all recorded
/// hours `>= t`; otherwise FP. A negative decision is a TN while the subject is
/// still in the ICU at `t`, otherwise FN.
pub fn score_decisions(
    outcomes: &[DecisionOutcome],
    record: &PatientRecord,
    selected_items: &[String],
    horizon: i64,
) -> Result<Scored> {
    if let Some(w) = outcomes.windows(2).find(|w| w[1].t < w[0].t) {
        return Err(StpcaError::Ordering {
            prev: w[0].t,
            next: w[1].t,
        });
    }
    let (rows, bounds) = record.selected(selected_items)?;
    let hours = record.hours();
    let values = record.indicators.values();
    let stable_from = |t: i64| {
        hours
            .iter()
            .enumerate()
            .filter(|(_, &h)| h >= t)
            .all(|(col, _)| rows.iter().zip(&bounds).all(|(&r, b)| b.contains(values[(r, col)])))
    };
    let labeled: Vec<DecisionOutcome> = outcomes
        .iter()
        .map(|o| {
            let label = if o.decision {
                let discharged_soon = record
                    .discharge_hour
                    .is_some_and(|d| d >= o.t && d <= o.t + horizon);
                if discharged_soon || stable_from(o.t) {
                    Label::TruePositive
                } else {
                    Label::FalsePositive
                }
            } else if record.in_icu_at(o.t) {
                Label::TrueNegative
            } else {
                Label::FalseNegative
            };
            DecisionOutcome {
                label: Some(label),
                ..*o
            }
        })
        .collect();
    let metrics = Metrics::from_labels(labeled.iter().filter_map(|o| o.label.as_ref()));
    Ok(Scored {
        outcomes: labeled,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientEvaluation {
    pub subject_id: String,
    pub scored: Scored,
}

/// Evaluates and scores every record; output follows input order.
pub fn evaluate_cohort(
    records: &[PatientRecord],
    embed: &EmbeddingConfig,
    cfg: &DecisionConfig,
    horizon: i64,
    solver: &SolverOptions,
    parallel: bool,
) -> Result<(Vec<PatientEvaluation>, Metrics)> {
    let one = |r: &PatientRecord| -> Result<PatientEvaluation> {
        let outcomes = evaluate_patient(r, embed, cfg, solver)?;
        let scored = score_decisions(&outcomes, r, &cfg.selected_items, horizon)?;
        Ok(PatientEvaluation {
            subject_id: r.subject_id.clone(),
            scored,
        })
    };
    let evaluations: Vec<PatientEvaluation> = if parallel {
        records.par_iter().map(one).collect::<Result<_>>()?
    } else {
        records.iter().map(one).collect::<Result<_>>()?
    };
    let parts: Vec<Metrics> = evaluations.iter().map(|e| e.scored.metrics).collect();
    Ok((evaluations, Metrics::merge(&parts)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_hand_case() {
        let fl = [1.0, 4.0, 2.0, 1.0, 1.0];
        assert!((idx_z(&fl, 2, 5).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(idx_z(&[0.7; 8], 3, 8).unwrap(), 1.0);
        assert!(matches!(idx_z(&fl, 2, 2), Err(StpcaError::NoPastWindow { t: 2, wl: 2 })));
        assert!(matches!(
            idx_z(&[1.0, 1.0, 0.0, 0.0], 2, 4),
            Err(StpcaError::ZeroRecentMean { t: 4 })
        ));
        assert!(idx_z(&fl, 2, 6).is_err());
    }

    #[test]
    fn flags_are_inclusive() {
        let b = [Bounds::new(1.0, 2.0).unwrap(), Bounds::new(-1.0, 1.0).unwrap()];
        assert_eq!(item_flags(&[1.5, 0.0], &b).unwrap(), 2);
        assert_eq!(item_flags(&[1.0, 1.0], &b).unwrap(), 2);
        assert_eq!(item_flags(&[2.5, 0.0], &b).unwrap(), 1);
        assert!(matches!(item_flags(&[1.0], &b), Err(StpcaError::Shape(_))));
        assert!(Bounds::new(2.0, 1.0).is_err());
    }

    #[test]
    fn decision_rule() {
        let fl = [1.0, 4.0, 2.0, 1.0, 1.0];
        let b = [Bounds::new(0.0, 1.0).unwrap(), Bounds::new(0.0, 1.0).unwrap()];
        let items = vec!["a".to_string(), "b".to_string()];
        let cfg = DecisionConfig::new(2, 2.0, items.clone());
        let yes = discharge_decision(&fl, &[0.5, 0.5], &cfg, &b, 5).unwrap();
        assert!(yes.decision);
        assert_eq!(yes.itm_flg, 2);
        let out_of_range = discharge_decision(&fl, &[0.5, 1.5], &cfg, &b, 5).unwrap();
        assert!(!out_of_range.decision);
        let flat = discharge_decision(&[1.0; 5], &[0.5, 0.5], &cfg, &b, 5).unwrap();
        assert_eq!(flat.idx, 1.0);
        assert!(!flat.decision);
    }

    #[test]
    fn metrics_fixture() {
        let m = Metrics::from_counts(3, 1, 4, 0);
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.precision, Some(0.75));
        assert!((m.f1.unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(m.acc, Some(7.0 / 8.0));
        assert_eq!(m.fpr, Some(0.2));
        let none = Metrics::from_counts(0, 0, 5, 0);
        assert_eq!(none.precision, None);
        assert_eq!(none.recall, None);
        assert_eq!(none.f1, None);
        assert_eq!(none.fpr, Some(0.0));
        let zero = Metrics::from_counts(0, 2, 1, 3);
        assert_eq!(zero.recall, Some(0.0));
        assert_eq!(zero.precision, Some(0.0));
        assert_eq!(zero.f1, None);
    }

    #[test]
    fn config_validation() {
        let items = |k: usize| (0..k).map(|i| format!("i{i}")).collect::<Vec<_>>();
        assert!(DecisionConfig::new(5, 2.0, items(3)).validate().is_ok());
        assert!(DecisionConfig::new(0, 2.0, items(3)).validate().is_err());
        assert!(DecisionConfig::new(5, 0.0, items(3)).validate().is_err());
        assert!(DecisionConfig::new(5, 2.0, items(1)).validate().is_err());
        assert!(DecisionConfig::new(5, 2.0, items(6)).validate().is_err());
    }
}
