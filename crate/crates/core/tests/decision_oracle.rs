mod common;

use std::collections::BTreeMap;

use common::{label_by_hand, metrics_by_hand, rng};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stpca::decision::{
    discharge_decision, evaluate_patient, fluctuation_history, idx_z, score_decisions, Bounds,
    DecisionConfig, DecisionOutcome, Label, Metrics, PatientRecord,
};
use stpca::eigen::SolverOptions;
use stpca::{EmbeddingConfig, SeriesMatrix};

const NAMES: [&str; 6] = ["hr", "sbp", "spo2", "temp", "rr", "gcs"];

fn record(r: &mut ChaCha8Rng, hours: usize, first_hour: i64, discharge: Option<i64>) -> PatientRecord {
    let values = DMatrix::from_fn(NAMES.len(), hours, |_, _| r.random_range(0.0..2.0));
    let x = SeriesMatrix::new(values)
        .unwrap()
        .with_variable_names(NAMES.iter().map(|s| s.to_string()).collect())
        .unwrap()
        .with_time_index((0..hours).map(|h| (first_hour + h as i64) as f64).collect())
        .unwrap();
    let bounds: BTreeMap<String, Bounds> = NAMES
        .iter()
        .map(|n| (n.to_string(), Bounds::new(0.2, 1.9).unwrap()))
        .collect();
    PatientRecord::new("s1", x, bounds, discharge, None).unwrap()
}

fn items(k: usize) -> Vec<String> {
    NAMES[..k].iter().map(|s| s.to_string()).collect()
}

fn assert_metrics_match(got: &Metrics, labels: &[&str]) {
    let want = metrics_by_hand(labels);
    assert_eq!([got.tp, got.fp, got.tn, got.fn_], want.counts);
    assert_eq!(got.recall, want.recall);
    assert_eq!(got.precision, want.precision);
    assert_eq!(got.f1, want.f1);
    assert_eq!(got.acc, want.acc);
    assert_eq!(got.fpr, want.fpr);
}

/// Every decision pattern over up to ten decision hours, for several
/// discharge hours and horizons.
#[test]
fn labels_and_metrics_match_exhaustive_rederivation() {
    let mut r = rng(30);
    for case in 0..12 {
        let hours = r.random_range(10..=20);
        let first = r.random_range(0..5);
        let last = first + hours as i64 - 1;
        let discharge = match case % 4 {
            0 => None,
            1 => Some(r.random_range(first..=last + 3)),
            2 => Some(first),
            _ => Some(last + 1),
        };
        let rec = record(&mut r, hours, first, discharge);
        let k = 2 + case % 4;
        let selected = items(k);
        let (rows, bounds) = rec.selected(&selected).unwrap();
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|&row| rec.indicators.values().row(row).iter().copied().collect())
            .collect();
        let hand_bounds: Vec<(f64, f64)> = bounds.iter().map(|b| (b.lb, b.ub)).collect();
        let all_hours = rec.hours();
        let times: Vec<i64> = all_hours.iter().rev().take(10.min(hours)).rev().copied().collect();
        for horizon in [0, 2, 5] {
            for pattern in 0u32..(1 << times.len()) {
                let outcomes: Vec<DecisionOutcome> = times
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| DecisionOutcome {
                        t,
                        decision: pattern >> i & 1 == 1,
                        idx: 1.0,
                        itm_flg: 0,
                        label: None,
                    })
                    .collect();
                let scored = score_decisions(&outcomes, &rec, &selected, horizon).unwrap();
                let hand: Vec<&str> = outcomes
                    .iter()
                    .map(|o| {
                        label_by_hand(o.decision, o.t, &all_hours, &values, &hand_bounds, discharge, horizon)
                    })
                    .collect();
                let got: Vec<&str> = scored.outcomes.iter().map(|o| o.label.unwrap().as_str()).collect();
                assert_eq!(got, hand, "case {case} horizon {horizon} pattern {pattern:b}");
                assert_metrics_match(&scored.metrics, &hand);
            }
        }
    }
}

#[test]
fn zero_denominators_are_reported_as_missing() {
    let none = Metrics::from_labels(&[]);
    assert_eq!([none.recall, none.precision, none.f1, none.acc, none.fpr], [None; 5]);
    let negatives = Metrics::from_labels(&[Label::TrueNegative, Label::TrueNegative]);
    assert_eq!(negatives.recall, None);
    assert_eq!(negatives.precision, None);
    assert_eq!(negatives.f1, None);
    assert_eq!(negatives.fpr, Some(0.0));
    assert_eq!(negatives.acc, Some(1.0));
    let misses = Metrics::from_labels(&[Label::FalseNegative, Label::FalsePositive]);
    assert_eq!(misses.recall, Some(0.0));
    assert_eq!(misses.precision, Some(0.0));
    assert_eq!(misses.f1, None);
    assert_metrics_match(&misses, &["FN", "FP"]);
}

#[test]
fn metric_identities() {
    let mut r = rng(31);
    for _ in 0..200 {
        let labels: Vec<Label> = (0..r.random_range(0..30))
            .map(|_| match r.random_range(0..4) {
                0 => Label::TruePositive,
                1 => Label::FalsePositive,
                2 => Label::TrueNegative,
                _ => Label::FalseNegative,
            })
            .collect();
        let m = Metrics::from_labels(&labels);
        assert_eq!(m.tp + m.fp + m.tn + m.fn_, labels.len());
        for v in [m.recall, m.fpr].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&v));
        }
        if let (Some(p), Some(rc), Some(f1)) = (m.precision, m.recall, m.f1) {
            assert!((f1 - 1.0 / (0.5 / p + 0.5 / rc)).abs() < 1e-12);
        }
    }
}

#[test]
fn produced_decisions_follow_the_rule() {
    let mut r = rng(32);
    let embed = EmbeddingConfig::new(3, 0.9);
    let solver = SolverOptions::default();
    for case in 0..6 {
        let rec = record(&mut r, 20, 0, Some(18));
        let k = 2 + case % 3;
        let cfg = DecisionConfig::new(3, 1.2, items(k));
        let outcomes = evaluate_patient(&rec, &embed, &cfg, &solver).unwrap();
        let history = fluctuation_history(&rec, &embed, cfg.wl, &solver).unwrap();
        let fl: Vec<f64> = history.iter().map(|h| h.1).collect();
        assert_eq!(outcomes.len(), fl.len() - cfg.wl);
        let (_, bounds) = rec.selected(&cfg.selected_items).unwrap();
        for (i, o) in outcomes.iter().enumerate() {
            assert_eq!(o.decision, o.idx >= cfg.fc && o.itm_flg == bounds.len());
            // By hand: max over past wl-window means over the latest wl-window mean.
            let t = cfg.wl + 1 + i;
            let mean = |a: usize, b: usize| fl[a..b].iter().sum::<f64>() / (b - a) as f64;
            let past = (cfg.wl..t).map(|j| mean(j - cfg.wl, j)).fold(f64::MIN, f64::max);
            assert!((o.idx - past / mean(t - cfg.wl, t)).abs() < 1e-12 * o.idx.max(1.0));
        }
        let stricter = DecisionConfig::new(3, 2.5, items(k));
        let strict = evaluate_patient(&rec, &embed, &stricter, &solver).unwrap();
        for (a, b) in outcomes.iter().zip(&strict) {
            assert!(!(b.decision && !a.decision));
        }
        let scored = score_decisions(&outcomes, &rec, &cfg.selected_items, 5).unwrap();
        assert_eq!(scored.outcomes.len(), outcomes.len());
    }
}

#[test]
fn idx_fixture_and_scale_invariance() {
    let fl = [1.0, 4.0, 2.0, 1.0, 1.0];
    assert_eq!(idx_z(&fl, 2, 5).unwrap(), 3.0);
    for c in [0.25, 2.0, 1024.0] {
        let scaled: Vec<f64> = fl.iter().map(|v| v * c).collect();
        assert_eq!(idx_z(&scaled, 2, 5).unwrap(), idx_z(&fl, 2, 5).unwrap());
    }
    let mut r = rng(33);
    for _ in 0..100 {
        let fl: Vec<f64> = (0..12).map(|_| r.random_range(0.1..5.0)).collect();
        let c = r.random_range(0.01..100.0);
        let scaled: Vec<f64> = fl.iter().map(|v| v * c).collect();
        let (a, b) = (idx_z(&fl, 3, 12).unwrap(), idx_z(&scaled, 3, 12).unwrap());
        assert!((a - b).abs() <= 4.0 * f64::EPSILON * a);
    }
}

#[test]
fn discharge_rule_fixture() {
    let cfg = DecisionConfig::new(2, 2.0, items(2));
    let bounds = [Bounds::new(0.0, 1.0).unwrap(), Bounds::new(0.0, 1.0).unwrap()];
    let fl = [1.0, 4.0, 2.0, 1.0, 1.0];
    let yes = discharge_decision(&fl, &[0.5, 1.0], &cfg, &bounds, 5).unwrap();
    assert!(yes.decision);
    assert_eq!(yes.itm_flg, 2);
    let out_of_range = discharge_decision(&fl, &[0.5, 1.5], &cfg, &bounds, 5).unwrap();
    assert!(!out_of_range.decision);
    let strict = DecisionConfig::new(2, 3.5, items(2));
    assert!(!discharge_decision(&fl, &[0.5, 0.5], &strict, &bounds, 5).unwrap().decision);
}

#[test]
fn unsorted_outcomes_are_rejected() {
    let mut r = rng(34);
    let rec = record(&mut r, 12, 0, None);
    let o = |t| DecisionOutcome {
        t,
        decision: false,
        idx: 1.0,
        itm_flg: 0,
        label: None,
    };
    assert!(score_decisions(&[o(5), o(3)], &rec, &items(2), 5).is_err());
}
