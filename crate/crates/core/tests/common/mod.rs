//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical code.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Row-mean removal.
pub fn center(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    c
}

/// `-(1-λ) Σ_i |W_i X|² + λ Σ_{i<L} Σ_j (W_i x_{j+1} - W_{i+1} x_j)²`, summed
/// entry by entry.
pub fn loss(xc: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> f64 {
    let (n, m) = xc.shape();
    let l = w.nrows();
    let proj = |i: usize, j: usize| (0..n).map(|k| w[(i, k)] * xc[(k, j)]).sum::<f64>();
    let mut variance = 0.0;
    for i in 0..l {
        for j in 0..m {
            variance += proj(i, j).powi(2);
        }
    }
    let mut mismatch = 0.0;
    for i in 0..l.saturating_sub(1) {
        for j in 0..m - 1 {
            mismatch += (proj(i, j + 1) - proj(i + 1, j)).powi(2);
        }
    }
    -(1.0 - lambda) * variance + lambda * mismatch
}

fn unstack(v: &[f64], l: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(l, n, v)
}

/// Dense `H` with `loss(W) = -vec(W)' H vec(W)`, recovered by polarization of
/// the quadratic form on basis vectors.
pub fn dense_h(xc: &DMatrix<f64>, l: usize, lambda: f64) -> DMatrix<f64> {
    let n = xc.nrows();
    let dim = n * l;
    let q = |v: &[f64]| -loss(xc, &unstack(v, l, n), lambda);
    let basis = |a: usize| {
        let mut e = vec![0.0; dim];
        e[a] = 1.0;
        e
    };
    let diag: Vec<f64> = (0..dim).map(|a| q(&basis(a))).collect();
    let mut h = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        h[(a, a)] = diag[a];
        for b in a + 1..dim {
            let mut e = basis(a);
            e[b] = 1.0;
            let v = 0.5 * (q(&e) - diag[a] - diag[b]);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Largest eigenvalue and its eigenvector, with the gap to the next one.
pub fn dense_top(h: &DMatrix<f64>) -> (f64, Vec<f64>, f64) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let gap = if order.len() > 1 {
        eig.eigenvalues[top] - eig.eigenvalues[order[1]]
    } else {
        f64::INFINITY
    };
    (
        eig.eigenvalues[top],
        eig.eigenvectors.column(top).iter().copied().collect(),
        gap,
    )
}

pub fn random_unit(rng: &mut ChaCha8Rng, l: usize, n: usize) -> DMatrix<f64> {
    let w = random_matrix(rng, l, n);
    let norm = w.norm();
    w / norm
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Discrete Fréchet distance by enumerating every monotone coupling path.
pub fn brute_force_dfd(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, worst: f64, best: &mut f64) {
        let worst = worst.max(dist(&a[i], &b[j]));
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(worst);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, worst, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, worst, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, worst, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

pub fn random_points(rng: &mut ChaCha8Rng, len: usize, d: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

/// Label of one decision, `TP`, `FP`, `TN` or `FN`, by direct scan.
///
/// `values[k][h]` is selected item `k` at hour index `h`.
pub fn label_by_hand(
    decision: bool,
    t: i64,
    hours: &[i64],
    values: &[Vec<f64>],
    bounds: &[(f64, f64)],
    discharge: Option<i64>,
    horizon: i64,
) -> &'static str {
    if decision {
        let mut discharged_soon = false;
        if let Some(d) = discharge {
            for s in t..=t + horizon {
                if s == d {
                    discharged_soon = true;
                }
            }
        }
        let mut stable = true;
        for (h_idx, &h) in hours.iter().enumerate() {
            if h < t {
                continue;
            }
            for (k, &(lb, ub)) in bounds.iter().enumerate() {
                let v = values[k][h_idx];
                if v < lb || v > ub {
                    stable = false;
                }
            }
        }
        if discharged_soon || stable {
            "TP"
        } else {
            "FP"
        }
    } else {
        let still_in = match discharge {
            None => true,
            Some(d) => t < d,
        };
        if still_in {
            "TN"
        } else {
            "FN"
        }
    }
}

/// Counts and rates from label strings; `None` for zero denominators.
pub struct HandMetrics {
    pub counts: [usize; 4],
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub acc: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn metrics_by_hand(labels: &[&str]) -> HandMetrics {
    let count = |s: &str| labels.iter().filter(|&&l| l == s).count();
    let (tp, fp, tn, fn_) = (count("TP"), count("FP"), count("TN"), count("FN"));
    let div = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let recall = div(tp, tp + fn_);
    let precision = div(tp, tp + fp);
    let f1 = match (recall, precision) {
        (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    HandMetrics {
        counts: [tp, fp, tn, fn_],
        recall,
        precision,
        f1,
        acc: div(tp + tn, labels.len()),
        fpr: div(fp, fp + tn),
    }
}
