mod common;

use common::{brute_force_dfd, random_points, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use stpca::analysis::{
    detect_tipping, discrete_frechet, fluctuation_sweep, fluctuation_sweep_with, hankel_svd_projections,
    pca_baseline, pcfd, sample_sd, Curve, DetectionRule, FluctuationSweep, SweepOptions,
};
use stpca::embedding::{hankel_from_series, nearest_hankel};
use stpca::fit::fit_stpca;
use stpca::synth::{simulate_coupled_lorenz, LorenzConfig};
use stpca::{EmbeddingConfig, SeriesMatrix};

fn curve(points: Vec<Vec<f64>>) -> Curve {
    Curve::new(points).unwrap()
}

#[test]
fn dfd_equals_exhaustive_couplings() {
    let mut r = rng(20);
    for len_a in 1..=6 {
        for len_b in 1..=6 {
            for _ in 0..6 {
                let d = r.random_range(1..=3);
                let a = random_points(&mut r, len_a, d);
                let b = random_points(&mut r, len_b, d);
                let want = brute_force_dfd(&a, &b);
                let got = discrete_frechet(&curve(a), &curve(b)).unwrap();
                assert_eq!(got, want, "{len_a}x{len_b}");
            }
        }
    }
    let a = curve(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
    let b = curve(vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
    assert_eq!(discrete_frechet(&a, &b).unwrap(), 1.0);
}

#[test]
fn dfd_is_a_pseudo_metric() {
    let mut r = rng(21);
    for _ in 0..500 {
        let len = r.random_range(1..=8);
        let [a, b, c] = [0, 1, 2].map(|_| curve(random_points(&mut r, len, 2)));
        let ab = discrete_frechet(&a, &b).unwrap();
        let ba = discrete_frechet(&b, &a).unwrap();
        let bc = discrete_frechet(&b, &c).unwrap();
        let ac = discrete_frechet(&a, &c).unwrap();
        assert!(ab >= 0.0);
        assert_eq!(ab, ba);
        assert_eq!(discrete_frechet(&a, &a).unwrap(), 0.0);
        assert!(ac <= ab + bc + 1e-12);
        let lockstep = a
            .points()
            .iter()
            .zip(b.points())
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(ab <= lockstep);
    }
}

#[test]
fn pcfd_invariances() {
    let mut r = rng(22);
    for _ in 0..100 {
        let a = curve(random_points(&mut r, 7, 2));
        let b = curve(random_points(&mut r, 9, 2));
        let base = pcfd(&a, &b).unwrap();
        assert_eq!(pcfd(&a, &a.negated()).unwrap(), 0.0);
        assert!((pcfd(&a.negated(), &b).unwrap() - base).abs() < 1e-12);
        assert!((pcfd(&a, &b.negated()).unwrap() - base).abs() < 1e-12);
        let (c, d) = (r.random_range(0.1..10.0), r.random_range(-5.0..5.0));
        let affine = curve(a.points().iter().map(|p| p.iter().map(|v| c * v + d).collect()).collect());
        assert!((pcfd(&affine, &b).unwrap() - base).abs() < 1e-12);
    }
    let a = Curve::from_scalars(&[0.0, 1.0, 0.0]).unwrap();
    let z = Curve::from_scalars(&[0.0, 0.0, 0.0]).unwrap();
    assert!((pcfd(&a, &z).unwrap() - 1.1547).abs() < 1e-4);
}

#[test]
fn hankel_svd_contracts() {
    let constant = hankel_from_series(&[2.0; 12], 4).unwrap();
    let p = hankel_svd_projections(&constant, 3).unwrap();
    assert!(p.singular_values[0] > 1.0);
    assert!(p.singular_values[1..].iter().all(|&s| s < 1e-12));

    let mut r = rng(23);
    let z: Vec<f64> = (0..15).map(|_| r.random_range(-1.0..1.0)).collect();
    let h = hankel_from_series(&z, 5).unwrap();
    let full = hankel_svd_projections(&h, 5).unwrap();
    assert!(full.singular_values.windows(2).all(|w| w[0] >= w[1]));
    assert!((full.variance_proportions.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(full.singular_values.clone()));
    let rebuilt = &full.left * sigma * full.components.transpose();
    assert!((rebuilt - h.values()).norm() < 1e-10);
    assert!(hankel_svd_projections(&h, 0).is_err());
    assert!(hankel_svd_projections(&h, 6).is_err());
}

#[test]
fn pca_baseline_contracts() {
    let base = [1.0, 3.0, -2.0, 0.5, 4.0];
    let rows: Vec<Vec<f64>> = [1.0, -2.0, 0.5].iter().map(|c| base.iter().map(|v| c * v).collect()).collect();
    let p = pca_baseline(&SeriesMatrix::from_rows(&rows).unwrap(), 1).unwrap();
    assert!((p.variance_proportions[0] - 1.0).abs() < 1e-12);

    let mut r = rng(24);
    let x = SeriesMatrix::new(common::random_matrix(&mut r, 4, 20)).unwrap();
    let p = pca_baseline(&x, 3).unwrap();
    let gram = p.left.transpose() * &p.left;
    assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-10);
    // λ = 0: α is the leading PCA variance σ₁².
    let fit = fit_stpca(&x, &EmbeddingConfig::new(2, 0.0)).unwrap();
    assert!((fit.alpha - p.singular_values[0].powi(2)).abs() < 1e-8 * fit.alpha.max(1.0));
}

fn lorenz(n: usize, m: usize, seed: u64) -> SeriesMatrix {
    simulate_coupled_lorenz(&LorenzConfig {
        n,
        m,
        seed,
        ..LorenzConfig::default()
    })
    .unwrap()
}

#[test]
fn sweep_contracts() {
    let x = lorenz(9, 60, 1);
    let cfg = EmbeddingConfig::new(5, 0.9);
    let s = fluctuation_sweep(&x, &cfg, 20, 7).unwrap();
    assert_eq!(s.len(), (60 - 20) / 7 + 1);
    assert!(s.fl.iter().all(|&v| v >= 0.0 && v.is_finite()));

    let single = fluctuation_sweep(&x, &cfg, 60, 1).unwrap();
    let direct = sample_sd(&fit_stpca(&x, &cfg).unwrap().z_extended.values);
    assert_eq!(single.fl, vec![direct]);

    let flipped = SeriesMatrix::new(-x.values().clone()).unwrap();
    let f = fluctuation_sweep(&flipped, &cfg, 20, 7).unwrap();
    for (a, b) in s.fl.iter().zip(&f.fl) {
        assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    let constant = SeriesMatrix::new(DMatrix::from_element(4, 30, 1.5)).unwrap();
    let c = fluctuation_sweep(&constant, &cfg, 10, 5).unwrap();
    assert!(c.fl.iter().all(|&v| v == 0.0));

    assert!(fluctuation_sweep(&x, &cfg, 61, 1).is_err());
    assert!(fluctuation_sweep(&x, &cfg, 20, 0).is_err());
}

#[test]
fn parallel_sweep_matches_sequential() {
    let x = lorenz(12, 120, 2);
    let cfg = EmbeddingConfig::new(8, 0.95);
    let seq = fluctuation_sweep_with(&x, &cfg, &SweepOptions::new(30, 3)).unwrap();
    let par = fluctuation_sweep_with(
        &x,
        &cfg,
        &SweepOptions {
            parallel: true,
            ..SweepOptions::new(30, 3)
        },
    )
    .unwrap();
    assert_eq!(seq, par);
}

fn sweep_of(fl: Vec<f64>) -> FluctuationSweep {
    FluctuationSweep {
        positions: (0..fl.len()).map(|k| k as f64).collect(),
        fl,
        window_width: 1,
        stride: 1,
    }
}

#[test]
fn detection_fixtures() {
    let s = sweep_of(vec![1.0, 1.0, 1.0, 1.0, 10.0]);
    // Fifth window, 0-based index 4.
    assert_eq!(detect_tipping(&s, DetectionRule::MeanExceed).unwrap(), vec![4]);
    let fold = DetectionRule::FoldChange {
        factor: 3.0,
        baseline_len: 3,
    };
    assert_eq!(detect_tipping(&s, fold).unwrap(), vec![4]);
    assert!(detect_tipping(&sweep_of(vec![2.0; 6]), DetectionRule::MeanExceed)
        .unwrap()
        .is_empty());
    let too_long = DetectionRule::FoldChange {
        factor: 3.0,
        baseline_len: 5,
    };
    assert!(detect_tipping(&s, too_long).is_err());
}

proptest! {
    #[test]
    fn detection_scale_invariant(fl in prop::collection::vec(0.0f64..10.0, 6..30), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = fl.iter().map(|v| v * c).collect();
        for rule in [DetectionRule::MeanExceed, DetectionRule::FoldChange { factor: 2.0, baseline_len: 4 }] {
            let a = detect_tipping(&sweep_of(fl.clone()), rule).unwrap();
            let b = detect_tipping(&sweep_of(scaled.clone()), rule).unwrap();
            // Scaling can move a value across the threshold only by rounding.
            let differ: Vec<_> = a.iter().filter(|k| !b.contains(k)).chain(b.iter().filter(|k| !a.contains(k))).collect();
            for &k in differ {
                let t = match rule {
                    DetectionRule::MeanExceed => fl.iter().sum::<f64>() / fl.len() as f64,
                    DetectionRule::FoldChange { .. } => {
                        let mut base = fl[..4].to_vec();
                        base.sort_by(f64::total_cmp);
                        2.0 * 0.5 * (base[1] + base[2])
                    }
                };
                prop_assert!((fl[k] - t).abs() <= 1e-12 * t.max(1.0));
            }
        }
    }
}

#[test]
fn projection_curves_from_a_fit() {
    let x = lorenz(9, 40, 3);
    let fit = fit_stpca(&x, &EmbeddingConfig::new(6, 0.9)).unwrap();
    let p = hankel_svd_projections(&nearest_hankel(&fit.z), 2).unwrap();
    let c = Curve::from_columns(&[p.component(0), p.component(1)]).unwrap();
    assert_eq!(c.len(), 40);
    assert_eq!(pcfd(&c, &c).unwrap(), 0.0);
}
