//! Randomized invariant checks shared by the property tests and the
//! acceptance harness.

use factorseg::bootstrap::{sb_indices, sb_resample, ResampleSource};
use factorseg::panel::{parse_csv, Orientation};
use factorseg::segment::{cusum, cusum_series, double_cusum, CusumMatrix};
use factorseg::wavelet::{haar_filter, transform_g, WaveletPanel};
use factorseg::{rng, Component, Pca, TimeSeriesPanel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn haar_filters_are_orthonormal(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(-8i32..=-1), |j| {
            let f = haar_filter(j).unwrap();
            let c = f.coefficients();
            let sum: f64 = c.iter().sum();
            let norm: f64 = c.iter().map(|v| v * v).sum();
            prop_assert!(sum.abs() < 1e-12);
            prop_assert!((norm - 1.0).abs() < 1e-12);
            // orthogonal to every finer filter placed on a dyadic offset
            for finer in (j + 1)..=-1 {
                let g = haar_filter(finer).unwrap();
                let d = g.coefficients();
                for m in 0..c.len() / d.len() {
                    let dot: f64 = d.iter().enumerate().map(|(l, v)| v * c[m * d.len() + l]).sum();
                    prop_assert!(dot.abs() < 1e-12);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn g_ignores_constant_shifts(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(prop::collection::vec(-5.0f64..5.0, 16..64), -50.0f64..50.0, -3i32..=-1), |(x, shift, j)| {
            let g = transform_g(&x, j).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let gy = transform_g(&y, j).unwrap();
            for (a, b) in g.iter().zip(&gy) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn g_scales_with_input(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(prop::collection::vec(-5.0f64..5.0, 16..64), 0.01f64..100.0, -3i32..=-1), |(x, c, j)| {
            let g = transform_g(&x, j).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            let gy = transform_g(&y, j).unwrap();
            for (a, b) in g.iter().zip(&gy) {
                prop_assert!(close(c * a, *b, 1e-12));
            }
            // powers of two scale exactly
            let y: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
            let gy = transform_g(&y, j).unwrap();
            for (a, b) in g.iter().zip(&gy) {
                prop_assert_eq!(4.0 * a, *b);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn cusum_ignores_constant_shifts(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(prop::collection::vec(-5.0f64..5.0, 8..50), -20.0f64..20.0), |(row, shift)| {
            let e = row.len();
            let y = cusum_series(&row, 1, e, 1.0).unwrap();
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            let ys = cusum_series(&shifted, 1, e, 1.0).unwrap();
            for (a, b) in y.iter().zip(&ys) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn constant_rows_have_zero_cusum(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(-5.0f64..5.0, 3usize..40, 0.1f64..3.0), |(v, len, sigma)| {
            let y = cusum_series(&vec![v; len], 1, len, sigma).unwrap();
            prop_assert!(y.iter().all(|x| *x == 0.0));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn dc_argmax_is_scale_invariant(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(matrix(5, 40), 0.001f64..1000.0), |(m, c)| {
            let y = m.map(f64::abs);
            let p = WaveletPanel::from_matrix(&y, Component::Common).unwrap();
            let q = WaveletPanel::from_matrix(&(&y * c), Component::Common).unwrap();
            let a = double_cusum(&cusum(&p, 1, 40).unwrap()).unwrap();
            let b = double_cusum(&cusum(&q, 1, 40).unwrap()).unwrap();
            prop_assert!(close(a.statistic, b.statistic, 1e-9));
            prop_assert_eq!(a.location, b.location);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn dc_is_non_negative(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..8), 1..20), |cols| {
            let n = cols[0].len();
            let cols: Vec<Vec<f64>> = cols.into_iter().map(|mut c| { c.resize(n, 0.5); c }).collect();
            let r = double_cusum(&CusumMatrix::from_columns(1, cols).unwrap()).unwrap();
            prop_assert!(r.statistic >= 0.0);
            prop_assert!(r.m >= 1 && r.m <= n);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn decomposition_reconstructs_panel(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(matrix(6, 30), 1usize..5), |(m, k)| {
            let p = TimeSeriesPanel::new(m).unwrap();
            let d = Pca::fit(&p, None).unwrap().decompose(&p, k, None).unwrap();
            let sum = &d.common + &d.idiosyncratic;
            prop_assert!((sum - p.values()).amax() < 1e-12);
            let capped = Pca::fit(&p, None).unwrap().decompose(&p, k, Some(0.5)).unwrap();
            let sum = &capped.common + &capped.idiosyncratic;
            prop_assert!((sum - p.values()).amax() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn bootstrap_blocks_are_circular_runs(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(2usize..200, 0.01f64..1.0, any::<u64>()), |(len, p, seed)| {
            let mut r = rng::substream(seed, &[]);
            let idx = sb_indices(len, p, &mut r).unwrap();
            prop_assert_eq!(idx.len(), len);
            prop_assert!(idx.iter().all(|&t| t < len));
            let m = DMatrix::from_fn(3, len, |i, t| (i * 1000 + t) as f64);
            let mut r = rng::substream(seed, &[]);
            let b = sb_resample(&m, p, &mut r).unwrap();
            for t in 0..len {
                let src = b[(0, t)] as usize;
                prop_assert_eq!(src, idx[t]);
                prop_assert_eq!(b[(1, t)], (1000 + src) as f64);
                prop_assert_eq!(b[(2, t)], (2000 + src) as f64);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn factor_bootstrap_stays_in_loading_span(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&any::<u64>(), |seed| {
            let loadings = DMatrix::from_fn(4, 1, |i, _| (i + 1) as f64);
            let factors = DMatrix::from_fn(1, 30, |_, t| (t as f64).sin());
            let probs = [0.3];
            let src = ResampleSource::Factors { loadings: &loadings, factors: &factors, probabilities: &probs };
            let x = src.draw(seed, 0).unwrap();
            for t in 0..30 {
                for i in 0..4 {
                    prop_assert!((x[(i, t)] - (i + 1) as f64 * x[(0, t)]).abs() < 1e-12);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn csv_round_trip_is_exact(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&matrix(3, 9), |m| {
            let p = TimeSeriesPanel::new(m.map(|v| v * 1.000_000_123_4)).unwrap();
            for o in [Orientation::RowsAreSeries, Orientation::RowsAreTime] {
                let mut buf = Vec::new();
                p.write_csv(&mut buf, o).unwrap();
                let q = parse_csv(std::str::from_utf8(&buf).unwrap(), o).unwrap();
                prop_assert_eq!(q.values(), p.values());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn centering_is_idempotent(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&matrix(4, 12), |m| {
            let c = TimeSeriesPanel::new(m).unwrap().center();
            let cc = c.center();
            prop_assert!((cc.values() - c.values()).amax() <= 1e-14 * (1.0 + c.values().amax()));
            for row in c.values().row_iter() {
                prop_assert!(row.sum().abs() <= 1e-10 * 12.0 * (1.0 + row.amax()));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every check with its name.
pub const ALL: &[(&str, fn(u32) -> Result<(), String>)] = &[
    ("haar_filters_are_orthonormal", haar_filters_are_orthonormal),
    ("g_ignores_constant_shifts", g_ignores_constant_shifts),
    ("g_scales_with_input", g_scales_with_input),
    ("cusum_ignores_constant_shifts", cusum_ignores_constant_shifts),
    ("constant_rows_have_zero_cusum", constant_rows_have_zero_cusum),
    ("dc_argmax_is_scale_invariant", dc_argmax_is_scale_invariant),
    ("dc_is_non_negative", dc_is_non_negative),
    ("decomposition_reconstructs_panel", decomposition_reconstructs_panel),
    ("bootstrap_blocks_are_circular_runs", bootstrap_blocks_are_circular_runs),
    ("factor_bootstrap_stays_in_loading_span", factor_bootstrap_stays_in_loading_span),
    ("csv_round_trip_is_exact", csv_round_trip_is_exact),
    ("centering_is_idempotent", centering_is_idempotent),
];
