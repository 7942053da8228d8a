//! Monte-Carlo oracles that tie the statistics and estimators to their
//! sampled distributions at moderate scale.

use fracwave::estimators::{asymptotic_se, estimate_bar, estimate_hat, Method};
use fracwave::{sample_batch, v_stat, Filter, WaveModel};
use rayon::prelude::*;

#[test]
fn centered_variation_has_mean_zero() {
    // E[V] = 0 by construction; sample mean within 4 standard errors.
    let model = WaveModel::new(0.7, 3.0).unwrap();
    let f = Filter::new(&[1.0, -1.0]).unwrap();
    let reps = 2000;
    let slices = sample_batch(&model, 500, reps, 314).unwrap();
    let vs: Vec<f64> = slices
        .par_iter()
        .map(|s| v_stat(s, &f, 2).unwrap().v)
        .collect();
    let mean = vs.iter().sum::<f64>() / reps as f64;
    let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!(mean.abs() < 4.0 * se, "mean {mean} vs se {se}");
}

#[test]
fn asymptotic_se_coverage() {
    // |H_hat - H| <= 1.96 se in 90-99% of runs (H = 0.6, N = 1000, (1,-1)).
    let h = 0.6;
    let model = WaveModel::new(h, 3.0).unwrap();
    let f = Filter::new(&[1.0, -1.0]).unwrap();
    let n = 1000;
    let reps = 500;
    let se = asymptotic_se(Method::Hat, h, 3.0, &f, 2, n).unwrap();
    let slices = sample_batch(&model, n, reps, 2718).unwrap();
    let covered = slices
        .par_iter()
        .filter(|s| {
            let est = estimate_hat(s, &f, 2, 3.0).unwrap();
            (est.h_raw - h).abs() <= 1.96 * se
        })
        .count();
    let rate = covered as f64 / reps as f64;
    assert!(
        (0.90..=0.99).contains(&rate),
        "coverage {rate} with se {se}"
    );
}

#[test]
fn bar_and_hat_stay_close() {
    // The two inversions are asymptotically equal; paired gap below 5e-3 at
    // N = 1000 across the benchmark grid.
    let f = Filter::new(&[1.0, -2.0, 1.0]).unwrap();
    for h in [0.51, 0.7, 0.95] {
        let model = WaveModel::new(h, 3.0).unwrap();
        let slices = sample_batch(&model, 1000, 50, 1618).unwrap();
        for s in &slices {
            let hat = estimate_hat(s, &f, 2, 3.0).unwrap();
            let bar = estimate_bar(s, &f, 2, 3.0).unwrap();
            assert!(
                (hat.h_raw - bar.h_raw).abs() <= 5e-3,
                "H={h}: hat {} vs bar {}",
                hat.h_raw,
                bar.h_raw
            );
        }
    }
}

#[test]
fn mse_shrinks_with_n() {
    // Strong consistency: quadrupling N shrinks the MSE for every estimator.
    use fracwave::experiments::{run_mc, table1_cells, ExperimentConfig};
    let mse_at = |n: usize| {
        let cfg = ExperimentConfig {
            h_true: 0.7,
            t: 3.0,
            n,
            iterations: 200,
            seed: 775,
            k: 2,
            cells: table1_cells(),
        };
        run_mc(&cfg)
            .unwrap()
            .cells
            .iter()
            .map(|c| c.mse)
            .collect::<Vec<f64>>()
    };
    let coarse = mse_at(250);
    let fine = mse_at(1000);
    for (i, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        assert!(
            f < c,
            "cell {i}: mse({c:.3e}) -> mse({f:.3e}) did not shrink"
        );
    }
}

#[test]
fn batch_report_insensitive_to_thread_count() {
    // Same seed, different rayon pools: byte-identical aggregates.
    use fracwave::experiments::{run_mc, table1_cells, ExperimentConfig};
    let cfg = ExperimentConfig {
        h_true: 0.6,
        t: 3.0,
        n: 300,
        iterations: 16,
        seed: 52,
        k: 2,
        cells: table1_cells(),
    };
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_mc(&cfg).unwrap());
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| run_mc(&cfg).unwrap());
    for (a, b) in single.cells.iter().zip(&multi.cells) {
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        for (ea, eb) in a.estimates.iter().zip(&b.estimates) {
            assert_eq!(ea.h_raw.to_bits(), eb.h_raw.to_bits());
        }
    }
}
