//! Analytic BPTT gradients against central finite differences of an
//! independent forward pass.

use ampnet::dataset::WindowBatch;
use ampnet::model::{forward_batch, LstmParams, ModelConfig};
use ampnet::tensor::Rng;
use ampnet::train::{backprop_batch, mse_loss};

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn loss(p: &LstmParams, batch: &WindowBatch) -> f64 {
    mse_loss(&forward_batch(p, batch).unwrap(), batch.targets()).unwrap()
}

/// Worst relative error over every weight of one random network.
fn worst_error(cfg: ModelConfig, seed: u64) -> (f64, String) {
    let mut rng = Rng::new(seed);
    let n = cfg.param_count();
    let flat: Vec<f64> = (0..n).map(|_| rng.uniform(-0.8, 0.8).unwrap()).collect();
    let mut p = LstmParams::from_flat(cfg, flat).unwrap();
    let batch_size = 3;
    let data = (0..batch_size * cfg.window_len()).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
    let targets = (0..batch_size).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
    let batch = WindowBatch::new(batch_size, cfg.num_step, cfg.num_feature, data, targets).unwrap();

    let (_, grad) = backprop_batch(&p, &batch, 1.0, &mut rng).unwrap();
    let mut worst = (0.0, String::new());
    for i in 0..n {
        let w = p.as_slice()[i];
        p.as_mut_slice()[i] = w + EPS;
        let up = loss(&p, &batch);
        p.as_mut_slice()[i] = w - EPS;
        let down = loss(&p, &batch);
        p.as_mut_slice()[i] = w;
        let numeric = (up - down) / (2.0 * EPS);
        let analytic = grad.as_slice()[i];
        let rel = (analytic - numeric).abs() / numeric.abs().max(1e-8);
        if rel > worst.0 {
            worst = (rel, format!("{} analytic={analytic:e} numeric={numeric:e}", p.weight_path(i)));
        }
    }
    worst
}

#[test]
fn bptt_matches_finite_differences_on_grid() {
    let mut seed = 100;
    for num_hidden in [1, 4] {
        for num_step in [1, 3, 8] {
            for num_layer in [1, 2] {
                for num_feature in [1, 2] {
                    let cfg = ModelConfig {
                        num_step,
                        num_hidden,
                        num_layer,
                        num_feature,
                        sample_rate: 16_000,
                    };
                    seed += 1;
                    let (err, at) = worst_error(cfg, seed);
                    assert!(err < TOL, "{cfg:?}: relative error {err:e} at {at}");
                }
            }
        }
    }
}
