mod common;

use rand::Rng;

use common::{model_gradient_check, rng};
use qnas::circuit::{build_initial_genome, init_params};
use qnas::nn::{mse_loss, Adam, AdamConfig, HybridAutoencoder, ModelShape};

const TINY: ModelShape = ModelShape {
    input_dim: 8,
    hidden: 6,
    n_qubits: 2,
};

fn tiny_model(seed: u64) -> HybridAutoencoder {
    let mut r = rng(seed);
    let genome = build_initial_genome(2, 1).unwrap();
    let q = init_params(genome.n_params(), &mut r);
    HybridAutoencoder::new(TINY, genome, q, &mut r).unwrap()
}

fn tiny_batch(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..8).map(|_| r.random_range(0.0..1.0)).collect())
        .collect()
}

/// Low-dimensional patterns: two bright pixels out of eight, chosen from four templates.
fn structured_batch(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let k = i % 4;
            (0..8).map(|p| if p / 2 == k { 0.95 } else { 0.05 }).collect()
        })
        .collect()
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    for seed in [0, 1, 2] {
        let m = tiny_model(seed);
        let batch = tiny_batch(3, 10 + seed);
        let (worst, count) = model_gradient_check(&m, &batch, 1e-4, 1e-6);
        assert_eq!(count, 48 + 6 + 12 + 2 + 2 + 12 + 6 + 48 + 8);
        assert!(worst < 1e-3, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let m = tiny_model(4);
    let batch = tiny_batch(4, 5);
    let (loss, g) = m.batch_gradients(&batch).unwrap();
    let mut sum = m.zero_grads();
    let mut loss_sum = 0.0;
    for x in &batch {
        let (l, gi) = m.batch_gradients(std::slice::from_ref(x)).unwrap();
        sum.add_assign(&gi);
        loss_sum += l;
    }
    sum.scale(0.25);
    assert!((loss - loss_sum / 4.0).abs() < 1e-12);
    for (a, b) in g.tensors().iter().zip(sum.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn loss_is_nonnegative_and_zero_only_on_equality() {
    let batch = tiny_batch(5, 3);
    let recon: Vec<Vec<f64>> = batch.iter().map(|x| x.iter().map(|v| v * 0.9).collect()).collect();
    assert!(mse_loss(&recon, &batch).unwrap() > 0.0);
    assert_eq!(mse_loss(&batch, &batch).unwrap(), 0.0);
}

#[test]
fn tiny_model_learns_fixed_dataset() {
    let mut m = tiny_model(0);
    let data = structured_batch(16);
    // 200 steps at the default 1e-3 rate cannot move the output logits far
    // enough for a 50% drop; the smoke check uses 1e-2.
    let cfg = AdamConfig {
        learning_rate: 1e-2,
        ..AdamConfig::default()
    };
    let mut opt = Adam::new(cfg, &m.tensor_lens());
    let initial = m.evaluate(&data).unwrap();
    for _ in 0..200 {
        let (_, g) = m.batch_gradients(&data).unwrap();
        opt.step(&mut m.tensors_mut(), &g.tensors()).unwrap();
    }
    let fin = m.evaluate(&data).unwrap();
    assert!(fin <= 0.5 * initial, "loss {initial} -> {fin}");
    assert_eq!(opt.steps(), 200);
}
