use malgray_core::classifier::{dropout_mask, ClassifierConfig, ConvSpec, ModelState};
use malgray_core::rng;
use rand::Rng;

/// The reduced model: 8×8 input, two 4-filter convolutions, 2 classes.
pub fn reduced_config(seed: u64) -> ClassifierConfig {
    ClassifierConfig {
        input_width: 8,
        input_height: 8,
        conv: vec![ConvSpec { filters: 4, kernel: 3 }, ConvSpec { filters: 4, kernel: 3 }],
        pool_size: 2,
        pool_stride: 2,
        dropout: 0.5,
        dense: vec![6],
        classes: 2,
        l2: 0.01,
        learning_rate: 1e-3,
        batch_size: 4,
        epochs: 1,
        patience: 0,
        seed,
    }
}

/// Largest elementwise relative error per tensor between the analytic
/// gradient and central differences of the full loss (cross-entropy, L2
/// penalty, fixed dropout masks). Entries where both gradients are below
/// `floor` are compared against `floor` instead.
pub fn max_relative_errors(cfg: &ClassifierConfig, eps: f64, floor: f64) -> Vec<(String, f64)> {
    let model = ModelState::<f64>::init(cfg).unwrap();
    let mut rng = rng::seeded(cfg.seed, 99);
    let n = 3;
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..cfg.input_width * cfg.input_height).map(|_| rng.random::<f64>()).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
    let masks: Vec<Vec<f64>> = (0..n)
        .map(|_| dropout_mask(cfg.flatten_len(), cfg.dropout, &mut rng))
        .collect();
    let analytic = model.loss_and_gradients(&inputs, &labels, Some(&masks)).unwrap().grads;

    let mut out = Vec::new();
    for (t, grad) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for k in 0..grad.len() {
            let mut plus = model.clone();
            plus.params_mut()[t].data[k] += eps;
            let mut minus = model.clone();
            minus.params_mut()[t].data[k] -= eps;
            let lp = plus.batch_loss(&inputs, &labels, Some(&masks)).unwrap();
            let lm = minus.batch_loss(&inputs, &labels, Some(&masks)).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let a = grad[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
        out.push((model.params()[t].name.clone(), worst));
    }
    out
}
