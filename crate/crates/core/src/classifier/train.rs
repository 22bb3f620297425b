use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng;

use super::model::{dropout_mask, image_input, ModelState};
use super::optim::Adam;
use super::scalar::Scalar;

/// A classifier input with its family index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub image: GrayImage,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// `epoch,loss,train_accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_accuracy\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:.6},{:.6}", e.epoch, e.loss, e.train_accuracy);
        }
        out
    }
}

/// One optimizer update on a mini-batch. Dropout masks are drawn from
/// `dropout_rng` when the model has a non-zero rate. Returns the batch loss
/// and the argmax predictions of the training pass.
pub fn backward_and_step<T: Scalar>(
    model: &mut ModelState<T>,
    inputs: &[Vec<T>],
    labels: &[usize],
    optimizer: &mut Adam<T>,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<(T, Vec<usize>)> {
    let rate = model.config().dropout;
    let masks: Option<Vec<Vec<T>>> = (rate > 0.0).then(|| {
        let flat = model.config().flatten_len();
        inputs.iter().map(|_| dropout_mask(flat, rate, dropout_rng)).collect()
    });
    let out = model.loss_and_gradients(inputs, labels, masks.as_deref())?;
    if !out.loss.is_finite() {
        return Err(Error::Numerics(format!("training loss is {:?}", out.loss)));
    }
    for (t, g) in model.params().iter().zip(&out.grads) {
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerics(format!("gradient of {} contains {:?}", t.name, bad)));
        }
    }
    optimizer.step(model.params_mut(), &out.grads);
    Ok((out.loss, out.predictions))
}

/// Mini-batch training with a seeded shuffle per epoch. Stops early once
/// the epoch loss has not improved for `patience` epochs.
pub fn train<T: Scalar>(mut model: ModelState<T>, dataset: &[LabeledSample]) -> Result<(ModelState<T>, TrainingLog)> {
    let cfg = model.config().clone();
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if let Some(s) = dataset.iter().find(|s| s.label >= cfg.classes) {
        return Err(Error::Label {
            label: s.label,
            classes: cfg.classes,
        });
    }
    if let Some(s) = dataset
        .iter()
        .find(|s| s.image.width() != cfg.input_width || s.image.height() != cfg.input_height)
    {
        return Err(Error::Shape {
            expected: format!("{}x{} image", cfg.input_width, cfg.input_height),
            actual: format!("{}x{}", s.image.width(), s.image.height()),
        });
    }

    let inputs: Vec<Vec<T>> = dataset.iter().map(|s| image_input(&s.image)).collect();
    let mut optimizer = Adam::new(T::lit(cfg.learning_rate as f64));
    let mut shuffle_rng = rng::seeded(cfg.seed, rng::stream_tag(b"shuffle"));
    let mut dropout_rng = rng::seeded(cfg.seed, rng::stream_tag(b"dropout"));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainingLog::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<T>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset[i].label).collect();
            let (loss, preds) = backward_and_step(&mut model, &batch, &labels, &mut optimizer, &mut dropout_rng)?;
            loss_sum += loss.to_f64() * chunk.len() as f64;
            correct += preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / dataset.len() as f64,
            train_accuracy: correct as f64 / dataset.len() as f64,
        };
        log::debug!("epoch {epoch}: loss {:.5} acc {:.4}", stats.loss, stats.train_accuracy);
        log.epochs.push(stats);

        if stats.loss < best - 1e-4 {
            best = stats.loss;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::config::{ClassifierConfig, ConvSpec};

    fn toy_config() -> ClassifierConfig {
        ClassifierConfig {
            input_width: 8,
            input_height: 8,
            conv: vec![ConvSpec { filters: 4, kernel: 3 }, ConvSpec { filters: 4, kernel: 2 }],
            dense: vec![8],
            classes: 2,
            dropout: 0.25,
            l2: 0.0,
            batch_size: 8,
            epochs: 20,
            patience: 0,
            seed: 9,
            ..Default::default()
        }
    }

    fn toy_set(n: usize) -> Vec<LabeledSample> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let base = if label == 0 { 30 } else { 220 };
                LabeledSample {
                    image: GrayImage::filled(8, 8, base + (i % 5) as u8),
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn separable_toy_is_learned() {
        let model = ModelState::<f32>::init(&toy_config()).unwrap();
        let (model, log) = train(model, &toy_set(40)).unwrap();
        assert!(log.epochs.len() <= 20);
        assert!(log.epochs.last().unwrap().train_accuracy >= 0.95, "{log:?}");
        // held-out intensities
        assert_eq!(model.predict(&GrayImage::filled(8, 8, 40)).unwrap().0, 0);
        assert_eq!(model.predict(&GrayImage::filled(8, 8, 210)).unwrap().0, 1);
    }

    #[test]
    fn training_is_reproducible() {
        let data = toy_set(16);
        let cfg = ClassifierConfig { epochs: 3, ..toy_config() };
        let (a, la) = train(ModelState::<f32>::init(&cfg).unwrap(), &data).unwrap();
        let (b, lb) = train(ModelState::<f32>::init(&cfg).unwrap(), &data).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let cfg = ClassifierConfig { epochs: 0, ..toy_config() };
        let init = ModelState::<f32>::init(&cfg).unwrap();
        let (out, log) = train(init.clone(), &toy_set(4)).unwrap();
        assert_eq!(out, init);
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn zero_learning_rate_freezes_params() {
        let cfg = ClassifierConfig { learning_rate: 0.0, epochs: 2, ..toy_config() };
        let init = ModelState::<f32>::init(&cfg).unwrap();
        let (out, _) = train(init.clone(), &toy_set(8)).unwrap();
        assert_eq!(out, init);
    }

    #[test]
    fn repeated_sample_loss_does_not_increase() {
        let cfg = ClassifierConfig { dropout: 0.0, l2: 0.01, ..toy_config() };
        let mut model = ModelState::<f64>::init(&cfg).unwrap();
        let x = vec![image_input::<f64>(&GrayImage::filled(8, 8, 150))];
        let mut opt = Adam::new(1e-3);
        let mut rng = rng::seeded(0, 0);
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let (loss, _) = backward_and_step(&mut model, &x, &[1], &mut opt, &mut rng).unwrap();
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn empty_dataset_is_config_error() {
        let model = ModelState::<f32>::init(&toy_config()).unwrap();
        assert!(matches!(train(model, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn log_csv_header() {
        let log = TrainingLog {
            epochs: vec![EpochStats { epoch: 1, loss: 0.5, train_accuracy: 1.0 }],
            stopped_early: false,
        };
        assert_eq!(log.to_csv(), "epoch,loss,train_accuracy\n1,0.500000,1.000000\n");
    }
}
