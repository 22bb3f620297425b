use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng;

use super::config::ClassifierConfig;
use super::layers::{col2im, conv_backward, conv_forward, im2col, max_pool, max_pool_backward, relu_inplace, softmax};
use super::scalar::Scalar;

/// Lower clamp for probabilities inside the log of the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// A named parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name,
            shape,
            data: vec![T::zero(); n],
        }
    }
}

/// Learned parameters plus the configuration that shapes them.
///
/// Parameters are stored as `conv{i}.weight` `[filters, in_channels, k, k]`,
/// `conv{i}.bias`, then `dense{j}.weight` `[outputs, inputs]` and
/// `dense{j}.bias`, the last dense layer being the softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T: Scalar = f32> {
    config: ClassifierConfig,
    params: Vec<Tensor<T>>,
    labels: Vec<String>,
}

/// Everything a single forward pass keeps for the backward pass.
struct Trace<T> {
    conv_cols: Vec<Vec<T>>,
    conv_pre: Vec<Vec<T>>,
    pool_arg: Vec<Vec<u32>>,
    mask: Option<Vec<T>>,
    dense_in: Vec<Vec<T>>,
    dense_pre: Vec<Vec<T>>,
    probs: Vec<T>,
}

/// Result of one loss/gradient evaluation over a batch.
#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    pub loss: T,
    /// One gradient buffer per parameter tensor, same order and length.
    pub grads: Vec<Vec<T>>,
    /// Argmax class per sample under the evaluated pass.
    pub predictions: Vec<usize>,
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Scales pixels into `[0, 1]`.
pub fn image_input<T: Scalar>(img: &GrayImage) -> Vec<T> {
    let scale = T::lit(1.0 / 255.0);
    img.pixels().iter().map(|&p| T::lit(p as f64) * scale).collect()
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f32, rng: &mut ChaCha8Rng) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate as f64));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate as f64 { T::zero() } else { keep })
        .collect()
}

/// Mean cross-entropy of `probs` against one-hot `targets`, plus `l2` times
/// the summed squared convolution kernels of `model`.
pub fn loss<T: Scalar>(probs: &[Vec<T>], targets: &[Vec<T>], model: &ModelState<T>, l2: T) -> T {
    let floor = T::lit(LOG_FLOOR);
    let mut total = T::zero();
    for (p, y) in probs.iter().zip(targets) {
        for (&pi, &yi) in p.iter().zip(y) {
            if yi != T::zero() {
                total -= yi * pi.max(floor).ln();
            }
        }
    }
    let n = T::lit(probs.len().max(1) as f64);
    total / n + l2 * model.conv_kernel_sq_sum()
}

impl<T: Scalar> ModelState<T> {
    fn empty(config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let shapes = config.stage_shapes();
        let mut params = Vec::new();
        for (i, spec) in config.conv.iter().enumerate() {
            let in_ch = shapes[i].0;
            params.push(Tensor::zeros(
                format!("conv{i}.weight"),
                vec![spec.filters, in_ch, spec.kernel, spec.kernel],
            ));
            params.push(Tensor::zeros(format!("conv{i}.bias"), vec![spec.filters]));
        }
        for (j, (inputs, outputs)) in config.dense_shapes().into_iter().enumerate() {
            params.push(Tensor::zeros(format!("dense{j}.weight"), vec![outputs, inputs]));
            params.push(Tensor::zeros(format!("dense{j}.bias"), vec![outputs]));
        }
        Ok(Self {
            config: config.clone(),
            params,
            labels: Vec::new(),
        })
    }

    /// All weights and biases zero.
    pub fn zeros(config: &ClassifierConfig) -> Result<Self> {
        Self::empty(config)
    }

    /// He-uniform kernels (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`) and zero
    /// biases, drawn from `config.seed`.
    pub fn init(config: &ClassifierConfig) -> Result<Self> {
        let mut model = Self::empty(config)?;
        let mut rng = rng::seeded(config.seed, rng::stream_tag(b"init"));
        for t in model.params.iter_mut().filter(|t| t.name.ends_with(".weight")) {
            let fan_in: usize = t.shape[1..].iter().product();
            let limit = (6.0 / fan_in as f64).sqrt();
            for w in t.data.iter_mut() {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_tensors(config: &ClassifierConfig, tensors: Vec<Tensor<T>>, labels: Vec<String>) -> Result<Self> {
        let mut model = Self::empty(config)?;
        if tensors.len() != model.params.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                tensors.len()
            )));
        }
        for (slot, t) in model.params.iter_mut().zip(tensors) {
            if slot.name != t.name || slot.shape != t.shape || t.data.len() != slot.data.len() {
                return Err(Error::Config(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, slot.name, slot.shape
                )));
            }
            *slot = t;
        }
        model.set_labels(labels)?;
        Ok(model)
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    /// Family names by class index; empty when unnamed.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if !labels.is_empty() && labels.len() != self.config.classes {
            return Err(Error::Config(format!(
                "{} labels for {} classes",
                labels.len(),
                self.config.classes
            )));
        }
        self.labels = labels;
        Ok(())
    }

    pub fn label_name(&self, class: usize) -> String {
        self.labels
            .get(class)
            .cloned()
            .unwrap_or_else(|| format!("class_{class}"))
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    pub fn output_width(&self) -> usize {
        self.config.classes
    }

    fn n_conv(&self) -> usize {
        self.config.conv.len()
    }

    pub fn conv_kernel_sq_sum(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n_conv() {
            for &w in &self.params[2 * i].data {
                s += w * w;
            }
        }
        s
    }

    fn input_len(&self) -> usize {
        self.config.input_width * self.config.input_height
    }

    fn check_image(&self, img: &GrayImage) -> Result<()> {
        if img.width() != self.config.input_width || img.height() != self.config.input_height {
            return Err(Error::Shape {
                expected: format!("{}x{} image", self.config.input_width, self.config.input_height),
                actual: format!("{}x{}", img.width(), img.height()),
            });
        }
        Ok(())
    }

    fn forward_sample(&self, input: &[T], mask: Option<&[T]>, keep: bool) -> Trace<T> {
        let cfg = &self.config;
        let shapes = cfg.stage_shapes();
        let mut trace = Trace {
            conv_cols: Vec::new(),
            conv_pre: Vec::new(),
            pool_arg: Vec::new(),
            mask: None,
            dense_in: Vec::new(),
            dense_pre: Vec::new(),
            probs: Vec::new(),
        };

        let mut x = input.to_vec();
        let (mut h, mut w) = (cfg.input_height, cfg.input_width);
        for (i, spec) in cfg.conv.iter().enumerate() {
            let in_ch = shapes[i].0;
            let patch = in_ch * spec.kernel * spec.kernel;
            let hw = h * w;
            let mut cols = vec![T::zero(); patch * hw];
            im2col(&x, in_ch, h, w, spec.kernel, &mut cols);
            let mut z = vec![T::zero(); spec.filters * hw];
            conv_forward(&self.params[2 * i].data, &self.params[2 * i + 1].data, &cols, spec.filters, patch, hw, &mut z);
            let mut act = z.clone();
            relu_inplace(&mut act);
            let (pooled, arg) = max_pool(&act, spec.filters, h, w, cfg.pool_size, cfg.pool_stride);
            if keep {
                trace.conv_cols.push(cols);
                trace.conv_pre.push(z);
                trace.pool_arg.push(arg);
            }
            x = pooled;
            h = cfg.pooled_len(h);
            w = cfg.pooled_len(w);
        }

        if let Some(m) = mask {
            for (v, &k) in x.iter_mut().zip(m) {
                *v *= k;
            }
            if keep {
                trace.mask = Some(m.to_vec());
            }
        }

        let dense = cfg.dense_shapes();
        let last = dense.len() - 1;
        for (j, &(inputs, outputs)) in dense.iter().enumerate() {
            let wt = &self.params[2 * self.n_conv() + 2 * j];
            let bias = &self.params[2 * self.n_conv() + 2 * j + 1];
            let mut z = bias.data.clone();
            T::gemm(outputs, inputs, 1, T::one(), &wt.data, inputs as isize, 1, &x, 1, 1, T::one(), &mut z, 1, 1);
            if keep {
                trace.dense_in.push(std::mem::take(&mut x));
            }
            if j == last {
                trace.probs = softmax(&z);
            } else {
                let mut a = z.clone();
                relu_inplace(&mut a);
                if keep {
                    trace.dense_pre.push(z);
                }
                x = a;
            }
        }
        trace
    }

    /// Accumulates `scale * d(CE)/d(params)` for one traced sample.
    fn backward_sample(&self, trace: &Trace<T>, label: usize, scale: T, grads: &mut [Vec<T>]) {
        let cfg = &self.config;
        let nc = self.n_conv();
        let dense = cfg.dense_shapes();

        let mut dz: Vec<T> = trace.probs.iter().map(|&p| p * scale).collect();
        dz[label] -= scale;

        for j in (0..dense.len()).rev() {
            let (inputs, outputs) = dense[j];
            let wi = 2 * nc + 2 * j;
            let x = &trace.dense_in[j];
            for (g, &d) in grads[wi + 1].iter_mut().zip(&dz) {
                *g += d;
            }
            T::gemm(outputs, 1, inputs, T::one(), &dz, 1, 1, x, inputs as isize, 1, T::one(), &mut grads[wi], inputs as isize, 1);
            let mut dx = vec![T::zero(); inputs];
            T::gemm(inputs, outputs, 1, T::one(), &self.params[wi].data, 1, inputs as isize, &dz, 1, 1, T::zero(), &mut dx, 1, 1);
            if j > 0 {
                for (d, &z) in dx.iter_mut().zip(&trace.dense_pre[j - 1]) {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            dz = dx;
        }

        if let Some(mask) = &trace.mask {
            for (d, &m) in dz.iter_mut().zip(mask) {
                *d *= m;
            }
        }

        let shapes = cfg.stage_shapes();
        let mut grad_pooled = dz;
        for i in (0..nc).rev() {
            let spec = cfg.conv[i];
            let (in_ch, h, w) = shapes[i];
            let hw = h * w;
            let patch = in_ch * spec.kernel * spec.kernel;
            let mut grad_act = vec![T::zero(); spec.filters * hw];
            max_pool_backward(&grad_pooled, &trace.pool_arg[i], &mut grad_act);
            for (g, &z) in grad_act.iter_mut().zip(&trace.conv_pre[i]) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            let (gw, rest) = grads[2 * i..].split_at_mut(1);
            let gb = &mut rest[0];
            if i > 0 {
                let mut dcols = vec![T::zero(); patch * hw];
                conv_backward(&self.params[2 * i].data, &trace.conv_cols[i], &grad_act, spec.filters, patch, hw, &mut gw[0], gb, Some(&mut dcols));
                let mut dx = vec![T::zero(); in_ch * hw];
                col2im(&dcols, in_ch, h, w, spec.kernel, &mut dx);
                grad_pooled = dx;
            } else {
                conv_backward(&self.params[2 * i].data, &trace.conv_cols[i], &grad_act, spec.filters, patch, hw, &mut gw[0], gb, None);
            }
        }
    }

    fn check_batch(&self, inputs: &[Vec<T>], labels: &[usize], masks: Option<&[Vec<T>]>) -> Result<()> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", inputs.len()),
                actual: format!("{} labels", labels.len()),
            });
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != self.input_len()) {
            return Err(Error::Shape {
                expected: format!("{} inputs", self.input_len()),
                actual: format!("{} inputs", bad.len()),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= self.config.classes) {
            return Err(Error::Label {
                label,
                classes: self.config.classes,
            });
        }
        if let Some(m) = masks {
            let flat = self.config.flatten_len();
            if m.len() != inputs.len() || m.iter().any(|v| v.len() != flat) {
                return Err(Error::Shape {
                    expected: format!("{} masks of length {flat}", inputs.len()),
                    actual: "mismatched dropout masks".into(),
                });
            }
        }
        Ok(())
    }

    /// Full loss (mean cross-entropy plus the L2 kernel penalty) and its
    /// gradient with respect to every parameter tensor. `masks` are
    /// per-sample dropout masks over the flattened features.
    pub fn loss_and_gradients(&self, inputs: &[Vec<T>], labels: &[usize], masks: Option<&[Vec<T>]>) -> Result<BatchGradients<T>> {
        self.check_batch(inputs, labels, masks)?;
        let mut grads: Vec<Vec<T>> = self.params.iter().map(|t| vec![T::zero(); t.data.len()]).collect();
        let n = inputs.len().max(1);
        let scale = T::lit(1.0 / n as f64);
        let floor = T::lit(LOG_FLOOR);
        let mut ce = T::zero();
        let mut predictions = Vec::with_capacity(inputs.len());
        for (s, (x, &label)) in inputs.iter().zip(labels).enumerate() {
            let mask = masks.map(|m| m[s].as_slice());
            let trace = self.forward_sample(x, mask, true);
            ce -= trace.probs[label].max(floor).ln();
            predictions.push(argmax(&trace.probs));
            self.backward_sample(&trace, label, scale, &mut grads);
        }
        let l2 = T::lit(self.config.l2 as f64);
        for i in 0..self.n_conv() {
            for (g, &w) in grads[2 * i].iter_mut().zip(&self.params[2 * i].data) {
                *g += T::lit(2.0) * l2 * w;
            }
        }
        Ok(BatchGradients {
            loss: ce * scale + l2 * self.conv_kernel_sq_sum(),
            grads,
            predictions,
        })
    }

    /// Loss only, same definition as [`Self::loss_and_gradients`].
    pub fn batch_loss(&self, inputs: &[Vec<T>], labels: &[usize], masks: Option<&[Vec<T>]>) -> Result<T> {
        self.check_batch(inputs, labels, masks)?;
        let floor = T::lit(LOG_FLOOR);
        let mut ce = T::zero();
        for (s, (x, &label)) in inputs.iter().zip(labels).enumerate() {
            let trace = self.forward_sample(x, masks.map(|m| m[s].as_slice()), false);
            ce -= trace.probs[label].max(floor).ln();
        }
        let n = T::lit(inputs.len().max(1) as f64);
        Ok(ce / n + T::lit(self.config.l2 as f64) * self.conv_kernel_sq_sum())
    }

    /// Class probabilities per image. Dropout is applied only when a
    /// generator is passed (training mode).
    pub fn forward(&self, images: &[GrayImage], mut dropout: Option<&mut ChaCha8Rng>) -> Result<Vec<Vec<T>>> {
        let flat = self.config.flatten_len();
        images
            .iter()
            .map(|img| {
                self.check_image(img)?;
                let input = image_input::<T>(img);
                let mask = match dropout.as_deref_mut() {
                    Some(rng) if self.config.dropout > 0.0 => Some(dropout_mask::<T>(flat, self.config.dropout, rng)),
                    _ => None,
                };
                Ok(self.forward_sample(&input, mask.as_deref(), false).probs)
            })
            .collect()
    }

    pub fn probabilities(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                expected: format!("{} inputs", self.input_len()),
                actual: format!("{} inputs", input.len()),
            });
        }
        Ok(self.forward_sample(input, None, false).probs)
    }

    /// Most probable class (lowest index on ties) and the distribution.
    pub fn predict(&self, img: &GrayImage) -> Result<(usize, Vec<T>)> {
        self.check_image(img)?;
        let probs = self.probabilities(&image_input::<T>(img))?;
        Ok((argmax(&probs), probs))
    }
}
