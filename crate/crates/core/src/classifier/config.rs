use crate::error::{Error, Result};

/// One convolution stage: `filters` output channels, square `kernel`,
/// stride 1 and "same" zero padding. Every stage is followed by ReLU and a
/// max-pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub input_width: usize,
    pub input_height: usize,
    pub conv: Vec<ConvSpec>,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dropout: f32,
    /// Hidden dense widths; the output layer (`classes` wide) is implicit.
    pub dense: Vec<usize>,
    pub classes: usize,
    /// Factor on the summed squared convolution kernels added to the loss.
    pub l2: f32,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a training-loss improvement;
    /// 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            input_width: 64,
            input_height: 64,
            conv: vec![
                ConvSpec { filters: 64, kernel: 5 },
                ConvSpec { filters: 128, kernel: 5 },
                ConvSpec { filters: 256, kernel: 2 },
                ConvSpec { filters: 256, kernel: 2 },
            ],
            pool_size: 2,
            pool_stride: 2,
            dropout: 0.5,
            dense: vec![256, 128],
            classes: 25,
            l2: 0.01,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 30,
            patience: 3,
            seed: 0,
        }
    }
}

/// Spatial shape `(channels, height, width)` of a feature map.
pub type MapShape = (usize, usize, usize);

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.input_width == 0 || self.input_height == 0 {
            return bad("input size must be positive");
        }
        if self.conv.is_empty() {
            return bad("at least one convolution layer is required");
        }
        if self.conv.iter().any(|c| c.filters == 0 || c.kernel == 0) {
            return bad("convolution filters and kernels must be positive");
        }
        if self.pool_size == 0 || self.pool_stride == 0 {
            return bad("pool size and stride must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout rate must be in [0, 1)");
        }
        if self.dense.contains(&0) {
            return bad("dense widths must be positive");
        }
        if self.classes == 0 {
            return bad("class count must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 factor must be non-negative");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    /// Output length of a "same"-padded pool over `len` inputs.
    pub fn pooled_len(&self, len: usize) -> usize {
        len.div_ceil(self.pool_stride)
    }

    /// Feature map shapes after each conv+pool stage, starting with the input.
    pub fn stage_shapes(&self) -> Vec<MapShape> {
        let mut shapes = vec![(1, self.input_height, self.input_width)];
        let (mut h, mut w) = (self.input_height, self.input_width);
        for c in &self.conv {
            h = self.pooled_len(h);
            w = self.pooled_len(w);
            shapes.push((c.filters, h, w));
        }
        shapes
    }

    pub fn flatten_len(&self) -> usize {
        let (c, h, w) = *self.stage_shapes().last().expect("input shape");
        c * h * w
    }

    /// `(inputs, outputs)` of every dense layer including the output layer.
    pub fn dense_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.flatten_len()];
        widths.extend(&self.dense);
        widths.push(self.classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Whether two configs describe the same parameter tensors.
    pub fn same_architecture(&self, other: &Self) -> bool {
        self.input_width == other.input_width
            && self.input_height == other.input_height
            && self.conv == other.conv
            && self.pool_size == other.pool_size
            && self.pool_stride == other.pool_stride
            && self.dense == other.dense
            && self.classes == other.classes
    }
}
