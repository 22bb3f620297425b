//! Model container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      b"MGCNN\0"
//! version    u32 (= 1)
//! config     input_width u32, input_height u32,
//!            n_conv u32, then (filters u32, kernel u32) per conv layer,
//!            pool_size u32, pool_stride u32, dropout f32,
//!            n_dense u32, then width u32 per hidden dense layer,
//!            classes u32, l2 f32, learning_rate f32,
//!            batch_size u32, epochs u32, patience u32, seed u64
//! labels     n u32, then (len u32, utf-8 bytes) per label
//! tensors    n u32, then per tensor:
//!            name_len u16, name utf-8, ndim u8, dims u32 * ndim,
//!            payload f32 * product(dims)
//! ```

use std::io::{Cursor, Read};
use std::path::Path;

use crate::error::{Error, Result};

use super::config::{ClassifierConfig, ConvSpec};
use super::model::{ModelState, Tensor};

pub const MAGIC: &[u8; 6] = b"MGCNN\0";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a>(Cursor<&'a [u8]>);

fn truncated() -> Error {
    Error::Format("model file is truncated".into())
}

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|_| truncated())?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }
    fn string(&mut self, len: usize) -> Result<String> {
        let remaining = self.0.get_ref().len() as u64 - self.0.position();
        if len as u64 > remaining {
            return Err(truncated());
        }
        let mut buf = vec![0u8; len];
        self.0.read_exact(&mut buf).map_err(|_| truncated())?;
        String::from_utf8(buf).map_err(|_| Error::Format("invalid utf-8 in model file".into()))
    }
    fn at_end(&self) -> bool {
        self.0.position() as usize == self.0.get_ref().len()
    }
}

/// Serializes a model to bytes.
pub fn encode_model(model: &ModelState<f32>) -> Vec<u8> {
    let cfg = model.config();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(cfg.input_width);
    w.u32(cfg.input_height);
    w.u32(cfg.conv.len());
    for c in &cfg.conv {
        w.u32(c.filters);
        w.u32(c.kernel);
    }
    w.u32(cfg.pool_size);
    w.u32(cfg.pool_stride);
    w.f32(cfg.dropout);
    w.u32(cfg.dense.len());
    for &d in &cfg.dense {
        w.u32(d);
    }
    w.u32(cfg.classes);
    w.f32(cfg.l2);
    w.f32(cfg.learning_rate);
    w.u32(cfg.batch_size);
    w.u32(cfg.epochs);
    w.u32(cfg.patience);
    w.u64(cfg.seed);

    w.u32(model.labels().len());
    for l in model.labels() {
        w.u32(l.len());
        w.0.extend_from_slice(l.as_bytes());
    }

    w.u32(model.params().len());
    for t in model.params() {
        w.u16(t.name.len() as u16);
        w.0.extend_from_slice(t.name.as_bytes());
        w.u8(t.shape.len() as u8);
        for &d in &t.shape {
            w.u32(d);
        }
        for &v in &t.data {
            w.f32(v);
        }
    }
    w.0
}

/// Parses a model container. Structural problems are `Format` errors; a
/// well-formed file whose tensors disagree with its own header is a
/// `Config` error.
pub fn decode_model(bytes: &[u8]) -> Result<ModelState<f32>> {
    let mut r = Reader(Cursor::new(bytes));
    let magic: [u8; 6] = r.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let input_width = r.u32()?;
    let input_height = r.u32()?;
    let n_conv = r.u32()?;
    if n_conv > 1024 {
        return Err(Error::Format("implausible layer count".into()));
    }
    let mut conv = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        let filters = r.u32()?;
        let kernel = r.u32()?;
        conv.push(ConvSpec { filters, kernel });
    }
    let pool_size = r.u32()?;
    let pool_stride = r.u32()?;
    let dropout = r.f32()?;
    let n_dense = r.u32()?;
    if n_dense > 1024 {
        return Err(Error::Format("implausible layer count".into()));
    }
    let dense = (0..n_dense).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let config = ClassifierConfig {
        input_width,
        input_height,
        conv,
        pool_size,
        pool_stride,
        dropout,
        dense,
        classes: r.u32()?,
        l2: r.f32()?,
        learning_rate: r.f32()?,
        batch_size: r.u32()?,
        epochs: r.u32()?,
        patience: r.u32()?,
        seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("invalid stored config: {e}")))?;

    let n_labels = r.u32()?;
    if n_labels > config.classes {
        return Err(Error::Format("more labels than classes".into()));
    }
    let mut labels = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        let len = r.u32()?;
        labels.push(r.string(len)?);
    }

    let n_tensors = r.u32()?;
    if n_tensors > 4096 {
        return Err(Error::Format("implausible tensor count".into()));
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let name_len = r.u16()? as usize;
        let name = r.string(name_len)?;
        let ndim = r.u8()? as usize;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor too large".into()))?;
        let remaining = bytes.len() - r.0.position() as usize;
        if count.checked_mul(4).is_none_or(|n| n > remaining) {
            return Err(truncated());
        }
        let data = (0..count).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor { name, shape, data });
    }
    if !r.at_end() {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    ModelState::from_tensors(&config, tensors, labels)
}

pub fn save_model(model: &ModelState<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Loads a model and checks that it has the architecture of `expected`.
pub fn load_model_for(path: impl AsRef<Path>, expected: &ClassifierConfig) -> Result<ModelState<f32>> {
    let model = load_model(path)?;
    if !model.config().same_architecture(expected) {
        return Err(Error::Config(format!(
            "model architecture {:?} does not match configured {:?}",
            model.config(),
            expected
        )));
    }
    Ok(model)
}
