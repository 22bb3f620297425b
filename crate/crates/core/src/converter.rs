//! Raw bytes to grayscale image.
//!
//! Every byte becomes one pixel; the image width is picked from the file size
//! so that files of similar size produce images of similar aspect ratio.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::GrayImage;

const KB: u64 = 1024;

/// A binary file's content plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteStream {
    pub bytes: Vec<u8>,
    pub source_path: String,
    pub family_label: Option<String>,
}

impl ByteStream {
    pub fn new(bytes: Vec<u8>, source_path: impl Into<String>) -> Result<Self> {
        let source_path = source_path.into();
        if bytes.is_empty() {
            return Err(Error::EmptyInput(Some(PathBuf::from(source_path))));
        }
        Ok(Self {
            bytes,
            source_path,
            family_label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.family_label = Some(label.into());
        self
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.is_empty() {
            return Err(Error::EmptyInput(Some(path.to_path_buf())));
        }
        Ok(Self {
            bytes,
            source_path: path.display().to_string(),
            family_label: None,
        })
    }
}

/// File-size brackets to image widths. A bound of `None` is open-ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidthTable {
    rows: Vec<(Option<u64>, usize)>,
}

impl Default for WidthTable {
    fn default() -> Self {
        Self {
            rows: vec![
                (Some(10 * KB), 32),
                (Some(30 * KB), 64),
                (Some(60 * KB), 128),
                (Some(100 * KB), 256),
                (Some(200 * KB), 384),
                (Some(500 * KB), 512),
                (Some(1000 * KB), 768),
                (None, 1024),
            ],
        }
    }
}

impl WidthTable {
    /// Builds a table from `(inclusive upper bound, width)` rows. Bounds and
    /// widths must both strictly increase; sizes past the last bound get the
    /// last width.
    pub fn new(rows: Vec<(Option<u64>, usize)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("width table has no rows".into()));
        }
        for pair in rows.windows(2) {
            let ((lo, wa), (hi, wb)) = (pair[0], pair[1]);
            let bounds_ok = match (lo, hi) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if !bounds_ok || wa >= wb {
                return Err(Error::Config("width table rows must strictly increase".into()));
            }
        }
        if rows.iter().any(|&(_, w)| w == 0) {
            return Err(Error::Config("width table contains a zero width".into()));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[(Option<u64>, usize)] {
        &self.rows
    }
}

/// Each byte as its unsigned intensity.
pub fn bytes_to_pixels(stream: &ByteStream) -> Result<Vec<u8>> {
    if stream.bytes.is_empty() {
        return Err(Error::EmptyInput(Some(PathBuf::from(&stream.source_path))));
    }
    Ok(stream.bytes.clone())
}

/// Width of the first bracket whose upper bound is at least `file_size`.
pub fn select_width(file_size: u64, table: &WidthTable) -> usize {
    table
        .rows
        .iter()
        .find(|(bound, _)| bound.map_or(true, |b| file_size <= b))
        .or(table.rows.last())
        .map(|&(_, w)| w)
        .expect("width table is never empty")
}

/// Lays pixels out row-major at `width`; the last row is zero-padded.
pub fn reshape_to_image(pixels: &[u8], width: usize) -> Result<GrayImage> {
    if pixels.is_empty() {
        return Err(Error::EmptyInput(None));
    }
    if width == 0 {
        return Err(Error::Config("image width must be positive".into()));
    }
    let height = pixels.len().div_ceil(width);
    let mut buf = Vec::with_capacity(width * height);
    buf.extend_from_slice(pixels);
    buf.resize(width * height, 0);
    GrayImage::new(width, height, buf)
}

/// Full conversion of a byte stream using the given width table.
pub fn convert(stream: &ByteStream, table: &WidthTable) -> Result<GrayImage> {
    let pixels = bytes_to_pixels(stream)?;
    let width = select_width(pixels.len() as u64, table);
    reshape_to_image(&pixels, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(bytes: &[u8]) -> ByteStream {
        ByteStream::new(bytes.to_vec(), "mem").unwrap()
    }

    #[test]
    fn byte_values_are_unsigned() {
        assert_eq!(bytes_to_pixels(&stream(&[0b0110_0000])).unwrap(), vec![96]);
        assert_eq!(bytes_to_pixels(&stream(&[0x00])).unwrap(), vec![0]);
        assert_eq!(bytes_to_pixels(&stream(&[0xFF, 0x01])).unwrap(), vec![255, 1]);
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(matches!(ByteStream::new(vec![], "x"), Err(Error::EmptyInput(_))));
        let raw = ByteStream {
            bytes: vec![],
            source_path: "x".into(),
            family_label: None,
        };
        assert!(matches!(bytes_to_pixels(&raw), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn width_brackets() {
        let t = WidthTable::default();
        assert_eq!(select_width(50_000, &t), 128);
        assert_eq!(select_width(1, &t), 32);
        assert_eq!(select_width(2_000_000, &t), 1024);
        // upper bounds are inclusive
        assert_eq!(select_width(10 * 1024, &t), 32);
        assert_eq!(select_width(10 * 1024 + 1, &t), 64);
        assert_eq!(select_width(1000 * 1024, &t), 768);
        assert_eq!(select_width(1000 * 1024 + 1, &t), 1024);
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(WidthTable::new(vec![]).is_err());
        assert!(WidthTable::new(vec![(Some(10), 64), (Some(20), 32)]).is_err());
        assert!(WidthTable::new(vec![(None, 64), (Some(20), 128)]).is_err());
        assert!(WidthTable::new(vec![(Some(10), 32), (None, 64)]).is_ok());
    }

    #[test]
    fn reshape_pads_last_row() {
        let px: Vec<u8> = (0..50_000u32).map(|i| (i % 251) as u8 + 1).collect();
        let img = reshape_to_image(&px, 128).unwrap();
        assert_eq!((img.width(), img.height()), (128, 391));
        assert_eq!(&img.pixels()[..50_000], &px[..]);
        assert_eq!(img.pixels()[50_000..].len(), 48);
        assert!(img.pixels()[50_000..].iter().all(|&p| p == 0));

        let img = reshape_to_image(&[7; 64], 64).unwrap();
        assert_eq!((img.width(), img.height()), (64, 1));

        let img = reshape_to_image(&[10, 20, 30], 2).unwrap();
        assert_eq!(img.pixels(), &[10, 20, 30, 0]);
        assert_eq!(img.height(), 2);
    }

    proptest! {
        #[test]
        fn reshape_keeps_every_byte(bytes in proptest::collection::vec(any::<u8>(), 1..5000), w in 1usize..300) {
            let img = reshape_to_image(&bytes, w).unwrap();
            prop_assert_eq!(img.height(), bytes.len().div_ceil(w));
            prop_assert_eq!(&img.pixels()[..bytes.len()], &bytes[..]);
        }

        #[test]
        fn width_is_monotone(a in 1u64..3_000_000, b in 1u64..3_000_000) {
            let t = WidthTable::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(select_width(lo, &t) <= select_width(hi, &t));
        }
    }
}
