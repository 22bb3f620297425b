//! Lossless grayscale PNG I/O with fixed encoder settings, so identical
//! images always produce identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

fn encode_into<W: Write>(img: &GrayImage, w: W) -> std::result::Result<(), png::EncodingError> {
    let mut enc = png::Encoder::new(w, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Balanced);
    enc.set_filter(png::Filter::Sub);
    let mut writer = enc.write_header()?;
    writer.write_image_data(img.pixels())?;
    writer.finish()
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_into(img, &mut out).map_err(|e| Error::Format(format!("png encode: {e}")))?;
    Ok(out)
}

pub fn write_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_into(img, &mut w).map_err(|e| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("png encode {}: {other}", path.display())),
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn decode<R: std::io::BufRead + std::io::Seek>(r: R) -> Result<GrayImage> {
    let decoder = png::Decoder::new(r);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "expected 8-bit single-channel PNG, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    buf.truncate(frame.buffer_size());
    GrayImage::new(frame.width as usize, frame.height as usize, buf)
}

pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    decode(Cursor::new(bytes))
}

pub fn read_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(BufReader::new(file)).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..w * h).map(|_| rng.random()).collect();
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(128, 391, 1);
        let path = dir.path().join("a.png");
        write_png(&img, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }

    #[test]
    fn encoding_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(64, 40, 2);
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        write_png(&img, &a).unwrap();
        write_png(&img, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        assert_eq!(encode_png(&img).unwrap(), encode_png(&img).unwrap());
    }

    #[test]
    fn rgb_png_is_rejected() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 2, 2);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0u8; 12]).unwrap();
        w.finish().unwrap();
        assert!(matches!(decode_png(&out), Err(Error::Format(_))));
    }

    #[test]
    fn garbage_is_format_error() {
        assert!(matches!(decode_png(b"not a png"), Err(Error::Format(_))));
        assert!(matches!(read_png("/nonexistent/x.png"), Err(Error::Io { .. })));
    }
}
