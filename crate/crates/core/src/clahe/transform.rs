use std::io::Write;

use crate::image::GrayImage;

use super::grid::{RegionGrid, Span};

/// Interpolation anchor along one axis: blend regions `lo` and `hi` with
/// weights `w_lo / den` and `w_hi / den`. Outside the outermost centers
/// `lo == hi` and `w_hi == 0`.
#[derive(Debug, Clone, Copy)]
struct AxisWeight {
    lo: usize,
    hi: usize,
    w_lo: u64,
    w_hi: u64,
    den: u64,
}

fn axis_weights(len: usize, spans: &[Span]) -> Vec<AxisWeight> {
    let centers: Vec<u64> = spans.iter().map(|s| s.center2() as u64).collect();
    let last = centers.len() - 1;
    let mut j = 0;
    (0..len)
        .map(|p| {
            let p2 = 2 * p as u64;
            if p2 <= centers[0] {
                return AxisWeight { lo: 0, hi: 0, w_lo: 1, w_hi: 0, den: 1 };
            }
            if p2 >= centers[last] {
                return AxisWeight { lo: last, hi: last, w_lo: 1, w_hi: 0, den: 1 };
            }
            while centers[j + 1] <= p2 {
                j += 1;
            }
            AxisWeight {
                lo: j,
                hi: j + 1,
                w_lo: centers[j + 1] - p2,
                w_hi: p2 - centers[j],
                den: centers[j + 1] - centers[j],
            }
        })
        .collect()
}

/// Maps every pixel through the region tables.
///
/// Pixels beyond the outermost region centers on both axes use their own
/// region's table; pixels beyond them on one axis blend the two neighboring
/// tables linearly; all others blend the four surrounding tables
/// bilinearly. Weights come from the pixel position relative to the region
/// centers and every table is evaluated at the pixel's own value. The
/// arithmetic is exact and rounds half up.
pub fn transform_image(img: &GrayImage, grid: &RegionGrid) -> GrayImage {
    let layout = &grid.layout;
    let a = layout.a();
    let xs = axis_weights(img.width(), &layout.cols);
    let ys = axis_weights(img.height(), &layout.rows);

    let mut luts = vec![0u8; grid.regions.len() * 256];
    for (i, r) in grid.regions.iter().enumerate() {
        let t = r.mapping.table();
        luts[i * 256..i * 256 + t.len()].copy_from_slice(t);
    }
    let lut = |region: usize, v: u8| luts[region * 256 + v as usize] as u64;

    let mut out = Vec::with_capacity(img.width() * img.height());
    for (y, wy) in ys.iter().enumerate() {
        let top = wy.lo * a;
        let bottom = wy.hi * a;
        for (&v, wx) in img.row(y).iter().zip(&xs) {
            let upper = wx.w_lo * lut(top + wx.lo, v) + wx.w_hi * lut(top + wx.hi, v);
            let lower = wx.w_lo * lut(bottom + wx.lo, v) + wx.w_hi * lut(bottom + wx.hi, v);
            let num = wy.w_lo * upper + wy.w_hi * lower;
            let den = wx.den * wy.den;
            out.push(((2 * num + den) / (2 * den)) as u8);
        }
    }
    GrayImage::new(img.width(), img.height(), out).expect("same shape as input")
}

/// Dumps the per-region tables as CSV: one row per region index followed by
/// the mapped value of every input level.
pub fn write_mapping_csv<W: Write>(grid: &RegionGrid, mut w: W) -> std::io::Result<()> {
    write!(w, "region")?;
    for v in 0..256 {
        write!(w, ",v{v}")?;
    }
    writeln!(w)?;
    for (i, r) in grid.regions.iter().enumerate() {
        write!(w, "{i}")?;
        for m in r.mapping.table() {
            write!(w, ",{m}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
