//! Naive per-pixel CLAHE, written directly from the definitions and sharing
//! no code with the library beyond the image type and the seed plumbing.

use malgray_core::clahe::{ClaheParams, ClipMode, ClipScale};
use malgray_core::{rng, GrayImage};
use rand::Rng;

const L: usize = 256;

/// Half-up rounding of a value known to be a ratio of small integers.
fn round_half_up(v: f64) -> u8 {
    (v + 0.5 + 1e-9).floor().clamp(0.0, 255.0) as u8
}

struct Layout {
    a: usize,
    b: usize,
    col_bounds: Vec<(usize, usize)>,
    row_bounds: Vec<(usize, usize)>,
}

fn layout(w: usize, h: usize, p: &ClaheParams) -> Layout {
    let a = w / p.region_width;
    let b = p.grid_rows.min(h);
    let rh = h / b;
    let col_of = |x: usize| (x / p.region_width).min(a - 1);
    let row_of = |y: usize| (y / rh).min(b - 1);
    let mut col_bounds = vec![(usize::MAX, 0); a];
    for x in 0..w {
        let c = &mut col_bounds[col_of(x)];
        c.0 = c.0.min(x);
        c.1 = c.1.max(x);
    }
    let mut row_bounds = vec![(usize::MAX, 0); b];
    for y in 0..h {
        let r = &mut row_bounds[row_of(y)];
        r.0 = r.0.min(y);
        r.1 = r.1.max(y);
    }
    Layout {
        a,
        b,
        col_bounds,
        row_bounds,
    }
}

/// Caps bins at the limit, then returns the clipped units one at a time.
pub fn clip(hist: &[u32], p: &ClaheParams, region: usize) -> Vec<u32> {
    let n: u64 = hist.iter().map(|&c| c as u64).sum();
    let nominal = match p.clip_scale {
        ClipScale::Normalized => (p.clip_limit * n as f64 / L as f64).floor() as u64,
        ClipScale::Raw => p.clip_limit.floor() as u64,
    };
    let limit = nominal.max(1).max(n.div_ceil(L as u64)) as u32;
    let mut out: Vec<u32> = hist.iter().map(|&c| c.min(limit)).collect();
    let mut excess: u64 = hist.iter().map(|&c| c.saturating_sub(limit) as u64).sum();
    match p.clip_mode {
        ClipMode::Uniform => {
            let mut bin = 0;
            while excess > 0 {
                if out[bin] < limit {
                    out[bin] += 1;
                    excess -= 1;
                }
                bin = (bin + 1) % L;
            }
        }
        ClipMode::Random => {
            let mut g = rng::seeded(p.seed, region as u64);
            while excess > 0 {
                let bin = g.random_range(0..L);
                if out[bin] < limit {
                    out[bin] += 1;
                    excess -= 1;
                }
            }
        }
    }
    out
}

/// Equalization table of a histogram, evaluated in floating point.
pub fn mapping(hist: &[u32]) -> Vec<u8> {
    let mut cdf = Vec::with_capacity(L);
    let mut acc = 0u64;
    for &c in hist {
        acc += c as u64;
        cdf.push(acc);
    }
    let max = acc;
    let min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    (0..L)
        .map(|v| {
            if max == min || cdf[v] < min {
                0
            } else {
                round_half_up((cdf[v] - min) as f64 / (max - min) as f64 * 255.0)
            }
        })
        .collect()
}

/// Neighbouring region indices and the weight of the upper one for a
/// coordinate, given region centers.
fn neighbours(p: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let j = (0..last).find(|&j| centers[j] <= p && p < centers[j + 1]).unwrap();
    (j, j + 1, (p - centers[j]) / (centers[j + 1] - centers[j]))
}

/// Enhanced image before resizing.
pub fn equalize(img: &GrayImage, p: &ClaheParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let lay = layout(w, h, p);
    let mut tables = Vec::new();
    for r in 0..lay.b {
        for c in 0..lay.a {
            let (x0, x1) = lay.col_bounds[c];
            let (y0, y1) = lay.row_bounds[r];
            let mut hist = vec![0u32; L];
            for y in y0..=y1 {
                for x in x0..=x1 {
                    hist[img.get(x, y) as usize] += 1;
                }
            }
            tables.push(mapping(&clip(&hist, p, r * lay.a + c)));
        }
    }
    let cx: Vec<f64> = lay.col_bounds.iter().map(|&(s, e)| (s + e) as f64 / 2.0).collect();
    let cy: Vec<f64> = lay.row_bounds.iter().map(|&(s, e)| (s + e) as f64 / 2.0).collect();
    let mut out = GrayImage::filled(w, h, 0);
    for y in 0..h {
        let (r0, r1, ty) = neighbours(y as f64, &cy);
        for x in 0..w {
            let (c0, c1, tx) = neighbours(x as f64, &cx);
            let v = img.get(x, y) as usize;
            let t = |r: usize, c: usize| tables[r * lay.a + c][v] as f64;
            let top = (1.0 - tx) * t(r0, c0) + tx * t(r0, c1);
            let bottom = (1.0 - tx) * t(r1, c0) + tx * t(r1, c1);
            out.set(x, y, round_half_up((1.0 - ty) * top + ty * bottom));
        }
    }
    out
}

/// Box-filter resample: each output pixel is the mean of the source area it
/// covers.
pub fn resize(img: &GrayImage, s: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let cover = |o: usize, n: usize, i: usize| -> f64 {
        let lo = o as f64 * n as f64 / s as f64;
        let hi = (o + 1) as f64 * n as f64 / s as f64;
        (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0)
    };
    let mut out = GrayImage::filled(s, s, 0);
    for oy in 0..s {
        for ox in 0..s {
            let mut sum = 0.0;
            for y in span(oy, h, s) {
                for x in span(ox, w, s) {
                    sum += cover(ox, w, x) * cover(oy, h, y) * img.get(x, y) as f64;
                }
            }
            let area = (w as f64 / s as f64) * (h as f64 / s as f64);
            out.set(ox, oy, round_half_up(sum / area));
        }
    }
    out
}

/// Source indices touched by output index `o`.
fn span(o: usize, n: usize, s: usize) -> std::ops::Range<usize> {
    let lo = (o as f64 * n as f64 / s as f64).floor() as usize;
    let hi = ((o + 1) as f64 * n as f64 / s as f64).ceil() as usize;
    lo..hi.min(n)
}

pub fn enhance(img: &GrayImage, p: &ClaheParams) -> GrayImage {
    resize(&equalize(img, p), p.target_size)
}
