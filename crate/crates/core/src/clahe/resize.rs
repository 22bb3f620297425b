use crate::image::GrayImage;

/// Source pixel overlaps for each output index along one axis, measured in
/// units of `1 / out_len` source pixels. Overlaps for one output sum to
/// `in_len`.
fn overlaps(in_len: usize, out_len: usize) -> Vec<Vec<(usize, u64)>> {
    (0..out_len)
        .map(|o| {
            let lo = o * in_len;
            let hi = lo + in_len;
            let first = lo / out_len;
            let last = (hi - 1) / out_len;
            (first..=last)
                .map(|i| {
                    let s = (i * out_len).max(lo);
                    let e = ((i + 1) * out_len).min(hi);
                    (i, (e - s) as u64)
                })
                .collect()
        })
        .collect()
}

/// Area-averaging resample to `size` x `size`, rounding half up.
pub fn resize(img: &GrayImage, size: usize) -> GrayImage {
    assert!(size > 0, "target size must be positive");
    let (w, h) = (img.width(), img.height());
    let xo = overlaps(w, size);
    let yo = overlaps(h, size);

    let mut rows = vec![0u64; h * size];
    for y in 0..h {
        let src = img.row(y);
        for (ox, taps) in xo.iter().enumerate() {
            rows[y * size + ox] = taps.iter().map(|&(x, wt)| wt * src[x] as u64).sum();
        }
    }

    let den = (w * h) as u64;
    let mut out = Vec::with_capacity(size * size);
    for taps in &yo {
        for ox in 0..size {
            let num: u64 = taps.iter().map(|&(y, wt)| wt * rows[y * size + ox]).sum();
            out.push(((2 * num + den) / (2 * den)).min(255) as u8);
        }
    }
    GrayImage::new(size, size, out).expect("square output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_stays_constant() {
        let out = resize(&GrayImage::filled(128, 128, 100), 64);
        assert!(out.pixels().iter().all(|&v| v == 100));
        let out = resize(&GrayImage::filled(32, 7, 33), 64);
        assert!(out.pixels().iter().all(|&v| v == 33));
    }

    #[test]
    fn half_rounds_up() {
        let img = GrayImage::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        assert_eq!(resize(&img, 1).pixels(), &[128]);
    }

    #[test]
    fn exact_downscale_by_two() {
        let img = GrayImage::new(4, 2, vec![0, 2, 10, 20, 4, 6, 30, 40]).unwrap();
        let out = resize(&img, 2);
        // rows are kept, column pairs are averaged
        assert_eq!(out.get(0, 0), 1);
        assert_eq!(out.get(1, 0), 15);
        assert_eq!(out.get(0, 1), 5);
        assert_eq!(out.get(1, 1), 35);
    }

    proptest! {
        #[test]
        fn output_within_input_range(
            w in 1usize..90, h in 1usize..90, s in 1usize..70, seed in any::<u64>()
        ) {
            let mut x = seed | 1;
            let px: Vec<u8> = (0..w * h).map(|_| { x ^= x << 13; x ^= x >> 7; x ^= x << 17; x as u8 }).collect();
            let img = GrayImage::new(w, h, px.clone()).unwrap();
            let out = resize(&img, s);
            let (lo, hi) = (*px.iter().min().unwrap(), *px.iter().max().unwrap());
            prop_assert!(out.pixels().iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
