use rand::Rng;

use crate::image::GrayImage;
use crate::rng;

use super::grid::Span;
use super::{ClaheParams, ClipMode, ClipScale, GRAY_LEVELS};

/// Per-intensity pixel counts for one region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u32>,
}

impl Histogram {
    pub fn new(levels: usize) -> Self {
        assert!((1..=GRAY_LEVELS).contains(&levels), "levels must be in 1..=256");
        Self {
            counts: vec![0; levels],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        assert!(
            (1..=GRAY_LEVELS).contains(&counts.len()),
            "levels must be in 1..=256"
        );
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Running sum of the counts.
    pub fn cdf(&self) -> Vec<u64> {
        self.counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c as u64;
                Some(*acc)
            })
            .collect()
    }
}

/// Equalization lookup table, one output level per input level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapping {
    table: Vec<u8>,
}

impl Mapping {
    pub fn from_table(table: Vec<u8>) -> Self {
        Self { table }
    }

    #[inline]
    pub fn apply(&self, v: u8) -> u8 {
        self.table[v as usize]
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }
}

pub fn region_histogram(img: &GrayImage, cols: Span, rows: Span) -> Histogram {
    let mut h = Histogram::new(GRAY_LEVELS);
    for y in rows.start..rows.end {
        for &v in &img.row(y)[cols.start..cols.end] {
            h.counts[v as usize] += 1;
        }
    }
    h
}

/// Per-bin cap for a region holding `total` pixels over `levels` bins.
///
/// Normalized limits are multiples of the mean bin count, floored and at
/// least 1. The cap is never below `ceil(total / levels)`, otherwise the
/// clipped mass could not be placed anywhere.
pub fn effective_limit(total: u64, levels: usize, params: &ClaheParams) -> u64 {
    let levels = levels as u64;
    let nominal = match params.clip_scale {
        ClipScale::Normalized => (params.clip_limit * total as f64 / levels as f64).floor() as u64,
        ClipScale::Raw => params.clip_limit.floor() as u64,
    };
    nominal.max(1).max(total.div_ceil(levels))
}

/// Caps every bin at the effective limit and puts the excess back according
/// to `params.clip_mode`. `region_index` selects the random stream in
/// [`ClipMode::Random`].
pub fn clip_histogram(hist: &Histogram, params: &ClaheParams, region_index: usize) -> Histogram {
    let limit = effective_limit(hist.total(), hist.levels(), params);
    let limit32 = limit.min(u32::MAX as u64) as u32;
    let mut counts = hist.counts.clone();
    let mut excess: u64 = 0;
    for c in counts.iter_mut() {
        if *c > limit32 {
            excess += (*c - limit32) as u64;
            *c = limit32;
        }
    }
    if excess == 0 {
        return Histogram { counts };
    }

    match params.clip_mode {
        ClipMode::Uniform => {
            // One pass hands a single count to every bin still below the cap.
            'passes: loop {
                for c in counts.iter_mut() {
                    if *c < limit32 {
                        *c += 1;
                        excess -= 1;
                        if excess == 0 {
                            break 'passes;
                        }
                    }
                }
            }
        }
        ClipMode::Random => {
            let mut rng = rng::seeded(params.seed, region_index as u64);
            let levels = counts.len();
            while excess > 0 {
                let bin = rng.random_range(0..levels);
                if counts[bin] < limit32 {
                    counts[bin] += 1;
                    excess -= 1;
                }
            }
        }
    }
    Histogram { counts }
}

/// Histogram-equalization table of a (clipped) histogram.
///
/// `h(x) = round((cdf(x) - cdf_min) / (cdf_max - cdf_min) * (L - 1))` with
/// `cdf_min` the smallest non-zero cdf value. Levels below the first
/// occupied bin map to 0, and a single-valued region maps everything to 0.
pub fn he_mapping(hist: &Histogram) -> Mapping {
    let levels = hist.levels();
    let cdf = hist.cdf();
    let cdf_max = *cdf.last().expect("non-empty histogram");
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if cdf_max == cdf_min {
        return Mapping {
            table: vec![0; levels],
        };
    }
    let den = cdf_max - cdf_min;
    let top = (levels - 1) as u64;
    let table = cdf
        .iter()
        .map(|&c| {
            let num = c.saturating_sub(cdf_min) * top;
            ((2 * num + den) / (2 * den)) as u8
        })
        .collect();
    Mapping { table }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(limit: f64) -> ClaheParams {
        ClaheParams {
            clip_limit: limit,
            clip_scale: ClipScale::Raw,
            ..Default::default()
        }
    }

    #[test]
    fn counts_inside_region() {
        let img = GrayImage::new(4, 3, vec![7; 12]).unwrap();
        let h = region_histogram(&img, Span { start: 0, end: 2 }, Span { start: 0, end: 3 });
        assert_eq!(h.counts()[7], 6);
        assert_eq!(h.total(), 6);

        let img = GrayImage::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        let h = region_histogram(&img, Span { start: 0, end: 2 }, Span { start: 0, end: 2 });
        assert_eq!(&h.counts()[..3], &[2, 2, 0]);
    }

    #[test]
    fn toy_uniform_clip() {
        let h = Histogram::from_counts(vec![6, 1, 1]);
        let out = clip_histogram(&h, &raw(4.0), 0);
        assert_eq!(out.counts(), &[4, 2, 2]);
    }

    #[test]
    fn under_limit_is_untouched() {
        let h = Histogram::from_counts(vec![3, 4, 1, 0]);
        assert_eq!(clip_histogram(&h, &raw(4.0), 0), h);
    }

    #[test]
    fn normalized_limit() {
        let p = ClaheParams::default();
        // 32x17 region: 4 * 544 / 256 = 8.5 -> 8
        assert_eq!(effective_limit(544, 256, &p), 8);
        // tiny regions never go below 1
        assert_eq!(effective_limit(10, 256, &p), 1);
        // raw limits too small to hold the mass are raised
        assert_eq!(effective_limit(2000, 256, &raw(4.0)), 8);
    }

    #[test]
    fn mapping_of_two_levels() {
        let mut counts = vec![0; 256];
        counts[0] = 2;
        counts[1] = 2;
        let m = he_mapping(&Histogram::from_counts(counts));
        assert_eq!(m.apply(0), 0);
        assert_eq!(m.apply(1), 255);
        assert_eq!(m.apply(200), 255);
    }

    #[test]
    fn single_valued_region_maps_to_zero() {
        let mut counts = vec![0; 256];
        counts[42] = 99;
        let m = he_mapping(&Histogram::from_counts(counts));
        assert!(m.table().iter().all(|&v| v == 0));
        let empty = he_mapping(&Histogram::new(256));
        assert!(empty.table().iter().all(|&v| v == 0));
    }

    #[test]
    fn random_mode_is_seeded() {
        let h = Histogram::from_counts((0..256).map(|i| if i < 4 { 200 } else { 1 }).collect());
        let p = ClaheParams {
            clip_mode: ClipMode::Random,
            seed: 5,
            ..Default::default()
        };
        let a = clip_histogram(&h, &p, 3);
        assert_eq!(a, clip_histogram(&h, &p, 3));
        assert_ne!(a, clip_histogram(&h, &p, 4));
        assert!(a.max_count() as u64 <= effective_limit(h.total(), 256, &p));
    }

    proptest! {
        #[test]
        fn uniform_clip_conserves_and_caps(
            counts in proptest::collection::vec(0u32..400, 256),
            limit in 0.5f64..12.0,
        ) {
            let p = ClaheParams { clip_limit: limit, ..Default::default() };
            let h = Histogram::from_counts(counts);
            let out = clip_histogram(&h, &p, 0);
            prop_assert_eq!(out.total(), h.total());
            prop_assert!(out.max_count() as u64 <= effective_limit(h.total(), 256, &p));
        }

        #[test]
        fn mapping_is_monotone(counts in proptest::collection::vec(0u32..50, 256)) {
            let m = he_mapping(&Histogram::from_counts(counts));
            prop_assert!(m.table().windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
