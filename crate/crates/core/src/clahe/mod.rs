//! Contrast-limited adaptive histogram equalization.
//!
//! The image is split into a grid of regions. Each region gets a clipped
//! histogram and an equalization table; pixels are then mapped through their
//! own region's table, or a spatial blend of the two or four nearest region
//! tables depending on where they sit relative to the region centers.
//! Finally the result is area-resampled to a square classifier input.

mod grid;
mod histogram;
mod resize;
mod transform;

pub use grid::{divide_regions, RegionGrid, RegionLayout, RegionTables, Span};
pub use histogram::{clip_histogram, effective_limit, he_mapping, region_histogram, Histogram, Mapping};
pub use resize::resize;
pub use transform::{transform_image, write_mapping_csv};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Number of intensity levels in an 8-bit image.
pub const GRAY_LEVELS: usize = 256;

/// How the excess above the clip limit is put back into the histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClipMode {
    /// Excess counts are dealt one at a time over the non-full bins, in bin
    /// order, wrapping around. Preserves the total count.
    #[default]
    Uniform,
    /// Each excess count goes to a bin drawn uniformly at random from a
    /// seeded generator, redrawing when the bin is full.
    Random,
}

/// Whether `clip_limit` is a multiple of the mean bin count or a raw count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClipScale {
    #[default]
    Normalized,
    Raw,
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClipMode::Uniform => "uniform",
            ClipMode::Random => "random",
        })
    }
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ClipMode::Uniform),
            "random" => Ok(ClipMode::Random),
            other => Err(Error::Config(format!("unknown clip mode {other:?} (uniform|random)"))),
        }
    }
}

impl fmt::Display for ClipScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClipScale::Normalized => "normalized",
            ClipScale::Raw => "raw",
        })
    }
}

impl FromStr for ClipScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(ClipScale::Normalized),
            "raw" => Ok(ClipScale::Raw),
            other => Err(Error::Config(format!("unknown clip scale {other:?} (normalized|raw)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaheParams {
    /// Width of one region in pixels; the horizontal region count follows
    /// from the image width.
    pub region_width: usize,
    /// Vertical region count.
    pub grid_rows: usize,
    pub clip_limit: f64,
    pub clip_scale: ClipScale,
    pub clip_mode: ClipMode,
    /// Side of the square output.
    pub target_size: usize,
    pub seed: u64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            region_width: 32,
            grid_rows: 23,
            clip_limit: 4.0,
            clip_scale: ClipScale::Normalized,
            clip_mode: ClipMode::Uniform,
            target_size: 64,
            seed: 0,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if self.region_width == 0 || self.grid_rows == 0 || self.target_size == 0 {
            return Err(Error::Config(
                "region_width, grid_rows and target_size must be positive".into(),
            ));
        }
        if !(self.clip_limit.is_finite() && self.clip_limit > 0.0) {
            return Err(Error::Config(format!("clip_limit must be positive, got {}", self.clip_limit)));
        }
        if self.clip_scale == ClipScale::Raw && self.clip_limit < 1.0 {
            return Err(Error::Config("raw clip_limit must be at least 1".into()));
        }
        Ok(())
    }

    /// Stable textual form; used as part of cache keys.
    pub fn canonical(&self) -> String {
        format!(
            "region_width={};grid_rows={};clip_limit={:?};clip_scale={};clip_mode={};target_size={};seed={}",
            self.region_width,
            self.grid_rows,
            self.clip_limit,
            self.clip_scale,
            self.clip_mode,
            self.target_size,
            self.seed
        )
    }
}

/// Region histograms, clipping and equalization tables for `img`.
pub fn build_grid(img: &GrayImage, params: &ClaheParams) -> Result<RegionGrid> {
    params.validate()?;
    let layout = divide_regions(img, params)?;
    let regions = layout
        .regions()
        .enumerate()
        .map(|(idx, (cols, rows))| {
            let histogram = region_histogram(img, cols, rows);
            let clipped = clip_histogram(&histogram, params, idx);
            let mapping = he_mapping(&clipped);
            RegionTables {
                histogram,
                clipped,
                mapping,
            }
        })
        .collect();
    Ok(RegionGrid { layout, regions })
}

/// Contrast enhancement at the original resolution.
pub fn equalize(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    let grid = build_grid(img, params)?;
    Ok(transform_image(img, &grid))
}

/// Enhancement followed by resampling to `target_size` squared.
pub fn enhance(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    let eq = equalize(img, params)?;
    Ok(resize(&eq, params.target_size))
}
