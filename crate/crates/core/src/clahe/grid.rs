use crate::error::{Error, Result};
use crate::image::GrayImage;

use super::histogram::{Histogram, Mapping};
use super::ClaheParams;

/// Half-open pixel interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Twice the geometric center, `start + end - 1`, kept integral so all
    /// interpolation weights are exact.
    pub fn center2(&self) -> usize {
        self.start + self.end - 1
    }

    pub fn contains(&self, v: usize) -> bool {
        (self.start..self.end).contains(&v)
    }
}

/// Region boundaries along both axes. Region `(c, r)` has index `r * a + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLayout {
    pub cols: Vec<Span>,
    pub rows: Vec<Span>,
}

impl RegionLayout {
    /// Horizontal region count.
    pub fn a(&self) -> usize {
        self.cols.len()
    }

    /// Vertical region count.
    pub fn b(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.a() * self.b()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.a() + col
    }

    /// Region spans in index order.
    pub fn regions(&self) -> impl Iterator<Item = (Span, Span)> + '_ {
        self.rows
            .iter()
            .flat_map(move |&r| self.cols.iter().map(move |&c| (c, r)))
    }

    /// Region index holding pixel `(x, y)`.
    pub fn locate(&self, x: usize, y: usize) -> usize {
        let c = self.cols.iter().position(|s| s.contains(x)).expect("x inside image");
        let r = self.rows.iter().position(|s| s.contains(y)).expect("y inside image");
        self.index(c, r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionTables {
    pub histogram: Histogram,
    pub clipped: Histogram,
    pub mapping: Mapping,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGrid {
    pub layout: RegionLayout,
    pub regions: Vec<RegionTables>,
}

/// `count` spans of `base` pixels; the last one runs to `total`.
fn split(total: usize, count: usize, base: usize) -> Vec<Span> {
    (0..count)
        .map(|i| Span {
            start: i * base,
            end: if i + 1 == count { total } else { (i + 1) * base },
        })
        .collect()
}

/// Splits the image into `width / region_width` columns and `grid_rows`
/// rows (fewer when the image has fewer pixel rows than that).
pub fn divide_regions(img: &GrayImage, params: &ClaheParams) -> Result<RegionLayout> {
    if params.region_width == 0 || params.grid_rows == 0 {
        return Err(Error::Config("region_width and grid_rows must be positive".into()));
    }
    if img.width() < params.region_width {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            region_width: params.region_width,
        });
    }
    let a = img.width() / params.region_width;
    let b = params.grid_rows.min(img.height());
    Ok(RegionLayout {
        cols: split(img.width(), a, params.region_width),
        rows: split(img.height(), b, img.height() / b),
    })
}
