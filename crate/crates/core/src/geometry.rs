//! Uniform planar arrays.
//!
//! All lengths are in wavelengths. Arrays lie in their local `z = 0` plane,
//! centered on the origin, with elements ordered row-major (y outer, x inner).

use crate::error::{Error, Result};

/// Relative tolerance for `aperture / spacing` to count as an integer.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub aperture_x: f64,
    pub aperture_y: f64,
    pub spacing_x: f64,
    pub spacing_y: f64,
    pub count_x: usize,
    pub count_y: usize,
    elements: Vec<[f64; 3]>,
}

fn grid_count(aperture: f64, spacing: f64) -> Result<usize> {
    let ratio = aperture / spacing;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > GRID_TOLERANCE * ratio.max(1.0) {
        return Err(Error::NonIntegerGrid { aperture, spacing });
    }
    Ok(n as usize)
}

/// Centered coordinate of grid index `i` out of `n` at the given spacing.
fn centered(i: usize, n: usize, spacing: f64) -> f64 {
    (i as f64 - (n as f64 - 1.0) / 2.0) * spacing
}

/// Builds a centered uniform planar array covering `aperture_x × aperture_y`.
pub fn build_planar_array(
    aperture_x: f64,
    aperture_y: f64,
    spacing_x: f64,
    spacing_y: f64,
) -> Result<ArrayGeometry> {
    for (v, name) in [
        (aperture_x, "aperture_x"),
        (aperture_y, "aperture_y"),
        (spacing_x, "spacing_x"),
        (spacing_y, "spacing_y"),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveInput(name));
        }
    }
    let count_x = grid_count(aperture_x, spacing_x)?;
    let count_y = grid_count(aperture_y, spacing_y)?;

    let mut elements = Vec::with_capacity(count_x * count_y);
    for j in 0..count_y {
        let y = centered(j, count_y, spacing_y);
        for i in 0..count_x {
            elements.push([centered(i, count_x, spacing_x), y, 0.0]);
        }
    }

    Ok(ArrayGeometry {
        aperture_x,
        aperture_y,
        spacing_x,
        spacing_y,
        count_x,
        count_y,
        elements,
    })
}

impl ArrayGeometry {
    /// Square aperture with equal spacing on both axes.
    pub fn square(aperture: f64, spacing: f64) -> Result<Self> {
        build_planar_array(aperture, aperture, spacing, spacing)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[[f64; 3]] {
        &self.elements
    }

    pub fn element_position(&self, p: usize) -> Result<[f64; 3]> {
        self.elements.get(p).copied().ok_or(Error::IndexOutOfRange {
            index: p,
            len: self.elements.len(),
        })
    }
}

/// Free-function form of [`ArrayGeometry::element_position`].
pub fn element_position(geometry: &ArrayGeometry, p: usize) -> Result<[f64; 3]> {
    geometry.element_position(p)
}
