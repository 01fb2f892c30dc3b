//! Row-major rasters with the origin at the south-west corner.
//!
//! Cell `(col, row)` covers `[col·res, (col+1)·res) × [row·res, (row+1)·res)`
//! and its center sits at `((col+0.5)·res, (row+0.5)·res)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Data(format!(
                "raster of {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn get_mut(&mut self, col: usize, row: usize) -> &mut T {
        &mut self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Placement of a raster in world coordinates (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
}

impl GridGeometry {
    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width_m() && y < self.height_m()
    }

    /// Cell containing `(x, y)`, or `None` outside the map.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let col = (x / self.resolution).floor() as usize;
        let row = (y / self.resolution).floor() as usize;
        (col < self.width && row < self.height).then_some((col, row))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }
}

/// Interpolation used when sampling a raster at a continuous position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Nearest,
    Bilinear,
}

/// Samples `grid` at world position `(x, y)`.
///
/// Bilinear mode interpolates between the four surrounding cell centers and
/// clamps to the border cells near the map edge.
pub fn sample(
    grid: &Grid<f64>,
    geom: &GridGeometry,
    x: f64,
    y: f64,
    interp: Interpolation,
) -> Result<f64> {
    let (col, row) = geom.cell_of(x, y).ok_or(Error::OutOfBounds { x, y })?;
    match interp {
        Interpolation::Nearest => Ok(*grid.get(col, row)),
        Interpolation::Bilinear => Ok(bilinear(grid, geom, x, y)),
    }
}

#[inline]
pub(crate) fn bilinear(grid: &Grid<f64>, geom: &GridGeometry, x: f64, y: f64) -> f64 {
    let u = (x / geom.resolution - 0.5).clamp(0.0, (geom.width - 1) as f64);
    let v = (y / geom.resolution - 0.5).clamp(0.0, (geom.height - 1) as f64);
    let c0 = (u.floor() as usize).min(geom.width.saturating_sub(2));
    let r0 = (v.floor() as usize).min(geom.height.saturating_sub(2));
    let c1 = (c0 + 1).min(geom.width - 1);
    let r1 = (r0 + 1).min(geom.height - 1);
    let fu = u - c0 as f64;
    let fv = v - r0 as f64;
    let a = grid.get(c0, r0) * (1.0 - fu) + grid.get(c1, r0) * fu;
    let b = grid.get(c0, r1) * (1.0 - fu) + grid.get(c1, r1) * fu;
    a * (1.0 - fv) + b * fv
}
