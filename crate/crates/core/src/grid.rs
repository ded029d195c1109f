//! Rectangular cell-centred grids and scalar fields sampled on them.
//!
//! Layout is row-major with `index = iy * nx + ix`. A one-dimensional grid is
//! the `ny == 1` case and shares every code path with the two-dimensional one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs nx >= 2 and ny >= 1 (got nx={nx}, ny={ny})")]
    TooFewCells { nx: usize, ny: usize },
    #[error("grid extents must be positive and finite (got lx={lx}, ly={ly})")]
    BadExtent { lx: f64, ly: f64 },
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    One,
    Two,
}

impl Dimension {
    pub fn n(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Two => 2,
        }
    }
}

/// Cell-centred discretization of the rectangle `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 2 || ny < 1 {
            return Err(GridError::TooFewCells { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Grid {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn dimension(&self) -> Dimension {
        if self.ny == 1 {
            Dimension::One
        } else {
            Dimension::Two
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Midpoint-rule quadrature weight of one cell: `hx` in 1D, `hx * hy` in 2D.
    pub fn cell_volume(&self) -> f64 {
        match self.dimension() {
            Dimension::One => self.hx,
            Dimension::Two => self.hx * self.hy,
        }
    }

    /// Measure of the domain in its own dimension.
    pub fn domain_measure(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Cell centre `((ix + 1/2) hx, (iy + 1/2) hy)`.
    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 + 0.5) * self.hx, (iy as f64 + 0.5) * self.hy)
    }

    pub fn min_spacing(&self) -> f64 {
        match self.dimension() {
            Dimension::One => self.hx,
            Dimension::Two => self.hx.min(self.hy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let (x, y) = grid.center(ix, iy);
                values.push(f(x, y));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation over cells.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.values.len() as f64;
        var.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cell-weighted inner product.
    pub fn dot(&self, other: &Field) -> Result<f64, GridError> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::Mismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_square_has_unit_spacing() {
        let g = Grid::new(100, 100, 100.0, 100.0).unwrap();
        assert_eq!(g.hx(), 1.0);
        assert_eq!(g.hy(), 1.0);
        assert_eq!(g.dimension(), Dimension::Two);
    }

    #[test]
    fn minimal_one_dimensional_grid() {
        let g = Grid::new(2, 1, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.5);
        assert_eq!(g.hy(), 1.0);
        assert_eq!(g.dimension(), Dimension::One);
        assert_eq!(g.cell_volume(), 0.5);
    }

    #[test]
    fn exact_division() {
        let g = Grid::new(64, 1, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.015625);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(1, 1, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 0, 1.0, 1.0).is_err());
        assert!(Grid::new(4, 4, 0.0, 1.0).is_err());
        assert!(Grid::new(4, 4, 1.0, -2.0).is_err());
        assert!(Grid::new(4, 4, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn field_length_is_checked() {
        let g = Grid::new(3, 2, 3.0, 2.0).unwrap();
        assert!(Field::from_values(g, vec![0.0; 5]).is_err());
        let f = Field::from_fn(g, |x, y| x + 10.0 * y);
        assert_eq!(f.get(2, 1), 2.5 + 15.0);
    }
}
