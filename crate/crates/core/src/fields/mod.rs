//! Complex field grids, the swift-electron source field and the plane-wave
//! decomposition of the generated SPP.

mod io;
mod source;

pub use source::{
    decompose_source, object_line_field, render_component, swift_electron_field,
    PlaneWaveComponent, SourceParams, SwiftField,
};

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::{Grid, Point};

/// Complex scalar amplitude on a uniform grid.
///
/// `values[[ix, iy]]` sits at `(origin.x + ix·dx, origin.y + iy·dy)`; row `ix`
/// is therefore a line along y at fixed x.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    values: Array2<Complex64>,
    dx: f64,
    dy: f64,
    origin: Point,
}

impl ComplexField2D {
    pub fn new(values: Array2<Complex64>, dx: f64, dy: f64, origin: Point) -> Result<Self> {
        let (nx, ny) = values.dim();
        if nx < 2 || ny < 2 {
            return Err(Error::Argument(format!(
                "field needs at least 2×2 samples, got {nx}×{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::Argument("grid spacing must be positive".into()));
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Argument("field contains non-finite samples".into()));
        }
        Ok(ComplexField2D {
            values,
            dx,
            dy,
            origin,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ComplexField2D {
            values: Array2::zeros((grid.nx, grid.ny)),
            dx: grid.dx,
            dy: grid.dy,
            origin: grid.origin(),
        }
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn nx(&self) -> usize {
        self.values.nrows()
    }

    pub fn ny(&self) -> usize {
        self.values.ncols()
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.origin[0] + ix as f64 * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.origin[1] + iy as f64 * self.dy
    }

    pub fn y_axis(&self) -> Vec<f64> {
        (0..self.ny()).map(|j| self.y(j)).collect()
    }

    /// The y-line at column `ix`.
    pub fn line(&self, ix: usize) -> ArrayView1<'_, Complex64> {
        self.values.row(ix)
    }

    /// Index of the column nearest to `x`, if `x` lies within the grid.
    pub fn column_at(&self, x: f64) -> Option<usize> {
        let f = (x - self.origin[0]) / self.dx;
        let last = (self.nx() - 1) as f64;
        if f < -0.5 || f > last + 0.5 {
            return None;
        }
        Some(f.round().clamp(0.0, last) as usize)
    }

    /// `∑|E|²·dx·dy`.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx * self.dy
    }

    pub fn is_normalized(&self) -> bool {
        (self.power() - 1.0).abs() <= 1e-9
    }

    /// Scales to unit power; a zero field is left untouched.
    pub fn normalize(&mut self) {
        let p = self.power();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            self.values.mapv_inplace(|z| z * s);
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.values.dim() == other.values.dim()
            && rel_eq(self.dx, other.dx)
            && rel_eq(self.dy, other.dy)
            && (self.origin[0] - other.origin[0]).abs() <= 1e-9 * self.dx
            && (self.origin[1] - other.origin[1]).abs() <= 1e-9 * self.dy
    }

    /// Complex conjugate: time reversal of a monochromatic scalar field.
    pub fn time_reverse(&self) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|z| z.conj());
        out
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
