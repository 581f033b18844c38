//! Sampled space-time fields.

use crate::error::{Error, Result};
use crate::geometry::SpaceTimeGrid;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Nonnegative sampled function on a [`SpaceTimeGrid`]. Values are stored
/// for every cell of the bounding box (zero outside the mask), slice-major:
/// `values[slice * ncells + flat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &SpaceTimeGrid) -> ScalarField {
        let n = grid.mask.ncells() * (grid.nt() + 1);
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; n],
        }
    }

    /// Samples `f(x, y, t)` at inside cells of every slice.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        let nc = grid.mask.ncells();
        for k in 0..=grid.nt() {
            let t = grid.time(k);
            for flat in grid.mask.inside_cells() {
                let (x, y) = grid.mask.coords(flat);
                out.values[k * nc + flat] = f(x, y, t);
            }
        }
        out
    }

    pub fn ncells(&self) -> usize {
        self.grid.mask.ncells()
    }

    pub fn at(&self, slice: usize, flat: usize) -> f64 {
        self.values[slice * self.ncells() + flat]
    }

    pub fn set(&mut self, slice: usize, flat: usize, v: f64) {
        let nc = self.ncells();
        self.values[slice * nc + flat] = v;
    }

    pub fn slice(&self, slice: usize) -> &[f64] {
        let nc = self.ncells();
        &self.values[slice * nc..(slice + 1) * nc]
    }

    pub fn slice_mut(&mut self, slice: usize) -> &mut [f64] {
        let nc = self.ncells();
        &mut self.values[slice * nc..(slice + 1) * nc]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| if b > a { b } else { a })
    }

    /// Max |self - other| over inside cells of all slices.
    pub fn max_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut out = 0.0f64;
        for k in 0..=self.grid.nt() {
            for flat in self.grid.mask.inside_cells() {
                let d = crate::math::abs(self.at(k, flat) - other.at(k, flat));
                if d > out {
                    out = d;
                }
            }
        }
        Ok(out)
    }

    /// Pointwise `min(u, k)` over all values.
    pub fn truncate(&self, k: f64) -> ScalarField {
        let mut out = self.clone();
        for v in &mut out.values {
            if *v > k {
                *v = k;
            }
        }
        out
    }

    /// Pointwise minimum of two fields on the same grid.
    pub fn pointwise_min(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        for (v, &w) in out.values.iter_mut().zip(&other.values) {
            if w < *v {
                *v = w;
            }
        }
        Ok(out)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.mask.same_layout(&other.grid.mask)
            && self.grid.nt() == other.grid.nt()
            && self.grid.t_final() == other.grid.t_final()
        {
            Ok(())
        } else {
            Err(Error::MismatchedGrids {
                detail: format!(
                    "{}x{} nt={} vs {}x{} nt={}",
                    self.grid.mask.nx(),
                    self.grid.mask.ny(),
                    self.grid.nt(),
                    other.grid.mask.nx(),
                    other.grid.mask.ny(),
                    other.grid.nt()
                ),
            })
        }
    }

    /// `integral of u(., t si slice) over the mask` by midpoint rule.
    pub fn slice_integral(&self, slice: usize) -> f64 {
        let vol = self.grid.mask.cell_volume();
        self.grid
            .mask
            .inside_cells()
            .map(|flat| self.at(slice, flat))
            .sum::<f64>()
            * vol
    }
}
