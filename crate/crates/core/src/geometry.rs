//! Masked uniform grids, space-time cylinders, parabolic boundaries and
//! exhaustion sequences.
//!
//! A [`DomainMask`] is a uniform cell grid with an inside/outside flag per
//! cell; the base domain is the union of inside cell centers. Masks are one-
//! or two-dimensional (`ny == 1` selects 1D). For ordinary masks the outer
//! layer of the bounding box must be outside, so every inside cell has all
//! its stencil neighbors inside the array.

use crate::error::{Error, Result};
use crate::math::round;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    nx: usize,
    ny: usize,
    h: f64,
    x0: f64,
    y0: f64,
    inside: Vec<bool>,
    /// Periodic test mode: every cell is inside and the Laplacian wraps.
    /// Only [`DomainMask::torus`] sets this; it exists so conservation can
    /// be tested on a boundary-free domain.
    periodic: bool,
}

impl DomainMask {
    /// Mask with explicit inside flags (row-major, `idx = iy * nx + ix`).
    /// The bounding-box boundary layer must be outside and at least one
    /// cell must be inside. The coordinate origin is centered: cell
    /// `(ix, iy)` has center `(x0 + (ix + 0.5) h, y0 + (iy + 0.5) h)`.
    pub fn new(nx: usize, ny: usize, h: f64, inside: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 || inside.len() != nx * ny {
            return Err(Error::InvalidGrid {
                detail: format!("extents {nx}x{ny} vs {} flags", inside.len()),
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid {
                detail: format!("cell width {h}"),
            });
        }
        let mask = DomainMask {
            nx,
            ny,
            h,
            x0: -(nx as f64) * h / 2.0,
            y0: -(ny as f64) * h / 2.0,
            inside,
            periodic: false,
        };
        if !mask.inside.iter().any(|&b| b) {
            return Err(Error::InvalidGrid {
                detail: String::from("no inside cell"),
            });
        }
        for iy in 0..ny {
            for ix in 0..nx {
                let edge_x = ix == 0 || ix == nx - 1;
                let edge_y = ny > 1 && (iy == 0 || iy == ny - 1);
                if (edge_x || edge_y) && mask.inside[iy * nx + ix] {
                    return Err(Error::InvalidGrid {
                        detail: format!("boundary-layer cell ({ix}, {iy}) is inside"),
                    });
                }
            }
        }
        Ok(mask)
    }

    /// All-inside periodic mask (test mode for conservation checks).
    pub fn torus(nx: usize, ny: usize, h: f64) -> Result<Self> {
        if nx < 3 || (ny != 1 && ny < 3) || !(h > 0.0) {
            return Err(Error::InvalidGrid {
                detail: String::from("torus needs >= 3 cells per used axis"),
            });
        }
        Ok(DomainMask {
            nx,
            ny,
            h,
            x0: -(nx as f64) * h / 2.0,
            y0: -(ny as f64) * h / 2.0,
            inside: vec![true; nx * ny],
            periodic: true,
        })
    }

    /// 1D interval with `n` inside cells of width `h`, centered at 0.
    pub fn interval(n: usize, h: f64) -> Result<Self> {
        let nx = n + 2;
        let mut inside = vec![false; nx];
        for cell in inside.iter_mut().take(nx - 1).skip(1) {
            *cell = true;
        }
        DomainMask::new(nx, 1, h, inside)
    }

    /// 2D box with `n x n` inside cells of width `h`, centered at 0.
    pub fn square(n: usize, h: f64) -> Result<Self> {
        let nx = n + 2;
        let mut inside = vec![false; nx * nx];
        for iy in 1..nx - 1 {
            for ix in 1..nx - 1 {
                inside[iy * nx + ix] = true;
            }
        }
        DomainMask::new(nx, nx, h, inside)
    }

    /// L-shaped base: the centered `n x n` box minus the open quadrant
    /// `x > 0, y > 0`. The reentrant corner sits at the origin.
    pub fn l_shape(n: usize, h: f64) -> Result<Self> {
        let nx = n + 2;
        let half = (nx as f64) * h / 2.0;
        let mut inside = vec![false; nx * nx];
        for iy in 1..nx - 1 {
            for ix in 1..nx - 1 {
                let x = -half + (ix as f64 + 0.5) * h;
                let y = -half + (iy as f64 + 0.5) * h;
                inside[iy * nx + ix] = !(x > 0.0 && y > 0.0);
            }
        }
        DomainMask::new(nx, nx, h, inside)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    /// Spatial dimension: 1 when `ny == 1`, else 2.
    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn is_inside(&self, flat: usize) -> bool {
        self.inside[flat]
    }

    pub fn inside_flags(&self) -> &[bool] {
        &self.inside
    }

    pub fn inside_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| if b { Some(i) } else { None })
    }

    pub fn n_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Cell-center coordinates. For 1D masks the y coordinate is 0.
    pub fn coords(&self, flat: usize) -> (f64, f64) {
        let ix = flat % self.nx;
        let iy = flat / self.nx;
        (
            self.x0 + (ix as f64 + 0.5) * self.h,
            self.y0 + (iy as f64 + 0.5) * self.h,
        )
    }

    /// Flat index of the cell whose center is nearest `(x, y)`, or `None`
    /// outside the bounding box. Exact for cell-center inputs.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        let fx = (x - self.x0) / self.h - 0.5;
        let fy = if self.ny == 1 {
            0.0
        } else {
            (y - self.y0) / self.h - 0.5
        };
        if fx < -0.5 || fy < -0.5 {
            return None;
        }
        let ix = round(fx) as usize;
        let iy = round(fy) as usize;
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        Some(iy * self.nx + ix)
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        if self.dim() == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Removes inside cells within Chebyshev distance `layers` of an
    /// outside cell. `erode(erode(m, a), b) == erode(m, a + b)`.
    pub fn erode(&self, layers: usize) -> DomainMask {
        if layers == 0 || self.periodic {
            return self.clone();
        }
        let r = layers as isize;
        let ry = if self.ny == 1 { 0 } else { r };
        let mut out = self.clone();
        for iy in 0..self.ny as isize {
            for ix in 0..self.nx as isize {
                let flat = (iy as usize) * self.nx + ix as usize;
                if !self.inside[flat] {
                    continue;
                }
                let mut keep = true;
                'scan: for dy in -ry..=ry {
                    for dx in -r..=r {
                        let (jx, jy) = (ix + dx, iy + dy);
                        if jx < 0
                            || jy < 0
                            || jx >= self.nx as isize
                            || jy >= self.ny as isize
                            || !self.inside[(jy as usize) * self.nx + jx as usize]
                        {
                            keep = false;
                            break 'scan;
                        }
                    }
                }
                out.inside[flat] = keep;
            }
        }
        out
    }

    /// True when every inside cell of `self` is inside `other`.
    pub fn subset_of(&self, other: &DomainMask) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self
                .inside
                .iter()
                .zip(&other.inside)
                .all(|(&a, &b)| !a || b)
    }

    /// Same bounding box and resolution (inside flags may differ).
    pub fn same_layout(&self, other: &DomainMask) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.h == other.h
    }

    /// Face neighbors of a flat index, `None` past the bounding box
    /// (wraps in periodic mode). Order: -x, +x, -y, +y.
    pub fn neighbor(&self, flat: usize, dir: usize) -> Option<usize> {
        let ix = flat % self.nx;
        let iy = flat / self.nx;
        if self.periodic {
            let (jx, jy) = match dir {
                0 => ((ix + self.nx - 1) % self.nx, iy),
                1 => ((ix + 1) % self.nx, iy),
                2 => (ix, (iy + self.ny - 1) % self.ny),
                _ => (ix, (iy + 1) % self.ny),
            };
            return Some(jy * self.nx + jx);
        }
        match dir {
            0 => (ix > 0).then(|| flat - 1),
            1 => (ix + 1 < self.nx).then(|| flat + 1),
            2 => (iy > 0).then(|| flat - self.nx),
            _ => (iy + 1 < self.ny).then(|| flat + self.nx),
        }
    }

    /// Splits inside cells into (lateral, interior): lateral cells have at
    /// least one face neighbor outside. Periodic masks have no laterals.
    pub fn classify(&self) -> (Vec<usize>, Vec<usize>) {
        let ndirs = 2 * self.dim();
        let mut lateral = Vec::new();
        let mut interior = Vec::new();
        for flat in self.inside_cells() {
            let mut exposed = false;
            if !self.periodic {
                for dir in 0..ndirs {
                    match self.neighbor(flat, dir) {
                        Some(nb) if self.inside[nb] => {}
                        _ => {
                            exposed = true;
                            break;
                        }
                    }
                }
            }
            if exposed {
                lateral.push(flat);
            } else {
                interior.push(flat);
            }
        }
        (lateral, interior)
    }

    /// Parses the plain-text format: first line `nx ny h`, then `ny` rows
    /// of `nx` characters `0`/`1` (row `iy = 0` first).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidGrid {
            detail: String::from("empty mask file"),
        })?;
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::InvalidGrid {
                detail: String::from("bad mask header, expected `nx ny h`"),
            })
        };
        let nx = parse_usize(parts.next())?;
        let ny = parse_usize(parts.next())?;
        let h: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidGrid {
                detail: String::from("bad mask header, expected `nx ny h`"),
            })?;
        let mut inside = vec![false; nx * ny];
        for iy in 0..ny {
            let row = lines.next().ok_or_else(|| Error::InvalidGrid {
                detail: format!("mask file ends at row {iy} of {ny}"),
            })?;
            let row = row.trim();
            if row.len() != nx {
                return Err(Error::InvalidGrid {
                    detail: format!("row {iy} has {} cells, expected {nx}", row.len()),
                });
            }
            for (ix, ch) in row.chars().enumerate() {
                inside[iy * nx + ix] = match ch {
                    '0' => false,
                    '1' => true,
                    _ => {
                        return Err(Error::InvalidGrid {
                            detail: format!("mask character {ch:?} at ({ix}, {iy})"),
                        })
                    }
                };
            }
        }
        DomainMask::new(nx, ny, h, inside)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.nx, self.ny, self.h);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(if self.inside[iy * self.nx + ix] { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Uniform time axis over a spatial mask. Slices are indexed `0..=nt`,
/// slice 0 at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    pub mask: DomainMask,
    t_final: f64,
    nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(mask: DomainMask, t_final: f64, nt: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidGrid {
                detail: format!("final time {t_final}"),
            });
        }
        if nt < 2 {
            return Err(Error::InvalidGrid {
                detail: format!("nt = {nt}; need at least two time steps"),
            });
        }
        Ok(SpaceTimeGrid { mask, t_final, nt })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn time(&self, slice: usize) -> f64 {
        slice as f64 * self.dt()
    }

    /// The whole cylinder `Omega x (0, T)`. Flagged regular: discrete masks
    /// are unions of cell boxes.
    pub fn full_cylinder(&self) -> Cylinder {
        Cylinder {
            mask: self.mask.clone(),
            t1: 0,
            t2: self.nt,
            regular: true,
        }
    }

    /// Exhaustion member `Q_j`: the mask eroded by `max(1, ceil(J/j))`
    /// layers over slices `(t_j, T)` with `t_j = max(1, ceil(nt/(j+1)))`.
    /// Nondecreasing in `j`. `max_erosion` is the configured `J`.
    pub fn exhaustion(&self, j: usize, max_erosion: usize) -> Result<Cylinder> {
        assert!(j >= 1, "exhaustion index starts at 1");
        let layers = core::cmp::max(1, max_erosion.div_ceil(j));
        let eroded = self.mask.erode(layers);
        if eroded.n_inside() == 0 {
            return Err(Error::EmptyCylinder {
                detail: format!("erosion by {layers} layers empties the mask (j={j})"),
            });
        }
        let tj = core::cmp::max(1, self.nt.div_ceil(j + 1));
        Ok(Cylinder {
            mask: eroded,
            t1: tj,
            t2: self.nt,
            regular: true,
        })
    }
}

/// Sub-cylinder `U x (t1, t2)` of a parent grid. `regular` marks bases
/// that are unions of axis-aligned boxes (always true for the cylinders
/// this crate constructs; kept as data so callers can mark exotic inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub mask: DomainMask,
    pub t1: usize,
    pub t2: usize,
    pub regular: bool,
}

impl Cylinder {
    pub fn n_slices(&self) -> usize {
        self.t2 - self.t1
    }
}

/// Discrete parabolic boundary: all inside cells at the initial slice plus
/// the lateral cells at every slice of the window. The top-slice interior
/// is excluded.
#[derive(Debug, Clone)]
pub struct ParabolicBoundary {
    pub initial_cells: Vec<usize>,
    pub lateral_cells: Vec<usize>,
    pub t1: usize,
    pub t2: usize,
}

impl ParabolicBoundary {
    /// Lateral (cell, slice) pairs for slices `t1..=t2`.
    pub fn lateral_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.t1..=self.t2)
            .flat_map(move |k| self.lateral_cells.iter().map(move |&c| (c, k)))
    }
}

pub fn parabolic_boundary(c: &Cylinder) -> ParabolicBoundary {
    let (lateral, _) = c.mask.classify();
    ParabolicBoundary {
        initial_cells: c.mask.inside_cells().collect(),
        lateral_cells: lateral,
        t1: c.t1,
        t2: c.t2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_classify() {
        let m = DomainMask::interval(5, 0.1).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.n_inside(), 5);
        let (lat, int) = m.classify();
        assert_eq!(lat, vec![1, 5]);
        assert_eq!(int, vec![2, 3, 4]);
    }

    #[test]
    fn erode_run_of_seven() {
        let m = DomainMask::interval(7, 1.0).unwrap();
        let e = m.erode(2);
        let cells: Vec<usize> = e.inside_cells().collect();
        assert_eq!(cells, vec![3, 4, 5]);
    }

    #[test]
    fn erode_composes() {
        let m = DomainMask::square(9, 0.5).unwrap();
        let a = m.erode(1).erode(2);
        let b = m.erode(3);
        assert_eq!(a, b);
    }

    #[test]
    fn boundary_ring_rejected() {
        let inside = vec![true; 9];
        assert!(DomainMask::new(3, 3, 1.0, inside).is_err());
    }

    #[test]
    fn parabolic_boundary_single_cell() {
        let m = DomainMask::interval(1, 1.0).unwrap();
        let g = SpaceTimeGrid::new(m, 1.0, 4).unwrap();
        let pb = parabolic_boundary(&g.full_cylinder());
        assert_eq!(pb.initial_cells, vec![1]);
        assert_eq!(pb.lateral_cells, vec![1]);
        assert_eq!(pb.lateral_pairs().count(), 5);
    }

    #[test]
    fn exhaustion_monotone() {
        let m = DomainMask::square(16, 0.125).unwrap();
        let g = SpaceTimeGrid::new(m, 1.0, 24).unwrap();
        let mut prev: Option<Cylinder> = None;
        for j in 1..=10 {
            let q = g.exhaustion(j, 4).unwrap();
            if let Some(p) = &prev {
                assert!(p.mask.subset_of(&q.mask), "j={j}");
                assert!(q.t1 <= p.t1, "j={j}");
            }
            assert!(q.mask.subset_of(&g.mask));
            prev = Some(q);
        }
    }

    #[test]
    fn mask_text_roundtrip() {
        let m = DomainMask::l_shape(6, 0.25).unwrap();
        let text = m.to_text();
        let back = DomainMask::from_text(&text).unwrap();
        assert_eq!(m, back);
    }
}
