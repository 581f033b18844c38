//! Discrete Perron construction: Poisson modification, penalized class
//! members, exhaustion envelopes, and the resolutivity gap.
//!
//! The computable surrogate for the upper envelope is the decreasing
//! sequence `w_j = P(w_{j-1}, Q_j)` started from the penalized upper-class
//! member, over an exhaustion `Q_j` of the cylinder; symmetrically from
//! below. Both chains attain the boundary data only in the limit, so all
//! gaps are measured on a probe set that stays away from the parabolic
//! boundary: cells surviving two erosions, slices past 0.1 T.

use crate::boundary::{shift_boundary, Datum};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Cylinder, SpaceTimeGrid};
use crate::math::round;
use crate::smooth::smooth_power_approx;
use crate::solver::{solve_ibvp, solve_penalized, PenaltyParams, PenaltySign, SolveReport, SolverConfig};
use alloc::vec::Vec;

/// Deepest erosion of the exhaustion schedule (its `J`); stage `j` erodes
/// by `max(1, ceil(J/j))` layers.
pub const MAX_EROSION: usize = 4;

/// Penalty width used inside `resolutivity_gap`.
pub const RESOLUTIVITY_DELTA: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub j: usize,
    pub delta: f64,
    /// Max probe-set difference between the upper and lower chain after
    /// this stage.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct PerronResult {
    pub upper: ScalarField,
    pub lower: ScalarField,
    /// `max_probe (upper - lower)` after the final stage.
    pub gap: f64,
    pub per_stage: Vec<StageRecord>,
}

/// Interior nodes the envelopes are compared on.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub cells: Vec<usize>,
    pub first_slice: usize,
}

/// Cells at least two erosion layers inside, slices from `0.1 T` on.
/// Falls back to shallower erosion on masks too small to survive two.
pub fn probe_set(grid: &SpaceTimeGrid) -> ProbeSet {
    let mut cells: Vec<usize> = grid.mask.erode(2).inside_cells().collect();
    if cells.is_empty() {
        cells = grid.mask.erode(1).inside_cells().collect();
    }
    if cells.is_empty() {
        let (_, interior) = grid.mask.classify();
        cells = interior;
    }
    ProbeSet { cells, first_slice: grid.nt().div_ceil(10) }
}

/// `max (a - b)` over the probe set (can be negative).
pub fn probe_gap(a: &ScalarField, b: &ScalarField, p: &ProbeSet) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in p.first_slice..=a.grid.nt() {
        for &flat in &p.cells {
            worst = worst.max(a.at(k, flat) - b.at(k, flat));
        }
    }
    worst
}

/// Datum reading a stored field at the nearest grid node; exact at cell
/// centers and slice times, which is where the solver samples it.
struct FieldTrace<'a> {
    field: &'a ScalarField,
    m: f64,
}

impl Datum for FieldTrace<'_> {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        let grid = &self.field.grid;
        let k = (round(t / grid.dt()) as usize).min(grid.nt());
        let flat = grid
            .mask
            .cell_at(x, y)
            .expect("field trace sampled outside the grid");
        self.field.at(k, flat)
    }
    fn bound(&self) -> f64 {
        self.field.max_value()
    }
    fn exponent(&self) -> f64 {
        self.m
    }
}

/// Poisson modification `P(u, c)`: `u` outside `c`, the solution with
/// boundary values read off `u` inside. Keeps discrete supersolutions
/// supersolutions and decreases them inside `c` (mirrored for sub).
pub fn poisson_modify(u: &ScalarField, c: &Cylinder, cfg: &SolverConfig) -> Result<ScalarField> {
    if !c.regular {
        return Err(Error::NotRegular);
    }
    let trace = FieldTrace { field: u, m: cfg.m };
    let (sol, _) = solve_ibvp(&u.grid, c, &trace, None, cfg)?;
    let mut out = u.clone();
    let (_, interior) = c.mask.classify();
    for k in (c.t1 + 1)..=c.t2 {
        for &flat in &interior {
            out.set(k, flat, sol.at(k, flat));
        }
    }
    Ok(out)
}

/// Penalized upper-class member: `u >= g` up to the reported violation.
pub fn upper_member(
    grid: &SpaceTimeGrid,
    g: &dyn Datum,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    solve_penalized(
        grid,
        &grid.full_cylinder(),
        g,
        PenaltyParams { delta, sign: PenaltySign::Upper },
        cfg,
    )
}

/// Mirrored lower-class member (`u <= g` up to the violation). The third
/// return is the clamp fraction: the share of window nodes pinned at 0 by
/// the nonnegativity clamp.
pub fn lower_member(
    grid: &SpaceTimeGrid,
    g: &dyn Datum,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport, f64)> {
    let (u, rep) = solve_penalized(
        grid,
        &grid.full_cylinder(),
        g,
        PenaltyParams { delta, sign: PenaltySign::Lower },
        cfg,
    )?;
    let mask = &grid.mask;
    let mut zeros = 0usize;
    let mut total = 0usize;
    for k in 0..=grid.nt() {
        for flat in mask.inside_cells() {
            total += 1;
            if u.at(k, flat) == 0.0 {
                zeros += 1;
            }
        }
    }
    let frac = zeros as f64 / total as f64;
    Ok((u, rep, frac))
}

/// Upper and lower envelopes by exhaustion: stage `j` modifies both
/// chains on `Q_j` and records the probe gap. `jmax = nt - 1` lets the
/// window reach the first step, which is what drives the gap down.
pub fn envelope(
    grid: &SpaceTimeGrid,
    g: &dyn Datum,
    jmax: usize,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<PerronResult> {
    assert!(jmax >= 1, "need at least one stage");
    let (mut wu, _) = upper_member(grid, g, delta, cfg)?;
    let (mut wl, _, _) = lower_member(grid, g, delta, cfg)?;
    let probes = probe_set(grid);
    let mut per_stage = Vec::with_capacity(jmax);
    for j in 1..=jmax {
        let q = grid.exhaustion(j, MAX_EROSION)?;
        wu = poisson_modify(&wu, &q, cfg)?;
        wl = poisson_modify(&wl, &q, cfg)?;
        per_stage.push(StageRecord { j, delta, gap: probe_gap(&wu, &wl, &probes) });
    }
    let gap = probe_gap(&wu, &wl, &probes);
    Ok(PerronResult { upper: wu, lower: wl, gap, per_stage })
}

/// Distance between the upper envelope of the shifted smooth minorant and
/// the lower envelope of the smooth minorant itself; resolutive data sends
/// this to zero under (grid, jsmooth) refinement.
pub fn resolutivity_gap(
    grid: &SpaceTimeGrid,
    g: &dyn Datum,
    jmax: usize,
    jsmooth: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    let phi = smooth_power_approx(grid, g, jsmooth)?;
    let low = envelope(grid, &phi, jmax, RESOLUTIVITY_DELTA, cfg)?;
    let shifted = shift_boundary(&phi, 1.0 / jsmooth as f64);
    let high = envelope(grid, &shifted, jmax, RESOLUTIVITY_DELTA, cfg)?;
    let probes = probe_set(grid);
    Ok(probe_gap(&high.upper, &low.lower, &probes))
}

/// Result of filtering upper-class candidates: indices of those kept and
/// their pointwise minimum (itself an upper-class member).
#[derive(Debug, Clone)]
pub struct UpperClassSelection {
    pub kept: Vec<usize>,
    pub minimum: ScalarField,
}

/// Keeps candidates that pass the one-signed weak-form supersolution test
/// and dominate `g` on the parabolic boundary; returns their min-closure.
pub fn upper_class_filter(
    grid: &SpaceTimeGrid,
    candidates: &[ScalarField],
    g: &dyn Datum,
    cfg: &SolverConfig,
) -> Result<UpperClassSelection> {
    if candidates.is_empty() {
        return Err(Error::EmptyClass);
    }
    let tol = 100.0 * cfg.newton_tol;
    let c = grid.full_cylinder();
    let bank = crate::weak::nonneg_bank(grid, &c);
    let (lateral, _) = grid.mask.classify();
    let mut kept: Vec<usize> = Vec::new();
    let mut minimum: Option<ScalarField> = None;
    'cand: for (idx, u) in candidates.iter().enumerate() {
        if u.check_same_grid(candidates.first().unwrap()).is_err() {
            return Err(Error::MismatchedGrids {
                detail: alloc::format!("candidate {idx} on a different grid"),
            });
        }
        if crate::weak::signed_margin(u, &c, cfg.m, None, &bank) < -tol {
            continue;
        }
        for flat in grid.mask.inside_cells() {
            let (x, y) = grid.mask.coords(flat);
            if u.at(0, flat) < g.eval(x, y, 0.0) - tol {
                continue 'cand;
            }
        }
        for k in 0..=grid.nt() {
            let t = grid.time(k);
            for &flat in &lateral {
                let (x, y) = grid.mask.coords(flat);
                if u.at(k, flat) < g.eval(x, y, t) - tol {
                    continue 'cand;
                }
            }
        }
        minimum = Some(match minimum {
            None => u.clone(),
            Some(acc) => acc.pointwise_min(u)?,
        });
        kept.push(idx);
    }
    match minimum {
        Some(minimum) => Ok(UpperClassSelection { kept, minimum }),
        None => Err(Error::EmptyClass),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Constant;
    use crate::geometry::DomainMask;

    fn grid_1d(n: usize, nt: usize) -> SpaceTimeGrid {
        let mask = DomainMask::interval(n, 2.0 / (n as f64 + 2.0)).unwrap();
        SpaceTimeGrid::new(mask, 0.5, nt).unwrap()
    }

    #[test]
    fn constant_envelope_collapses() {
        let grid = grid_1d(15, 8);
        let cfg = SolverConfig::default();
        let g = Constant { c: 0.6, m: 2.0 };
        let r = envelope(&grid, &g, 7, 1e-2, &cfg).unwrap();
        assert!(r.gap.abs() <= 10.0 * cfg.newton_tol, "gap {}", r.gap);
        for s in &r.per_stage {
            assert!(s.gap.abs() <= 10.0 * cfg.newton_tol, "stage {}", s.j);
        }
        let probes = probe_set(&grid);
        for k in probes.first_slice..=8 {
            for &flat in &probes.cells {
                assert!((r.upper.at(k, flat) - 0.6).abs() <= 1e-8);
                assert!((r.lower.at(k, flat) - 0.6).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn poisson_modify_fixes_solutions() {
        // A field that already solves the scheme on the sub-cylinder is
        // reproduced (same boundary data, same discrete problem).
        let grid = grid_1d(15, 8);
        let cfg = SolverConfig::default();
        let g = Constant { c: 0.45, m: 2.0 };
        let (u, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &cfg).unwrap();
        let q = grid.exhaustion(2, MAX_EROSION).unwrap();
        let w = poisson_modify(&u, &q, &cfg).unwrap();
        assert!(w.max_diff(&u).unwrap() <= 1e-9);
    }

    #[test]
    fn poisson_modify_requires_regular() {
        let grid = grid_1d(9, 4);
        let u = ScalarField::zeros(&grid);
        let mut c = grid.full_cylinder();
        c.regular = false;
        let err = poisson_modify(&u, &c, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotRegular));
    }

    #[test]
    fn upper_class_filter_constants() {
        let grid = grid_1d(11, 4);
        let cfg = SolverConfig::default();
        let g = Constant { c: 0.5, m: 2.0 };
        let c1 = ScalarField::from_fn(&grid, |_, _, _| 0.7);
        let c2 = ScalarField::from_fn(&grid, |_, _, _| 0.9);
        let zero = ScalarField::zeros(&grid);
        let sel = upper_class_filter(&grid, &[c1, c2, zero], &g, &cfg).unwrap();
        assert_eq!(sel.kept, vec![0, 1]);
        assert!((sel.minimum.at(2, 5) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn upper_class_filter_empty() {
        let grid = grid_1d(11, 4);
        let cfg = SolverConfig::default();
        let g = Constant { c: 1.5, m: 2.0 };
        let low = ScalarField::from_fn(&grid, |_, _, _| 0.2);
        let err = upper_class_filter(&grid, &[low], &g, &cfg).unwrap_err();
        assert!(matches!(err, Error::EmptyClass));
    }
}
