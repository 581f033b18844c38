//! Quantitative checkers for the estimates behind the construction:
//! boundary-shift stability, comparison, Caccioppoli, time-derivative and
//! Poisson-modification energies, initial-value attainment.
//!
//! Conventions: integrals by the midpoint rule on the solver grid with
//! right-endpoint time slices, time derivatives by forward differences,
//! gradients on stencil edges. Estimates whose constant the underlying
//! theory leaves unspecified are checked as bounded-ratio diagnostics
//! against a calibration constant frozen in this file; the pass condition
//! is a bounded, nonincreasing ratio under refinement, not a magic number.

use crate::boundary::Datum;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Cylinder, DomainMask};
use crate::math::pos_pow;
use crate::solver::initial_value_gap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::vec;

/// Calibration constant of `time_energy_check`, frozen at ~1.4x the
/// worst ratio over the reference family: the Barenblatt refinement
/// ladder (degenerate edge, needs 0.008) and a strictly positive 1D bump
/// run (no free boundary, needs 0.036). A field that is not a solution
/// overshoots by orders of magnitude (its discrete time derivative does
/// not cancel against the diffusion term), so the headroom keeps teeth.
pub const TIME_ENERGY_CSTAR: f64 = 0.05;

/// Calibration constant of `poisson_energy_check`, fixed from the coarse
/// reference run (same ladder) and frozen.
pub const POISSON_ENERGY_CSTAR: f64 = 1.0;

/// Calibration constant of `initial_attainment_check`: the admissible
/// slope of the distributional initial gap is
/// `ATTAIN_CSTAR (1 + M^m) |Omega| ||grad eta||_inf`. Frozen at 3x the
/// worst slope observed on penalized envelope members (0.064, square
/// 16x16 bump run); a flat non-attaining offset needs ~20x more.
pub const ATTAIN_CSTAR: f64 = 0.2;

/// Slack applied to bounded-ratio checks: a report passes when
/// `lhs <= slack * rhs`, so the frozen reference sits at ratio 1.
const RATIO_SLACK: f64 = 1.05;

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs - lhs`.
    pub margin: f64,
    /// Named scalars describing the run (serialized as the JSON context).
    pub context: Vec<(String, f64)>,
}

impl EstimateReport {
    fn new(
        name: &str,
        lhs: f64,
        rhs: f64,
        satisfied: bool,
        context: Vec<(String, f64)>,
    ) -> EstimateReport {
        EstimateReport {
            name: String::from(name),
            lhs,
            rhs,
            satisfied,
            margin: rhs - lhs,
            context,
        }
    }
}

/// Inside-inside stencil edges of a mask.
fn edges(mask: &DomainMask) -> Vec<(usize, usize)> {
    let dirs: &[usize] = if mask.dim() == 1 { &[1] } else { &[1, 3] };
    let mut out = Vec::new();
    for flat in mask.inside_cells() {
        for &dir in dirs {
            if let Some(nb) = mask.neighbor(flat, dir) {
                if mask.is_inside(nb) {
                    out.push((flat, nb));
                }
            }
        }
    }
    out
}

/// Boundary-shift stability: `int (u_eps - u)(u_eps^m - u^m)` against the
/// closed-form bound `eps^m |Q| (M+1) + eps |Q| (M+1)^m`, where `u_eps`
/// solves with the datum shifted by `eps` and `M` bounds the datum.
pub fn oleinik_gap(
    u: &ScalarField,
    u_eps: &ScalarField,
    eps: f64,
    m: f64,
    bound: f64,
) -> Result<EstimateReport> {
    u.check_same_grid(u_eps)?;
    let grid = &u.grid;
    let mask = &grid.mask;
    let vol = mask.cell_volume();
    let dt = grid.dt();
    let mut lhs = 0.0;
    for k in 1..=grid.nt() {
        for flat in mask.inside_cells() {
            let a = u.at(k, flat);
            let b = u_eps.at(k, flat);
            lhs += (b - a) * (pos_pow(b, m) - pos_pow(a, m));
        }
    }
    lhs *= vol * dt;
    let cyl = mask.n_inside() as f64 * vol * grid.t_final();
    let rhs = pos_pow(eps, m) * cyl * (bound + 1.0) + eps * cyl * pos_pow(bound + 1.0, m);
    let satisfied = lhs <= 1.05 * rhs + 1e-12;
    Ok(EstimateReport::new(
        "oleinik_gap",
        lhs,
        rhs,
        satisfied,
        vec![
            (String::from("eps"), eps),
            (String::from("m"), m),
            (String::from("bound"), bound),
            (String::from("cylinder_volume"), cyl),
        ],
    ))
}

/// Comparison principle: with `sub <= super` on the parabolic boundary,
/// no interior crossing beyond `10 newton_tol`. A violated *hypothesis*
/// is an error (the check is inapplicable), not a failed report.
pub fn comparison_check(
    sub: &ScalarField,
    sup: &ScalarField,
    newton_tol: f64,
) -> Result<EstimateReport> {
    sub.check_same_grid(sup)?;
    let grid = &sub.grid;
    let mask = &grid.mask;
    let tol = 10.0 * newton_tol;
    let (lateral, interior) = mask.classify();
    let mut boundary_excess = f64::NEG_INFINITY;
    for flat in mask.inside_cells() {
        boundary_excess = boundary_excess.max(sub.at(0, flat) - sup.at(0, flat));
    }
    for k in 0..=grid.nt() {
        for &flat in &lateral {
            boundary_excess = boundary_excess.max(sub.at(k, flat) - sup.at(k, flat));
        }
    }
    if boundary_excess > tol {
        return Err(Error::BoundaryOrderingViolated { max_excess: boundary_excess });
    }
    let mut lhs = f64::NEG_INFINITY;
    for k in 1..=grid.nt() {
        for &flat in &interior {
            lhs = lhs.max(sub.at(k, flat) - sup.at(k, flat));
        }
    }
    if !lhs.is_finite() {
        lhs = 0.0;
    }
    let satisfied = lhs <= tol;
    Ok(EstimateReport::new(
        "comparison_check",
        lhs,
        tol,
        satisfied,
        vec![(String::from("boundary_excess"), boundary_excess)],
    ))
}

/// Interior energy bound `int eta^2 |grad u^m|^2` against
/// `16 M^{2m} T int |grad eta|^2 + 6 M^{m+1} int eta^2`, literal
/// constants, no fitting.
pub fn caccioppoli_check(u: &ScalarField, eta: &[f64], m: f64, bound: f64) -> EstimateReport {
    let grid = &u.grid;
    let mask = &grid.mask;
    assert_eq!(eta.len(), mask.ncells(), "eta is a per-cell vector");
    let vol = mask.cell_volume();
    let dt = grid.dt();
    let h = mask.h();
    let es = edges(mask);
    let mut lhs = 0.0;
    for k in 1..=grid.nt() {
        for &(a, b) in &es {
            let dv = (pos_pow(u.at(k, a), m) - pos_pow(u.at(k, b), m)) / h;
            lhs += dv * dv * 0.5 * (eta[a] * eta[a] + eta[b] * eta[b]);
        }
    }
    lhs *= vol * dt;
    let grad_eta2: f64 = es
        .iter()
        .map(|&(a, b)| {
            let d = (eta[a] - eta[b]) / h;
            d * d
        })
        .sum::<f64>()
        * vol;
    let eta2: f64 = mask.inside_cells().map(|flat| eta[flat] * eta[flat]).sum::<f64>() * vol;
    let t = grid.t_final();
    let rhs = 16.0 * pos_pow(bound, 2.0 * m) * t * grad_eta2 + 6.0 * pos_pow(bound, m + 1.0) * eta2;
    let satisfied = lhs <= rhs * (1.0 + 1e-9) + 1e-12;
    EstimateReport::new(
        "caccioppoli_check",
        lhs,
        rhs,
        satisfied,
        vec![
            (String::from("m"), m),
            (String::from("bound"), bound),
            (String::from("t_final"), t),
        ],
    )
}

/// Time-derivative energy `int |d_t u^q|^2` against the datum/source
/// energies, as a bounded-ratio diagnostic with the frozen calibration
/// constant. Needs datum derivative metadata (a.e. data suffices).
pub fn time_energy_check(
    u: &ScalarField,
    g: &dyn Datum,
    f: Option<&ScalarField>,
    q: f64,
) -> Result<EstimateReport> {
    let m = g.exponent();
    assert!(
        q >= (m + 1.0) / 2.0 - 1e-12,
        "time-energy exponent must be at least (m+1)/2"
    );
    if !g.has_derivatives() {
        return Err(Error::MissingSmoothness);
    }
    let grid = &u.grid;
    let mask = &grid.mask;
    let vol = mask.cell_volume();
    let dt = grid.dt();
    let nt = grid.nt();
    let mut lhs = 0.0;
    for k in 0..nt {
        for flat in mask.inside_cells() {
            let d = (pos_pow(u.at(k + 1, flat), q) - pos_pow(u.at(k, flat), q)) / dt;
            lhs += d * d;
        }
    }
    lhs *= vol * dt;

    // Endpoint trace term, evaluated at the first and last slice literally.
    let mut e1 = 0.0;
    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        let a = g
            .gm_time_derivative(x, y, grid.t_final())
            .ok_or(Error::MissingSmoothness)?
            * u.at(nt, flat);
        let b = g.gm_time_derivative(x, y, 0.0).ok_or(Error::MissingSmoothness)?
            * g.eval(x, y, 0.0);
        e1 += (a - b).abs();
    }
    e1 *= vol;

    let mut e2 = 0.0;
    let mut e3 = 0.0;
    for k in 1..=nt {
        let t = grid.time(k);
        for flat in mask.inside_cells() {
            let (x, y) = mask.coords(flat);
            let uv = u.at(k, flat);
            let fv = f.map_or(0.0, |ff| ff.at(k, flat));
            let lap = g.laplacian_gm(x, y, t).ok_or(Error::MissingSmoothness)?;
            let gmt = g.gm_time_derivative(x, y, t).ok_or(Error::MissingSmoothness)?;
            let gmtt = g
                .gm_second_time_derivative(x, y, t)
                .ok_or(Error::MissingSmoothness)?;
            e2 += uv * uv + pos_pow(uv, m - 1.0) * (fv * fv + lap * lap);
            e3 += gmt * gmt + lap * lap + gmtt * gmtt + fv * fv;
        }
    }
    e2 *= vol * dt;
    e3 *= vol * dt;

    let rhs = TIME_ENERGY_CSTAR * (e1 + e2 + e3);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let satisfied = lhs <= RATIO_SLACK * rhs + 1e-14;
    Ok(EstimateReport::new(
        "time_energy_check",
        lhs,
        rhs,
        satisfied,
        vec![
            (String::from("ratio"), ratio),
            (String::from("q"), q),
            (String::from("m"), m),
            (String::from("cstar"), TIME_ENERGY_CSTAR),
        ],
    ))
}

/// Energy of a Poisson modification `u = P(v, c)` against the energies of
/// the field `v` it modified, bounded-ratio with the frozen constant.
pub fn poisson_energy_check(
    u: &ScalarField,
    v: &ScalarField,
    c: &Cylinder,
    m: f64,
) -> EstimateReport {
    let grid = &u.grid;
    let mask = &c.mask;
    let vol = mask.cell_volume();
    let dt = grid.dt();
    let h = mask.h();
    let es = edges(mask);
    let energy = |w: &ScalarField| {
        let mut grad = 0.0;
        let mut sup_slice = 0.0f64;
        let mut sq = 0.0;
        let mut dtm = 0.0;
        for k in c.t1..=c.t2 {
            if k > c.t1 {
                for &(a, b) in &es {
                    let d = (pos_pow(w.at(k, a), m) - pos_pow(w.at(k, b), m)) / h;
                    grad += d * d;
                }
            }
            let mut slice = 0.0;
            for flat in mask.inside_cells() {
                let wv = w.at(k, flat);
                slice += pos_pow(wv, m + 1.0);
                sq += wv * wv;
                if k < c.t2 {
                    let d = (pos_pow(w.at(k + 1, flat), m) - pos_pow(wv, m)) / dt;
                    dtm += d * d;
                }
            }
            sup_slice = sup_slice.max(slice * vol);
        }
        (grad * vol * dt, sup_slice, sq * vol * dt, dtm * vol * dt)
    };
    let (ugrad, usup, _, _) = energy(u);
    let (vgrad, vsup, vsq, vdtm) = energy(v);
    let lhs = ugrad + usup;
    let rhs = POISSON_ENERGY_CSTAR * (vgrad + vsq + vdtm + vsup);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let satisfied = lhs <= RATIO_SLACK * rhs + 1e-14;
    EstimateReport::new(
        "poisson_energy_check",
        lhs,
        rhs,
        satisfied,
        vec![
            (String::from("ratio"), ratio),
            (String::from("m"), m),
            (String::from("cstar"), POISSON_ENERGY_CSTAR),
        ],
    )
}

/// Initial-value attainment: the distributional gap to the initial datum
/// must vanish at t = 0 and stay under the linear-in-t envelope
/// `ATTAIN_CSTAR (1 + M^m) |Omega| ||grad eta||_inf t` on the first
/// quarter of slices, `M` bounding both field and datum. The closed-form
/// slope (rather than one fitted from the early slices) admits penalized
/// members, whose first-step transient is steeper than their later drift
/// but still Lipschitz; a least-squares line through the origin would
/// reject exactly those. The fitted slope is still reported as context.
pub fn initial_attainment_check(
    u: &ScalarField,
    g: &dyn Datum,
    eta_bank: &[Vec<f64>],
) -> EstimateReport {
    let grid = &u.grid;
    let mask = &grid.mask;
    let nt = grid.nt();
    let kfit = (nt.div_ceil(4)).max(2);
    let vol = mask.cell_volume();
    let h = mask.h();
    let atol = 1e-9 * (1.0 + u.max_value()) * mask.n_inside() as f64 * vol;
    let mbig = u.max_value().max(g.bound());
    let scale = (1.0 + pos_pow(mbig, g.exponent())) * mask.n_inside() as f64 * vol;
    let es = edges(mask);
    let mut lhs = 0.0f64;
    let mut max_cap = 0.0f64;
    let mut max_slope = 0.0f64;
    for eta in eta_bank {
        assert_eq!(eta.len(), mask.ncells(), "eta is a per-cell vector");
        let mut grad_inf = 0.0f64;
        for &(a, b) in &es {
            grad_inf = grad_inf.max((eta[a] - eta[b]).abs() / h);
        }
        let cap = ATTAIN_CSTAR * scale * grad_inf;
        max_cap = max_cap.max(cap);
        let gaps = initial_value_gap(u, g, eta);
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, gap) in gaps.iter().enumerate().take(kfit + 1) {
            let t = grid.time(k);
            num += gap * t;
            den += t * t;
            lhs = lhs.max(gap - cap * t);
        }
        if den > 0.0 {
            max_slope = max_slope.max(num / den);
        }
    }
    let satisfied = lhs <= atol;
    EstimateReport::new(
        "initial_attainment_check",
        lhs,
        atol,
        satisfied,
        vec![
            (String::from("slope_cap"), max_cap),
            (String::from("fitted_slope"), max_slope),
            (String::from("slices_checked"), kfit as f64),
        ],
    )
}

/// Default nonnegative spatial test functions, compactly supported in the
/// mask interior: a tapered plateau and a tapered fundamental mode.
pub fn default_eta_bank(mask: &DomainMask) -> Vec<Vec<f64>> {
    let ncells = mask.ncells();
    let mut depth = vec![0usize; ncells];
    for flat in mask.inside_cells() {
        depth[flat] = 1;
    }
    let mut eroded = mask.clone();
    for _ in 1..4 {
        eroded = eroded.erode(1);
        for flat in eroded.inside_cells() {
            depth[flat] += 1;
        }
    }
    let (mut xa, mut xb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ya, mut yb) = (f64::INFINITY, f64::NEG_INFINITY);
    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        xa = xa.min(x);
        xb = xb.max(x);
        ya = ya.min(y);
        yb = yb.max(y);
    }
    let mut plateau = vec![0.0; ncells];
    let mut mode = vec![0.0; ncells];
    for flat in mask.inside_cells() {
        if depth[flat] < 2 {
            continue;
        }
        let taper = ((depth[flat] - 1) as f64 / 3.0).min(1.0);
        let (x, y) = mask.coords(flat);
        let sx = crate::math::sin(core::f64::consts::PI * (x - xa) / (xb - xa));
        let sy = if mask.dim() == 1 {
            1.0
        } else {
            crate::math::sin(core::f64::consts::PI * (y - ya) / (yb - ya))
        };
        plateau[flat] = taper;
        mode[flat] = taper * sx * sy;
    }
    vec![plateau, mode]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Constant;
    use crate::geometry::{DomainMask, SpaceTimeGrid};

    fn grid_1d(n: usize, nt: usize) -> SpaceTimeGrid {
        let mask = DomainMask::interval(n, 1.0 / (n as f64 + 2.0)).unwrap();
        SpaceTimeGrid::new(mask, 1.0, nt).unwrap()
    }

    #[test]
    fn oleinik_constants() {
        let grid = grid_1d(16, 8);
        let u = ScalarField::zeros(&grid);
        let ue = ScalarField::from_fn(&grid, |_, _, _| 0.1);
        let rep = oleinik_gap(&u, &ue, 0.1, 2.0, 0.0).unwrap();
        let cyl = 16.0 / 18.0;
        assert!((rep.lhs - 1e-3 * cyl).abs() < 1e-12);
        assert!((rep.rhs - 0.11 * cyl).abs() < 1e-12);
        assert!(rep.satisfied);
    }

    #[test]
    fn oleinik_zero_shift() {
        let grid = grid_1d(12, 6);
        let u = ScalarField::from_fn(&grid, |_, _, _| 0.4);
        let rep = oleinik_gap(&u, &u, 0.0, 2.0, 0.4).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn comparison_constants_and_violation() {
        let grid = grid_1d(12, 6);
        let lo = ScalarField::from_fn(&grid, |_, _, _| 0.3);
        let hi = ScalarField::from_fn(&grid, |_, _, _| 0.5);
        let rep = comparison_check(&lo, &hi, 1e-10).unwrap();
        assert!(rep.satisfied);
        assert!(rep.lhs <= -0.2 + 1e-15);
        let same = comparison_check(&lo, &lo, 1e-10).unwrap();
        assert!(same.satisfied && same.lhs.abs() < 1e-15);
        let err = comparison_check(&hi, &lo, 1e-10).unwrap_err();
        assert!(matches!(err, Error::BoundaryOrderingViolated { .. }));
    }

    #[test]
    fn caccioppoli_constant_field() {
        let grid = grid_1d(14, 6);
        let u = ScalarField::from_fn(&grid, |_, _, _| 0.9);
        let eta = default_eta_bank(&grid.mask).remove(0);
        let rep = caccioppoli_check(&u, &eta, 2.0, 0.9);
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.rhs > 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn time_energy_constant() {
        let grid = grid_1d(14, 6);
        let g = Constant { c: 0.7, m: 2.0 };
        let u = ScalarField::from_fn(&grid, |_, _, _| 0.7);
        let rep = time_energy_check(&u, &g, None, 1.5).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn poisson_energy_constant() {
        let grid = grid_1d(14, 6);
        let u = ScalarField::from_fn(&grid, |_, _, _| 0.5);
        let rep = poisson_energy_check(&u, &u, &grid.full_cylinder(), 2.0);
        assert!(rep.satisfied, "ratio {}", rep.lhs / rep.rhs);
        assert!(rep.lhs > 0.0);
    }

    #[test]
    fn initial_attainment_constant_and_corrupted() {
        let grid = grid_1d(14, 8);
        let g = Constant { c: 0.6, m: 2.0 };
        let u = ScalarField::from_fn(&grid, |_, _, _| 0.6);
        let bank = default_eta_bank(&grid.mask);
        let rep = initial_attainment_check(&u, &g, &bank);
        assert!(rep.satisfied, "clean field should pass: lhs {}", rep.lhs);
        let mut bad = u.clone();
        for flat in 0..grid.mask.ncells() {
            if grid.mask.is_inside(flat) {
                bad.set(0, flat, 1.4);
            }
        }
        let rep = initial_attainment_check(&bad, &g, &bank);
        assert!(!rep.satisfied, "corrupted initial slice must fail");
    }
}
