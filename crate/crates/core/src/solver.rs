//! Implicit finite-difference solver for `u_t = lap(u^m) + f`.
//!
//! Backward Euler in time (unconditionally stable, monotone, so the
//! discrete comparison principle holds), 2N+1-point Laplacian in space on
//! the mask interior, lateral and initial values pinned from the datum.
//! Each step is solved by a damped Newton iteration on the cell values u.
//!
//! The Newton matrix is `J = diag(a) + A diag(D)` with `A` the (restricted)
//! negative Laplacian, `a = 1/dt + penalty'` and `D = m u^{m-1}`. With the
//! regularized `Dr = max(D, reg_eps)` and `W = diag(sqrt(Dr))` the similar
//! matrix `W J W^{-1} = diag(a) + W A W` is symmetric positive definite, so
//! the inner solve is plain Jacobi-preconditioned conjugate gradients on
//! the transformed system. Flooring `D` at `reg_eps` tames the degeneracy
//! at `u = 0`; the Newton residual itself is untouched, so converged
//! solutions are exact solutions of the unmodified scheme.

use crate::boundary::Datum;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Cylinder, DomainMask, SpaceTimeGrid};
use crate::math::{pos_pow, sqrt};
use crate::weak;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Diffusion exponent, > 1.
    pub m: f64,
    /// Max-norm residual below which a step counts as solved.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Floor for the mobility `m u^{m-1}` in the Newton matrix.
    pub reg_eps: f64,
    /// Relative tolerance of the inner conjugate-gradient solve.
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 2.0,
            newton_tol: 1e-10,
            newton_max_iter: 60,
            reg_eps: 1e-12,
            linear_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn with_m(m: f64) -> SolverConfig {
        assert!(m > 1.0, "slow diffusion needs m > 1");
        SolverConfig { m, ..SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltySign {
    /// Push the solution above the datum: source `zeta(g^m - u^m) psi_+`.
    Upper,
    /// Push it below: source `-zeta(u^m - g^m) psi_-`.
    Lower,
}

#[derive(Debug, Clone, Copy)]
pub struct PenaltyParams {
    pub delta: f64,
    pub sign: PenaltySign,
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    /// Final Newton residual (max norm, projected onto `u >= 0`) of each
    /// time step.
    pub residual_per_step: Vec<f64>,
    pub newton_iters_per_step: Vec<usize>,
    pub max_field: f64,
    /// A-posteriori discrete weak-form residual over the solved window.
    pub weak_form_residual: f64,
    /// Penalized solves: worst constraint violation, `max (g - u)_+` for
    /// the upper sign, `max (u - g)_+` for the lower. Zero otherwise.
    pub penalty_violation: f64,
}

/// Static stencil data for one mask: interior unknowns, their flat
/// neighbor cells, and the unknown index of each neighbor (or NONE when
/// the neighbor is a pinned lateral cell).
pub(crate) struct Layout {
    pub interior: Vec<usize>,
    pub lateral: Vec<usize>,
    nbr: Vec<usize>,
    nbr_eq: Vec<usize>,
    pub ndirs: usize,
    h2: f64,
}

const NONE: usize = usize::MAX;

impl Layout {
    pub fn new(mask: &DomainMask) -> Layout {
        let (lateral, interior) = mask.classify();
        let ndirs = 2 * mask.dim();
        let mut eq = vec![NONE; mask.ncells()];
        for (q, &flat) in interior.iter().enumerate() {
            eq[flat] = q;
        }
        let mut nbr = Vec::with_capacity(interior.len() * ndirs);
        let mut nbr_eq = Vec::with_capacity(interior.len() * ndirs);
        for &flat in &interior {
            for dir in 0..ndirs {
                let nb = mask
                    .neighbor(flat, dir)
                    .expect("interior cell with a stencil arm off the grid");
                nbr.push(nb);
                nbr_eq.push(eq[nb]);
            }
        }
        Layout {
            interior,
            lateral,
            nbr,
            nbr_eq,
            ndirs,
            h2: mask.h() * mask.h(),
        }
    }
}

/// Per-slice penalty data at the target time level.
struct PenaltySlice {
    /// `g^m` per cell.
    gm: Vec<f64>,
    /// `psi_+` (upper) or `psi_-` (lower) per cell, nonnegative.
    psi: Vec<f64>,
    delta: f64,
    upper: bool,
}

impl PenaltySlice {
    /// Piecewise-linear cutoff `zeta(s) = min(1, max(0, 1 + s/delta))`.
    fn zeta(&self, s: f64) -> f64 {
        (1.0 + s / self.delta).clamp(0.0, 1.0)
    }

    fn source(&self, flat: usize, v: f64) -> f64 {
        if self.upper {
            self.zeta(self.gm[flat] - v) * self.psi[flat]
        } else {
            -self.zeta(v - self.gm[flat]) * self.psi[flat]
        }
    }

    /// d(residual)/du contribution; nonnegative for either sign, so the
    /// penalty only strengthens the Newton matrix diagonal.
    fn diag(&self, flat: usize, v: f64, dv_du: f64) -> f64 {
        let s = if self.upper { self.gm[flat] - v } else { v - self.gm[flat] };
        if s > -self.delta && s < 0.0 {
            dv_du * self.psi[flat] / self.delta
        } else {
            0.0
        }
    }
}

struct Work {
    /// `u^m` over all cells of the current iterate.
    v: Vec<f64>,
    resid: Vec<f64>,
    diag_a: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
    utrial: Vec<f64>,
    b: Vec<f64>,
    y: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    z: Vec<f64>,
    q: Vec<f64>,
}

impl Work {
    fn new(ncells: usize, n: usize) -> Work {
        Work {
            v: vec![0.0; ncells],
            resid: vec![0.0; n],
            diag_a: vec![0.0; n],
            w: vec![0.0; n],
            dw: vec![0.0; n],
            utrial: vec![0.0; ncells],
            b: vec![0.0; n],
            y: vec![0.0; n],
            r: vec![0.0; n],
            p: vec![0.0; n],
            z: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

fn fill_power(mask: &DomainMask, u: &[f64], m: f64, v: &mut [f64]) {
    for flat in mask.inside_cells() {
        v[flat] = pos_pow(u[flat], m);
    }
}

/// Newton residual `R = (u - uprev)/dt - lap(u^m) - f - penalty` on the
/// interior unknowns; `v` must hold `u^m`.
fn residual(
    lay: &Layout,
    dt: f64,
    uprev: &[f64],
    u: &[f64],
    v: &[f64],
    f: Option<&[f64]>,
    pen: Option<&PenaltySlice>,
    out: &mut [f64],
) {
    let nd = lay.ndirs;
    for (q, &flat) in lay.interior.iter().enumerate() {
        let mut lap = -(nd as f64) * v[flat];
        for d in 0..nd {
            lap += v[lay.nbr[q * nd + d]];
        }
        lap /= lay.h2;
        let mut r = (u[flat] - uprev[flat]) / dt - lap;
        if let Some(fs) = f {
            r -= fs[flat];
        }
        if let Some(p) = pen {
            r -= p.source(flat, v[flat]);
        }
        out[q] = r;
    }
}

fn norm2(x: &[f64]) -> f64 {
    sqrt(x.iter().map(|&a| a * a).sum())
}

/// Residual norms projected onto the constraint `u >= 0`: at a clamped
/// cell a positive residual only pushes further against the bound
/// (complementarity), so it does not count against convergence. The
/// negative penalty source of the lower member makes this state normal:
/// where the datum vanishes the constrained step has no interior root.
fn projected_norms(lay: &Layout, u: &[f64], resid: &[f64]) -> (f64, f64) {
    let mut two = 0.0;
    let mut inf = 0.0f64;
    for (q, &flat) in lay.interior.iter().enumerate() {
        let r = resid[q];
        if u[flat] <= 0.0 && r > 0.0 {
            continue;
        }
        two += r * r;
        inf = inf.max(r.abs());
    }
    (sqrt(two), inf)
}

/// Jacobi-preconditioned CG on `(diag(a) + W A W) y = b`.
fn cg(lay: &Layout, wk: &mut Work, tol: f64) {
    let n = wk.b.len();
    let nd = lay.ndirs;
    let h2 = lay.h2;
    let matvec = |y: &[f64], out: &mut [f64], wv: &[f64], av: &[f64]| {
        for q in 0..n {
            let mut s = (nd as f64) * wv[q] * y[q];
            for d in 0..nd {
                let j = lay.nbr_eq[q * nd + d];
                if j != NONE {
                    s -= wv[j] * y[j];
                }
            }
            out[q] = av[q] * y[q] + wv[q] * s / h2;
        }
    };
    let bnorm = norm2(&wk.b);
    let stop = (tol * bnorm).max(1e-300);
    wk.y.iter_mut().for_each(|v| *v = 0.0);
    wk.r.copy_from_slice(&wk.b);
    let precond = |r: &[f64], z: &mut [f64], wv: &[f64], av: &[f64]| {
        for q in 0..n {
            z[q] = r[q] / (av[q] + (nd as f64) * wv[q] * wv[q] / h2);
        }
    };
    precond(&wk.r, &mut wk.z, &wk.w, &wk.diag_a);
    wk.p.copy_from_slice(&wk.z);
    let mut rz: f64 = wk.r.iter().zip(&wk.z).map(|(a, b)| a * b).sum();
    let maxit = 20 * n + 200;
    for _ in 0..maxit {
        if norm2(&wk.r) <= stop || rz.abs() < 1e-300 {
            break;
        }
        matvec(&wk.p, &mut wk.q, &wk.w, &wk.diag_a);
        let pq: f64 = wk.p.iter().zip(&wk.q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for q in 0..n {
            wk.y[q] += alpha * wk.p[q];
            wk.r[q] -= alpha * wk.q[q];
        }
        precond(&wk.r, &mut wk.z, &wk.w, &wk.diag_a);
        let rz_new: f64 = wk.r.iter().zip(&wk.z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for q in 0..n {
            wk.p[q] = wk.z[q] + beta * wk.p[q];
        }
    }
}

/// One backward-Euler step. `u` enters with lateral values pinned and a
/// warm-started interior, and leaves solved. Returns (iters, residual).
#[allow(clippy::too_many_arguments)]
fn implicit_step(
    lay: &Layout,
    mask: &DomainMask,
    cfg: &SolverConfig,
    dt: f64,
    step: usize,
    uprev: &[f64],
    u: &mut [f64],
    f: Option<&[f64]>,
    pen: Option<&PenaltySlice>,
    wk: &mut Work,
) -> Result<(usize, f64)> {
    let n = lay.interior.len();
    let m = cfg.m;
    fill_power(mask, u, m, &mut wk.v);
    let mut resid = core::mem::take(&mut wk.resid);
    residual(lay, dt, uprev, u, &wk.v, f, pen, &mut resid);
    let (mut n0, mut linf) = projected_norms(lay, u, &resid);
    let mut iters = 0;
    while linf > cfg.newton_tol {
        if iters >= cfg.newton_max_iter {
            wk.resid = resid;
            return Err(Error::NewtonDivergence { step, residual: linf });
        }
        // Assemble diag(a) and W, symmetrize, solve for the update.
        for (q, &flat) in lay.interior.iter().enumerate() {
            let d = m * pos_pow(u[flat], m - 1.0);
            let dr = d.max(cfg.reg_eps);
            wk.w[q] = sqrt(dr);
            let mut a = 1.0 / dt;
            if let Some(p) = pen {
                a += p.diag(flat, wk.v[flat], d);
            }
            wk.diag_a[q] = a;
            wk.b[q] = wk.w[q] * resid[q];
        }
        cg(lay, wk, cfg.linear_tol);
        for q in 0..n {
            wk.dw[q] = wk.y[q] / wk.w[q];
        }
        // Backtracking on the projected 2-norm; the iterate stays
        // nonnegative.
        let mut s = 1.0;
        let mut trial = (0.0, 0.0);
        for _ in 0..30 {
            wk.utrial.copy_from_slice(u);
            for (q, &flat) in lay.interior.iter().enumerate() {
                wk.utrial[flat] = (u[flat] - s * wk.dw[q]).max(0.0);
            }
            fill_power(mask, &wk.utrial, m, &mut wk.v);
            residual(lay, dt, uprev, &wk.utrial, &wk.v, f, pen, &mut resid);
            trial = projected_norms(lay, &wk.utrial, &resid);
            if trial.0 <= (1.0 - 1e-4 * s) * n0 {
                break;
            }
            s *= 0.5;
        }
        u.copy_from_slice(&wk.utrial);
        n0 = trial.0;
        linf = trial.1;
        iters += 1;
    }
    wk.resid = resid;
    Ok((iters, linf))
}

fn validate_window(grid: &SpaceTimeGrid, c: &Cylinder) -> Result<()> {
    if !c.mask.same_layout(&grid.mask) || !c.mask.subset_of(&grid.mask) {
        return Err(Error::MismatchedGrids {
            detail: format!(
                "cylinder base {}x{} not a sub-mask of the grid {}x{}",
                c.mask.nx(),
                c.mask.ny(),
                grid.mask.nx(),
                grid.mask.ny()
            ),
        });
    }
    if c.t1 >= c.t2 || c.t2 > grid.nt() {
        return Err(Error::InvalidGrid {
            detail: format!("time window {}..{} on 0..{}", c.t1, c.t2, grid.nt()),
        });
    }
    if c.mask.n_inside() == 0 {
        return Err(Error::EmptyCylinder {
            detail: format!("window {}..{}", c.t1, c.t2),
        });
    }
    Ok(())
}

fn eval_checked(g: &dyn Datum, x: f64, y: f64, t: f64) -> Result<f64> {
    let v = g.eval(x, y, t);
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::NegativeBoundary { x, y, t, value: v });
    }
    Ok(v)
}

fn march(
    grid: &SpaceTimeGrid,
    c: &Cylinder,
    g: &dyn Datum,
    f: Option<&ScalarField>,
    pen: Option<&PenaltyParams>,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    validate_window(grid, c)?;
    if let Some(ff) = f {
        if !ff.grid.mask.same_layout(&grid.mask) || ff.grid.nt() != grid.nt() {
            return Err(Error::MismatchedGrids {
                detail: format!("source field has nt {}", ff.grid.nt()),
            });
        }
    }
    debug_assert!(
        (g.exponent() - cfg.m).abs() < 1e-12,
        "datum exponent disagrees with the solver m"
    );
    let mask = &c.mask;
    let lay = Layout::new(mask);
    let ncells = mask.ncells();
    let mut wk = Work::new(ncells, lay.interior.len());
    let mut field = ScalarField::zeros(grid);
    let dt = grid.dt();

    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        field.set(c.t1, flat, eval_checked(g, x, y, grid.time(c.t1))?);
    }

    let mut report = SolveReport::default();
    let mut uprev = vec![0.0; ncells];
    let mut unew = vec![0.0; ncells];
    let mut pen_slice = pen.map(|p| PenaltySlice {
        gm: vec![0.0; ncells],
        psi: vec![0.0; ncells],
        delta: p.delta,
        upper: p.sign == PenaltySign::Upper,
    });

    for k in c.t1..c.t2 {
        let tn = grid.time(k + 1);
        uprev.copy_from_slice(field.slice(k));
        unew.copy_from_slice(&uprev);
        for &flat in &lay.lateral {
            let (x, y) = mask.coords(flat);
            unew[flat] = eval_checked(g, x, y, tn)?;
        }
        if let Some(ps) = &mut pen_slice {
            for flat in mask.inside_cells() {
                let (x, y) = mask.coords(flat);
                let gv = g.eval(x, y, tn);
                ps.gm[flat] = pos_pow(gv, cfg.m);
                let psi = g.psi(x, y, tn).ok_or(Error::MissingSmoothness)?;
                ps.psi[flat] = if ps.upper { psi.max(0.0) } else { (-psi).max(0.0) };
            }
        }
        let fsl = f.map(|ff| ff.slice(k + 1));
        let (iters, res) = implicit_step(
            &lay,
            mask,
            cfg,
            dt,
            k + 1,
            &uprev,
            &mut unew,
            fsl,
            pen_slice.as_ref(),
            &mut wk,
        )?;
        report.newton_iters_per_step.push(iters);
        report.residual_per_step.push(res);
        field.slice_mut(k + 1).copy_from_slice(&unew);
    }

    for k in c.t1..=c.t2 {
        for flat in mask.inside_cells() {
            report.max_field = report.max_field.max(field.at(k, flat));
        }
    }
    let bank = weak::test_bank(grid, c);
    report.weak_form_residual = weak::window_residual(&field, c, cfg.m, f, &bank);
    if let Some(p) = pen {
        let mut worst = 0.0f64;
        for k in c.t1..=c.t2 {
            let t = grid.time(k);
            for flat in mask.inside_cells() {
                let (x, y) = mask.coords(flat);
                let gv = g.eval(x, y, t);
                let gap = match p.sign {
                    PenaltySign::Upper => gv - field.at(k, flat),
                    PenaltySign::Lower => field.at(k, flat) - gv,
                };
                worst = worst.max(gap);
            }
        }
        report.penalty_violation = worst;
    }
    Ok((field, report))
}

/// Initial-boundary value problem on a (sub-)cylinder of `grid`. Lateral
/// and initial values come from `g`; the returned field lives on the full
/// grid with zeros outside the window.
pub fn solve_ibvp(
    grid: &SpaceTimeGrid,
    c: &Cylinder,
    g: &dyn Datum,
    f: Option<&ScalarField>,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    march(grid, c, g, f, None, cfg)
}

/// Penalized problem keeping the solution on one side of the datum:
/// `u_t - lap(u^m) = zeta_delta(g^m - u^m) psi_+` for the upper sign (so
/// `u >= g` up to a violation that vanishes with delta), mirrored for the
/// lower sign. Requires datum derivative metadata for `psi`.
pub fn solve_penalized(
    grid: &SpaceTimeGrid,
    c: &Cylinder,
    g: &dyn Datum,
    p: PenaltyParams,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    assert!(p.delta > 0.0, "penalty width must be positive");
    if !g.smooth() || !g.has_derivatives() {
        return Err(Error::MissingSmoothness);
    }
    march(grid, c, g, None, Some(&p), cfg)
}

/// Per-slice distributional gap to the initial datum:
/// `t_k -> |sum_x (u(x, t_k) - g(x, 0)) eta(x)| h^N` for a spatial test
/// function `eta` given per cell.
pub fn initial_value_gap(u: &ScalarField, g: &dyn Datum, eta: &[f64]) -> Vec<f64> {
    let mask = &u.grid.mask;
    assert_eq!(eta.len(), mask.ncells(), "eta is a per-cell vector");
    let vol = mask.cell_volume();
    let mut init = 0.0;
    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        init += g.eval(x, y, 0.0) * eta[flat];
    }
    (0..=u.grid.nt())
        .map(|k| {
            let mut s = 0.0;
            for flat in mask.inside_cells() {
                s += u.at(k, flat) * eta[flat];
            }
            ((s - init) * vol).abs()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{Constant, LinearInT};
    use crate::geometry::DomainMask;

    fn grid_1d(n: usize, t: f64, nt: usize) -> SpaceTimeGrid {
        let mask = DomainMask::interval(n, 1.0 / (n as f64 + 2.0)).unwrap();
        SpaceTimeGrid::new(mask, t, nt).unwrap()
    }

    #[test]
    fn constant_datum_is_exact() {
        let grid = grid_1d(17, 0.5, 8);
        let g = Constant { c: 0.7, m: 2.0 };
        let (u, rep) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &SolverConfig::default())
            .unwrap();
        for k in 0..=8 {
            for flat in grid.mask.inside_cells() {
                assert!((u.at(k, flat) - 0.7).abs() <= 1e-9);
            }
        }
        assert!(rep.weak_form_residual < 1e-8, "{}", rep.weak_form_residual);
    }

    #[test]
    fn zero_datum_zero_solution() {
        let grid = grid_1d(9, 0.3, 4);
        let g = Constant { c: 0.0, m: 2.0 };
        let (u, _) =
            solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &SolverConfig::default()).unwrap();
        assert_eq!(u.max_value(), 0.0);
    }

    #[test]
    fn negative_datum_rejected() {
        let grid = grid_1d(9, 0.3, 4);
        struct Bad;
        impl Datum for Bad {
            fn eval(&self, x: f64, _y: f64, _t: f64) -> f64 {
                -x
            }
            fn bound(&self) -> f64 {
                1.0
            }
            fn exponent(&self) -> f64 {
                2.0
            }
        }
        let err = solve_ibvp(&grid, &grid.full_cylinder(), &Bad, None, &SolverConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::NegativeBoundary { .. }));
    }

    #[test]
    fn linear_in_t_penalized_upper_exact() {
        // g = a + bt has psi = b > 0 and zeta(0) = 1, so u = g solves the
        // penalized equation exactly.
        let grid = grid_1d(13, 0.4, 6);
        let g = LinearInT::new(0.3, 0.5, 2.0, 0.4);
        let p = PenaltyParams { delta: 1e-2, sign: PenaltySign::Upper };
        let (u, rep) =
            solve_penalized(&grid, &grid.full_cylinder(), &g, p, &SolverConfig::default())
                .unwrap();
        for k in 0..=6 {
            let t = grid.time(k);
            for flat in grid.mask.inside_cells() {
                assert!((u.at(k, flat) - (0.3 + 0.5 * t)).abs() <= 1e-8, "slice {k}");
            }
        }
        assert!(rep.penalty_violation <= 1e-8);
    }

    #[test]
    fn penalized_needs_smoothness() {
        let grid = grid_1d(9, 0.3, 4);
        struct Rough;
        impl Datum for Rough {
            fn eval(&self, _x: f64, _y: f64, _t: f64) -> f64 {
                0.5
            }
            fn bound(&self) -> f64 {
                0.5
            }
            fn exponent(&self) -> f64 {
                2.0
            }
        }
        let p = PenaltyParams { delta: 1e-2, sign: PenaltySign::Upper };
        let err = solve_penalized(&grid, &grid.full_cylinder(), &Rough, p, &SolverConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingSmoothness));
    }

    #[test]
    fn maximum_principle() {
        // Decaying datum, no source: the maximum sits on the parabolic
        // boundary.
        let grid = grid_1d(21, 0.5, 10);
        let g = LinearInT::new(0.8, -1.0, 2.0, 0.5);
        let cfg = SolverConfig::default();
        let (u, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &cfg).unwrap();
        assert!(u.max_value() <= 0.8 + 10.0 * cfg.newton_tol);
    }

    #[test]
    fn comparison_of_ordered_data() {
        let grid = grid_1d(15, 0.4, 8);
        let cfg = SolverConfig::default();
        let g1 = LinearInT::new(0.2, 0.3, 2.0, 0.4);
        let g2 = LinearInT::new(0.3, 0.4, 2.0, 0.4);
        let (u1, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g1, None, &cfg).unwrap();
        let (u2, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g2, None, &cfg).unwrap();
        for k in 0..=8 {
            for flat in grid.mask.inside_cells() {
                assert!(u1.at(k, flat) <= u2.at(k, flat) + 10.0 * cfg.newton_tol);
            }
        }
    }

    #[test]
    fn conservation_on_torus() {
        let mask = DomainMask::torus(24, 1, 0.05).unwrap();
        let grid = SpaceTimeGrid::new(mask, 0.2, 6).unwrap();
        struct Hump;
        impl Datum for Hump {
            fn eval(&self, x: f64, _y: f64, _t: f64) -> f64 {
                0.2 + (1.0 - 4.0 * x * x).max(0.0)
            }
            fn bound(&self) -> f64 {
                1.2
            }
            fn exponent(&self) -> f64 {
                2.0
            }
        }
        let (u, _) =
            solve_ibvp(&grid, &grid.full_cylinder(), &Hump, None, &SolverConfig::default())
                .unwrap();
        let m0 = u.slice_integral(0);
        for k in 1..=6 {
            assert!((u.slice_integral(k) - m0).abs() <= 1e-8 * m0, "slice {k}");
        }
    }

    #[test]
    fn initial_gap_zero_for_constant() {
        let grid = grid_1d(11, 0.3, 5);
        let g = Constant { c: 0.4, m: 2.0 };
        let (u, _) =
            solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &SolverConfig::default()).unwrap();
        let mut eta = vec![0.0; grid.mask.ncells()];
        let (_, interior) = grid.mask.classify();
        for &flat in &interior {
            eta[flat] = 1.0;
        }
        for gap in initial_value_gap(&u, &g, &eta) {
            assert!(gap <= 1e-9);
        }
    }

    #[test]
    fn wrong_initial_values_detected() {
        let grid = grid_1d(11, 0.3, 5);
        let u = ScalarField::zeros(&grid);
        let g = Constant { c: 1.0, m: 2.0 };
        let mut eta = vec![0.0; grid.mask.ncells()];
        let (_, interior) = grid.mask.classify();
        for &flat in &interior {
            eta[flat] = 1.0;
        }
        let gaps = initial_value_gap(&u, &g, &eta);
        let expect = interior.len() as f64 * grid.mask.cell_volume();
        for gap in gaps {
            assert!((gap - expect).abs() <= 1e-12);
        }
    }
}
