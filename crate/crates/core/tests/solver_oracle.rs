//! Solver accuracy against the closed-form source solution, plus the
//! structural solver guarantees (conservation, maximum principle,
//! comparison against a truncated source supersolution).

use pme_core::boundary::{Bump, Datum};
use pme_core::exact::{sample, BarenblattParams, BarenblattTrace};
use pme_core::geometry::{DomainMask, SpaceTimeGrid};
use pme_core::solver::solve_ibvp;
use pme_core::weak::{test_bank, weak_form_residual};
use pme_core::SolverConfig;

const C1: f64 = 0.3605623925768521; // 3^(1/3)/4: unit-mass constant, 1D m=2

fn max_error_vs_exact(nx: usize, nt: usize) -> f64 {
    let p = BarenblattParams { n: 1, m: 2.0, c: C1, t0: 0.1 };
    let h = 3.2 / nx as f64;
    let mask = DomainMask::interval(nx, h).unwrap();
    let grid = SpaceTimeGrid::new(mask, 0.15, nt).unwrap();
    let cfg = SolverConfig::with_m(2.0);
    let trace = BarenblattTrace { p };
    let (u, _) = solve_ibvp(&grid, &grid.full_cylinder(), &trace, None, &cfg).unwrap();
    let exact = sample(&p, &grid);
    let (_, interior) = grid.mask.classify();
    let mut err = 0.0f64;
    for k in 1..=nt {
        for &flat in &interior {
            err = err.max((u.at(k, flat) - exact.at(k, flat)).abs());
        }
    }
    err
}

#[test]
fn barenblatt_error_shrinks_under_refinement() {
    let coarse = max_error_vs_exact(64, 8);
    let fine = max_error_vs_exact(128, 32);
    // dt ~ h^2 halving should cut the sup error by at least 2^0.8.
    assert!(
        coarse / fine >= 1.7,
        "coarse {coarse:.3e} / fine {fine:.3e} = {:.2}",
        coarse / fine
    );
    assert!(fine <= 2.5e-2, "fine-level error too large: {fine:.3e}");
}

#[test]
fn torus_run_conserves_mass() {
    let mask = DomainMask::torus(16, 16, 0.125).unwrap();
    let grid = SpaceTimeGrid::new(mask, 0.05, 6).unwrap();
    let cfg = SolverConfig::with_m(2.0);
    let g = Bump::new(0.2, 0.6, 0.7, (0.0, 0.0), 0.0, cfg.m, 2, grid.t_final());
    let (u, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &cfg).unwrap();
    let m0 = u.slice_integral(0);
    for k in 1..=grid.nt() {
        let mk = u.slice_integral(k);
        assert!((mk - m0).abs() <= 1e-8 * m0, "slice {k}: {mk} vs {m0}");
    }
}

#[test]
fn maximum_principle_holds_without_source() {
    let mask = DomainMask::square(12, 0.1).unwrap();
    let grid = SpaceTimeGrid::new(mask, 0.1, 5).unwrap();
    let cfg = SolverConfig::with_m(2.0);
    let g = Bump::new(0.1, 0.7, 0.5, (-0.2, 0.1), 0.4, cfg.m, 2, grid.t_final());
    let (u, rep) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &cfg).unwrap();

    let mut gmax = 0.0f64;
    let (lateral, _) = grid.mask.classify();
    for flat in grid.mask.inside_cells() {
        let (x, y) = grid.mask.coords(flat);
        gmax = gmax.max(g.eval(x, y, 0.0));
    }
    for k in 0..=grid.nt() {
        let t = grid.time(k);
        for &flat in &lateral {
            let (x, y) = grid.mask.coords(flat);
            gmax = gmax.max(g.eval(x, y, t));
        }
    }
    assert!(rep.max_field <= gmax + 10.0 * cfg.newton_tol);
    assert!(u.max_value() <= gmax + 10.0 * cfg.newton_tol);
}

/// Truncations of the source solution stay above any run whose data sits
/// below them on the parabolic boundary.
#[test]
fn truncated_source_solution_dominates_smaller_run() {
    struct Scaled<'a> {
        inner: &'a dyn Datum,
        s: f64,
    }
    impl Datum for Scaled<'_> {
        fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
            self.s * self.inner.eval(x, y, t)
        }
        fn bound(&self) -> f64 {
            self.s * self.inner.bound()
        }
        fn exponent(&self) -> f64 {
            self.inner.exponent()
        }
    }

    let p = BarenblattParams { n: 1, m: 2.0, c: 1.0, t0: 0.25 };
    let mask = DomainMask::interval(48, 0.05).unwrap();
    let grid = SpaceTimeGrid::new(mask, 0.15, 6).unwrap();
    let cfg = SolverConfig::with_m(2.0);
    let trace = BarenblattTrace { p };
    let scaled = Scaled { inner: &trace, s: 0.7 };
    let (sub, _) = solve_ibvp(&grid, &grid.full_cylinder(), &scaled, None, &cfg).unwrap();

    // Truncation level above 0.7 * peak so the boundary ordering holds,
    // below the peak so the cut is active near the center.
    let sup = sample(&p, &grid).truncate(1.2);
    let report = pme_core::verify::comparison_check(&sub, &sup, cfg.newton_tol).unwrap();
    assert!(report.satisfied, "lhs = {:.3e}", report.lhs);
}

#[test]
fn weak_residual_shrinks_for_exact_samples_and_flags_perturbations() {
    let p = BarenblattParams { n: 1, m: 2.0, c: C1, t0: 0.1 };
    let residual_at = |nx: usize, nt: usize| {
        let h = 3.2 / nx as f64;
        let mask = DomainMask::interval(nx, h).unwrap();
        let grid = SpaceTimeGrid::new(mask, 0.15, nt).unwrap();
        let u = sample(&p, &grid);
        let bank = test_bank(&grid, &grid.full_cylinder());
        let clean = weak_form_residual(&u, 2.0, None, &bank);

        let mut shifted = u.clone();
        for k in 0..=grid.nt() {
            for flat in 0..grid.mask.ncells() {
                shifted.set(k, flat, u.at(k, flat) + 0.1);
            }
        }
        let bad = weak_form_residual(&shifted, 2.0, None, &bank);
        (clean, bad)
    };
    let (clean_coarse, bad_coarse) = residual_at(48, 12);
    let (clean_fine, bad_fine) = residual_at(96, 48);
    assert!(clean_fine < 0.6 * clean_coarse, "{clean_coarse:.3e} -> {clean_fine:.3e}");
    // The constant offset is not a solution; its residual must not fade.
    assert!(bad_coarse > 10.0 * clean_coarse);
    assert!(bad_fine > 10.0 * clean_fine);
}
