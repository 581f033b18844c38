//! End-to-end behavior of the envelope construction: ordering chain,
//! stage monotonicity, Poisson modification contracts, class filtering,
//! and the resolutivity trend on a coarse ladder.

use pme_core::boundary::{Bump, Constant, CornerRamp};
use pme_core::field::ScalarField;
use pme_core::geometry::{DomainMask, SpaceTimeGrid};
use pme_core::perron::{
    envelope, lower_member, poisson_modify, probe_gap, probe_set, resolutivity_gap, upper_class_filter,
    upper_member, MAX_EROSION,
};
use pme_core::solver::solve_ibvp;
use pme_core::weak::{nonneg_bank, signed_margin};
use pme_core::SolverConfig;

fn small_grid(n: usize, nt: usize) -> SpaceTimeGrid {
    let mask = DomainMask::square(n, 2.0 / n as f64).unwrap();
    SpaceTimeGrid::new(mask, 0.25, nt).unwrap()
}

fn smooth_bump(grid: &SpaceTimeGrid, m: f64) -> Bump {
    Bump::new(0.2, 0.3, 0.7, (-0.2, -0.2), 0.4, m, 2, grid.t_final())
}

#[test]
fn ordering_chain_holds_at_probes() {
    let grid = small_grid(16, 8);
    let cfg = SolverConfig::with_m(2.0);
    let g = smooth_bump(&grid, cfg.m);
    let delta = 1e-2;
    let tol = 10.0 * cfg.newton_tol;

    let (raw_upper, _) = upper_member(&grid, &g, delta, &cfg).unwrap();
    let (raw_lower, _, _) = lower_member(&grid, &g, delta, &cfg).unwrap();
    let result = envelope(&grid, &g, grid.nt() - 1, delta, &cfg).unwrap();
    let probes = probe_set(&grid);

    assert!(probe_gap(&raw_lower, &result.lower, &probes) <= tol);
    assert!(probe_gap(&result.lower, &result.upper, &probes) <= tol);
    assert!(probe_gap(&result.upper, &raw_upper, &probes) <= tol);
    assert!(result.gap >= -tol);
}

#[test]
fn stage_gaps_do_not_grow() {
    let grid = small_grid(16, 8);
    let cfg = SolverConfig::with_m(2.0);
    let g = smooth_bump(&grid, cfg.m);
    let result = envelope(&grid, &g, grid.nt() - 1, 1e-2, &cfg).unwrap();
    let gaps: Vec<f64> = result.per_stage.iter().map(|s| s.gap).collect();
    assert!(!gaps.is_empty());
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "stage gaps grew: {gaps:?}");
    }
    assert!(result.gap <= gaps[0] + 1e-6);
}

#[test]
fn poisson_modification_decreases_supersolutions_and_fixes_solutions() {
    let grid = small_grid(16, 8);
    let cfg = SolverConfig::with_m(2.0);
    let g = smooth_bump(&grid, cfg.m);
    let tol = 100.0 * cfg.newton_tol;

    let q = grid.exhaustion(4, MAX_EROSION).unwrap();

    // Penalized member: a supersolution. Modification lowers it inside
    // the window and keeps the one-signed weak test nonnegative.
    let (member, _) = upper_member(&grid, &g, 1e-2, &cfg).unwrap();
    let modified = poisson_modify(&member, &q, &cfg).unwrap();
    let mut max_rise = f64::NEG_INFINITY;
    for k in 0..=grid.nt() {
        for flat in grid.mask.inside_cells() {
            max_rise = max_rise.max(modified.at(k, flat) - member.at(k, flat));
        }
    }
    assert!(max_rise <= tol, "modification raised the member by {max_rise:.2e}");
    let bank = nonneg_bank(&grid, &q);
    assert!(signed_margin(&modified, &q, cfg.m, None, &bank) >= -tol);

    // A solution is a fixed point: same boundary data, unique solve.
    let (direct, _) = solve_ibvp(&grid, &grid.full_cylinder(), &g, None, &cfg).unwrap();
    let refixed = poisson_modify(&direct, &q, &cfg).unwrap();
    assert!(direct.max_diff(&refixed).unwrap() <= tol);
}

#[test]
fn constant_field_is_a_modification_fixed_point() {
    let grid = small_grid(12, 6);
    let cfg = SolverConfig::with_m(2.0);
    let q = grid.exhaustion(3, MAX_EROSION).unwrap();
    let c = ScalarField::from_fn(&grid, |_, _, _| 0.37);
    let out = poisson_modify(&c, &q, &cfg).unwrap();
    assert!(c.max_diff(&out).unwrap() <= 100.0 * cfg.newton_tol);
}

#[test]
fn class_filter_keeps_dominating_supersolutions_only() {
    let grid = small_grid(12, 6);
    let cfg = SolverConfig::with_m(2.0);
    let g = Constant { c: 0.3, m: cfg.m };
    let c = grid.full_cylinder();

    let (exact_run, _) = solve_ibvp(&grid, &c, &g, None, &cfg).unwrap();
    let bigger = Constant { c: 0.5, m: cfg.m };
    let (bigger_run, _) = solve_ibvp(&grid, &c, &bigger, None, &cfg).unwrap();
    let cap = ScalarField::from_fn(&grid, |_, _, _| 0.8);
    let smaller = Constant { c: 0.2, m: cfg.m };
    let (too_low, _) = solve_ibvp(&grid, &c, &smaller, None, &cfg).unwrap();

    let candidates = vec![exact_run.clone(), bigger_run, cap, too_low];
    let sel = upper_class_filter(&grid, &candidates, &g, &cfg).unwrap();
    assert_eq!(sel.kept, vec![0, 1, 2], "boundary-dominance filter");
    // The minimum of the kept members is the exact run itself.
    assert!(sel.minimum.max_diff(&exact_run).unwrap() <= 100.0 * cfg.newton_tol);
}

#[test]
fn resolutivity_gap_decreases_on_corner_ramp() {
    let cfg = SolverConfig::with_m(2.0);
    let run = |n: usize, nt: usize, jsmooth: usize| -> f64 {
        let mask = DomainMask::l_shape(n, 2.0 / n as f64).unwrap();
        let grid = SpaceTimeGrid::new(mask, 0.25, nt).unwrap();
        let g = CornerRamp { corner: (0.0, 0.0), scale: 1.2, height: 0.8, m: cfg.m };
        resolutivity_gap(&grid, &g, grid.nt() - 1, jsmooth, &cfg).unwrap()
    };
    // Arms must survive the deepest (4-layer) erosion stage: n >= 20.
    let coarse = run(20, 10, 2);
    let fine = run(28, 16, 6);
    assert!(
        fine < coarse,
        "resolutivity gap did not decrease: {coarse:.3e} -> {fine:.3e}"
    );
}
