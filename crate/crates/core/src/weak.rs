//! Discrete weak form of `u_t = lap(u^m) + f` and the test banks it is
//! paired against.
//!
//! For a grid function `phi` vanishing on the lateral cells, outside the
//! mask, and on the first and last slice of the window, summation by parts
//! turns the implicit scheme into the exact identity `W(phi) = 0` with
//!
//! ```text
//! W(phi) = h^N dt sum_k [ -sum_i u^k (phi^k - phi^{k-1})/dt
//!                         + sum_edges grad_h v^k . grad_h phi^{k-1}
//!                         - sum_i f^k phi^{k-1} ],        v = u^m,
//! ```
//!
//! so `|W|` measures how far a field is from being a discrete solution,
//! and the sign of `W` against nonnegative `phi` separates super- from
//! subsolutions. Residuals are reported normalized by
//! `(int (phi^2 + phi_t^2 + |grad phi|^2))^{1/2}`.

use crate::field::ScalarField;
use crate::geometry::{Cylinder, DomainMask, SpaceTimeGrid};
use crate::math::{pos_pow, sin, sqrt};
use alloc::vec;
use alloc::vec::Vec;

/// Undirected stencil edges with at least one interior endpoint; the
/// combinatorial data every pairing needs.
struct WindowOps {
    edges: Vec<(usize, usize)>,
}

impl WindowOps {
    fn new(mask: &DomainMask) -> WindowOps {
        let (_, interior_cells) = mask.classify();
        let mut interior = vec![false; mask.ncells()];
        for &flat in &interior_cells {
            interior[flat] = true;
        }
        let mut edges = Vec::new();
        let dirs: &[usize] = if mask.dim() == 1 { &[1] } else { &[1, 3] };
        for flat in mask.inside_cells() {
            for &dir in dirs {
                if let Some(nb) = mask.neighbor(flat, dir) {
                    if mask.is_inside(nb) && (interior[flat] || interior[nb]) {
                        edges.push((flat, nb));
                    }
                }
            }
        }
        WindowOps { edges }
    }
}

/// Chebyshev depth of every cell: 0 outside, 1 on lateral cells, up to
/// `cap` deep inside. Computed by successive erosions.
fn depth_map(mask: &DomainMask, cap: usize) -> Vec<usize> {
    let mut depth: Vec<usize> = mask
        .inside_flags()
        .iter()
        .map(|&b| usize::from(b))
        .collect();
    let mut eroded = mask.clone();
    for _ in 1..cap {
        eroded = eroded.erode(1);
        if eroded.n_inside() == 0 {
            break;
        }
        for flat in eroded.inside_cells() {
            depth[flat] += 1;
        }
    }
    depth
}

fn bounding_box(mask: &DomainMask) -> (f64, f64, f64, f64) {
    let (mut xa, mut xb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ya, mut yb) = (f64::INFINITY, f64::NEG_INFINITY);
    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        xa = xa.min(x);
        xb = xb.max(x);
        ya = ya.min(y);
        yb = yb.max(y);
    }
    let half = mask.h() / 2.0;
    (xa - half, xb + half, ya - half, yb + half)
}

fn build_modes(grid: &SpaceTimeGrid, c: &Cylinder, modes: &[(usize, usize, usize)]) -> Vec<ScalarField> {
    let mask = &c.mask;
    let depth = depth_map(mask, 4);
    let (xa, xb, ya, yb) = bounding_box(mask);
    let span = (c.t2 - c.t1) as f64;
    let mut bank = Vec::with_capacity(modes.len());
    for &(kx, ky, kt) in modes {
        let mut phi = ScalarField::zeros(grid);
        for k in c.t1..=c.t2 {
            let theta = (k - c.t1) as f64 / span;
            let tau = sin(kt as f64 * core::f64::consts::PI * theta);
            if k == c.t1 || k == c.t2 {
                continue;
            }
            for flat in mask.inside_cells() {
                if depth[flat] < 2 {
                    continue;
                }
                let taper = ((depth[flat] - 1) as f64 / 3.0).min(1.0);
                let (x, y) = mask.coords(flat);
                let sx = sin(kx as f64 * core::f64::consts::PI * (x - xa) / (xb - xa));
                let sy = if mask.dim() == 1 {
                    1.0
                } else {
                    sin(ky as f64 * core::f64::consts::PI * (y - ya) / (yb - ya))
                };
                phi.set(k, flat, taper * sx * sy * tau);
            }
        }
        bank.push(phi);
    }
    bank
}

/// Sign-changing test bank: tensor modes at two frequencies per axis.
pub fn test_bank(grid: &SpaceTimeGrid, c: &Cylinder) -> Vec<ScalarField> {
    let modes: &[(usize, usize, usize)] = if c.mask.dim() == 1 {
        &[(1, 1, 1), (2, 1, 1), (1, 1, 2), (2, 1, 2)]
    } else {
        &[(1, 1, 1), (2, 1, 1), (1, 2, 1), (1, 1, 2), (2, 2, 1), (2, 1, 2)]
    };
    build_modes(grid, c, modes)
}

/// Nonnegative test bank (one-signed checks): fundamental modes only,
/// which are nonnegative on the window by construction.
pub fn nonneg_bank(grid: &SpaceTimeGrid, c: &Cylinder) -> Vec<ScalarField> {
    let modes: &[(usize, usize, usize)] = &[(1, 1, 1)];
    let mut bank = build_modes(grid, c, modes);
    // A second nonnegative shape with different spatial weighting: the
    // square of the fundamental mode.
    if let Some(base) = bank.first() {
        let mut phi = base.clone();
        for k in c.t1..=c.t2 {
            for v in phi.slice_mut(k) {
                *v = *v * *v;
            }
        }
        bank.push(phi);
    }
    bank
}

/// `(W(phi), norm(phi))` over the window.
fn pairing(
    u: &ScalarField,
    c: &Cylinder,
    m: f64,
    f: Option<&ScalarField>,
    phi: &ScalarField,
    ops: &WindowOps,
) -> (f64, f64) {
    let mask = &c.mask;
    let grid = &u.grid;
    let dt = grid.dt();
    let vol = mask.cell_volume();
    let h2 = mask.h() * mask.h();
    let ncells = mask.ncells();
    let mut v = vec![0.0; ncells];
    let mut acc = 0.0;
    let mut norm2 = 0.0;

    // Slice-t1 contribution to the norm.
    for flat in mask.inside_cells() {
        let p = phi.at(c.t1, flat);
        norm2 += p * p;
    }
    for &(a, b) in &ops.edges {
        let d = (phi.at(c.t1, a) - phi.at(c.t1, b)) / mask.h();
        norm2 += d * d;
    }

    for k in (c.t1 + 1)..=c.t2 {
        for flat in mask.inside_cells() {
            v[flat] = pos_pow(u.at(k, flat), m);
        }
        let mut tsum = 0.0;
        let mut fsum = 0.0;
        for flat in mask.inside_cells() {
            let pk = phi.at(k, flat);
            let pk1 = phi.at(k - 1, flat);
            tsum += u.at(k, flat) * (pk - pk1);
            if let Some(ff) = f {
                fsum += ff.at(k, flat) * pk1;
            }
            norm2 += pk * pk + ((pk - pk1) / dt) * ((pk - pk1) / dt);
        }
        let mut gsum = 0.0;
        for &(a, b) in &ops.edges {
            gsum += (v[a] - v[b]) * (phi.at(k - 1, a) - phi.at(k - 1, b)) / h2;
            let d = (phi.at(k, a) - phi.at(k, b)) / mask.h();
            norm2 += d * d;
        }
        acc += -tsum / dt + gsum - fsum;
    }
    (vol * dt * acc, sqrt(vol * dt * norm2))
}

/// Max over the bank of `|W(phi)| / norm(phi)` on the window of `c`.
pub fn window_residual(
    u: &ScalarField,
    c: &Cylinder,
    m: f64,
    f: Option<&ScalarField>,
    bank: &[ScalarField],
) -> f64 {
    let ops = WindowOps::new(&c.mask);
    let mut worst = 0.0f64;
    for phi in bank {
        let (w, n) = pairing(u, c, m, f, phi, &ops);
        if n > 0.0 {
            worst = worst.max(w.abs() / n);
        }
    }
    worst
}

/// Min over the bank of `W(phi) / norm(phi)`; `>= -tol` on a nonnegative
/// bank is the discrete supersolution test. Returns 0 when the bank is
/// empty or degenerate.
pub fn signed_margin(
    u: &ScalarField,
    c: &Cylinder,
    m: f64,
    f: Option<&ScalarField>,
    bank: &[ScalarField],
) -> f64 {
    let ops = WindowOps::new(&c.mask);
    let mut low = f64::INFINITY;
    for phi in bank {
        let (w, n) = pairing(u, c, m, f, phi, &ops);
        if n > 0.0 {
            low = low.min(w / n);
        }
    }
    if low.is_finite() {
        low
    } else {
        0.0
    }
}

/// Weak-form residual over the full cylinder of `u`'s grid.
pub fn weak_form_residual(
    u: &ScalarField,
    m: f64,
    f: Option<&ScalarField>,
    bank: &[ScalarField],
) -> f64 {
    window_residual(u, &u.grid.full_cylinder(), m, f, bank)
}
