//! Smooth one-sided approximation of rough boundary data.
//!
//! Route: raise the datum to `alpha = min(1, m/2)`, replace `q = g^alpha`
//! by its Schoenberg cubic B-spline surrogate on a knot lattice of spacing
//! `dk` (variation diminishing: positive weights, partition of unity, so
//! constants reproduce exactly and `qtilde <= max q`), then subtract a
//! constant `omega` so that at every parabolic-boundary node
//!
//! ```text
//! phi^m <= g^m <= phi^m + (1/j)^m,      phi = (qtilde - omega)_+^{1/alpha}.
//! ```
//!
//! `omega` is the largest admissible shift (the budget left by the upper
//! inequality); if even that fails the lower one, the lattice is refined.
//! The spline is C2 in all variables, so the result carries analytic
//! derivative metadata and qualifies as penalization input. Kinked data
//! forces `dk` small, which is fine: the sandwich lives on boundary nodes
//! and the derivatives stay finite (only large near the kinks).

use crate::boundary::Datum;
use crate::error::{Error, Result};
use crate::geometry::SpaceTimeGrid;
use crate::math::{pos_pow, powf};
use alloc::vec::Vec;

/// Centered cardinal cubic B-spline, support (-2, 2), unit integral,
/// `b3(0) = 2/3`, `b3(1) = 1/6`.
fn b3(t: f64) -> f64 {
    let a = t.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + a * a * a / 2.0
    } else if a < 2.0 {
        let d = 2.0 - a;
        d * d * d / 6.0
    } else {
        0.0
    }
}

fn b3_d1(t: f64) -> f64 {
    let a = t.abs();
    let s = if t < 0.0 { -1.0 } else { 1.0 };
    if a < 1.0 {
        s * (-2.0 * a + 1.5 * a * a)
    } else if a < 2.0 {
        let d = 2.0 - a;
        s * (-d * d / 2.0)
    } else {
        0.0
    }
}

fn b3_d2(t: f64) -> f64 {
    let a = t.abs();
    if a < 1.0 {
        3.0 * a - 2.0
    } else if a < 2.0 {
        2.0 - a
    } else {
        0.0
    }
}

/// Per-axis weights of the four knots straddling `x`: returns the lowest
/// knot index and (value, first, second) derivative weights.
fn axis_weights(x: f64, dk: f64) -> (i64, [[f64; 4]; 3]) {
    let s = x / dk;
    let j0 = floor_i64(s) - 1;
    let mut w = [[0.0; 4]; 3];
    for (c, wc) in w.iter_mut().enumerate() {
        for (i, wi) in wc.iter_mut().enumerate() {
            let t = s - (j0 + i as i64) as f64;
            *wi = match c {
                0 => b3(t),
                1 => b3_d1(t) / dk,
                _ => b3_d2(t) / (dk * dk),
            };
        }
    }
    (j0, w)
}

fn floor_i64(x: f64) -> i64 {
    let t = x as i64;
    if (t as f64) > x {
        t - 1
    } else {
        t
    }
}

/// Value and partials of the spline surrogate of `g^alpha`.
struct Qt {
    v: f64,
    dx: f64,
    dy: f64,
    dt: f64,
    dxx: f64,
    dyy: f64,
}

/// Smoothed datum `phi = (qtilde - omega)_+^{1/alpha}`; see module docs.
pub struct SplineDatum<'a> {
    g: &'a dyn Datum,
    alpha: f64,
    omega: f64,
    dk: f64,
    m: f64,
    dim: usize,
    /// Sandwich width this datum was built for (`1/j`).
    pub eps: f64,
}

impl<'a> SplineDatum<'a> {
    fn q(&self, x: f64, y: f64, t: f64) -> f64 {
        pos_pow(self.g.eval(x, y, t), self.alpha)
    }

    fn qtilde(&self, x: f64, y: f64, t: f64) -> Qt {
        let dk = self.dk;
        let (jx, wx) = axis_weights(x, dk);
        let (jt, wt) = axis_weights(t, dk);
        let mut out = Qt { v: 0.0, dx: 0.0, dy: 0.0, dt: 0.0, dxx: 0.0, dyy: 0.0 };
        if self.dim == 1 {
            for (a, &wxa) in wx[0].iter().enumerate() {
                let kx = (jx + a as i64) as f64 * dk;
                for (c, &wtc) in wt[0].iter().enumerate() {
                    let kt = (jt + c as i64) as f64 * dk;
                    let q = self.q(kx, 0.0, kt);
                    out.v += q * wxa * wtc;
                    out.dx += q * wx[1][a] * wtc;
                    out.dxx += q * wx[2][a] * wtc;
                    out.dt += q * wxa * wt[1][c];
                }
            }
        } else {
            let (jy, wy) = axis_weights(y, dk);
            for (a, &wxa) in wx[0].iter().enumerate() {
                let kx = (jx + a as i64) as f64 * dk;
                for (b, &wyb) in wy[0].iter().enumerate() {
                    let ky = (jy + b as i64) as f64 * dk;
                    for (c, &wtc) in wt[0].iter().enumerate() {
                        let kt = (jt + c as i64) as f64 * dk;
                        let q = self.q(kx, ky, kt);
                        out.v += q * wxa * wyb * wtc;
                        out.dx += q * wx[1][a] * wyb * wtc;
                        out.dy += q * wxa * wy[1][b] * wtc;
                        out.dxx += q * wx[2][a] * wyb * wtc;
                        out.dyy += q * wxa * wy[2][b] * wtc;
                        out.dt += q * wxa * wyb * wt[1][c];
                    }
                }
            }
        }
        out
    }
}

impl Datum for SplineDatum<'_> {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        let s = self.qtilde(x, y, t).v - self.omega;
        pos_pow(s, 1.0 / self.alpha)
    }
    fn bound(&self) -> f64 {
        // qtilde <= max q = M^alpha and omega >= 0, so phi <= M.
        self.g.bound()
    }
    fn exponent(&self) -> f64 {
        self.m
    }
    fn smooth(&self) -> bool {
        true
    }
    fn time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let qt = self.qtilde(x, y, t);
        let s = qt.v - self.omega;
        if s <= 0.0 {
            return Some(0.0);
        }
        Some(powf(s, 1.0 / self.alpha - 1.0) * qt.dt / self.alpha)
    }
    fn laplacian_gm(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        // phi^m = s^p with p = m/alpha >= 2, s = qtilde - omega:
        // lap = p (p-1) s^{p-2} |grad s|^2 + p s^{p-1} lap s.
        let qt = self.qtilde(x, y, t);
        let s = qt.v - self.omega;
        if s <= 0.0 {
            return Some(0.0);
        }
        let p = self.m / self.alpha;
        let grad2 = qt.dx * qt.dx + qt.dy * qt.dy;
        Some(p * (p - 1.0) * powf(s, p - 2.0) * grad2 + p * powf(s, p - 1.0) * (qt.dxx + qt.dyy))
    }
}

/// Parabolic-boundary nodes of the full cylinder of `grid`.
fn boundary_nodes(grid: &SpaceTimeGrid) -> Vec<(f64, f64, f64)> {
    let mask = &grid.mask;
    let mut nodes = Vec::new();
    for flat in mask.inside_cells() {
        let (x, y) = mask.coords(flat);
        nodes.push((x, y, 0.0));
    }
    let (lateral, _) = mask.classify();
    for k in 0..=grid.nt() {
        let t = grid.time(k);
        for &flat in &lateral {
            let (x, y) = mask.coords(flat);
            nodes.push((x, y, t));
        }
    }
    nodes
}

/// Builds the sandwiched smooth approximation `phi_j` of `g` at width
/// `eps = 1/j`, enforcing the sandwich on the parabolic-boundary nodes of
/// `grid`. Refines the knot lattice until the sandwich is feasible.
pub fn smooth_power_approx<'a>(
    grid: &SpaceTimeGrid,
    g: &'a dyn Datum,
    j: usize,
) -> Result<SplineDatum<'a>> {
    assert!(j >= 1, "approximation index starts at 1");
    let m = g.exponent();
    let alpha = (m / 2.0).min(1.0);
    let eps = 1.0 / j as f64;
    let epsm = powf(eps, m);
    let nodes = boundary_nodes(grid);
    let mut dk = 8.0 * grid.mask.h();
    let mut worst_deficit = f64::INFINITY;
    for _ in 0..24 {
        let mut probe = SplineDatum { g, alpha, omega: 0.0, dk, m, dim: grid.mask.dim(), eps };
        // need: smallest omega keeping phi <= g; budget: largest omega
        // keeping g^m <= phi^m + eps^m. Feasible iff need <= budget.
        let mut need = 0.0f64;
        let mut budget = f64::INFINITY;
        for &(x, y, t) in &nodes {
            let qt = probe.qtilde(x, y, t).v;
            let q = probe.q(x, y, t);
            need = need.max(qt - q);
            let gm = pos_pow(g.eval(x, y, t), m);
            let fl = pos_pow((gm - epsm).max(0.0), alpha / m);
            budget = budget.min(qt - fl);
        }
        if budget >= need && budget >= 0.0 {
            // Spend the whole budget: the datum sits at the bottom of the
            // sandwich, so g == c reproduces (c^m - eps^m)_+^{1/m} exactly.
            probe.omega = budget;
            return Ok(probe);
        }
        worst_deficit = worst_deficit.min(need - budget);
        dk /= 2.0;
    }
    Err(Error::SandwichFailure { j, deficit: worst_deficit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{Bump, Constant, CornerRamp};
    use crate::geometry::DomainMask;

    fn grid2(n: usize, l_shaped: bool) -> SpaceTimeGrid {
        let h = 2.0 / (n as f64 + 2.0);
        let mask = if l_shaped {
            DomainMask::l_shape(n, h).unwrap()
        } else {
            DomainMask::square(n, h).unwrap()
        };
        SpaceTimeGrid::new(mask, 0.5, 8).unwrap()
    }

    fn sandwich_holds(grid: &SpaceTimeGrid, g: &dyn Datum, phi: &SplineDatum<'_>) -> f64 {
        let m = g.exponent();
        let epsm = powf(phi.eps, m);
        let mut worst = 0.0f64;
        for (x, y, t) in boundary_nodes(grid) {
            let gm = pos_pow(g.eval(x, y, t), m);
            let pm = pos_pow(phi.eval(x, y, t), m);
            worst = worst.max(pm - gm);
            worst = worst.max(gm - pm - epsm);
        }
        worst
    }

    #[test]
    fn constant_datum_bottom_of_sandwich() {
        let grid = grid2(10, false);
        let g = Constant { c: 0.8, m: 2.0 };
        let phi = smooth_power_approx(&grid, &g, 4).unwrap();
        let expect = (0.8f64.powi(2) - 0.25f64.powi(2)).powf(0.5);
        for (x, y, t) in boundary_nodes(&grid) {
            assert!((phi.eval(x, y, t) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_ramp_sandwich_on_l_shape() {
        let grid = grid2(12, true);
        let g = CornerRamp { corner: (0.0, 0.0), scale: 1.0, height: 1.0, m: 2.0 };
        for j in [2usize, 5, 10] {
            let phi = smooth_power_approx(&grid, &g, j).unwrap();
            let worst = sandwich_holds(&grid, &g, &phi);
            assert!(worst <= 1e-10, "j={j}: excess {worst}");
        }
    }

    #[test]
    fn approximation_tightens_with_j() {
        let grid = grid2(12, false);
        let g = Bump::new(0.2, 0.5, 0.8, (0.0, 0.0), 0.0, 2.0, 2, 0.5);
        let gap_at = |j: usize| {
            let phi = smooth_power_approx(&grid, &g, j).unwrap();
            boundary_nodes(&grid)
                .into_iter()
                .map(|(x, y, t)| g.eval(x, y, t) - phi.eval(x, y, t))
                .fold(0.0f64, f64::max)
        };
        let (g2, g8) = (gap_at(2), gap_at(8));
        assert!(g8 < g2, "gap did not shrink: {g2} -> {g8}");
        assert!(g8 < 0.2, "j=8 still far: {g8}");
    }

    #[test]
    fn derivative_metadata_matches_finite_differences() {
        let grid = grid2(10, false);
        let g = Bump::new(0.3, 0.4, 0.9, (0.1, -0.1), 0.3, 2.0, 2, 0.5);
        let phi = smooth_power_approx(&grid, &g, 3).unwrap();
        let d = 1e-5;
        for &(x, y, t) in &[(0.05, 0.1, 0.2), (-0.3, 0.2, 0.35)] {
            let an_t = phi.time_derivative(x, y, t).unwrap();
            let fd_t = (phi.eval(x, y, t + d) - phi.eval(x, y, t - d)) / (2.0 * d);
            assert!((an_t - fd_t).abs() < 1e-5 * (1.0 + an_t.abs()), "d/dt at ({x},{y},{t})");
            let m = 2.0;
            let pm = |x: f64, y: f64| pos_pow(phi.eval(x, y, t), m);
            let fd_l = (pm(x + d, y) + pm(x - d, y) + pm(x, y + d) + pm(x, y - d)
                - 4.0 * pm(x, y))
                / (d * d);
            let an_l = phi.laplacian_gm(x, y, t).unwrap();
            assert!((an_l - fd_l).abs() < 1e-4 * (1.0 + an_l.abs()), "lap at ({x},{y},{t})");
        }
    }

    #[test]
    fn smooth_flag_and_bound() {
        let grid = grid2(8, false);
        let g = Constant { c: 0.5, m: 3.0 };
        let phi = smooth_power_approx(&grid, &g, 2).unwrap();
        assert!(phi.smooth());
        assert!(phi.has_derivatives());
        assert!(phi.bound() <= 0.5);
        assert_eq!(phi.exponent(), 3.0);
    }
}
