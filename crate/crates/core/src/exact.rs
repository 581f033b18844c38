//! Barenblatt source-type solutions, the exact-solution oracle.
//!
//! With `lam = n/(n(m-1)+2)`, `kap = lam(m-1)/(2mn)` and `ts = t + t0`:
//!
//! ```text
//! B(x, t) = ts^{-lam} (C - kap |x|^2 / ts^{2 lam/n})_+^{1/(m-1)},   ts > 0
//! B(x, t) = 0,                                                     ts <= 0
//! ```
//!
//! Total mass is time-independent and scales like `C^{1/(m-1) + n/2}`.

use crate::boundary::Datum;
use crate::field::ScalarField;
use crate::geometry::SpaceTimeGrid;
use crate::math::{cos, pos_pow, powf, sin, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattParams {
    /// Spatial dimension (1 or 2).
    pub n: usize,
    pub m: f64,
    /// Profile constant, > 0.
    pub c: f64,
    /// Time shift; evaluation uses `ts = t + t0`.
    pub t0: f64,
}

impl BarenblattParams {
    pub fn lambda(&self) -> f64 {
        let n = self.n as f64;
        n / (n * (self.m - 1.0) + 2.0)
    }

    pub fn kappa(&self) -> f64 {
        let n = self.n as f64;
        self.lambda() * (self.m - 1.0) / (2.0 * self.m * n)
    }

    /// Peak value `B(0, t)`.
    pub fn peak(&self, t: f64) -> f64 {
        let ts = t + self.t0;
        if ts <= 0.0 {
            return 0.0;
        }
        powf(ts, -self.lambda()) * powf(self.c, 1.0 / (self.m - 1.0))
    }
}

/// Point evaluation; `r2 = x^2 + y^2` (pass `y = 0` in one dimension).
pub fn barenblatt(p: &BarenblattParams, x: f64, y: f64, t: f64) -> f64 {
    let ts = t + p.t0;
    if ts <= 0.0 {
        return 0.0;
    }
    let n = p.n as f64;
    let lam = p.lambda();
    let xi2 = (x * x + y * y) / powf(ts, 2.0 * lam / n);
    let bracket = p.c - p.kappa() * xi2;
    powf(ts, -lam) * pos_pow(bracket, 1.0 / (p.m - 1.0))
}

/// Radius of the support at time `t`: the positive zero of the bracket.
pub fn support_radius(p: &BarenblattParams, t: f64) -> f64 {
    let ts = t + p.t0;
    if ts <= 0.0 {
        return 0.0;
    }
    let n = p.n as f64;
    powf(ts, p.lambda() / n) * sqrt(p.c / p.kappa())
}

/// Total mass by midpoint quadrature with `pts` nodes.
///
/// The radial integral `int_0^R B rho^{n-1} drho` is computed after the
/// substitution `rho = R sin(theta)`, which turns the integrand into
/// `cos^{2/(m-1)}`-type factors, smooth at the support edge, so the
/// midpoint rule converges at second order.
pub fn barenblatt_mass(p: &BarenblattParams, t: f64, pts: usize) -> f64 {
    let ts = t + p.t0;
    if ts <= 0.0 {
        return 0.0;
    }
    let r = support_radius(p, t);
    let surface = if p.n == 1 {
        2.0
    } else {
        2.0 * core::f64::consts::PI
    };
    let half_pi = core::f64::consts::FRAC_PI_2;
    let dth = half_pi / pts as f64;
    let mut acc = 0.0;
    for i in 0..pts {
        let th = (i as f64 + 0.5) * dth;
        let rho = r * sin(th);
        let b = barenblatt(p, rho, 0.0, t);
        let w = r * cos(th);
        let radial = if p.n == 1 { 1.0 } else { rho };
        acc += b * radial * w;
    }
    surface * acc * dth
}

/// Profile constant giving unit mass, found by bisection on the mass at
/// `ts = 1` (the mass is strictly increasing in C).
pub fn normalize_c(n: usize, m: f64, pts: usize) -> f64 {
    let mass = |c: f64| {
        barenblatt_mass(
            &BarenblattParams { n, m, c, t0: 1.0 },
            0.0,
            pts,
        )
    };
    let mut lo = 1e-8;
    let mut hi = 1.0;
    while mass(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Samples the solution on a grid (optionally truncated at `k`).
pub fn sample(p: &BarenblattParams, grid: &SpaceTimeGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x, y, t| barenblatt(p, x, y, t))
}

/// Boundary datum tracing the Barenblatt solution on the parabolic
/// boundary. Reports itself as non-smooth — the profile has a kink at the
/// free boundary, so no uniform `(g^m)_t` bound exists — but carries exact
/// a.e. derivative metadata, which the energy checkers quadrature against.
#[derive(Debug, Clone)]
pub struct BarenblattTrace {
    pub p: BarenblattParams,
}

impl BarenblattTrace {
    /// bracket `psi`, `dpsi/dt`, `|grad psi|^2`, `lap psi` at a point.
    fn bracket(&self, x: f64, y: f64, t: f64) -> (f64, f64, f64, f64) {
        let p = &self.p;
        let ts = t + p.t0;
        let n = p.n as f64;
        let lam = p.lambda();
        let kap = p.kappa();
        let s = powf(ts, -2.0 * lam / n);
        let r2 = x * x + y * y;
        let psi = p.c - kap * r2 * s;
        let dpsi_dt = kap * r2 * (2.0 * lam / n) * s / ts;
        let grad2 = 4.0 * kap * kap * s * s * r2;
        let lap = -2.0 * kap * n * s;
        (psi, dpsi_dt, grad2, lap)
    }
}

impl Datum for BarenblattTrace {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        barenblatt(&self.p, x, y, t)
    }
    fn bound(&self) -> f64 {
        self.p.peak(0.0)
    }
    fn exponent(&self) -> f64 {
        self.p.m
    }
    fn time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let p = &self.p;
        let ts = t + p.t0;
        if ts <= 0.0 {
            return Some(0.0);
        }
        let (psi, dpsi, _, _) = self.bracket(x, y, t);
        if psi <= 0.0 {
            return Some(0.0);
        }
        let lam = p.lambda();
        let e = 1.0 / (p.m - 1.0);
        let a = -lam * powf(ts, -lam - 1.0) * powf(psi, e);
        let b = powf(ts, -lam) * e * powf(psi, e - 1.0) * dpsi;
        Some(a + b)
    }
    fn laplacian_gm(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let p = &self.p;
        let ts = t + p.t0;
        if ts <= 0.0 {
            return Some(0.0);
        }
        let (psi, _, grad2, lap) = self.bracket(x, y, t);
        if psi <= 0.0 {
            return Some(0.0);
        }
        let m = p.m;
        let e = m / (m - 1.0);
        let scale = powf(ts, -p.lambda() * m);
        Some(scale * e * ((e - 1.0) * powf(psi, e - 2.0) * grad2 + powf(psi, e - 1.0) * lap))
    }
    fn gm_time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let p = &self.p;
        let ts = t + p.t0;
        if ts <= 0.0 {
            return Some(0.0);
        }
        let (psi, dpsi, _, _) = self.bracket(x, y, t);
        if psi <= 0.0 {
            return Some(0.0);
        }
        let m = p.m;
        let lam = p.lambda();
        let e = m / (m - 1.0);
        let a = -lam * m * powf(ts, -lam * m - 1.0) * powf(psi, e);
        let b = powf(ts, -lam * m) * e * powf(psi, e - 1.0) * dpsi;
        Some(a + b)
    }
}
