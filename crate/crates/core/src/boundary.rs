//! Boundary/initial data on the closure of a cylinder.
//!
//! A datum is evaluable everywhere near the closure (the smoothing and
//! shifting wrappers sample it off-grid), carries its sup bound `M`, and
//! optionally analytic derivative metadata for the penalty term
//! `psi = dg/dt - lap(g^m)`. `smooth()` is true only when `g` is C1 and
//! `g^m` is C2 on the closure; the penalized solver insists on it.

use crate::math::{pos_pow, sqrt};

pub trait Datum: Send + Sync {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64;

    /// Upper bound of the datum on the closure.
    fn bound(&self) -> f64;

    /// Exponent `m` used for all `g^m` quantities.
    fn exponent(&self) -> f64;

    fn smooth(&self) -> bool {
        false
    }

    /// `dg/dt`; `None` when no metadata is available.
    fn time_derivative(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        None
    }

    /// `lap(g^m)`; `None` when no metadata is available.
    fn laplacian_gm(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        None
    }

    /// `d(g^m)/dt`, by default through the chain rule.
    fn gm_time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let gt = self.time_derivative(x, y, t)?;
        let m = self.exponent();
        Some(m * pos_pow(self.eval(x, y, t), m - 1.0) * gt)
    }

    /// `d2(g^m)/dt2`, by default a central difference of
    /// [`Datum::gm_time_derivative`] at scale 1e-4.
    fn gm_second_time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let tau = 1e-4;
        let a = self.gm_time_derivative(x, y, t + tau)?;
        let b = self.gm_time_derivative(x, y, t - tau)?;
        Some((a - b) / (2.0 * tau))
    }

    /// `psi = dg/dt - lap(g^m)`, the forcing scale of the penalized
    /// problem. `None` unless both derivative pieces are available.
    fn psi(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        Some(self.time_derivative(x, y, t)? - self.laplacian_gm(x, y, t)?)
    }

    fn has_derivatives(&self) -> bool {
        self.time_derivative(0.0, 0.0, 0.0).is_some()
            && self.laplacian_gm(0.0, 0.0, 0.0).is_some()
    }
}

/// `g = c`.
#[derive(Debug, Clone)]
pub struct Constant {
    pub c: f64,
    pub m: f64,
}

impl Datum for Constant {
    fn eval(&self, _x: f64, _y: f64, _t: f64) -> f64 {
        self.c
    }
    fn bound(&self) -> f64 {
        self.c
    }
    fn exponent(&self) -> f64 {
        self.m
    }
    fn smooth(&self) -> bool {
        true
    }
    fn time_derivative(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn laplacian_gm(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// `g = a + b t`, valid while `a + b t >= 0`; `bound` is taken over `[0, T]`.
#[derive(Debug, Clone)]
pub struct LinearInT {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    t_final: f64,
}

impl LinearInT {
    pub fn new(a: f64, b: f64, m: f64, t_final: f64) -> LinearInT {
        assert!(a >= 0.0 && a + b * t_final >= 0.0, "datum must stay nonnegative");
        LinearInT { a, b, m, t_final }
    }
}

impl Datum for LinearInT {
    fn eval(&self, _x: f64, _y: f64, t: f64) -> f64 {
        self.a + self.b * t
    }
    fn bound(&self) -> f64 {
        (self.a).max(self.a + self.b * self.t_final)
    }
    fn exponent(&self) -> f64 {
        self.m
    }
    fn smooth(&self) -> bool {
        true
    }
    fn time_derivative(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        Some(self.b)
    }
    fn laplacian_gm(&self, _x: f64, _y: f64, _t: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// `g = (base + amp (1 - r^2/w^2)^3_+) (1 - decay t)` with
/// `r = dist((x, y), center)`. C2 in space, analytic derivatives.
#[derive(Debug, Clone)]
pub struct Bump {
    pub base: f64,
    pub amp: f64,
    pub width: f64,
    pub center: (f64, f64),
    pub decay: f64,
    pub m: f64,
    pub dim: usize,
}

impl Bump {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        base: f64,
        amp: f64,
        width: f64,
        center: (f64, f64),
        decay: f64,
        m: f64,
        dim: usize,
        t_final: f64,
    ) -> Bump {
        // amp < 0 carves a well below the base level; the datum must stay
        // nonnegative at the deepest point.
        assert!(base >= 0.0 && base + amp.min(0.0) >= 0.0 && width > 0.0);
        assert!(1.0 - decay * t_final > 0.0, "decay kills the datum before T");
        Bump {
            base,
            amp,
            width,
            center,
            decay,
            m,
            dim,
        }
    }

    fn q(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = if self.dim == 1 { 0.0 } else { y - self.center.1 };
        (dx * dx + dy * dy) / (self.width * self.width)
    }

    /// Spatial factor and its first/second radial data:
    /// returns (s, |grad s|^2, lap s).
    fn spatial(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let q = self.q(x, y);
        if q >= 1.0 {
            return (self.base, 0.0, 0.0);
        }
        let w2 = self.width * self.width;
        let c = 1.0 - q;
        let s = self.base + self.amp * c * c * c;
        // grad B = -3 c^2 grad q, |grad q|^2 = 4 q / w^2, lap q = 2 dim / w^2
        let c4 = c * c * c * c;
        let grad2 = self.amp * self.amp * 9.0 * c4 * 4.0 * q / w2;
        let lap = self.amp * (6.0 * c * 4.0 * q / w2 - 3.0 * c * c * 2.0 * self.dim as f64 / w2);
        (s, grad2, lap)
    }

    fn tau(&self, t: f64) -> f64 {
        1.0 - self.decay * t
    }
}

impl Datum for Bump {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.spatial(x, y).0 * self.tau(t)
    }
    fn bound(&self) -> f64 {
        self.base + self.amp.max(0.0)
    }
    fn exponent(&self) -> f64 {
        self.m
    }
    fn smooth(&self) -> bool {
        true
    }
    fn time_derivative(&self, x: f64, y: f64, _t: f64) -> Option<f64> {
        Some(-self.decay * self.spatial(x, y).0)
    }
    fn laplacian_gm(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let (s, grad2, lap) = self.spatial(x, y);
        let m = self.m;
        let tm = pos_pow(self.tau(t), m);
        Some(tm * (m * pos_pow(s, m - 1.0) * lap + m * (m - 1.0) * pos_pow(s, m - 2.0) * grad2))
    }
    fn gm_second_time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        let m = self.m;
        let s = self.spatial(x, y).0;
        let tau = self.tau(t);
        Some(pos_pow(s, m) * m * (m - 1.0) * pos_pow(tau, m - 2.0) * self.decay * self.decay)
    }
}

/// `g = max(0, 1 - dist((x,y), corner) / scale) * height`. Lipschitz but not
/// C1 (kinks at the corner and on the unit circle); no derivative metadata.
#[derive(Debug, Clone)]
pub struct CornerRamp {
    pub corner: (f64, f64),
    pub scale: f64,
    pub height: f64,
    pub m: f64,
}

impl Datum for CornerRamp {
    fn eval(&self, x: f64, y: f64, _t: f64) -> f64 {
        let dx = x - self.corner.0;
        let dy = y - self.corner.1;
        let r = sqrt(dx * dx + dy * dy);
        self.height * (1.0 - r / self.scale).max(0.0)
    }
    fn bound(&self) -> f64 {
        self.height
    }
    fn exponent(&self) -> f64 {
        self.m
    }
}

/// The epsilon-shift `g_eps = (g^m + eps^m)^{1/m}`; `g <= g_eps <= g + eps`
/// and `lap(g_eps^m) = lap(g^m)`. Bound reported as `M + 1` (eps <= 1).
pub struct Shifted<'a> {
    pub inner: &'a dyn Datum,
    pub eps: f64,
}

pub fn shift_boundary(g: &dyn Datum, eps: f64) -> Shifted<'_> {
    assert!((0.0..=1.0).contains(&eps), "shift must lie in [0, 1]");
    Shifted { inner: g, eps }
}

impl Datum for Shifted<'_> {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        if self.eps == 0.0 {
            return self.inner.eval(x, y, t);
        }
        let m = self.exponent();
        let gm = pos_pow(self.inner.eval(x, y, t), m);
        pos_pow(gm + pos_pow(self.eps, m), 1.0 / m)
    }
    fn bound(&self) -> f64 {
        if self.eps == 0.0 {
            self.inner.bound()
        } else {
            self.inner.bound() + 1.0
        }
    }
    fn exponent(&self) -> f64 {
        self.inner.exponent()
    }
    fn smooth(&self) -> bool {
        self.inner.smooth()
    }
    fn time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        if self.eps == 0.0 {
            return self.inner.time_derivative(x, y, t);
        }
        // d/dt (g^m + e^m)^{1/m} = g^{m-1} (g^m + e^m)^{1/m - 1} dg/dt
        let m = self.exponent();
        let g = self.inner.eval(x, y, t);
        let gt = self.inner.time_derivative(x, y, t)?;
        let s = pos_pow(g, m) + pos_pow(self.eps, m);
        Some(pos_pow(g, m - 1.0) * pos_pow(s, 1.0 / m - 1.0) * gt)
    }
    fn laplacian_gm(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        self.inner.laplacian_gm(x, y, t)
    }
    fn gm_time_derivative(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        self.inner.gm_time_derivative(x, y, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_brackets_datum() {
        let g = Bump::new(0.2, 0.7, 0.5, (0.1, -0.2), 0.3, 2.0, 2, 1.0);
        let ge = shift_boundary(&g, 0.25);
        let mut worst_low = f64::INFINITY;
        for i in 0..50 {
            for j in 0..50 {
                let (x, y) = (-1.0 + 0.04 * i as f64, -1.0 + 0.04 * j as f64);
                for k in 0..5 {
                    let t = 0.2 * k as f64;
                    let a = g.eval(x, y, t);
                    let b = ge.eval(x, y, t);
                    assert!(b >= a - 1e-14 && b <= a + 0.25 + 1e-14);
                    worst_low = worst_low.min(b - a);
                }
            }
        }
        assert!(worst_low >= 0.0);
    }

    #[test]
    fn bump_laplacian_matches_finite_difference() {
        let g = Bump::new(0.1, 0.8, 0.6, (0.0, 0.0), 0.4, 2.0, 2, 1.0);
        let m = 2.0;
        let d = 1e-5;
        for &(x, y, t) in &[(0.05, -0.1, 0.3), (0.3, 0.2, 0.0), (0.55, 0.0, 0.7)] {
            let gm = |x: f64, y: f64| pos_pow(g.eval(x, y, t), m);
            let fd =
                (gm(x + d, y) + gm(x - d, y) + gm(x, y + d) + gm(x, y - d) - 4.0 * gm(x, y))
                    / (d * d);
            let an = g.laplacian_gm(x, y, t).unwrap();
            assert!(
                (fd - an).abs() <= 1e-4 * (1.0 + an.abs()),
                "({x},{y},{t}): fd {fd} vs {an}"
            );
        }
    }

    #[test]
    fn shifted_time_derivative_matches_finite_difference() {
        let g = Bump::new(0.3, 0.5, 0.7, (0.0, 0.0), 0.5, 2.0, 2, 1.0);
        let ge = shift_boundary(&g, 0.1);
        let (x, y, t) = (0.2, 0.1, 0.4);
        let d = 1e-6;
        let fd = (ge.eval(x, y, t + d) - ge.eval(x, y, t - d)) / (2.0 * d);
        let an = ge.time_derivative(x, y, t).unwrap();
        assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()));
    }
}
