//! Second-order forward-mode jets in the variables `(x, y, t)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const X: usize = 0;
pub const Y: usize = 1;
pub const T: usize = 2;

/// Value, gradient and (symmetric) Hessian of a scalar function of `(x, y, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, ..Self::default() }
    }

    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.d[i] = 1.0;
        j
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Compose with a scalar function given its value and first two derivatives.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..3 {
            out.d[i] = f1 * self.d[i];
            for k in 0..3 {
                out.h[i][k] = f1 * self.h[i][k] + f2 * self.d[i] * self.d[k];
            }
        }
        out
    }

    pub fn powf(&self, p: f64) -> Self {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = *self;
        out.v *= a;
        for i in 0..3 {
            out.d[i] *= a;
            for k in 0..3 {
                out.h[i][k] *= a;
            }
        }
        out
    }

    /// Spatial Laplacian `∂xx + ∂yy`.
    pub fn laplacian(&self) -> f64 {
        self.h[X][X] + self.h[Y][Y]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.d[X], self.d[Y]]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..3 {
            out.d[i] += o.d[i];
            for k in 0..3 {
                out.h[i][k] += o.h[i][k];
            }
        }
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..3 {
            out.d[i] = self.v * o.d[i] + o.v * self.d[i];
            for k in 0..3 {
                out.h[i][k] = self.v * o.h[i][k]
                    + o.v * self.h[i][k]
                    + self.d[i] * o.d[k]
                    + o.d[i] * self.d[k];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let x = o.v;
        self * o.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, a: f64) -> Jet {
        self.v += a;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(a)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

/// Jets of the polar coordinates `(r, θ)` at `(x, y)`, with `θ` taken in
/// `[0, 2π)`. Derivatives are written out analytically. `r` must be positive.
pub fn polar(x: f64, y: f64) -> (Jet, Jet) {
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    let r3 = r2 * r;
    let r4 = r2 * r2;
    let mut rj = Jet::constant(r);
    rj.d[X] = x / r;
    rj.d[Y] = y / r;
    rj.h[X][X] = y * y / r3;
    rj.h[Y][Y] = x * x / r3;
    rj.h[X][Y] = -x * y / r3;
    rj.h[Y][X] = rj.h[X][Y];
    let mut th = y.atan2(x);
    if th < 0.0 {
        th += 2.0 * std::f64::consts::PI;
    }
    let mut tj = Jet::constant(th);
    tj.d[X] = -y / r2;
    tj.d[Y] = x / r2;
    tj.h[X][X] = 2.0 * x * y / r4;
    tj.h[Y][Y] = -2.0 * x * y / r4;
    tj.h[X][Y] = (y * y - x * x) / r4;
    tj.h[Y][X] = tj.h[X][Y];
    (rj, tj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(x: f64, y: f64, t: f64) -> (Jet, Jet, Jet) {
        (Jet::variable(x, X), Jet::variable(y, Y), Jet::variable(t, T))
    }

    fn check(f: impl Fn(f64, f64, f64) -> f64, j: &Jet, p: [f64; 3]) {
        let h = 1e-4;
        let e = |i: usize| {
            let mut d = [0.0; 3];
            d[i] = h;
            d
        };
        let at = |d: [f64; 3]| f(p[0] + d[0], p[1] + d[1], p[2] + d[2]);
        assert!((j.v - at([0.0; 3])).abs() < 1e-12);
        for i in 0..3 {
            let fd = (at(e(i)) - at(e(i).map(|v| -v))) / (2.0 * h);
            assert!((fd - j.d[i]).abs() < 1e-6 * (1.0 + fd.abs()), "d{i}: {fd} vs {}", j.d[i]);
            for k in 0..3 {
                let s = |a: f64, b: f64| {
                    let mut d = [0.0; 3];
                    d[i] += a * h;
                    d[k] += b * h;
                    at(d)
                };
                let fd = (s(1.0, 1.0) - s(1.0, -1.0) - s(-1.0, 1.0) + s(-1.0, -1.0)) / (4.0 * h * h);
                assert!((fd - j.h[i][k]).abs() < 1e-5 * (1.0 + fd.abs()), "h{i}{k}: {fd} vs {}", j.h[i][k]);
            }
        }
    }

    #[test]
    fn arithmetic_matches_finite_differences() {
        let p = [0.3, -0.7, 0.9];
        let (x, y, t) = vars(p[0], p[1], p[2]);
        let j = (x * y + t * t) / (x * x + 2.0) - y.sin() * t.cos() + (x * x + y * y).powf(1.0 / 3.0);
        check(
            |x, y, t| (x * y + t * t) / (x * x + 2.0) - y.sin() * t.cos() + (x * x + y * y).powf(1.0 / 3.0),
            &j,
            p,
        );
    }

    #[test]
    fn polar_jets_match_finite_differences() {
        for p in [[0.3, 0.2], [-0.2, 0.35], [-0.1, -0.25], [0.05, -0.3]] {
            let (r, th) = polar(p[0], p[1]);
            check(|x, y, _| x.hypot(y), &r, [p[0], p[1], 0.0]);
            check(
                |x, y, _| {
                    let a = y.atan2(x);
                    if a < 0.0 { a + 2.0 * std::f64::consts::PI } else { a }
                },
                &th,
                [p[0], p[1], 0.0],
            );
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let (x, y, t) = vars(0.4, 0.1, 0.5);
        let j = (x * y * t).sin() / (y + 3.0);
        for i in 0..3 {
            for k in 0..3 {
                assert!((j.h[i][k] - j.h[k][i]).abs() <= 1e-15 * (1.0 + j.h[i][k].abs()));
            }
        }
    }
}
