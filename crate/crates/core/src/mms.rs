//! Manufactured solution with a reentrant-corner singularity.
//!
//! In polar coordinates about the corner, with `θ ∈ (0, 3π/2)`:
//!
//! ```text
//! ψ = t² Φ(r) r^{2/3} cos(2θ/3)
//! A = t² f(r) (cos(θ/3), sin(θ/3)),   f = (4/3) Φ r^{-1/3} + Φ' r^{2/3}
//! ```
//!
//! `Φ` equals 0.1 near the corner, 0 beyond `r = 0.4`, and is the degree-7
//! Hermite polynomial `Υ` in between. With `q = Φ'' r^{2/3} + (7/3) Φ' r^{-1/3}`
//! one has `∇·A = t² q cos(2θ/3)` and `∇×A = −t² q sin(2θ/3)`, so both vanish
//! where `Φ` is constant: `A` is singular at the corner while `∇×A` and
//! `∇·A` are smooth.
//!
//! Every derivative needed by the sources comes from [`Jet`] arithmetic.

use num_complex::Complex64;

use crate::fe::{FeSystem, State};
use crate::forms::{map_elements, supercurrent, Sources, VectorSampler};
use crate::jet::{polar, Jet, T, X, Y};
use crate::quadrature::QuadratureRule;
use crate::sparse::dense_solve;
use crate::tdgl::MagneticScheme;

pub const R_INNER: f64 = 0.1;
pub const R_OUTER: f64 = 0.4;
const CENTER: f64 = 0.5 * (R_INNER + R_OUTER);
const HALF_WIDTH: f64 = 0.5 * (R_OUTER - R_INNER);

/// Degree-7 polynomial with `Υ(0.1) = 0.1`, `Υ' = Υ'' = Υ''' = 0` at 0.1 and
/// `Υ = Υ' = Υ'' = Υ''' = 0` at 0.4, stored in the centred variable
/// `u = (r − 0.25)/0.15 ∈ [−1, 1]`, which keeps the coefficients small.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsilon {
    pub coeffs: [f64; 8],
}

fn falling(k: usize, d: usize) -> f64 {
    (0..d).map(|i| (k - i) as f64).product()
}

impl Upsilon {
    /// Solve the 8×8 Hermite system in the monomial basis of `u`.
    pub fn build() -> Self {
        let mut rows = Vec::with_capacity(8);
        let mut rhs = Vec::with_capacity(8);
        for (s, value) in [(-1.0f64, R_INNER), (1.0, 0.0)] {
            for d in 0..4 {
                rows.push(
                    (0..8)
                        .map(|k| if k < d { 0.0 } else { falling(k, d) * s.powi((k - d) as i32) })
                        .collect(),
                );
                rhs.push(if d == 0 { value } else { 0.0 });
            }
        }
        let c = dense_solve(&rows, &rhs);
        Self {
            coeffs: std::array::from_fn(|k| c[k]),
        }
    }

    /// `d`-th derivative with respect to `r`.
    pub fn eval(&self, r: f64, d: usize) -> f64 {
        let u = (r - CENTER) / HALF_WIDTH;
        let mut acc = 0.0;
        for k in (d..8).rev() {
            acc = acc * u + falling(k, d) * self.coeffs[k];
        }
        acc / HALF_WIDTH.powi(d as i32)
    }

    /// Cut-off `Φ` and its derivatives.
    pub fn cutoff(&self, r: f64, d: usize) -> f64 {
        if r < R_INNER {
            if d == 0 { R_INNER } else { 0.0 }
        } else if r > R_OUTER {
            0.0
        } else {
            self.eval(r, d)
        }
    }
}

pub fn build_upsilon() -> Upsilon {
    Upsilon::build()
}

/// Jets of the exact fields at one space-time point.
#[derive(Debug, Clone, Copy)]
pub struct FieldJets {
    pub psi_re: Jet,
    pub psi_im: Jet,
    pub a: [Jet; 2],
    /// `H = ∇×A`, built from the closed polar form.
    pub h: Jet,
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub upsilon: Upsilon,
    pub eta: f64,
    pub kappa: f64,
}

/// Source terms at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceValues {
    pub g: Complex64,
    pub g_vec: [f64; 2],
    pub h: f64,
}

impl ExactSolution {
    pub fn new(eta: f64, kappa: f64) -> Self {
        Self {
            upsilon: Upsilon::build(),
            eta,
            kappa,
        }
    }

    fn radial(&self, r: &Jet, d: usize) -> Jet {
        let u = &self.upsilon;
        r.chain(u.cutoff(r.v, d), u.cutoff(r.v, d + 1), u.cutoff(r.v, d + 2))
    }

    pub fn jets(&self, x: [f64; 2], t: f64) -> FieldJets {
        let r = x[0].hypot(x[1]);
        if r < 1e-14 || r > R_OUTER {
            let z = Jet::zero();
            return FieldJets { psi_re: z, psi_im: z, a: [z, z], h: z };
        }
        let (rj, th) = polar(x[0], x[1]);
        let tj = Jet::variable(t, T);
        let t2 = tj * tj;
        let (p0, p1, p2) = (self.radial(&rj, 0), self.radial(&rj, 1), self.radial(&rj, 2));
        let r23 = rj.powf(2.0 / 3.0);
        let rm13 = rj.powf(-1.0 / 3.0);
        let psi = t2 * p0 * r23 * (th * (2.0 / 3.0)).cos();
        let f = (4.0 / 3.0) * p0 * rm13 + p1 * r23;
        let th3 = th * (1.0 / 3.0);
        let a = [t2 * f * th3.cos(), t2 * f * th3.sin()];
        let q = p2 * r23 + (7.0 / 3.0) * p1 * rm13;
        let h = -1.0 * (t2 * q * (th * (2.0 / 3.0)).sin());
        FieldJets { psi_re: psi, psi_im: Jet::zero(), a, h }
    }

    pub fn psi(&self, x: [f64; 2], t: f64) -> Complex64 {
        let j = self.jets(x, t);
        Complex64::new(j.psi_re.v, j.psi_im.v)
    }

    pub fn a(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let j = self.jets(x, t);
        [j.a[0].v, j.a[1].v]
    }

    pub fn field(&self, x: [f64; 2], t: f64) -> f64 {
        self.jets(x, t).h.v
    }

    pub fn div_a(&self, x: [f64; 2], t: f64) -> f64 {
        let j = self.jets(x, t);
        j.a[0].d[X] + j.a[1].d[Y]
    }

    /// Gauge potential `φ = −∇·A`.
    pub fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        -self.div_a(x, t)
    }

    pub fn sources(&self, x: [f64; 2], t: f64) -> SourceValues {
        let j = self.jets(x, t);
        let (eta, kappa) = (self.eta, self.kappa);
        let i = Complex64::new(0.0, 1.0);
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let psi = c(j.psi_re.v, j.psi_im.v);
        let grad = [c(j.psi_re.d[X], j.psi_im.d[X]), c(j.psi_re.d[Y], j.psi_im.d[Y])];
        let lap = c(j.psi_re.laplacian(), j.psi_im.laplacian());
        let dt = c(j.psi_re.d[T], j.psi_im.d[T]);
        let a = [j.a[0].v, j.a[1].v];
        let div = j.a[0].d[X] + j.a[1].d[Y];
        let a2 = a[0] * a[0] + a[1] * a[1];
        let a_grad = grad[0] * a[0] + grad[1] * a[1];
        let d2 = -lap / (kappa * kappa) + i / kappa * div * psi + 2.0 * i / kappa * a_grad + a2 * psi;
        let g = eta * dt - i * eta * kappa * psi * div + d2 + (psi.norm_sqr() - 1.0) * psi;

        let (a1, a2h) = (&j.a[0].h, &j.a[1].h);
        let grad_div = [a1[X][X] + a2h[Y][X], a1[X][Y] + a2h[Y][Y]];
        let curl_curl = [a2h[X][Y] - a1[Y][Y], -(a2h[X][X] - a1[Y][X])];
        let curl_h = [j.h.d[Y], -j.h.d[X]];
        let cur = supercurrent(psi, grad, a, kappa);
        let g_vec: [f64; 2] = std::array::from_fn(|k| {
            j.a[k].d[T] - grad_div[k] + curl_curl[k] + cur[k] - curl_h[k]
        });
        SourceValues { g, g_vec, h: j.h.v }
    }
}

impl Sources for ExactSolution {
    fn field(&self, x: [f64; 2], t: f64) -> f64 {
        ExactSolution::field(self, x, t)
    }
    fn psi_source(&self, x: [f64; 2], t: f64) -> Complex64 {
        self.sources(x, t).g
    }
    fn a_source(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.sources(x, t).g_vec
    }
    fn source_free(&self) -> bool {
        false
    }
}

/// L² errors at one mesh level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub tau: f64,
    pub psi: f64,
    pub psi_abs: f64,
    pub a: f64,
    pub b: f64,
}

/// Errors of a discrete state against the exact solution at time `t`.
/// `a_at` samples `A_h` and `curl_at` returns the elementwise curl.
pub fn error_norms(
    sys: &FeSystem,
    exact: &ExactSolution,
    psi: &[f64],
    a_at: &VectorSampler,
    curl_at: &(dyn Fn(usize) -> f64 + Sync),
    t: f64,
) -> [f64; 4] {
    let rule = QuadratureRule::accurate();
    let bary = rule.barycentric();
    let mesh = &sys.mesh;
    let local = map_elements(sys.exec, mesh.n_triangles(), |tri| {
        let area = mesh.area(tri);
        let b_h = curl_at(tri);
        let mut e = [0.0; 4];
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let x = mesh.point(tri, l);
            let j = exact.jets(x, t);
            let pe = Complex64::new(j.psi_re.v, j.psi_im.v);
            let (ph, _) = sys.eval_p1(psi, tri, l);
            let ah = a_at(tri, l);
            e[0] += w * (ph - pe).norm_sqr();
            e[1] += w * (ph.norm() - pe.norm()).powi(2);
            e[2] += w * ((ah[0] - j.a[0].v).powi(2) + (ah[1] - j.a[1].v).powi(2));
            e[3] += w * (b_h - j.h.v).powi(2);
        }
        e
    });
    let mut s = [0.0; 4];
    for e in local {
        for k in 0..4 {
            s[k] += e[k];
        }
    }
    s.map(f64::sqrt)
}

/// [`ErrorRow`] of a scheme state against the exact solution at the state's time.
pub fn state_errors(scheme: &dyn MagneticScheme, exact: &ExactSolution, state: &State, tau: f64) -> ErrorRow {
    let sys = scheme.sys();
    let a_at = |t: usize, l: &[f64; 3]| scheme.vector_at(&state.a, t, l);
    let curl_at = |t: usize| scheme.curl_at(&state.a, t);
    let [psi, psi_abs, a, b] = error_norms(sys, exact, &state.psi, &a_at, &curl_at, state.time);
    ErrorRow { h: sys.mesh.h, tau, psi, psi_abs, a, b }
}

/// Per-level errors and observed rates for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub scheme: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn new(scheme: &str) -> Self {
        Self {
            scheme: scheme.to_string(),
            rows: Vec::new(),
        }
    }

    /// Rates `log(e₁/e₂)/log(h₁/h₂)` between the two finest levels, which is
    /// `log₂(e₁/e₂)` for halved `h`.
    pub fn rates(&self) -> Option<[f64; 4]> {
        let n = self.rows.len();
        if n < 2 {
            return None;
        }
        Some(rate_between(&self.rows[n - 2], &self.rows[n - 1]))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,level,h,tau,psi_l2,psi_abs_l2,a_l2,b_l2\n");
        for (i, r) in self.rows.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                self.scheme, i, r.h, r.tau, r.psi, r.psi_abs, r.a, r.b
            ));
        }
        if let Some(q) = self.rates() {
            s.push_str(&format!(
                "{},rate,,,{:.6},{:.6},{:.6},{:.6}\n",
                self.scheme, q[0], q[1], q[2], q[3]
            ));
        }
        s
    }
}

pub fn rate_between(coarse: &ErrorRow, fine: &ErrorRow) -> [f64; 4] {
    let lh = (coarse.h / fine.h).ln();
    let c = [coarse.psi, coarse.psi_abs, coarse.a, coarse.b];
    let f = [fine.psi, fine.psi_abs, fine.a, fine.b];
    std::array::from_fn(|k| (c[k] / f[k]).ln() / lh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hermite interpolation through divided differences with repeated nodes.
    fn hermite_oracle(r: f64) -> f64 {
        let z = [0.1, 0.1, 0.1, 0.1, 0.4, 0.4, 0.4, 0.4];
        let value = |x: f64| if x < 0.25 { 0.1 } else { 0.0 };
        let n = z.len();
        let mut table = vec![vec![0.0; n]; n];
        for i in 0..n {
            table[i][0] = value(z[i]);
        }
        for k in 1..n {
            for i in 0..n - k {
                table[i][k] = if z[i + k] == z[i] {
                    0.0 // all derivatives of order ≥ 1 vanish at both ends
                } else {
                    (table[i + 1][k - 1] - table[i][k - 1]) / (z[i + k] - z[i])
                };
            }
        }
        let mut acc = table[0][n - 1];
        for k in (0..n - 1).rev() {
            acc = acc * (r - z[k]) + table[0][k];
        }
        acc
    }

    fn closed_form(r: f64) -> f64 {
        let s = (r - 0.1) / 0.3;
        0.1 * (1.0 - (35.0 * s.powi(4) - 84.0 * s.powi(5) + 70.0 * s.powi(6) - 20.0 * s.powi(7)))
    }

    #[test]
    fn upsilon_hermite_conditions() {
        let u = Upsilon::build();
        assert!((u.eval(0.1, 0) - 0.1).abs() < 1e-12);
        for d in 1..4 {
            assert!(u.eval(0.1, d).abs() < 1e-12, "Υ^({d})(0.1)");
        }
        for d in 0..4 {
            assert!(u.eval(0.4, d).abs() < 1e-12, "Υ^({d})(0.4) = {:e}", u.eval(0.4, d));
        }
    }

    #[test]
    fn upsilon_matches_independent_oracles() {
        let u = Upsilon::build();
        for r in [0.12, 0.2, 0.25, 0.33, 0.39] {
            assert!((u.eval(r, 0) - hermite_oracle(r)).abs() < 1e-10);
            assert!((u.eval(r, 0) - closed_form(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_is_c3_at_junctions() {
        let u = Upsilon::build();
        for r0 in [R_INNER, R_OUTER] {
            for d in 0..4 {
                let below = u.cutoff(r0 - 1e-15, d);
                let above = u.cutoff(r0 + 1e-15, d);
                assert!((below - above).abs() <= 1e-10, "d = {d} at {r0}");
            }
        }
    }

    #[test]
    fn support_and_initial_time() {
        let e = ExactSolution::new(1.0, 1.0);
        for x in [[0.5, 0.3], [-0.9, 0.9], [0.0, -0.41]] {
            let s = e.sources(x, 0.7);
            assert_eq!(e.psi(x, 0.7), Complex64::new(0.0, 0.0));
            assert_eq!(e.a(x, 0.7), [0.0, 0.0]);
            assert_eq!((s.g, s.g_vec, s.h), (Complex64::new(0.0, 0.0), [0.0, 0.0], 0.0));
        }
        for x in [[0.1, 0.05], [-0.2, -0.1], [0.03, 0.3]] {
            let s = e.sources(x, 0.0);
            assert_eq!(e.psi(x, 0.0).norm(), 0.0);
            assert_eq!(e.a(x, 0.0), [0.0, 0.0]);
            assert_eq!(s.g.norm(), 0.0);
            assert_eq!(s.g_vec, [0.0, 0.0]);
        }
        assert_eq!(e.psi([0.0, 0.0], 1.0).norm(), 0.0);
    }

    fn random_points(n: usize, seed: u64, rmin: f64, rmax: f64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = rng.random_range(rmin..rmax);
                let th = rng.random_range(0.05..(1.5 * std::f64::consts::PI - 0.05));
                [r * th.cos(), r * th.sin()]
            })
            .collect()
    }

    #[test]
    fn derivatives_match_central_differences() {
        let e = ExactSolution::new(1.0, 1.0);
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
        for x in random_points(100, 17, 0.1, 0.4) {
            let t = 0.8;
            let j = e.jets(x, t);
            let fd = |f: &dyn Fn([f64; 2], f64) -> f64| {
                [
                    (f([x[0] + h, x[1]], t) - f([x[0] - h, x[1]], t)) / (2.0 * h),
                    (f([x[0], x[1] + h], t) - f([x[0], x[1] - h], t)) / (2.0 * h),
                    (f(x, t + h) - f(x, t - h)) / (2.0 * h),
                ]
            };
            let psi = fd(&|p, s| e.psi(p, s).re);
            let a0 = fd(&|p, s| e.a(p, s)[0]);
            let a1 = fd(&|p, s| e.a(p, s)[1]);
            let hh = fd(&|p, s| e.field(p, s));
            for k in 0..3 {
                assert!(rel(j.psi_re.d[k], psi[k]) <= 1e-6);
                assert!(rel(j.a[0].d[k], a0[k]) <= 1e-6);
                assert!(rel(j.a[1].d[k], a1[k]) <= 1e-6);
                assert!(rel(j.h.d[k], hh[k]) <= 1e-6);
            }
            // Hessian entries against differences of AD gradients
            let gx = |p: [f64; 2]| e.jets(p, t).a[0].d[X];
            let fd_xx = (gx([x[0] + h, x[1]]) - gx([x[0] - h, x[1]])) / (2.0 * h);
            assert!(rel(j.a[0].h[X][X], fd_xx) <= 1e-6);
        }
    }

    #[test]
    fn closed_polar_curl_and_divergence_match_jets() {
        let e = ExactSolution::new(1.0, 1.0);
        for x in random_points(100, 23, 0.02, 0.45) {
            let j = e.jets(x, 0.6);
            let curl = j.a[1].d[X] - j.a[0].d[Y];
            assert!((curl - j.h.v).abs() <= 1e-9 * (1.0 + curl.abs()));
            // ∇×(∇×A) against ∇×H
            let cc = [j.a[1].h[X][Y] - j.a[0].h[Y][Y], j.a[0].h[Y][X] - j.a[1].h[X][X]];
            let ch = [j.h.d[Y], -j.h.d[X]];
            assert!((cc[0] - ch[0]).abs() <= 1e-9 * (1.0 + ch[0].abs()));
            assert!((cc[1] - ch[1]).abs() <= 1e-9 * (1.0 + ch[1].abs()));
        }
        // curl and divergence vanish where Φ is constant
        let j = e.jets([0.03, 0.05], 1.0);
        assert!((j.a[1].d[X] - j.a[0].d[Y]).abs() < 1e-9);
        assert!((j.a[0].d[X] + j.a[1].d[Y]).abs() < 1e-9);
    }

    #[test]
    fn boundary_conditions_on_corner_edges() {
        let e = ExactSolution::new(1.0, 1.0);
        for s in [0.05, 0.15, 0.3] {
            // θ = 0 edge: normal (0, −1); θ = 3π/2 edge: normal (1, 0)
            assert!(e.a([s, 0.0], 1.0)[1].abs() < 1e-14);
            assert!(e.a([0.0, -s], 1.0)[0].abs() < 1e-14);
            let j = e.jets([s, 0.0], 1.0);
            assert!(j.psi_re.d[Y].abs() < 1e-12);
            let j = e.jets([0.0, -s], 1.0);
            assert!(j.psi_re.d[X].abs() < 1e-12);
        }
    }

    #[test]
    fn radial_source_matches_hand_expansion() {
        // along θ = 0 with κ = η = 1: ψ = t²Φ r^{2/3}, A = t² f (1, 0),
        // ∇·A = t² q, and the real part of g reduces to
        // ∂tψ − Δψ + |A|²ψ + (ψ² − 1)ψ with Δψ = ψ_rr + ψ_r/r − (4/9)ψ/r².
        let e = ExactSolution::new(1.0, 1.0);
        let u = &e.upsilon;
        for r in [0.15, 0.22, 0.31] {
            let t = 0.9;
            let p = |d| u.cutoff(r, d);
            let w = |r: f64| r.powf(2.0 / 3.0);
            let psi_r = |rr: f64| t * t * u.cutoff(rr, 0) * w(rr);
            let hd = 1e-4;
            let d1 = (psi_r(r + hd) - psi_r(r - hd)) / (2.0 * hd);
            let d2 = (psi_r(r + hd) - 2.0 * psi_r(r) + psi_r(r - hd)) / (hd * hd);
            let psi = psi_r(r);
            let lap = d2 + d1 / r - 4.0 / 9.0 * psi / (r * r);
            let f = 4.0 / 3.0 * p(0) * r.powf(-1.0 / 3.0) + p(1) * w(r);
            let a = t * t * f;
            let dt = 2.0 * t * p(0) * w(r);
            let expect = dt - lap + a * a * psi + (psi * psi - 1.0) * psi;
            let g = e.sources([r, 0.0], t).g;
            assert!((g.re - expect).abs() <= 1e-6 * (1.0 + expect.abs()), "{} vs {expect}", g.re);
            // imaginary part: −ψ∇·A + ψ∇·A + 2 A·∇ψ = 2 A ψ_r
            let im = 2.0 * a * d1;
            assert!((g.im - im).abs() <= 1e-6 * (1.0 + im.abs()));
        }
    }

    #[test]
    fn csv_has_rate_row() {
        let mut t = ErrorTable::new("mixed");
        for (k, h) in [0.1, 0.05].into_iter().enumerate() {
            let e = 0.5f64.powi(k as i32);
            t.rows.push(ErrorRow { h, tau: 2.0 * h, psi: e, psi_abs: e, a: e, b: e });
        }
        let r = t.rates().unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("mixed,rate"));
    }
}
