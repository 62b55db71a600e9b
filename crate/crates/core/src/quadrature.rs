//! Quadrature on the reference triangle and on segments.
//!
//! Triangle rules are collapsed (Duffy) products of Gauss–Legendre rules,
//! which keeps every weight positive and makes the exactness degree easy to
//! choose. The reference triangle is `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area `1/2`.
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Collapsed Gauss rule exact for polynomials of total degree `degree`.
    pub fn triangle(degree: usize) -> Self {
        // the Jacobian (1 - u) adds one degree in u
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                points.push([u, v * (1.0 - u)]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    /// Rule used for element matrices (integrands up to degree 4).
    pub fn assembly() -> Self {
        Self::triangle(6)
    }

    /// Rule used for sources, energies and error norms.
    pub fn accurate() -> Self {
        Self::triangle(8)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates `(λ0, λ1, λ2)` of every point.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|&[xi, eta]| [1.0 - xi - eta, xi, eta])
            .collect()
    }
}

/// Gauss rule on the unit interval, used for edge moments.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn gauss(n: usize) -> Self {
        let (points, weights) = gauss_legendre(n);
        Self { points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        for d in [2, 4, 6, 8] {
            let q = QuadratureRule::triangle(d);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-15, "degree {d}: {s}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn triangle_rules_integrate_monomials_exactly() {
        // ∫_T ξ^a η^b = a! b! / (a + b + 2)!
        for d in [6, 8] {
            let q = QuadratureRule::triangle(d);
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!(
                        ((approx - exact) / exact).abs() < 1e-13,
                        "degree {d}, monomial ({a},{b}): {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_line_exactness() {
        let r = LineRule::gauss(3);
        for k in 0..=5 {
            let s: f64 = r
                .points
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(k))
                .sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
