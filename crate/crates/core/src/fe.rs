//! Finite element spaces on a [`Mesh`].
//!
//! * `S_h`: complex P1 Lagrange, one complex dof per vertex, stored as
//!   interleaved `(re, im)` pairs.
//! * `V_h`: real P2 Lagrange, nodal basis; vertex dofs first, then one dof
//!   per edge midpoint (`V + e`).
//! * `N_h`: full-P1 (second-kind, degree one) Nédélec space. The basis is
//!   hierarchical: the Whitney function `w_e = λ_lo∇λ_hi − λ_hi∇λ_lo` of
//!   each oriented edge (dof `e`) and the gradient of the quadratic edge
//!   bubble `g_e = ∇(4λ_lo λ_hi)` (dof `E + e`). Because `g_e` is exactly
//!   the gradient of the P2 edge basis function, `∇V_h ⊂ N_h` and the
//!   discrete de Rham sequence is exact.
//!
//! The dual functionals of `N_h` are the tangential moments
//! `∫_e v·t ds` and `¾ ∫_e (v·t)(1 − 2s) ds`, with `s ∈ [0, 1]` running
//! from the low to the high vertex of `e`.

use num_complex::Complex64;

use crate::forms::ExecMode;
use crate::mesh::Mesh;
use crate::quadrature::LineRule;
use crate::sparse::{SparseMatrix, TripletList};
use crate::Result;

/// Which space a coefficient vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Complex P1 (`ψ`).
    Order,
    /// Real P2 (`φ`).
    Potential,
    /// Edge elements (`A`).
    Edge,
}

/// Value of a finite element function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    Complex {
        value: Complex64,
        grad: [Complex64; 2],
    },
    Real {
        value: f64,
        grad: [f64; 2],
    },
    Vector {
        value: [f64; 2],
        curl: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FeSystem {
    pub mesh: Mesh,
    pub exec: ExecMode,
}

impl FeSystem {
    pub fn new(mesh: Mesh) -> Self {
        Self {
            mesh,
            exec: ExecMode::Sequential,
        }
    }

    pub fn with_exec(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    /// Complex dofs of `S_h` (real length is twice this).
    pub fn n_s(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_v(&self) -> usize {
        self.mesh.n_vertices() + self.mesh.n_edges()
    }

    pub fn n_n(&self) -> usize {
        2 * self.mesh.n_edges()
    }

    pub fn n_whitney(&self) -> usize {
        self.mesh.n_edges()
    }

    pub fn p1_dofs(&self, t: usize) -> [usize; 3] {
        self.mesh.triangles[t]
    }

    pub fn p2_dofs(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.mesh.triangles[t];
        let nv = self.mesh.n_vertices();
        let [e0, e1, e2] = self.mesh.tri_edges[t];
        [a, b, c, nv + e0, nv + e1, nv + e2]
    }

    pub fn edge_dofs(&self, t: usize) -> [usize; 6] {
        let ne = self.mesh.n_edges();
        let [e0, e1, e2] = self.mesh.tri_edges[t];
        [e0, e1, e2, ne + e0, ne + e1, ne + e2]
    }

    /// P2 nodal basis values and gradients.
    pub fn p2_basis(&self, t: usize, l: &[f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
        let g = self.mesh.bary_gradients(t);
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        for i in 0..3 {
            val[i] = l[i] * (2.0 * l[i] - 1.0);
            let s = 4.0 * l[i] - 1.0;
            grad[i] = [s * g[i][0], s * g[i][1]];
        }
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            val[3 + k] = 4.0 * l[a] * l[b];
            grad[3 + k] = [
                4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
            ];
        }
        (val, grad)
    }

    /// Edge basis values on triangle `t`, ordered as [`Self::edge_dofs`].
    pub fn edge_basis(&self, t: usize, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let g = self.mesh.bary_gradients(t);
        let sign = self.mesh.tri_edge_signs[t];
        let mut out = [[0.0; 2]; 6];
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let s = sign[k];
            out[k] = [
                s * (l[a] * g[b][0] - l[b] * g[a][0]),
                s * (l[a] * g[b][1] - l[b] * g[a][1]),
            ];
            out[3 + k] = [
                4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
            ];
        }
        out
    }

    /// Scalar curls of the edge basis on triangle `t` (constant per element).
    pub fn edge_curls(&self, t: usize) -> [f64; 6] {
        let area = self.mesh.area(t);
        let s = self.mesh.tri_edge_signs[t];
        [s[0] / area, s[1] / area, s[2] / area, 0.0, 0.0, 0.0]
    }

    pub fn eval_edge(&self, a: &[f64], t: usize, l: &[f64; 3]) -> [f64; 2] {
        let dofs = self.edge_dofs(t);
        let basis = self.edge_basis(t, l);
        let mut v = [0.0; 2];
        for (d, w) in dofs.iter().zip(basis) {
            v[0] += a[*d] * w[0];
            v[1] += a[*d] * w[1];
        }
        v
    }

    pub fn curl_edge(&self, a: &[f64], t: usize) -> f64 {
        let dofs = self.edge_dofs(t);
        let curls = self.edge_curls(t);
        dofs.iter().zip(curls).map(|(d, c)| a[*d] * c).sum()
    }

    pub fn eval_p2(&self, phi: &[f64], t: usize, l: &[f64; 3]) -> (f64, [f64; 2]) {
        let dofs = self.p2_dofs(t);
        let (val, grad) = self.p2_basis(t, l);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for i in 0..6 {
            v += phi[dofs[i]] * val[i];
            g[0] += phi[dofs[i]] * grad[i][0];
            g[1] += phi[dofs[i]] * grad[i][1];
        }
        (v, g)
    }

    /// Complex P1 value and gradient from interleaved coefficients.
    pub fn eval_p1(&self, psi: &[f64], t: usize, l: &[f64; 3]) -> (Complex64, [Complex64; 2]) {
        let dofs = self.p1_dofs(t);
        let g = self.mesh.bary_gradients(t);
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = [Complex64::new(0.0, 0.0); 2];
        for i in 0..3 {
            let c = Complex64::new(psi[2 * dofs[i]], psi[2 * dofs[i] + 1]);
            v += c * l[i];
            d[0] += c * g[i][0];
            d[1] += c * g[i][1];
        }
        (v, d)
    }

    /// Nodal interpolant into `S_h`, interleaved.
    pub fn interpolate_order(&self, f: impl Fn([f64; 2]) -> Complex64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_s());
        for &p in &self.mesh.vertices {
            let z = f(p);
            out.push(z.re);
            out.push(z.im);
        }
        out
    }

    /// Nodal interpolant into `V_h` (vertex and edge-midpoint values).
    pub fn interpolate_potential(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let m = &self.mesh;
        let mut out: Vec<f64> = m.vertices.iter().map(|&p| f(p)).collect();
        out.extend(m.edges.iter().map(|&[a, b]| {
            let (pa, pb) = (m.vertices[a], m.vertices[b]);
            f([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])])
        }));
        out
    }

    /// Edge interpolant into `N_h` via the two tangential moments per edge,
    /// each computed with a 3-point Gauss rule.
    pub fn interpolate_edge(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let m = &self.mesh;
        let ne = m.n_edges();
        let rule = LineRule::gauss(3);
        let mut out = vec![0.0; 2 * ne];
        for e in 0..ne {
            let [a, b] = m.edges[e];
            let (pa, pb) = (m.vertices[a], m.vertices[b]);
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let (mut m0, mut m1) = (0.0, 0.0);
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let v = f([pa[0] + s * d[0], pa[1] + s * d[1]]);
                // v·t ds = v·d ds/|e| with ds = |e| dσ
                let vt = v[0] * d[0] + v[1] * d[1];
                m0 += w * vt;
                m1 += w * vt * (1.0 - 2.0 * s);
            }
            out[e] = m0;
            out[ne + e] = 0.75 * m1;
        }
        out
    }

    /// Point evaluation of a coefficient vector.
    pub fn evaluate(&self, space: Space, coeffs: &[f64], points: &[[f64; 2]]) -> Result<Vec<PointValue>> {
        points
            .iter()
            .map(|&p| {
                let (t, l) = self.mesh.locate(p)?;
                Ok(match space {
                    Space::Order => {
                        let (value, grad) = self.eval_p1(coeffs, t, &l);
                        PointValue::Complex { value, grad }
                    }
                    Space::Potential => {
                        let (value, grad) = self.eval_p2(coeffs, t, &l);
                        PointValue::Real { value, grad }
                    }
                    Space::Edge => PointValue::Vector {
                        value: self.eval_edge(coeffs, t, &l),
                        curl: self.curl_edge(coeffs, t),
                    },
                })
            })
            .collect()
    }

    /// Exact inclusion `G : V_h → N_h`, `∇χ_h = Σ (Gχ)_j N_j`.
    pub fn gradient_matrix(&self) -> SparseMatrix {
        let m = &self.mesh;
        let (nv, ne) = (m.n_vertices(), m.n_edges());
        let mut t = TripletList::with_capacity(self.n_n(), self.n_v(), 5 * ne);
        for (e, &[lo, hi]) in m.edges.iter().enumerate() {
            t.push(e, hi, 1.0);
            t.push(e, lo, -1.0);
            t.push(ne + e, lo, -0.5);
            t.push(ne + e, hi, -0.5);
            t.push(ne + e, nv + e, 1.0);
        }
        t.into_matrix()
    }

    /// Integrated curl `C[T, j] = ∫_T ∇×N_j`, a `F × n_N` matrix.
    pub fn curl_matrix(&self) -> SparseMatrix {
        let m = &self.mesh;
        let mut t = TripletList::with_capacity(m.n_triangles(), self.n_n(), 3 * m.n_triangles());
        for tri in 0..m.n_triangles() {
            for k in 0..3 {
                t.push(tri, m.tri_edges[tri][k], m.tri_edge_signs[tri][k]);
            }
        }
        t.into_matrix()
    }
}

pub fn build_system(mesh: Mesh) -> FeSystem {
    FeSystem::new(mesh)
}

/// Discrete solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Interleaved `(re, im)` nodal values of `ψ_h`.
    pub psi: Vec<f64>,
    /// Coefficients of `φ_h`; the layout is defined by the magnetic scheme.
    pub phi: Vec<f64>,
    /// Coefficients of `A_h`; the layout is defined by the magnetic scheme.
    pub a: Vec<f64>,
    pub step: usize,
    pub time: f64,
}

impl State {
    pub fn psi_at(&self, i: usize) -> Complex64 {
        Complex64::new(self.psi[2 * i], self.psi[2 * i + 1])
    }

    /// `max_i |ψ_i|`, which is the sup norm for P1 functions.
    pub fn psi_sup(&self) -> f64 {
        self.psi
            .chunks_exact(2)
            .map(|c| c[0].hypot(c[1]))
            .fold(0.0, f64::max)
    }
}
