//! Nodal Galerkin comparator for the potential equation.
//!
//! `A_h` is a continuous piecewise-linear vector field (two real dofs per
//! vertex, interleaved) and each step solves
//!
//! ```text
//! τ⁻¹(A, a) + (∇·A, ∇·a) + (∇×A, ∇×a) = (H, ∇×a) + (g⃗ − J(ψⁿ, Aⁿ), a) + τ⁻¹(Aⁿ, a)
//! ```
//!
//! with `A·n = 0` imposed on the nodal values (all domains are axis-aligned)
//! and the curl condition left natural. There is no separate potential:
//! `φ` is taken as `−∇·A_h`, constant on each triangle.

use crate::fe::{FeSystem, State};
use crate::forms::{
    interleaved, load_order, map_elements, scatter_matrix, scatter_vector, supercurrent, Params, Sources,
    StaticMatrices,
};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::{LuSolver, SparseMatrix, TripletList};
use crate::tdgl::{run, InitialData, MagneticScheme, PsiSolver, SolverConfig, Trajectory};
use crate::{Complex64, Result};

/// Vertex components fixed to zero by `A·n = 0`, indexed `2v + c`.
pub fn normal_constraints(mesh: &Mesh) -> Vec<bool> {
    let mut fixed = vec![false; 2 * mesh.vertices.len()];
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        if !mesh.boundary_edge[e] {
            continue;
        }
        let t = mesh.edge_tangent(e);
        // the normal component is the one across the edge
        let c = if t[0].abs() > t[1].abs() { 1 } else { 0 };
        fixed[2 * a + c] = true;
        fixed[2 * b + c] = true;
    }
    fixed
}

/// Local `(mass, div-div + curl-curl)` on one triangle in the interleaved
/// vertex ordering.
fn local_forms(mesh: &Mesh, t: usize) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
    let g = mesh.bary_gradients(t);
    let area = mesh.area(t);
    // divergence and curl of λ_i e_c
    let div = |k: usize| g[k / 2][k % 2];
    let curl = |k: usize| if k.is_multiple_of(2) { -g[k / 2][1] } else { g[k / 2][0] };
    let mut m = [[0.0; 6]; 6];
    let mut s = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            if i % 2 == j % 2 {
                m[i][j] = area / 12.0 * if i / 2 == j / 2 { 2.0 } else { 1.0 };
            }
            s[i][j] = area * (div(i) * div(j) + curl(i) * curl(j));
        }
    }
    (m, s)
}

/// `(M, K)`: vector P1 mass and `(∇·A, ∇·a) + (∇×A, ∇×a)`, unconstrained.
pub fn nodal_matrices(sys: &FeSystem) -> (SparseMatrix, SparseMatrix) {
    let mesh = &sys.mesh;
    let n = 2 * mesh.vertices.len();
    let locals = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let d = interleaved(sys.p1_dofs(t));
        let (m, s) = local_forms(mesh, t);
        ((d, d, m), (d, d, s))
    });
    let (ml, sl): (Vec<_>, Vec<_>) = locals.into_iter().unzip();
    (scatter_matrix(n, n, ml), scatter_matrix(n, n, sl))
}

/// The nodal Galerkin method for `A`.
pub struct NodalScheme<'a> {
    sys: &'a FeSystem,
    mass: SparseMatrix,
    fixed: Vec<bool>,
    lu: LuSolver,
    params: Params,
}

impl<'a> NodalScheme<'a> {
    pub fn new(sys: &'a FeSystem, params: Params) -> Result<Self> {
        let (mass, stiff) = nodal_matrices(sys);
        let fixed = normal_constraints(&sys.mesh);
        let full = stiff.axpby(1.0, &mass, 1.0 / params.tau);
        // symmetric elimination of the fixed (zero) components
        let n = full.nrows;
        let mut t = TripletList::with_capacity(n, n, full.nnz());
        for i in 0..n {
            if fixed[i] {
                t.push(i, i, 1.0);
                continue;
            }
            for (j, v) in full.row(i) {
                if !fixed[j] {
                    t.push(i, j, v);
                }
            }
        }
        let lu = LuSolver::new(t.into_matrix())?;
        Ok(Self { sys, mass, fixed, lu, params })
    }

    pub fn n_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn constraints(&self) -> &[bool] {
        &self.fixed
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.lu.matrix()
    }

    /// `−∇·A_h` on each triangle.
    pub fn potential(&self, a: &[f64]) -> Vec<f64> {
        (0..self.sys.mesh.n_triangles())
            .map(|t| {
                let g = self.sys.mesh.bary_gradients(t);
                let d = self.sys.p1_dofs(t);
                -(0..3).map(|k| a[2 * d[k]] * g[k][0] + a[2 * d[k] + 1] * g[k][1]).sum::<f64>()
            })
            .collect()
    }

    fn rhs(&self, psi_n: &[f64], a_n: &[f64], sources: &dyn Sources, t_next: f64) -> Vec<f64> {
        let sys = self.sys;
        let mesh = &sys.mesh;
        let rule = QuadratureRule::accurate();
        let with_src = !sources.source_free();
        let kappa = self.params.kappa;
        // (g⃗ − J, λ_i e_c) is the complex P1 load of (f₁ + i f₂)
        let mut r = load_order(sys, &rule, |t, l| {
            let (psi, grad) = sys.eval_p1(psi_n, t, l);
            let j = supercurrent(psi, grad, self.vector_at(a_n, t, l), kappa);
            let g = if with_src { sources.a_source(mesh.point(t, l), t_next) } else { [0.0, 0.0] };
            Complex64::new(g[0] - j[0], g[1] - j[1])
        });
        let bary = rule.barycentric();
        let curl_part = map_elements(sys.exec, mesh.n_triangles(), |t| {
            let g = mesh.bary_gradients(t);
            let area = mesh.area(t);
            let h: f64 = bary
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| 2.0 * area * w * sources.field(mesh.point(t, l), t_next))
                .sum();
            let mut v = [0.0; 6];
            for k in 0..3 {
                v[2 * k] = -h * g[k][1];
                v[2 * k + 1] = h * g[k][0];
            }
            (interleaved(sys.p1_dofs(t)), v)
        });
        let curl_part = scatter_vector(r.len(), curl_part);
        let ma = self.mass.matvec(a_n);
        for i in 0..r.len() {
            r[i] = if self.fixed[i] { 0.0 } else { r[i] + curl_part[i] + ma[i] / self.params.tau };
        }
        r
    }
}

impl MagneticScheme for NodalScheme<'_> {
    fn name(&self) -> &'static str {
        "galerkin"
    }

    fn sys(&self) -> &FeSystem {
        self.sys
    }

    fn initial(&self, a0: &dyn Fn([f64; 2]) -> [f64; 2], _div_a0: &dyn Fn([f64; 2]) -> f64) -> (Vec<f64>, Vec<f64>) {
        let mut a: Vec<f64> = self.sys.mesh.vertices.iter().flat_map(|&x| a0(x)).collect();
        for (v, &f) in a.iter_mut().zip(&self.fixed) {
            if f {
                *v = 0.0;
            }
        }
        (self.potential(&a), a)
    }

    fn vector_at(&self, a: &[f64], t: usize, l: &[f64; 3]) -> [f64; 2] {
        let d = self.sys.p1_dofs(t);
        let mut v = [0.0; 2];
        for k in 0..3 {
            v[0] += a[2 * d[k]] * l[k];
            v[1] += a[2 * d[k] + 1] * l[k];
        }
        v
    }

    fn curl_at(&self, a: &[f64], t: usize) -> f64 {
        let g = self.sys.mesh.bary_gradients(t);
        let d = self.sys.p1_dofs(t);
        (0..3).map(|k| a[2 * d[k] + 1] * g[k][0] - a[2 * d[k]] * g[k][1]).sum()
    }

    fn phi_at(&self, phi: &[f64], t: usize, _l: &[f64; 3]) -> f64 {
        phi[t]
    }

    fn step(&self, psi_n: &[f64], a_n: &[f64], sources: &dyn Sources, t_next: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.lu.solve(&self.rhs(psi_n, a_n, sources, t_next))?;
        Ok((self.potential(&a), a))
    }
}

/// Full run of the Galerkin comparator with the shared order-parameter
/// solver and time loop.
pub fn galerkin_run(
    sys: &FeSystem,
    mats: &StaticMatrices,
    cfg: &SolverConfig,
    init: &InitialData,
    sources: &dyn Sources,
    observer: &mut dyn FnMut(&State) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let scheme = NodalScheme::new(sys, cfg.params())?;
    let psi = PsiSolver::new(sys, mats, *cfg);
    run(&scheme, &psi, cfg, init, sources, observer)
}
