//! Element-loop assembly of the bilinear and linear forms of the scheme.
//!
//! Element contributions are computed independently (optionally on the
//! rayon pool) and then scattered in element order, so the resulting
//! matrices and vectors do not depend on the execution mode.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fe::FeSystem;
use crate::quadrature::QuadratureRule;
use crate::sparse::{SparseMatrix, TripletList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Sequential,
    Parallel,
}

/// Map `f` over element indices, preserving order.
pub fn map_elements<T, F>(exec: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

pub(crate) fn scatter_matrix<const R: usize, const C: usize>(
    nrows: usize,
    ncols: usize,
    locals: Vec<([usize; R], [usize; C], [[f64; C]; R])>,
) -> SparseMatrix {
    let mut t = TripletList::with_capacity(nrows, ncols, locals.len() * R * C);
    for (rows, cols, m) in locals {
        for i in 0..R {
            for j in 0..C {
                t.push(rows[i], cols[j], m[i][j]);
            }
        }
    }
    t.into_matrix()
}

pub(crate) fn scatter_vector<const K: usize>(n: usize, locals: Vec<([usize; K], [f64; K])>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (dofs, v) in locals {
        for k in 0..K {
            out[dofs[k]] += v[k];
        }
    }
    out
}

pub(crate) fn interleaved(d: [usize; 3]) -> [usize; 6] {
    [2 * d[0], 2 * d[0] + 1, 2 * d[1], 2 * d[1] + 1, 2 * d[2], 2 * d[2] + 1]
}

/// Matrices that depend only on the mesh.
#[derive(Debug, Clone)]
pub struct StaticMatrices {
    /// P1 mass (`n_S × n_S`, real).
    pub m_s: SparseMatrix,
    /// P1 stiffness `(∇ψ, ∇φ)`.
    pub k_s: SparseMatrix,
    pub m_v: SparseMatrix,
    pub k_v: SparseMatrix,
    pub m_n: SparseMatrix,
    pub k_curl: SparseMatrix,
    /// `B_div[χ, a] = (a, ∇χ)`, `n_V × n_N`.
    pub b_div: SparseMatrix,
    pub g: SparseMatrix,
    pub c: SparseMatrix,
}

pub fn assemble_static(sys: &FeSystem) -> StaticMatrices {
    let mesh = &sys.mesh;
    let rule = QuadratureRule::assembly();
    let bary = rule.barycentric();
    let nt = mesh.n_triangles();

    type P1 = ([usize; 3], [usize; 3], [[f64; 3]; 3]);
    type P2 = ([usize; 6], [usize; 6], [[f64; 6]; 6]);
    struct Local {
        m_s: P1,
        k_s: P1,
        m_v: P2,
        k_v: P2,
        m_n: P2,
        k_curl: P2,
        b_div: P2,
    }

    let locals = map_elements(sys.exec, nt, |t| {
        let area = mesh.area(t);
        let g1 = mesh.bary_gradients(t);
        let p1 = sys.p1_dofs(t);
        let p2 = sys.p2_dofs(t);
        let ed = sys.edge_dofs(t);
        let mut m_s = [[0.0; 3]; 3];
        let mut k_s = [[0.0; 3]; 3];
        let mut m_v = [[0.0; 6]; 6];
        let mut k_v = [[0.0; 6]; 6];
        let mut m_n = [[0.0; 6]; 6];
        let mut k_curl = [[0.0; 6]; 6];
        let mut b_div = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                k_s[i][j] = area * (g1[i][0] * g1[j][0] + g1[i][1] * g1[j][1]);
            }
        }
        let curls = sys.edge_curls(t);
        for i in 0..6 {
            for j in 0..6 {
                k_curl[i][j] = area * curls[i] * curls[j];
            }
        }
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let (pv, pg) = sys.p2_basis(t, l);
            let nb = sys.edge_basis(t, l);
            for i in 0..3 {
                for j in 0..3 {
                    m_s[i][j] += w * l[i] * l[j];
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    m_v[i][j] += w * pv[i] * pv[j];
                    k_v[i][j] += w * (pg[i][0] * pg[j][0] + pg[i][1] * pg[j][1]);
                    m_n[i][j] += w * (nb[i][0] * nb[j][0] + nb[i][1] * nb[j][1]);
                    b_div[i][j] += w * (pg[i][0] * nb[j][0] + pg[i][1] * nb[j][1]);
                }
            }
        }
        Local {
            m_s: (p1, p1, m_s),
            k_s: (p1, p1, k_s),
            m_v: (p2, p2, m_v),
            k_v: (p2, p2, k_v),
            m_n: (ed, ed, m_n),
            k_curl: (ed, ed, k_curl),
            b_div: (p2, ed, b_div),
        }
    });

    let (ns, nv, nn) = (sys.n_s(), sys.n_v(), sys.n_n());
    macro_rules! gather {
        ($field:ident, $r:expr, $c:expr) => {
            scatter_matrix($r, $c, locals.iter().map(|l| l.$field).collect())
        };
    }
    StaticMatrices {
        m_s: gather!(m_s, ns, ns),
        k_s: gather!(k_s, ns, ns),
        m_v: gather!(m_v, nv, nv),
        k_v: gather!(k_v, nv, nv),
        m_n: gather!(m_n, nn, nn),
        k_curl: gather!(k_curl, nn, nn),
        b_div: gather!(b_div, nv, nn),
        g: sys.gradient_matrix(),
        c: sys.curl_matrix(),
    }
}

/// Block embedding `M ⊗ I₂` of a real `n × n` matrix into the interleaved
/// `2n × 2n` layout.
pub fn complex_embed(m: &SparseMatrix, scale: f64) -> SparseMatrix {
    let mut t = TripletList::with_capacity(2 * m.nrows, 2 * m.ncols, 2 * m.nnz());
    for i in 0..m.nrows {
        for (j, v) in m.row(i) {
            t.push(2 * i, 2 * j, scale * v);
            t.push(2 * i + 1, 2 * j + 1, scale * v);
        }
    }
    t.into_matrix()
}

/// Sampler for the vector potential on triangle `t` at barycentric point `λ`.
pub type VectorSampler<'a> = dyn Fn(usize, &[f64; 3]) -> [f64; 2] + Sync + 'a;
/// Sampler for a scalar on triangle `t` at barycentric point `λ`.
pub type ScalarSampler<'a> = dyn Fn(usize, &[f64; 3]) -> f64 + Sync + 'a;

/// Real `2n_S × 2n_S` matrix of the form `((i/κ∇ + A)ψ, (i/κ∇ + A)φ)`.
///
/// Entry for test `φ_k` and trial `φ_j`:
/// `κ⁻²∇φ_j·∇φ_k + |A|²φ_jφ_k + (i/κ)(φ_k A·∇φ_j − φ_j A·∇φ_k)`.
pub fn assemble_covariant(sys: &FeSystem, kappa: f64, a: &VectorSampler) -> SparseMatrix {
    let mesh = &sys.mesh;
    let rule = QuadratureRule::assembly();
    let bary = rule.barycentric();
    let k2 = 1.0 / (kappa * kappa);
    let locals = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let area = mesh.area(t);
        let g = mesh.bary_gradients(t);
        let mut re = [[0.0; 3]; 3];
        let mut im = [[0.0; 3]; 3];
        for k in 0..3 {
            for j in 0..3 {
                re[k][j] = area * k2 * (g[j][0] * g[k][0] + g[j][1] * g[k][1]);
            }
        }
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let av = a(t, l);
            let a2 = av[0] * av[0] + av[1] * av[1];
            let adg: [f64; 3] = std::array::from_fn(|i| av[0] * g[i][0] + av[1] * g[i][1]);
            for k in 0..3 {
                for j in 0..3 {
                    re[k][j] += w * a2 * l[j] * l[k];
                    im[k][j] += w * (l[k] * adg[j] - l[j] * adg[k]) / kappa;
                }
            }
        }
        let d = interleaved(sys.p1_dofs(t));
        let mut m = [[0.0; 6]; 6];
        for k in 0..3 {
            for j in 0..3 {
                m[2 * k][2 * j] = re[k][j];
                m[2 * k][2 * j + 1] = -im[k][j];
                m[2 * k + 1][2 * j] = im[k][j];
                m[2 * k + 1][2 * j + 1] = re[k][j];
            }
        }
        (d, d, m)
    });
    scatter_matrix(2 * sys.n_s(), 2 * sys.n_s(), locals)
}

/// `(|ψ|²ψ, φ_k)` in interleaved layout, and its Jacobian when requested.
pub fn cubic_term(sys: &FeSystem, psi: &[f64], jacobian: bool) -> (Vec<f64>, Option<SparseMatrix>) {
    let mesh = &sys.mesh;
    let rule = QuadratureRule::assembly();
    let bary = rule.barycentric();
    let locals = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let area = mesh.area(t);
        let d = sys.p1_dofs(t);
        let mut r = [0.0; 6];
        let mut jm = [[0.0; 6]; 6];
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let (mut u, mut v) = (0.0, 0.0);
            for i in 0..3 {
                u += psi[2 * d[i]] * l[i];
                v += psi[2 * d[i] + 1] * l[i];
            }
            let s = u * u + v * v;
            for k in 0..3 {
                r[2 * k] += w * s * u * l[k];
                r[2 * k + 1] += w * s * v * l[k];
            }
            if jacobian {
                let (juu, juv, jvv) = (3.0 * u * u + v * v, 2.0 * u * v, u * u + 3.0 * v * v);
                for k in 0..3 {
                    for j in 0..3 {
                        let p = w * l[k] * l[j];
                        jm[2 * k][2 * j] += p * juu;
                        jm[2 * k][2 * j + 1] += p * juv;
                        jm[2 * k + 1][2 * j] += p * juv;
                        jm[2 * k + 1][2 * j + 1] += p * jvv;
                    }
                }
            }
        }
        (interleaved(d), r, jm)
    });
    let n = 2 * sys.n_s();
    let mut res = vec![0.0; n];
    for (dofs, r, _) in &locals {
        for k in 0..6 {
            res[dofs[k]] += r[k];
        }
    }
    let jac = jacobian.then(|| scatter_matrix(n, n, locals.into_iter().map(|(d, _, m)| (d, d, m)).collect()));
    (res, jac)
}

/// Cut-off `Θ(z) = z / max(|z|, 1)`.
pub fn theta(z: Complex64) -> Complex64 {
    z / z.norm().max(1.0)
}

/// Supercurrent `Re[ψ̄ (i/κ∇ + A)ψ] = (v∇u − u∇v)/κ + |ψ|²A`.
pub fn supercurrent(psi: Complex64, grad: [Complex64; 2], a: [f64; 2], kappa: f64) -> [f64; 2] {
    let (u, v) = (psi.re, psi.im);
    let s = psi.norm_sqr();
    [
        (v * grad[0].re - u * grad[0].im) / kappa + s * a[0],
        (v * grad[1].re - u * grad[1].im) / kappa + s * a[1],
    ]
}

/// Data entering the equations besides the unknowns.
pub trait Sources: Sync {
    /// Applied field `H(x, t)`.
    fn field(&self, x: [f64; 2], t: f64) -> f64;
    /// Source `g` of the order-parameter equation.
    fn psi_source(&self, _x: [f64; 2], _t: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    /// Source `g⃗` of the potential equation.
    fn a_source(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    /// Whether `psi_source` and `a_source` vanish identically.
    fn source_free(&self) -> bool {
        true
    }
}

/// `∫ f φ_k` for complex `f`, interleaved.
pub fn load_order(sys: &FeSystem, rule: &QuadratureRule, f: impl Fn(usize, &[f64; 3]) -> Complex64 + Sync + Send) -> Vec<f64> {
    let mesh = &sys.mesh;
    let bary = rule.barycentric();
    let locals = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let area = mesh.area(t);
        let mut r = [0.0; 6];
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let z = f(t, l) * (2.0 * area * w);
            for k in 0..3 {
                r[2 * k] += z.re * l[k];
                r[2 * k + 1] += z.im * l[k];
            }
        }
        (interleaved(sys.p1_dofs(t)), r)
    });
    scatter_vector(2 * sys.n_s(), locals)
}

/// `∫ f·N_j + c ∇×N_j` over the edge basis, where `f` returns `(f, c)`.
pub fn load_edge(
    sys: &FeSystem,
    rule: &QuadratureRule,
    f: impl Fn(usize, &[f64; 3]) -> ([f64; 2], f64) + Sync + Send,
) -> Vec<f64> {
    let mesh = &sys.mesh;
    let bary = rule.barycentric();
    let locals = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let area = mesh.area(t);
        let curls = sys.edge_curls(t);
        let mut r = [0.0; 6];
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let (v, c) = f(t, l);
            let nb = sys.edge_basis(t, l);
            for k in 0..6 {
                r[k] += w * (v[0] * nb[k][0] + v[1] * nb[k][1] + c * curls[k]);
            }
        }
        (sys.edge_dofs(t), r)
    });
    scatter_vector(sys.n_n(), locals)
}

/// Right-hand sides of one time step of the mixed scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRhs {
    /// `(H, ∇×a) + (g⃗, a) + τ⁻¹(Aⁿ, a) − (J(ψⁿ, Aⁿ), a)`, length `n_N`.
    pub a: Vec<f64>,
    /// `(g, φ) − (iηκ Θ(ψⁿ) φⁿ, φ)`, interleaved, length `2 n_S`.
    pub psi: Vec<f64>,
}

/// Physical parameters needed by the right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub eta: f64,
    pub kappa: f64,
    pub tau: f64,
}

/// Assemble the step right-hand sides for the mixed scheme with sources
/// evaluated at `t_next`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_step_rhs(
    sys: &FeSystem,
    m_n: &SparseMatrix,
    psi_n: &[f64],
    phi_n: &[f64],
    a_n: &[f64],
    sources: &dyn Sources,
    t_next: f64,
    p: Params,
) -> StepRhs {
    let a = edge_rhs(sys, m_n, psi_n, a_n, sources, t_next, p);
    let phi = |t: usize, l: &[f64; 3]| sys.eval_p2(phi_n, t, l).0;
    let psi = psi_rhs(sys, &QuadratureRule::accurate(), psi_n, &phi, sources, t_next, p);
    StepRhs { a, psi }
}

/// Edge part of the step right-hand side.
pub fn edge_rhs(
    sys: &FeSystem,
    m_n: &SparseMatrix,
    psi_n: &[f64],
    a_n: &[f64],
    sources: &dyn Sources,
    t_next: f64,
    p: Params,
) -> Vec<f64> {
    let rule = QuadratureRule::accurate();
    let mesh = &sys.mesh;
    let with_src = !sources.source_free();
    let mut a = load_edge(sys, &rule, |t, l| {
        let x = mesh.point(t, l);
        let (psi, grad) = sys.eval_p1(psi_n, t, l);
        let av = sys.eval_edge(a_n, t, l);
        let j = supercurrent(psi, grad, av, p.kappa);
        let g = if with_src { sources.a_source(x, t_next) } else { [0.0, 0.0] };
        ([g[0] - j[0], g[1] - j[1]], sources.field(x, t_next))
    });
    for (r, m) in a.iter_mut().zip(m_n.matvec(a_n)) {
        *r += m / p.tau;
    }
    a
}

/// `(g, φ_k) − (iηκ Θ(ψⁿ) φⁿ, φ_k)` for any representation of `φⁿ`.
pub fn psi_rhs(
    sys: &FeSystem,
    rule: &QuadratureRule,
    psi_n: &[f64],
    phi_n: &ScalarSampler,
    sources: &dyn Sources,
    t_next: f64,
    p: Params,
) -> Vec<f64> {
    let with_src = !sources.source_free();
    let i_eta_kappa = Complex64::new(0.0, p.eta * p.kappa);
    load_order(sys, rule, |t, l| {
        let (psi, _) = sys.eval_p1(psi_n, t, l);
        let mut z = -i_eta_kappa * theta(psi) * phi_n(t, l);
        if with_src {
            z += sources.psi_source(sys.mesh.point(t, l), t_next);
        }
        z
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_domain, DomainSpec, Mesh};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> FeSystem {
        FeSystem::new(Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            1.0,
            0.5,
        ))
    }

    fn coarse() -> FeSystem {
        FeSystem::new(build_domain(&DomainSpec::l_shape_with_hole(0.25)).unwrap())
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn quad_form(m: &SparseMatrix, x: &[f64]) -> f64 {
        crate::sparse::dot(x, &m.matvec(x))
    }

    #[test]
    fn reference_p1_mass() {
        let s = assemble_static(&reference());
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let exact = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((s.m_s.get(i, j) - exact).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_kernels_and_symmetry() {
        let sys = coarse();
        let s = assemble_static(&sys);
        for m in [&s.k_s, &s.k_v] {
            let ones = vec![1.0; m.nrows];
            assert!(m.matvec(&ones).iter().all(|r| r.abs() < 1e-12));
        }
        for m in [&s.m_s, &s.k_s, &s.m_v, &s.k_v, &s.m_n, &s.k_curl] {
            assert!(m.max_asymmetry() <= 1e-12);
        }
        let chi = random_vec(sys.n_v(), 3);
        let gc = s.g.matvec(&chi);
        assert!(s.k_curl.matvec(&gc).iter().all(|r| r.abs() < 1e-11));
        assert!(s.c.matvec(&gc).iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn divergence_pairing_is_gradient_gram() {
        // B_div G = K_V and Gᵀ M_N G = K_V
        let sys = coarse();
        let s = assemble_static(&sys);
        let bg = s.b_div.matmul(&s.g);
        let d = bg.axpby(1.0, &s.k_v, -1.0);
        assert!(d.max_abs() < 1e-12);
        let gmg = s.g.transpose().matmul(&s.m_n).matmul(&s.g);
        assert!(gmg.axpby(1.0, &s.k_v, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn masses_are_positive() {
        let sys = coarse();
        let s = assemble_static(&sys);
        for (m, seed) in [(&s.m_s, 1), (&s.m_v, 2), (&s.m_n, 3)] {
            let x = random_vec(m.nrows, seed);
            assert!(quad_form(m, &x) > 0.0);
        }
        let area: f64 = {
            let ones = vec![1.0; sys.n_s()];
            quad_form(&s.m_s, &ones)
        };
        assert!((area - sys.mesh.domain_area).abs() < 1e-12);
    }

    #[test]
    fn covariant_with_zero_potential_is_scaled_laplacian() {
        let sys = coarse();
        let s = assemble_static(&sys);
        let kappa = 1.7;
        let cov = assemble_covariant(&sys, kappa, &|_, _| [0.0, 0.0]);
        let lap = complex_embed(&s.k_s, 1.0 / (kappa * kappa));
        assert!(cov.axpby(1.0, &lap, -1.0).max_abs() <= 1e-12);
    }

    #[test]
    fn covariant_constant_psi_gives_potential_norm() {
        let sys = coarse();
        let e = 11;
        let mut a = vec![0.0; sys.n_n()];
        a[e] = 1.0;
        let cov = assemble_covariant(&sys, 1.0, &|t, l| sys.eval_edge(&a, t, l));
        let ones: Vec<f64> = (0..sys.n_s()).flat_map(|_| [1.0, 0.0]).collect();
        let q = quad_form(&cov, &ones);
        // ∫|w_e|² over the (at most two) triangles containing e
        let rule = QuadratureRule::triangle(8);
        let (t0, t1) = sys.mesh.edge_tris[e];
        let mut exact = 0.0;
        for t in std::iter::once(t0).chain(t1) {
            for (l, w) in rule.barycentric().iter().zip(&rule.weights) {
                let v = sys.eval_edge(&a, t, l);
                exact += 2.0 * sys.mesh.area(t) * w * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        assert!((q - exact).abs() < 1e-13 * (1.0 + exact));
    }

    #[test]
    fn covariant_split_matches_termwise_integrals() {
        let sys = coarse();
        let kappa = 0.8;
        let a = random_vec(sys.n_n(), 5);
        let psi = random_vec(2 * sys.n_s(), 6);
        let cov = assemble_covariant(&sys, kappa, &|t, l| sys.eval_edge(&a, t, l));
        let cov0 = assemble_covariant(&sys, kappa, &|_, _| [0.0, 0.0]);
        let diff = cov.axpby(1.0, &cov0, -1.0).matvec(&psi);
        // independent term-by-term: (|A|²ψ, φ_k) + (i/κ)(A·∇ψ, φ_k) − (i/κ)(ψ, A·∇φ_k)
        let rule = QuadratureRule::triangle(8);
        let mut expect = vec![0.0; 2 * sys.n_s()];
        for t in 0..sys.mesh.n_triangles() {
            let g = sys.mesh.bary_gradients(t);
            let d = sys.p1_dofs(t);
            for (l, w) in rule.barycentric().iter().zip(&rule.weights) {
                let w = 2.0 * sys.mesh.area(t) * w;
                let av = sys.eval_edge(&a, t, l);
                let (z, dz) = sys.eval_p1(&psi, t, l);
                let i = Complex64::new(0.0, 1.0);
                let a2 = av[0] * av[0] + av[1] * av[1];
                let adz = dz[0] * av[0] + dz[1] * av[1];
                for k in 0..3 {
                    let adphi = av[0] * g[k][0] + av[1] * g[k][1];
                    let c = z * a2 * l[k] + i / kappa * adz * l[k] - i / kappa * z * adphi;
                    expect[2 * d[k]] += w * c.re;
                    expect[2 * d[k] + 1] += w * c.im;
                }
            }
        }
        for (x, y) in diff.iter().zip(&expect) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn cubic_jacobian_matches_finite_differences() {
        let sys = coarse();
        let psi = random_vec(2 * sys.n_s(), 9);
        let dir = random_vec(2 * sys.n_s(), 10);
        let (_, jac) = cubic_term(&sys, &psi, true);
        let jd = jac.unwrap().matvec(&dir);
        let h = 1e-6;
        let plus: Vec<f64> = psi.iter().zip(&dir).map(|(p, d)| p + h * d).collect();
        let minus: Vec<f64> = psi.iter().zip(&dir).map(|(p, d)| p - h * d).collect();
        let (rp, _) = cubic_term(&sys, &plus, false);
        let (rm, _) = cubic_term(&sys, &minus, false);
        for i in 0..jd.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            assert!((fd - jd[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        struct Zero;
        impl Sources for Zero {
            fn field(&self, _: [f64; 2], _: f64) -> f64 {
                0.0
            }
        }
        let sys = coarse();
        let s = assemble_static(&sys);
        let p = Params { eta: 1.0, kappa: 1.0, tau: 0.1 };
        let r = assemble_step_rhs(
            &sys,
            &s.m_n,
            &vec![0.0; 2 * sys.n_s()],
            &vec![0.0; sys.n_v()],
            &vec![0.0; sys.n_n()],
            &Zero,
            0.1,
            p,
        );
        assert!(r.a.iter().chain(&r.psi).all(|&v| v == 0.0));
        // ψ ≡ 1, A = 0: the supercurrent term vanishes, only τ⁻¹M_N Aⁿ = 0 remains
        let ones: Vec<f64> = (0..sys.n_s()).flat_map(|_| [1.0, 0.0]).collect();
        let r = assemble_step_rhs(&sys, &s.m_n, &ones, &vec![0.0; sys.n_v()], &vec![0.0; sys.n_n()], &Zero, 0.1, p);
        assert!(r.a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn assembly_is_deterministic_across_modes() {
        let sys = coarse();
        let par = sys.clone().with_exec(ExecMode::Parallel);
        let a = assemble_static(&sys);
        let b = assemble_static(&sys);
        let c = assemble_static(&par);
        for (x, y) in [(&a.m_n, &b.m_n), (&a.m_n, &c.m_n), (&a.b_div, &c.b_div), (&a.k_v, &c.k_v)] {
            assert_eq!(x.values, y.values);
            assert_eq!(x.col_idx, y.col_idx);
        }
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(Complex64::new(0.3, -0.4)), Complex64::new(0.3, -0.4));
        let z = theta(Complex64::new(3.0, 4.0));
        assert!((z - Complex64::new(0.6, 0.8)).norm() < 1e-16);
    }

    proptest! {
        #[test]
        fn theta_is_bounded(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = Complex64::new(re, im);
            let t = theta(z);
            prop_assert!(t.norm() <= 1.0 + 1e-15);
            if z.norm() <= 1.0 {
                prop_assert_eq!(t, z);
            }
        }

        #[test]
        fn covariant_form_is_real_and_nonnegative(seed in 0u64..200) {
            let sys = FeSystem::new(build_domain(&DomainSpec::square(0.5)).unwrap());
            let a = random_vec(sys.n_n(), seed);
            let psi = random_vec(2 * sys.n_s(), seed + 1000);
            let cov = assemble_covariant(&sys, 1.3, &|t, l| sys.eval_edge(&a, t, l));
            prop_assert!(cov.max_asymmetry() < 1e-12);
            prop_assert!(quad_form(&cov, &psi) >= -1e-12);
        }
    }
}
