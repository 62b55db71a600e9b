//! Discrete divergence, discrete harmonic fields and the discrete Hodge
//! decomposition of `N_h`.

use std::collections::VecDeque;

use crate::fe::FeSystem;
use crate::forms::{load_edge, map_elements, StaticMatrices};
use crate::quadrature::QuadratureRule;
use crate::sparse::{dense_rank, dot, LuSolver, SparseMatrix, TripletList};
use crate::{Error, Result};

/// Orthonormal basis of `{w ∈ N_h : ∇×w = 0, (w, ∇χ) = 0 ∀χ ∈ V_h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    pub fields: Vec<Vec<f64>>,
    /// `(w_i, w_j)`, the identity up to roundoff.
    pub gram: Vec<Vec<f64>>,
}

impl HarmonicBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// `a = c + Gθ + Σ α_j w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    pub gradient: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Factorizations shared by the operations of this module.
pub struct Hodge<'a> {
    pub mats: &'a StaticMatrices,
    m_v: LuSolver,
    /// Neumann stiffness with dof 0 pinned.
    k_v: LuSolver,
}

fn pinned(k: &SparseMatrix, pin: usize) -> SparseMatrix {
    let mut t = TripletList::with_capacity(k.nrows, k.ncols, k.nnz());
    for i in 0..k.nrows {
        for (j, v) in k.row(i) {
            if i == pin || j == pin {
                if i == j {
                    t.push(i, j, 1.0);
                }
            } else {
                t.push(i, j, v);
            }
        }
    }
    t.into_matrix()
}

impl<'a> Hodge<'a> {
    pub fn new(mats: &'a StaticMatrices) -> Result<Self> {
        Ok(Self {
            mats,
            m_v: LuSolver::new(mats.m_v.clone())?,
            k_v: LuSolver::new(pinned(&mats.k_v, 0))?,
        })
    }

    /// `ζ = −M_V⁻¹ B_div a`, i.e. `(ζ, χ) = −(a, ∇χ)` for all `χ ∈ V_h`.
    pub fn divergence(&self, a: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.mats.b_div.matvec(a);
        rhs.iter_mut().for_each(|v| *v = -*v);
        self.m_v.solve_checked(&rhs, 1e-12)
    }

    /// Potential `θ` (with `θ₀ = 0`) of the `L²` projection of `a` onto `∇V_h`.
    pub fn gradient_potential(&self, a: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.mats.b_div.matvec(a);
        rhs[0] = 0.0;
        self.k_v.solve_checked(&rhs, 1e-12)
    }

    fn l2(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mats.m_n.matvec(b))
    }

    pub fn harmonic_basis(&self, sys: &FeSystem) -> Result<HarmonicBasis> {
        let betti = sys.mesh.betti();
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(betti);
        for hole in 1..sys.mesh.n_loops {
            let Some(v) = cut_cocycle(sys, hole) else {
                return Err(Error::HarmonicDimension { found: fields.len(), expected: betti });
            };
            let theta = self.gradient_potential(&v)?;
            let gt = self.mats.g.matvec(&theta);
            let mut w: Vec<f64> = v.iter().zip(&gt).map(|(a, b)| a - b).collect();
            for f in &fields {
                let p = self.l2(&w, f);
                w.iter_mut().zip(f).for_each(|(x, y)| *x -= p * y);
            }
            let n = self.l2(&w, &w).sqrt();
            if n <= 1e-12 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= n);
            fields.push(w);
        }
        if fields.len() != betti {
            return Err(Error::HarmonicDimension { found: fields.len(), expected: betti });
        }
        let gram = fields
            .iter()
            .map(|a| fields.iter().map(|b| self.l2(a, b)).collect())
            .collect();
        Ok(HarmonicBasis { fields, gram })
    }

    pub fn decompose(&self, a: &[f64], basis: &HarmonicBasis) -> Result<Decomposition> {
        let theta = self.gradient_potential(a)?;
        let gradient = self.mats.g.matvec(&theta);
        let alpha: Vec<f64> = basis
            .fields
            .iter()
            .map(|w| self.l2(a, w) / self.l2(w, w))
            .collect();
        let mut harmonic = vec![0.0; a.len()];
        for (w, al) in basis.fields.iter().zip(&alpha) {
            harmonic.iter_mut().zip(w).for_each(|(h, x)| *h += al * x);
        }
        let c = (0..a.len()).map(|i| a[i] - gradient[i] - harmonic[i]).collect();
        Ok(Decomposition { c, theta, gradient, harmonic, alpha })
    }
}

/// `L²` projection of a vector field onto `N_h`. Unlike the edge
/// interpolant it satisfies `∇_h·P_h a = Q_h ∇·a` for fields with `a·n = 0`.
pub fn project_edge(
    sys: &FeSystem,
    mats: &StaticMatrices,
    f: impl Fn([f64; 2]) -> [f64; 2] + Sync + Send,
) -> Result<Vec<f64>> {
    let rule = QuadratureRule::accurate();
    let rhs = load_edge(sys, &rule, |t, l| (f(sys.mesh.point(t, l)), 0.0));
    LuSolver::new(mats.m_n.clone())?.solve_checked(&rhs, 1e-12)
}

pub fn discrete_divergence(mats: &StaticMatrices, a: &[f64]) -> Result<Vec<f64>> {
    Hodge::new(mats)?.divergence(a)
}

pub fn harmonic_basis(sys: &FeSystem, mats: &StaticMatrices) -> Result<HarmonicBasis> {
    Hodge::new(mats)?.harmonic_basis(sys)
}

pub fn hodge_decompose(mats: &StaticMatrices, a: &[f64], basis: &HarmonicBasis) -> Result<Decomposition> {
    Hodge::new(mats)?.decompose(a, basis)
}

/// Closed, non-exact Whitney cochain dual to a path of triangles from boundary
/// loop `hole` to the outer boundary: each crossed edge carries the
/// orientation sign of the triangle the path leaves, so the elementwise
/// curl vanishes and the circulation around the hole is one.
fn cut_cocycle(sys: &FeSystem, hole: usize) -> Option<Vec<f64>> {
    let mesh = &sys.mesh;
    let nt = mesh.n_triangles();
    let boundary_of = |t: usize, label: usize| {
        (0..3).find(|&k| mesh.boundary_loop[mesh.tri_edges[t][k]] == Some(label))
    };
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nt];
    let mut seen = vec![false; nt];
    let mut queue = VecDeque::new();
    for t in 0..nt {
        if boundary_of(t, hole).is_some() {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    let mut end = None;
    while let Some(t) = queue.pop_front() {
        if boundary_of(t, 0).is_some() {
            end = Some(t);
            break;
        }
        for k in 0..3 {
            let e = mesh.tri_edges[t][k];
            let (a, b) = mesh.edge_tris[e];
            let Some(b) = b else { continue };
            let other = if a == t { b } else { a };
            if !seen[other] {
                seen[other] = true;
                prev[other] = Some((t, k));
                queue.push_back(other);
            }
        }
    }
    let end = end?;
    let mut v = vec![0.0; sys.n_n()];
    let k_out = boundary_of(end, 0)?;
    v[mesh.tri_edges[end][k_out]] += mesh.tri_edge_signs[end][k_out];
    let mut t = end;
    while let Some((from, k)) = prev[t] {
        v[mesh.tri_edges[from][k]] += mesh.tri_edge_signs[from][k];
        t = from;
    }
    let k_in = boundary_of(t, hole)?;
    v[mesh.tri_edges[t][k_in]] -= mesh.tri_edge_signs[t][k_in];
    Some(v)
}

/// `‖a‖_{L^q}` of an edge field by degree-8 quadrature.
pub fn lq_norm(sys: &FeSystem, a: &[f64], q: f64) -> f64 {
    let rule = QuadratureRule::accurate();
    let bary = rule.barycentric();
    let parts = map_elements(sys.exec, sys.mesh.n_triangles(), |t| {
        let area = sys.mesh.area(t);
        bary.iter()
            .zip(&rule.weights)
            .map(|(l, w)| {
                let v = sys.eval_edge(a, t, l);
                2.0 * area * w * v[0].hypot(v[1]).powf(q)
            })
            .sum::<f64>()
    });
    parts.iter().sum::<f64>().powf(1.0 / q)
}

/// `‖a‖_{L^q} / (‖a‖ + ‖∇×a‖ + ‖∇_h·a‖)`.
pub fn embedding_ratio(sys: &FeSystem, hodge: &Hodge, a: &[f64], q: f64) -> Result<f64> {
    let m = hodge.mats;
    // quadratic forms of (numerically) null fields can round below zero
    let norm = |m: &SparseMatrix, v: &[f64]| dot(v, &m.matvec(v)).max(0.0).sqrt();
    let l2 = norm(&m.m_n, a);
    let curl = norm(&m.k_curl, a);
    let zeta = hodge.divergence(a)?;
    let div = norm(&m.m_v, &zeta);
    let denom = l2 + curl + div;
    if denom <= 0.0 {
        return Err(Error::InvalidConfig("embedding ratio of the zero field".into()));
    }
    Ok(lq_norm(sys, a, q) / denom)
}

/// Row of the embedding table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingRow {
    pub h: f64,
    pub max_ratio: f64,
}

/// Largest ratio over the fields produced by `sampler` on each level.
pub fn embedding_diagnostic(
    levels: &[(&FeSystem, &StaticMatrices)],
    q: f64,
    sampler: &dyn Fn(&FeSystem, &Hodge) -> Result<Vec<Vec<f64>>>,
) -> Result<Vec<EmbeddingRow>> {
    levels
        .iter()
        .map(|(sys, mats)| {
            let hodge = Hodge::new(mats)?;
            let mut max_ratio = 0.0f64;
            for a in sampler(sys, &hodge)? {
                max_ratio = max_ratio.max(embedding_ratio(sys, &hodge, &a, q)?);
            }
            Ok(EmbeddingRow { h: sys.mesh.h, max_ratio })
        })
        .collect()
}

pub fn embedding_csv(rows: &[EmbeddingRow]) -> String {
    let mut s = String::from("h,max_ratio\n");
    for r in rows {
        s.push_str(&format!("{:.10e},{:.10e}\n", r.h, r.max_ratio));
    }
    s
}

/// Dense ranks `(rank C, rank G, nullity of [C; B_div])`; only for meshes
/// with fewer than 5000 edges.
pub fn complex_ranks(sys: &FeSystem, mats: &StaticMatrices) -> Option<(usize, usize, usize)> {
    if sys.mesh.n_edges() >= 5000 {
        return None;
    }
    let tol = 1e-10;
    let rc = dense_rank(&mats.c.to_dense(), tol);
    let rg = dense_rank(&mats.g.to_dense(), tol);
    let mut stacked = mats.c.to_dense();
    // scale rows so both blocks are O(1)
    let h2 = sys.mesh.h * sys.mesh.h;
    stacked.extend(mats.b_div.to_dense().into_iter().map(|r| r.into_iter().map(|v| v / h2).collect()));
    let rs = dense_rank(&stacked, tol);
    Some((rc, rg, sys.n_n() - rs))
}
