//! Conforming triangulations of the test domains.
//!
//! Every domain lives in `(-1, 1)²`. The L-shapes remove the closed quadrant
//! `[0, 1) × (-1, 0]`, so the reentrant corner sits at the origin with
//! interior angle `3π/2` and its two faces lie on the positive `x₁` axis and
//! the negative `x₂` axis. The holed variant additionally removes an open
//! axis-aligned rectangle.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    /// Euclidean distance from the origin to the closed rectangle.
    fn distance_to_origin(&self) -> f64 {
        let dx = if self.x0 > 0.0 {
            self.x0
        } else if self.x1 < 0.0 {
            -self.x1
        } else {
            0.0
        };
        let dy = if self.y0 > 0.0 {
            self.y0
        } else if self.y1 < 0.0 {
            -self.y1
        } else {
            0.0
        };
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LShapeWithHole,
    LShape,
    Square,
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::LShapeWithHole => "l_shape_with_hole",
            DomainKind::LShape => "l_shape",
            DomainKind::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l_shape_with_hole" => Some(Self::LShapeWithHole),
            "l_shape" => Some(Self::LShape),
            "square" => Some(Self::Square),
            _ => None,
        }
    }

    pub fn is_l_shape(&self) -> bool {
        !matches!(self, DomainKind::Square)
    }
}

/// Radius of the disk around the reentrant corner that must stay free of holes.
pub const CORNER_CLEARANCE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub hole: Option<Rect>,
    pub target_h: f64,
}

impl DomainSpec {
    pub fn default_hole() -> Rect {
        Rect::new(-0.75, -0.45, -0.75, -0.45)
    }

    pub fn l_shape_with_hole(target_h: f64) -> Self {
        Self {
            kind: DomainKind::LShapeWithHole,
            hole: Some(Self::default_hole()),
            target_h,
        }
    }

    pub fn l_shape(target_h: f64) -> Self {
        Self {
            kind: DomainKind::LShape,
            hole: None,
            target_h,
        }
    }

    pub fn square(target_h: f64) -> Self {
        Self {
            kind: DomainKind::Square,
            hole: None,
            target_h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_h > 0.0 && self.target_h.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "target h must be positive, got {}",
                self.target_h
            )));
        }
        match (self.kind, self.hole) {
            (DomainKind::LShapeWithHole, None) => Err(Error::InvalidDomain(
                "l_shape_with_hole needs a hole rectangle".into(),
            )),
            (DomainKind::LShapeWithHole, Some(r)) => {
                if !(r.x0 < r.x1 && r.y0 < r.y1) {
                    return Err(Error::InvalidDomain(format!("degenerate hole {r:?}")));
                }
                if !(r.x0 > -1.0 && r.x1 < 1.0 && r.y0 > -1.0 && r.y1 < 1.0) {
                    return Err(Error::InvalidDomain(format!(
                        "hole {r:?} is not strictly inside (-1, 1)^2"
                    )));
                }
                if !(r.x1 < 0.0 || r.y0 > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "hole {r:?} overlaps the removed quadrant"
                    )));
                }
                if r.distance_to_origin() <= CORNER_CLEARANCE {
                    return Err(Error::InvalidDomain(format!(
                        "hole {r:?} intersects the disk r <= {CORNER_CLEARANCE} around the corner"
                    )));
                }
                Ok(())
            }
            (_, Some(_)) => Err(Error::InvalidDomain(format!(
                "domain {} does not take a hole",
                self.kind.name()
            ))),
            (_, None) => Ok(()),
        }
    }

    /// Analytic area of the domain.
    pub fn area(&self) -> f64 {
        let base = if self.kind.is_l_shape() { 3.0 } else { 4.0 };
        base - self.hole.map_or(0.0, |r| r.area())
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        if p[0] <= -1.0 || p[0] >= 1.0 || p[1] <= -1.0 || p[1] >= 1.0 {
            return false;
        }
        if self.kind.is_l_shape() && p[0] >= 0.0 && p[1] <= 0.0 {
            return false;
        }
        !self.hole.is_some_and(|r| r.contains(p))
    }
}

/// Triangulation with globally oriented edges.
///
/// Local edge `k` of a triangle is opposite its local vertex `k`, i.e. it
/// joins local vertices `k+1` and `k+2` (mod 3), traversed counter-clockwise.
/// Global edges run from the lower to the higher vertex index.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub tri_edges: Vec<[usize; 3]>,
    /// `+1` when the counter-clockwise traversal agrees with the global edge orientation.
    pub tri_edge_signs: Vec<[f64; 3]>,
    pub edge_tris: Vec<(usize, Option<usize>)>,
    pub boundary_edge: Vec<bool>,
    /// Loop label per edge; loop 0 is the outer boundary.
    pub boundary_loop: Vec<Option<usize>>,
    pub n_loops: usize,
    /// Reported mesh size: largest node spacing on the longest straight boundary segment.
    pub h: f64,
    pub domain_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub h: f64,
    pub max_edge: f64,
    pub min_edge: f64,
    pub quality_ratio: f64,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
    pub n_boundary_loops: usize,
    pub betti: usize,
    pub euler: i64,
}

pub fn build_domain(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    let mut breaks = vec![-1.0, 1.0];
    if spec.kind.is_l_shape() {
        breaks.push(0.0);
    }
    let mut xb = breaks.clone();
    let mut yb = breaks;
    if let Some(r) = spec.hole {
        xb.extend([r.x0, r.x1]);
        yb.extend([r.y0, r.y1]);
    }
    let xs = graded_axis(&mut xb, spec.target_h);
    let ys = graded_axis(&mut yb, spec.target_h);
    let (nx, ny) = (xs.len(), ys.len());

    let mut node_id = vec![usize::MAX; nx * ny];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            if spec.contains(c) {
                cells.push((i, j));
            }
        }
    }
    let mut used = vec![false; nx * ny];
    for &(i, j) in &cells {
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            used[(j + dj) * nx + i + di] = true;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            if used[j * nx + i] {
                node_id[j * nx + i] = vertices.len();
                vertices.push([xs[i], ys[j]]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * cells.len());
    for &(i, j) in &cells {
        let p00 = node_id[j * nx + i];
        let p10 = node_id[j * nx + i + 1];
        let p01 = node_id[(j + 1) * nx + i];
        let p11 = node_id[(j + 1) * nx + i + 1];
        triangles.push([p00, p10, p11]);
        triangles.push([p00, p11, p01]);
    }
    let mesh = Mesh::from_triangles(vertices, triangles, 0.0, spec.area());
    let h = mesh.longest_segment_spacing();
    Ok(Mesh { h, ..mesh })
}

/// Splits each interval between sorted breakpoints into equal cells no
/// longer than `h`.
fn graded_axis(breaks: &mut Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut xs = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..n {
            xs.push(w[0] + len * k as f64 / n as f64);
        }
        xs.push(w[1]);
    }
    xs
}

/// Each triangle split into four congruent children through edge midpoints.
/// Midpoint of edge `e` gets vertex index `V + e`.
pub fn uniform_refine(mesh: &Mesh) -> Mesh {
    let nv = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }));
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let m = mesh.tri_edges[t].map(|e| nv + e);
        // m[k] is the midpoint of the edge opposite local vertex k
        triangles.push([tri[0], m[2], m[1]]);
        triangles.push([m[2], tri[1], m[0]]);
        triangles.push([m[1], m[0], tri[2]]);
        triangles.push([m[0], m[1], m[2]]);
    }
    Mesh::from_triangles(vertices, triangles, 0.5 * mesh.h, mesh.domain_area)
}

impl Mesh {
    /// Derives edges, incidences and boundary loops from a triangle list.
    /// Triangles are reoriented counter-clockwise if needed.
    pub fn from_triangles(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        h: f64,
        domain_area: f64,
    ) -> Mesh {
        for tri in triangles.iter_mut() {
            if signed_area(&vertices, *tri) < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut half: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                half.push(([a.min(b), a.max(b)], t, k));
            }
        }
        half.sort();
        let mut edges = Vec::new();
        let mut edge_tris = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        let mut tri_edge_signs = vec![[0.0f64; 3]; triangles.len()];
        let mut i = 0;
        while i < half.len() {
            let key = half[i].0;
            let e = edges.len();
            edges.push(key);
            let mut tris = (half[i].1, None);
            let mut j = i;
            while j < half.len() && half[j].0 == key {
                let (_, t, k) = half[j];
                tri_edges[t][k] = e;
                let a = triangles[t][(k + 1) % 3];
                tri_edge_signs[t][k] = if a == key[0] { 1.0 } else { -1.0 };
                if j > i {
                    assert!(j == i + 1, "edge {key:?} shared by more than two triangles");
                    tris.1 = Some(t);
                }
                j += 1;
            }
            edge_tris.push(tris);
            i = j;
        }
        let boundary_edge: Vec<bool> = edge_tris.iter().map(|(_, o)| o.is_none()).collect();
        let (boundary_loop, n_loops) = label_loops(&vertices, &edges, &boundary_edge);
        Mesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            tri_edge_signs,
            edge_tris,
            boundary_edge,
            boundary_loop,
            n_loops,
            h,
            domain_area,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    /// Unit tangent along the global orientation.
    pub fn edge_tangent(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let l = self.edge_length(e);
        [(pb[0] - pa[0]) / l, (pb[1] - pa[1]) / l]
    }

    /// Constant gradients of the barycentric coordinates on triangle `t`.
    pub fn bary_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ]
    }

    /// Physical point of barycentric coordinates `l` in triangle `t`.
    pub fn point(&self, t: usize, l: &[f64; 3]) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    /// Finds a triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        for t in 0..self.n_triangles() {
            let [a, _, _] = self.triangles[t].map(|v| self.vertices[v]);
            let g = self.bary_gradients(t);
            let l1 = g[1][0] * (p[0] - a[0]) + g[1][1] * (p[1] - a[1]);
            let l2 = g[2][0] * (p[0] - a[0]) + g[2][1] * (p[1] - a[1]);
            let l0 = 1.0 - l1 - l2;
            if l0 >= -TOL && l1 >= -TOL && l2 >= -TOL {
                return Ok((t, [l0, l1, l2]));
            }
        }
        Err(Error::PointNotFound(p[0], p[1]))
    }

    pub fn boundary_loop_count(&self) -> usize {
        self.n_loops
    }

    pub fn betti(&self) -> usize {
        self.n_loops.saturating_sub(1)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Ordered closed walk (edge indices) around boundary loop `label`.
    pub fn boundary_cycle(&self, label: usize) -> Vec<usize> {
        let edges: Vec<usize> = (0..self.n_edges())
            .filter(|&e| self.boundary_loop[e] == Some(label))
            .collect();
        let mut by_vertex: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &e in &edges {
            for v in self.edges[e] {
                by_vertex.entry(v).or_default().push(e);
            }
        }
        let mut cycle = Vec::with_capacity(edges.len());
        let Some(&start) = edges.first() else {
            return cycle;
        };
        let mut cur = start;
        let mut v = self.edges[start][1];
        loop {
            cycle.push(cur);
            let next = by_vertex[&v].iter().copied().find(|&e| e != cur);
            let Some(next) = next else { break };
            if next == start {
                break;
            }
            let [a, b] = self.edges[next];
            v = if a == v { b } else { a };
            cur = next;
        }
        cycle
    }

    fn longest_segment_spacing(&self) -> f64 {
        // group boundary edges by supporting line, then by connected run
        let mut lines: BTreeMap<(u8, i64), Vec<usize>> = BTreeMap::new();
        for e in (0..self.n_edges()).filter(|&e| self.boundary_edge[e]) {
            let [a, b] = self.edges[e].map(|v| self.vertices[v]);
            let key = if (a[1] - b[1]).abs() < 1e-14 {
                (0, (a[1] * 1e9).round() as i64)
            } else if (a[0] - b[0]).abs() < 1e-14 {
                (1, (a[0] * 1e9).round() as i64)
            } else {
                (2, e as i64)
            };
            lines.entry(key).or_default().push(e);
        }
        let mut best = (0.0f64, 0.0f64);
        for ((axis, _), es) in lines {
            let coord = |v: usize| -> f64 {
                let p = self.vertices[v];
                if axis == 0 {
                    p[0]
                } else {
                    p[1]
                }
            };
            let mut spans: Vec<(f64, f64)> = es
                .iter()
                .map(|&e| {
                    let [a, b] = self.edges[e];
                    let (ca, cb) = (coord(a), coord(b));
                    (ca.min(cb), ca.max(cb))
                })
                .collect();
            spans.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut run_start = spans[0].0;
            let mut run_end = spans[0].1;
            let mut run_max = spans[0].1 - spans[0].0;
            let flush = |s: f64, e: f64, m: f64, best: &mut (f64, f64)| {
                let len = e - s;
                if len > best.0 + 1e-12 || ((len - best.0).abs() <= 1e-12 && m > best.1) {
                    *best = (len, m);
                }
            };
            for &(s, e) in &spans[1..] {
                if (s - run_end).abs() < 1e-12 {
                    run_end = e;
                    run_max = run_max.max(e - s);
                } else {
                    flush(run_start, run_end, run_max, &mut best);
                    run_start = s;
                    run_end = e;
                    run_max = e - s;
                }
            }
            flush(run_start, run_end, run_max, &mut best);
        }
        best.1
    }

    pub fn stats(&self) -> MeshStats {
        let (mut max_edge, mut min_edge) = (0.0f64, f64::INFINITY);
        for e in 0..self.n_edges() {
            let l = self.edge_length(e);
            max_edge = max_edge.max(l);
            min_edge = min_edge.min(l);
        }
        MeshStats {
            h: self.h,
            max_edge,
            min_edge,
            quality_ratio: max_edge / min_edge,
            n_vertices: self.n_vertices(),
            n_edges: self.n_edges(),
            n_triangles: self.n_triangles(),
            n_boundary_loops: self.n_loops,
            betti: self.betti(),
            euler: self.euler_characteristic(),
        }
    }

    /// Checks the structural invariants; returns a description of the first failure.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(format!("triangle {t} is not counter-clockwise"));
            }
        }
        for (e, &(_, other)) in self.edge_tris.iter().enumerate() {
            if other.is_none() != self.boundary_edge[e] {
                return Err(format!("edge {e} boundary flag mismatch"));
            }
        }
        let holes = self.n_loops as i64 - 1;
        if self.euler_characteristic() != 1 - holes {
            return Err(format!(
                "euler characteristic {} but {} holes",
                self.euler_characteristic(),
                holes
            ));
        }
        let stats = self.stats();
        if stats.quality_ratio > 10.0 {
            return Err(format!("quality ratio {} > 10", stats.quality_ratio));
        }
        let rel = (self.total_area() - self.domain_area).abs() / self.domain_area;
        if rel > 1e-12 {
            return Err(format!("area mismatch, relative {rel:e}"));
        }
        Ok(())
    }
}

pub fn mesh_stats(mesh: &Mesh) -> MeshStats {
    mesh.stats()
}

fn signed_area(vertices: &[[f64; 2]], tri: [usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the boundary edge graph. The loop touching the
/// lexicographically smallest boundary vertex is the outer one (label 0).
fn label_loops(
    vertices: &[[f64; 2]],
    edges: &[[usize; 2]],
    boundary: &[bool],
) -> (Vec<Option<usize>>, usize) {
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    for (e, &[a, b]) in edges.iter().enumerate() {
        if boundary[e] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut outer_vertex: Option<usize> = None;
    for (e, &[a, _]) in edges.iter().enumerate() {
        if boundary[e] {
            let better = match outer_vertex {
                None => true,
                Some(o) => {
                    let (p, q) = (vertices[a], vertices[o]);
                    (p[0], p[1]) < (q[0], q[1])
                }
            };
            if better {
                outer_vertex = Some(a);
            }
        }
    }
    let mut labels: BTreeMap<usize, usize> = BTreeMap::new();
    if let Some(o) = outer_vertex {
        let r = find(&mut parent, o);
        labels.insert(r, 0);
    }
    let mut out = vec![None; edges.len()];
    for (e, &[a, _]) in edges.iter().enumerate() {
        if boundary[e] {
            let r = find(&mut parent, a);
            let next = labels.len();
            let l = *labels.entry(r).or_insert(next);
            out[e] = Some(l);
        }
    }
    (out, labels.len())
}
