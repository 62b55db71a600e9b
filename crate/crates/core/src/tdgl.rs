//! Decoupled backward-Euler time stepping.
//!
//! Each step first solves the linear problem for the potentials `(φ, A)`
//! using only level-`n` data, then the nonlinear order-parameter equation
//! with `A^{n+1}` and `φⁿ` by Newton's method.
//!
//! The potential discretization is abstracted by [`MagneticScheme`] so the
//! mixed method and the nodal Galerkin comparator share the order-parameter
//! solver, the energy and the time loop.

use std::cell::OnceCell;

use faer::sparse::linalg::solvers::SymbolicLu;
use num_complex::Complex64;

use crate::fe::{FeSystem, State};
use crate::forms::{
    assemble_covariant, complex_embed, cubic_term, edge_rhs, map_elements, psi_rhs, supercurrent, theta,
    ExecMode, Params, ScalarSampler, Sources, StaticMatrices, VectorSampler,
};
use crate::quadrature::QuadratureRule;
use crate::sparse::{norm2, LuSolver, SparseMatrix, TripletList};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eta: f64,
    pub kappa: f64,
    pub tau: f64,
    pub final_time: f64,
    /// Residual 2-norm at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub exec: ExecMode,
    /// Assert the discrete energy inequality during source-free runs.
    pub check_energy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            kappa: 1.0,
            tau: 0.01,
            final_time: 1.0,
            newton_tol: 1e-11,
            newton_max_iter: 20,
            exec: ExecMode::Sequential,
            check_energy: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.eta > 0.0 && self.kappa > 0.0) {
            return bad("eta and kappa must be positive");
        }
        if !(self.tau > 0.0) || !(self.final_time > 0.0) {
            return bad("tau and final_time must be positive");
        }
        if self.tau >= self.eta {
            return bad(&format!("tau = {} must be smaller than eta = {}", self.tau, self.eta));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol <= 1e-6) {
            return bad("newton_tol must lie in (0, 1e-6]");
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be positive");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.final_time / self.tau).round() as usize
    }

    pub fn params(&self) -> Params {
        Params {
            eta: self.eta,
            kappa: self.kappa,
            tau: self.tau,
        }
    }
}

/// Discretization of the potential equations.
pub trait MagneticScheme: Sync {
    fn name(&self) -> &'static str;
    fn sys(&self) -> &FeSystem;
    /// Discrete `(φ⁰, A⁰)` from the initial potential and its divergence.
    fn initial(&self, a0: &dyn Fn([f64; 2]) -> [f64; 2], div_a0: &dyn Fn([f64; 2]) -> f64) -> (Vec<f64>, Vec<f64>);
    fn vector_at(&self, a: &[f64], t: usize, l: &[f64; 3]) -> [f64; 2];
    /// Elementwise (constant) curl.
    fn curl_at(&self, a: &[f64], t: usize) -> f64;
    fn phi_at(&self, phi: &[f64], t: usize, l: &[f64; 3]) -> f64;
    /// `(φ^{n+1}, A^{n+1})` from `(ψⁿ, Aⁿ)`.
    fn step(&self, psi_n: &[f64], a_n: &[f64], sources: &dyn Sources, t_next: f64) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// The mixed method: `φ ∈ V_h` (P2), `A ∈ N_h` (edge elements).
pub struct MixedScheme<'a> {
    sys: &'a FeSystem,
    m_n: SparseMatrix,
    lu: LuSolver,
    params: Params,
}

impl<'a> MixedScheme<'a> {
    /// Factorizes
    /// `[[M_V, −B], [Bᵀ, τ⁻¹M_N + K_curl]]`, which is constant in time.
    pub fn new(sys: &'a FeSystem, mats: &StaticMatrices, params: Params) -> Result<Self> {
        let lu = LuSolver::new(mixed_matrix(mats, params.tau))?;
        Ok(Self {
            sys,
            m_n: mats.m_n.clone(),
            lu,
            params,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.lu.matrix()
    }
}

pub fn mixed_matrix(mats: &StaticMatrices, tau: f64) -> SparseMatrix {
    let nv = mats.m_v.nrows;
    let nn = mats.m_n.nrows;
    let bt = mats.b_div.transpose();
    let mut t = TripletList::with_capacity(nv + nn, nv + nn, 0);
    t.add_block(&mats.m_v, 0, 0, 1.0);
    t.add_block(&mats.b_div, 0, nv, -1.0);
    t.add_block(&bt, nv, 0, 1.0);
    t.add_block(&mats.m_n, nv, nv, 1.0 / tau);
    t.add_block(&mats.k_curl, nv, nv, 1.0);
    t.into_matrix()
}

impl MagneticScheme for MixedScheme<'_> {
    fn name(&self) -> &'static str {
        "mixed"
    }

    fn sys(&self) -> &FeSystem {
        self.sys
    }

    fn initial(&self, a0: &dyn Fn([f64; 2]) -> [f64; 2], div_a0: &dyn Fn([f64; 2]) -> f64) -> (Vec<f64>, Vec<f64>) {
        let phi = self.sys.interpolate_potential(|x| -div_a0(x));
        (phi, self.sys.interpolate_edge(a0))
    }

    fn vector_at(&self, a: &[f64], t: usize, l: &[f64; 3]) -> [f64; 2] {
        self.sys.eval_edge(a, t, l)
    }

    fn curl_at(&self, a: &[f64], t: usize) -> f64 {
        self.sys.curl_edge(a, t)
    }

    fn phi_at(&self, phi: &[f64], t: usize, l: &[f64; 3]) -> f64 {
        self.sys.eval_p2(phi, t, l).0
    }

    fn step(&self, psi_n: &[f64], a_n: &[f64], sources: &dyn Sources, t_next: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let nv = self.sys.n_v();
        let rhs_a = edge_rhs(self.sys, &self.m_n, psi_n, a_n, sources, t_next, self.params);
        let mut rhs = vec![0.0; nv];
        rhs.extend(rhs_a);
        let mut x = self.lu.solve(&rhs)?;
        let a = x.split_off(nv);
        Ok((x, a))
    }
}

/// Newton solver for the order-parameter equation of one step.
pub struct PsiSolver<'a> {
    sys: &'a FeSystem,
    /// `M_S ⊗ I₂`.
    mass: SparseMatrix,
    cfg: SolverConfig,
    symbolic: OnceCell<SymbolicLu<usize>>,
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> PsiSolver<'a> {
    pub fn new(sys: &'a FeSystem, mats: &StaticMatrices, cfg: SolverConfig) -> Self {
        Self {
            sys,
            mass: complex_embed(&mats.m_s, 1.0),
            cfg,
            symbolic: OnceCell::new(),
        }
    }

    /// Linear part `L = (η/τ − 1)M + S(A)` and constant part `b` of
    /// `L ψ + N(ψ) = b`.
    pub fn system(
        &self,
        psi_n: &[f64],
        phi_n: &ScalarSampler,
        a_next: &VectorSampler,
        sources: &dyn Sources,
        t_next: f64,
    ) -> (SparseMatrix, Vec<f64>) {
        let c = &self.cfg;
        let ratio = c.eta / c.tau;
        let cov = assemble_covariant(self.sys, c.kappa, a_next);
        let l = cov.axpby(1.0, &self.mass, ratio - 1.0);
        let mut b = psi_rhs(self.sys, &QuadratureRule::accurate(), psi_n, phi_n, sources, t_next, c.params());
        for (bi, mi) in b.iter_mut().zip(self.mass.matvec(psi_n)) {
            *bi += ratio * mi;
        }
        (l, b)
    }

    pub fn residual(&self, l: &SparseMatrix, b: &[f64], psi: &[f64]) -> Vec<f64> {
        let (n, _) = cubic_term(self.sys, psi, false);
        let lp = l.matvec(psi);
        (0..b.len()).map(|i| lp[i] + n[i] - b[i]).collect()
    }

    /// Damped Newton from `guess`; halves the step up to six times while
    /// the residual grows.
    pub fn newton(&self, l: &SparseMatrix, b: &[f64], guess: &[f64], step: usize) -> Result<NewtonReport> {
        let mut x = guess.to_vec();
        let mut r = self.residual(l, b, &x);
        let mut rn = norm2(&r);
        let mut it = 0;
        while rn > self.cfg.newton_tol {
            if it == self.cfg.newton_max_iter {
                return Err(Error::NewtonDiverged { step, iterations: it, residual: rn });
            }
            it += 1;
            let (_, jn) = cubic_term(self.sys, &x, true);
            let jac = l.axpby(1.0, &jn.expect("jacobian requested"), 1.0);
            let lu = match self.symbolic.get() {
                Some(sym) => LuSolver::with_symbolic(jac, sym.clone())?,
                None => {
                    let lu = LuSolver::new(jac)?;
                    let _ = self.symbolic.set(lu.symbolic());
                    lu
                }
            };
            let dx = lu.solve(&r)?;
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=6 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - alpha * di).collect();
                let tr = self.residual(l, b, &trial);
                let tn = norm2(&tr);
                if tn < rn || alpha < 1.0 / 64.0 {
                    accepted = Some((trial, tr, tn));
                    break;
                }
                alpha *= 0.5;
            }
            let (nx, nr, nn) = accepted.expect("the last halving is always accepted");
            x = nx;
            r = nr;
            rn = nn;
        }
        Ok(NewtonReport { solution: x, iterations: it, residual: rn })
    }

    /// `ψ^{n+1}` with Newton started from `ψⁿ`.
    pub fn step_psi(
        &self,
        psi_n: &[f64],
        phi_n: &ScalarSampler,
        a_next: &VectorSampler,
        sources: &dyn Sources,
        t_next: f64,
        step: usize,
    ) -> Result<NewtonReport> {
        let (l, b) = self.system(psi_n, phi_n, a_next, sources, t_next);
        self.newton(&l, &b, psi_n, step)
    }
}

/// The four summands of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyComponents {
    /// `½‖(i/κ∇ + A)ψ‖²`
    pub kinetic: f64,
    /// `¼‖|ψ|² − 1‖²`
    pub condensation: f64,
    /// `½‖∇×A − H‖²`
    pub field: f64,
    /// `½‖φ‖²`
    pub gauge: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.kinetic + self.condensation + self.field + self.gauge
    }
}

pub fn discrete_energy(
    scheme: &dyn MagneticScheme,
    kappa: f64,
    state: &State,
    field: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> EnergyComponents {
    let sys = scheme.sys();
    let mesh = &sys.mesh;
    let rule = QuadratureRule::accurate();
    let bary = rule.barycentric();
    let i = Complex64::new(0.0, 1.0);
    let parts = map_elements(sys.exec, mesh.n_triangles(), |t| {
        let area = mesh.area(t);
        let curl = scheme.curl_at(&state.a, t);
        let mut e = [0.0; 4];
        for (l, &w) in bary.iter().zip(&rule.weights) {
            let w = 2.0 * area * w;
            let (psi, grad) = sys.eval_p1(&state.psi, t, l);
            let a = scheme.vector_at(&state.a, t, l);
            let d = [i / kappa * grad[0] + a[0] * psi, i / kappa * grad[1] + a[1] * psi];
            e[0] += 0.5 * w * (d[0].norm_sqr() + d[1].norm_sqr());
            e[1] += 0.25 * w * (psi.norm_sqr() - 1.0).powi(2);
            e[2] += 0.5 * w * (curl - field(mesh.point(t, l))).powi(2);
            e[3] += 0.5 * w * scheme.phi_at(&state.phi, t, l).powi(2);
        }
        e
    });
    let mut s = [0.0; 4];
    for e in parts {
        for k in 0..4 {
            s[k] += e[k];
        }
    }
    EnergyComponents {
        kinetic: s[0],
        condensation: s[1],
        field: s[2],
        gauge: s[3],
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub values: Vec<EnergyComponents>,
}

impl EnergyTrace {
    /// `D_τ G^{n+1} = (G^{n+1} − Gⁿ)/τ`.
    pub fn increments(&self, tau: f64) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| (w[1].total() - w[0].total()) / tau)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,time,G,kinetic,condensation,field,gauge\n");
        for (n, (t, e)) in self.times.iter().zip(&self.values).enumerate() {
            s.push_str(&format!(
                "{n},{t:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                e.total(),
                e.kinetic,
                e.condensation,
                e.field,
                e.gauge
            ));
        }
        s
    }
}

/// Check `G^{n+1} − Gⁿ ≤ τηκ²Gⁿ + 1e−8(1 + Gⁿ)`.
pub fn energy_step_ok(prev: f64, next: f64, cfg: &SolverConfig) -> std::result::Result<(), (f64, f64)> {
    let bound = cfg.tau * cfg.eta * cfg.kappa * cfg.kappa * prev + 1e-8 * (1.0 + prev);
    let inc = next - prev;
    if inc <= bound { Ok(()) } else { Err((inc, bound)) }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub time: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub psi_sup: f64,
}

/// Initial data for [`run`].
pub struct InitialData<'a> {
    pub psi0: &'a dyn Fn([f64; 2]) -> Complex64,
    pub a0: &'a dyn Fn([f64; 2]) -> [f64; 2],
    pub div_a0: &'a dyn Fn([f64; 2]) -> f64,
}

pub struct Trajectory {
    pub final_state: State,
    pub energy: EnergyTrace,
    pub steps: Vec<StepInfo>,
}

pub fn initial_state(scheme: &dyn MagneticScheme, init: &InitialData) -> State {
    let (phi, a) = scheme.initial(init.a0, init.div_a0);
    State {
        psi: scheme.sys().interpolate_order(init.psi0),
        phi,
        a,
        step: 0,
        time: 0.0,
    }
}

/// One full step `n → n+1`.
pub fn advance(
    scheme: &dyn MagneticScheme,
    psi_solver: &PsiSolver,
    cfg: &SolverConfig,
    state: &State,
    sources: &dyn Sources,
) -> Result<(State, NewtonReport)> {
    let n = state.step + 1;
    let t_next = n as f64 * cfg.tau;
    let (phi, a) = scheme.step(&state.psi, &state.a, sources, t_next)?;
    let phi_n = |t: usize, l: &[f64; 3]| scheme.phi_at(&state.phi, t, l);
    let a_next = |t: usize, l: &[f64; 3]| scheme.vector_at(&a, t, l);
    let report = psi_solver.step_psi(&state.psi, &phi_n, &a_next, sources, t_next, n)?;
    let next = State {
        psi: report.solution.clone(),
        phi,
        a,
        step: n,
        time: t_next,
    };
    Ok((next, report))
}

/// Run `round(T/τ)` steps. `observer` sees every state including the initial
/// one and may abort the run by returning an error.
pub fn run(
    scheme: &dyn MagneticScheme,
    psi_solver: &PsiSolver,
    cfg: &SolverConfig,
    init: &InitialData,
    sources: &dyn Sources,
    observer: &mut dyn FnMut(&State) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = initial_state(scheme, init);
    let field_at = |time: f64| move |x: [f64; 2]| sources.field(x, time);
    let mut energy = EnergyTrace::default();
    let mut steps = Vec::with_capacity(cfg.n_steps());
    energy.times.push(0.0);
    energy.values.push(discrete_energy(scheme, cfg.kappa, &state, &field_at(0.0)));
    observer(&state)?;
    let sup_limit = cfg.tau.powf(-0.5);
    for _ in 0..cfg.n_steps() {
        let (next, report) = advance(scheme, psi_solver, cfg, &state, sources)?;
        let e = discrete_energy(scheme, cfg.kappa, &next, &field_at(next.time));
        let prev = energy.values.last().map(EnergyComponents::total).unwrap_or(0.0);
        let psi_sup = next.psi_sup();
        if cfg.check_energy && sources.source_free() && state.psi_sup() <= sup_limit {
            if let Err((increment, bound)) = energy_step_ok(prev, e.total(), cfg) {
                return Err(Error::EnergyInequality { step: next.step, increment, bound });
            }
        }
        energy.times.push(next.time);
        energy.values.push(e);
        steps.push(StepInfo {
            step: next.step,
            time: next.time,
            newton_iterations: report.iterations,
            newton_residual: report.residual,
            psi_sup,
        });
        observer(&next)?;
        state = next;
    }
    Ok(Trajectory { final_state: state, energy, steps })
}

/// Spatially constant applied field with no bulk sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub f64);

impl Sources for ConstantField {
    fn field(&self, _: [f64; 2], _: f64) -> f64 {
        self.0
    }
}

/// Supercurrent of a discrete state at a point, for diagnostics.
pub fn current_at(scheme: &dyn MagneticScheme, state: &State, kappa: f64, t: usize, l: &[f64; 3]) -> [f64; 2] {
    let (psi, grad) = scheme.sys().eval_p1(&state.psi, t, l);
    supercurrent(psi, grad, scheme.vector_at(&state.a, t, l), kappa)
}

/// Cut-off applied to nodal values (used by diagnostics and tests).
pub fn theta_nodal(psi: &[f64]) -> Vec<f64> {
    psi.chunks_exact(2)
        .flat_map(|c| {
            let z = theta(Complex64::new(c[0], c[1]));
            [z.re, z.im]
        })
        .collect()
}
