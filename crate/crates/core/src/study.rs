//! Runs and convergence studies driven by a [`RunConfig`].
//!
//! Output files in `output.dir`:
//!
//! * `errors.csv`: one row per level and a `rate` row (mms scenario only);
//!   the rate between levels `h₁ > h₂` is `log(e₁/e₂)/log(h₁/h₂)`, i.e.
//!   `log₂(e₁/e₂)` for halved `h`.
//! * `energy_<scheme>_level<k>.csv`: the discrete energy at every step.
//! * `vtk/<scheme>_level<k>_step<n>.vtk`: snapshots every `vtk_stride` steps
//!   and at the final step.
//! * `summary.txt`: per-level counts, Newton statistics and (unless
//!   `deterministic`) wall-clock times.
//! * `config.toml`: the effective configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::baseline::NodalScheme;
use crate::config::{RunConfig, ScenarioKind, SchemeKind};
use crate::fe::{FeSystem, State};
use crate::forms::{assemble_static, Sources};
use crate::mesh::build_domain;
use crate::mms::{state_errors, ErrorRow, ErrorTable, ExactSolution};
use crate::tdgl::{run, ConstantField, InitialData, MagneticScheme, MixedScheme, PsiSolver, Trajectory};
use crate::vtk::write_vtk;
use crate::{Complex64, Result};

/// Result of one mesh level.
pub struct LevelOutcome {
    pub h: f64,
    pub tau: f64,
    pub n_triangles: usize,
    pub trajectory: Trajectory,
    /// Errors at the final time (mms scenario only).
    pub errors: Option<ErrorRow>,
    pub seconds: f64,
}

impl LevelOutcome {
    pub fn max_newton_iterations(&self) -> usize {
        self.trajectory.steps.iter().map(|s| s.newton_iterations).max().unwrap_or(0)
    }

    pub fn max_psi_sup(&self) -> f64 {
        self.trajectory.steps.iter().map(|s| s.psi_sup).fold(0.0, f64::max)
    }
}

pub struct StudyReport {
    pub scheme: SchemeKind,
    pub levels: Vec<LevelOutcome>,
    pub table: Option<ErrorTable>,
    pub files: Vec<PathBuf>,
}

fn build_scheme<'a>(
    kind: SchemeKind,
    sys: &'a FeSystem,
    mats: &crate::forms::StaticMatrices,
    cfg: &RunConfig,
    h: f64,
) -> Result<Box<dyn MagneticScheme + 'a>> {
    let params = cfg.solver_config(h).params();
    Ok(match kind {
        SchemeKind::Mixed => Box::new(MixedScheme::new(sys, mats, params)?),
        SchemeKind::Galerkin => Box::new(NodalScheme::new(sys, params)?),
    })
}

/// Run level `k` of `cfg` with `scheme`. `observer` sees every state
/// together with the scheme that produced it.
pub fn run_level(
    cfg: &RunConfig,
    scheme_kind: SchemeKind,
    k: usize,
    observer: &mut dyn FnMut(&dyn MagneticScheme, &State) -> Result<()>,
) -> Result<LevelOutcome> {
    let start = Instant::now();
    let h = cfg.discretization.h[k];
    let solver_cfg = cfg.solver_config(h);
    let sys = FeSystem::new(build_domain(&cfg.domain_spec(h))?).with_exec(cfg.exec());
    let mats = assemble_static(&sys);
    let scheme = build_scheme(scheme_kind, &sys, &mats, cfg, h)?;
    let psi_solver = PsiSolver::new(&sys, &mats, solver_cfg);

    let exact = ExactSolution::new(cfg.model.eta, cfg.model.kappa);
    let field = ConstantField(match cfg.scenario.kind {
        ScenarioKind::Physical => cfg.scenario.field,
        _ => 0.0,
    });
    let one = |_: [f64; 2]| Complex64::new(1.0, 0.0);
    let zero_a = |_: [f64; 2]| [0.0, 0.0];
    let zero = |_: [f64; 2]| 0.0;
    let mms_psi = |x: [f64; 2]| exact.psi(x, 0.0);
    let mms_a = |x: [f64; 2]| exact.a(x, 0.0);
    let mms_div = |x: [f64; 2]| exact.div_a(x, 0.0);
    let (init, sources): (InitialData, &dyn Sources) = match cfg.scenario.kind {
        ScenarioKind::Mms => (InitialData { psi0: &mms_psi, a0: &mms_a, div_a0: &mms_div }, &exact),
        ScenarioKind::Physical | ScenarioKind::Homogeneous => {
            (InitialData { psi0: &one, a0: &zero_a, div_a0: &zero }, &field)
        }
    };

    let vtk_dir = cfg.output.dir.join("vtk");
    if cfg.output.vtk {
        std::fs::create_dir_all(&vtk_dir)?;
    }
    let n_steps = solver_cfg.n_steps();
    let scheme_ref: &dyn MagneticScheme = scheme.as_ref();
    let mut observe = |state: &State| -> Result<()> {
        if cfg.output.vtk && (state.step.is_multiple_of(cfg.output.vtk_stride) || state.step == n_steps) {
            let name = format!("{}_level{k}_step{:05}.vtk", scheme_kind.name(), state.step);
            write_vtk(&vtk_dir.join(name), scheme_ref, state)?;
        }
        observer(scheme_ref, state)
    };
    let trajectory = run(scheme_ref, &psi_solver, &solver_cfg, &init, sources, &mut observe)?;
    let errors = (cfg.scenario.kind == ScenarioKind::Mms)
        .then(|| state_errors(scheme_ref, &exact, &trajectory.final_state, solver_cfg.tau));
    Ok(LevelOutcome {
        h: sys.mesh.h,
        tau: solver_cfg.tau,
        n_triangles: sys.mesh.n_triangles(),
        trajectory,
        errors,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

pub fn summary(cfg: &RunConfig, report: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scheme {}", report.scheme.name());
    let _ = writeln!(s, "scenario {}", cfg.scenario.kind.name());
    let _ = writeln!(s, "domain {}", cfg.domain.kind);
    for (k, l) in report.levels.iter().enumerate() {
        let _ = write!(
            s,
            "level {k} h {:.10e} tau {:.10e} triangles {} steps {} max_newton {} max_psi_sup {:.10e}",
            l.h,
            l.tau,
            l.n_triangles,
            l.trajectory.steps.len(),
            l.max_newton_iterations(),
            l.max_psi_sup()
        );
        if !cfg.output.deterministic {
            let _ = write!(s, " seconds {:.3}", l.seconds);
        }
        s.push('\n');
    }
    s
}

/// Run every level of `cfg` and write the output files.
pub fn run_study(cfg: &RunConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let dir: &Path = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let scheme = cfg.discretization.scheme;
    let mut files = Vec::new();
    write(dir.join("config.toml"), &cfg.to_toml(), &mut files)?;
    let mut levels = Vec::new();
    for k in 0..cfg.discretization.h.len() {
        let outcome = run_level(cfg, scheme, k, &mut |_, _| Ok(()))?;
        if cfg.output.energy {
            let name = format!("energy_{}_level{k}.csv", scheme.name());
            write(dir.join(name), &outcome.trajectory.energy.to_csv(), &mut files)?;
        }
        levels.push(outcome);
    }
    let table = (cfg.scenario.kind == ScenarioKind::Mms).then(|| {
        let mut t = ErrorTable::new(scheme.name());
        t.rows = levels.iter().filter_map(|l| l.errors).collect();
        t
    });
    if let (Some(t), true) = (&table, cfg.output.errors) {
        write(dir.join("errors.csv"), &t.to_csv(), &mut files)?;
    }
    let mut report = StudyReport { scheme, levels, table, files };
    let text = summary(cfg, &report);
    let path = dir.join("summary.txt");
    std::fs::write(&path, text)?;
    report.files.push(path);
    Ok(report)
}
