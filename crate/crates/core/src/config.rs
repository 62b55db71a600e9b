//! Run configuration.
//!
//! The file format is TOML: a handful of sections holding flat keys. Every
//! key has a default, unknown keys and sections are rejected, and
//! [`RunConfig::to_toml`] writes a file that parses back to the same value.
//!
//! ```toml
//! [domain]
//! kind = "l_shape_with_hole"     # l_shape_with_hole | l_shape | square
//! hole = [-0.75, -0.45, -0.75, -0.45]   # x0, x1, y0, y1; holed domain only
//!
//! [discretization]
//! scheme = "mixed"               # mixed | galerkin
//! h = [0.0625, 0.03125, 0.015625]
//! tau_factor = 2.0               # tau = tau_factor * h
//! # tau = 0.01                   # fixed step, overrides tau_factor
//!
//! [model]
//! eta = 1.0
//! kappa = 1.0
//! final_time = 1.0
//!
//! [scenario]
//! kind = "mms"                   # mms | physical | homogeneous
//! field = 1.0                    # applied field of the physical scenario
//!
//! [solver]
//! newton_tol = 1e-11
//! newton_max_iter = 20
//! parallel = false
//! check_energy = true
//!
//! [output]
//! dir = "out"
//! deterministic = false
//! errors = true
//! energy = true
//! vtk = false
//! vtk_stride = 10
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::forms::ExecMode;
use crate::mesh::{DomainKind, DomainSpec, Rect};
use crate::tdgl::SolverConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Mixed,
    Galerkin,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Mixed => "mixed",
            SchemeKind::Galerkin => "galerkin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(Self::Mixed),
            "galerkin" => Some(Self::Galerkin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Manufactured solution with the corner singularity.
    Mms,
    /// `H ≡ field`, `ψ₀ ≡ 1`, `A₀ = 0`, no sources.
    Physical,
    /// `H = 0`, `ψ₀ ≡ 1`, `A₀ = 0`: the stationary superconducting state.
    Homogeneous,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Mms => "mms",
            ScenarioKind::Physical => "physical",
            ScenarioKind::Homogeneous => "homogeneous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hole: Option<[f64; 4]>,
}

impl Default for DomainSection {
    fn default() -> Self {
        let r = DomainSpec::default_hole();
        Self {
            kind: DomainKind::LShapeWithHole.name().into(),
            hole: Some([r.x0, r.x1, r.y0, r.y1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub scheme: SchemeKind,
    pub h: Vec<f64>,
    pub tau_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Mixed,
            h: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            tau_factor: 2.0,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub eta: f64,
    pub kappa: f64,
    pub final_time: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { eta: 1.0, kappa: 1.0, final_time: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub field: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { kind: ScenarioKind::Mms, field: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub parallel: bool,
    pub check_energy: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            newton_tol: d.newton_tol,
            newton_max_iter: d.newton_max_iter,
            parallel: false,
            check_energy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Leave wall-clock timings out of the summary so that every output
    /// file is a function of the configuration alone.
    pub deterministic: bool,
    pub errors: bool,
    pub energy: bool,
    pub vtk: bool,
    pub vtk_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            deterministic: false,
            errors: true,
            energy: true,
            vtk: false,
            vtk_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub discretization: DiscretizationSection,
    pub model: ModelSection,
    pub scenario: ScenarioSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue { field: field.into(), message: message.into() }
}

impl RunConfig {
    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("every field is representable")
    }

    pub fn validate(&self) -> Result<()> {
        let kind = DomainKind::parse(&self.domain.kind).ok_or_else(|| {
            field_error("domain.kind", format!("unknown domain `{}`", self.domain.kind))
        })?;
        let hs = &self.discretization.h;
        if hs.is_empty() {
            return Err(field_error("discretization.h", "at least one level is required"));
        }
        if hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(field_error("discretization.h", "mesh sizes must be positive"));
        }
        if hs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(field_error("discretization.h", "levels must be strictly decreasing"));
        }
        if !(self.discretization.tau_factor > 0.0 && self.discretization.tau_factor.is_finite()) {
            return Err(field_error("discretization.tau_factor", "must be positive"));
        }
        if let Some(tau) = self.discretization.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(field_error("discretization.tau", "must be positive"));
            }
        }
        let m = &self.model;
        for (name, v) in [("model.eta", m.eta), ("model.kappa", m.kappa), ("model.final_time", m.final_time)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_error(name, format!("must be positive, got {v}")));
            }
        }
        for &h in hs {
            let tau = self.tau(h);
            if tau >= m.eta {
                let field = if self.discretization.tau.is_some() { "discretization.tau" } else { "discretization.tau_factor" };
                return Err(field_error(field, format!("tau = {tau} at h = {h} must be smaller than eta = {}", m.eta)));
            }
        }
        if !self.scenario.field.is_finite() {
            return Err(field_error("scenario.field", "must be finite"));
        }
        let s = &self.solver;
        if !(s.newton_tol > 0.0 && s.newton_tol <= 1e-6) {
            return Err(field_error("solver.newton_tol", "must lie in (0, 1e-6]"));
        }
        if s.newton_max_iter == 0 {
            return Err(field_error("solver.newton_max_iter", "must be positive"));
        }
        if self.output.vtk_stride == 0 {
            return Err(field_error("output.vtk_stride", "must be positive"));
        }
        for &h in hs {
            self.domain_spec_with(kind, h).validate().map_err(|e| field_error("domain.hole", e.to_string()))?;
        }
        Ok(())
    }

    fn domain_spec_with(&self, kind: DomainKind, h: f64) -> DomainSpec {
        let hole = match kind {
            DomainKind::LShapeWithHole => self.domain.hole.map(|r| Rect::new(r[0], r[1], r[2], r[3])),
            _ => None,
        };
        DomainSpec { kind, hole, target_h: h }
    }

    /// Domain of one level. Call only on a validated config.
    pub fn domain_spec(&self, h: f64) -> DomainSpec {
        let kind = DomainKind::parse(&self.domain.kind).expect("validated domain kind");
        self.domain_spec_with(kind, h)
    }

    pub fn tau(&self, h: f64) -> f64 {
        self.discretization.tau.unwrap_or(self.discretization.tau_factor * h)
    }

    pub fn exec(&self) -> ExecMode {
        if self.solver.parallel { ExecMode::Parallel } else { ExecMode::Sequential }
    }

    pub fn solver_config(&self, h: f64) -> SolverConfig {
        SolverConfig {
            eta: self.model.eta,
            kappa: self.model.kappa,
            tau: self.tau(h),
            final_time: self.model.final_time,
            newton_tol: self.solver.newton_tol,
            newton_max_iter: self.solver.newton_max_iter,
            exec: self.exec(),
            check_energy: self.solver.check_energy,
        }
    }

    /// Keep the coarsest level and halve `h` until there are `n` levels.
    pub fn with_level_count(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(field_error("levels", "must be positive"));
        }
        let h0 = self.discretization.h[0];
        self.discretization.h = (0..n).map(|k| h0 / (1u64 << k) as f64).collect();
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse("[scenario]\nkind = \"physical\"\n").unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::Physical);
        assert_eq!(cfg.discretization.tau_factor, 2.0);
        assert_eq!(cfg.model, ModelSection { eta: 1.0, kappa: 1.0, final_time: 1.0 });
        assert_eq!(cfg.discretization.h, vec![0.0625, 0.03125, 0.015625]);
        assert_eq!(cfg.tau(0.0625), 0.125);
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let text = "[domain]\nkind = \"l_shape\"\n[discretization]\nscheme = \"galerkin\"\nh = [0.25, 0.1]\ntau = 0.01\n\
                    [model]\neta = 2.0\nkappa = 3.5\n[output]\ndir = \"results/a\"\nvtk = true\nvtk_stride = 3\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.domain.kind, "l_shape");
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = RunConfig::parse("[model]\neta = 1.0\nkapa = 2.0\n").unwrap_err();
        match err {
            Error::ConfigParse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("kapa"), "{message}");
            }
            e => panic!("{e}"),
        }
        let err = RunConfig::parse("[model]\n\n[extras]\nx = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }), "{err}");
        let err = RunConfig::parse("[model]\neta = \"one\"\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        let err = RunConfig::parse("[discretization]\nscheme = \"spectral\"\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
    }

    #[test]
    fn validation_names_the_field() {
        let field = |text: &str| match RunConfig::parse(text).unwrap_err() {
            Error::ConfigValue { field, .. } => field,
            e => panic!("{e}"),
        };
        // tau = 2h = 1 >= eta
        assert_eq!(field("[discretization]\nh = [0.5]\n"), "discretization.tau_factor");
        assert_eq!(field("[discretization]\nh = [0.1]\ntau = 1.5\n"), "discretization.tau");
        assert_eq!(field("[model]\neta = 0.1\n"), "discretization.tau_factor");
        assert_eq!(field("[discretization]\nh = [0.1, 0.2]\n"), "discretization.h");
        assert_eq!(field("[discretization]\nh = []\n"), "discretization.h");
        assert_eq!(field("[model]\nkappa = -1.0\n"), "model.kappa");
        assert_eq!(field("[domain]\nkind = \"disk\"\n"), "domain.kind");
        assert_eq!(field("[domain]\nhole = [-0.2, 0.2, -0.2, 0.2]\n"), "domain.hole");
        assert_eq!(field("[solver]\nnewton_tol = 0.1\n"), "solver.newton_tol");
        assert_eq!(field("[output]\nvtk_stride = 0\n"), "output.vtk_stride");
    }

    #[test]
    fn level_count_override() {
        let cfg = RunConfig::default().with_level_count(2).unwrap();
        assert_eq!(cfg.discretization.h, vec![0.0625, 0.03125]);
        assert!(RunConfig::default().with_level_count(0).is_err());
    }

    #[test]
    fn square_ignores_the_hole() {
        let cfg = RunConfig::parse("[domain]\nkind = \"square\"\n").unwrap();
        assert_eq!(cfg.domain_spec(0.25), DomainSpec::square(0.25));
    }
}
