//! Experiment runner: config parsing, dispatch, CSV and manifest output, and
//! regression fixtures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::exit;
use crate::filter::{decay_envelope_ratio, fit_decay_constants, log_grid, FilterSpec};
use crate::hamiltonian::{gap_scan, ParamHamiltonian};
use crate::heisenberg::{truncated_expectation, truncation_error_curve, EvolutionConfig, ProductState};
use crate::lattice::{Lattice, Site};
use crate::operators::{LocalOperator, Pauli};
use crate::oracle::{
    boundary_difference_scan, exact_adiabatic_transport, exact_expectation, lr_cone_scan, projector_filter_check,
    pt_generator_check, ConeReport, MAX_ORACLE_SITES,
};
use crate::quasiadiabatic::{decay_onset, shell_decay_curve, summability_from_norms, Abscissa, MAX_EIGEN_SITES};
use crate::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "ADIACONT_OUT";

/// Elementwise tolerance for fixture comparison.
pub const FIXTURE_TOL: f64 = 1e-9;

/// Named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GapScan,
    FilterCheck,
    ProjectorCheck,
    PtCheck,
    ShellDecay,
    Summability,
    LrCone,
    BoundaryDiff,
    EvolveExpectation,
    TruncationError,
    ExactTransport,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::GapScan,
        Experiment::FilterCheck,
        Experiment::ProjectorCheck,
        Experiment::PtCheck,
        Experiment::ShellDecay,
        Experiment::Summability,
        Experiment::LrCone,
        Experiment::BoundaryDiff,
        Experiment::EvolveExpectation,
        Experiment::TruncationError,
        Experiment::ExactTransport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GapScan => "gap-scan",
            Experiment::FilterCheck => "filter-check",
            Experiment::ProjectorCheck => "projector-check",
            Experiment::PtCheck => "pt-check",
            Experiment::ShellDecay => "shell-decay",
            Experiment::Summability => "summability",
            Experiment::LrCone => "lr-cone",
            Experiment::BoundaryDiff => "boundary-diff",
            Experiment::EvolveExpectation => "evolve-expectation",
            Experiment::TruncationError => "truncation-error",
            Experiment::ExactTransport => "exact-transport",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// `γ` as a number or `"auto"` (`Δ/2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Value(f64),
    Keyword(String),
}

impl Default for GammaSetting {
    fn default() -> Self {
        GammaSetting::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub gamma: GammaSetting,
    pub mollifier_nodes: usize,
    pub time_nodes: usize,
    pub t_max_factor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { gamma: GammaSetting::default(), mollifier_nodes: 64, time_nodes: 16, t_max_factor: 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapConfig {
    /// Gap bound `Δ`. Measured by a full scan when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub s_points: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self { bound: None, s_points: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub alpha: usize,
    /// Defaults to `alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<usize>,
    pub ds: f64,
    /// Explicit grid; overrides `s_points`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    pub s_points: usize,
    pub halving_check: bool,
    pub oracle: bool,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self { alpha: 3, beta: None, ds: 0.05, s_grid: None, s_points: 11, halving_check: false, oracle: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableConfig {
    /// Lattice coordinates; the lattice centre when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<Vec<i64>>,
    pub axis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self { site: None, axis: "Z".into(), file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterCheckConfig {
    pub orders: Vec<u32>,
    pub gammas: Vec<f64>,
    /// Envelope window `[t_lo/γ, t_hi/γ]`.
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
    pub omega_points: usize,
}

impl Default for FilterCheckConfig {
    fn default() -> Self {
        Self { orders: vec![2, 3, 4, 5], gammas: vec![0.5, 2.0], t_lo: 5.0, t_hi: 50.0, points: 60, omega_points: 241 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectorConfig {
    /// Negative control runs at `γ = factor · ΔE(s)`.
    pub negative_factor: f64,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self { negative_factor: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PtConfig {
    pub s_grid: Vec<f64>,
}

impl Default for PtConfig {
    fn default() -> Self {
        Self { s_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShellConfig {
    pub s: f64,
    /// Largest non-wrapping radius within the eigensolver cap when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<usize>,
    /// Decay onset `α*`. Fitted from the light cone when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onset: Option<usize>,
}

impl Default for ShellConfig {
    fn default() -> Self {
        Self { s: 1.0, alpha_max: None, onset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummabilityConfig {
    pub s: f64,
    pub l: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<usize>,
}

impl Default for SummabilityConfig {
    fn default() -> Self {
        Self { s: 1.0, l: 8, alpha_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeConfig {
    pub s: f64,
    pub a_axis: String,
    pub b_axis: String,
    /// `1..=min(5, m/2)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<usize>>,
    pub t_grid: Vec<f64>,
}

impl Default for ConeConfig {
    fn default() -> Self {
        let mut t_grid = vec![0.0];
        t_grid.extend((3..=12).map(f64::from));
        Self { s: 1.0, a_axis: "Z".into(), b_axis: "X".into(), distances: None, t_grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub s: f64,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<usize>,
    /// Fitted from the light cone when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone_radius: Option<usize>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { s: 1.0, t: 1.0, alpha_max: None, cone_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub s: f64,
    /// `"alpha"` or `"beta"`.
    pub vary: String,
    pub radii: Vec<usize>,
    pub alpha_ref: usize,
    pub beta_ref: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { s: 1.0, vary: "alpha".into(), radii: vec![1, 2, 3], alpha_ref: 4, beta_ref: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    pub steps: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { steps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Target accuracy `ε` for `|ω'_s(A) − ω_s(A)|`.
    pub epsilon: f64,
    pub spectral_residual: f64,
    pub quadrature_agreement: f64,
    pub negative_control_min: f64,
    pub pt_residual: f64,
    pub chi_integral: f64,
    pub shell_exponent_max: f64,
    pub summability_change: f64,
    pub cone_rms: f64,
    pub cone_rate_factor: f64,
    pub transport_error: f64,
    pub refinement_ratio_min: f64,
    pub refinement_ratio_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            spectral_residual: 1e-10,
            quadrature_agreement: 1e-6,
            negative_control_min: 1e-3,
            pt_residual: 1e-9,
            chi_integral: 1e-8,
            shell_exponent_max: -3.0,
            summability_change: 0.01,
            cone_rms: 0.5,
            cone_rate_factor: 3.0,
            transport_error: 1e-4,
            refinement_ratio_min: 3.5,
            refinement_ratio_max: 4.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Full run configuration. Every section is optional and unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Must match the experiment named on the command line when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    pub model: ModelConfig,
    pub filter: FilterConfig,
    pub gap: GapConfig,
    pub evolution: EvolutionSection,
    pub observable: ObservableConfig,
    pub filter_check: FilterCheckConfig,
    pub projector: ProjectorConfig,
    pub pt: PtConfig,
    pub shell: ShellConfig,
    pub summability: SummabilityConfig,
    pub cone: ConeConfig,
    pub boundary: BoundaryConfig,
    pub truncation: TruncationConfig,
    pub transport: TransportConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_unit(name: &str, s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(config_err(format!("{name} = {s} must lie in [0, 1]")))
    }
}

fn parse_axis(name: &str, text: &str) -> Result<Pauli> {
    let mut chars = text.trim().chars();
    match (chars.next().and_then(Pauli::from_char), chars.next()) {
        (Some(p), None) if p != Pauli::I => Ok(p),
        _ => Err(config_err(format!("{name} must be one of X, Y, Z, got `{text}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks everything that does not need the model.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.file.is_some() && (m.dim.is_some() || m.m.is_some() || m.lambda.is_some()) {
            return Err(config_err("model.file excludes model.dim, model.m and model.lambda"));
        }
        if let Some(l) = m.lambda {
            if !l.is_finite() {
                return Err(config_err("model.lambda must be finite"));
            }
        }
        match &self.filter.gamma {
            GammaSetting::Value(g) if !(g.is_finite() && *g > 0.0) => {
                return Err(config_err(format!("filter.gamma must be positive, got {g}")));
            }
            GammaSetting::Keyword(k) if k != "auto" => {
                return Err(config_err(format!("filter.gamma must be a number or \"auto\", got `{k}`")));
            }
            _ => {}
        }
        let f = &self.filter;
        if f.mollifier_nodes < 2 || f.time_nodes < 2 || !positive(f.t_max_factor) {
            return Err(config_err("filter quadrature sizes must be at least 2 and t_max_factor positive"));
        }
        if let Some(b) = self.gap.bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(config_err(format!("gap.bound must be positive, got {b}")));
            }
        }
        if self.gap.s_points < 2 {
            return Err(config_err("gap.s_points must be at least 2"));
        }
        self.evolution_config()?;
        parse_axis("observable.axis", &self.observable.axis)?;
        parse_axis("cone.a_axis", &self.cone.a_axis)?;
        parse_axis("cone.b_axis", &self.cone.b_axis)?;
        let fc = &self.filter_check;
        if fc.orders.is_empty()
            || fc.gammas.iter().any(|g| !positive(*g))
            || !(positive(fc.t_lo) && fc.t_lo < fc.t_hi)
            || fc.points < 2
        {
            return Err(config_err("filter_check needs orders, positive gammas, 0 < t_lo < t_hi and points >= 2"));
        }
        if fc.omega_points < 3 {
            return Err(config_err("filter_check.omega_points must be at least 3"));
        }
        if !positive(self.projector.negative_factor - 1.0) {
            return Err(config_err("projector.negative_factor must exceed 1"));
        }
        for &s in &self.pt.s_grid {
            check_unit("pt.s_grid entry", s)?;
        }
        check_unit("shell.s", self.shell.s)?;
        check_unit("summability.s", self.summability.s)?;
        check_unit("cone.s", self.cone.s)?;
        check_unit("boundary.s", self.boundary.s)?;
        check_unit("truncation.s", self.truncation.s)?;
        if self.cone.t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(config_err("cone.t_grid entries must be non-negative"));
        }
        if !(self.boundary.t.is_finite() && self.boundary.t >= 0.0) {
            return Err(config_err("boundary.t must be non-negative"));
        }
        self.truncation_abscissa()?;
        if self.transport.steps == 0 {
            return Err(config_err("transport.steps must be positive"));
        }
        Ok(())
    }

    pub fn beta(&self) -> usize {
        self.evolution.beta.unwrap_or(self.evolution.alpha)
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let e = &self.evolution;
        let mut cfg = match &e.s_grid {
            Some(g) => EvolutionConfig::new(g.clone(), e.ds),
            None => EvolutionConfig::uniform(e.s_points, e.ds),
        }
        .map_err(|err| config_err(format!("evolution: {err}")))?;
        cfg.halving_check = e.halving_check;
        Ok(cfg)
    }

    fn truncation_abscissa(&self) -> Result<Abscissa> {
        match self.truncation.vary.as_str() {
            "alpha" => Ok(Abscissa::Alpha),
            "beta" => Ok(Abscissa::Beta),
            other => Err(config_err(format!("truncation.vary must be alpha or beta, got `{other}`"))),
        }
    }
}

/// False for NaN.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Model, observable and inputs read from disk.
pub struct ResolvedModel {
    pub h: ParamHamiltonian,
    pub lambda: f64,
    pub model_text: Option<String>,
    pub observable: LocalOperator,
    pub observable_text: Option<String>,
    pub center: Site,
}

pub fn resolve_model(cfg: &RunConfig, base: &Path) -> Result<ResolvedModel> {
    let (h, lambda, model_text) = match &cfg.model.file {
        Some(p) => {
            let path = resolve_path(base, p);
            let text = std::fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let (h, lambda) = ParamHamiltonian::parse_model(&text)?;
            (h, lambda, Some(text))
        }
        None => {
            let lattice = Lattice::new(cfg.model.dim.unwrap_or(1), cfg.model.m.unwrap_or(8))
                .map_err(|e| config_err(format!("model: {e}")))?;
            let lambda = cfg.model.lambda.unwrap_or(0.1);
            (ParamHamiltonian::perturbed_classical(lattice, lambda), lambda, None)
        }
    };
    let lattice = *h.lattice();
    let center = match &cfg.observable.site {
        Some(coords) => {
            if coords.len() != lattice.dim() {
                return Err(config_err(format!("observable.site needs {} coordinates", lattice.dim())));
            }
            lattice.site(coords).map_err(|e| config_err(format!("observable.site: {e}")))?
        }
        None => {
            let c = (lattice.extent() / 2) as i64;
            lattice.site(&vec![c; lattice.dim()])?
        }
    };
    let (observable, observable_text) = match &cfg.observable.file {
        Some(p) => {
            let path = resolve_path(base, p);
            let text = std::fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let op = LocalOperator::parse_text(&text, &lattice)?;
            op.ensure_hermitian()?;
            (op, Some(text))
        }
        None => (LocalOperator::single(center, parse_axis("observable.axis", &cfg.observable.axis)?), None),
    };
    Ok(ResolvedModel { h, lambda, model_text, observable, observable_text, center })
}

/// One configured assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, format!("{value:e} <= {limit:e}"))
    }
}

/// Experiment products before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// `(file name, CSV content)`.
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
    /// Derived quantities recorded in the manifest.
    pub derived: BTreeMap<String, f64>,
    /// Non-numeric provenance of derived quantities.
    pub notes: BTreeMap<String, String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    model: ResolvedModel,
    gap_bound: Option<(f64, &'static str)>,
    out: Outcome,
    prefix: &'static str,
}

fn default_alpha_max(h: &ParamHamiltonian) -> Result<usize> {
    let l = h.lattice();
    let mut best = 0;
    let mut alpha = 1;
    while 2 * alpha + 2 <= l.extent() {
        if h.window(&l.ball(&Site::ORIGIN, alpha)?)?.len() > MAX_EIGEN_SITES {
            break;
        }
        best = alpha;
        alpha += 1;
    }
    if best == 0 {
        return Err(config_err("lattice too small for a non-wrapping shell of radius 1"));
    }
    Ok(best)
}

fn strictly_decreasing(points: &[(f64, f64)]) -> bool {
    points.windows(2).all(|p| p[1].1 < p[0].1)
}

fn uniform_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

impl<'a> Runner<'a> {
    fn file(&mut self, suffix: &str, content: String) {
        let name =
            if suffix.is_empty() { format!("{}.csv", self.prefix) } else { format!("{}_{suffix}.csv", self.prefix) };
        self.out.files.push((name, content));
    }

    fn check(&mut self, c: Check) {
        self.out.checks.push(c);
    }

    fn derive(&mut self, key: &str, v: f64) {
        self.out.derived.insert(key.into(), v);
    }

    fn h(&self) -> &ParamHamiltonian {
        &self.model.h
    }

    /// `Δ`: configured, or the minimum of a full scan.
    fn gap_bound(&mut self) -> Result<f64> {
        if let Some((g, _)) = self.gap_bound {
            return Ok(g);
        }
        let (g, source) = match self.cfg.gap.bound {
            Some(b) => (b, "configured"),
            None => (gap_scan(self.h(), &uniform_grid(self.cfg.gap.s_points), None)?.min_gap, "measured"),
        };
        self.gap_bound = Some((g, source));
        self.derive("gap_bound", g);
        Ok(g)
    }

    fn spec(&mut self) -> Result<FilterSpec> {
        let f = &self.cfg.filter;
        let (gamma, needs_gap) = match &f.gamma {
            GammaSetting::Value(g) => (*g, self.cfg.gap.bound.is_some()),
            GammaSetting::Keyword(_) => (self.gap_bound()? / 2.0, true),
        };
        let spec = FilterSpec::with_quadrature(gamma, f.mollifier_nodes, f.time_nodes, f.t_max_factor)?;
        if needs_gap {
            spec.check_below_gap(self.gap_bound()?)?;
        }
        self.derive("gamma", gamma);
        Ok(spec)
    }

    fn cone(&mut self) -> Result<ConeReport> {
        let c = &self.cfg.cone;
        let h = &self.model.h;
        let distances = match &c.distances {
            Some(d) => d.clone(),
            None => (1..=(h.lattice().extent() / 2).min(5)).collect(),
        };
        let a = LocalOperator::single(Site::ORIGIN, parse_axis("cone.a_axis", &c.a_axis)?);
        let report = lr_cone_scan(h, c.s, &a, parse_axis("cone.b_axis", &c.b_axis)?, &distances, &c.t_grid)?;
        if let Some(f) = report.fit {
            self.derive("cone_velocity", -f.a);
            self.derive("cone_rate", f.b);
            self.derive("cone_intercept", f.c);
            self.derive("cone_rms", f.rms);
            self.derive("cone_fit_points", report.fit_points as f64);
        }
        Ok(report)
    }

    fn cone_fit(&mut self) -> Result<(f64, f64)> {
        let report = self.cone()?;
        match (report.velocity(), report.rate()) {
            (Some(v), Some(k)) if v > 0.0 && k > 0.0 => Ok((v, k)),
            _ => Err(Error::Integration("light-cone fit did not produce positive v and kappa".into())),
        }
    }

    fn gap_scan(&mut self) -> Result<()> {
        let grid = uniform_grid(self.cfg.gap.s_points);
        let curve = gap_scan(self.h(), &grid, self.cfg.gap.bound)?;
        let mut csv = String::from("s,gap\n");
        for (s, g) in &curve.points {
            writeln!(csv, "{s},{g}").unwrap();
        }
        self.file("", csv);
        self.derive("min_gap", curve.min_gap);
        self.derive("argmin_s", curve.argmin);
        if let Some(b) = self.cfg.gap.bound {
            self.check(Check::new("gap_bound", curve.min_gap >= b, format!("min gap {} >= {b}", curve.min_gap)));
        }
        Ok(())
    }

    fn filter_check(&mut self) -> Result<()> {
        let fc = self.cfg.filter_check.clone();
        let f = &self.cfg.filter;
        let unit = FilterSpec::with_quadrature(1.0, f.mollifier_nodes, f.time_nodes, f.t_max_factor)?;
        let mut csv = String::from("omega,chi_hat\n");
        let n = fc.omega_points;
        let (mut plateau_ok, mut support_ok) = (true, true);
        for k in 0..n {
            let w = -1.5 + 3.0 * k as f64 / (n - 1) as f64;
            let v = unit.chi_hat(w);
            writeln!(csv, "{w},{v}").unwrap();
            if w.abs() <= 1.0 / 3.0 {
                plateau_ok &= v == 1.0;
            }
            if w.abs() >= 1.0 {
                support_ok &= v == 0.0;
            }
        }
        self.file("chi_hat", csv);
        self.check(Check::new(
            "chi_hat_origin",
            unit.chi_hat(0.0) == 1.0,
            format!("chi_hat(0) = {}", unit.chi_hat(0.0)),
        ));
        self.check(Check::new("plateau", plateau_ok, "chi_hat == 1 on |omega| <= gamma/3".into()));
        self.check(Check::new("support", support_ok, "chi_hat == 0 on |omega| >= gamma".into()));

        let q = unit.time_quadrature(1.0)?;
        let integral = q.chi_hat(0.0);
        self.derive("chi_integral", integral);
        self.check(Check::at_most("chi_integral", (integral - 1.0).abs(), self.cfg.tolerances.chi_integral));

        let grid = log_grid(fc.t_lo, fc.t_hi, fc.points);
        let mut csv = String::from("t,chi\n");
        for &t in &grid {
            writeln!(csv, "{t},{}", unit.chi_time(t)?).unwrap();
        }
        self.file("chi", csv);

        let constants = fit_decay_constants(&unit, &fc.orders, fc.t_lo, fc.t_hi, fc.points)?;
        let mut csv = String::from("j,gamma,c_j,max_ratio,pass\n");
        let mut all = true;
        for (&j, &c) in fc.orders.iter().zip(&constants) {
            self.derive(&format!("c_{j}"), c);
            for &g in &fc.gammas {
                let ratio = decay_envelope_ratio(&unit.with_gamma(g)?, j, c, fc.t_lo, fc.t_hi, fc.points)?;
                let pass = ratio <= 1.0 + 1e-9;
                all &= pass;
                writeln!(csv, "{j},{g},{c},{ratio},{pass}").unwrap();
            }
        }
        self.file("envelope", csv);
        self.check(Check::new("decay_envelope", all, format!("orders {:?} at gammas {:?}", fc.orders, fc.gammas)));
        Ok(())
    }

    fn projector_check(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let factor = self.cfg.projector.negative_factor;
        let mut csv = String::from(
            "s,gap,gamma,spectral_residual,leakage,quadrature_agreement,negative_gamma,negative_residual\n",
        );
        let (mut spectral, mut quad, mut negative) = (0.0f64, 0.0f64, f64::INFINITY);
        let q = spec.time_quadrature(self.h().spread_bound())?;
        for s in uniform_grid(self.cfg.gap.s_points) {
            let r = projector_filter_check(self.h(), s, &spec, Some(&q))?;
            let bad = spec.with_gamma(factor * r.gap)?;
            let n = projector_filter_check(self.h(), s, &bad, None)?;
            let qa = r.quadrature_agreement.unwrap_or(f64::NAN);
            writeln!(
                csv,
                "{s},{},{},{},{},{qa},{},{}",
                r.gap,
                r.gamma,
                r.spectral_residual,
                r.leakage,
                bad.gamma(),
                n.spectral_residual
            )
            .unwrap();
            spectral = spectral.max(r.spectral_residual);
            quad = quad.max(qa);
            negative = negative.min(n.spectral_residual);
        }
        self.file("", csv);
        let t = self.cfg.tolerances.clone();
        self.check(Check::at_most("spectral_residual", spectral, t.spectral_residual));
        self.check(Check::at_most("quadrature_agreement", quad, t.quadrature_agreement));
        self.check(Check::new(
            "negative_control",
            negative > t.negative_control_min,
            format!("{negative:e} > {:e}", t.negative_control_min),
        ));
        Ok(())
    }

    fn pt_check(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let mut csv = String::from("s,residual\n");
        let mut worst = 0.0f64;
        for &s in &self.cfg.pt.s_grid {
            let r = pt_generator_check(self.h(), s, &spec)?;
            writeln!(csv, "{s},{r}").unwrap();
            worst = worst.max(r);
        }
        self.file("", csv);
        self.check(Check::at_most("pt_residual", worst, self.cfg.tolerances.pt_residual));
        Ok(())
    }

    fn shell_decay(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let alpha_max = match self.cfg.shell.alpha_max {
            Some(a) => a,
            None => default_alpha_max(self.h())?,
        };
        let onset = match self.cfg.shell.onset {
            Some(a) => a,
            None => {
                let (v, kappa) = self.cone_fit()?;
                let c = v / (2.0 * kappa);
                self.derive("onset_constant", c);
                decay_onset(c, self.gap_bound()?)
            }
        };
        self.derive("onset", onset as f64);
        let mut curve = shell_decay_curve(self.h(), self.cfg.shell.s, &Site::ORIGIN, alpha_max, &spec)?;
        let from = onset.max(1) as f64;
        let monotone = strictly_decreasing(&curve.tail(from));
        self.check(Check::new("monotone_tail", monotone, format!("strictly decreasing for alpha >= {from}")));
        if curve.tail(from).len() >= 2 {
            let fit = curve.fit_power_law_tail(from)?;
            self.derive("tail_exponent", fit.exponent);
            let limit = self.cfg.tolerances.shell_exponent_max;
            self.check(Check::new("tail_exponent", fit.exponent <= limit, format!("{} <= {limit}", fit.exponent)));
        } else {
            self.check(Check::new("tail_exponent", false, format!("fewer than two points at alpha >= {from}")));
        }
        curve.params.insert("onset".into(), onset as f64);
        let csv = curve.to_csv(&self.curve_meta(&spec));
        self.file("", csv);
        Ok(())
    }

    fn curve_meta(&self, spec: &FilterSpec) -> Vec<(&'static str, String)> {
        vec![("lambda", self.model.lambda.to_string()), ("gamma", spec.gamma().to_string())]
    }

    fn summability(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let c = self.cfg.summability.clone();
        let alpha_max = match c.alpha_max {
            Some(a) => a,
            None => default_alpha_max(self.h())?,
        };
        let curve = shell_decay_curve(self.h(), c.s, &Site::ORIGIN, alpha_max, &spec)?;
        let eta = self.h().lattice().dim();
        let r = summability_from_norms(&curve.values(), eta, spec.gamma(), c.l)?;
        let mut csv = String::from("alpha,norm,weight,partial_sum\n");
        for (a, ((n, w), p)) in r.norms.iter().zip(&r.weights).zip(&r.partial_sums).enumerate() {
            writeln!(csv, "{a},{n},{w},{p}").unwrap();
        }
        self.file("", csv);
        self.derive("weighted_sum", r.sum);
        self.derive("relative_change", r.relative_change);
        self.derive("c_l", r.c_l);
        self.derive("sigma_l", r.sigma_l);
        self.derive("s1_bound", r.s1_bound);
        self.check(Check::at_most("partial_sum_change", r.relative_change, self.cfg.tolerances.summability_change));
        Ok(())
    }

    fn lr_cone(&mut self) -> Result<()> {
        let report = self.cone()?;
        self.file("", report.to_csv());
        let zero_ok = report.values.iter().filter(|(t, d, _)| *t == 0.0 && *d > 0).all(|(_, _, v)| *v <= 1e-12);
        let cap_ok = report.values.iter().all(|(_, _, v)| *v <= 2.0 + 1e-12);
        self.check(Check::new("zero_at_t0", zero_ok, "disjoint supports commute at t = 0".into()));
        self.check(Check::new("norm_cap", cap_ok, "all values <= 2".into()));
        let t = self.cfg.tolerances.clone();
        match report.fit {
            Some(f) => {
                self.check(Check::at_most("fit_rms", f.rms, t.cone_rms));
                let coupling = self.coupling_scale(self.cfg.cone.s)?;
                self.derive("coupling_scale", coupling);
                let ratio = f.b / coupling;
                let ok = ratio >= 1.0 / t.cone_rate_factor && ratio <= t.cone_rate_factor;
                self.check(Check::new("rate_scale", ok, format!("kappa / J = {ratio}")));
            }
            None => self.check(Check::new("fit_rms", false, "no fit".into())),
        }
        Ok(())
    }

    /// `max_j ‖h_j(s)‖`.
    fn coupling_scale(&self, s: f64) -> Result<f64> {
        let h = self.h();
        let mut best = 0.0f64;
        for j in h.lattice().sites().iter() {
            let term = h.term(j, s)?;
            best = best.max(term.embed(&term.support())?.op_norm()?);
        }
        Ok(best)
    }

    fn boundary_diff(&mut self) -> Result<()> {
        let b = self.cfg.boundary.clone();
        let alpha_max = match b.alpha_max {
            Some(a) => a,
            None => default_alpha_max(self.h())?,
        };
        let radius = match b.cone_radius {
            Some(r) => r,
            None => {
                let (v, kappa) = self.cone_fit()?;
                (kappa * b.t / v).ceil() as usize
            }
        };
        self.derive("cone_radius", radius as f64);
        let a = LocalOperator::single(Site::ORIGIN, parse_axis("observable.axis", &self.cfg.observable.axis)?);
        let alphas: Vec<usize> = (1..=alpha_max).collect();
        let mut curve = boundary_difference_scan(self.h(), b.s, &a, &alphas, b.t)?;
        let tail = curve.tail(radius as f64 + 1.0);
        let ok = tail.len() >= 2 && strictly_decreasing(&tail);
        self.check(Check::new("decreasing_beyond_cone", ok, format!("strictly decreasing for alpha > {radius}")));
        curve.params.insert("t".into(), b.t);
        curve.params.insert("cone_radius".into(), radius as f64);
        let csv = curve.to_csv(&[("lambda", self.model.lambda.to_string())]);
        self.file("", csv);
        Ok(())
    }

    fn evolve_expectation(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let cfg = self.cfg.evolution_config()?;
        let (alpha, beta) = (self.cfg.evolution.alpha, self.cfg.beta());
        let (mut report, traj) = truncated_expectation(
            self.h(),
            &spec,
            alpha,
            beta,
            &self.model.center,
            &cfg,
            &self.model.observable,
            &ProductState::all_up(),
        )?;
        let oracle = self.cfg.evolution.oracle && self.h().lattice().num_sites() <= MAX_ORACLE_SITES;
        if oracle {
            for row in &mut report.rows {
                row.oracle = Some(exact_expectation(self.h(), row.s, &self.model.observable)?);
            }
        }
        self.file("", report.to_csv());
        self.derive("window_sites", traj.window().len() as f64);
        self.derive("max_unitarity_defect", traj.max_defect());
        self.derive("repairs", traj.repairs as f64);
        if let Some(c) = traj.halving_change {
            self.derive("halving_change", c);
        }
        if let Some(e) = report.max_error() {
            self.derive("max_abs_error", e);
            self.check(Check::at_most("expectation_error", e, self.cfg.tolerances.epsilon));
        }
        Ok(())
    }

    fn truncation_error(&mut self) -> Result<()> {
        let spec = self.spec()?;
        let t = self.cfg.truncation.clone();
        let vary = self.cfg.truncation_abscissa()?;
        let curve = truncation_error_curve(
            self.h(),
            &spec,
            &self.model.observable,
            &self.model.center,
            t.s,
            self.cfg.evolution.ds,
            vary,
            &t.radii,
            t.alpha_ref,
            t.beta_ref,
        )?;
        let n = curve.points.len();
        let last = &curve.points[n.saturating_sub(3)..];
        let ok = last.len() == 3 && strictly_decreasing(last);
        self.check(Check::new("decreasing_last_three", ok, format!("{last:?}")));
        let mut meta = self.curve_meta(&spec);
        meta.push(("alpha_ref", t.alpha_ref.to_string()));
        meta.push(("beta_ref", t.beta_ref.to_string()));
        meta.push(("ds", self.cfg.evolution.ds.to_string()));
        self.file("", curve.to_csv(&meta));
        Ok(())
    }

    fn exact_transport(&mut self) -> Result<()> {
        let steps = self.cfg.transport.steps;
        let coarse = exact_adiabatic_transport(self.h(), steps)?;
        let fine = exact_adiabatic_transport(self.h(), 2 * steps)?;
        self.file("", coarse.to_csv());
        self.file("half", fine.to_csv());
        let t = self.cfg.tolerances.clone();
        let ratio = coarse.max_error() / fine.max_error();
        self.derive("max_error", coarse.max_error());
        self.derive("max_error_half", fine.max_error());
        self.derive("refinement_ratio", ratio);
        self.check(Check::at_most("transport_error", coarse.max_error(), t.transport_error));
        self.check(Check::new(
            "second_order",
            ratio >= t.refinement_ratio_min && ratio <= t.refinement_ratio_max,
            format!("ratio {ratio} in [{}, {}]", t.refinement_ratio_min, t.refinement_ratio_max),
        ));
        Ok(())
    }
}

/// Runs an experiment in memory. `base` resolves relative input paths.
pub fn execute(experiment: Experiment, cfg: &RunConfig, base: &Path) -> Result<Outcome> {
    cfg.validate()?;
    if let Some(name) = &cfg.experiment {
        if name != experiment.name() {
            return Err(config_err(format!(
                "config names experiment `{name}` but `{}` was requested",
                experiment.name()
            )));
        }
    }
    let model = resolve_model(cfg, base)?;
    let mut r = Runner { cfg, model, gap_bound: None, out: Outcome::default(), prefix: experiment.name() };
    r.derive("lambda", r.model.lambda);
    r.derive("dim", r.model.h.lattice().dim() as f64);
    r.derive("m", r.model.h.lattice().extent() as f64);
    match experiment {
        Experiment::GapScan => r.gap_scan(),
        Experiment::FilterCheck => r.filter_check(),
        Experiment::ProjectorCheck => r.projector_check(),
        Experiment::PtCheck => r.pt_check(),
        Experiment::ShellDecay => r.shell_decay(),
        Experiment::Summability => r.summability(),
        Experiment::LrCone => r.lr_cone(),
        Experiment::BoundaryDiff => r.boundary_diff(),
        Experiment::EvolveExpectation => r.evolve_expectation(),
        Experiment::TruncationError => r.truncation_error(),
        Experiment::ExactTransport => r.exact_transport(),
    }?;
    if let Some((_, source)) = r.gap_bound {
        r.out.notes.insert("gap_bound_source".into(), source.into());
    }
    Ok(r.out)
}

/// One differing cell of a fixture comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureDiff {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub actual: String,
    /// `|a − b|`, or infinity for non-numeric or structural mismatches.
    pub diff: f64,
}

/// Result of comparing one or more files against stored fixtures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureReport {
    pub files: usize,
    pub diffs: Vec<FixtureDiff>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.diffs.is_empty()
    }

    /// The largest differences first.
    pub fn worst(&self, n: usize) -> Vec<&FixtureDiff> {
        let mut v: Vec<&FixtureDiff> = self.diffs.iter().collect();
        v.sort_by(|a, b| b.diff.total_cmp(&a.diff));
        v.truncate(n);
        v
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{} file(s) compared, {} mismatch(es)\n", self.files, self.diffs.len());
        for d in self.worst(10) {
            writeln!(
                out,
                "  {}:{}:{} expected `{}` got `{}` (diff {:e})",
                d.file, d.line, d.column, d.expected, d.actual, d.diff
            )
            .unwrap();
        }
        out
    }
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect()
}

fn cells_match(a: &str, b: &str) -> (bool, f64) {
    if a == b {
        return (true, 0.0);
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => {
            let d = (x - y).abs();
            (d <= FIXTURE_TOL * y.abs().max(1.0), d)
        }
        _ => (false, f64::INFINITY),
    }
}

/// Compares CSV `actual` against `expected` cell by cell. Numeric cells must
/// agree within `1e-9` (relative above magnitude 1); other cells exactly.
pub fn compare_text(name: &str, expected: &str, actual: &str) -> Vec<FixtureDiff> {
    let mut diffs = Vec::new();
    let (el, al): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), actual.lines().collect());
    for line in 0..el.len().max(al.len()) {
        let (e, a) = (el.get(line).copied().unwrap_or(""), al.get(line).copied().unwrap_or(""));
        let (et, at) = (tokens(e), tokens(a));
        for col in 0..et.len().max(at.len()) {
            let (x, y) = (et.get(col).copied().unwrap_or("<missing>"), at.get(col).copied().unwrap_or("<missing>"));
            let (ok, diff) = cells_match(y, x);
            if !ok {
                diffs.push(FixtureDiff {
                    file: name.into(),
                    line: line + 1,
                    column: col + 1,
                    expected: x.into(),
                    actual: y.into(),
                    diff,
                });
            }
        }
    }
    diffs
}

/// Compares `actual` against the fixture stored at `path`.
pub fn compare_fixture(path: &Path, actual: &str) -> Result<FixtureReport> {
    let expected = std::fs::read_to_string(path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(FixtureReport { files: 1, diffs: compare_text(&name, &expected, actual) })
}

/// Command-line options beyond the experiment and config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub write_fixtures: bool,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub outcome: Outcome,
    pub fixtures: Option<FixtureReport>,
}

fn output_dir(cfg: &RunConfig, base: &Path, opts: &RunOptions) -> PathBuf {
    if let Some(p) = &opts.out {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    match &cfg.output.dir {
        Some(p) => resolve_path(base, p),
        None => PathBuf::from("out"),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: ManifestRun<'a>,
    derived: &'a BTreeMap<String, f64>,
    notes: &'a BTreeMap<String, String>,
    checks: &'a [Check],
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observable_text: Option<&'a str>,
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    experiment: &'a str,
    tool: &'a str,
    version: &'a str,
    status: String,
    exit_code: i32,
    wall_time_s: f64,
    files: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    dir: &Path,
    experiment: Experiment,
    cfg: &RunConfig,
    base: &Path,
    outcome: &Outcome,
    status: String,
    exit_code: i32,
    wall: f64,
) -> Result<()> {
    let model = resolve_model(cfg, base).ok();
    let manifest = Manifest {
        run: ManifestRun {
            experiment: experiment.name(),
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            status,
            exit_code,
            wall_time_s: wall,
            files: outcome.files.iter().map(|(n, _)| n.clone()).collect(),
        },
        derived: &outcome.derived,
        notes: &outcome.notes,
        checks: &outcome.checks,
        config: cfg,
        model_text: model.as_ref().and_then(|m| m.model_text.as_deref()),
        observable_text: model.as_ref().and_then(|m| m.observable_text.as_deref()),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    std::fs::write(dir.join(format!("{}.manifest.toml", experiment.name())), text)?;
    Ok(())
}

/// Runs an experiment, writes CSVs and the manifest, and handles fixtures.
pub fn run_config(experiment: Experiment, cfg: &RunConfig, base: &Path, opts: &RunOptions) -> Result<RunSummary> {
    if opts.write_fixtures && opts.fixtures.is_none() {
        return Err(config_err("--write-fixtures requires --fixtures DIR"));
    }
    cfg.validate()?;
    let dir = output_dir(cfg, base, opts);
    std::fs::create_dir_all(&dir)?;
    let start = Instant::now();
    let outcome = match execute(experiment, cfg, base) {
        Ok(o) => o,
        Err(e) => {
            let code = e.exit_code();
            write_manifest(
                &dir,
                experiment,
                cfg,
                base,
                &Outcome::default(),
                format!("error: {e}"),
                code,
                start.elapsed().as_secs_f64(),
            )?;
            return Err(e);
        }
    };
    for (name, content) in &outcome.files {
        std::fs::write(dir.join(name), content)?;
    }
    let fixtures = match &opts.fixtures {
        Some(fdir) => {
            if opts.write_fixtures {
                std::fs::create_dir_all(fdir)?;
                for (name, content) in &outcome.files {
                    std::fs::write(fdir.join(name), content)?;
                }
            }
            let mut report = FixtureReport::default();
            for (name, content) in &outcome.files {
                let r = compare_fixture(&fdir.join(name), content)?;
                report.files += r.files;
                report.diffs.extend(r.diffs);
            }
            Some(report)
        }
        None => None,
    };
    let fixtures_ok = fixtures.as_ref().is_none_or(|f| f.passed());
    let exit_code = if outcome.passed() && fixtures_ok { exit::OK } else { exit::CHECK_FAILED };
    let status = match (outcome.passed(), fixtures_ok) {
        (true, true) => "pass".to_string(),
        (false, _) => "check failed".to_string(),
        (true, false) => "fixture mismatch".to_string(),
    };
    write_manifest(&dir, experiment, cfg, base, &outcome, status, exit_code, start.elapsed().as_secs_f64())?;
    Ok(RunSummary { exit_code, out_dir: dir, outcome, fixtures })
}

/// Loads `config_path` and runs `experiment`.
pub fn run(experiment: &str, config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let experiment: Experiment = experiment.parse()?;
    let cfg = RunConfig::load(config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    run_config(experiment, &cfg, &base, opts)
}

/// Human-readable report of a finished run.
pub fn report(summary: &RunSummary) -> String {
    let mut out = String::new();
    for c in &summary.outcome.checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    for (k, v) in &summary.outcome.derived {
        writeln!(out, "{k} = {v}").unwrap();
    }
    for (k, v) in &summary.outcome.notes {
        writeln!(out, "{k} = {v}").unwrap();
    }
    if let Some(f) = &summary.fixtures {
        out.push_str(&f.summary());
    }
    writeln!(out, "output: {}", summary.out_dir.display()).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!(matches!("gapscan".parse::<Experiment>(), Err(Error::Config(_))));
    }

    #[test]
    fn dotted_keys_and_tables_parse_alike() {
        let a = RunConfig::parse("model.m = 6\nmodel.lambda = 0.2\nfilter.gamma = 0.7\n").unwrap();
        let b = RunConfig::parse("[model]\nm = 6\nlambda = 0.2\n[filter]\ngamma = 0.7\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.model.m, Some(6));
        assert_eq!(a.filter.gamma, GammaSetting::Value(0.7));
        assert_eq!(RunConfig::parse("").unwrap().filter.gamma, GammaSetting::Keyword("auto".into()));
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        for text in [
            "model.lamda = 0.2",
            "modle.m = 4",
            "filter.gamma = \"half\"",
            "filter.gamma = -1.0",
            "evolution.ds = 0.0",
            "evolution.s_grid = [0.5, 1.0]",
            "observable.axis = \"Q\"",
            "truncation.vary = \"gamma\"",
            "model.file = \"m.txt\"\nmodel.m = 4",
            "cone.s = 1.5",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn fixture_comparison_locates_differences() {
        let a = "# gamma = 0.5\nx,value\n1,0.25\n2,0.125\n";
        assert!(compare_text("f", a, a).is_empty());
        let near = "# gamma = 0.5\nx,value\n1,0.2500000000001\n2,0.125\n";
        assert!(compare_text("f", a, near).is_empty());
        let far = "# gamma = 0.5\nx,value\n1,0.25\n2,0.126\n";
        let d = compare_text("f", a, far);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].line, d[0].column), (4, 2));
        assert!((d[0].diff - 1e-3).abs() < 1e-12);
        assert!(compare_text("f", a, "x,value\n").iter().any(|d| d.diff.is_infinite()));
    }

    #[test]
    fn gap_scan_reports_unperturbed_gap() {
        let cfg = RunConfig::parse("model.m = 6\nmodel.lambda = 0.0\n").unwrap();
        let out = execute(Experiment::GapScan, &cfg, Path::new(".")).unwrap();
        assert_eq!(out.derived["min_gap"], 2.0);
        assert!(out.passed());
    }

    #[test]
    fn configured_gap_bound_violation_is_an_assumption_error() {
        let cfg = RunConfig::parse("model.m = 6\nmodel.lambda = 0.3\ngap.bound = 1.9\n").unwrap();
        let err = execute(Experiment::GapScan, &cfg, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), exit::ASSUMPTION);
    }

    #[test]
    fn gamma_above_gap_is_rejected() {
        let cfg = RunConfig::parse("model.m = 4\nfilter.gamma = 3.0\ngap.bound = 1.5\n").unwrap();
        let err = execute(Experiment::PtCheck, &cfg, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), exit::ASSUMPTION);
    }

    #[test]
    fn oversized_lattice_hits_the_window_cap() {
        let cfg = RunConfig::parse("model.m = 14\n").unwrap();
        let err = execute(Experiment::ExactTransport, &cfg, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), exit::WINDOW_CAP);
    }

    #[test]
    fn default_alpha_max_avoids_wrapping() {
        let h = |m| ParamHamiltonian::perturbed_classical(Lattice::chain(m).unwrap(), 0.1);
        assert_eq!(default_alpha_max(&h(10)).unwrap(), 4);
        assert_eq!(default_alpha_max(&h(8)).unwrap(), 3);
        assert!(default_alpha_max(&h(3)).is_err());
    }
}
