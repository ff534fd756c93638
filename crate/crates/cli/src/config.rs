//! Scenario configuration: JSON file, `--set` overrides, and resolution into library objects.

use std::path::Path;

use matscat::bc::{validate_bc, BcTolerances, BoundaryPair, ValidationReport};
use matscat::linalg::{c, CMat};
use matscat::ode::OdeOptions;
use matscat::potential::{Builtin, PotentialModel, PotentialSpec, DEFAULT_TRUNCATION_MASS};
use matscat::spectral::{BoundStateOptions, KappaRange, LevinsonOptions, TraceOptions};
use matscat::transforms::{DeflationOptions, ResolventOptions, SpectralParameter};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

/// `{min, max, count, spacing}` describing a sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

/// A grid as written in the config; omitted fields take the command's default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeInput {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
}

impl RangeInput {
    pub fn over(&self, default: RangeSpec) -> RangeSpec {
        RangeSpec {
            min: self.min.unwrap_or(default.min),
            max: self.max.unwrap_or(default.max),
            count: self.count.unwrap_or(default.count),
            spacing: self.spacing.unwrap_or(default.spacing),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl RangeSpec {
    pub const fn linear(min: f64, max: f64, count: usize) -> Self {
        RangeSpec { min, max, count, spacing: Spacing::Linear }
    }

    pub const fn log(min: f64, max: f64, count: usize) -> Self {
        RangeSpec { min, max, count, spacing: Spacing::Log }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::config(field, m));
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return bad(format!("need finite min < max, got [{}, {}]", self.min, self.max));
        }
        if self.count < 2 {
            return bad(format!("count must be at least 2, got {}", self.count));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return bad("log spacing needs min > 0".into());
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.count - 1;
        let lerp = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / n as f64;
        (0..=n)
            .map(|i| match (i, self.spacing) {
                (0, _) => self.min,
                (i, _) if i == n => self.max,
                (_, Spacing::Linear) => lerp(self.min, self.max, i),
                (_, Spacing::Log) => lerp(self.min.ln(), self.max.ln(), i).exp(),
            })
            .collect()
    }
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// Row-major matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(transparent)]
pub struct MatrixInput(Vec<Vec<Entry>>);

impl MatrixInput {
    fn to_matrix(&self, field: &str) -> Result<CMat, CliError> {
        let n = self.0.len();
        if n == 0 || self.0.iter().any(|r| r.len() != self.0[0].len()) {
            return Err(CliError::config(field, "matrix rows must be non-empty and of equal length"));
        }
        Ok(CMat::from_fn(n, self.0[0].len(), |i, j| match self.0[i][j] {
            Entry::Real(x) => c(x, 0.0),
            Entry::Complex([re, im]) => c(re, im),
        }))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcObject {
    /// `Ã = −diag(sin θ)`, `B̃ = diag(cos θ)`.
    Diagonal { thetas: Vec<f64> },
    Matrices { a: MatrixInput, b: MatrixInput },
    Normal { m: MatrixInput, thetas: Vec<f64>, t: MatrixInput },
}

/// `"dirichlet" | "neumann" | "kirchhoff"` or a [`BcObject`].
#[derive(Debug, Clone)]
pub enum BcInput {
    Named(String),
    Object(BcObject),
}

impl<'de> Deserialize<'de> for BcInput {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => Ok(BcInput::Named(s)),
            v => serde_json::from_value(v).map(BcInput::Object).map_err(serde::de::Error::custom),
        }
    }
}

impl Default for BcInput {
    fn default() -> Self {
        BcInput::Named("dirichlet".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TabulatedPotential {
    Piecewise { breakpoints: Vec<f64>, values: Vec<MatrixInput> },
    Sampled { grid: Vec<f64>, values: Vec<MatrixInput> },
}

/// `"zero"`, a builtin family such as `{"family": "square_well", "depth": 2}`, or tabulated data.
#[derive(Debug, Clone)]
pub enum PotentialInput {
    Zero,
    Builtin(Builtin),
    Tabulated(TabulatedPotential),
}

impl<'de> Deserialize<'de> for PotentialInput {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::String(s) if s == "zero" => Ok(PotentialInput::Zero),
            Value::String(s) => Err(serde::de::Error::custom(format!("unknown potential \"{s}\""))),
            _ => {
                let family = v.get("family").and_then(Value::as_str).unwrap_or_default();
                if matches!(family, "piecewise" | "sampled") {
                    serde_json::from_value(v).map(PotentialInput::Tabulated).map_err(serde::de::Error::custom)
                } else {
                    serde_json::from_value(v).map(PotentialInput::Builtin).map_err(serde::de::Error::custom)
                }
            }
        }
    }
}

impl Default for PotentialInput {
    fn default() -> Self {
        PotentialInput::Zero
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeInput {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeInput {
    fn default() -> Self {
        let d = OdeOptions::default();
        OdeInput { rtol: d.rtol, atol: d.atol, max_steps: d.max_steps }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ode: OdeInput,
    pub bc: BcTolerances,
    pub bound: BoundStateOptions,
    pub levinson: LevinsonOptions,
    pub trace: TraceOptions,
    pub resolvent: ResolventOptions,
    pub deflation: DeflationOptions,
}

/// Test functions and quadrature for `transforms-check`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSettings {
    /// Gaussian `ψ(x)` on the x side.
    pub psi_center: f64,
    pub psi_width: f64,
    pub x_max: f64,
    pub x_step: f64,
    /// Gauss–Legendre rule on `[0, k_max]` for Parseval.
    pub k_max: f64,
    pub k_panels: usize,
    /// Gaussian `φ(k)` on `[k_lo, k_hi]` for the scattering-operator check.
    pub phi_center: f64,
    pub phi_width: f64,
    pub k_lo: f64,
    pub k_hi: f64,
}

impl Default for TransformSettings {
    fn default() -> Self {
        TransformSettings {
            psi_center: 2.0,
            psi_width: 0.4,
            x_max: 30.0,
            x_step: 2e-3,
            k_max: 40.0,
            k_panels: 80,
            phi_center: 2.75,
            phi_width: 0.4,
            k_lo: 0.5,
            k_hi: 5.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// The raw scenario as written in JSON.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Channel count; inferred from matrices when omitted.
    pub n: Option<usize>,
    pub bc: BcInput,
    pub potential: PotentialInput,
    pub truncation_mass: Option<f64>,
    pub k_grid: Option<RangeInput>,
    pub e_grid: Option<RangeInput>,
    pub x_grid: Option<RangeInput>,
    pub kappa_range: Option<KappaRange>,
    pub z: Option<SpectralParameter>,
    /// `f(E) = 1/(E + trace_shift)` in `trace-check`.
    pub trace_shift: Option<f64>,
    pub transforms: TransformSettings,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

/// Reads the config file (or `{}`), applies `--set` overrides and deserialises.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", p.display())))?,
        None => "{}".to_string(),
    };
    let mut root = serde_json::from_str::<Value>(&text)
        .map_err(|e| CliError::Config { field: None, line: Some(e.line()), message: e.to_string() })?;
    let typed = |e: serde_path_to_error::Error<serde_json::Error>| {
        let field = Some(e.path().to_string());
        let inner = e.into_inner();
        let line = (inner.line() > 0).then(|| inner.line());
        CliError::Config { field, line, message: inner.to_string() }
    };
    if sets.is_empty() {
        // straight from the text, so type errors keep their line
        return serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(&text)).map_err(typed);
    }
    for s in sets {
        apply_set(&mut root, s)?;
    }
    serde_path_to_error::deserialize(root).map_err(typed)
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a plain string.
fn apply_set(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config("--set", format!("expected KEY=VALUE, got \"{assignment}\"")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config("--set", format!("empty path segment in \"{key}\"")));
    }
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node.as_object_mut().unwrap().entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    node.as_object_mut().unwrap().insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Everything a command needs, with the library objects built and validated.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub n: usize,
    /// Raw `(A, B)`, available even when they do not form a valid condition.
    pub raw_bc: (CMat, CMat),
    pub potential: PotentialSpec,
    pub ode: OdeOptions,
}

impl Scenario {
    pub fn resolve(config: ScenarioConfig) -> Result<Self, CliError> {
        let n = infer_channels(&config)?;
        let raw_bc = raw_pair(&config.bc, n)?;
        let potential = build_potential(&config, n)?;
        let o = config.tolerances.ode;
        let ode = OdeOptions { rtol: o.rtol, atol: o.atol, max_steps: o.max_steps };
        Ok(Scenario { config, n, raw_bc, potential, ode })
    }

    pub fn validation(&self) -> Result<ValidationReport, CliError> {
        Ok(validate_bc(&self.raw_bc.0, &self.raw_bc.1, &self.config.tolerances.bc).map_err(matscat::Error::from)?)
    }

    pub fn boundary(&self) -> Result<BoundaryPair, CliError> {
        let (a, b) = self.raw_bc.clone();
        Ok(BoundaryPair::with_tolerances(a, b, &self.config.tolerances.bc).map_err(matscat::Error::from)?)
    }

    pub fn grid(&self, field: &str, range: Option<RangeInput>, default: RangeSpec) -> Result<Vec<f64>, CliError> {
        let r = range.unwrap_or_default().over(default);
        r.check(field)?;
        Ok(r.points())
    }

    pub fn bound_options(&self) -> BoundStateOptions {
        BoundStateOptions { ode: self.ode, ..self.config.tolerances.bound }
    }
}

fn matrix_dims(config: &ScenarioConfig) -> Vec<(String, usize)> {
    let mut dims = Vec::new();
    match &config.bc {
        BcInput::Object(BcObject::Diagonal { thetas }) => dims.push(("bc.thetas".into(), thetas.len())),
        BcInput::Object(BcObject::Matrices { a, .. }) => dims.push(("bc.a".into(), a.0.len())),
        BcInput::Object(BcObject::Normal { thetas, .. }) => dims.push(("bc.thetas".into(), thetas.len())),
        BcInput::Named(_) => {}
    }
    match &config.potential {
        PotentialInput::Builtin(Builtin::CoupledWell { depths: Some(d), .. }) => {
            dims.push(("potential.depths".into(), d.len()))
        }
        PotentialInput::Tabulated(TabulatedPotential::Piecewise { values, .. })
        | PotentialInput::Tabulated(TabulatedPotential::Sampled { values, .. }) => {
            if let Some(v) = values.first() {
                dims.push(("potential.values".into(), v.0.len()));
            }
        }
        _ => {}
    }
    dims
}

fn infer_channels(config: &ScenarioConfig) -> Result<usize, CliError> {
    let dims = matrix_dims(config);
    let n = config.n.or_else(|| dims.first().map(|d| d.1)).unwrap_or(1);
    if n == 0 {
        return Err(CliError::config("n", "channel count must be positive"));
    }
    if let Some((field, m)) = dims.into_iter().find(|d| d.1 != n) {
        return Err(CliError::config(&field, format!("has {m} channels, expected {n}")));
    }
    Ok(n)
}

fn raw_pair(bc: &BcInput, n: usize) -> Result<(CMat, CMat), CliError> {
    let bp = match bc {
        BcInput::Named(name) => match name.as_str() {
            "dirichlet" => BoundaryPair::dirichlet(n),
            "neumann" => BoundaryPair::neumann(n),
            "kirchhoff" => BoundaryPair::kirchhoff(n),
            other => return Err(CliError::config("bc", format!("unknown boundary condition \"{other}\""))),
        },
        BcInput::Object(BcObject::Diagonal { thetas }) => BoundaryPair::diagonal(thetas),
        BcInput::Object(BcObject::Matrices { a, b }) => return Ok((a.to_matrix("bc.a")?, b.to_matrix("bc.b")?)),
        BcInput::Object(BcObject::Normal { m, thetas, t }) => {
            BoundaryPair::from_normal_data(&m.to_matrix("bc.m")?, thetas, &t.to_matrix("bc.t")?)
                .map_err(matscat::Error::from)?
        }
    };
    Ok((bp.a().clone(), bp.b().clone()))
}

fn build_potential(config: &ScenarioConfig, n: usize) -> Result<PotentialSpec, CliError> {
    let model = match &config.potential {
        PotentialInput::Zero => PotentialModel::PiecewiseConstant { breakpoints: vec![], values: vec![] },
        PotentialInput::Builtin(b) => PotentialModel::Builtin(b.clone()),
        PotentialInput::Tabulated(TabulatedPotential::Piecewise { breakpoints, values }) => {
            PotentialModel::PiecewiseConstant { breakpoints: breakpoints.clone(), values: matrices(values)? }
        }
        PotentialInput::Tabulated(TabulatedPotential::Sampled { grid, values }) => {
            PotentialModel::Sampled { grid: grid.clone(), values: matrices(values)? }
        }
    };
    let mass = config.truncation_mass.unwrap_or(DEFAULT_TRUNCATION_MASS);
    Ok(PotentialSpec::with_truncation(n, model, mass).map_err(matscat::Error::from)?)
}

fn matrices(values: &[MatrixInput]) -> Result<Vec<CMat>, CliError> {
    values.iter().map(|m| m.to_matrix("potential.values")).collect()
}
