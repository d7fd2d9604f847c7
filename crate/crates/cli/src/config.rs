//! Experiment configuration: TOML schema, defaults and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ssf_core::convergence::{ScanSettings, TestFunction};
use ssf_core::numerics::ode::Dopri5;
use ssf_core::solutions::{BoundaryCondition, SolverOptions};
use ssf_core::ssf::EpsilonPolicy;
use ssf_core::{Interpolation, Potential};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Zero,
    SquareWell {
        depth: f64,
        width: f64,
    },
    Exponential {
        amplitude: f64,
        rate: f64,
    },
    GaussianBump {
        height: f64,
        center: f64,
        width: f64,
    },
    /// Samples `x,v` per line; relative paths are resolved against the config file.
    Csv {
        path: PathBuf,
        #[serde(default)]
        interpolation: InterpolationSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationSpec {
    #[default]
    Linear,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySpec {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec { alpha: 0.0, beta: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    pub r_values: Vec<f64>,
    pub halfline: bool,
    /// Dirichlet splitting points [R₁, R₂] for `decompose`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<[f64; 2]>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            r_values: Vec::new(),
            halfline: true,
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaSpec {
    /// Grid start; defaults to one below the operator lower bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    pub max: f64,
    pub step: f64,
    pub fine_step: f64,
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec {
            min: None,
            max: 200.0,
            step: 0.05,
            fine_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeterminantSpec {
    /// Spectral parameters as [re, im] pairs.
    pub z: Vec<[f64; 2]>,
    pub nystrom_nodes: usize,
}

impl Default for DeterminantSpec {
    fn default() -> Self {
        DeterminantSpec {
            z: vec![[-1.0, 0.0], [-4.0, 0.0], [2.0, 0.5]],
            nystrom_nodes: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSpec {
    pub mass_intervals: Vec<[f64; 2]>,
    pub sup_window: [f64; 2],
    pub z_ref: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        let s = ScanSettings::default();
        ScanSpec {
            mass_intervals: s.mass_intervals,
            sup_window: s.sup_window,
            z_ref: s.z_ref,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSpec {
    pub rank_one_dim: usize,
    pub rank_one_trials: usize,
    /// Relative agreement of the Wronskian and extrapolated Nyström determinants.
    pub det_tolerance: f64,
    /// z for the trace-formula check; defaults to four below the lower bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_z: Option<f64>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            rank_one_dim: 50,
            rank_one_trials: 1000,
            det_tolerance: 1e-5,
            trace_z: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub ode_rtol: f64,
    pub ode_atol: f64,
    /// ∫_X^∞ |V| below which the potential is cut for Jost seeding.
    pub tail: f64,
    pub epsilon: f64,
    pub richardson: bool,
    /// Certified tail bound allowed for weighted integrals.
    pub weighted_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let ode = Dopri5::default();
        Tolerances {
            ode_rtol: ode.rtol,
            ode_atol: ode.atol,
            tail: SolverOptions::default().tail_tol,
            epsilon: EpsilonPolicy::default().factor,
            richardson: true,
            weighted_tail: ssf_core::convergence::TAIL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub determinant: DeterminantSpec,
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_test_functions() -> Vec<TestFunction> {
    vec![TestFunction::one()]
}

/// Config with the potential built and paths resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub potential: Potential,
    pub alpha: BoundaryCondition,
    pub beta: BoundaryCondition,
    pub opts: SolverOptions,
    pub eps: EpsilonPolicy,
}

impl Resolved {
    pub fn scan_settings(&self) -> ScanSettings {
        let c = &self.config;
        ScanSettings {
            test_functions: c.test_functions.clone(),
            mass_intervals: c.scan.mass_intervals.clone(),
            sup_window: c.scan.sup_window,
            z_ref: c.scan.z_ref,
            lambda_max: c.lambda.max,
            coarse_step: c.lambda.step,
            fine_step: c.lambda.fine_step,
            epsilon: self.eps,
            tail_tol: c.tolerances.weighted_tail,
        }
    }

    /// The resolved configuration as TOML.
    pub fn echo(&self) -> Result<String, CliError> {
        toml::to_string(&self.config).map_err(|e| CliError::Config(vec![format!("cannot echo config: {e}")]))
    }
}

/// Parses TOML text, rejecting unknown keys (all of them listed).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let mut unknown = Vec::new();
    let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| CliError::Config(vec![e.to_string()]))?;
    if !unknown.is_empty() {
        return Err(CliError::UnknownKeys(unknown));
    }
    Ok(cfg)
}

/// Reads, validates and resolves a config file.
pub fn load_config(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    resolve(cfg, path.parent().unwrap_or(Path::new(".")))
}

fn positive(errors: &mut Vec<String>, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{field}: must be positive and finite, got {v}"));
    }
}

fn angle(errors: &mut Vec<String>, field: &str, v: f64) -> BoundaryCondition {
    match BoundaryCondition::new(v) {
        Ok(b) => b,
        Err(_) => {
            errors.push(format!("{field}: angle {v} outside [0, π) = [0, {PI})"));
            BoundaryCondition::DIRICHLET
        }
    }
}

/// Validates every field and builds the potential.
pub fn resolve(mut cfg: ExperimentConfig, base: &Path) -> Result<Resolved, CliError> {
    let mut errors = Vec::new();
    let alpha = angle(&mut errors, "boundary.alpha", cfg.boundary.alpha);
    let beta = angle(&mut errors, "boundary.beta", cfg.boundary.beta);

    let g = &cfg.geometry;
    for (k, &r) in g.r_values.iter().enumerate() {
        positive(&mut errors, &format!("geometry.r_values[{k}]"), r);
    }
    if g.r_values.windows(2).any(|p| !(p[1] > p[0])) {
        errors.push("geometry.r_values: must be strictly increasing".into());
    }
    if let Some([r1, r2]) = g.split {
        if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
            errors.push(format!("geometry.split: need 0 < R1 < R2, got [{r1}, {r2}]"));
        }
    }

    let l = &cfg.lambda;
    positive(&mut errors, "lambda.step", l.step);
    positive(&mut errors, "lambda.fine_step", l.fine_step);
    if let Some(min) = l.min {
        if !(min.is_finite() && min < l.max) {
            errors.push(format!("lambda.min: must be finite and below lambda.max, got {min}"));
        }
    }
    if !l.max.is_finite() {
        errors.push("lambda.max: must be finite".into());
    }

    if cfg.determinant.nystrom_nodes < 32 {
        errors.push(format!(
            "determinant.nystrom_nodes: need at least 32, got {}",
            cfg.determinant.nystrom_nodes
        ));
    }
    for (k, z) in cfg.determinant.z.iter().enumerate() {
        if !(z[0].is_finite() && z[1].is_finite()) {
            errors.push(format!("determinant.z[{k}]: must be finite"));
        }
    }
    for (k, f) in cfg.test_functions.iter().enumerate() {
        if f.validate().is_err() {
            errors.push(format!("test_functions[{k}]: invalid parameters {f}"));
        }
    }
    for (k, iv) in cfg.scan.mass_intervals.iter().enumerate() {
        if !(iv[0] < iv[1]) {
            errors.push(format!("scan.mass_intervals[{k}]: need E1 < E2"));
        }
    }
    if !(cfg.scan.sup_window[0] < cfg.scan.sup_window[1]) {
        errors.push("scan.sup_window: need lo < hi".into());
    }
    positive(&mut errors, "check.det_tolerance", cfg.check.det_tolerance);
    if cfg.check.rank_one_dim < 2 {
        errors.push("check.rank_one_dim: need at least 2".into());
    }

    let t = &cfg.tolerances;
    positive(&mut errors, "tolerances.ode_rtol", t.ode_rtol);
    positive(&mut errors, "tolerances.ode_atol", t.ode_atol);
    positive(&mut errors, "tolerances.tail", t.tail);
    positive(&mut errors, "tolerances.epsilon", t.epsilon);
    positive(&mut errors, "tolerances.weighted_tail", t.weighted_tail);

    if let PotentialSpec::Csv { path, .. } = &mut cfg.potential {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    let potential = match build_potential(&cfg.potential) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(format!("potential: {e}"));
            None
        }
    };
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let opts = SolverOptions {
        ode: Dopri5 {
            rtol: t.ode_rtol,
            atol: t.ode_atol,
            ..Dopri5::default()
        },
        tail_tol: t.tail,
    };
    let eps = EpsilonPolicy {
        factor: t.epsilon,
        richardson: t.richardson,
    };
    Ok(Resolved {
        potential: potential.expect("validated"),
        config: cfg,
        alpha,
        beta,
        opts,
        eps,
    })
}

fn build_potential(spec: &PotentialSpec) -> ssf_core::Result<Potential> {
    match *spec {
        PotentialSpec::Zero => Ok(Potential::zero()),
        PotentialSpec::SquareWell { depth, width } => Potential::square_well(depth, width),
        PotentialSpec::Exponential { amplitude, rate } => Potential::exponential(amplitude, rate),
        PotentialSpec::GaussianBump { height, center, width } => Potential::gaussian_bump(height, center, width),
        PotentialSpec::Csv {
            ref path,
            interpolation,
            support,
        } => {
            let interp = match interpolation {
                InterpolationSpec::Linear => Interpolation::Linear,
                InterpolationSpec::Constant => Interpolation::Constant,
            };
            Potential::from_csv_path(path, interp, support)
        }
    }
}
