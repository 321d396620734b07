//! JSON experiment configuration. See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex;
use qheat_core::disorder::{DiscreteWaitingDist, WaitingTimeModel};
use qheat_core::heat::{ProtocolConfig, Schedule};
use qheat_core::quantum::{spectral_decompose, DensityMatrix, HermitianOperator, MeasurementBasis};
use qheat_core::tls::TlsParams;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TRAJECTORIES: u64 = 1000;
pub const DEFAULT_MAX_MOMENT: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: SystemSpec,
    pub schedule: ScheduleSpec,
    pub model: ModelSpec,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<GridSpec>,
    #[serde(default)]
    pub u_axis: UAxis,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_max_moment")]
    pub max_moment: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_cap: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_beta() -> f64 {
    1.0
}

fn default_trajectories() -> u64 {
    DEFAULT_TRAJECTORIES
}

fn default_max_moment() -> u32 {
    DEFAULT_MAX_MOMENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Two-level system `H = diag(-e, e)`; `c1` defaults to the thermal value.
    Tls {
        e: f64,
        a2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
    },
    General {
        hamiltonian: Vec<Vec<ComplexSpec>>,
        /// Columns are the measurement basis vectors.
        basis: Vec<Vec<ComplexSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outcomes: Option<Vec<f64>>,
        rho0: Rho0Spec,
    },
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    fn value(self) -> Complex<f64> {
        match self {
            ComplexSpec::Real(re) => Complex::new(re, 0.0),
            ComplexSpec::Pair([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho0Spec {
    /// `e^{-beta H} / Z`.
    Thermal,
    /// Populations of the energy eigenstates in ascending energy order.
    Populations(Vec<f64>),
    Matrix(Vec<Vec<ComplexSpec>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    Measurements(usize),
    TotalTime(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Fixed { tau: f64 },
    Quenched { taus: Vec<f64>, probs: Vec<f64> },
    Annealed { taus: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UAxis {
    /// Grid value `x` means `u = x`.
    #[default]
    Real,
    /// Grid value `x` means `u = i x`.
    Imaginary,
}

/// Either explicit values or `count` evenly spaced points from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl GridSpec {
    /// Non-empty, finite, strictly monotone.
    pub fn points(&self, path: &str) -> CliResult<Vec<f64>> {
        let points = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Linspace { start, stop, count } => linspace(*start, *stop, *count),
        };
        if points.is_empty() {
            return Err(CliError::config(format!("{path}: grid is empty")));
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(CliError::config(format!("{path}: grid value {x} is not finite")));
        }
        let increasing = points.windows(2).all(|w| w[1] > w[0]);
        let decreasing = points.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(CliError::config(format!("{path}: grid is not strictly monotone")));
        }
        Ok(points)
    }
}

/// `count` points from `start` to `stop` inclusive; `[start]` for `count == 1`.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tau: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

/// One point of a parameter sweep; `None` keeps the configured value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepPoint {
    pub a2: Option<f64>,
    pub mean_tau: Option<f64>,
    pub c1: Option<f64>,
}

/// Parsed configuration together with the hash of its source bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSpec {
    pub spec: ExperimentSpec,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and parses `path`; errors carry line and column.
pub fn load(path: &Path) -> CliResult<LoadedSpec> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let spec = parse(&bytes).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedSpec { spec, sha256: sha256_hex(&bytes) })
}

pub fn parse(bytes: &[u8]) -> CliResult<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_slice(bytes)
        .map_err(|e| CliError::config(format!("line {} column {}: {e}", e.line(), e.column())))?;
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    /// Checks everything that does not need a numerical decomposition, then
    /// builds the protocol once so that matrix errors surface at load time.
    pub fn validate(&self) -> CliResult<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(CliError::config(format!("beta: {} must be finite and non-negative", self.beta)));
        }
        if self.trajectories == 0 {
            return Err(CliError::config("trajectories: must be at least 1"));
        }
        if !(1..=4).contains(&self.max_moment) {
            return Err(CliError::config(format!("max_moment: {} is not in 1..=4", self.max_moment)));
        }
        if self.term_cap == Some(0) {
            return Err(CliError::config("term_cap: must be positive"));
        }
        if let Some(grid) = &self.u_grid {
            grid.points("u_grid")?;
        }
        let is_tls = matches!(self.system, SystemSpec::Tls { .. });
        for (name, grid) in [("c1", &self.sweep.c1), ("a2", &self.sweep.a2), ("mean_tau", &self.sweep.mean_tau)] {
            if let Some(grid) = grid {
                let points = grid.points(&format!("sweep.{name}"))?;
                if name != "mean_tau" && !is_tls {
                    return Err(CliError::config(format!("sweep.{name}: only available for a tls system")));
                }
                if name == "mean_tau" && points.iter().any(|&t| t <= 0.0) {
                    return Err(CliError::config("sweep.mean_tau: values must be positive"));
                }
            }
        }
        for point in self.sweep_points()? {
            self.protocol(point)?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep grids (`a2` outermost, `c1` innermost);
    /// a single default point when no sweep is configured.
    pub fn sweep_points(&self) -> CliResult<Vec<SweepPoint>> {
        let grid = |g: &Option<GridSpec>, name: &str| -> CliResult<Vec<Option<f64>>> {
            Ok(match g {
                Some(g) => g.points(&format!("sweep.{name}"))?.into_iter().map(Some).collect(),
                None => vec![None],
            })
        };
        let (a2s, taus, c1s) = (grid(&self.sweep.a2, "a2")?, grid(&self.sweep.mean_tau, "mean_tau")?, grid(&self.sweep.c1, "c1")?);
        let mut points = Vec::with_capacity(a2s.len() * taus.len() * c1s.len());
        for &a2 in &a2s {
            for &mean_tau in &taus {
                for &c1 in &c1s {
                    points.push(SweepPoint { a2, mean_tau, c1 });
                }
            }
        }
        Ok(points)
    }

    pub fn has_sweep(&self) -> bool {
        self.sweep.c1.is_some() || self.sweep.a2.is_some() || self.sweep.mean_tau.is_some()
    }

    /// Names of the swept parameters in column order.
    pub fn sweep_columns(&self) -> Vec<&'static str> {
        let mut cols = Vec::new();
        if self.sweep.a2.is_some() {
            cols.push("a2");
        }
        if self.sweep.mean_tau.is_some() {
            cols.push("mean_tau");
        }
        if self.sweep.c1.is_some() {
            cols.push("c1");
        }
        cols
    }

    pub fn model(&self, mean_tau: Option<f64>) -> CliResult<WaitingTimeModel<f64>> {
        let model = match &self.model {
            ModelSpec::Fixed { tau } => WaitingTimeModel::Fixed { tau_bar: *tau },
            ModelSpec::Quenched { taus, probs } => WaitingTimeModel::Quenched { dist: dist(taus, probs)? },
            ModelSpec::Annealed { taus, probs } => WaitingTimeModel::Annealed { dist: dist(taus, probs)? },
        };
        if let WaitingTimeModel::Fixed { tau_bar } = model {
            if !tau_bar.is_finite() || tau_bar < 0.0 {
                return Err(CliError::config(format!("model.tau: {tau_bar} must be finite and non-negative")));
            }
        }
        let Some(target) = mean_tau else { return Ok(model) };
        Ok(match model {
            WaitingTimeModel::Fixed { .. } => WaitingTimeModel::Fixed { tau_bar: target },
            WaitingTimeModel::Quenched { dist } => WaitingTimeModel::Quenched { dist: rescale(&dist, target)? },
            WaitingTimeModel::Annealed { dist } => WaitingTimeModel::Annealed { dist: rescale(&dist, target)? },
        })
    }

    /// TLS parameters at `point`, for a tls system.
    pub fn tls_params(&self, point: SweepPoint) -> CliResult<Option<TlsParams<f64>>> {
        let SystemSpec::Tls { e, a2, c1 } = self.system else { return Ok(None) };
        let m = match self.schedule {
            ScheduleSpec::Measurements(m) => m,
            ScheduleSpec::TotalTime(_) => 1,
        };
        let a2 = point.a2.unwrap_or(a2);
        let p = match point.c1.or(c1) {
            Some(c1) => TlsParams::new(e, a2, c1, m.max(1), self.beta),
            None => TlsParams::thermal(e, a2, m.max(1), self.beta),
        }
        .map_err(|err| CliError::at("system", err))?;
        Ok(Some(p))
    }

    /// Protocol configuration at `point`, seeded with the spec's seed.
    pub fn protocol(&self, point: SweepPoint) -> CliResult<ProtocolConfig<f64>> {
        let schedule = match self.schedule {
            ScheduleSpec::Measurements(m) => Schedule::Measurements(m),
            ScheduleSpec::TotalTime(t) => Schedule::TotalTime(t),
        };
        let model = self.model(point.mean_tau)?;
        let (h, basis, rho0) = match &self.system {
            SystemSpec::Tls { .. } => {
                let p = self.tls_params(point)?.expect("tls system");
                (p.hamiltonian(), p.basis(), p.rho0())
            }
            SystemSpec::General { hamiltonian, basis, outcomes, rho0 } => {
                let h = spectral_decompose(&matrix(hamiltonian, "system.hamiltonian")?)
                    .map_err(|e| CliError::at("system.hamiltonian", e))?;
                let vectors = matrix(basis, "system.basis")?;
                let outcomes = outcomes.clone().unwrap_or_else(|| (0..vectors.ncols()).map(|k| k as f64).collect());
                let basis = MeasurementBasis::from_vectors(vectors, outcomes).map_err(|e| CliError::at("system.basis", e))?;
                let rho0 = self.rho0(rho0, &h)?;
                (h, basis, rho0)
            }
        };
        ProtocolConfig::new(h, basis, rho0, schedule, model, self.beta, self.seed).map_err(|e| CliError::at("config", e))
    }

    fn rho0(&self, spec: &Rho0Spec, h: &HermitianOperator<f64>) -> CliResult<DensityMatrix<f64>> {
        match spec {
            Rho0Spec::Thermal => Ok(DensityMatrix::thermal(h, self.beta)),
            Rho0Spec::Populations(p) => DensityMatrix::diagonal_in(h, p).map_err(|e| CliError::at("system.rho0.populations", e)),
            Rho0Spec::Matrix(m) => DensityMatrix::new(matrix(m, "system.rho0.matrix")?).map_err(|e| CliError::at("system.rho0.matrix", e)),
        }
    }

    /// Parameters recorded in output metadata so that any row can be re-run.
    pub fn describe(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("spec serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output");
        }
        v
    }

    pub fn m_count(&self) -> Value {
        match self.schedule {
            ScheduleSpec::Measurements(m) => json!(m),
            ScheduleSpec::TotalTime(_) => Value::Null,
        }
    }

    pub fn model_label(&self) -> &'static str {
        match self.model {
            ModelSpec::Fixed { .. } => "fixed",
            ModelSpec::Quenched { .. } => "quenched",
            ModelSpec::Annealed { .. } => "annealed",
        }
    }

    pub fn system_label(&self) -> &'static str {
        match self.system {
            SystemSpec::Tls { .. } => "tls",
            SystemSpec::General { .. } => "general",
        }
    }

    /// Grid values and the complex `u` they stand for.
    pub fn u_points(&self) -> CliResult<Vec<(f64, Complex<f64>)>> {
        let Some(grid) = &self.u_grid else { return Ok(Vec::new()) };
        Ok(grid
            .points("u_grid")?
            .into_iter()
            .map(|x| match self.u_axis {
                UAxis::Real => (x, Complex::new(x, 0.0)),
                UAxis::Imaginary => (x, Complex::new(0.0, x)),
            })
            .collect())
    }
}

fn dist(taus: &[f64], probs: &[f64]) -> CliResult<DiscreteWaitingDist<f64>> {
    DiscreteWaitingDist::new(taus.to_vec(), probs.to_vec()).map_err(|e| CliError::at("model", e))
}

fn rescale(dist: &DiscreteWaitingDist<f64>, target: f64) -> CliResult<DiscreteWaitingDist<f64>> {
    dist.scaled(target / dist.mean()).map_err(|e| CliError::at("sweep.mean_tau", e))
}

fn matrix(rows: &[Vec<ComplexSpec>], path: &str) -> CliResult<DMatrix<Complex<f64>>> {
    let d = rows.len();
    if d == 0 {
        return Err(CliError::config(format!("{path}: matrix is empty")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(CliError::config(format!("{path}: row {i} has {} entries, expected {d}", r.len())));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j].value()))
}
