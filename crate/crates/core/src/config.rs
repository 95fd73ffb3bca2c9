//! Run configuration: one JSON document, every field optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::SweepSettings;
use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::floquet::{amplitude_grid, CrossingSearch, DriveSpec, DEFAULT_SAMPLES};
use crate::heom::HeomSettings;
use crate::qubit::{BlochVector, Mat2};

fn one() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    6.5
}
fn default_range() -> [f64; 2] {
    [0.5, 9.5]
}
fn default_step() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default = "one")]
    pub omega0: f64,
    #[serde(default = "one")]
    pub omega: f64,
    /// Amplitude for single-point commands.
    #[serde(rename = "Omega", default = "default_amplitude")]
    pub amplitude: f64,
    /// Inclusive amplitude range for grid commands.
    #[serde(rename = "Omega_range", default = "default_range")]
    pub range: [f64; 2],
    #[serde(default = "default_step")]
    pub step: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega: 1.0,
            amplitude: default_amplitude(),
            range: default_range(),
            step: default_step(),
        }
    }
}

impl DriveConfig {
    pub fn drive(&self) -> DriveSpec {
        DriveSpec {
            omega0: self.omega0,
            omega: self.omega,
            amplitude: self.amplitude,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.range[0] == self.range[1] {
            return vec![self.range[0]];
        }
        amplitude_grid(self.range[0], self.range[1], self.step)
    }
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetConfig {
    #[serde(rename = "N_t", default = "default_samples")]
    pub samples: usize,
    /// Fourier cutoff; `null` picks it from the drive amplitude.
    #[serde(default)]
    pub n_max: Option<i32>,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            n_max: None,
        }
    }
}

fn default_crossing_step() -> f64 {
    0.01
}
fn default_detect_below() -> f64 {
    0.05
}
fn default_refine_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    #[serde(default = "default_crossing_step")]
    pub step: f64,
    #[serde(default = "default_detect_below")]
    pub detect_below: f64,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            step: default_crossing_step(),
            detect_below: default_detect_below(),
            refine_tol: default_refine_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Heom,
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LindbladModel {
    Generic,
    NonDegenerate,
    Degenerate,
    /// Degenerate when the quasienergy gap is below `degeneracy_threshold`.
    Auto,
}

/// Initial state: a named state or a Bloch vector, in the Floquet basis at
/// `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Bloch([f64; 3]),
}

impl InitialState {
    pub fn bloch(&self) -> Result<BlochVector> {
        let v = match self {
            InitialState::Bloch(v) => *v,
            InitialState::Named(s) => match s.as_str() {
                "e" => [0.0, 0.0, 1.0],
                "g" => [0.0, 0.0, -1.0],
                "+x" => [1.0, 0.0, 0.0],
                "-x" => [-1.0, 0.0, 0.0],
                "+y" => [0.0, 1.0, 0.0],
                "-y" => [0.0, -1.0, 0.0],
                other => return Err(Error::Config(format!("unknown initial state '{other}'"))),
            },
        };
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n <= 1.0 + 1e-12) {
            return Err(Error::Config(format!("Bloch vector length {n} exceeds 1")));
        }
        Ok(BlochVector::new(v[0], v[1], v[2]))
    }

    pub fn matrix(&self) -> Result<Mat2> {
        Ok(self.bloch()?.to_matrix())
    }
}

fn default_t_end() -> f64 {
    100.0
}
fn default_dt_factor() -> usize {
    40
}
fn default_rho0() -> InitialState {
    InitialState::Named("+x".into())
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_bin_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_rho0")]
    pub rho0: InitialState,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Output samples per drive period.
    #[serde(default = "default_dt_factor")]
    pub dt_factor: usize,
    #[serde(default = "default_model")]
    pub lindblad: LindbladModel,
    /// `|c¹₁₁|` for the secular models; `null` uses the computed value.
    #[serde(default)]
    pub c11: Option<f64>,
    #[serde(default = "default_threshold")]
    pub degeneracy_threshold: f64,
    #[serde(default = "default_bin_tol")]
    pub bin_tol: f64,
}

fn default_solver() -> Solver {
    Solver::Heom
}
fn default_model() -> LindbladModel {
    LindbladModel::Auto
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            solver: default_solver(),
            rho0: default_rho0(),
            t_end: default_t_end(),
            dt_factor: default_dt_factor(),
            lindblad: default_model(),
            c11: None,
            degeneracy_threshold: default_threshold(),
            bin_tol: default_bin_tol(),
        }
    }
}

fn default_directory() -> String {
    "floqmem-run".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// `csv` tables are always written; `json` adds full result dumps.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Full configuration. Defaults: `α = 0.1, ω_c = 1, β = 1` at resonant
/// driving.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub bath: BathModel,
    /// Hierarchy used by `evolve`.
    #[serde(default)]
    pub heom: HeomSettings,
    #[serde(default)]
    pub floquet: FloquetConfig,
    /// Sweep pipeline, including its own hierarchy settings.
    #[serde(default)]
    pub analysis: SweepSettings,
    #[serde(default)]
    pub crossings: CrossingConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Compact canonical JSON, embedded in every output.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.drive.drive().validate().map_err(cfg_err)?;
        self.bath.validate().map_err(cfg_err)?;
        let [a, b] = self.drive.range;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= a) {
            return Err(Error::Config(format!("invalid Omega_range [{a}, {b}]")));
        }
        if !(self.drive.step > 0.0) {
            return Err(Error::Config("drive.step must be > 0".into()));
        }
        if self.floquet.samples < 64 {
            return Err(Error::Config("floquet.N_t must be >= 64".into()));
        }
        if let Some(n) = self.floquet.n_max {
            if n < 1 || 4 * n as usize > self.floquet.samples {
                return Err(Error::Config("floquet.n_max must be in [1, N_t/4]".into()));
            }
        }
        if self.heom.tier == 0 || !(self.heom.rtol > 0.0 && self.heom.atol > 0.0) {
            return Err(Error::Config(
                "heom tier and tolerances must be positive".into(),
            ));
        }
        self.analysis.validate()?;
        let c = &self.crossings;
        if !(c.step > 0.0 && c.detect_below > 0.0 && c.refine_tol > 0.0) {
            return Err(Error::Config(
                "crossing search parameters must be positive".into(),
            ));
        }
        let e = &self.evolve;
        if !(e.t_end > 0.0 && e.t_end.is_finite()) || e.dt_factor < 1 {
            return Err(Error::Config(
                "evolve.t_end and dt_factor must be positive".into(),
            ));
        }
        e.rho0.bloch()?;
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(Error::Config(format!("unknown output format '{f}'")));
            }
        }
        Ok(())
    }

    /// Sweep settings with the Floquet sample count taken from `floquet`.
    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            floquet_samples: self.floquet.samples,
            ..self.analysis
        }
    }

    pub fn crossing_search(&self) -> CrossingSearch {
        CrossingSearch {
            omega: self.drive.omega,
            start: self.drive.range[0],
            stop: self.drive.range[1],
            step: self.crossings.step,
            detect_below: self.crossings.detect_below,
            refine_tol: self.crossings.refine_tol,
        }
    }

    pub fn wants_json(&self) -> bool {
        self.output.formats.iter().any(|f| f == "json")
    }
}
