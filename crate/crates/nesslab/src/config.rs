//! TOML run configuration.
//!
//! Complex numbers are written as `[re, im]` pairs; `beta = inf` selects zero
//! temperature.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use nesslab_core::model::Reservoir;
use nesslab_core::{Complex64, LeadVector, SampleMatrix, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub system: SystemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ness: NessConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "one")]
    pub t_c: f64,
    pub tau: f64,
    /// Rows of `[re, im]` pairs.
    pub h_s: Vec<Vec<[f64; 2]>>,
    pub nu: Vec<Vec<f64>>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "one")]
    pub beta_s: f64,
    pub n_particles: f64,
    pub leads: [LeadConfig; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadConfig {
    /// `|S_j⟩` on the sample.
    pub sample_coupling: Vec<[f64; 2]>,
    /// Sites carrying `|L_j⟩`.
    #[serde(default = "site_zero")]
    pub sites: Vec<usize>,
    /// Amplitudes of `|L_j⟩` on `sites`.
    #[serde(default = "unit_amplitude")]
    pub amplitudes: Vec<[f64; 2]>,
    pub beta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub theta_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { theta_nodes: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NessConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    #[serde(default = "one")]
    pub mixing: f64,
}

impl Default for NessConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 500, mixing: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub lead_length: usize,
    pub dt: f64,
    pub t_end: f64,
    pub output_every: f64,
    /// Initial sample occupations (diagonal `ρ_s`); the Fermi equilibrium of
    /// the sample is used when absent.
    #[serde(default)]
    pub sample_occupations: Option<Vec<f64>>,
    /// Optional second initial sample state for the independence check.
    #[serde(default)]
    pub alternate_occupations: Option<Vec<f64>>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            lead_length: 600,
            dt: 0.05,
            t_end: 200.0,
            output_every: 0.5,
            sample_occupations: None,
            alternate_occupations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<TableFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: default_formats() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Tsv,
    Csv,
}

impl TableFormat {
    pub fn delimiter(self) -> char {
        match self {
            TableFormat::Tsv => '\t',
            TableFormat::Csv => ',',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Tsv => "tsv",
            TableFormat::Csv => "csv",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn site_zero() -> Vec<usize> {
    vec![0]
}

fn unit_amplitude() -> Vec<[f64; 2]> {
    vec![[1.0, 0.0]]
}

fn default_formats() -> Vec<TableFormat> {
    vec![TableFormat::Tsv]
}

fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl RunConfig {
    /// Single level at `α = 0.5` with `τ = 0.2`, `t_c = 1` and a small
    /// symmetric bias.
    pub fn default_single_dot() -> Self {
        let lead = |mu: f64| LeadConfig {
            sample_coupling: vec![[1.0, 0.0]],
            sites: site_zero(),
            amplitudes: unit_amplitude(),
            beta: f64::INFINITY,
            mu,
        };
        Self {
            schema: SCHEMA_VERSION,
            system: SystemConfig {
                t_c: 1.0,
                tau: 0.2,
                h_s: vec![vec![[0.5, 0.0]]],
                nu: vec![vec![1.0]],
                lambda: 0.0,
                beta_s: 1.0,
                n_particles: 0.5,
                leads: [lead(0.1), lead(-0.1)],
            },
            grid: GridConfig::default(),
            ness: NessConfig::default(),
            dynamics: DynamicsConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.grid.theta_nodes < 64 {
            return Err(CliError::Config("grid.theta_nodes must be at least 64".into()));
        }
        for (j, lead) in self.system.leads.iter().enumerate() {
            if lead.sites.len() != lead.amplitudes.len() {
                return Err(CliError::Config(format!("leads[{j}]: sites and amplitudes differ in length")));
            }
        }
        let d = &self.dynamics;
        if !(d.dt > 0.0 && d.t_end >= 0.0 && d.output_every > 0.0) {
            return Err(CliError::Config("dynamics: dt and output_every must be positive, t_end nonnegative".into()));
        }
        self.spec()?;
        Ok(())
    }

    pub fn spec(&self) -> Result<SystemSpec, CliError> {
        let s = &self.system;
        let n = s.h_s.len();
        if s.h_s.iter().any(|row| row.len() != n) {
            return Err(CliError::Config("system.h_s must be square".into()));
        }
        if s.nu.len() != n || s.nu.iter().any(|row| row.len() != n) {
            return Err(CliError::Config("system.nu must be N×N".into()));
        }
        let h_s = SampleMatrix::from_fn(n, n, |i, j| complex(s.h_s[i][j]));
        let nu = DMatrix::from_fn(n, n, |i, j| s.nu[i][j]);
        let sample_coupling = s
            .leads
            .clone()
            .map(|l| DVector::from_iterator(l.sample_coupling.len(), l.sample_coupling.into_iter().map(complex)));
        let lead_coupling =
            s.leads.clone().map(|l| LeadVector::new(l.sites.into_iter().zip(l.amplitudes.into_iter().map(complex))));
        let reservoirs = s.leads.clone().map(|l| Reservoir { beta: l.beta, mu: l.mu });
        let spec = SystemSpec {
            t_c: s.t_c,
            tau: s.tau,
            h_s,
            nu,
            lambda: s.lambda,
            sample_coupling,
            lead_coupling,
            reservoirs,
            beta_s: s.beta_s,
            n_particles: s.n_particles,
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}
