//! Experiment configuration: where the system comes from, strip and chain
//! parameters, tolerance overrides and per-experiment settings.

use std::collections::BTreeMap;
use std::path::PathBuf;

use cfs_core::{MinimizeOptions, Tolerances};
use cfs_dirac::{DiracSuiteConfig, KernelAsymptoticsConfig};
use cfs_wave::TimeStrip;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (expected json, csv or both)")),
        }
    }
}

/// Random system generator; the seed is the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub points: usize,
    pub f: usize,
    pub n: usize,
    pub kappa: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { points: 6, f: 4, n: 1, kappa: 0.2 }
    }
}

/// Finite-range chain used by the strip experiments when no system file is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub slots: usize,
    pub points_per_slot: usize,
    pub block_dim: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { slots: 13, points_per_slot: 2, block_dim: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSettings {
    pub scale: f64,
    pub max_iters: usize,
    /// Chain and strip of the coupling run; the iteration builds a dense
    /// Hessian, so it runs on a shorter chain than the other strip experiments.
    pub slots: usize,
    pub strip: [f64; 5],
}

impl Default for CouplingSettings {
    fn default() -> Self {
        CouplingSettings { scale: 1e-3, max_iters: 50, slots: 7, strip: [0.0, 2.5, 3.5, 6.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// System file; takes precedence over the generator.
    pub system: Option<PathBuf>,
    /// Random system generator; without it and without a file the bundled
    /// two-point demo system is used.
    pub generator: Option<GeneratorSpec>,
    pub chain: ChainSettings,
    pub strip: TimeStrip,
    /// Overrides of named tolerances.
    pub tolerances: BTreeMap<String, f64>,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Number of random variation directions.
    pub directions: usize,
    /// Number of random cases for the Appendix-A identity.
    pub cases: usize,
    /// Number of random Hilbert vectors embedded into the extended space.
    pub embed: usize,
    /// Strength of the positivity perturbation; `None` picks `1e-2‖𝒬‖/‖ψ⁽⁰⁾‖_past`.
    pub lambda: Option<f64>,
    /// Evaluation times of the commutator inner product for the extended space.
    pub eval_times: [f64; 2],
    pub coupling: CouplingSettings,
    pub minimize: MinimizeOptions,
    pub dirac: DiracSuiteConfig,
    pub kernel: KernelAsymptoticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "cfs-lab".into(),
            seed: 7,
            system: None,
            generator: None,
            chain: ChainSettings::default(),
            strip: TimeStrip { t0: 0.0, t_min: 3.0, t_max: 9.0, t1: 12.0, delta: 1.0 },
            tolerances: BTreeMap::new(),
            out: PathBuf::from("cfs-lab-out"),
            format: OutputFormat::Both,
            directions: 5,
            cases: 10,
            embed: 0,
            lambda: None,
            eval_times: [5.0, 7.0],
            coupling: CouplingSettings::default(),
            minimize: MinimizeOptions::default(),
            dirac: DiracSuiteConfig::default(),
            kernel: KernelAsymptoticsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("config does not parse: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    /// Default tolerances with the overrides applied.
    pub fn resolved_tolerances(&self) -> Result<Tolerances> {
        let mut tol = Tolerances::default();
        for (name, &value) in &self.tolerances {
            tol.set(name, value).map_err(LabError::Config)?;
        }
        Ok(tol)
    }

    /// Parses `NAME=VAL` and records it as an override.
    pub fn set_tolerance(&mut self, assignment: &str) -> Result<()> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("tolerance override `{assignment}` is not of the form NAME=VAL")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| LabError::Config(format!("tolerance `{name}` has a non-numeric value `{value}`")))?;
        Tolerances::default().set(name.trim(), value).map_err(LabError::Config)?;
        self.tolerances.insert(name.trim().to_string(), value);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_tolerances()?;
        self.strip.validate().map_err(|e| LabError::Config(e.to_string()))?;
        if let Some(g) = &self.generator {
            if g.points == 0 || g.n == 0 || g.f < g.n || !(g.kappa > 0.0 && g.kappa.is_finite()) {
                return Err(LabError::Config(format!("generator needs points ≥ 1, 1 ≤ n ≤ f and κ > 0, got {g:?}")));
            }
        }
        if self.chain.slots < 2 || self.chain.points_per_slot == 0 || self.chain.block_dim == 0 {
            return Err(LabError::Config(format!("chain needs ≥ 2 slots and nonzero sizes, got {:?}", self.chain)));
        }
        if self.directions == 0 || self.cases == 0 {
            return Err(LabError::Config("directions and cases must be positive".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(LabError::Config(format!("λ must be positive, got {l}")));
            }
        }
        let c = &self.coupling;
        if !(c.scale >= 0.0 && c.scale.is_finite()) || c.max_iters == 0 {
            return Err(LabError::Config(format!("coupling needs scale ≥ 0 and max_iters ≥ 1, got {c:?}")));
        }
        TimeStrip::new(c.strip[0], c.strip[1], c.strip[2], c.strip[3], c.strip[4])
            .map_err(|e| LabError::Config(format!("coupling strip: {e}")))?;
        if self.dirac.momenta.is_empty()
            || self.dirac.mass.is_nan()
            || self.dirac.mass < 0.0
            || self.dirac.delta_g.is_nan()
            || self.dirac.delta_g <= 0.0
        {
            return Err(LabError::Config("dirac suite needs at least one momentum, m ≥ 0 and δ_g > 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything that influences the
    /// numbers, i.e. without the output directory and format.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.format = OutputFormat::default();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
