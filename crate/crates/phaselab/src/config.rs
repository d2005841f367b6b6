//! Experiment configuration: a single TOML file is the source of truth for
//! a run; any key can be overridden from the command line via dotted paths.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_state, mix, number_state, DensityMatrix, StateVector};
use crate::grid::Grid1D;
use crate::phase_space::GridSpec2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Qmarginals,
    Doubleslit,
    HomodyneJoint,
    HomodyneLo,
    Infocheck,
}

/// Named state family with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StateSpec {
    Vacuum,
    Number { n: usize },
    Coherent { re: f64, im: f64 },
    Superposition { components: Vec<SuperComponent> },
    RandomPure { seed: u64, max_n: usize },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Vacuum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperComponent {
    pub n: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<StateVector> {
        match self {
            StateSpec::Vacuum => number_state(0, dim),
            StateSpec::Number { n } => number_state(*n, dim),
            StateSpec::Coherent { re, im } => coherent_state(C64::new(*re, *im), dim),
            StateSpec::Superposition { components } => {
                if components.is_empty() {
                    return Err(Error::Config("superposition needs components".into()));
                }
                let mut coeffs = vec![C64::new(0.0, 0.0); dim];
                for c in components {
                    if c.n >= dim {
                        return Err(Error::Config(format!(
                            "superposition component n = {} beyond dim {dim}",
                            c.n
                        )));
                    }
                    coeffs[c.n] += C64::new(c.re, c.im);
                }
                StateVector::normalized(coeffs)
            }
            StateSpec::RandomPure { seed, max_n } => {
                if *max_n >= dim {
                    return Err(Error::Config(format!("max_n = {max_n} beyond dim {dim}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut coeffs = vec![C64::new(0.0, 0.0); dim];
                for c in coeffs.iter_mut().take(max_n + 1) {
                    *c = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
                StateVector::normalized(coeffs)
            }
        }
    }
}

/// Generating operator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Vacuum,
    Number { n: usize },
    NumberMixture { ns: Vec<usize>, weights: Vec<f64> },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Vacuum
    }
}

impl GeneratorSpec {
    pub fn build(&self, dim: usize) -> Result<DensityMatrix> {
        match self {
            GeneratorSpec::Vacuum => Ok(DensityMatrix::from_pure(&number_state(0, dim)?)),
            GeneratorSpec::Number { n } => Ok(DensityMatrix::from_pure(&number_state(*n, dim)?)),
            GeneratorSpec::NumberMixture { ns, weights } => {
                let states: Result<Vec<StateVector>> =
                    ns.iter().map(|&n| number_state(n, dim)).collect();
                mix(&states?, weights)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid1DSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for Grid1DSpec {
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 65536,
        }
    }
}

impl Grid1DSpec {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoubleSlitSpec {
    pub c1: f64,
    pub c2: f64,
    pub w: f64,
    pub deltas: Vec<f64>,
}

impl Default for DoubleSlitSpec {
    fn default() -> Self {
        Self {
            c1: -2.0,
            c2: 2.0,
            w: 1.0,
            deltas: vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomodyneJointSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// Half-width of the comparison window against the direct density.
    pub window: f64,
}

impl Default for HomodyneJointSpec {
    fn default() -> Self {
        Self {
            x_min: -40.0,
            x_max: 40.0,
            n_points: 1024,
            window: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomodyneLoSpec {
    pub zs: Vec<f64>,
    pub dim: usize,
}

impl Default for HomodyneLoSpec {
    fn default() -> Self {
        Self {
            zs: vec![2.0, 4.0, 6.0],
            dim: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfoCheckSpec {
    pub eps: f64,
}

impl Default for InfoCheckSpec {
    fn default() -> Self {
        Self { eps: 1e-8 }
    }
}

fn default_dim() -> usize {
    crate::fock::DEFAULT_DIM
}

fn default_k_max() -> usize {
    8
}

fn default_resamples() -> usize {
    200
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub n_shots: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub grid: GridSpec2D,
    #[serde(default)]
    pub grid1d: Grid1DSpec,
    #[serde(default)]
    pub doubleslit: DoubleSlitSpec,
    #[serde(default)]
    pub homodyne_joint: HomodyneJointSpec,
    #[serde(default)]
    pub homodyne_lo: HomodyneLoSpec,
    #[serde(default)]
    pub infocheck: InfoCheckSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses the config, applying `key=value` dotted-path overrides first.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("TOML parse: {e}")))?;
        for (key, val) in overrides {
            set_dotted(&mut value, key, val)?;
        }
        let config: ExperimentConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("config structure: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim > 4096 {
            return Err(Error::Config(format!("dim = {} out of range 2..=4096", self.dim)));
        }
        if self.k_max > crate::grid::K_MAX {
            return Err(Error::Config(format!(
                "k_max = {} above supported {}",
                self.k_max,
                crate::grid::K_MAX
            )));
        }
        if self.n_shots == Some(0) {
            return Err(Error::Config("n_shots must be >= 1 when set".into()));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::Config("bootstrap_resamples must be >= 1".into()));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Config(format!("phase-space grid: {e}")))?;
        Ok(())
    }
}

/// Parses an override value with TOML scalar semantics.
fn parse_scalar(val: &str) -> toml::Value {
    if let Ok(i) = val.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = val.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = val.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    // bracketed lists, e.g. [2.0, 4.0]
    if val.starts_with('[') {
        if let Ok(toml::Value::Table(t)) = format!("x = {val}").parse::<toml::Value>() {
            if let Some(v) = t.get("x") {
                return v.clone();
            }
        }
    }
    toml::Value::String(val.to_string())
}

fn set_dotted(root: &mut toml::Value, key: &str, val: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{key}' traverses a non-table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("'{key}' traverses a non-table")))?;
    table.insert(parts[parts.len() - 1].to_string(), parse_scalar(val));
    Ok(())
}
