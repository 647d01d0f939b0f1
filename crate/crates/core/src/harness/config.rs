use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{ACOConfig, AlgoConfig, Algorithm, GAConfig, PSOConfig};
use crate::plant::{canonical_tf, make_variants, TransferFunction, DEFAULT_OVERSAMPLE};
use crate::signals::{StepLayout, DEFAULT_BITS, MISIC1_PLACEHOLDER};

/// Which plant(s) a command runs against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSelection {
    Canonical,
    /// The ten coefficient-scaled variants; index 0 is the canonical plant.
    AllVariants,
    Variant(usize),
    File(PathBuf),
}

impl PlantSelection {
    /// `(variant index, plant)` pairs; a file plant gets index 0.
    pub fn plants(&self) -> Result<Vec<(usize, TransferFunction)>> {
        let variants = make_variants(&canonical_tf());
        match self {
            PlantSelection::Canonical => Ok(vec![(0, canonical_tf())]),
            PlantSelection::AllVariants => Ok(variants.into_iter().enumerate().collect()),
            PlantSelection::Variant(i) => variants
                .get(*i)
                .cloned()
                .map(|tf| vec![(*i, tf)])
                .ok_or_else(|| Error::invalid(format!("variant index {i} out of range 0..{}", variants.len()))),
            PlantSelection::File(path) => Ok(vec![(0, TransferFunction::read_toml(path)?)]),
        }
    }
}

/// Reference drives compared by the `baselines` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Step level under the PISIC / MISIC impulses.
    pub impulse_base_v: f64,
    /// Height added by each impulse.
    pub impulse_v: f64,
    pub impulse_width: f64,
    pub misic_pattern: String,
    pub rc_beta: f64,
    pub rc_symbol_period: f64,
    pub tau_c_factor: f64,
    /// Also run each configured optimizer once on the canonical plant.
    pub include_optimizers: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            impulse_base_v: 2.95,
            impulse_v: 4.05,
            impulse_width: 500e-12,
            misic_pattern: MISIC1_PLACEHOLDER.to_string(),
            rc_beta: 0.5,
            rc_symbol_period: 1e-9,
            tau_c_factor: crate::control::DEFAULT_TAU_C_FACTOR,
            include_optimizers: true,
        }
    }
}

/// Full description of an experiment. Every field has a default, so an
/// empty document reproduces the tuned campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSelection,
    pub algorithms: Vec<Algorithm>,
    pub n_repeats: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub oversample: usize,
    pub bits: u32,
    pub layout: StepLayout,
    pub pso: PSOConfig,
    pub aco: ACOConfig,
    pub ga: GAConfig,
    pub baselines: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantSelection::AllVariants,
            algorithms: Algorithm::ALL.to_vec(),
            n_repeats: 10,
            base_seed: 1,
            output_dir: PathBuf::from("out"),
            oversample: DEFAULT_OVERSAMPLE,
            bits: DEFAULT_BITS,
            layout: StepLayout::default(),
            pso: PSOConfig::default(),
            aco: ACOConfig::default(),
            ga: GAConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("serialising config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::invalid("n_repeats must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithms selected"));
        }
        if self.oversample == 0 {
            return Err(Error::invalid("oversample must be at least 1"));
        }
        if !(1..=16).contains(&self.bits) {
            return Err(Error::invalid(format!("bits must lie in [1, 16], got {}", self.bits)));
        }
        self.layout.validate()?;
        self.pso.validate()?;
        self.aco.validate()?;
        self.ga.validate()?;
        Ok(())
    }

    /// Configuration of `algorithm`, seed left as configured.
    pub fn algo_config(&self, algorithm: Algorithm) -> AlgoConfig {
        match algorithm {
            Algorithm::Pso => AlgoConfig::Pso(self.pso.clone()),
            Algorithm::Aco => AlgoConfig::Aco(self.aco.clone()),
            Algorithm::Ga => AlgoConfig::Ga(self.ga.clone()),
        }
    }
}
