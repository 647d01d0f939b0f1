use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ACOConfig, GAConfig, PSOConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::signals::Waveform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pso,
    Aco,
    Ga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pso, Algorithm::Aco, Algorithm::Ga];

    /// Index folded into derived seeds.
    pub fn id(self) -> u64 {
        match self {
            Algorithm::Pso => 0,
            Algorithm::Aco => 1,
            Algorithm::Ga => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pso => "pso",
            Algorithm::Aco => "aco",
            Algorithm::Ga => "ga",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(Algorithm::Pso),
            "aco" => Ok(Algorithm::Aco),
            "ga" => Ok(Algorithm::Ga),
            other => Err(Error::invalid(format!("unknown algorithm '{other}' (expected pso, aco or ga)"))),
        }
    }
}

/// Configuration snapshot of any of the three optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum AlgoConfig {
    Pso(PSOConfig),
    Aco(ACOConfig),
    Ga(GAConfig),
}

impl AlgoConfig {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Pso => AlgoConfig::Pso(PSOConfig::default()),
            Algorithm::Aco => AlgoConfig::Aco(ACOConfig::default()),
            Algorithm::Ga => AlgoConfig::Ga(GAConfig::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgoConfig::Pso(_) => Algorithm::Pso,
            AlgoConfig::Aco(_) => Algorithm::Aco,
            AlgoConfig::Ga(_) => Algorithm::Ga,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            AlgoConfig::Pso(c) => c.seed,
            AlgoConfig::Aco(c) => c.seed,
            AlgoConfig::Ga(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            AlgoConfig::Pso(c) => c.seed = seed,
            AlgoConfig::Aco(c) => c.seed = seed,
            AlgoConfig::Ga(c) => c.seed = seed,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgoConfig::Pso(c) => c.validate(),
            AlgoConfig::Aco(c) => c.validate(),
            AlgoConfig::Ga(c) => c.validate(),
        }
    }
}

/// Outcome of one optimizer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub config: AlgoConfig,
    pub seed: u64,
    /// Best-so-far cost; entry 0 is the initial population, entry `t` the
    /// state after iteration/generation `t`.
    pub learning_curve: Vec<f64>,
    /// Quantised drive that produced `best_cost`.
    pub best_waveform: Waveform,
    pub best_cost: f64,
    pub best_metrics: MetricsReport,
    pub evaluations: usize,
    /// Evaluations that returned the divergence sentinel.
    pub diverged: usize,
    /// Not persisted, so saved records of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(format!("serialising run record: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("parsing run record: {e}")))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// The learning curve as `iteration,best_cost` CSV.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("iteration,best_cost\n");
        for (i, c) in self.learning_curve.iter().enumerate() {
            out.push_str(&format!("{i},{c}\n"));
        }
        out
    }

    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.curve_csv()).map_err(|e| Error::io(path, e))
    }

    /// First iteration whose best cost is within `rel` of the final value.
    pub fn convergence_iteration(&self, rel: f64) -> usize {
        let last = *self.learning_curve.last().unwrap_or(&0.0);
        self.learning_curve.iter().position(|&c| c <= last * (1.0 + rel)).unwrap_or(0)
    }
}

/// Best-so-far tracker shared by the three optimizers.
#[derive(Clone, Debug)]
pub(crate) struct Incumbent {
    pub cost: f64,
    pub samples: Vec<f64>,
}

impl Incumbent {
    pub fn new(samples: Vec<f64>, cost: f64) -> Self {
        Self { cost, samples }
    }

    /// Adopts the best of `candidates` when strictly better; ties keep the
    /// lowest index so the choice is independent of evaluation order.
    pub fn offer<'a, I>(&mut self, candidates: I)
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        for (samples, cost) in candidates {
            if cost < self.cost {
                self.cost = cost;
                self.samples.clear();
                self.samples.extend_from_slice(samples);
            }
        }
    }
}
