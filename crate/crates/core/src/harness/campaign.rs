use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PlantSelection};
use crate::error::{Error, Result};
use crate::metrics::{cost_spread, summarize, Metric, MetricsReport, SummaryStats};
use crate::optim::{self, Algorithm, FitnessContext, RunRecord};
use crate::plant::{canonical_tf, to_state_space, Simulator, TransferFunction, DEFAULT_FREQ_SCALE};
use crate::seed;
use crate::signals::{self, SetPoint};

/// One plant of a campaign with the fitness context optimizers run on.
#[derive(Clone, Debug)]
pub struct PlantCase {
    pub variant: usize,
    pub tf: TransferFunction,
    pub ctx: FitnessContext,
}

/// Simulator for `tf` at the configured rate.
pub fn simulator(tf: &TransferFunction, cfg: &ExperimentConfig) -> Result<Simulator> {
    Simulator::new(to_state_space(tf, DEFAULT_FREQ_SCALE)?, cfg.layout.sample_period, cfg.oversample)
}

/// Set point built from the canonical plant's step response, together
/// with that plant's normalisation constant.
pub fn canonical_set_point(cfg: &ExperimentConfig) -> Result<(SetPoint, f64)> {
    let sim = simulator(&canonical_tf(), cfg)?;
    let reference = sim.simulate(&signals::step(&cfg.layout)?)?;
    Ok((signals::make_set_point(&reference, cfg.layout.edge_index())?, sim.norm_reference()))
}

/// Resolves the configured plants. Table variants share the canonical
/// set point and output scale; a plant loaded from file is scaled by and
/// targeted at its own step response.
pub fn plant_cases(cfg: &ExperimentConfig) -> Result<Vec<PlantCase>> {
    let plants = cfg.plant.plants()?;
    if let PlantSelection::File(_) = cfg.plant {
        let (variant, tf) = plants.into_iter().next().ok_or_else(|| Error::invalid("no plant"))?;
        let sim = simulator(&tf, cfg)?;
        let reference = sim.simulate(&signals::step(&cfg.layout)?)?;
        let sp = signals::make_set_point(&reference, cfg.layout.edge_index())?;
        let ctx = FitnessContext::new(Arc::new(sim), sp, cfg.layout, cfg.bits)?;
        return Ok(vec![PlantCase { variant, tf, ctx }]);
    }
    let (sp, norm) = canonical_set_point(cfg)?;
    plants
        .into_iter()
        .map(|(variant, tf)| {
            let sim = simulator(&tf, cfg)?.with_norm_reference(norm)?;
            let ctx = FitnessContext::new(Arc::new(sim), sp.clone(), cfg.layout, cfg.bits)?;
            Ok(PlantCase { variant, tf, ctx })
        })
        .collect()
}

/// Seed of cell `(algorithm, variant, repeat)`.
pub fn cell_seed(base_seed: u64, algorithm: Algorithm, variant: usize, repeat: usize) -> u64 {
    seed::derive(base_seed, &[algorithm.id(), variant as u64, repeat as u64])
}

/// One cell of the run matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub variant: usize,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunRecord, String>,
}

impl Cell {
    pub fn record(&self) -> Option<&RunRecord> {
        self.outcome.as_ref().ok()
    }
}

/// Summary of one technique over every successful cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Algorithm name, or `step` for the undriven reference.
    pub technique: String,
    pub rise: Option<SummaryStats>,
    pub settle: Option<SummaryStats>,
    pub overshoot: Option<SummaryStats>,
    pub runs: usize,
    pub not_settled: usize,
}

/// Spread of final costs over the repeats of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub algorithm: Algorithm,
    pub variant: usize,
    /// `None` when fewer than two repeats produced a finite cost.
    pub spread_pct: Option<f64>,
}

/// All cells plus the step reference on every plant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignResult {
    pub algorithms: Vec<Algorithm>,
    pub variants: Vec<usize>,
    pub n_repeats: usize,
    /// Ordered by algorithm, then variant, then repeat.
    pub cells: Vec<Cell>,
    /// Step-drive metrics against the common set point, per variant.
    pub step_reports: Vec<(usize, MetricsReport)>,
    pub summaries: Vec<SummaryRow>,
    pub spreads: Vec<SpreadRow>,
}

impl CampaignResult {
    pub fn cell(&self, algorithm: Algorithm, variant: usize, repeat: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.variant == variant && c.repeat == repeat)
    }

    pub fn records(&self, algorithm: Algorithm) -> impl Iterator<Item = &RunRecord> {
        self.cells.iter().filter(move |c| c.algorithm == algorithm).filter_map(Cell::record)
    }

    pub fn summary(&self, technique: &str) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| s.technique == technique)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }
}

fn summary_row(technique: &str, reports: &[MetricsReport]) -> SummaryRow {
    let stat = |m| if reports.is_empty() { None } else { summarize(reports, m).ok() };
    SummaryRow {
        technique: technique.to_string(),
        rise: stat(Metric::RiseTime),
        settle: stat(Metric::SettlingTime),
        overshoot: stat(Metric::Overshoot),
        runs: reports.len(),
        not_settled: reports.iter().filter(|r| r.settling_time.is_none()).count(),
    }
}

/// Runs every `(algorithm, variant, repeat)` cell. A failing cell keeps
/// its error message and the remaining cells still run.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let cases = plant_cases(cfg)?;
    let mut jobs = Vec::new();
    for &algorithm in &cfg.algorithms {
        for case in &cases {
            for repeat in 0..cfg.n_repeats {
                jobs.push((algorithm, case, repeat));
            }
        }
    }
    let cells: Vec<Cell> = jobs
        .into_par_iter()
        .map(|(algorithm, case, repeat)| {
            let seed = cell_seed(cfg.base_seed, algorithm, case.variant, repeat);
            let algo_cfg = cfg.algo_config(algorithm).with_seed(seed);
            let outcome = optim::run(&case.ctx, &algo_cfg).map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("{algorithm} variant {} repeat {repeat}: {e}", case.variant);
            }
            Cell { algorithm, variant: case.variant, repeat, seed, outcome }
        })
        .collect();

    // the reference step is an analog drive, so it skips the DAC grid
    let step = signals::step(&cfg.layout)?;
    let step_reports = cases
        .iter()
        .map(|case| {
            let trace = case.ctx.simulator().simulate(&step)?;
            Ok((case.variant, MetricsReport::against_set_point(&trace, case.ctx.set_point())?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::new();
    for &algorithm in &cfg.algorithms {
        let reports: Vec<MetricsReport> =
            cells.iter().filter(|c| c.algorithm == algorithm).filter_map(|c| c.record()).map(|r| r.best_metrics.clone()).collect();
        summaries.push(summary_row(algorithm.name(), &reports));
    }
    let step_only: Vec<MetricsReport> = step_reports.iter().map(|(_, r)| r.clone()).collect();
    summaries.push(summary_row("step", &step_only));

    let mut spreads = Vec::new();
    for &algorithm in &cfg.algorithms {
        for case in &cases {
            let finals: Vec<f64> = cells
                .iter()
                .filter(|c| c.algorithm == algorithm && c.variant == case.variant)
                .filter_map(|c| c.record())
                .map(|r| r.best_cost)
                .filter(|c| c.is_finite())
                .collect();
            let spread_pct = if finals.len() >= 2 { cost_spread(&finals).ok() } else { None };
            spreads.push(SpreadRow { algorithm, variant: case.variant, spread_pct });
        }
    }

    Ok(CampaignResult {
        algorithms: cfg.algorithms.clone(),
        variants: cases.iter().map(|c| c.variant).collect(),
        n_repeats: cfg.n_repeats,
        cells,
        step_reports,
        summaries,
        spreads,
    })
}
