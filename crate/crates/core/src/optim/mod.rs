//! The three drive-waveform optimizers behind a common entry point.

mod aco;
mod fitness;
mod ga;
mod pso;
mod record;

use std::time::Instant;

pub use aco::{aco_build_graph, aco_run, aco_run_observed, ACOConfig, PheromoneGraph, TransitionRule};
pub use fitness::FitnessContext;
pub use ga::{ga_run, ga_run_observed, GAConfig, MUTATION_RETRIES};
pub use pso::{
    clamp_coeffs, in_convergence_region, pso_run, pso_run_observed, pso_update_coeffs, raw_coeffs, relative_improvement, shell,
    PSOConfig, ParticleState, CONVERGENCE_MARGIN,
};
pub use record::{AlgoConfig, Algorithm, RunRecord};

use crate::error::Result;
use crate::signals::Waveform;
use record::Incumbent;

/// Runs whichever optimizer `cfg` configures.
pub fn run(ctx: &FitnessContext, cfg: &AlgoConfig) -> Result<RunRecord> {
    match cfg {
        AlgoConfig::Pso(c) => pso_run(ctx, c),
        AlgoConfig::Aco(c) => aco_run(ctx, c),
        AlgoConfig::Ga(c) => ga_run(ctx, c),
    }
}

fn finish(
    ctx: &FitnessContext,
    config: AlgoConfig,
    learning_curve: Vec<f64>,
    best: Incumbent,
    evaluations: usize,
    started: Instant,
) -> Result<RunRecord> {
    let quantized = ctx.quantized(&best.samples);
    let best_metrics = ctx.measure(&quantized)?;
    Ok(RunRecord {
        algorithm: config.algorithm(),
        seed: config.seed(),
        config,
        learning_curve,
        best_waveform: Waveform::new(quantized, ctx.layout().sample_period)?,
        best_cost: best.cost,
        best_metrics,
        evaluations,
        diverged: ctx.diverged_count(),
        wall_time: started.elapsed(),
    })
}
