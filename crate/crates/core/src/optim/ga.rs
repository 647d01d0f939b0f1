//! Generational GA on raw sample vectors: tournament selection, two-point
//! crossover, per-gene Gaussian mutation and a single elite.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::Incumbent;
use super::{finish, AlgoConfig, FitnessContext, RunRecord};
use crate::error::{Error, Result};
use crate::seed;
use crate::signals::V_MAX;

/// Fresh mutation draws allowed for a gene that left `[0, V_MAX]` before
/// it is clipped instead.
pub const MUTATION_RETRIES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub pop_size: usize,
    pub n_generations: usize,
    pub cxpb: f64,
    pub mutpb: f64,
    pub indpb: f64,
    pub mut_mu: f64,
    /// Standard deviation as a fraction of the 7 V range.
    pub mut_sigma: f64,
    pub tournsize: usize,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            n_generations: 500,
            cxpb: 0.9,
            mutpb: 0.3,
            indpb: 0.06,
            mut_mu: 0.0,
            mut_sigma: 0.15,
            tournsize: 4,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("cxpb", self.cxpb), ("mutpb", self.mutpb), ("indpb", self.indpb)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.tournsize == 0 || self.pop_size < self.tournsize {
            return Err(Error::invalid(format!(
                "need 1 <= tournsize <= pop_size, got tournsize={} pop_size={}",
                self.tournsize, self.pop_size
            )));
        }
        if !(self.mut_sigma >= 0.0 && self.mut_sigma.is_finite() && self.mut_mu.is_finite()) {
            return Err(Error::invalid("mutation parameters must be finite with sigma >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Individual {
    genes: Vec<f64>,
    cost: Option<f64>,
}

fn tournament(pop: &[Individual], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].cost < pop[winner].cost {
            winner = c;
        }
    }
    winner
}

/// Swaps the segment `[a, b)` between two parents, `1 <= a < b < len`.
/// Genomes shorter than 3 are left alone.
fn two_point(x: &mut [f64], y: &mut [f64], rng: &mut ChaCha8Rng) {
    let n = x.len().min(y.len());
    if n < 3 {
        return;
    }
    let mut a = rng.random_range(1..n);
    let mut b = rng.random_range(1..n - 1);
    if b >= a {
        b += 1;
    } else {
        std::mem::swap(&mut a, &mut b);
    }
    x[a..b].swap_with_slice(&mut y[a..b]);
}

/// Mutates in place; returns how many genes had to be clipped.
fn mutate(genes: &mut [f64], cfg: &GAConfig, normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> usize {
    let mut clipped = 0;
    for g in genes.iter_mut() {
        if rng.random::<f64>() >= cfg.indpb {
            continue;
        }
        let mut candidate = *g + normal.sample(rng);
        let mut tries = 0;
        while !(0.0..=V_MAX).contains(&candidate) && tries < MUTATION_RETRIES {
            candidate = *g + normal.sample(rng);
            tries += 1;
        }
        if !(0.0..=V_MAX).contains(&candidate) {
            clipped += 1;
            candidate = candidate.clamp(0.0, V_MAX);
        }
        *g = candidate;
    }
    clipped
}

fn evaluate_missing(ctx: &FitnessContext, pop: &mut [Individual]) -> Result<usize> {
    let fresh: Vec<(usize, f64)> = pop
        .par_iter()
        .enumerate()
        .filter(|(_, ind)| ind.cost.is_none())
        .map(|(i, ind)| ctx.evaluate(&ind.genes).map(|c| (i, c)))
        .collect::<Result<_>>()?;
    for &(i, c) in &fresh {
        pop[i].cost = Some(c);
    }
    Ok(fresh.len())
}

fn genes_of(pop: &[Individual]) -> Vec<&[f64]> {
    pop.iter().map(|i| i.genes.as_slice()).collect()
}

fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.cost < pop[best].cost {
            best = i;
        }
    }
    best
}

fn worst_index(pop: &[Individual]) -> usize {
    let mut worst = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.cost > pop[worst].cost {
            worst = i;
        }
    }
    worst
}

pub fn ga_run(ctx: &FitnessContext, cfg: &GAConfig) -> Result<RunRecord> {
    ga_run_observed(ctx, cfg, |_, _| {})
}

/// `ga_run`, calling `observe(g, population)` after every generation
/// (`g = 0` for the initial population).
pub fn ga_run_observed<F>(ctx: &FitnessContext, cfg: &GAConfig, mut observe: F) -> Result<RunRecord>
where
    F: FnMut(usize, &[&[f64]]),
{
    cfg.validate()?;
    let started = Instant::now();
    let n = ctx.layout().len();
    let mut rng = seed::stream(cfg.seed, &[]);
    let normal = Normal::new(cfg.mut_mu * V_MAX, cfg.mut_sigma * V_MAX)
        .map_err(|e| Error::invalid(format!("mutation distribution: {e}")))?;
    let ctx = ctx.clone().with_bounds(crate::signals::BoundsTemplate::full_range(n))?;

    let mut pop: Vec<Individual> = (0..cfg.pop_size)
        .map(|_| Individual { genes: (0..n).map(|_| rng.random_range(0.0..=V_MAX)).collect(), cost: None })
        .collect();
    let mut evaluations = evaluate_missing(&ctx, &mut pop)?;
    let b = best_index(&pop);
    let mut best = Incumbent::new(pop[b].genes.clone(), pop[b].cost.unwrap_or(f64::INFINITY));
    let mut curve = Vec::with_capacity(cfg.n_generations + 1);
    curve.push(best.cost);
    observe(0, &genes_of(&pop));
    let mut clipped_total = 0;

    for g in 1..=cfg.n_generations {
        let elite = pop[best_index(&pop)].clone();
        let mut offspring: Vec<Individual> =
            (0..cfg.pop_size).map(|_| pop[tournament(&pop, cfg.tournsize, &mut rng)].clone()).collect();
        for pair in offspring.chunks_exact_mut(2) {
            if rng.random::<f64>() < cfg.cxpb {
                let (x, y) = pair.split_at_mut(1);
                two_point(&mut x[0].genes, &mut y[0].genes, &mut rng);
                x[0].cost = None;
                y[0].cost = None;
            }
        }
        for ind in offspring.iter_mut() {
            if rng.random::<f64>() < cfg.mutpb {
                clipped_total += mutate(&mut ind.genes, cfg, &normal, &mut rng);
                ind.cost = None;
            }
        }
        evaluations += evaluate_missing(&ctx, &mut offspring)?;
        if offspring[best_index(&offspring)].cost > elite.cost {
            let w = worst_index(&offspring);
            offspring[w] = elite;
        }
        pop = offspring;
        let b = best_index(&pop);
        best.offer([(pop[b].genes.as_slice(), pop[b].cost.unwrap_or(f64::INFINITY))]);
        curve.push(best.cost);
        observe(g, &genes_of(&pop));
    }
    if clipped_total > 0 {
        log::debug!("GA clipped {clipped_total} mutated genes after {MUTATION_RETRIES} redraws");
    }
    finish(&ctx, AlgoConfig::Ga(cfg.clone()), curve, best, evaluations, started)
}
