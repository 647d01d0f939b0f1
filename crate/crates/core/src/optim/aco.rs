//! Ant Colony System over a layered value graph: cluster `k` holds the
//! candidate levels of ON sample `k`, and ants walk cluster 0 -> N-1.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::Incumbent;
use super::{finish, AlgoConfig, FitnessContext, RunRecord};
use crate::error::{Error, Result};
use crate::seed;
use crate::signals::{self, BoundsTemplate, StepLayout, V_MAX};

/// How an ant picks the next node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionRule {
    /// With probability `p` draw in proportion to `tau^alpha`; otherwise
    /// take the strongest edge, breaking ties uniformly.
    PseudoRandomProportional,
    /// With probability `p` pick a uniformly random node; otherwise draw in
    /// proportion to `tau^alpha`.
    Proportional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ACOConfig {
    pub n_ants: usize,
    pub n_generations: usize,
    /// Exponent applied to pheromone weights.
    pub alpha: f64,
    /// Evaporation constant, used by both the local and the global update.
    pub rho: f64,
    /// Exploration probability.
    pub explore_prob: f64,
    /// Leading ON samples that are optimised; the rest keep the step level.
    pub n_opt_points: usize,
    pub n_levels: usize,
    pub range_center_frac: f64,
    pub range_halfwidth_frac: f64,
    pub rule: TransitionRule,
    pub seed: u64,
}

impl Default for ACOConfig {
    fn default() -> Self {
        Self {
            n_ants: 200,
            n_generations: 100,
            alpha: 0.25,
            rho: 0.5,
            explore_prob: 0.1,
            n_opt_points: 180,
            n_levels: 50,
            range_center_frac: 0.5,
            range_halfwidth_frac: 0.25,
            rule: TransitionRule::PseudoRandomProportional,
            seed: 0,
        }
    }
}

impl ACOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ants == 0 || self.n_generations == 0 {
            return Err(Error::invalid("ACO needs at least one ant and one generation"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.explore_prob) {
            return Err(Error::invalid(format!("explore_prob must lie in [0, 1], got {}", self.explore_prob)));
        }
        if self.n_levels < 2 || self.n_opt_points == 0 {
            return Err(Error::invalid("need n_levels >= 2 and n_opt_points >= 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be a non-negative number"));
        }
        let lo = self.range_center_frac - self.range_halfwidth_frac;
        let hi = self.range_center_frac + self.range_halfwidth_frac;
        if !(self.range_halfwidth_frac >= 0.0 && lo >= 0.0 && hi <= 1.0) {
            return Err(Error::invalid(format!("level range [{lo}, {hi}] must lie within [0, 1] of the swing")));
        }
        Ok(())
    }

    /// Voltage of node `j`.
    pub fn level(&self, j: usize) -> f64 {
        let u = 2.0 * j as f64 / (self.n_levels - 1) as f64 - 1.0;
        V_MAX * (self.range_center_frac + self.range_halfwidth_frac * u)
    }
}

/// Pheromone on the legal edges only: an initial vector into cluster 0
/// and one `M x M` table per transition `k -> k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PheromoneGraph {
    n_points: usize,
    n_levels: usize,
    levels: Vec<f64>,
    initial: Vec<f64>,
    /// `[k][i][j]` row-major: node `i` of cluster `k` to node `j` of `k + 1`.
    transitions: Vec<f64>,
}

/// Uniform unit pheromone on every legal edge.
pub fn aco_build_graph(cfg: &ACOConfig, layout: &StepLayout) -> Result<PheromoneGraph> {
    cfg.validate()?;
    layout.validate()?;
    if cfg.n_opt_points > layout.on_len {
        return Err(Error::invalid(format!(
            "{} optimised points exceed the {}-sample ON period",
            cfg.n_opt_points, layout.on_len
        )));
    }
    let (n, m) = (cfg.n_opt_points, cfg.n_levels);
    Ok(PheromoneGraph {
        n_points: n,
        n_levels: m,
        levels: (0..m).map(|j| cfg.level(j)).collect(),
        initial: vec![1.0; m],
        transitions: vec![1.0; (n - 1) * m * m],
    })
}

impl PheromoneGraph {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Sets every legal edge to `tau`.
    pub fn fill(&mut self, tau: f64) {
        self.initial.fill(tau);
        self.transitions.fill(tau);
    }

    /// Weight of the edge from node `i` of cluster `x` to node `j` of
    /// cluster `y`; `None` when the edge does not exist (`y != x + 1`).
    pub fn weight(&self, x: usize, i: usize, y: usize, j: usize) -> Option<f64> {
        if y != x + 1 || y >= self.n_points || i >= self.n_levels || j >= self.n_levels {
            return None;
        }
        Some(self.transitions[self.idx(x, i, j)])
    }

    pub fn initial_weight(&self, j: usize) -> f64 {
        self.initial[j]
    }

    pub fn all_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.initial.iter().chain(&self.transitions).copied()
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n_levels + i) * self.n_levels + j
    }

    /// Outgoing weights towards cluster `k`.
    fn row(&self, k: usize, prev: Option<usize>) -> &[f64] {
        match prev {
            None => &self.initial,
            Some(i) => {
                let start = self.idx(k - 1, i, 0);
                &self.transitions[start..start + self.n_levels]
            }
        }
    }

    fn edge_mut(&mut self, k: usize, prev: Option<usize>, j: usize) -> &mut f64 {
        match prev {
            None => &mut self.initial[j],
            Some(i) => {
                let at = self.idx(k - 1, i, j);
                &mut self.transitions[at]
            }
        }
    }

    /// Probabilities an ant at `prev` assigns to the nodes of cluster `k`.
    pub fn probabilities(&self, k: usize, prev: Option<usize>, cfg: &ACOConfig) -> Vec<f64> {
        let row = self.row(k, prev);
        let m = row.len() as f64;
        let p = cfg.explore_prob;
        let pow: Vec<f64> = row.iter().map(|t| t.powf(cfg.alpha)).collect();
        let total: f64 = pow.iter().sum();
        match cfg.rule {
            TransitionRule::Proportional => pow.iter().map(|w| p / m + (1.0 - p) * w / total).collect(),
            TransitionRule::PseudoRandomProportional => {
                let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties = row.iter().filter(|&&t| t == top).count() as f64;
                row.iter()
                    .zip(&pow)
                    .map(|(&t, w)| p * w / total + if t == top { (1.0 - p) / ties } else { 0.0 })
                    .collect()
            }
        }
    }

    fn choose(&self, k: usize, prev: Option<usize>, cfg: &ACOConfig, rng: &mut ChaCha8Rng) -> usize {
        let row = self.row(k, prev);
        let explore = rng.random::<f64>() < cfg.explore_prob;
        match (cfg.rule, explore) {
            (TransitionRule::Proportional, true) => rng.random_range(0..row.len()),
            (TransitionRule::Proportional, false) | (TransitionRule::PseudoRandomProportional, true) => {
                sample_weighted(row, cfg.alpha, rng)
            }
            (TransitionRule::PseudoRandomProportional, false) => {
                let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties = row.iter().filter(|&&t| t == top).count();
                let pick = if ties == 1 { 0 } else { rng.random_range(0..ties) };
                row.iter()
                    .enumerate()
                    .filter(|(_, &t)| t == top)
                    .nth(pick)
                    .map(|(j, _)| j)
                    .expect("row is non-empty")
            }
        }
    }

    /// One ant's walk, applying the local update `tau <- (1-rho) tau +
    /// rho tau0` to every traversed edge.
    pub fn construct(&mut self, cfg: &ACOConfig, tau0: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.n_points);
        let mut prev = None;
        for k in 0..self.n_points {
            let j = self.choose(k, prev, cfg, rng);
            let e = self.edge_mut(k, prev, j);
            *e = (1.0 - cfg.rho) * *e + cfg.rho * tau0;
            path.push(j);
            prev = Some(j);
        }
        path
    }

    /// Global update `tau <- (1-rho) tau + rho / cost` along `path`.
    pub fn deposit(&mut self, path: &[usize], cost: f64, rho: f64) {
        let gain = if cost > 0.0 { 1.0 / cost } else { f64::MAX };
        let mut prev = None;
        for (k, &j) in path.iter().enumerate() {
            let e = self.edge_mut(k, prev, j);
            *e = (1.0 - rho) * *e + rho * gain;
            prev = Some(j);
        }
    }

    /// Drive samples for `path`: the step, with the optimised ON samples
    /// replaced by the chosen levels.
    pub fn decode(&self, path: &[usize], layout: &StepLayout) -> Result<Vec<f64>> {
        let mut samples = signals::step(layout)?.into_samples();
        let edge = layout.edge_index();
        for (k, &j) in path.iter().enumerate() {
            samples[edge + k] = self.levels[j];
        }
        Ok(samples)
    }

    /// Per-sample bounds that every decoded path respects.
    pub fn bounds(&self, layout: &StepLayout) -> Result<BoundsTemplate> {
        let step = signals::step(layout)?.into_samples();
        let (lo, hi) = (self.levels[0], self.levels[self.n_levels - 1]);
        let edge = layout.edge_index();
        let mut l = step.clone();
        let mut h = step;
        for k in 0..self.n_points {
            l[edge + k] = lo;
            h[edge + k] = hi;
        }
        BoundsTemplate::new(l, h)
    }
}

fn sample_weighted(row: &[f64], alpha: f64, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = row.iter().map(|t| t.powf(alpha)).sum();
    let mut r = rng.random::<f64>() * total;
    for (j, t) in row.iter().enumerate() {
        r -= t.powf(alpha);
        if r < 0.0 {
            return j;
        }
    }
    row.len() - 1
}

pub fn aco_run(ctx: &FitnessContext, cfg: &ACOConfig) -> Result<RunRecord> {
    aco_run_observed(ctx, cfg, |_, _, _| {})
}

/// `aco_run`, calling `observe(g, graph, decoded_paths)` after each
/// generation's global update.
pub fn aco_run_observed<F>(ctx: &FitnessContext, cfg: &ACOConfig, mut observe: F) -> Result<RunRecord>
where
    F: FnMut(usize, &PheromoneGraph, &[Vec<f64>]),
{
    let started = Instant::now();
    let layout = *ctx.layout();
    let mut graph = aco_build_graph(cfg, &layout)?;
    let ctx = ctx.clone().with_bounds(graph.bounds(&layout)?)?;
    let step_cost = ctx.step_cost()?;
    let tau0 = 1.0 / (cfg.n_opt_points as f64 * step_cost);
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::invalid(format!("step cost {step_cost} gives no usable initial pheromone")));
    }
    graph.fill(tau0);

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut incumbent = Incumbent::new(Vec::new(), f64::INFINITY);
    let mut curve = Vec::with_capacity(cfg.n_generations);
    let mut evaluations = 0;
    for g in 0..cfg.n_generations {
        let paths: Vec<Vec<usize>> = (0..cfg.n_ants)
            .map(|a| graph.construct(cfg, tau0, &mut seed::stream(cfg.seed, &[g as u64, a as u64])))
            .collect();
        let decoded: Vec<Vec<f64>> = paths.iter().map(|p| graph.decode(p, &layout)).collect::<Result<_>>()?;
        let costs: Vec<f64> = decoded.par_iter().map(|s| ctx.evaluate(s)).collect::<Result<_>>()?;
        evaluations += costs.len();
        for (path, &cost) in paths.iter().zip(&costs) {
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some((path.clone(), cost));
            }
        }
        incumbent.offer(decoded.iter().map(Vec::as_slice).zip(costs.iter().copied()));
        if let Some((path, cost)) = &best {
            if cost.is_finite() {
                graph.deposit(path, *cost, cfg.rho);
            }
        }
        curve.push(incumbent.cost);
        observe(g, &graph, &decoded);
    }
    if incumbent.samples.is_empty() {
        incumbent.samples = signals::step(&layout)?.into_samples();
    }
    finish(&ctx, AlgoConfig::Aco(cfg.clone()), curve, incumbent, evaluations, started)
}
