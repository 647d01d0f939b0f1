//! Particle swarm with per-particle adaptive coefficients, searching inside
//! a PISIC-shaped shell.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::Incumbent;
use super::{finish, AlgoConfig, FitnessContext, RunRecord};
use crate::error::{Error, Result};
use crate::seed;
use crate::signals::{self, BoundsTemplate, V_MAX};

/// Gap kept between the coefficients and the strict inequalities of the
/// convergence region `0 <= (c1 + c2)/2 - 1 < w < 1`.
pub const CONVERGENCE_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PSOConfig {
    pub iter_max: usize,
    pub n_particles: usize,
    /// Velocity limit as a fraction of the 7 V range.
    pub max_v_f: f64,
    /// Inertia at zero relative improvement.
    pub w0: f64,
    /// Inertia approached as the relative improvement grows.
    pub w_nt: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub on_s_f: f64,
    pub off_s_f: f64,
    pub shell_w_f: f64,
    /// Seed one particle with the plain step.
    pub embed_step: bool,
    pub seed: u64,
}

impl Default for PSOConfig {
    fn default() -> Self {
        Self {
            iter_max: 150,
            n_particles: 160,
            max_v_f: 0.05,
            w0: 0.9,
            w_nt: 0.5,
            c_min: 0.1,
            c_max: 2.5,
            on_s_f: 2.0,
            off_s_f: 0.2,
            shell_w_f: 0.1,
            embed_step: true,
            seed: 0,
        }
    }
}

impl PSOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::invalid("PSO needs at least one particle"));
        }
        if !(0.0 <= self.w_nt && self.w_nt < self.w0 && self.w0 < 1.0) {
            return Err(Error::invalid(format!("need 0 <= w_nt < w0 < 1, got w_nt={} w0={}", self.w_nt, self.w0)));
        }
        if !(self.c_min < self.c_max) {
            return Err(Error::invalid(format!("need c_min < c_max, got {} and {}", self.c_min, self.c_max)));
        }
        if self.c_max <= 1.0 {
            return Err(Error::invalid("c_max must exceed 1 for the convergence region to be reachable"));
        }
        if !(self.max_v_f > 0.0 && self.max_v_f <= 1.0) {
            return Err(Error::invalid("max_v_f must lie in (0, 1]"));
        }
        if !(self.on_s_f >= 1.0 && self.off_s_f >= 0.0 && (0.0..=1.0).contains(&self.shell_w_f)) {
            return Err(Error::invalid("shell factors out of range (on_s_f >= 1, off_s_f >= 0, 0 <= shell_w_f <= 1)"));
        }
        Ok(())
    }

    pub fn max_velocity(&self) -> f64 {
        self.max_v_f * V_MAX
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub position: Vec<f64>,
    /// Volts per iteration, per sample.
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<f64>,
    pub pbest_cost: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Relative fitness improvement of the latest move.
    pub m: f64,
}

/// Relative improvement of `cost` over `pbest`, in `[-1, 1]` for
/// non-negative costs.
pub fn relative_improvement(pbest: f64, cost: f64) -> f64 {
    let den = pbest + cost;
    if den == 0.0 || !den.is_finite() {
        if pbest.is_infinite() && cost.is_finite() {
            return 1.0;
        }
        return 0.0;
    }
    (pbest - cost) / den
}

/// Unclamped coefficient schedule: `w = w0 + (w_nt - w0) tanh(m/2)` and
/// `c = (c_min + c_max)/2 + (c_max - c_min)/2 + tanh(-m/2)`.
/// `tanh(m/2)` is written `(e^m - 1)/(e^m + 1)` in some references.
pub fn raw_coeffs(m: f64, cfg: &PSOConfig) -> (f64, f64) {
    let t = (0.5 * m).tanh();
    let w = cfg.w0 + (cfg.w_nt - cfg.w0) * t;
    let c = 0.5 * (cfg.c_min + cfg.c_max) + 0.5 * (cfg.c_max - cfg.c_min) - t;
    (w, c)
}

/// Clamps `(w, c)` into `[c_min, c_max]` and the convergence region, with
/// `c1 = c2 = c`. The region wins when the two disagree.
pub fn clamp_coeffs(w: f64, c: f64, cfg: &PSOConfig) -> (f64, f64) {
    let w = w.clamp(2.0 * CONVERGENCE_MARGIN, 1.0 - CONVERGENCE_MARGIN);
    let c = c.clamp(cfg.c_min, cfg.c_max).min(1.0 + w - CONVERGENCE_MARGIN).max(1.0);
    (w, c)
}

/// `0 <= (c1 + c2)/2 - 1 < w < 1`.
pub fn in_convergence_region(w: f64, c1: f64, c2: f64) -> bool {
    let h = 0.5 * (c1 + c2) - 1.0;
    0.0 <= h && h < w && w < 1.0
}

/// Sets `m`, `w`, `c1`, `c2` from the particle's latest cost. Must run
/// before `pbest_cost` absorbs that cost.
pub fn pso_update_coeffs(p: &mut ParticleState, cost: f64, cfg: &PSOConfig) -> (f64, f64, f64) {
    p.m = relative_improvement(p.pbest_cost, cost);
    let (w, c) = raw_coeffs(p.m, cfg);
    let (w, c) = clamp_coeffs(w, c, cfg);
    p.w = w;
    p.c1 = c;
    p.c2 = c;
    (w, c, c)
}

/// Search shell for `cfg` on the context's layout.
pub fn shell(ctx: &FitnessContext, cfg: &PSOConfig) -> Result<BoundsTemplate> {
    signals::pisic_shell(ctx.layout(), cfg.shell_w_f, cfg.on_s_f, cfg.off_s_f)
}

pub fn pso_run(ctx: &FitnessContext, cfg: &PSOConfig) -> Result<RunRecord> {
    pso_run_observed(ctx, cfg, |_, _| {})
}

/// `pso_run`, calling `observe(t, swarm)` once the coefficients for the
/// next move are set (`t = 0` after initialisation).
pub fn pso_run_observed<F>(ctx: &FitnessContext, cfg: &PSOConfig, mut observe: F) -> Result<RunRecord>
where
    F: FnMut(usize, &[ParticleState]),
{
    cfg.validate()?;
    let started = Instant::now();
    let shell = shell(ctx, cfg)?;
    let ctx = ctx.clone().with_bounds(shell.clone())?;
    let vmax = cfg.max_velocity();
    let n = ctx.layout().len();

    let init: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_particles)
        .map(|j| {
            let mut rng = seed::stream(cfg.seed, &[0, j as u64]);
            let x = if j == 0 && cfg.embed_step {
                signals::step(ctx.layout())?.into_samples()
            } else {
                (0..n).map(|i| rng.random_range(shell.lo[i]..=shell.hi[i])).collect()
            };
            let v = (0..n).map(|_| rng.random_range(-vmax..=vmax)).collect();
            Ok((x, v))
        })
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = init.par_iter().map(|(x, _)| ctx.evaluate(x)).collect::<Result<_>>()?;
    let mut evaluations = costs.len();

    let mut swarm: Vec<ParticleState> = init
        .into_iter()
        .zip(&costs)
        .map(|((x, v), &cost)| {
            let mut p = ParticleState {
                pbest_position: x.clone(),
                position: x,
                velocity: v,
                pbest_cost: f64::INFINITY,
                w: cfg.w0,
                c1: 0.0,
                c2: 0.0,
                m: 0.0,
            };
            pso_update_coeffs(&mut p, cost, cfg);
            p.pbest_cost = cost;
            p
        })
        .collect();
    let mut best = Incumbent::new(swarm[0].position.clone(), f64::INFINITY);
    best.offer(swarm.iter().map(|p| (p.pbest_position.as_slice(), p.pbest_cost)));
    let mut curve = Vec::with_capacity(cfg.iter_max + 1);
    curve.push(best.cost);
    observe(0, &swarm);

    for t in 1..=cfg.iter_max {
        let gbest = &best.samples;
        let costs: Vec<f64> = swarm
            .par_iter_mut()
            .enumerate()
            .map(|(j, p)| {
                let mut rng = seed::stream(cfg.seed, &[t as u64, j as u64]);
                #[allow(clippy::needless_range_loop)]
                for i in 0..n {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let x = p.position[i];
                    let v = p.w * p.velocity[i]
                        + p.c1 * r1 * (p.pbest_position[i] - x)
                        + p.c2 * r2 * (gbest[i] - x);
                    let v = v.clamp(-vmax, vmax);
                    p.velocity[i] = v;
                    p.position[i] = (x + v).clamp(shell.lo[i], shell.hi[i]);
                }
                ctx.evaluate(&p.position)
            })
            .collect::<Result<_>>()?;
        evaluations += costs.len();
        for (p, &cost) in swarm.iter_mut().zip(&costs) {
            pso_update_coeffs(p, cost, cfg);
            if cost < p.pbest_cost {
                p.pbest_cost = cost;
                p.pbest_position.clone_from(&p.position);
            }
        }
        best.offer(swarm.iter().map(|p| (p.pbest_position.as_slice(), p.pbest_cost)));
        curve.push(best.cost);
        observe(t, &swarm);
    }

    finish(&ctx, AlgoConfig::Pso(cfg.clone()), curve, best, evaluations, started)
}
