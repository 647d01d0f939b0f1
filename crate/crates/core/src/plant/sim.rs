//! Fixed-step RK4 simulation of the realized plant under a zero-order-hold
//! drive.
//!
//! For a linear model with the input held constant over a step, one RK4
//! step is exactly the affine map `x <- Phi x + Gamma u` with
//! `Phi = sum_{k<=4} (hA)^k / k!` and `Gamma = h sum_{k<=3} (hA)^k / (k+1)! B`.
//! The simulator composes `oversample` of those maps into a single
//! per-sample propagator so a 240-sample drive costs 240 mat-vec products.
//!
//! Output sample `k` is the plant output at the end of drive sample `k`'s
//! hold interval.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::state_space::StateSpaceModel;
use crate::error::{Error, Result};
use crate::metrics;
use crate::signals::{self, StepLayout, Waveform};

/// RK4 sub-steps per drive sample (about 8.3 ps at 12 GS/s).
pub const DEFAULT_OVERSAMPLE: usize = 10;

/// Simulated optical output, divided by `norm_reference`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTrace {
    pub samples: Vec<f64>,
    pub sample_period: f64,
    /// Raw ON steady state of the reference step response.
    pub norm_reference: f64,
}

impl ResponseTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Simulator {
    model: StateSpaceModel,
    sample_period: f64,
    oversample: usize,
    phi: DMatrix<f64>,
    gamma: DVector<f64>,
    norm_reference: f64,
}

impl Simulator {
    /// Builds the propagator and normalises against this plant's own
    /// response to the default step layout.
    pub fn new(model: StateSpaceModel, sample_period: f64, oversample: usize) -> Result<Self> {
        if oversample == 0 {
            return Err(Error::invalid("oversample must be at least 1"));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::invalid("sample period must be positive"));
        }
        let n = model.order();
        let h = model.freq_scale * sample_period / oversample as f64;
        let m = &model.a * h;
        let id = DMatrix::<f64>::identity(n, n);
        let m2 = &m * &m;
        let m3 = &m2 * &m;
        let m4 = &m3 * &m;
        let phi1 = &id + &m + &m2 / 2.0 + &m3 / 6.0 + &m4 / 24.0;
        let gamma1 = (&id + &m / 2.0 + &m2 / 6.0 + &m3 / 24.0) * &model.b * h;
        let mut phi = id;
        let mut gamma = DVector::zeros(n);
        for _ in 0..oversample {
            phi = &phi1 * &phi;
            gamma = &phi1 * &gamma + &gamma1;
        }
        let mut sim = Self { model, sample_period, oversample, phi, gamma, norm_reference: 1.0 };
        let layout = StepLayout { sample_period, ..StepLayout::default() };
        let reference = sim.simulate_raw(signals::step(&layout)?.samples())?;
        let on = metrics::steady_state(&reference, metrics::on_window(reference.len(), layout.edge_index())?)?;
        if !(on > 0.0 && on.is_finite()) {
            return Err(Error::invalid(format!("reference step response has non-positive ON level {on}")));
        }
        sim.norm_reference = on;
        Ok(sim)
    }

    /// Replaces the normalisation constant, e.g. with the reference
    /// plant's so several plants share one output scale.
    pub fn with_norm_reference(mut self, norm_reference: f64) -> Result<Self> {
        if !(norm_reference > 0.0 && norm_reference.is_finite()) {
            return Err(Error::invalid("normalisation reference must be positive"));
        }
        self.norm_reference = norm_reference;
        Ok(self)
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn norm_reference(&self) -> f64 {
        self.norm_reference
    }

    /// A state sitting at equilibrium under `u0`.
    pub fn start(&self, u0: f64) -> Result<SimState<'_>> {
        let x = self.model.equilibrium(u0)?;
        let scratch = DVector::zeros(x.len());
        Ok(SimState { sim: self, x, scratch, steps: 0 })
    }

    /// Un-normalised output for an arbitrary finite input sequence.
    pub fn simulate_raw(&self, drive: &[f64]) -> Result<Vec<f64>> {
        let Some(&first) = drive.first() else {
            return Err(Error::invalid("drive is empty"));
        };
        let mut state = self.start(first)?;
        drive.iter().map(|&u| state.advance(u)).collect()
    }

    /// Normalised response to raw drive samples on this simulator's grid.
    pub fn simulate_samples(&self, drive: &[f64]) -> Result<ResponseTrace> {
        let raw = self.simulate_raw(drive)?;
        Ok(ResponseTrace {
            samples: raw.into_iter().map(|y| y / self.norm_reference).collect(),
            sample_period: self.sample_period,
            norm_reference: self.norm_reference,
        })
    }

    pub fn simulate(&self, drive: &Waveform) -> Result<ResponseTrace> {
        if ((drive.sample_period() - self.sample_period) / self.sample_period).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "drive sample period {:e} s does not match simulator period {:e} s",
                drive.sample_period(),
                self.sample_period
            )));
        }
        self.simulate_samples(drive.samples())
    }
}

/// Running plant state, advanced one drive sample at a time.
pub struct SimState<'a> {
    sim: &'a Simulator,
    x: DVector<f64>,
    scratch: DVector<f64>,
    steps: usize,
}

impl SimState<'_> {
    /// Holds `u` for one sample period and returns the raw output at the
    /// end of the interval.
    pub fn advance(&mut self, u: f64) -> Result<f64> {
        self.scratch.gemv(1.0, &self.sim.phi, &self.x, 0.0);
        self.scratch.axpy(u, &self.sim.gamma, 1.0);
        std::mem::swap(&mut self.x, &mut self.scratch);
        self.steps += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: self.steps * self.sim.oversample });
        }
        Ok(self.sim.model.c.dot(&self.x) + self.sim.model.d * u)
    }

    /// Raw output of the current state with input `u`.
    pub fn output(&self, u: f64) -> f64 {
        self.sim.model.c.dot(&self.x) + self.sim.model.d * u
    }
}

/// One-shot simulation normalised against the plant's own step response.
pub fn simulate(model: &StateSpaceModel, drive: &Waveform, oversample: usize) -> Result<ResponseTrace> {
    Simulator::new(model.clone(), drive.sample_period(), oversample)?.simulate(drive)
}
