use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::plant::{ResponseTrace, Simulator};
use crate::signals::{self, BoundsTemplate, SetPoint, StepLayout, Waveform, DEFAULT_BITS};

/// Everything a cost evaluation needs. Evaluation is pure apart from the
/// divergence counter, so one context can be shared across threads.
#[derive(Debug)]
pub struct FitnessContext {
    sim: Arc<Simulator>,
    set_point: SetPoint,
    layout: StepLayout,
    bounds: BoundsTemplate,
    hull: BoundsTemplate,
    bits: u32,
    diverged: AtomicUsize,
}

impl Clone for FitnessContext {
    fn clone(&self) -> Self {
        Self {
            sim: Arc::clone(&self.sim),
            set_point: self.set_point.clone(),
            layout: self.layout,
            bounds: self.bounds.clone(),
            hull: self.hull.clone(),
            bits: self.bits,
            diverged: AtomicUsize::new(0),
        }
    }
}

impl FitnessContext {
    /// Context with `[0, V_MAX]` bounds on every sample.
    pub fn new(sim: Arc<Simulator>, set_point: SetPoint, layout: StepLayout, bits: u32) -> Result<Self> {
        layout.validate()?;
        if set_point.len() != layout.len() {
            return Err(Error::LengthMismatch { expected: layout.len(), got: set_point.len() });
        }
        if set_point.edge_index != layout.edge_index() {
            return Err(Error::invalid(format!(
                "set point edge {} differs from layout edge {}",
                set_point.edge_index,
                layout.edge_index()
            )));
        }
        if ((sim.sample_period() - layout.sample_period) / layout.sample_period).abs() > 1e-9 {
            return Err(Error::invalid("layout and simulator use different sample periods"));
        }
        signals::quantize_in_place(&mut [], bits)?;
        let bounds = BoundsTemplate::full_range(layout.len());
        let hull = bounds.quantized_hull(bits);
        Ok(Self { sim, set_point, layout, bounds, hull, bits, diverged: AtomicUsize::new(0) })
    }

    /// Context whose target is the plateaus of `sim`'s own default step.
    pub fn for_plant(sim: Arc<Simulator>, layout: StepLayout) -> Result<Self> {
        let reference = sim.simulate(&signals::step(&layout)?)?;
        let sp = signals::make_set_point(&reference, layout.edge_index())?;
        Self::new(sim, sp, layout, DEFAULT_BITS)
    }

    pub fn with_bounds(mut self, bounds: BoundsTemplate) -> Result<Self> {
        if bounds.len() != self.layout.len() {
            return Err(Error::LengthMismatch { expected: self.layout.len(), got: bounds.len() });
        }
        self.hull = bounds.quantized_hull(self.bits);
        self.bounds = bounds;
        Ok(self)
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn set_point(&self) -> &SetPoint {
        &self.set_point
    }

    pub fn layout(&self) -> &StepLayout {
        &self.layout
    }

    pub fn bounds(&self) -> &BoundsTemplate {
        &self.bounds
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn edge_index(&self) -> usize {
        self.set_point.edge_index
    }

    /// Evaluations that hit the `+inf` divergence sentinel so far.
    pub fn diverged_count(&self) -> usize {
        self.diverged.load(Ordering::Relaxed)
    }

    /// Snaps `samples` to the DAC grid.
    pub fn quantized(&self, samples: &[f64]) -> Vec<f64> {
        let mut q = samples.to_vec();
        signals::quantize_in_place(&mut q, self.bits).expect("bits validated at construction");
        q
    }

    /// Mean squared error between the plant's response to the quantised
    /// drive and the set point. A diverging simulation costs `+inf`.
    pub fn evaluate(&self, samples: &[f64]) -> Result<f64> {
        let q = self.quantized(samples);
        self.hull.check(&q)?;
        match self.sim.simulate_samples(&q) {
            Ok(trace) => {
                let cost = metrics::mse(&trace.samples, &self.set_point.samples)?;
                if cost.is_finite() {
                    Ok(cost)
                } else {
                    self.diverged.fetch_add(1, Ordering::Relaxed);
                    Ok(f64::INFINITY)
                }
            }
            Err(Error::Diverged { step }) => {
                log::warn!("simulation diverged at step {step}; cost set to +inf");
                self.diverged.fetch_add(1, Ordering::Relaxed);
                Ok(f64::INFINITY)
            }
            Err(e) => Err(e),
        }
    }

    pub fn evaluate_waveform(&self, w: &Waveform) -> Result<f64> {
        self.evaluate(w.samples())
    }

    /// Cost of the plain step of this context's layout.
    pub fn step_cost(&self) -> Result<f64> {
        self.evaluate(signals::step(&self.layout)?.samples())
    }

    pub fn response(&self, samples: &[f64]) -> Result<ResponseTrace> {
        self.sim.simulate_samples(&self.quantized(samples))
    }

    /// Metrics of the quantised drive, measured against the set point.
    pub fn measure(&self, samples: &[f64]) -> Result<MetricsReport> {
        MetricsReport::against_set_point(&self.response(samples)?, &self.set_point)
    }
}
