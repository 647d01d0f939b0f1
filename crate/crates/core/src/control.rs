//! Control-theory baseline: a first-order-plus-dead-time fit of the step
//! response, IMC-tuned PID gains and a closed-loop PID drive synthesised
//! against the simulated plant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Levels};
use crate::plant::{ResponseTrace, Simulator};
use crate::signals::{SetPoint, StepLayout, Waveform, SAMPLE_PERIOD, V_MAX};

/// First-order-plus-dead-time model `k_p e^{-theta s} / (tau_p s + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FOPDTParams {
    /// Normalised output per volt.
    pub k_p: f64,
    pub tau_p: f64,
    pub theta_p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PIDConfig {
    /// Volts per unit of normalised error.
    pub k_c: f64,
    /// Volts per (unit error x second).
    pub k_i: f64,
    /// Volt-seconds per unit error.
    pub k_d: f64,
    /// Closed-loop time constant as a multiple of `tau_p`.
    pub tau_c: f64,
    pub sample_period: f64,
}

impl PIDConfig {
    pub fn validate(&self) -> Result<()> {
        if ![self.k_c, self.k_i, self.k_d].iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("PID gains must be finite"));
        }
        if !(self.tau_c > 0.0) {
            return Err(Error::invalid("tau_c must be positive"));
        }
        if !(self.sample_period > 0.0) {
            return Err(Error::invalid("sample period must be positive"));
        }
        Ok(())
    }
}

/// Default closed-loop speed, in multiples of `tau_p`.
pub const DEFAULT_TAU_C_FACTOR: f64 = 5.0;

/// Interpolated time after the edge at which `samples` first reaches
/// `level` (samples are `sample_period` apart, index `edge` at t = 0).
fn crossing_time(samples: &[f64], sample_period: f64, edge: usize, level: f64) -> Option<f64> {
    let tail = samples.get(edge..)?;
    if tail.first().is_some_and(|&y| y >= level) {
        return Some(0.0);
    }
    tail.windows(2).enumerate().find(|(_, w)| w[1] >= level).map(|(i, w)| {
        let frac = (level - w[0]) / (w[1] - w[0]);
        (i as f64 + frac) * sample_period
    })
}

/// Fits gain from the two plateaus, dead time from the 5% crossing and
/// time constant from the 5% to the 63.2% crossing.
pub fn fit_fopdt(step_response: &ResponseTrace, layout: &StepLayout) -> Result<FOPDTParams> {
    layout.validate()?;
    let samples = &step_response.samples;
    if samples.len() != layout.len() {
        return Err(Error::LengthMismatch { expected: layout.len(), got: samples.len() });
    }
    let edge = layout.edge_index();
    let levels = Levels::from_trace(samples, edge)?;
    let swing = levels.on - levels.off;
    if !(swing > 0.0) {
        return Err(Error::DegenerateFit(format!("step response swing {swing} is not positive")));
    }
    if metrics::settling_time(samples, step_response.sample_period, edge, levels)?.is_none() {
        return Err(Error::NotSettled);
    }
    let t = step_response.sample_period;
    let theta_p = crossing_time(samples, t, edge, levels.off + 0.05 * swing)
        .ok_or_else(|| Error::DegenerateFit("response never reaches 5% of its swing".into()))?;
    let t63 = crossing_time(samples, t, edge, levels.off + 0.632 * swing)
        .ok_or_else(|| Error::DegenerateFit("response never reaches 63.2% of its swing".into()))?;
    let tau_p = t63 - theta_p;
    if !(tau_p > 0.0) {
        return Err(Error::DegenerateFit("63.2% crossing does not follow the 5% crossing".into()));
    }
    Ok(FOPDTParams { k_p: swing / (layout.v_on - layout.v_off), tau_p, theta_p })
}

/// IMC-PID rules for a FOPDT model with `tau_c = tau_c_factor * tau_p`.
pub fn imc_tune(f: &FOPDTParams, tau_c_factor: f64) -> Result<PIDConfig> {
    if !(f.tau_p > 0.0 && f.theta_p >= 0.0 && f.k_p != 0.0 && f.k_p.is_finite()) {
        return Err(Error::invalid(format!("invalid FOPDT model {f:?}")));
    }
    if !(tau_c_factor > 0.0 && tau_c_factor.is_finite()) {
        return Err(Error::invalid("tau_c factor must be positive"));
    }
    let half_delay = 0.5 * f.theta_p;
    let k_c = (f.tau_p + half_delay) / (f.k_p * (tau_c_factor * f.tau_p + half_delay));
    let tau_i = f.tau_p + half_delay;
    let tau_d = f.tau_p * f.theta_p / (2.0 * f.tau_p + f.theta_p);
    Ok(PIDConfig { k_c, k_i: k_c / tau_i, k_d: k_c * tau_d, tau_c: tau_c_factor, sample_period: SAMPLE_PERIOD })
}

/// Drive and normalised output of the closed loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    pub drive: Waveform,
    pub output: ResponseTrace,
}

/// Positional PID on the normalised output: `u[k]` is computed from the
/// measurement `y[k-1]` taken at the start of hold interval `k`. The
/// derivative acts on the measurement, integration pauses while the
/// output is saturated in the direction of the error, and the integrator
/// starts at the drive that holds the initial set-point level.
pub fn pid_closed_loop(sim: &Simulator, sp: &SetPoint, cfg: &PIDConfig) -> Result<ClosedLoop> {
    cfg.validate()?;
    if ((cfg.sample_period - sim.sample_period()) / sim.sample_period()).abs() > 1e-9 {
        return Err(Error::invalid("PID and simulator sample periods differ"));
    }
    let Some(&first) = sp.samples.first() else {
        return Err(Error::invalid("set point is empty"));
    };
    let dt = cfg.sample_period;
    let gain = sim.model().dc_gain()? / sim.norm_reference();
    let u_eq = (first / gain).clamp(0.0, V_MAX);
    let mut state = sim.start(u_eq)?;
    let mut y_prev = state.output(u_eq) / sim.norm_reference();
    let mut integral = u_eq;
    let mut drive = Vec::with_capacity(sp.len());
    let mut output = Vec::with_capacity(sp.len());
    let mut y = y_prev;
    for &target in &sp.samples {
        let e = target - y;
        let derivative = (y - y_prev) / dt;
        let candidate = integral + cfg.k_i * dt * e;
        let unclamped = cfg.k_c * e + candidate - cfg.k_d * derivative;
        let u = unclamped.clamp(0.0, V_MAX);
        let winding = (unclamped > V_MAX && e > 0.0) || (unclamped < 0.0 && e < 0.0);
        if !winding {
            integral = candidate;
        }
        drive.push(u);
        y_prev = y;
        y = state.advance(u)? / sim.norm_reference();
        output.push(y);
    }
    Ok(ClosedLoop {
        drive: Waveform::new(drive, dt)?,
        output: ResponseTrace { samples: output, sample_period: dt, norm_reference: sim.norm_reference() },
    })
}

/// Recorded controller output of the closed loop, for open-loop replay.
pub fn pid_drive(sim: &Simulator, sp: &SetPoint, cfg: &PIDConfig) -> Result<Waveform> {
    Ok(pid_closed_loop(sim, sp, cfg)?.drive)
}
