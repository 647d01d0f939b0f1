//! Step-response figures of merit.
//!
//! Every metric is measured from the drive edge against a pair of reference
//! plateaus ([`Levels`]). Those are either estimated from the trace itself
//! (mean of the final 20% of each plateau) or taken from a set point, which
//! is how results on different plants are compared against one common
//! target.
//!
//! Conventions: rise time interpolates linearly between samples; settling
//! time is reported on the sample grid as `(first settled index - edge) *
//! period`; standard deviations use the population formula.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::ResponseTrace;
use crate::signals::SetPoint;

/// Settling band half-width, relative to the ON level.
pub const SETTLING_BAND: f64 = 0.05;
/// Fraction of each plateau used to estimate its steady state.
pub const STEADY_WINDOW_FRAC: f64 = 0.2;
/// Reported SNR for zero-variance ON periods.
pub const SNR_CAP_DB: f64 = 99.0;

/// OFF and ON reference plateaus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub off: f64,
    pub on: f64,
}

impl Levels {
    /// Plateaus estimated from the trace's own steady-state windows. With
    /// an empty OFF period the OFF level is taken equal to the ON level.
    pub fn from_trace(samples: &[f64], edge_index: usize) -> Result<Self> {
        let on = steady_state(samples, on_window(samples.len(), edge_index)?)?;
        let off = match off_window(edge_index) {
            Some(w) => steady_state(samples, w)?,
            None => on,
        };
        Ok(Self { off, on })
    }

    fn swing(&self) -> Result<f64> {
        let swing = self.on - self.off;
        if !(swing > 0.0) {
            return Err(Error::invalid(format!(
                "ON level {} must exceed OFF level {}",
                self.on, self.off
            )));
        }
        Ok(swing)
    }
}

/// Final 20% of the ON period `[edge, len)`.
pub fn on_window(len: usize, edge_index: usize) -> Result<Range<usize>> {
    if edge_index >= len {
        return Err(Error::invalid(format!("edge {edge_index} leaves no ON period in {len} samples")));
    }
    let on_len = len - edge_index;
    let w = ((STEADY_WINDOW_FRAC * on_len as f64).round() as usize).clamp(1, on_len);
    Ok(len - w..len)
}

/// Final 20% of the OFF period `[0, edge)`; `None` if there is none.
pub fn off_window(edge_index: usize) -> Option<Range<usize>> {
    if edge_index == 0 {
        return None;
    }
    let w = ((STEADY_WINDOW_FRAC * edge_index as f64).round() as usize).clamp(1, edge_index);
    Some(edge_index - w..edge_index)
}

/// Mean of the trace over `window`.
pub fn steady_state(samples: &[f64], window: Range<usize>) -> Result<f64> {
    if window.is_empty() || window.end > samples.len() {
        return Err(Error::invalid(format!(
            "steady-state window {window:?} is empty or outside {} samples",
            samples.len()
        )));
    }
    let n = window.len() as f64;
    Ok(samples[window].iter().sum::<f64>() / n)
}

/// Mean squared error between the response and the target.
pub fn mse(pv: &[f64], sp: &[f64]) -> Result<f64> {
    if pv.len() != sp.len() {
        return Err(Error::LengthMismatch { expected: sp.len(), got: pv.len() });
    }
    if pv.is_empty() {
        return Err(Error::invalid("mse of empty traces"));
    }
    Ok(pv.iter().zip(sp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pv.len() as f64)
}

/// First time (in fractional samples) at or after `edge` where the trace
/// reaches `level`.
fn crossing(samples: &[f64], edge: usize, level: f64) -> Option<f64> {
    if samples.get(edge)? >= &level {
        return Some(edge as f64);
    }
    (edge + 1..samples.len()).find(|&i| samples[i] >= level).map(|i| {
        let (a, b) = (samples[i - 1], samples[i]);
        (i - 1) as f64 + (level - a) / (b - a)
    })
}

/// 10%-90% rise time in seconds.
pub fn rise_time(samples: &[f64], sample_period: f64, edge_index: usize, levels: Levels) -> Result<f64> {
    let swing = levels.swing()?;
    let t10 = crossing(samples, edge_index, levels.off + 0.1 * swing).ok_or(Error::NotRisen)?;
    let t90 = crossing(samples, edge_index, levels.off + 0.9 * swing).ok_or(Error::NotRisen)?;
    Ok(((t90 - t10) * sample_period).max(0.0))
}

/// Time from the edge until the trace enters the `+-5%` band around the
/// ON level and stays there to the end of the ON period. `None` means the
/// trace never settled.
pub fn settling_time(samples: &[f64], sample_period: f64, edge_index: usize, levels: Levels) -> Result<Option<f64>> {
    settling_time_with_band(samples, sample_period, edge_index, levels, SETTLING_BAND)
}

pub fn settling_time_with_band(
    samples: &[f64],
    sample_period: f64,
    edge_index: usize,
    levels: Levels,
    band: f64,
) -> Result<Option<f64>> {
    Ok(settled_index(samples, edge_index, levels, band)?.map(|i| (i - edge_index) as f64 * sample_period))
}

fn settled_index(samples: &[f64], edge_index: usize, levels: Levels, band: f64) -> Result<Option<usize>> {
    levels.swing()?;
    if edge_index >= samples.len() {
        return Err(Error::invalid("edge index beyond the trace"));
    }
    let tol = band * levels.on.abs();
    let last_out = (edge_index..samples.len()).rev().find(|&i| (samples[i] - levels.on).abs() > tol);
    Ok(match last_out {
        None => Some(edge_index),
        Some(i) if i + 1 == samples.len() => None,
        Some(i) => Some(i + 1),
    })
}

/// Peak excess over the ON level in percent; undershooting traces report 0.
pub fn overshoot(samples: &[f64], edge_index: usize, levels: Levels) -> Result<f64> {
    if !(levels.on > 0.0) {
        return Err(Error::invalid("overshoot needs a positive ON level"));
    }
    let peak = samples
        .get(edge_index..)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::invalid("edge index beyond the trace"))?
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(((peak - levels.on) / levels.on * 100.0).max(0.0))
}

/// `10 log10(mean^2 / variance)` over the settled part of the ON period.
pub fn on_snr_db(samples: &[f64], edge_index: usize, levels: Levels) -> Result<f64> {
    let start = settled_index(samples, edge_index, levels, SETTLING_BAND)?.ok_or(Error::NotSettled)?;
    let tail = &samples[start..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (mean * mean / var).log10()).min(SNR_CAP_DB))
}

/// `(max - min) / mean * 100` over repeated runs' final costs.
pub fn cost_spread(final_costs: &[f64]) -> Result<f64> {
    if final_costs.len() < 2 {
        return Err(Error::invalid("cost spread needs at least two runs"));
    }
    let mean = final_costs.iter().sum::<f64>() / final_costs.len() as f64;
    if mean == 0.0 {
        return Err(Error::invalid("cost spread undefined for zero mean cost"));
    }
    let max = final_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = final_costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - min) / mean * 100.0)
}

/// Figures of merit of one response. `None` marks a metric that does not
/// exist for this trace (never rose / never settled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rise_time: Option<f64>,
    pub settling_time: Option<f64>,
    pub overshoot_pct: f64,
    pub mse: f64,
    pub on_snr_db: Option<f64>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "rise_ps,settle_ps,overshoot_pct,mse,snr_db";

    /// Measures `trace` against `sp`, using `levels` as the plateaus.
    pub fn measure(trace: &ResponseTrace, sp: &SetPoint, levels: Levels) -> Result<Self> {
        let samples = &trace.samples;
        let edge = sp.edge_index;
        let rise_time = match rise_time(samples, trace.sample_period, edge, levels) {
            Ok(t) => Some(t),
            Err(Error::NotRisen) => None,
            Err(e) => return Err(e),
        };
        let settling_time = settling_time(samples, trace.sample_period, edge, levels)?;
        let on_snr_db = match settling_time {
            Some(_) => Some(on_snr_db(samples, edge, levels)?),
            None => None,
        };
        Ok(Self {
            rise_time,
            settling_time,
            overshoot_pct: overshoot(samples, edge, levels)?,
            mse: mse(samples, &sp.samples)?,
            on_snr_db,
        })
    }

    /// Measures against the set point's own plateaus.
    pub fn against_set_point(trace: &ResponseTrace, sp: &SetPoint) -> Result<Self> {
        Self::measure(trace, sp, sp.levels())
    }

    /// Measures against the trace's own steady states.
    pub fn against_own_levels(trace: &ResponseTrace, sp: &SetPoint) -> Result<Self> {
        Self::measure(trace, sp, Levels::from_trace(&trace.samples, sp.edge_index)?)
    }

    /// One CSV row; a missing metric is an empty field.
    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{}",
            opt(self.rise_time.map(|t| t * 1e12)),
            opt(self.settling_time.map(|t| t * 1e12)),
            self.overshoot_pct,
            self.mse,
            opt(self.on_snr_db)
        )
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::RiseTime => self.rise_time,
            Metric::SettlingTime => self.settling_time,
            Metric::Overshoot => Some(self.overshoot_pct),
            Metric::Mse => Some(self.mse),
            Metric::Snr => self.on_snr_db,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    RiseTime,
    SettlingTime,
    Overshoot,
    Mse,
    Snr,
}

/// `min | max | mean | std` of one metric over settled reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
    pub excluded_count: usize,
}

/// Summarises `metric` over the reports that settled; never-settled
/// reports are dropped and counted in `excluded_count`.
pub fn summarize(reports: &[MetricsReport], metric: Metric) -> Result<SummaryStats> {
    if reports.is_empty() {
        return Err(Error::invalid("nothing to summarise"));
    }
    let values: Vec<f64> = reports
        .iter()
        .filter(|r| r.settling_time.is_some())
        .filter_map(|r| r.get(metric))
        .collect();
    if values.is_empty() {
        return Err(Error::NotSettled);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SummaryStats {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
        count: values.len(),
        excluded_count: reports.len() - values.len(),
    })
}
