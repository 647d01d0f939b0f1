use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Upper edge of the low-voltage region where `ln I` is linear in `V`.
const MAX_FIT_VOLTAGE: f64 = 0.8;

/// Diode-law parameters: `ln I = ln I_s + (1/eta) * qV / (k_B T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    pub eta: f64,
    pub i_s: f64,
    pub temperature: f64,
}

impl DiodeParams {
    pub fn new(eta: f64, i_s: f64, temperature: f64) -> Result<Self> {
        if !(eta > 0.0 && i_s > 0.0 && temperature > 0.0) {
            return Err(Error::invalid("diode parameters must all be positive"));
        }
        Ok(Self { eta, i_s, temperature })
    }

    /// Thermal voltage `k_B T / q`.
    pub fn thermal_voltage(&self) -> f64 {
        BOLTZMANN * self.temperature / ELEMENTARY_CHARGE
    }

    pub fn current(&self, voltage: f64) -> f64 {
        self.i_s * (voltage / (self.eta * self.thermal_voltage())).exp()
    }
}

/// Least-squares fit of `ln I` against `V`.
pub fn fit_diode_params(iv_points: &[(f64, f64)], temperature: f64) -> Result<DiodeParams> {
    if iv_points.len() < 2 {
        return Err(Error::invalid("need at least two I-V points"));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    for &(v, i) in iv_points {
        if !(i > 0.0) {
            return Err(Error::invalid(format!("current {i} A at {v} V is not positive")));
        }
        if v >= MAX_FIT_VOLTAGE {
            return Err(Error::invalid(format!("{v} V lies outside the < {MAX_FIT_VOLTAGE} V fit region")));
        }
    }
    let n = iv_points.len() as f64;
    let mean_v = iv_points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_ln = iv_points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(v, i) in iv_points {
        let dv = v - mean_v;
        sxx += dv * dv;
        sxy += dv * (i.ln() - mean_ln);
    }
    if sxx <= f64::EPSILON * mean_v.abs().max(1.0) {
        return Err(Error::DegenerateFit("all voltages are equal".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!("non-positive slope {slope}")));
    }
    let intercept = mean_ln - slope * mean_v;
    let vt = BOLTZMANN * temperature / ELEMENTARY_CHARGE;
    DiodeParams::new(1.0 / (slope * vt), intercept.exp(), temperature)
}
