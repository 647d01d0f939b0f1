//! Drive waveform generators and the search-space templates built on them.
//!
//! All waveforms share the arbitrary-waveform-generator grid: 240 samples
//! spaced 83.3 ps apart, each sample confined to the 0..7 V swing of the RF
//! driver.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Levels};
use crate::plant::ResponseTrace;

/// Spacing of the drive samples (12 GS/s generator).
pub const SAMPLE_PERIOD: f64 = 83.3e-12;
/// Peak-to-peak drive range in volts.
pub const V_MAX: f64 = 7.0;
/// Samples per 20 ns drive window.
pub const WAVEFORM_LEN: usize = 240;
/// Default DAC resolution.
pub const DEFAULT_BITS: u32 = 8;

/// Stand-in for the MISIC1 bit sequence, which is not available here:
/// two consecutive impulse slots.
pub const MISIC1_PLACEHOLDER: &str = "11";

/// A sampled drive signal in volts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_period: f64,
}

impl Waveform {
    /// Builds a waveform, rejecting empty input, a non-positive period and
    /// samples outside `[0, V_MAX]`.
    pub fn new(samples: Vec<f64>, sample_period: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("waveform must have at least one sample"));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::invalid(format!("sample period must be positive, got {sample_period}")));
        }
        for (index, &value) in samples.iter().enumerate() {
            if !(0.0..=V_MAX).contains(&value) {
                return Err(Error::OutOfBounds { index, value, lo: 0.0, hi: V_MAX });
            }
        }
        Ok(Self { samples, sample_period })
    }

    /// Clips every sample into `[0, V_MAX]` instead of rejecting it.
    pub fn clipped(mut samples: Vec<f64>, sample_period: f64) -> Result<Self> {
        for s in samples.iter_mut() {
            if !s.is_finite() {
                return Err(Error::invalid("non-finite drive sample"));
            }
            *s = s.clamp(0.0, V_MAX);
        }
        Self::new(samples, sample_period)
    }

    pub fn constant(level: f64, len: usize, sample_period: f64) -> Result<Self> {
        Self::new(vec![level; len], sample_period)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Shifts the waveform right by `k` samples, holding the first sample
    /// over the vacated prefix. Length is preserved.
    pub fn delayed(&self, k: usize) -> Waveform {
        let n = self.samples.len();
        let first = self.samples[0];
        let samples = (0..n).map(|i| if i < k { first } else { self.samples[i - k] }).collect();
        Waveform { samples, sample_period: self.sample_period }
    }

    /// Writes `path` (one `volts` column) and the `.hdr` sidecar holding
    /// the sample period and length.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut body = String::with_capacity(self.samples.len() * 20 + 8);
        body.push_str("volts\n");
        for s in &self.samples {
            body.push_str(&format!("{s}\n"));
        }
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
        let header = WaveformHeader { sample_period: self.sample_period, length: self.samples.len() };
        let hdr_path = header_path(path);
        let text = toml::to_string(&header).map_err(|e| Error::parse(&hdr_path, e))?;
        fs::write(&hdr_path, text).map_err(|e| Error::io(&hdr_path, e))
    }

    /// Reads a waveform written by [`Waveform::write_csv`]. A missing
    /// sidecar falls back to the default sample period.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("volts")) {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::parse(path, format!("line {}: not a number: {line:?}", lineno + 1)))?;
            samples.push(v);
        }
        let hdr_path = header_path(path);
        let sample_period = match fs::read_to_string(&hdr_path) {
            Ok(hdr) => {
                let header: WaveformHeader = toml::from_str(&hdr).map_err(|e| Error::parse(&hdr_path, e))?;
                if header.length != samples.len() {
                    return Err(Error::parse(
                        path,
                        format!("header declares {} samples, file has {}", header.length, samples.len()),
                    ));
                }
                header.sample_period
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => SAMPLE_PERIOD,
            Err(e) => return Err(Error::io(&hdr_path, e)),
        };
        Self::new(samples, sample_period)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WaveformHeader {
    sample_period: f64,
    length: usize,
}

/// Sidecar header path: `drive.csv` -> `drive.hdr`.
pub fn header_path(csv: &Path) -> PathBuf {
    csv.with_extension("hdr")
}

/// OFF/ON split of a single switching cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepLayout {
    pub off_len: usize,
    pub on_len: usize,
    pub v_off: f64,
    pub v_on: f64,
    pub sample_period: f64,
}

impl Default for StepLayout {
    fn default() -> Self {
        Self { off_len: 60, on_len: 180, v_off: 0.0, v_on: 3.5, sample_period: SAMPLE_PERIOD }
    }
}

impl StepLayout {
    pub fn new(off_len: usize, on_len: usize, v_off: f64, v_on: f64) -> Result<Self> {
        let layout = Self { off_len, on_len, v_off, v_on, ..Self::default() };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid("layout has zero length"));
        }
        if !(0.0 <= self.v_off && self.v_off < self.v_on && self.v_on <= V_MAX) {
            return Err(Error::invalid(format!(
                "need 0 <= v_off < v_on <= {V_MAX}, got v_off={} v_on={}",
                self.v_off, self.v_on
            )));
        }
        if !(self.sample_period > 0.0) {
            return Err(Error::invalid("sample period must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.off_len + self.on_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the first ON sample.
    pub fn edge_index(&self) -> usize {
        self.off_len
    }

    fn samples_in(&self, duration: f64) -> usize {
        (duration / self.sample_period).round() as usize
    }
}

/// Plain OFF-then-ON step.
pub fn step(layout: &StepLayout) -> Result<Waveform> {
    layout.validate()?;
    let mut samples = vec![layout.v_off; layout.off_len];
    samples.resize(layout.len(), layout.v_on);
    Waveform::new(samples, layout.sample_period)
}

/// Step with the first `impulse_width` of the ON period raised by
/// `impulse_v`.
pub fn pisic(layout: &StepLayout, impulse_v: f64, impulse_width: f64) -> Result<Waveform> {
    layout.validate()?;
    check_impulse(layout, impulse_v)?;
    if impulse_width < layout.sample_period * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "impulse width {impulse_width:e} s is shorter than one sample"
        )));
    }
    let width = layout.samples_in(impulse_width);
    if width > layout.on_len {
        return Err(Error::invalid("impulse is longer than the ON period"));
    }
    let mut samples = step(layout)?.into_samples();
    let edge = layout.edge_index();
    for s in &mut samples[edge..edge + width] {
        *s = (layout.v_on + impulse_v).min(V_MAX);
    }
    Waveform::new(samples, layout.sample_period)
}

/// Step where ON-period slot `k` (each `slot_width` long) is raised by
/// `impulse_v` iff bit `k` of `pattern` is `1`.
pub fn misic(layout: &StepLayout, impulse_v: f64, pattern: &str, slot_width: f64) -> Result<Waveform> {
    layout.validate()?;
    check_impulse(layout, impulse_v)?;
    if pattern.is_empty() {
        return Err(Error::invalid("MISIC pattern is empty"));
    }
    let slot = layout.samples_in(slot_width);
    if slot == 0 {
        return Err(Error::invalid("slot width is shorter than one sample"));
    }
    if pattern.len() * slot > layout.on_len {
        return Err(Error::invalid(format!(
            "pattern of {} slots x {slot} samples overruns the {}-sample ON period",
            pattern.len(),
            layout.on_len
        )));
    }
    let mut samples = step(layout)?.into_samples();
    let edge = layout.edge_index();
    for (k, bit) in pattern.chars().enumerate() {
        match bit {
            '0' => {}
            '1' => {
                let start = edge + k * slot;
                for s in &mut samples[start..start + slot] {
                    *s = (layout.v_on + impulse_v).min(V_MAX);
                }
            }
            other => return Err(Error::invalid(format!("pattern bit {other:?} is not 0 or 1"))),
        }
    }
    Waveform::new(samples, layout.sample_period)
}

fn check_impulse(layout: &StepLayout, impulse_v: f64) -> Result<()> {
    if impulse_v < 0.0 {
        return Err(Error::invalid("impulse amplitude must be non-negative"));
    }
    let peak = layout.v_on + impulse_v;
    // Sum of two-decimal voltages (2.95 + 4.05) may round just above the cap.
    if peak > V_MAX + 1e-9 {
        return Err(Error::AmplitudeCap { value: peak, limit: V_MAX });
    }
    Ok(())
}

/// Raised-cosine spectrum with roll-off `beta` and symbol period `t`.
pub fn raised_cosine_spectrum(f: f64, beta: f64, t: f64) -> f64 {
    let f = f.abs();
    let f1 = (1.0 - beta) / (2.0 * t);
    let f2 = (1.0 + beta) / (2.0 * t);
    if f <= f1 {
        1.0
    } else if f <= f2 {
        0.5 * (1.0 + (std::f64::consts::PI * t / beta * (f - f1)).cos())
    } else {
        0.0
    }
}

/// Inverse Fourier transform of [`raised_cosine_spectrum`] at time `time`,
/// integrated numerically with composite Simpson's rule over the (even,
/// band-limited) spectrum.
pub fn raised_cosine_pulse(time: f64, beta: f64, t: f64) -> f64 {
    const PANELS: usize = 512;
    let f1 = (1.0 - beta) / (2.0 * t);
    let f2 = (1.0 + beta) / (2.0 * t);
    let w = 2.0 * std::f64::consts::PI * time;
    // Flat part integrates in closed form; only the roll-off needs quadrature.
    let flat = if time == 0.0 { f1 } else { (w * f1).sin() / w };
    let rolloff = if f2 > f1 {
        let h = (f2 - f1) / PANELS as f64;
        let g = |f: f64| raised_cosine_spectrum(f, beta, t) * (w * f).cos();
        let mut acc = g(f1) + g(f2);
        for i in 1..PANELS {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * g(f1 + i as f64 * h);
        }
        acc * h / 3.0
    } else {
        0.0
    };
    2.0 * (flat + rolloff)
}

/// Step whose rising edge follows the integrated raised-cosine pulse,
/// centred on the edge sample and windowed to `+-4 symbol_period`.
pub fn raised_cosine_step(layout: &StepLayout, beta: f64, symbol_period: f64) -> Result<Waveform> {
    layout.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    if !(symbol_period > 0.0) {
        return Err(Error::invalid("symbol period must be positive"));
    }
    let dt = layout.sample_period;
    let half = (4.0 * symbol_period / dt).round() as i64;
    let pulse: Vec<f64> = (-half..=half).map(|k| raised_cosine_pulse(k as f64 * dt, beta, symbol_period)).collect();
    // Cumulative trapezoid, normalised to end at exactly 1.
    let mut edge_shape = vec![0.0; pulse.len()];
    for i in 1..pulse.len() {
        edge_shape[i] = edge_shape[i - 1] + 0.5 * (pulse[i - 1] + pulse[i]);
    }
    let total = *edge_shape.last().unwrap_or(&1.0);
    let edge = layout.edge_index() as i64;
    let swing = layout.v_on - layout.v_off;
    let samples = (0..layout.len() as i64)
        .map(|i| {
            let k = i - edge + half;
            let frac = if k < 0 {
                0.0
            } else if k as usize >= edge_shape.len() {
                1.0
            } else {
                edge_shape[k as usize] / total
            };
            (layout.v_off + frac * swing).clamp(0.0, V_MAX)
        })
        .collect();
    Waveform::new(samples, dt)
}

/// Ideal optical target: instantaneous OFF -> ON transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetPoint {
    pub samples: Vec<f64>,
    pub edge_index: usize,
    pub off_value: f64,
    pub on_value: f64,
}

impl SetPoint {
    pub fn ideal(len: usize, edge_index: usize, off_value: f64, on_value: f64) -> Self {
        let samples = (0..len).map(|i| if i < edge_index { off_value } else { on_value }).collect();
        Self { samples, edge_index, off_value, on_value }
    }

    pub fn levels(&self) -> Levels {
        Levels { off: self.off_value, on: self.on_value }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Builds the ideal target from the plateaus of a settled step response.
pub fn make_set_point(reference: &ResponseTrace, edge_index: usize) -> Result<SetPoint> {
    let levels = Levels::from_trace(&reference.samples, edge_index)?;
    if metrics::settling_time(&reference.samples, reference.sample_period, edge_index, levels)?.is_none() {
        return Err(Error::NotSettled);
    }
    Ok(SetPoint::ideal(reference.samples.len(), edge_index, levels.off, levels.on))
}

/// Per-sample voltage bounds of the search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsTemplate {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundsTemplate {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch { expected: lo.len(), got: hi.len() });
        }
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(0.0 <= l && l <= h && h <= V_MAX) {
                return Err(Error::InvalidBounds { index, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unrestricted `[0, V_MAX]` box.
    pub fn full_range(len: usize) -> Self {
        Self { lo: vec![0.0; len], hi: vec![V_MAX; len] }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, samples: &[f64]) -> bool {
        samples.len() == self.len()
            && samples.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&s, (&l, &h))| l <= s && s <= h)
    }

    /// First sample falling outside the template, if any.
    pub fn check(&self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: samples.len() });
        }
        for (index, (&s, (&lo, &hi))) in samples.iter().zip(self.lo.iter().zip(&self.hi)).enumerate() {
            if !(lo <= s && s <= hi) {
                return Err(Error::OutOfBounds { index, value: s, lo, hi });
            }
        }
        Ok(())
    }

    pub fn clip(&self, samples: &mut [f64]) {
        for (s, (&l, &h)) in samples.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *s = s.clamp(l, h);
        }
    }

    /// Widening of the template to the nearest quantisation levels that
    /// still lie inside `[0, V_MAX]`, so quantised positions remain feasible.
    pub fn quantized_hull(&self, bits: u32) -> Self {
        let step = V_MAX / ((1u64 << bits) - 1) as f64;
        let lo = self.lo.iter().map(|&l| ((l / step).floor() * step).max(0.0)).collect();
        let hi = self.hi.iter().map(|&h| ((h / step).ceil() * step).min(V_MAX)).collect();
        Self { lo, hi }
    }
}

/// PISIC-shaped search shell.
///
/// OFF samples may rise to `off_s_f * v_on` (never below `v_off`, so the
/// plain step stays feasible). The first `shell_w_f * on_len` ON samples
/// span `[v_on / on_s_f, V_MAX]`; the rest of the ON period spans
/// `[v_on / on_s_f, min(on_s_f * v_on, V_MAX)]`.
pub fn pisic_shell(layout: &StepLayout, shell_w_f: f64, on_s_f: f64, off_s_f: f64) -> Result<BoundsTemplate> {
    layout.validate()?;
    if !(shell_w_f >= 0.0 && on_s_f > 0.0 && off_s_f >= 0.0) {
        return Err(Error::invalid("shell factors must be non-negative (on_s_f strictly positive)"));
    }
    let lead = ((shell_w_f * layout.on_len as f64).round() as usize).min(layout.on_len);
    let off_hi = (off_s_f * layout.v_on).max(layout.v_off).min(V_MAX);
    let on_lo = layout.v_on / on_s_f;
    let on_hi = (on_s_f * layout.v_on).min(V_MAX);
    let mut lo = Vec::with_capacity(layout.len());
    let mut hi = Vec::with_capacity(layout.len());
    for i in 0..layout.len() {
        if i < layout.off_len {
            lo.push(0.0);
            hi.push(off_hi);
        } else if i < layout.off_len + lead {
            lo.push(on_lo);
            hi.push(V_MAX);
        } else {
            lo.push(on_lo);
            hi.push(on_hi);
        }
    }
    BoundsTemplate::new(lo, hi)
}

/// Snaps each sample to the nearest of `2^bits` uniform levels on `[0, V_MAX]`.
pub fn quantize(w: &Waveform, bits: u32) -> Result<Waveform> {
    let mut samples = w.samples.clone();
    quantize_in_place(&mut samples, bits)?;
    Ok(Waveform { samples, sample_period: w.sample_period })
}

pub fn quantize_in_place(samples: &mut [f64], bits: u32) -> Result<()> {
    if !(1..=16).contains(&bits) {
        return Err(Error::invalid(format!("quantisation bits must lie in [1, 16], got {bits}")));
    }
    let top = ((1u32 << bits) - 1) as f64;
    let step = V_MAX / top;
    for s in samples.iter_mut() {
        let level = (*s / step).round().clamp(0.0, top);
        *s = level * step;
    }
    Ok(())
}
