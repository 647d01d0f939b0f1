use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state_space::to_state_space;
use crate::error::{Error, Result};

/// `H(s) = numerator / sum_i denominator[i] * s^i`, coefficients ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    pub numerator: f64,
    pub denominator: Vec<f64>,
    /// Present when this TF was derived from another by a [`VariantSpec`].
    pub variant: Option<VariantSpec>,
}

/// Component of a transfer function scaled by a variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantTarget {
    Numerator,
    A0,
    A1,
    A2,
}

impl fmt::Display for VariantTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantTarget::Numerator => "numerator",
            VariantTarget::A0 => "a0",
            VariantTarget::A1 => "a1",
            VariantTarget::A2 => "a2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub target: VariantTarget,
    pub factor: f64,
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.target, self.factor)
    }
}

/// The equivalent-circuit TF of the reference SOA.
pub fn canonical_tf() -> TransferFunction {
    TransferFunction {
        numerator: 2.01e85,
        denominator: vec![
            2.40e90, 1.69e81, 9.20e71, 2.82e62, 1.37e52, 1.70e42, 4.76e31, 3.05e21, 4.56e10, 1.65,
        ],
        variant: None,
    }
}

/// The ten device variants: numerator x{1.0, 1.2, 1.4}, a0 x0.8,
/// a1 x{0.7, 0.8, 1.2}, a2 x{1.05, 1.1, 1.2}.
pub fn variant_table() -> [VariantSpec; 10] {
    use VariantTarget::*;
    let v = |target, factor| VariantSpec { target, factor };
    [
        v(Numerator, 1.0),
        v(Numerator, 1.2),
        v(Numerator, 1.4),
        v(A0, 0.8),
        v(A1, 0.7),
        v(A1, 0.8),
        v(A1, 1.2),
        v(A2, 1.05),
        v(A2, 1.1),
        v(A2, 1.2),
    ]
}

pub fn make_variants(base: &TransferFunction) -> Vec<TransferFunction> {
    variant_table().iter().map(|v| base.with_variant(*v)).collect()
}

impl TransferFunction {
    pub fn new(numerator: f64, denominator: Vec<f64>) -> Result<Self> {
        let tf = Self { numerator, denominator, variant: None };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.denominator.len() < 2 {
            return Err(Error::invalid("denominator must be at least first order"));
        }
        if !self.numerator.is_finite() || self.denominator.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("transfer function coefficients must be finite"));
        }
        if *self.denominator.last().unwrap() == 0.0 {
            return Err(Error::invalid("leading denominator coefficient is zero"));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.denominator.len() - 1
    }

    /// Copy with one component scaled. Targets beyond the polynomial order
    /// leave the TF unchanged apart from the descriptor.
    pub fn with_variant(&self, spec: VariantSpec) -> Self {
        let mut out = self.clone();
        match spec.target {
            VariantTarget::Numerator => out.numerator *= spec.factor,
            VariantTarget::A0 => out.denominator[0] *= spec.factor,
            VariantTarget::A1 => out.denominator[1] *= spec.factor,
            VariantTarget::A2 => {
                if let Some(a) = out.denominator.get_mut(2) {
                    *a *= spec.factor
                }
            }
        }
        out.variant = Some(spec);
        out
    }

    pub fn dc_gain(&self) -> f64 {
        self.numerator / self.denominator[0]
    }

    /// `H(s)` by Horner's rule.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let den = self.denominator.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * s + a);
        Complex64::new(self.numerator, 0.0) / den
    }

    /// `|H(j 2 pi f)|`.
    pub fn magnitude_at(&self, hz: f64) -> f64 {
        self.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * hz)).norm()
    }

    /// Geometric-mean pole magnitude `(a0 / an)^(1/n)`, a natural
    /// frequency scale for conditioning.
    pub fn natural_scale(&self) -> f64 {
        (self.denominator[0] / self.denominator[self.order()]).abs().powf(1.0 / self.order() as f64)
    }

    /// Poles in rad/s, from the eigenvalues of the conditioned companion
    /// matrix.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        let scale = self.natural_scale();
        let ss = to_state_space(self, scale)?;
        Ok(ss.a.complex_eigenvalues().iter().map(|p| p * scale).collect())
    }

    /// Every pole strictly in the left half plane.
    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| p.re < 0.0))
    }

    pub fn to_toml_string(&self) -> String {
        let mut table = toml::Table::new();
        table.insert("numerator".into(), toml::Value::Float(self.numerator));
        for (i, a) in self.denominator.iter().enumerate() {
            table.insert(format!("a{i}"), toml::Value::Float(*a));
        }
        if let Some(v) = &self.variant {
            let mut vt = toml::Table::new();
            vt.insert("target".into(), toml::Value::String(v.target.to_string()));
            vt.insert("factor".into(), toml::Value::Float(v.factor));
            table.insert("variant".into(), toml::Value::Table(vt));
        }
        toml::to_string(&table).expect("plain float table serialises")
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let num = |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
        let numerator = table.get("numerator").and_then(num).ok_or("missing numeric key `numerator`")?;
        let mut denominator = Vec::new();
        while let Some(v) = table.get(&format!("a{}", denominator.len())) {
            denominator.push(num(v).ok_or_else(|| format!("key a{} is not a number", denominator.len()))?);
        }
        let variant = match table.get("variant") {
            Some(v) => Some(v.clone().try_into::<VariantSpec>().map_err(|e| e.to_string())?),
            None => None,
        };
        let tf = Self { numerator, denominator, variant };
        tf.validate().map_err(|e| e.to_string())?;
        Ok(tf)
    }

    pub fn write_toml(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_toml(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|m| Error::parse(path, m))
    }
}

/// Bode magnitude in dB, normalised to 0 dB at the lowest requested
/// frequency. Output keeps the input order.
pub fn frequency_response(tf: &TransferFunction, freqs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if freqs.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid("frequencies must be positive"));
    }
    let Some(&lowest) = freqs.iter().min_by(|a, b| a.total_cmp(b)) else {
        return Ok(Vec::new());
    };
    let anchor = tf.magnitude_at(lowest);
    Ok(freqs.iter().map(|&f| (f, 20.0 * (tf.magnitude_at(f) / anchor).log10())).collect())
}

/// `n` log-spaced frequencies covering `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// First downward crossing of `level_db` on a fine log grid, refined by
/// bisection on the exact magnitude.
pub fn crossing_frequency(tf: &TransferFunction, lo: f64, hi: f64, level_db: f64) -> Option<f64> {
    let anchor = tf.magnitude_at(lo);
    let db = |f: f64| 20.0 * (tf.magnitude_at(f) / anchor).log10();
    let grid = log_space(lo, hi, 4000);
    let i = grid.windows(2).position(|w| db(w[0]) >= level_db && db(w[1]) < level_db)?;
    let (mut a, mut b) = (grid[i], grid[i + 1]);
    for _ in 0..60 {
        let m = (a * b).sqrt();
        if db(m) >= level_db {
            a = m
        } else {
            b = m
        }
    }
    Some((a * b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_coefficients() {
        let tf = canonical_tf();
        assert_eq!(tf.denominator[0], 2.40e90);
        assert_eq!(tf.denominator[9], 1.65);
        assert_eq!(tf.order(), 9);
        assert!((tf.dc_gain() - 8.375e-6).abs() < 1e-12);
    }

    #[test]
    fn canonical_is_stable() {
        let poles = canonical_tf().poles().unwrap();
        assert_eq!(poles.len(), 9);
        assert!(poles.iter().all(|p| p.re < 0.0));
        // Slowest pair, frozen from an independent companion-matrix root
        // solve of the same polynomial: -1.2163e7 +- 2.4422e10 j rad/s.
        let slow = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((slow / -1.2163e7 - 1.0).abs() < 1e-3, "{slow}");
    }

    #[test]
    fn variants_follow_factor_table() {
        let base = canonical_tf();
        let vs = make_variants(&base);
        assert_eq!(vs.len(), 10);
        assert_eq!(vs[0].numerator, base.numerator);
        assert_eq!(vs[0].denominator, base.denominator);
        assert!((vs[3].dc_gain() - base.dc_gain() / 0.8).abs() < 1e-18);
        for v in &vs {
            let changed = (v.numerator != base.numerator) as usize
                + v.denominator.iter().zip(&base.denominator).filter(|(a, b)| a != b).count();
            assert!(changed <= 1);
        }
        // a1 x1.2 and a2 x1.2 carry a slowly growing pair (+1.866e7 and
        // +4.225e7 rad/s, cross-checked with numpy.roots); the rest are stable.
        let stable: Vec<bool> = vs.iter().map(|v| v.is_stable().unwrap()).collect();
        assert_eq!(stable, [true, true, true, true, true, true, false, true, true, false]);
        let growth = vs[6].poles().unwrap().iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((growth / 1.866048e7 - 1.0).abs() < 1e-4, "{growth}");
    }

    #[test]
    fn normalised_at_lowest_frequency() {
        let tf = canonical_tf();
        let resp = frequency_response(&tf, &[1e9, 1e7, 1e8]).unwrap();
        assert_eq!(resp[1].1, 0.0);
        assert!(resp[0].1 < 0.0);
        assert!(frequency_response(&tf, &[0.0]).is_err());
    }

    #[test]
    fn rolls_off_at_high_frequency() {
        let tf = canonical_tf();
        let freqs = log_space(2e10, 1e11, 50);
        let resp = frequency_response(&tf, &freqs).unwrap();
        assert!(resp.windows(2).all(|w| w[1].1 < w[0].1));
        // Nine-pole roll-off: about -180 dB/decade well above the poles.
        let slope = tf.magnitude_at(1e12).log10() - tf.magnitude_at(1e11).log10();
        assert!((slope + 9.0).abs() < 0.05);
    }

    #[test]
    fn toml_round_trip() {
        let tf = canonical_tf().with_variant(VariantSpec { target: VariantTarget::A1, factor: 0.7 });
        let back = TransferFunction::from_toml_str(&tf.to_toml_string()).unwrap();
        assert_eq!(back, tf);
        assert!(TransferFunction::from_toml_str("numerator = 1.0\na0 = 1.0\n").is_err());
    }
}
