use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::tf::TransferFunction;
use crate::error::{Error, Result};

/// Frequency scale (rad/s) used to condition the canonical coefficients,
/// close to `(a0 / a9)^(1/9)`.
pub const DEFAULT_FREQ_SCALE: f64 = 1e10;

/// Controllable-canonical realization in normalised time `tau = freq_scale * t`:
/// `dx/dtau = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    pub freq_scale: f64,
}

/// Realizes `tf` after substituting `s = freq_scale * s'` and making the
/// denominator monic.
pub fn to_state_space(tf: &TransferFunction, freq_scale: f64) -> Result<StateSpaceModel> {
    tf.validate()?;
    if !(freq_scale > 0.0 && freq_scale.is_finite()) {
        return Err(Error::invalid(format!("freq_scale must be positive, got {freq_scale}")));
    }
    let n = tf.order();
    let scaled: Vec<f64> = tf
        .denominator
        .iter()
        .enumerate()
        .map(|(i, &a)| a * freq_scale.powi(i as i32))
        .collect();
    let lead = scaled[n];
    let mut monic = Vec::with_capacity(n + 1);
    for (index, &a) in scaled.iter().enumerate() {
        let v = a / lead;
        if !v.is_finite() || !lead.is_finite() || lead == 0.0 {
            return Err(Error::NonFiniteScaling { index, freq_scale });
        }
        monic.push(v);
    }
    let gain = tf.numerator / lead;
    if !gain.is_finite() {
        return Err(Error::NonFiniteScaling { index: n, freq_scale });
    }

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -monic[j];
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mut c = DVector::zeros(n);
    c[0] = gain;
    Ok(StateSpaceModel { a, b, c, d: 0.0, freq_scale })
}

impl StateSpaceModel {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// `C (jw/w0 I - A)^-1 B + D` at physical frequency `hz`, by a complex
    /// LU solve (independent of the polynomial form).
    pub fn response_at(&self, hz: f64) -> Complex64 {
        let n = self.order();
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * hz / self.freq_scale);
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(n, Complex64::new(f64::NAN, f64::NAN)));
        x.iter().zip(self.c.iter()).map(|(xi, &ci)| xi * ci).sum::<Complex64>() + self.d
    }

    /// Equilibrium state under constant input `u`: `A x = -B u`.
    pub fn equilibrium(&self, u: f64) -> Result<DVector<f64>> {
        let rhs = -&self.b * u;
        self.a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::invalid("state matrix is singular (pole at the origin)"))
    }

    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.c.dot(&self.equilibrium(1.0)?) + self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::tf::{canonical_tf, log_space, make_variants};

    #[test]
    fn conditioned_coefficients_are_tame() {
        let ss = to_state_space(&canonical_tf(), DEFAULT_FREQ_SCALE).unwrap();
        // Hand-computed a_i * 1e10^i / (a_9 * 1e90): 1.4545, 10.242, 55.758,
        // 170.91, 83.030, 103.03, 28.848, 18.485, 2.7636.
        let expected = [1.4545, 10.242, 55.758, 170.91, 83.030, 103.03, 28.848, 18.485, 2.7636];
        for (j, e) in expected.iter().enumerate() {
            let got = -ss.a[(8, j)];
            assert!((got / e - 1.0).abs() < 1e-3, "coef {j}: {got}");
            assert!((1e-3..=1e3).contains(&got.abs()));
        }
    }

    #[test]
    fn first_order_textbook() {
        let tf = TransferFunction::new(1.0, vec![1.0, 1.0]).unwrap();
        let ss = to_state_space(&tf, 1.0).unwrap();
        assert_eq!(ss.a[(0, 0)], -1.0);
        assert_eq!(ss.b[0], 1.0);
        assert_eq!(ss.c[0], 1.0);
        assert_eq!(ss.d, 0.0);
    }

    #[test]
    fn dc_consistency() {
        let tf = canonical_tf();
        let ss = to_state_space(&tf, DEFAULT_FREQ_SCALE).unwrap();
        assert!((ss.dc_gain().unwrap() / tf.dc_gain() - 1.0).abs() < 1e-12);
        assert!((ss.response_at(1e-3).re / tf.dc_gain() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_scale_rejected() {
        assert!(matches!(
            to_state_space(&canonical_tf(), 1e40),
            Err(Error::NonFiniteScaling { .. })
        ));
        assert!(to_state_space(&canonical_tf(), 0.0).is_err());
    }

    #[test]
    fn realization_fidelity_for_every_variant() {
        let freqs = log_space(1e7, 1e10, 100);
        let mut tfs = make_variants(&canonical_tf());
        tfs.push(canonical_tf());
        for tf in &tfs {
            let ss = to_state_space(tf, DEFAULT_FREQ_SCALE).unwrap();
            for &f in &freqs {
                let h_tf = tf.magnitude_at(f);
                let h_ss = ss.response_at(f).norm();
                assert!(((h_ss - h_tf) / h_tf).abs() < 1e-3, "{f} Hz: {h_ss} vs {h_tf}");
            }
        }
    }
}
