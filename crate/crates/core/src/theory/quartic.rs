//! The five-level truncation next to the region edge for `b = 1`.
//!
//! `U_up` is tridiagonal with zero diagonal; row `i` carries the denominator
//! `f + 5 − i` and the coupling between rows `i` and `i+1` is `v_i`. Its
//! characteristic polynomial is `μ(μ⁴ − Aμ² + B)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoeffs {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub v: [f64; 4],
}

/// `a_i = v_i² / ((f+4−i)(f+5−i))`, the products `U_{i,i+1}U_{i+1,i}/λ²`.
fn pair_terms(v: &[f64; 4], f: f64) -> [f64; 4] {
    [
        v[0] * v[0] / ((f + 3.0) * (f + 4.0)),
        v[1] * v[1] / ((f + 2.0) * (f + 3.0)),
        v[2] * v[2] / ((f + 1.0) * (f + 2.0)),
        v[3] * v[3] / (f * (f + 1.0)),
    ]
}

pub fn quartic_coeffs(v: [f64; 4], f: f64, lambda: f64) -> Result<QuarticCoeffs> {
    if !(f > 0.0) {
        return Err(Error::InvalidParameter(format!("f must be positive, got {f}")));
    }
    let t = pair_terms(&v, f);
    let l2 = lambda * lambda;
    Ok(QuarticCoeffs {
        a: l2 * t.iter().sum::<f64>(),
        b: l2 * l2 * (t[0] * t[2] + t[1] * t[3] + t[0] * t[3]),
        f,
        v,
    })
}

impl QuarticCoeffs {
    pub fn discriminant(&self) -> f64 {
        self.a * self.a - 4.0 * self.b
    }

    /// Closed-form threshold: `s > 1` exactly when `A > 2` or `A > B + 1`.
    pub fn exceeds_unit_radius(&self) -> bool {
        self.a > 2.0 || self.a > self.b + 1.0
    }
}

/// `√μ²₊` with `μ²₊ = (A + √(A² − 4B)) / 2`.
pub fn quartic_s(q: &QuarticCoeffs) -> Result<f64> {
    let disc = q.discriminant();
    if disc < 0.0 {
        return Err(Error::Degenerate(format!(
            "negative quartic discriminant {disc:e} (A = {}, B = {})",
            q.a, q.b
        )));
    }
    Ok((0.5 * (q.a + disc.sqrt())).sqrt())
}

/// `X_up = A / λ²`.
pub fn x_statistic(v: [f64; 4], f: f64) -> Result<f64> {
    Ok(quartic_coeffs(v, f, 1.0)?.a)
}

/// `X = max(X_up(f), X_down(3 − f))` with independent couplings above and
/// below the region.
pub fn x_max(v_up: [f64; 4], v_down: [f64; 4], f: f64) -> Result<f64> {
    Ok(x_statistic(v_up, f)?.max(x_statistic(v_down, 3.0 - f)?))
}

/// The explicit 5×5 `U_up`.
pub fn assemble_u_up(v: [f64; 4], f: f64, lambda: f64) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(5, 5);
    for i in 0..4 {
        u[(i, i + 1)] = lambda * v[i] / (f + 4.0 - i as f64);
        u[(i + 1, i)] = lambda * v[i] / (f + 3.0 - i as f64);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius;

    #[test]
    fn unit_couplings() {
        let q = quartic_coeffs([1.0; 4], 1.0, 1.0).unwrap();
        assert!((q.a - 0.8).abs() < 1e-15);
        assert!((q.a - (1.0 / 20.0 + 1.0 / 12.0 + 1.0 / 6.0 + 0.5)).abs() < 1e-15);
        assert!((x_statistic([1.0; 4], 1.0).unwrap() - 0.8).abs() < 1e-15);
        let s = quartic_s(&q).unwrap();
        let dense = spectral_radius(&assemble_u_up([1.0; 4], 1.0, 1.0));
        assert!((s - dense).abs() < 1e-12);
    }

    #[test]
    fn zero_couplings_and_scaling() {
        let q = quartic_coeffs([0.0; 4], 1.3, 2.0).unwrap();
        assert_eq!((q.a, q.b), (0.0, 0.0));
        assert_eq!(quartic_s(&q).unwrap(), 0.0);
        let v = [0.3, -1.2, 0.8, 2.0];
        let q1 = quartic_coeffs(v, 1.4, 0.7).unwrap();
        let q2 = quartic_coeffs(v, 1.4, 1.4).unwrap();
        assert!((q2.a - 4.0 * q1.a).abs() < 1e-14);
        assert!((q2.b - 16.0 * q1.b).abs() < 1e-14);
        assert!(quartic_coeffs(v, 0.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_boundaries() {
        let b0 = QuarticCoeffs { a: 3.0, b: 0.0, f: 1.0, v: [0.0; 4] };
        assert!((quartic_s(&b0).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
        let edge = QuarticCoeffs { a: 2.0, b: 1.0, f: 1.0, v: [0.0; 4] };
        assert_eq!(quartic_s(&edge).unwrap(), 1.0);
        assert!(!edge.exceeds_unit_radius());
        let bad = QuarticCoeffs { a: 1.0, b: 1.0, f: 1.0, v: [0.0; 4] };
        assert!(quartic_s(&bad).is_err());
    }

    #[test]
    fn small_lambda_prediction_matches_the_oracle() {
        // X = 0.8 and λ = 2: X > 1/λ², so the five-level truncation fails.
        let q = quartic_coeffs([1.0; 4], 1.0, 2.0).unwrap();
        assert!(q.exceeds_unit_radius());
        assert!(spectral_radius(&assemble_u_up([1.0; 4], 1.0, 2.0)) > 1.0);
        assert!(x_max([0.0; 4], [0.0; 4], 1.5).unwrap() == 0.0);
    }
}
