//! Standard matrices, the failure probability `P(n)` and the large-λ laws.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::{histogram, DistributionEstimate, EmpiricalCdf};
use crate::banded::BandedSymmetricMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_spectral_radius;
use crate::model::WbrmInstance;
use crate::npt::build_s_matrices;
use crate::rng;
use crate::stats::{line_fit, LineFit};

/// Floor applied to `ln H` below the support.
pub const LN_H_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Ladder sums stop once `P(n)` drops below this.
pub const LADDER_CUTOFF: f64 = 1e-9;

pub fn default_block_size(b: usize) -> usize {
    (4 * b).max(5)
}

/// `m × m` symmetric band of standard normals, `1 <= |i − j| <= b`, zero diagonal.
pub fn standard_matrix<R: Rng>(m: usize, b: usize, rng: &mut R) -> BandedSymmetricMatrix {
    let mut s = BandedSymmetricMatrix::zeros(m, b);
    for d in 1..=s.bandwidth() {
        for x in s.band_mut(d) {
            *x = rng.sample(StandardNormal);
        }
    }
    s
}

const CHUNK: usize = 1024;

/// Monte Carlo `s(M)` samples, reproducible for a given seed regardless of
/// the worker count.
pub fn standard_matrix_samples(m: usize, b: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if b == 0 || m <= b {
        return Err(Error::InvalidParameter(format!("standard matrix needs 0 < b < m, got m = {m}, b = {b}")));
    }
    Ok((0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::sampler(seed, c as u64);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len)
                .map(|_| symmetric_spectral_radius(&standard_matrix(m, b, &mut r)))
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Histogram and CDF `H(t)` of `s(M)`.
pub fn standard_matrix_h(m: usize, b: usize, trials: usize, seed: u64) -> Result<DistributionEstimate> {
    if trials == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    DistributionEstimate::from_samples(standard_matrix_samples(m, b, trials, seed)?, 80)
}

/// `ln h(t)` against `t²` on the tail window between quantiles `q_lo` and
/// `q_hi`; a Gaussian tail shows up as a straight line with negative slope.
pub fn fit_h_tail(cdf: &EmpiricalCdf, q_lo: f64, q_hi: f64, bins: usize) -> Result<LineFit> {
    let (lo, hi) = (cdf.quantile(q_lo), cdf.quantile(q_hi));
    if !(hi > lo) {
        return Err(Error::Degenerate("empty tail window".into()));
    }
    let used: Vec<_> = histogram(cdf, lo, hi, bins).into_iter().filter(|b| b.count >= 10).collect();
    let x: Vec<f64> = used.iter().map(|b| b.center().powi(2)).collect();
    let y: Vec<f64> = used.iter().map(|b| b.density.ln()).collect();
    let w: Vec<f64> = used.iter().map(|b| b.count as f64).collect();
    line_fit(&x, &y, Some(&w))
}

/// `I(x) = ∫_x^∞ ln H(t) dt` for an empirical `H`.
///
/// `ln H` is linear between consecutive distinct order statistics (trapezoid
/// rule), equals [`LN_H_FLOOR`] below the smallest sample and zero from the
/// largest one on.
#[derive(Debug, Clone, PartialEq)]
pub struct TailIntegral {
    t: Vec<f64>,
    ln_h: Vec<f64>,
    /// `suffix[i] = ∫_{t[i]}^{t_max} ln H`.
    suffix: Vec<f64>,
}

impl TailIntegral {
    pub fn new(cdf: &EmpiricalCdf) -> Self {
        let s = cdf.sorted();
        let n = s.len() as f64;
        let mut t = Vec::new();
        let mut ln_h = Vec::new();
        for (i, &x) in s.iter().enumerate() {
            let h = ((i + 1) as f64 / n).ln().max(LN_H_FLOOR);
            if t.last() == Some(&x) {
                *ln_h.last_mut().unwrap() = h;
            } else {
                t.push(x);
                ln_h.push(h);
            }
        }
        let mut suffix = vec![0.0; t.len()];
        for i in (0..t.len().saturating_sub(1)).rev() {
            suffix[i] = suffix[i + 1] + 0.5 * (ln_h[i] + ln_h[i + 1]) * (t[i + 1] - t[i]);
        }
        Self { t, ln_h, suffix }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x >= hi {
            return 0.0;
        }
        if x < lo {
            return self.suffix[0] + (lo - x) * LN_H_FLOOR;
        }
        let k = self.t.partition_point(|&t| t <= x) - 1;
        let frac = (x - self.t[k]) / (self.t[k + 1] - self.t[k]);
        let at_x = self.ln_h[k] + frac * (self.ln_h[k + 1] - self.ln_h[k]);
        self.suffix[k + 1] + 0.5 * (at_x + self.ln_h[k + 1]) * (self.t[k + 1] - x)
    }
}

pub fn tail_integral(cdf: &EmpiricalCdf, x: f64) -> f64 {
    TailIntegral::new(cdf).eval(x)
}

/// `ln(−I(x)·x²)` against `x²`; the slope estimates `−a` in
/// `I(x) ~ −e^{−a x²}/x²`.
pub fn fit_tail_integral(integral: &TailIntegral, xs: &[f64]) -> Result<LineFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| (x * x, (-integral.eval(x) * x * x).ln()))
        .filter(|p| p.1.is_finite())
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    line_fit(&x, &y, None)
}

/// `P(n) = 1 − exp(λ/(m−1) · I(n/2λ))`, the probability that a region of
/// width `n` still fails the convergence test. `n` may be fractional.
pub fn p_n(n: f64, lambda: f64, m: usize, integral: &TailIntegral) -> f64 {
    let expo = lambda / (m as f64 - 1.0) * integral.eval(n / (2.0 * lambda));
    let p = -expo.exp_m1();
    if p > 0.0 {
        p.min(1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub lambda: f64,
    pub m: usize,
    /// `Σ_{n>=0} P(n)`, truncated once `P < 1e-9`.
    pub sum: f64,
    /// Real `n` with `P(n) = ½`.
    pub n_c: f64,
    pub warning: Option<String>,
}

/// Mean NPT width from the ladder `P(n)`, both as a sum and as the
/// half-point `n_c`.
pub fn mean_np_ladder(lambda: f64, m: usize, cdf: &EmpiricalCdf) -> Result<LadderEstimate> {
    if !(lambda > 0.0) || !lambda.is_finite() || m < 2 {
        return Err(Error::InvalidParameter(format!("ladder needs λ > 0 and m >= 2 (λ = {lambda}, m = {m})")));
    }
    let integral = TailIntegral::new(cdf);
    let p = |n: f64| p_n(n, lambda, m, &integral);
    let mut sum = 0.0;
    let mut k = 0u64;
    loop {
        let v = p(k as f64);
        if v < LADDER_CUTOFF {
            break;
        }
        sum += v;
        k += 1;
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * lambda * integral.support().1;
    if p(lo) < 0.5 || p(hi) > 0.5 {
        return Err(Error::Bisection(format!("P(n) does not bracket 1/2 on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    let warning = (m as f64 >= lambda)
        .then(|| format!("m = {m} is not below λ = {lambda}; outside the large-λ regime"));
    Ok(LadderEstimate {
        lambda,
        m,
        sum,
        n_c: 0.5 * (lo + hi),
        warning,
    })
}

/// `C′ λ √(ln λ)`.
pub fn mean_np_large(lambda: f64, c_prime: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidParameter(format!("large-λ law needs λ > 1, got {lambda}")));
    }
    Ok(c_prime * lambda * lambda.ln().sqrt())
}

/// `s(U_up)` next to its estimate by the largest radius among the
/// `m`-dimensional diagonal blocks `M_i` cut from `U_up`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub exact: f64,
    pub estimate: f64,
    pub blocks: usize,
}

impl BlockEstimate {
    pub fn error(&self) -> f64 {
        (self.exact - self.estimate).abs()
    }
}

/// Block `M_i` spans levels `l_{i+1}..=l_i` with `l_i = p1 − (m−1)i − 1`, so
/// neighbours share one level; a short remainder block closes the top.
/// Spectra come from the symmetric `S_p`, which is similar to `U_up`
/// blockwise.
pub fn block_estimate(inst: &WbrmInstance, e_alpha: f64, p1: usize, m: usize) -> Result<BlockEstimate> {
    if m < 2 {
        return Err(Error::InvalidParameter("block size must be at least 2".into()));
    }
    let s = build_s_matrices(inst, e_alpha)?;
    if p1 < 2 || p1 > s.r + 1 {
        return Err(Error::InvalidParameter(format!("p1 = {p1} must lie in [2, {}]", s.r + 1)));
    }
    let up = s.s_p.sub_block(0, p1 - 1);
    let exact = symmetric_spectral_radius(&up);
    let mut estimate = 0.0f64;
    let mut blocks = 0;
    let mut l = p1 - 1;
    while l > 1 {
        let top = l.saturating_sub(m - 1).max(1);
        estimate = estimate.max(symmetric_spectral_radius(&up.sub_block(top - 1, l)));
        blocks += 1;
        l = top;
    }
    Ok(BlockEstimate { exact, estimate, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_wbrm;

    fn step_cdf(t0: f64) -> EmpiricalCdf {
        EmpiricalCdf::new(vec![t0; 10]).unwrap()
    }

    #[test]
    fn tail_integral_by_hand() {
        // H: 1/3 at 1, 2/3 at 2, 1 at 4.
        let c = EmpiricalCdf::new(vec![2.0, 1.0, 4.0]).unwrap();
        let ti = TailIntegral::new(&c);
        let (a, b) = ((1.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln());
        let seg1 = 0.5 * (a + b);
        let seg2 = 0.5 * b * 2.0;
        assert!((ti.eval(1.0) - (seg1 + seg2)).abs() < 1e-15);
        assert!((ti.eval(3.0) - 0.5 * (0.5 * b) * 1.0).abs() < 1e-15);
        assert_eq!(ti.eval(4.0), 0.0);
        assert_eq!(ti.eval(9.0), 0.0);
        assert!((ti.eval(0.5) - (seg1 + seg2 + 0.5 * LN_H_FLOOR)).abs() < 1e-12);
    }

    #[test]
    fn step_cdf_gives_a_step_ladder() {
        let (lambda, t0, m) = (40.0, 1.5, 5);
        let est = mean_np_ladder(lambda, m, &step_cdf(t0)).unwrap();
        let edge = 2.0 * lambda * t0;
        assert!((est.n_c - edge).abs() < 0.02, "{}", est.n_c);
        assert!((est.sum - edge).abs() < 1e-6, "{}", est.sum);
        let ti = TailIntegral::new(&step_cdf(t0));
        assert!(p_n(edge - 1.0, lambda, m, &ti) > 1.0 - 1e-9);
        assert_eq!(p_n(edge, lambda, m, &ti), 0.0);
        assert!(est.warning.is_none());
    }

    #[test]
    fn warns_outside_the_regime() {
        assert!(mean_np_ladder(3.0, 5, &step_cdf(1.0)).unwrap().warning.is_some());
    }

    #[test]
    fn p_n_is_monotone_and_vanishes_fast() {
        let cdf = EmpiricalCdf::new(standard_matrix_samples(5, 1, 20_000, 3).unwrap()).unwrap();
        let ti = TailIntegral::new(&cdf);
        for lambda in [5.0, 50.0, 500.0] {
            let mut prev = 1.0;
            for n in 0..(6.0 * lambda) as usize {
                let p = p_n(n as f64, lambda, 5, &ti);
                assert!((0.0..=1.0).contains(&p));
                assert!(p <= prev, "λ = {lambda}, n = {n}");
                prev = p;
            }
            let far = 2.0 * lambda * ti.support().1;
            assert_eq!(far * p_n(far, lambda, 5, &ti), 0.0);
            assert!(p_n(0.01 * lambda, lambda, 5, &ti) > 0.999);
        }
    }

    #[test]
    fn doubling_lambda_more_than_doubles_n_c() {
        let cdf = EmpiricalCdf::new(standard_matrix_samples(5, 1, 50_000, 8).unwrap()).unwrap();
        let a = mean_np_ladder(100.0, 5, &cdf).unwrap();
        let b = mean_np_ladder(200.0, 5, &cdf).unwrap();
        let ratio = b.n_c / a.n_c;
        assert!(ratio > 2.0 && ratio < 2.3, "{ratio}");
        assert!((a.sum - a.n_c).abs() / a.n_c < 0.05);
    }

    #[test]
    fn first_order_log_identity() {
        for q in [1e-3, 5e-3, 1e-2] {
            let lhs = (1.0f64 - q).ln();
            assert!((lhs + q).abs() / q < 0.01);
        }
    }

    #[test]
    fn standard_matrix_samples_are_positive_and_bounded() {
        let s = standard_matrix_samples(5, 1, 5000, 1).unwrap();
        assert!(s.iter().all(|&x| x > 0.0 && x < 6.0));
        assert_eq!(s, standard_matrix_samples(5, 1, 5000, 1).unwrap());
        assert!(standard_matrix_samples(4, 4, 10, 1).is_err());
    }

    #[test]
    fn standard_matrix_shape() {
        let mut r = rng::sampler(2, 0);
        let s = standard_matrix(6, 2, &mut r);
        let d = s.to_dense();
        for i in 0..6usize {
            for j in 0..6usize {
                let nonzero = d[(i, j)] != 0.0;
                assert_eq!(nonzero, (1..=2).contains(&i.abs_diff(j)));
            }
        }
    }

    #[test]
    fn large_law() {
        assert!((mean_np_large(std::f64::consts::E, 2.0).unwrap() - 2.0 * std::f64::consts::E).abs() < 1e-12);
        assert!(mean_np_large(1.0, 1.0).is_err());
    }

    #[test]
    fn block_estimate_is_close_to_exact() {
        let inst = generate_wbrm(200, 1, 30.0, 4).unwrap();
        let e = 100.37;
        let est = block_estimate(&inst, e, 60, 5).unwrap();
        assert!(est.blocks >= 15);
        assert!(est.estimate <= est.exact + 1e-12, "Cauchy interlacing");
        assert!(est.error() < 0.5 * est.exact);
    }
}
