//! Empirical distributions and the `X`-statistic fit.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{FitResult, Model};
use super::quartic::x_max;
use super::special::erfc;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::line_fit;

/// Sorted samples; `cdf(t)` is the right-continuous step `#{x <= t} / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, q: f64) -> f64 {
        crate::stats::quantile(&self.sorted, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (n_total · width)`.
    pub density: f64,
}

impl HistBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Equal-width histogram on `[lo, hi)` normalized against all `n_total`
/// samples, so densities of a partial range integrate to that range's mass.
pub fn histogram(cdf: &EmpiricalCdf, lo: f64, hi: f64, bins: usize) -> Vec<HistBin> {
    let width = (hi - lo) / bins as f64;
    let n = cdf.len() as f64;
    let s = cdf.sorted();
    (0..bins)
        .map(|i| {
            let a = lo + i as f64 * width;
            let b = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
            let count = s.partition_point(|&x| x < b) - s.partition_point(|&x| x < a);
            HistBin {
                lo: a,
                hi: b,
                count,
                density: count as f64 / (n * width),
            }
        })
        .collect()
}

/// Monte Carlo estimate of a scalar distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub samples: usize,
    pub histogram: Vec<HistBin>,
    pub cdf: EmpiricalCdf,
    pub fit: Option<FitResult>,
}

impl DistributionEstimate {
    pub fn from_samples(samples: Vec<f64>, bins: usize) -> Result<Self> {
        let cdf = EmpiricalCdf::new(samples)?;
        let (lo, hi) = (cdf.min(), cdf.max());
        let hi = if hi > lo { hi * (1.0 + 1e-12) + 1e-300 } else { lo + 1.0 };
        Ok(Self {
            samples: cdf.len(),
            histogram: histogram(&cdf, lo, hi, bins),
            cdf,
            fit: None,
        })
    }

    /// CSV `value,pdf,cdf` with one row per histogram bin (value = centre,
    /// cdf evaluated at the bin's upper edge).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "pdf", "cdf"])?;
        for b in &self.histogram {
            w.write_record([b.center().to_string(), b.density.to_string(), self.cdf.cdf(b.hi).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

const CHUNK: usize = 4096;

/// `count` independent draws of `X = max(X_up(f), X_down(3 − f))` with
/// standard normal couplings and `f = 1 + U(0, 1)`.
pub fn sample_x(count: usize, seed: u64) -> Vec<f64> {
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::sampler(seed, c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len)
                .map(|_| {
                    let mut v = [[0.0; 4]; 2];
                    for x in v.iter_mut().flatten() {
                        *x = r.sample(StandardNormal);
                    }
                    let f = 1.0 + r.random::<f64>();
                    x_max(v[0], v[1], f).expect("f lies in (1, 2)")
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Minimum sample count accepted by [`fit_px`].
pub const PX_MIN_SAMPLES: usize = 10_000;

/// Fits `p(X) = C X^{−1/2} e^{−βX}` on `X >= 1`.
///
/// `β` comes from a count-weighted straight-line fit of
/// `ln p + ½ ln X` against `X` over a histogram of the tail; `C` is then
/// fixed by matching the model's mass on `[1, ∞)` to the observed tail
/// fraction. The regression R² is reported.
pub fn fit_px(samples: &[f64]) -> Result<FitResult> {
    if samples.len() < PX_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: PX_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let cdf = EmpiricalCdf::new(samples.to_vec())?;
    let tail: Vec<f64> = cdf.sorted().iter().copied().filter(|&x| x >= 1.0).collect();
    if tail.len() < 200 {
        return Err(Error::InsufficientSamples {
            needed: 200,
            got: tail.len(),
        });
    }
    let top = crate::stats::quantile(&tail, 0.995);
    if top <= 1.0 {
        return Err(Error::Degenerate("no spread in the X >= 1 tail".into()));
    }
    let bins = histogram(&cdf, 1.0, top, 40);
    let used: Vec<&HistBin> = bins.iter().filter(|b| b.count >= 5).collect();
    let x: Vec<f64> = used.iter().map(|b| b.center()).collect();
    let y: Vec<f64> = used.iter().map(|b| b.density.ln() + 0.5 * b.center().ln()).collect();
    let w: Vec<f64> = used.iter().map(|b| b.count as f64).collect();
    let line = line_fit(&x, &y, Some(&w))?;
    let beta = -line.slope;
    if !(beta > 0.0) {
        return Err(Error::Degenerate(format!("fitted beta = {beta} is not positive")));
    }
    let tail_mass = tail.len() as f64 / samples.len() as f64;
    let c = tail_mass / ((PI / beta).sqrt() * erfc(beta.sqrt()));
    Ok(FitResult {
        model: Model::Erfc,
        params: vec![("C".into(), c), ("beta".into(), beta), ("C_regression".into(), line.intercept.exp())],
        param_se: vec![f64::NAN, line.slope_se, f64::NAN],
        r2: line.r2,
        rss: f64::NAN,
        n_points: x.len(),
    })
}

/// Kolmogorov–Smirnov distance between the `X >= 1` samples and the
/// model's conditional law `F(x) = 1 − erfc(√(βx)) / erfc(√β)`.
pub fn px_ks_distance(samples: &[f64], beta: f64) -> Result<f64> {
    let mut tail: Vec<f64> = samples.iter().copied().filter(|&x| x >= 1.0).collect();
    if tail.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    tail.sort_by(f64::total_cmp);
    let z = erfc(beta.sqrt());
    let n = tail.len() as f64;
    Ok(tail
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - erfc((beta * x).sqrt()) / z;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn cdf_is_right_continuous_step() {
        let c = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.cdf(0.5), 0.0);
        assert_eq!(c.cdf(1.0), 0.25);
        assert_eq!(c.cdf(2.0), 0.75);
        assert_eq!(c.cdf(3.0), 1.0);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn histogram_integrates_to_one() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..5000).map(|_| r.random::<f64>()).collect();
        let d = DistributionEstimate::from_samples(s, 25).unwrap();
        let mass: f64 = d.histogram.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((mass - 1.0).abs() < 1e-9);
        assert_eq!(d.histogram.iter().map(|b| b.count).sum::<usize>(), 5000);
    }

    #[test]
    fn recovers_a_known_gamma_tail() {
        // X ~ Gamma(1/2, rate β) has density √(β/π) X^{−1/2} e^{−βX}.
        for beta0 in [0.6, 1.0, 2.0] {
            let g = Gamma::new(0.5, 1.0 / beta0).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(11);
            let s: Vec<f64> = (0..400_000).map(|_| g.sample(&mut r)).collect();
            let fit = fit_px(&s).unwrap();
            let (c, beta) = (fit.param("C").unwrap(), fit.param("beta").unwrap());
            let c0 = (beta0 / PI).sqrt();
            assert!((beta - beta0).abs() / beta0 < 0.05, "beta {beta} vs {beta0}");
            assert!((c - c0).abs() / c0 < 0.05, "C {c} vs {c0}");
            assert!(px_ks_distance(&s, beta).unwrap() < 0.02);
        }
    }

    #[test]
    fn too_few_or_constant_samples() {
        assert!(matches!(fit_px(&[2.0; 100]), Err(Error::InsufficientSamples { .. })));
        assert!(fit_px(&vec![2.0; 20_000]).is_err());
    }

    #[test]
    fn x_samples_are_reproducible_and_positive() {
        let a = sample_x(10_000, 5);
        assert_eq!(a, sample_x(10_000, 5));
        assert!(a.iter().all(|&x| x >= 0.0));
        let fit = fit_px(&sample_x(200_000, 9)).unwrap();
        assert!(fit.param("beta").unwrap() > 0.0);
    }
}
