//! Monte Carlo study of `X`, the standard-matrix radius, `P(n)` and the
//! block estimate of `s(U)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::ensemble::state_energies;
use crate::error::{Error, Result};
use crate::model::{generate_wbrm, middle_half};
use crate::npt::npt_iterative;
use crate::rng;
use crate::stats::LineFit;
use crate::theory::{
    block_estimate, default_block_size, fit_h_tail, fit_px, mean_np_ladder, p_n, px_ks_distance, sample_x,
    standard_matrix_samples, BlockEstimate, DistributionEstimate, LadderEstimate, TailIntegral,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HStudy {
    pub b: usize,
    pub m: usize,
    pub estimate: DistributionEstimate,
    /// `ln h` against `t²` on the configured tail window.
    pub tail_fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub b: usize,
    pub m: usize,
    pub lambda: f64,
    pub n: usize,
    /// `n / 2λ`.
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCurve {
    pub b: usize,
    pub estimate: LadderEstimate,
    pub points: Vec<LadderPoint>,
}

impl LadderCurve {
    pub fn is_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].p <= w[0].p)
    }

    /// Beyond `n_c`, the maximum of `n·P(n)` over successive
    /// quarters never grows and the curve ends at zero.
    pub fn n_p_vanishes(&self) -> bool {
        let tail: Vec<f64> = self
            .points
            .iter()
            .filter(|q| q.n as f64 >= self.estimate.n_c)
            .map(|q| q.n as f64 * q.p)
            .collect();
        if tail.last() != Some(&0.0) {
            return false;
        }
        let q = tail.len().div_ceil(4);
        let peaks: Vec<f64> = tail.chunks(q).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
        peaks.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistOutput {
    pub x: DistributionEstimate,
    pub x_ks: f64,
    pub h: Vec<HStudy>,
    pub ladders: Vec<LadderCurve>,
    pub blocks: Vec<BlockEstimate>,
    pub block_errors: Option<DistributionEstimate>,
}

/// Seeds of the sub-studies hang off the master seed under fixed labels.
const X_LABEL: u64 = 1;
const H_LABEL: u64 = 2;
const BLOCK_LABEL: u64 = 3;

pub fn run_distributions(cfg: &SweepConfig) -> Result<DistOutput> {
    cfg.validate()?;
    let d = &cfg.dist;
    let xs = sample_x(d.x_samples, rng::derive_seed(cfg.master_seed, X_LABEL, 0));
    let fit = fit_px(&xs)?;
    let x_ks = px_ks_distance(&xs, fit.param("beta").expect("beta is fitted"))?;
    let mut x = DistributionEstimate::from_samples(xs, 100)?;
    x.fit = Some(fit);

    let mut h = Vec::new();
    let mut ladders = Vec::new();
    for &b in &d.h_bandwidths {
        let m = default_block_size(b);
        let samples = standard_matrix_samples(m, b, d.h_trials, rng::derive_seed(cfg.master_seed, H_LABEL, b as u64))?;
        let estimate = DistributionEstimate::from_samples(samples, 80)?;
        let tail_fit = fit_h_tail(&estimate.cdf, d.h_tail_quantiles[0], d.h_tail_quantiles[1], 30)?;
        let integral = TailIntegral::new(&estimate.cdf);
        for &lambda in &d.ladder_lambdas {
            let est = mean_np_ladder(lambda, m, &estimate.cdf)?;
            let top = (2.0 * lambda * integral.support().1).ceil() as usize + 1;
            let step = (top / 400).max(1);
            let points = (0..=top)
                .step_by(step)
                .chain((top % step != 0).then_some(top))
                .map(|n| LadderPoint {
                    b,
                    m,
                    lambda,
                    n,
                    x: n as f64 / (2.0 * lambda),
                    p: p_n(n as f64, lambda, m, &integral),
                })
                .collect();
            ladders.push(LadderCurve {
                b,
                estimate: est,
                points,
            });
        }
        h.push(HStudy {
            b,
            m,
            estimate,
            tail_fit,
        });
    }

    let blocks = block_errors(cfg)?;
    let errors: Vec<f64> = blocks.iter().map(BlockEstimate::error).collect();
    let block_errors = if errors.is_empty() {
        None
    } else {
        Some(DistributionEstimate::from_samples(errors, 40)?)
    };
    Ok(DistOutput {
        x,
        x_ks,
        h,
        ladders,
        blocks,
        block_errors,
    })
}

/// `s(U_up)` against the block estimate at the NPT edge of random
/// middle-half states, one realization each.
fn block_errors(cfg: &SweepConfig) -> Result<Vec<BlockEstimate>> {
    let d = &cfg.dist;
    let m = default_block_size(cfg.b);
    let mid = middle_half(cfg.n);
    let found: Vec<Option<BlockEstimate>> = (0..d.error_samples)
        .into_par_iter()
        .map(|i| {
            let seed = rng::derive_seed(cfg.master_seed, BLOCK_LABEL, i as u64);
            let inst = generate_wbrm(cfg.n, cfg.b, d.error_lambda, seed)?;
            let alpha = mid.start + (rng::mix64(seed) % (mid.len() as u64)) as usize;
            let e = state_energies(&inst, &[alpha])?[0];
            let region = match npt_iterative(&inst, e) {
                Ok(r) => r,
                Err(Error::Resonance { .. }) => return Ok(None),
                Err(err) => return Err(err),
            };
            if region.p1 <= m {
                return Ok(None);
            }
            match block_estimate(&inst, e, region.p1, m) {
                Ok(est) => Ok(Some(est)),
                Err(Error::Resonance { .. }) => Ok(None),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_has_expected_structure() {
        let mut c = SweepConfig::new(300, 1, vec![1.0], 1, 5);
        c.dist.x_samples = 20_000;
        c.dist.h_trials = 20_000;
        c.dist.ladder_lambdas = vec![20.0, 200.0];
        c.dist.error_samples = 12;
        c.dist.error_lambda = 15.0;
        let out = run_distributions(&c).unwrap();
        assert!(out.x.fit.as_ref().unwrap().param("beta").unwrap() > 0.0);
        assert!(out.x_ks < 0.05);
        assert_eq!(out.h.len(), 2);
        assert_eq!(out.h[1].m, 32);
        assert!(out.h.iter().all(|s| s.tail_fit.slope < 0.0));
        assert_eq!(out.ladders.len(), 4);
        for l in &out.ladders {
            assert!(l.is_non_increasing());
            assert!(l.n_p_vanishes());
        }
        assert!(!out.blocks.is_empty());
        let again = run_distributions(&c).unwrap();
        assert_eq!(out.x.cdf, again.x.cdf);
        assert_eq!(out.ladders, again.ladders);
        assert_eq!(out.blocks, again.blocks);
    }
}
