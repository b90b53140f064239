//! Width statistics over realizations and states.

use nalgebra::SymmetricEigen;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use crate::error::{Error, Result};
use crate::model::{diagonalize, eigenvalue, generate_wbrm, hamiltonian, WbrmInstance, DENSE_LIMIT};
use crate::npt::{npt_oracle, npt_region, Method, NptRegion};
use crate::rng;
use crate::shapes::{accumulate_ef, accumulate_ldos, eta, half_width, localization_length, ShapeKind, ShapeProfile};
use crate::stats::{mean, std_dev};
use crate::theory::{fit_curve, FitResult, Model};

/// Stream reserved for state subsampling; band streams use `1..=b`.
const SUBSET_STREAM: u64 = u64::MAX;

/// Per-λ ensemble summary. The shape columns are filled by the comparison
/// run only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub lambda: f64,
    pub mean_np: f64,
    pub std_np: f64,
    pub states: usize,
    pub realizations: usize,
    /// States dropped by the resonance guard.
    pub skipped: usize,
    pub w_l: Option<f64>,
    pub w_f: Option<f64>,
    pub l_mean: Option<f64>,
    pub eta: Option<f64>,
}

/// States `alpha` (0-based) picked for one realization.
pub fn select_states(cfg: &SweepConfig, seed: u64) -> Result<Vec<usize>> {
    let pool = cfg.state_filter.select(cfg.n);
    let pool: Vec<usize> = pool.into_iter().filter(|&a| a >= 1 && a + 1 < cfg.n).collect();
    if pool.is_empty() {
        return Err(Error::EmptyFilter);
    }
    if pool.len() <= cfg.states_per_realization {
        return Ok(pool);
    }
    let mut r = rng::sampler(seed, SUBSET_STREAM);
    let mut pick: Vec<usize> = index::sample(&mut r, pool.len(), cfg.states_per_realization)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    pick.sort_unstable();
    Ok(pick)
}

/// Eigenvalues `E_α` for the given states: a dense solve up to the dense
/// limit, bisection beyond it.
pub fn state_energies(inst: &WbrmInstance, alphas: &[usize]) -> Result<Vec<f64>> {
    let h = hamiltonian(inst);
    if inst.n <= DENSE_LIMIT {
        let eig = SymmetricEigen::try_new(h.to_dense(), f64::EPSILON, 100 * inst.n.max(10))
            .ok_or_else(|| Error::NonConvergence {
                fingerprint: crate::model::fingerprint(&h),
            })?;
        let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        Ok(alphas.iter().map(|&a| all[a]).collect())
    } else {
        alphas.par_iter().map(|&a| eigenvalue(&h, a)).collect()
    }
}

/// Region widths for one realization; resonant states are skipped and
/// counted.
#[derive(Debug, Clone, Default)]
pub(crate) struct RealizationWidths {
    pub widths: Vec<f64>,
    pub skipped: usize,
}

pub(crate) fn widths_for(inst: &WbrmInstance, energies: &[f64], method: Method) -> Result<RealizationWidths> {
    let mut out = RealizationWidths::default();
    for &e in energies {
        match npt_region(inst, e, method) {
            Ok(r) => out.widths.push(r.width as f64),
            Err(Error::Resonance { .. }) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn instance(cfg: &SweepConfig, li: usize, ri: usize) -> Result<(WbrmInstance, u64)> {
    let seed = rng::derive_seed(cfg.master_seed, li as u64, ri as u64);
    Ok((generate_wbrm(cfg.n, cfg.b, cfg.lambda_grid[li], seed)?, seed))
}

fn summarize(lambda: f64, realizations: usize, parts: Vec<RealizationWidths>) -> Result<EnsembleRecord> {
    let skipped = parts.iter().map(|p| p.skipped).sum();
    let widths: Vec<f64> = parts.into_iter().flat_map(|p| p.widths).collect();
    if widths.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(EnsembleRecord {
        lambda,
        mean_np: mean(&widths),
        std_np: std_dev(&widths),
        states: widths.len(),
        realizations,
        skipped,
        w_l: None,
        w_f: None,
        l_mean: None,
        eta: None,
    })
}

/// Ensemble means of the NPT width for every λ of the grid.
pub fn ensemble_widths(cfg: &SweepConfig) -> Result<Vec<EnsembleRecord>> {
    cfg.validate()?;
    (0..cfg.lambda_grid.len())
        .map(|li| {
            let parts = (0..cfg.realizations)
                .into_par_iter()
                .map(|ri| {
                    let (inst, seed) = instance(cfg, li, ri)?;
                    let alphas = select_states(cfg, seed)?;
                    widths_for(&inst, &state_energies(&inst, &alphas)?, cfg.method)
                })
                .collect::<Result<Vec<_>>>()?;
            summarize(cfg.lambda_grid[li], cfg.realizations, parts)
        })
        .collect()
}

/// A fit of one width law over part of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub name: String,
    /// Inclusive λ range used.
    pub window: [f64; 2],
    /// What was regressed: `mean_np(lambda)` or `mean_np/lambda(sqrt(ln lambda))`.
    pub variables: String,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<EnsembleRecord>,
    pub fits: Vec<WindowFit>,
}

/// Fits the small-λ erfc law, the linear regime and the large-λ law on
/// whichever windows hold enough grid points.
pub fn fit_windows(cfg: &SweepConfig, records: &[EnsembleRecord]) -> Vec<WindowFit> {
    let pick = |lo: f64, hi: f64| -> (Vec<f64>, Vec<f64>) {
        records
            .iter()
            .filter(|r| r.lambda >= lo && r.lambda <= hi)
            .map(|r| (r.lambda, r.mean_np))
            .unzip()
    };
    let mut fits = Vec::new();
    let w = &cfg.fit;
    let (x, y) = pick(f64::MIN_POSITIVE, w.small_max);
    if let Ok(fit) = fit_curve(Model::Erfc, &x, &y) {
        fits.push(WindowFit {
            name: "small".into(),
            window: [0.0, w.small_max],
            variables: "mean_np(lambda)".into(),
            fit,
        });
    }
    let (x, y) = pick(w.linear[0], w.linear[1]);
    if let Ok(fit) = fit_curve(Model::Linear, &x, &y) {
        fits.push(WindowFit {
            name: "linear".into(),
            window: w.linear,
            variables: "mean_np(lambda)".into(),
            fit,
        });
    }
    let (x, y) = pick(w.large[0].max(1.0 + 1e-12), w.large[1]);
    let xs: Vec<f64> = x.iter().map(|l| l.ln().sqrt()).collect();
    let ys: Vec<f64> = x.iter().zip(&y).map(|(l, n)| n / l).collect();
    if let Ok(fit) = fit_curve(Model::Linear, &xs, &ys) {
        fits.push(WindowFit {
            name: "large".into(),
            window: w.large,
            variables: "mean_np/lambda(sqrt(ln lambda))".into(),
            fit,
        });
    }
    fits
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    let records = ensemble_widths(cfg)?;
    let fits = fit_windows(cfg, &records);
    Ok(SweepOutput { records, fits })
}

/// NPT width, both half-widths, localization length and `η` per λ.
/// Needs full eigenvectors, so `n` is capped at the dense limit.
pub fn run_compare(cfg: &SweepConfig) -> Result<Vec<EnsembleRecord>> {
    cfg.validate()?;
    if cfg.n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n: cfg.n,
            limit: DENSE_LIMIT,
        });
    }
    (0..cfg.lambda_grid.len())
        .map(|li| {
            let parts = (0..cfg.realizations)
                .into_par_iter()
                .map(|ri| {
                    let (inst, seed) = instance(cfg, li, ri)?;
                    let alphas = select_states(cfg, seed)?;
                    let spec = diagonalize(&hamiltonian(&inst))?;
                    let energies: Vec<f64> = alphas.iter().map(|&a| spec.energies[a]).collect();
                    let widths = widths_for(&inst, &energies, cfg.method)?;
                    let mut ef = ShapeProfile::new(ShapeKind::Ef);
                    accumulate_ef(&mut ef, &spec, &alphas);
                    let mut ldos = ShapeProfile::new(ShapeKind::Ldos);
                    accumulate_ldos(&mut ldos, &spec, &alphas);
                    let ls: Vec<f64> = alphas.iter().map(|&a| localization_length(&spec.row(a))).collect();
                    Ok((widths, ef, ldos, ls))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut ef = ShapeProfile::new(ShapeKind::Ef);
            let mut ldos = ShapeProfile::new(ShapeKind::Ldos);
            let mut ls = Vec::new();
            let mut widths = Vec::new();
            for (w, e, l, x) in parts {
                widths.push(w);
                ef.merge(&e);
                ldos.merge(&l);
                ls.extend(x);
            }
            let mut rec = summarize(cfg.lambda_grid[li], cfg.realizations, widths)?;
            let w_l = half_width(&ldos)?;
            rec.w_l = Some(w_l);
            rec.w_f = Some(half_width(&ef)?);
            rec.l_mean = Some(mean(&ls));
            rec.eta = Some(eta(w_l, rec.mean_np, cfg.b));
            Ok(rec)
        })
        .collect()
}

/// One state of the confirmation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmRow {
    pub lambda: f64,
    pub alpha: usize,
    pub e_alpha: f64,
    pub oracle_p1: usize,
    pub oracle_p2: usize,
    pub iterative_p1: usize,
    pub iterative_p2: usize,
    /// `oracle` when the scan fell back to the exhaustive search.
    pub iterative_method: Method,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmSummary {
    pub lambda: f64,
    pub np_oracle: f64,
    pub np_iterative: f64,
    pub states: usize,
    pub mismatches: usize,
    pub fallbacks: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmOutput {
    pub rows: Vec<ConfirmRow>,
    pub summary: Vec<ConfirmSummary>,
    pub mismatches: usize,
    pub fallbacks: usize,
}

/// One realization per λ; every selected state goes through both the
/// exhaustive search and the pivot scan.
pub fn run_confirm(cfg: &SweepConfig) -> Result<ConfirmOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for li in 0..cfg.lambda_grid.len() {
        let lambda = cfg.lambda_grid[li];
        let (inst, seed) = instance(cfg, li, 0)?;
        let alphas = select_states(cfg, seed)?;
        let energies = state_energies(&inst, &alphas)?;
        let results: Vec<Option<(NptRegion, NptRegion)>> = alphas
            .par_iter()
            .zip(&energies)
            .map(|(_, &e)| {
                let it = npt_region(&inst, e, Method::Iterative);
                let or = npt_oracle(&inst, e);
                match (it, or) {
                    (Ok(a), Ok(b)) => Ok(Some((b, a))),
                    (Err(Error::Resonance { .. }), _) | (_, Err(Error::Resonance { .. })) => Ok(None),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let mut s = ConfirmSummary {
            lambda,
            np_oracle: 0.0,
            np_iterative: 0.0,
            states: 0,
            mismatches: 0,
            fallbacks: 0,
            skipped: 0,
        };
        for ((&alpha, &e), res) in alphas.iter().zip(&energies).zip(results) {
            let Some((or, it)) = res else {
                s.skipped += 1;
                continue;
            };
            let agree = or.same_interval(&it);
            s.states += 1;
            s.np_oracle += or.width as f64;
            s.np_iterative += it.width as f64;
            s.mismatches += usize::from(!agree);
            s.fallbacks += usize::from(it.method == Method::Oracle);
            rows.push(ConfirmRow {
                lambda,
                alpha,
                e_alpha: e,
                oracle_p1: or.p1,
                oracle_p2: or.p2,
                iterative_p1: it.p1,
                iterative_p2: it.p2,
                iterative_method: it.method,
                agree,
            });
        }
        if s.states > 0 {
            s.np_oracle /= s.states as f64;
            s.np_iterative /= s.states as f64;
        }
        summary.push(s);
    }
    Ok(ConfirmOutput {
        mismatches: summary.iter().map(|s| s.mismatches).sum(),
        fallbacks: summary.iter().map(|s| s.fallbacks).sum(),
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(method: Method) -> SweepConfig {
        let mut c = SweepConfig::new(80, 2, vec![0.0, 0.5, 3.0], 3, 11);
        c.states_per_realization = 10;
        c.method = method;
        c
    }

    #[test]
    fn zero_coupling_gives_unit_widths() {
        let rec = ensemble_widths(&small_cfg(Method::Iterative)).unwrap();
        assert_eq!(rec[0].mean_np, 1.0);
        assert_eq!(rec[0].std_np, 0.0);
        assert_eq!(rec[0].states, 30);
    }

    #[test]
    fn methods_agree_on_the_ensemble() {
        let a = ensemble_widths(&small_cfg(Method::Iterative)).unwrap();
        let b = ensemble_widths(&small_cfg(Method::Oracle)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_state_sweep_matches_direct_computation() {
        let mut c = SweepConfig::new(60, 1, vec![1.3], 1, 4);
        c.state_filter = crate::shapes::StateFilter::Indices(vec![29]);
        let rec = &ensemble_widths(&c).unwrap()[0];
        let seed = rng::derive_seed(4, 0, 0);
        let inst = generate_wbrm(60, 1, 1.3, seed).unwrap();
        let spec = diagonalize(&hamiltonian(&inst)).unwrap();
        let direct = npt_oracle(&inst, spec.energies[29]).unwrap();
        assert_eq!(rec.mean_np, direct.width as f64);
        assert_eq!(rec.states, 1);
    }

    #[test]
    fn subsets_are_reproducible_and_capped() {
        let mut c = small_cfg(Method::Iterative);
        c.states_per_realization = 7;
        let a = select_states(&c, 5).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a, select_states(&c, 5).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&x| (20..60).contains(&x)));
    }

    #[test]
    fn bisection_energies_match_dense() {
        let inst = generate_wbrm(120, 3, 2.0, 8).unwrap();
        let alphas = [30, 60, 89];
        let dense = state_energies(&inst, &alphas).unwrap();
        let h = hamiltonian(&inst);
        for (&a, d) in alphas.iter().zip(&dense) {
            assert!((eigenvalue(&h, a).unwrap() - d).abs() < 1e-9);
        }
    }

    #[test]
    fn confirm_counts_fallbacks() {
        let mut c = SweepConfig::new(100, 4, vec![0.0, 0.5, 6.0], 1, 2);
        c.states_per_realization = 8;
        let out = run_confirm(&c).unwrap();
        assert_eq!(out.mismatches, 0);
        assert!(out.fallbacks >= 8, "λ = 0 states all fall back");
        assert_eq!(out.summary[0].np_oracle, 1.0);
        assert!(out.rows.iter().all(|r| r.agree));
    }

    #[test]
    fn compare_fills_shape_columns() {
        let mut c = SweepConfig::new(80, 2, vec![0.0, 2.0], 2, 3);
        c.states_per_realization = 20;
        let rec = run_compare(&c).unwrap();
        assert_eq!(rec[0].w_l, Some(1.0));
        assert_eq!(rec[0].w_f, Some(1.0));
        assert_eq!(rec[0].l_mean, Some(1.0));
        assert!(rec[1].l_mean.unwrap() > 1.0);
        assert!(rec[1].w_l.unwrap() > 1.0);
    }
}
