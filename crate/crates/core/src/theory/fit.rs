//! Least-squares fits of the width laws.
//!
//! Models linear in their parameters are solved in closed form. The
//! small-coupling law is linear in `C` once `β` is fixed, so `β` is located by
//! a log-spaced grid (profiling `C` out) and then both are refined with
//! Nelder–Mead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::erfc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `y = 1 + C √(π/β) erfc(√β / x)`; parameters `C`, `β`.
    Erfc,
    /// `y = a + s x`; parameters `intercept`, `slope`.
    Linear,
    /// `y = s x`; parameter `slope`.
    Proportional,
    /// `y = C' x √(ln x)`; parameter `C'`.
    LargeLambda,
}

impl Model {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Model::Erfc => &["C", "beta"],
            Model::Linear => &["intercept", "slope"],
            Model::Proportional => &["slope"],
            Model::LargeLambda => &["C_prime"],
        }
    }

    pub fn eval(self, params: &[f64], x: f64) -> f64 {
        match self {
            Model::Erfc => small_lambda_law(x, params[0], params[1]),
            Model::Linear => params[0] + params[1] * x,
            Model::Proportional => params[0] * x,
            Model::LargeLambda => params[0] * x * x.ln().sqrt(),
        }
    }
}

/// `1 + C √(π/β) erfc(√β / λ)`.
pub fn small_lambda_law(lambda: f64, c: f64, beta: f64) -> f64 {
    1.0 + c * (std::f64::consts::PI / beta).sqrt() * erfc(beta.sqrt() / lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub params: Vec<(String, f64)>,
    /// Standard errors from `s²(JᵀJ)⁻¹`; a rough covariance proxy.
    pub param_se: Vec<f64>,
    pub r2: f64,
    pub rss: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.1).collect()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.model.eval(&self.values(), x)
    }
}

pub fn fit_curve(model: Model, x: &[f64], y: &[f64]) -> Result<FitResult> {
    let k = model.param_names().len();
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("x and y differ in length".into()));
    }
    if x.len() < k + 2 {
        return Err(Error::InsufficientSamples {
            needed: k + 2,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite fit data".into()));
    }
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::Degenerate("constant data, R² undefined".into()));
    }
    let params = match model {
        Model::Linear => linear_ls(&[|_| 1.0, |x| x], x, y)?,
        Model::Proportional => linear_ls(&[|x| x], x, y)?,
        Model::LargeLambda => {
            if x.iter().any(|&v| v <= 1.0) {
                return Err(Error::InvalidParameter("the large-coupling law needs x > 1".into()));
            }
            linear_ls(&[|x: f64| x * x.ln().sqrt()], x, y)?
        }
        Model::Erfc => fit_erfc(x, y)?,
    };
    let rss = rss(model, &params, x, y);
    let param_se = standard_errors(model, &params, x, rss);
    Ok(FitResult {
        model,
        params: model
            .param_names()
            .iter()
            .map(|s| s.to_string())
            .zip(params)
            .collect(),
        param_se,
        r2: 1.0 - rss / tss,
        rss,
        n_points: x.len(),
    })
}

fn rss(model: Model, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - model.eval(p, xi)).powi(2)).sum()
}

fn linear_ls(basis: &[fn(f64) -> f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let a = DMatrix::from_fn(x.len(), basis.len(), |i, j| basis[j](x[i]));
    let b = DVector::from_column_slice(y);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

fn fit_erfc(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("the small-coupling law needs x > 0".into()));
    }
    // With β fixed, y − 1 = C·g(x) is a one-parameter linear fit.
    let profile = |beta: f64| -> (f64, f64) {
        let g: Vec<f64> = x.iter().map(|&xi| small_lambda_law(xi, 1.0, beta) - 1.0).collect();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg == 0.0 {
            return (0.0, f64::INFINITY);
        }
        let c = g.iter().zip(y).map(|(gi, yi)| gi * (yi - 1.0)).sum::<f64>() / gg;
        (c, rss(Model::Erfc, &[c, beta], x, y))
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=120 {
        let beta = 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0);
        let (c, r) = profile(beta);
        if r < best.0 {
            best = (r, c, beta);
        }
    }
    // Refine in (C, ln β) so β stays positive.
    let obj = |p: &[f64]| rss(Model::Erfc, &[p[0], p[1].exp()], x, y);
    let start = [best.1, best.2.ln()];
    let p = nelder_mead(obj, &start, &[0.1 * best.1.abs().max(1e-3), 0.1], 2000, 1e-14);
    let out = vec![p[0], p[1].exp()];
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("erfc fit diverged".into()));
    }
    Ok(out)
}

fn standard_errors(model: Model, p: &[f64], x: &[f64], rss: f64) -> Vec<f64> {
    let k = p.len();
    let dof = x.len().saturating_sub(k).max(1) as f64;
    let s2 = rss / dof;
    let jac = DMatrix::from_fn(x.len(), k, |i, j| {
        let h = 1e-6 * p[j].abs().max(1e-8);
        let mut up = p.to_vec();
        let mut dn = p.to_vec();
        up[j] += h;
        dn[j] -= h;
        (model.eval(&up, x[i]) - model.eval(&dn, x[i])) / (2.0 * h)
    });
    match (jac.transpose() * &jac).try_inverse() {
        Some(inv) => (0..k).map(|j| (s2 * inv[(j, j)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; k],
    }
}

/// Minimizes `f` from `start` with initial simplex steps `scale`.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    scale: &[f64],
    max_iter: usize,
    ftol: f64,
) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale[i];
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (vals[0].abs() + ftol) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let reflected = lerp(&centroid, &simplex[n], -1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = lerp(&centroid, &simplex[n], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                vals[n] = fe;
            } else {
                simplex[n] = reflected;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = reflected;
            vals[n] = fr;
        } else {
            let contracted = if fr < vals[n] {
                lerp(&centroid, &reflected, 0.5)
            } else {
                lerp(&centroid, &simplex[n], 0.5)
            };
            let fc = f(&contracted);
            if fc < vals[n].min(fr) {
                simplex[n] = contracted;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = lerp(&simplex[0], &simplex[i], 0.5);
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    simplex[best].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_proportional_data() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let fit = fit_curve(Model::Proportional, &x, &y).unwrap();
        assert!((fit.param("slope").unwrap() - 3.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let lin = fit_curve(Model::Linear, &x, &y).unwrap();
        assert!((lin.param("slope").unwrap() - 3.0).abs() < 1e-12);
        assert!(lin.param("intercept").unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_and_short_data_are_rejected() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit_curve(Model::Linear, &x, &[2.0; 4]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_curve(Model::Erfc, &x[..3], &[1.0, 2.0, 3.0]), Err(Error::InsufficientSamples { .. })));
        assert!(fit_curve(Model::Linear, &[1.0, 2.0, f64::NAN, 4.0], &x).is_err());
    }

    #[test]
    fn erfc_model_recovers_parameters_under_noise() {
        let (c0, b0) = (0.45, 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let x: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&l| small_lambda_law(l, c0, b0) * (1.0 + noise.sample(&mut rng)))
            .collect();
        let fit = fit_curve(Model::Erfc, &x, &y).unwrap();
        let c = fit.param("C").unwrap();
        let b = fit.param("beta").unwrap();
        assert!((c - c0).abs() / c0 < 0.05, "C = {c}");
        assert!((b - b0).abs() / b0 < 0.05, "beta = {b}");
        assert!(fit.r2 > 0.99);
        assert!(fit.param_se.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn large_lambda_law() {
        let x = [10.0, 20.0, 50.0, 100.0];
        let y: Vec<f64> = x.iter().map(|&l: &f64| 0.7 * l * l.ln().sqrt()).collect();
        let fit = fit_curve(Model::LargeLambda, &x, &y).unwrap();
        assert!((fit.param("C_prime").unwrap() - 0.7).abs() < 1e-12);
        assert!((fit.predict(std::f64::consts::E) - 0.7 * std::f64::consts::E).abs() < 1e-12);
        assert!(fit_curve(Model::LargeLambda, &[0.5, 2.0, 3.0, 4.0], &y).is_err());
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let p = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 5000, 1e-18);
        assert!((p[0] - 1.0).abs() < 1e-4 && (p[1] - 1.0).abs() < 1e-4, "{p:?}");
    }
}
