//! Bandwidth-one recursions: the pivot recursion `y_{i+1} = 1 − ξ_i²/y_i`
//! and the path-summation series `g(j+1) = ξ_j²/(1 − g(j))`, which satisfy
//! `y_i = 1 − g(i)`.

use serde::Serialize;

use super::{build_s_matrices, split_level, Method, NptRegion, PIVOT_TOL, RESONANCE_GUARD};
use crate::error::{Error, Result};
use crate::model::{unperturbed_energy, WbrmInstance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recursion {
    /// `y_1, y_2, …` up to and including the stopping pivot.
    pub pivots: Vec<f64>,
    /// 1-based index of the first pivot `y <= PIVOT_TOL`, if any.
    pub stop: Option<usize>,
    /// The stopping pivot fell inside `(−τ, τ)`; it is treated as negative.
    pub degenerate: bool,
}

/// Pivots of `I + S` for the tridiagonal `S` with off-diagonal `xi`
/// (`xi.len() + 1` rows).
pub fn recursion_b1(xi: &[f64]) -> Recursion {
    let mut pivots = Vec::with_capacity(xi.len() + 1);
    let mut y = 1.0;
    pivots.push(y);
    for (i, &x) in xi.iter().enumerate() {
        y = 1.0 - x * x / y;
        pivots.push(y);
        if y.abs() < PIVOT_TOL {
            return Recursion {
                pivots,
                stop: Some(i + 2),
                degenerate: true,
            };
        }
        if y <= PIVOT_TOL {
            return Recursion {
                pivots,
                stop: Some(i + 2),
                degenerate: false,
            };
        }
    }
    Recursion {
        pivots,
        stop: None,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummation {
    /// `g(1), g(2), …`.
    pub g: Vec<f64>,
    /// Index `j` at which `1 − g(j)` fell inside `(−τ, τ)` and the series
    /// was cut.
    pub degenerate_at: Option<usize>,
}

/// Two-step path products `f(j+1→j)·f(j→j+1) = U_{j+1,j}·U_{j,j+1}` for
/// `j = 1..j_max−1`, from the `U` entries directly.
pub fn xi_products(inst: &WbrmInstance, e_alpha: f64, j_max: usize) -> Result<Vec<f64>> {
    if inst.b != 1 {
        return Err(Error::InvalidParameter(format!(
            "path summation needs b = 1, got b = {}",
            inst.b
        )));
    }
    let r = split_level(inst.n, e_alpha)?;
    if j_max > r {
        return Err(Error::InvalidParameter(format!(
            "j_max = {j_max} exceeds the levels below E_alpha ({r})"
        )));
    }
    let lambda = inst.lambda;
    if lambda == 0.0 {
        return Ok(vec![0.0; j_max.saturating_sub(1)]);
    }
    if let Some(k) = (1..=j_max).find(|&k| (e_alpha - unperturbed_energy(k)).abs() <= RESONANCE_GUARD) {
        return Err(Error::Resonance {
            e_alpha,
            level: k,
            guard: RESONANCE_GUARD,
        });
    }
    Ok((1..j_max)
        .map(|j| {
            let v = inst.v_at(j, j + 1);
            let forward = lambda * v / (e_alpha - unperturbed_energy(j + 1));
            let back = lambda * v / (e_alpha - unperturbed_energy(j));
            forward * back
        })
        .collect())
}

/// `g(1) = 0`, `g(j+1) = products[j−1] / (1 − g(j))`.
pub fn path_summation_from_products(products: &[f64]) -> PathSummation {
    let mut g: Vec<f64> = Vec::with_capacity(products.len() + 1);
    g.push(0.0);
    for (j, &f) in products.iter().enumerate() {
        let denom = 1.0 - g[j];
        if denom.abs() < PIVOT_TOL {
            return PathSummation {
                g,
                degenerate_at: Some(j + 1),
            };
        }
        g.push(f / denom);
    }
    PathSummation {
        g,
        degenerate_at: None,
    }
}

/// `g(1..=j_max)` for the levels below `E_α`.
pub fn path_summation_g(inst: &WbrmInstance, e_alpha: f64, j_max: usize) -> Result<PathSummation> {
    Ok(path_summation_from_products(&xi_products(inst, e_alpha, j_max)?))
}

/// NPT region for `b = 1` from the scalar recursion, run downward on `S_p`
/// and upward on `S_n`. With one band both signs of `S` give the same pivots.
pub fn npt_recursion(inst: &WbrmInstance, e_alpha: f64) -> Result<NptRegion> {
    if inst.b != 1 {
        return Err(Error::InvalidParameter(format!(
            "the recursion needs b = 1, got b = {}",
            inst.b
        )));
    }
    let s = build_s_matrices(inst, e_alpha)?;
    let r = s.r;
    let n = inst.n;
    let p1 = match s.s_p.bandwidth() {
        0 => None,
        _ => recursion_b1(s.s_p.band(1)).stop,
    }
    .unwrap_or(r);
    let p2 = match s.s_n.bandwidth() {
        0 => None,
        _ => {
            let xi: Vec<f64> = s.s_n.band(1).iter().rev().copied().collect();
            recursion_b1(&xi).stop
        }
    }
    .map(|j| n + 1 - j)
    .unwrap_or(r + 1);
    Ok(NptRegion::new(p1, p2, n, 1, Method::Recursion))
}
