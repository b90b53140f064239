//! Non-perturbative regions.
//!
//! A region `[p1, p2]` (1-based unperturbed levels) brackets `E_α`:
//! `p1 <= ⌊E_α⌋ < p2`. It is admissible when `s(U) < 1`, where `U` couples
//! only the levels outside it, and the NPT region is the narrowest admissible
//! one.

mod oracle;
mod recursion;
mod scan;
mod smat;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use oracle::{npt_oracle, region_passes};
pub use recursion::{
    npt_recursion, path_summation_from_products, path_summation_g, recursion_b1, xi_products,
    PathSummation, Recursion,
};
pub use scan::{npt_iterative, pivot_scan, pivots, scan_bounds};
pub use smat::{build_s_matrices, build_u, u_spectral_radius, SMatrices, UMatrix};

use crate::error::{Error, Result};

/// A pivot `y <= PIVOT_TOL` ends a scan.
pub const PIVOT_TOL: f64 = 1e-12;

/// Minimum distance between `E_α` and an unperturbed level used as a
/// denominator.
pub const RESONANCE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Iterative,
    Recursion,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Oracle => "oracle",
            Method::Iterative => "iterative",
            Method::Recursion => "recursion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NptRegion {
    pub p1: usize,
    pub p2: usize,
    /// `p2 - p1`, at least 1.
    pub width: usize,
    /// `[p1 - b, p1]` clipped to the level range.
    pub shoulder_lo: (usize, usize),
    /// `[p2, p2 + b]` clipped to the level range.
    pub shoulder_hi: (usize, usize),
    pub method: Method,
}

impl NptRegion {
    pub fn new(p1: usize, p2: usize, n: usize, b: usize, method: Method) -> Self {
        debug_assert!(1 <= p1 && p1 < p2 && p2 <= n);
        Self {
            p1,
            p2,
            width: p2 - p1,
            shoulder_lo: (p1.saturating_sub(b).max(1), p1),
            shoulder_hi: (p2, (p2 + b).min(n)),
            method,
        }
    }

    pub fn same_interval(&self, other: &NptRegion) -> bool {
        self.p1 == other.p1 && self.p2 == other.p2
    }
}

/// Dispatches to the requested method.
pub fn npt_region(inst: &crate::model::WbrmInstance, e_alpha: f64, method: Method) -> Result<NptRegion> {
    match method {
        Method::Oracle => npt_oracle(inst, e_alpha),
        Method::Iterative => npt_iterative(inst, e_alpha),
        Method::Recursion => npt_recursion(inst, e_alpha),
    }
}

/// `⌊E_α⌋`, checked to leave at least one level on each side of the split.
pub(crate) fn split_level(n: usize, e_alpha: f64) -> Result<usize> {
    if !e_alpha.is_finite() || e_alpha < 1.0 || e_alpha >= n as f64 {
        return Err(Error::InvalidParameter(format!(
            "E_alpha = {e_alpha} must lie in [1, {n})"
        )));
    }
    Ok(e_alpha.floor() as usize)
}
