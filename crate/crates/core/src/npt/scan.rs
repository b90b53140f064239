//! Pivot scans and the banded iterative region finder.

use super::{build_s_matrices, npt_oracle, Method, NptRegion, PIVOT_TOL};
use crate::banded::{eliminate, BandedSymmetricMatrix, Direction};
use crate::error::Result;
use crate::model::WbrmInstance;

fn oriented(m: &BandedSymmetricMatrix, direction: Direction) -> std::borrow::Cow<'_, BandedSymmetricMatrix> {
    match direction {
        Direction::TopDown => std::borrow::Cow::Borrowed(m),
        Direction::BottomUp => std::borrow::Cow::Owned(m.reversed()),
    }
}

/// Position (1-based, counted in elimination order) of the first pivot
/// `y <= PIVOT_TOL`, or `None` if every pivot is positive.
///
/// A bottom-up scan counts from the last row, so position `j` is row
/// `n − j + 1`.
pub fn pivot_scan(m: &BandedSymmetricMatrix, direction: Direction) -> Option<usize> {
    let m = oriented(m, direction);
    let mut hit = None;
    eliminate(&m, 0.0, |k, y| {
        if y <= PIVOT_TOL || y.is_nan() {
            hit = Some(k + 1);
            false
        } else {
            true
        }
    });
    hit
}

/// Every pivot of the elimination, in elimination order.
pub fn pivots(m: &BandedSymmetricMatrix, direction: Direction) -> Vec<f64> {
    let m = oriented(m, direction);
    let mut out = Vec::with_capacity(m.n());
    eliminate(&m, 0.0, |_, y| {
        out.push(y);
        true
    });
    out
}

/// Region bounds from the four pivot scans, without the narrow-region
/// fallback.
///
/// `p1` is the smaller of the two top-down stopping rows of `I ± S_p` and
/// `p2` the larger of the two bottom-up stopping rows of `I ± S_n`, so both
/// signs are positive definite on the blocks left outside.
pub fn scan_bounds(inst: &WbrmInstance, e_alpha: f64) -> Result<(usize, usize)> {
    let s = build_s_matrices(inst, e_alpha)?;
    let r = s.r;
    let n = inst.n;
    let top = |sign: f64| pivot_scan(&s.s_p.affine(sign, 1.0), Direction::TopDown).unwrap_or(r);
    let p1 = top(1.0).min(top(-1.0));
    let bottom = |sign: f64| {
        pivot_scan(&s.s_n.affine(sign, 1.0), Direction::BottomUp)
            .map(|j| n + 1 - j)
            .unwrap_or(r + 1)
    };
    let p2 = bottom(1.0).max(bottom(-1.0));
    Ok((p1, p2))
}

/// NPT region by pivot scans; regions no wider than `b` are recomputed by
/// [`npt_oracle`] and tagged accordingly.
pub fn npt_iterative(inst: &WbrmInstance, e_alpha: f64) -> Result<NptRegion> {
    let (p1, p2) = scan_bounds(inst, e_alpha)?;
    if p2 - p1 <= inst.b {
        return npt_oracle(inst, e_alpha);
    }
    Ok(NptRegion::new(p1, p2, inst.n, inst.b, Method::Iterative))
}
