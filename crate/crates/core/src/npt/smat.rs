//! The convergence matrix `U` and its symmetric forms `S_p`, `S_n`.

use nalgebra::DMatrix;

use super::{split_level, RESONANCE_GUARD};
use crate::banded::BandedSymmetricMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{unperturbed_energy, WbrmInstance};

/// `S_p` over levels `1..=r` and `S_n` over levels `r+1..=n`, `r = ⌊E_α⌋`.
///
/// `(S_p)_ij = λV_ij / √((E−i)(E−j))` and `(S_n)_ij = λV_ij / √((i−E)(j−E))`;
/// both keep the bandwidth of `V` and have zero diagonal.
#[derive(Debug, Clone)]
pub struct SMatrices {
    pub r: usize,
    pub s_p: BandedSymmetricMatrix,
    pub s_n: BandedSymmetricMatrix,
}

fn check_resonance(e_alpha: f64, levels: impl Iterator<Item = usize>) -> Result<()> {
    for k in levels {
        if (e_alpha - unperturbed_energy(k)).abs() <= RESONANCE_GUARD {
            return Err(Error::Resonance {
                e_alpha,
                level: k,
                guard: RESONANCE_GUARD,
            });
        }
    }
    Ok(())
}

pub fn build_s_matrices(inst: &WbrmInstance, e_alpha: f64) -> Result<SMatrices> {
    let n = inst.n;
    let r = split_level(n, e_alpha)?;
    let lambda = inst.lambda;
    if lambda == 0.0 {
        return Ok(SMatrices {
            r,
            s_p: BandedSymmetricMatrix::zeros(r, inst.b),
            s_n: BandedSymmetricMatrix::zeros(n - r, inst.b),
        });
    }
    check_resonance(e_alpha, 1..=n)?;
    // w[k - 1] = 1 / √|E − k|
    let w: Vec<f64> = (1..=n)
        .map(|k| 1.0 / (e_alpha - unperturbed_energy(k)).abs().sqrt())
        .collect();
    let v = inst.v();
    let mut s_p = BandedSymmetricMatrix::zeros(r, inst.b);
    for d in 1..=s_p.bandwidth() {
        let src = v.band(d);
        for (i, x) in s_p.band_mut(d).iter_mut().enumerate() {
            *x = lambda * src[i] * w[i] * w[i + d];
        }
    }
    let mut s_n = BandedSymmetricMatrix::zeros(n - r, inst.b);
    for d in 1..=s_n.bandwidth() {
        let src = v.band(d);
        for (i, x) in s_n.band_mut(d).iter_mut().enumerate() {
            let g = r + i;
            *x = lambda * src[g] * w[g] * w[g + d];
        }
    }
    Ok(SMatrices { r, s_p, s_n })
}

/// `U_ij = λV_ij / (E_α − E⁰_i)` for `i, j` outside `[p1, p2]`, zero
/// elsewhere. Indices in the accessors are 1-based levels.
#[derive(Debug, Clone)]
pub struct UMatrix {
    pub p1: usize,
    pub p2: usize,
    entries: DMatrix<f64>,
}

impl UMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1, j - 1)]
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Levels outside the region, ascending.
    pub fn outside_levels(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.p1).chain(self.p2 + 1..=self.n())
    }

    /// `U` restricted to the outside levels.
    pub fn compressed(&self) -> DMatrix<f64> {
        let idx: Vec<usize> = self.outside_levels().map(|k| k - 1).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |a, c| self.entries[(idx[a], idx[c])])
    }

    /// General dense spectral radius of the compressed matrix.
    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.compressed())
    }
}

pub fn build_u(inst: &WbrmInstance, e_alpha: f64, p1: usize, p2: usize) -> Result<UMatrix> {
    let n = inst.n;
    check_region(n, p1, p2)?;
    let outside = |k: usize| k < p1 || k > p2;
    check_resonance(e_alpha, (1..=n).filter(|&k| outside(k)))?;
    let b = inst.b;
    let mut entries = DMatrix::zeros(n, n);
    for i in (1..=n).filter(|&k| outside(k)) {
        let denom = e_alpha - unperturbed_energy(i);
        let lo = i.saturating_sub(b).max(1);
        let hi = (i + b).min(n);
        for j in (lo..=hi).filter(|&k| k != i && outside(k)) {
            entries[(i - 1, j - 1)] = inst.lambda * inst.v_at(i, j) / denom;
        }
    }
    Ok(UMatrix { p1, p2, entries })
}

pub(crate) fn check_region(n: usize, p1: usize, p2: usize) -> Result<()> {
    if p1 < 1 || p1 >= p2 || p2 > n {
        return Err(Error::InvalidParameter(format!(
            "region [{p1}, {p2}] must satisfy 1 <= p1 < p2 <= {n}"
        )));
    }
    Ok(())
}

/// `s(U)` for the region `[p1, p2]`.
///
/// When the two outside blocks do not couple (`p2 − p1 >= b − 1`) and each
/// lies on one side of `E_α`, `U` is similar to `S_p ⊕ S_n` restricted to the
/// blocks and the symmetric eigensolver is used. Otherwise the compressed `U`
/// goes through the general eigensolver.
pub fn u_spectral_radius(inst: &WbrmInstance, e_alpha: f64, p1: usize, p2: usize) -> Result<f64> {
    check_region(inst.n, p1, p2)?;
    let r = split_level(inst.n, e_alpha)?;
    let decoupled = p2 - p1 + 1 >= inst.b;
    if decoupled && p1 <= r + 1 && p2 >= r {
        let s = build_s_matrices(inst, e_alpha)?;
        let up = s.s_p.sub_block(0, p1 - 1);
        let down = s.s_n.sub_block(p2 - r, inst.n - r);
        return Ok(linalg::symmetric_spectral_radius(&up).max(linalg::symmetric_spectral_radius(&down)));
    }
    Ok(build_u(inst, e_alpha, p1, p2)?.spectral_radius())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_wbrm;

    #[test]
    fn zero_lambda_gives_zero_matrices() {
        let inst = generate_wbrm(12, 2, 0.0, 1).unwrap();
        let s = build_s_matrices(&inst, 6.0).unwrap();
        assert_eq!(s.r, 6);
        assert!(s.s_p.to_dense().iter().all(|&x| x == 0.0));
        assert!(s.s_n.to_dense().iter().all(|&x| x == 0.0));
        let u = build_u(&inst, 6.0, 6, 7).unwrap();
        assert!(u.dense().iter().all(|&x| x == 0.0));
        assert_eq!(u_spectral_radius(&inst, 6.0, 6, 7).unwrap(), 0.0);
    }

    #[test]
    fn u_entries_follow_the_direct_formula() {
        let inst = generate_wbrm(10, 2, 1.7, 4).unwrap();
        let e = 5.3;
        let u = build_u(&inst, e, 4, 7).unwrap();
        for i in 1..=10usize {
            for j in 1..=10 {
                let inside = (4..=7).contains(&i) || (4..=7).contains(&j);
                let expected = if inside || i == j || i.abs_diff(j) > 2 {
                    0.0
                } else {
                    1.7 * inst.v().to_dense()[(i - 1, j - 1)] / (e - i as f64)
                };
                assert_eq!(u.get(i, j), expected, "({i}, {j})");
            }
        }
    }

    #[test]
    fn tridiagonal_u_has_only_neighbour_entries() {
        let inst = generate_wbrm(15, 1, 0.8, 2).unwrap();
        let u = build_u(&inst, 7.4, 7, 8).unwrap();
        for i in 1..=15usize {
            for j in 1..=15 {
                if i.abs_diff(j) != 1 {
                    assert_eq!(u.get(i, j), 0.0);
                }
            }
        }
        assert_ne!(u.get(3, 4), 0.0);
    }

    #[test]
    fn s_products_match_u_products() {
        let inst = generate_wbrm(20, 3, 2.1, 8).unwrap();
        let e = 10.45;
        let s = build_s_matrices(&inst, e).unwrap();
        let u = build_u(&inst, e, 10, 11).unwrap();
        let sp = s.s_p.to_dense();
        for i in 1..=9 {
            for j in 1..=9 {
                let lhs = sp[(i - 1, j - 1)] * sp[(j - 1, i - 1)];
                let rhs = u.get(i, j) * u.get(j, i);
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
        let sn = s.s_n.to_dense();
        for i in 12..=20 {
            for j in 12..=20 {
                let lhs = sn[(i - 11, j - 11)].powi(2);
                let rhs = u.get(i, j) * u.get(j, i);
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn s_block_spectrum_equals_u_block_spectrum() {
        let inst = generate_wbrm(20, 2, 1.4, 13).unwrap();
        let e = 9.6;
        let s = build_s_matrices(&inst, e).unwrap();
        let u = build_u(&inst, e, 9, 10).unwrap();
        let mut from_s: Vec<f64> = s.s_p.sub_block(0, 8).to_dense().symmetric_eigenvalues().iter().copied().collect();
        let up = u.dense().view((0, 0), (8, 8)).into_owned();
        let mut from_u: Vec<f64> = up.complex_eigenvalues().iter().map(|z| {
            assert!(z.im.abs() < 1e-9);
            z.re
        }).collect();
        from_s.sort_by(f64::total_cmp);
        from_u.sort_by(f64::total_cmp);
        for (a, b) in from_s.iter().zip(&from_u) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn decoupled_radius_matches_general_radius() {
        let inst = generate_wbrm(30, 2, 1.1, 21).unwrap();
        let e = 15.2;
        for (p1, p2) in [(15, 16), (13, 17), (10, 20)] {
            let fast = u_spectral_radius(&inst, e, p1, p2).unwrap();
            let dense = build_u(&inst, e, p1, p2).unwrap().spectral_radius();
            assert!((fast - dense).abs() < 1e-9, "[{p1},{p2}]: {fast} vs {dense}");
        }
    }

    #[test]
    fn resonance_is_rejected() {
        let inst = generate_wbrm(10, 1, 1.0, 0).unwrap();
        assert!(matches!(build_s_matrices(&inst, 4.0), Err(Error::Resonance { level: 4, .. })));
        assert!(matches!(build_u(&inst, 8.0, 4, 5), Err(Error::Resonance { level: 8, .. })));
        assert!(build_u(&inst, 4.0, 4, 5).is_ok());
        assert!(build_u(&inst, 4.5, 5, 5).is_err());
    }
}
