//! Symmetric band storage and the band-limited symmetric elimination that
//! both the pivot scans and the Sturm-count bisection are built on.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real symmetric matrix with half-bandwidth `b`, stored by diagonals.
///
/// `bands[d - 1][i]` holds the element coupling rows `i` and `i + d`
/// (0-based), so band `d` has `n - d` entries. Only the upper bands are
/// stored, which makes the matrix symmetric by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedSymmetricMatrix {
    n: usize,
    b: usize,
    diag: Vec<f64>,
    bands: Vec<Vec<f64>>,
}

/// Order in which an elimination visits the rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Eliminates below the diagonal starting from the first row.
    TopDown,
    /// Eliminates above the diagonal starting from the last row.
    BottomUp,
}

impl BandedSymmetricMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        let b = b.min(n.saturating_sub(1));
        let bands = (1..=b).map(|d| vec![0.0; n - d]).collect();
        Self {
            n,
            b,
            diag: vec![0.0; n],
            bands,
        }
    }

    pub fn identity(n: usize, b: usize) -> Self {
        let mut m = Self::zeros(n, b);
        m.diag.fill(1.0);
        m
    }

    /// Builds a matrix from explicit diagonal and band vectors.
    pub fn from_parts(diag: Vec<f64>, bands: Vec<Vec<f64>>) -> Result<Self> {
        let n = diag.len();
        for (k, band) in bands.iter().enumerate() {
            let d = k + 1;
            if d >= n.max(1) || band.len() != n - d {
                return Err(Error::InvalidParameter(format!(
                    "band {d} has length {} for dimension {n}",
                    band.len()
                )));
            }
        }
        Ok(Self {
            n,
            b: bands.len(),
            diag,
            bands,
        })
    }

    /// Extracts the band part of a dense matrix, rejecting asymmetric input or
    /// entries outside the band.
    pub fn from_dense(m: &DMatrix<f64>, b: usize) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidParameter("matrix is not square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if i.abs_diff(j) > b && m[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "non-zero entry outside the band at ({i}, {j})"
                    )));
                }
            }
        }
        let mut out = Self::zeros(n, b);
        for i in 0..n {
            out.diag[i] = m[(i, i)];
        }
        for d in 1..=out.b {
            for i in 0..n - d {
                out.bands[d - 1][i] = m[(i, i + d)];
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-bandwidth.
    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    /// Band at offset `d` (1-based offset, `1 <= d <= b`).
    pub fn band(&self, d: usize) -> &[f64] {
        &self.bands[d - 1]
    }

    pub fn band_mut(&mut self, d: usize) -> &mut [f64] {
        &mut self.bands[d - 1]
    }

    /// Element `(i, j)`, 0-based; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d == 0 {
            self.diag[lo]
        } else if d <= self.b {
            self.bands[d - 1][lo]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.b, "({i}, {j}) lies outside the band");
        if d == 0 {
            self.diag[lo] = value;
        } else {
            self.bands[d - 1][lo] = value;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
        }
        for (k, band) in self.bands.iter().enumerate() {
            let d = k + 1;
            for (i, &x) in band.iter().enumerate() {
                m[(i, i + d)] = x;
                m[(i + d, i)] = x;
            }
        }
        m
    }

    /// `scale * self + shift * I`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        let mut out = self.clone();
        for x in &mut out.diag {
            *x = scale * *x + shift;
        }
        for band in &mut out.bands {
            for x in band.iter_mut() {
                *x *= scale;
            }
        }
        out
    }

    /// Principal sub-block over rows `start..end`.
    pub fn sub_block(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.n);
        let n = end - start;
        let b = self.b.min(n.saturating_sub(1));
        let diag = self.diag[start..end].to_vec();
        let bands = (1..=b)
            .map(|d| self.bands[d - 1][start..end - d].to_vec())
            .collect();
        Self { n, b, diag, bands }
    }

    /// The same matrix with the row order reversed.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.diag.reverse();
        for band in &mut out.bands {
            band.reverse();
        }
        out
    }

    /// Maximum absolute row sum (a bound on every eigenvalue modulus).
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.b);
                let hi = (i + self.b).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Interval `[lo, hi]` containing the whole spectrum.
    pub fn gershgorin_interval(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let a = (i.saturating_sub(self.b)..=(i + self.b).min(self.n - 1))
                .filter(|&j| j != i)
                .map(|j| self.get(i, j).abs())
                .sum::<f64>();
            lo = lo.min(self.diag[i] - a);
            hi = hi.max(self.diag[i] + a);
        }
        (lo, hi)
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

/// Runs the symmetric band elimination (LDLᵀ without interchanges) and hands
/// each pivot `y_k = d_k / d_{k-1}` to `visit` as `(k, y_k)`, `k` counted in
/// elimination order from 0. Elimination stops when `visit` returns `false`.
///
/// Cost is O(n·b²) time and O(n·b) memory.
pub(crate) fn eliminate<F>(m: &BandedSymmetricMatrix, shift: f64, mut visit: F)
where
    F: FnMut(usize, f64) -> bool,
{
    let n = m.n;
    let b = m.b;
    // l[k * b + (t - 1)] = L[k][k - t]
    let mut l = vec![0.0; n * b.max(1)];
    let mut d = vec![0.0; n];
    for k in 0..n {
        let first = k.saturating_sub(b);
        let mut dk = m.diag[k] - shift;
        for j in first..k {
            let mut s = m.bands[k - j - 1][j];
            let lo = first.max(j.saturating_sub(b));
            for p in lo..j {
                s -= l[k * b + (k - p - 1)] * l[j * b + (j - p - 1)] * d[p];
            }
            let lkj = s / d[j];
            l[k * b + (k - j - 1)] = lkj;
            dk -= lkj * s;
        }
        d[k] = dk;
        if !visit(k, dk) {
            return;
        }
    }
}

/// Counts eigenvalues strictly below `sigma` via Sylvester's law of inertia.
///
/// Pivots that vanish are nudged to `-pivmin`, the usual Sturm-count
/// safeguard, so the count is defined for every shift.
pub fn count_below(m: &BandedSymmetricMatrix, sigma: f64) -> usize {
    if m.b == 1 {
        return sturm_count_tridiagonal(m, sigma);
    }
    let pivmin = f64::MIN_POSITIVE.sqrt() * m.gershgorin_radius().max(1.0);
    let mut count = 0;
    eliminate_guarded(m, sigma, pivmin, |_, y| {
        if y < 0.0 {
            count += 1;
        }
    });
    count
}

fn sturm_count_tridiagonal(m: &BandedSymmetricMatrix, sigma: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE.sqrt() * m.gershgorin_radius().max(1.0);
    let e = &m.bands[0];
    let mut count = 0;
    let mut q = m.diag[0] - sigma;
    for k in 0..m.n {
        if k > 0 {
            q = m.diag[k] - sigma - e[k - 1] * e[k - 1] / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn eliminate_guarded<F>(m: &BandedSymmetricMatrix, shift: f64, pivmin: f64, mut visit: F)
where
    F: FnMut(usize, f64),
{
    let n = m.n;
    let b = m.b;
    let mut l = vec![0.0; n * b.max(1)];
    let mut d = vec![0.0; n];
    for k in 0..n {
        let first = k.saturating_sub(b);
        let mut dk = m.diag[k] - shift;
        for j in first..k {
            let mut s = m.bands[k - j - 1][j];
            let lo = first.max(j.saturating_sub(b));
            for p in lo..j {
                s -= l[k * b + (k - p - 1)] * l[j * b + (j - p - 1)] * d[p];
            }
            let lkj = s / d[j];
            l[k * b + (k - j - 1)] = lkj;
            dk -= lkj * s;
        }
        if dk.abs() < pivmin {
            dk = -pivmin;
        }
        d[k] = dk;
        visit(k, dk);
    }
}

/// Number of negative and near-zero pivots of `m - shift·I`.
///
/// Returns `None` when some pivot falls below `rel_tol` relative to the row
/// scale, in which case the inertia cannot be trusted.
pub(crate) fn inertia(m: &BandedSymmetricMatrix, shift: f64, rel_tol: f64) -> Option<usize> {
    let scale = m.gershgorin_radius() + shift.abs();
    let floor = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut negatives = 0;
    let mut healthy = true;
    eliminate(m, shift, |_, y| {
        if !y.is_finite() || y.abs() <= floor {
            healthy = false;
            return false;
        }
        if y < 0.0 {
            negatives += 1;
        }
        true
    });
    healthy.then_some(negatives)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection on Sturm counts.
pub fn eigenvalue_by_bisection(m: &BandedSymmetricMatrix, k: usize) -> Result<f64> {
    if k >= m.n {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue index {k} out of range for dimension {}",
            m.n
        )));
    }
    let (mut lo, mut hi) = m.gershgorin_interval();
    let span = (hi - lo).abs().max(1.0);
    lo -= 1e-9 * span;
    hi += 1e-9 * span;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(m, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, b: usize, seed: u64) -> BandedSymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandedSymmetricMatrix::zeros(n, b);
        for i in 0..n {
            m.diag_mut()[i] = rng.random_range(-2.0..2.0);
        }
        for d in 1..=m.bandwidth() {
            for x in m.band_mut(d) {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    #[test]
    fn dense_round_trip() {
        let m = random_banded(12, 3, 1);
        let dense = m.to_dense();
        assert_eq!(dense, dense.transpose());
        assert_eq!(BandedSymmetricMatrix::from_dense(&dense, 3).unwrap(), m);
        assert_eq!(dense[(0, 5)], 0.0);
    }

    #[test]
    fn from_dense_rejects_entries_outside_band() {
        let mut dense = DMatrix::<f64>::identity(4, 4);
        dense[(0, 3)] = 1.0;
        dense[(3, 0)] = 1.0;
        assert!(BandedSymmetricMatrix::from_dense(&dense, 1).is_err());
        dense[(3, 0)] = 2.0;
        assert!(BandedSymmetricMatrix::from_dense(&dense, 3).is_err());
    }

    #[test]
    fn sub_block_and_reverse_match_dense() {
        let m = random_banded(10, 2, 7);
        let dense = m.to_dense();
        let sub = m.sub_block(3, 8).to_dense();
        assert_eq!(sub, dense.view((3, 3), (5, 5)).into_owned());
        let r = m.reversed().to_dense();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(r[(i, j)], dense[(9 - i, 9 - j)]);
            }
        }
    }

    #[test]
    fn pivots_are_ratios_of_leading_minors() {
        let m = random_banded(9, 3, 3).affine(0.3, 1.0);
        let dense = m.to_dense();
        let mut prev = 1.0;
        eliminate(&m, 0.0, |k, y| {
            let minor = dense.view((0, 0), (k + 1, k + 1)).determinant();
            assert!((y - minor / prev).abs() < 1e-10 * (1.0 + y.abs()));
            prev = minor;
            true
        });
    }

    #[test]
    fn count_below_matches_dense_spectrum() {
        for (seed, b) in [(11, 1), (12, 2), (13, 4)] {
            let m = random_banded(30, b, seed);
            let mut ev: Vec<f64> = m.to_dense().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for sigma in [-3.0, -1.0, 0.0, 0.5, 2.5] {
                let expected = ev.iter().filter(|&&e| e < sigma).count();
                assert_eq!(count_below(&m, sigma), expected, "b={b} sigma={sigma}");
            }
            for k in [0, 7, 29] {
                let x = eigenvalue_by_bisection(&m, k).unwrap();
                assert!((x - ev[k]).abs() < 1e-10, "k={k}: {x} vs {}", ev[k]);
            }
        }
    }

    #[test]
    fn inertia_refuses_singular_shift() {
        let m = BandedSymmetricMatrix::identity(5, 1);
        assert_eq!(inertia(&m, 1.0, 1e-12), None);
        assert_eq!(inertia(&m, 2.0, 1e-12), Some(5));
        assert_eq!(inertia(&m, 0.0, 1e-12), Some(0));
    }
}
