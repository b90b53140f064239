//! Reference region finder built on dense eigensolvers.
//!
//! Regions of width `>= b − 1` leave two uncoupled blocks, each similar to a
//! symmetric principal block of `S_p` or `S_n`. Cauchy interlacing makes the
//! block radius monotone in block size, so the widest admissible block on
//! each side (`P1*`, `P2*`) is found by galloping search and the unique
//! narrowest uncoupled region follows directly. Narrower regions couple the
//! blocks; cheap certificates settle most of them and the rest go through a
//! secular determinant of the coupling corner or, near the unit circle, a
//! dense eigensolve of the full `U`.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use super::smat::check_region;
use super::{build_s_matrices, build_u, split_level, Method, NptRegion, SMatrices};
use crate::banded::{inertia, BandedSymmetricMatrix};
use crate::error::{Error, Result};
use crate::linalg::symmetric_spectral_radius;
use crate::model::{unperturbed_energy, WbrmInstance};

type Complex64 = Complex<f64>;

/// Relative pivot floor below which an inertia count is not trusted.
const INERTIA_TOL: f64 = 1e-13;
/// Number of shifts in the geometric grid for the failure certificate.
const CERT_SHIFTS: usize = 8;
/// Minimum distance of the block eigenvalues of `K` from `±1` in the
/// secular test, keeping the poles of `h` off the circle.
const POLE_MARGIN: f64 = 1e-6;
/// Uniform intervals on `[0, π]` before refinement.
const WINDING_GRID: usize = 64;
/// Extra dyadic points towards `θ = 0` and `θ = π`.
const WINDING_EDGE_LEVELS: usize = 24;
/// `|h|` below which an eigenvalue is considered too close to the circle.
const WINDING_FLOOR: f64 = 1e-6;
const WINDING_MAX_EVALS: usize = 50_000;

pub fn npt_oracle(inst: &WbrmInstance, e_alpha: f64) -> Result<NptRegion> {
    let n = inst.n;
    let b = inst.b;
    let r = split_level(n, e_alpha)?;
    let s = build_s_matrices(inst, e_alpha)?;

    let mut cache = BlockCache::default();
    for w in 1..=b.saturating_sub(2) {
        for (p1, p2) in candidates(n, r, e_alpha, w) {
            if coupled_region_passes(inst, e_alpha, p1, p2, &mut cache)? {
                return Ok(NptRegion::new(p1, p2, n, b, Method::Oracle));
            }
        }
    }

    let (p1_star, p2_star) = widest_blocks(&s, n);
    let w = (p2_star - p1_star).max(b.saturating_sub(1)).max(1);
    if w > n - 1 {
        return Err(Error::NoRegion { max_width: n - 1 });
    }
    candidates(n, r, e_alpha, w)
        .find(|&(p1, p2)| p1 <= p1_star && p2 >= p2_star)
        .map(|(p1, p2)| NptRegion::new(p1, p2, n, b, Method::Oracle))
        .ok_or(Error::NoRegion { max_width: n - 1 })
}

/// Whether `s(U) < 1` for the region, using the dense route appropriate to
/// its geometry.
pub fn region_passes(inst: &WbrmInstance, e_alpha: f64, p1: usize, p2: usize) -> Result<bool> {
    check_region(inst.n, p1, p2)?;
    Ok(super::u_spectral_radius(inst, e_alpha, p1, p2)? < 1.0)
}

/// `(P1*, P2*)`: the largest `p1` with `s(S_p[1..p1−1]) < 1` and the
/// smallest `p2` with `s(S_n[p2+1..n]) < 1`. Empty blocks pass, so both
/// searches have a guaranteed end.
fn widest_blocks(s: &SMatrices, n: usize) -> (usize, usize) {
    let r = s.r;
    let up_ok = |p1: usize| symmetric_spectral_radius(&s.s_p.sub_block(0, p1 - 1)) < 1.0;
    let down_ok = |p2: usize| symmetric_spectral_radius(&s.s_n.sub_block(p2 - r, n - r)) < 1.0;
    let p1 = max_passing(1, r, up_ok);
    // mirror x = n + r + 1 − p2 so that the lower search is also "largest x"
    let p2 = n + r + 1 - max_passing(r + 1, n, |x| down_ok(n + r + 1 - x));
    (p1, p2)
}

/// Largest `x` in `[lo, hi]` with `ok(x)`, for `ok` true exactly below some
/// threshold and `ok(lo)` true. Gallops down from `hi`, then bisects.
fn max_passing(lo: usize, hi: usize, ok: impl Fn(usize) -> bool) -> usize {
    if ok(hi) {
        return hi;
    }
    let mut bad = hi;
    let mut step = 1;
    let mut good = loop {
        let cand = bad.saturating_sub(step).max(lo);
        if cand == lo || ok(cand) {
            break cand;
        }
        bad = cand;
        step *= 2;
    };
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Regions of width `w` bracketing `E_α`, most preferred first: centre
/// nearest `E_α`, then smaller `p1`.
fn candidates(n: usize, r: usize, e_alpha: f64, w: usize) -> impl Iterator<Item = (usize, usize)> {
    let lo = (r + 1).saturating_sub(w).max(1);
    let hi = r.min(n.saturating_sub(w));
    let mut out: Vec<(usize, usize)> = (lo..=hi).map(|p1| (p1, p1 + w)).collect();
    out.sort_by(|a, c| {
        let da = ((a.0 + a.1) as f64 - 2.0 * e_alpha).abs();
        let dc = ((c.0 + c.1) as f64 - 2.0 * e_alpha).abs();
        da.total_cmp(&dc).then(a.0.cmp(&c.0))
    });
    out.into_iter()
}

/// Full-`U` test for a region whose outside blocks may couple.
fn coupled_region_passes(
    inst: &WbrmInstance,
    e_alpha: f64,
    p1: usize,
    p2: usize,
    cache: &mut BlockCache,
) -> Result<bool> {
    let pencil = Pencil::new(inst, e_alpha, p1, p2);
    if pencil.row_sum_bound() < 1.0 || pencil.symmetrized_below_one() {
        return Ok(true);
    }
    if pencil.proves_failure() {
        return Ok(false);
    }
    if let Some(ok) = pencil.secular_decision(cache) {
        return Ok(ok);
    }
    Ok(build_u(inst, e_alpha, p1, p2)?.spectral_radius() < 1.0)
}

/// The pencil `(W, D)` with `W = λV` and `D = diag(E_α − k)` on the levels
/// outside the region; its eigenvalues are those of `U = D⁻¹W`.
struct Pencil {
    w: BandedSymmetricMatrix,
    d: Vec<f64>,
    /// Levels below `E_α`, i.e. positive entries of `D`.
    below: usize,
    p1: usize,
    p2: usize,
}

/// Eigenvalues of one diagonal block of `K` and the rows of its
/// eigenvectors that meet the coupling corner.
#[derive(Clone)]
struct BlockSpectrum {
    poles: Rc<Vec<f64>>,
    corner: Rc<DMatrix<f64>>,
}

impl BlockSpectrum {
    fn new(block: &BandedSymmetricMatrix, first_row: usize, rows: usize) -> Self {
        let eig = SymmetricEigen::new(block.to_dense());
        Self {
            poles: Rc::new(eig.eigenvalues.iter().copied().collect()),
            corner: Rc::new(eig.eigenvectors.rows(first_row, rows).into_owned()),
        }
    }
}

/// The upper block of `K` depends only on `p1` and the lower only on `p2`,
/// so one state's candidates share their spectra.
#[derive(Default)]
struct BlockCache {
    upper: HashMap<usize, BlockSpectrum>,
    lower: HashMap<usize, BlockSpectrum>,
}

impl Pencil {
    fn new(inst: &WbrmInstance, e_alpha: f64, p1: usize, p2: usize) -> Self {
        let levels: Vec<usize> = (1..p1).chain(p2 + 1..=inst.n).collect();
        let m = levels.len();
        let mut w = BandedSymmetricMatrix::zeros(m, inst.b);
        for dd in 1..=w.bandwidth() {
            for a in 0..m - dd {
                let (i, j) = (levels[a], levels[a + dd]);
                if j - i <= inst.b {
                    w.band_mut(dd)[a] = inst.lambda * inst.v_at(i, j);
                }
            }
        }
        let d: Vec<f64> = levels.iter().map(|&k| e_alpha - unperturbed_energy(k)).collect();
        Self {
            w,
            d,
            below: p1 - 1,
            p1,
            p2,
        }
    }

    fn row_sum_bound(&self) -> f64 {
        (0..self.d.len())
            .map(|a| {
                let lo = a.saturating_sub(self.w.bandwidth());
                let hi = (a + self.w.bandwidth()).min(self.d.len() - 1);
                (lo..=hi).map(|c| self.w.get(a, c).abs()).sum::<f64>() / self.d[a].abs()
            })
            .fold(0.0, f64::max)
    }

    /// Whether `s(K) < 1` for `K = |D|^{−1/2} W |D|^{−1/2}`, decided by the
    /// inertia of `K ∓ I`. `U` is similar to `JK` with `J = sign(D)`, so
    /// `s(U) <= ‖JK‖₂ = ‖K‖₂ = s(K)`, with equality when the blocks do not
    /// couple.
    fn symmetrized_below_one(&self) -> bool {
        below(&self.symmetrized(), 1.0)
    }

    fn symmetrized(&self) -> BandedSymmetricMatrix {
        let mut k = self.w.clone();
        let scale: Vec<f64> = self.d.iter().map(|d| 1.0 / d.abs().sqrt()).collect();
        for dd in 1..=k.bandwidth() {
            for (a, x) in k.band_mut(dd).iter_mut().enumerate() {
                *x *= scale[a] * scale[a + dd];
            }
        }
        k
    }

    /// Decides `s(U) < 1` through the coupling corner.
    ///
    /// With `JK = [[A, C], [−Cᵀ, −B]]` and `C` confined to an `r × r`
    /// corner `C₀`, `det(JK − μ) = det(A − μ) det(−B − μ) h(μ)` where
    /// `h(μ) = det(I + R_B(μ) C₀ᵀ R_A(μ) C₀)` and `R_A`, `R_B` are corner
    /// blocks of the resolvents. The winding of the left side along the unit
    /// circle counts the eigenvalues inside, so all `n` are inside exactly
    /// when `h` winds once per eigenvalue of `A` or `−B` outside the circle.
    /// `None` when a block eigenvalue sits on the circle, the winding cannot
    /// be resolved, or `h` nearly vanishes on the circle.
    fn secular_decision(&self, cache: &mut BlockCache) -> Option<bool> {
        let k = self.symmetrized();
        let (n, split, bw) = (k.n(), self.below, k.bandwidth());
        let ru = bw.min(split);
        let rl = bw.min(n - split);
        if ru == 0 || rl == 0 {
            return None;
        }
        let c0 = DMatrix::from_fn(ru, rl, |i, j| Complex64::new(k.get(split - ru + i, split + j), 0.0));
        let a = cache
            .upper
            .entry(self.p1)
            .or_insert_with(|| BlockSpectrum::new(&k.sub_block(0, split), split - ru, ru))
            .clone();
        let b = cache
            .lower
            .entry(self.p2)
            .or_insert_with(|| BlockSpectrum::new(&k.sub_block(split, n), 0, rl))
            .clone();
        let poles = a.poles.iter().chain(b.poles.iter());
        if poles.clone().any(|x| (x.abs() - 1.0).abs() < POLE_MARGIN) {
            return None;
        }
        let outside = poles.filter(|x| x.abs() > 1.0).count() as i64;
        let poles_b: Vec<f64> = b.poles.iter().map(|x| -x).collect();
        let h = |theta: f64| {
            let mu = Complex64::from_polar(1.0, theta);
            let ra = resolvent_corner(&a.corner, &a.poles, mu);
            let rb = resolvent_corner(&b.corner, &poles_b, mu);
            (DMatrix::identity(rl, rl) + rb * c0.transpose() * ra * &c0).determinant()
        };
        winding_number(h).map(|w| w == outside)
    }

    /// Negative inertia of `W − μD`.
    fn negatives(&self, mu: f64) -> Option<usize> {
        let mut m = self.w.clone();
        for (x, &d) in m.diag_mut().iter_mut().zip(&self.d) {
            *x = -mu * d;
        }
        inertia(&m, 0.0, INERTIA_TOL)
    }

    /// Sylvester certificate for a real eigenvalue of modulus `>= 1`.
    ///
    /// As `μ → +∞` the inertia of `W − μD` tends to the number of positive
    /// entries of `D` and only changes where `μ` crosses a real eigenvalue, so
    /// a different count at some `μ >= 1` proves an eigenvalue above `μ`;
    /// likewise for `W + μD` and eigenvalues below `−μ`.
    fn proves_failure(&self) -> bool {
        let above = self.d.len() - self.below;
        let top = self.row_sum_bound().max(1.0);
        (0..=CERT_SHIFTS)
            .map(|i| top.powf(i as f64 / CERT_SHIFTS as f64))
            .any(|mu| {
                matches!(self.negatives(mu), Some(k) if k != self.below)
                    || matches!(self.negatives(-mu), Some(k) if k != above)
            })
    }
}

/// `Σ_i u_i u_iᵀ / (p_i − μ)` over the columns `u_i` of `u`.
fn resolvent_corner(u: &DMatrix<f64>, poles: &[f64], mu: Complex64) -> DMatrix<Complex64> {
    let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] / (poles[j] - mu));
    scaled * u.transpose().map(|x| Complex64::new(x, 0.0))
}

/// Winding number of `h` along the unit circle, from the argument change
/// over the upper half; `h` is real on the real axis and conjugate
/// symmetric, so the lower half contributes the same amount. The grid is refined near
/// `θ = 0, π`, where the real poles approach the circle, and any step whose
/// relative change exceeds one half is bisected; a chord shorter than both
/// endpoint moduli cannot pass through zero.
fn winding_number(h: impl Fn(f64) -> Complex64) -> Option<i64> {
    use std::f64::consts::PI;
    let mut grid: Vec<f64> = (0..=WINDING_GRID).map(|i| PI * i as f64 / WINDING_GRID as f64).collect();
    for k in 1..=WINDING_EDGE_LEVELS {
        let t = PI / WINDING_GRID as f64 * 0.5f64.powi(k as i32);
        grid.push(t);
        grid.push(PI - t);
    }
    grid.sort_by(f64::total_cmp);
    let mut evals = 0usize;
    let mut total = 0.0;
    let mut stack: Vec<(f64, Complex64, f64, Complex64)> = Vec::new();
    let mut prev = (grid[0], h(grid[0]));
    for &t in &grid[1..] {
        let cur = (t, h(t));
        stack.push((prev.0, prev.1, cur.0, cur.1));
        prev = cur;
        while let Some((ta, ha, tb, hb)) = stack.pop() {
            let floor = ha.norm().min(hb.norm());
            if floor < WINDING_FLOOR || evals > WINDING_MAX_EVALS {
                return None;
            }
            if (hb - ha).norm() <= 0.5 * floor {
                total += (hb / ha).arg();
                continue;
            }
            let tm = 0.5 * (ta + tb);
            let hm = h(tm);
            evals += 1;
            stack.push((tm, hm, tb, hb));
            stack.push((ta, ha, tm, hm));
        }
    }
    let turns = total / PI;
    if (turns - turns.round()).abs() > 1e-6 {
        return None;
    }
    Some(turns.round() as i64)
}

/// `s(m) < t` for symmetric `m`, from the inertia of `m ∓ tI`; `false` when
/// the factorization is not trustworthy.
fn below(m: &BandedSymmetricMatrix, t: f64) -> bool {
    m.n() == 0 || (inertia(m, t, INERTIA_TOL) == Some(m.n()) && inertia(m, -t, INERTIA_TOL) == Some(0))
}
