//! Averaged eigenfunction and LDOS shapes, their widths, and localization
//! lengths.
//!
//! Both profiles bin the weight `|C_{αk}|²` at the offset `ε = E_α − E⁰_k`.
//! The eigenfunction shape fixes `α` and spreads over `k`; the LDOS fixes `k`
//! and spreads over `α`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{middle_half, unperturbed_energy, SpectrumResult, WbrmInstance};
use crate::stats::{line_fit, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Ef,
    Ldos,
}

/// Which states (or basis levels) enter an average; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFilter {
    MiddleHalf,
    Range { start: usize, end: usize },
    Indices(Vec<usize>),
}

impl Default for StateFilter {
    fn default() -> Self {
        StateFilter::MiddleHalf
    }
}

impl StateFilter {
    pub fn select(&self, n: usize) -> Vec<usize> {
        match self {
            StateFilter::MiddleHalf => middle_half(n).collect(),
            StateFilter::Range { start, end } => (*start..(*end).min(n)).collect(),
            StateFilter::Indices(ix) => ix.iter().copied().filter(|&i| i < n).collect(),
        }
    }
}

/// Binned mean intensity. Bins have width `bin_width` and are centred on its
/// integer multiples; each contributing state adds total weight 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeProfile {
    pub kind: ShapeKind,
    pub bin_width: f64,
    /// Summed (not yet averaged) weight per bin index.
    sums: BTreeMap<i64, f64>,
    pub count: usize,
}

impl ShapeProfile {
    pub fn new(kind: ShapeKind) -> Self {
        Self::with_bin_width(kind, 1.0)
    }

    pub fn with_bin_width(kind: ShapeKind, bin_width: f64) -> Self {
        assert!(bin_width > 0.0);
        Self {
            kind,
            bin_width,
            sums: BTreeMap::new(),
            count: 0,
        }
    }

    #[inline]
    fn bin(&self, eps: f64) -> i64 {
        (eps / self.bin_width + 0.5).floor() as i64
    }

    /// Adds one state's weights `(ε, |c|²)`, renormalized to unit total.
    pub fn add_state(&mut self, points: impl IntoIterator<Item = (f64, f64)>) {
        let points: Vec<(f64, f64)> = points.into_iter().collect();
        let total: f64 = points.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return;
        }
        for (eps, w) in points {
            *self.sums.entry(self.bin(eps)).or_insert(0.0) += w / total;
        }
        self.count += 1;
    }

    /// Combines two partial profiles with the same binning.
    pub fn merge(&mut self, other: &ShapeProfile) {
        assert_eq!(self.kind, other.kind);
        assert_eq!(self.bin_width, other.bin_width);
        for (&k, &v) in &other.sums {
            *self.sums.entry(k).or_insert(0.0) += v;
        }
        self.count += other.count;
    }

    /// `(bin centre, mean intensity)` over every bin between the extremes,
    /// empty bins included as zero.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let (Some(&lo), Some(&hi)) = (self.sums.keys().next(), self.sums.keys().next_back()) else {
            return Vec::new();
        };
        let c = self.count.max(1) as f64;
        (lo..=hi)
            .map(|k| (k as f64 * self.bin_width, self.sums.get(&k).copied().unwrap_or(0.0) / c))
            .collect()
    }

    /// Mean intensity at the bin containing `eps`.
    pub fn intensity(&self, eps: f64) -> f64 {
        self.sums.get(&self.bin(eps)).copied().unwrap_or(0.0) / self.count.max(1) as f64
    }

    pub fn total(&self) -> f64 {
        self.sums.values().sum::<f64>() / self.count.max(1) as f64
    }

    /// `Σ |Π(ε) − Π(−ε)| / 2` over bins; 0 for a mirror-symmetric profile.
    pub fn mirror_asymmetry(&self) -> f64 {
        let c = self.count.max(1) as f64;
        let get = |k: i64| self.sums.get(&k).copied().unwrap_or(0.0) / c;
        let keys: std::collections::BTreeSet<i64> = self.sums.keys().flat_map(|&k| [k, -k]).collect();
        keys.iter().filter(|&&k| k > 0).map(|&k| (get(k) - get(-k)).abs()).sum::<f64>()
    }

    /// Two-column CSV `epsilon_bin_center,intensity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon_bin_center", "intensity"])?;
        for (e, v) in self.points() {
            w.write_record([e.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Adds the eigenfunction shapes of states `alphas` to `profile`.
pub fn accumulate_ef(profile: &mut ShapeProfile, spec: &SpectrumResult, alphas: &[usize]) {
    for &alpha in alphas {
        let e = spec.energies[alpha];
        let row = spec.components.row(alpha);
        profile.add_state(row.iter().enumerate().map(|(k, c)| (e - unperturbed_energy(k + 1), c * c)));
    }
}

/// Adds the LDOS of basis levels `levels` (0-based) to `profile`.
pub fn accumulate_ldos(profile: &mut ShapeProfile, spec: &SpectrumResult, levels: &[usize]) {
    for &k in levels {
        let e0 = unperturbed_energy(k + 1);
        let col = spec.components.column(k);
        profile.add_state(col.iter().enumerate().map(|(alpha, c)| (spec.energies[alpha] - e0, c * c)));
    }
}

pub fn averaged_ef_shape(ensemble: &[SpectrumResult], filter: &StateFilter) -> Result<ShapeProfile> {
    let mut p = ShapeProfile::new(ShapeKind::Ef);
    for spec in ensemble {
        accumulate_ef(&mut p, spec, &filter.select(spec.n()));
    }
    if p.count == 0 {
        return Err(Error::EmptyFilter);
    }
    Ok(p)
}

pub fn averaged_ldos_shape(ensemble: &[SpectrumResult], filter: &StateFilter) -> Result<ShapeProfile> {
    let mut p = ShapeProfile::new(ShapeKind::Ldos);
    for spec in ensemble {
        accumulate_ldos(&mut p, spec, &filter.select(spec.n()));
    }
    if p.count == 0 {
        return Err(Error::EmptyFilter);
    }
    Ok(p)
}

/// Full width at half maximum, interpolating linearly between bin centres.
/// Bins beyond the profile's extent count as zero.
///
/// Ensemble averages of broad profiles carry bin-to-bin noise comparable to
/// their plateau, so the profile is first smoothed by a centred moving
/// average over about an eighth of its interquartile range (a no-op for
/// profiles a few bins wide), and the width runs between the outermost
/// half-maximum crossings.
pub fn half_width(p: &ShapeProfile) -> Result<f64> {
    let raw: Vec<f64> = p.points().iter().map(|q| q.1).collect();
    if raw.is_empty() {
        return Err(Error::Degenerate("empty profile".into()));
    }
    let values = moving_average(&raw, smoothing_window(&raw));
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() > 1 && values.iter().all(|&v| v == max) {
        return Err(Error::Degenerate("flat profile has no half maximum".into()));
    }
    if max <= 0.0 {
        return Err(Error::Degenerate("profile has no positive weight".into()));
    }
    let half = 0.5 * max;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= values.len() {
            0.0
        } else {
            values[i as usize]
        }
    };
    let i = values.iter().position(|&v| v >= half).expect("max >= half") as isize;
    let j = values.iter().rposition(|&v| v >= half).expect("max >= half") as isize;
    let left = (i as f64) - (at(i) - half) / (at(i) - at(i - 1));
    let right = (j as f64) + (at(j) - half) / (at(j) - at(j + 1));
    Ok((right - left) * p.bin_width)
}

/// Odd window of about `IQR / 8` bins, where the IQR is taken over the
/// profile read as a mass distribution.
fn smoothing_window(values: &[f64]) -> usize {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return 1;
    }
    let mut acc = 0.0;
    let (mut q1, mut q3) = (None, None);
    for (k, v) in values.iter().enumerate() {
        acc += v / total;
        if q1.is_none() && acc >= 0.25 {
            q1 = Some(k);
        }
        if q3.is_none() && acc >= 0.75 {
            q3 = Some(k);
        }
    }
    let iqr = q3.unwrap_or(0).saturating_sub(q1.unwrap_or(0));
    let half = (iqr as f64 / 16.0).round() as usize;
    2 * half + 1
}

/// Centred moving average of odd width `w`, zero-padded at the ends.
fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    if w <= 1 {
        return values.to_vec();
    }
    let h = w / 2;
    let mut prefix = vec![0.0; values.len() + 1];
    for (k, v) in values.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v;
    }
    (0..values.len())
        .map(|k| (prefix[(k + h + 1).min(values.len())] - prefix[k.saturating_sub(h)]) / w as f64)
        .collect()
}

/// Inverse participation ratio `1 / Σ c⁴`.
pub fn localization_length(row: &[f64]) -> f64 {
    1.0 / row.iter().map(|c| c.powi(4)).sum::<f64>()
}

/// Shoulder fill factor `(w_L − ⟨N_p⟩) / (2b)`.
pub fn eta(w_l: f64, np_mean: f64, b: usize) -> f64 {
    (w_l - np_mean) / (2.0 * b as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub w_f: f64,
    pub w_l: f64,
    pub np_mean: f64,
    pub l_mean: f64,
    pub eta: f64,
}

impl WidthReport {
    pub fn new(w_f: f64, w_l: f64, np_mean: f64, l_mean: f64, b: usize) -> Self {
        Self {
            w_f,
            w_l,
            np_mean,
            l_mean,
            eta: eta(w_l, np_mean, b),
        }
    }
}

/// First and second moments `Σ_α |C_{αk}|² (E_α − E⁰_k)^{1,2}` of the LDOS of
/// basis level `k` (0-based).
pub fn ldos_moments(spec: &SpectrumResult, k: usize) -> (f64, f64) {
    let e0 = unperturbed_energy(k + 1);
    spec.components
        .column(k)
        .iter()
        .zip(&spec.energies)
        .fold((0.0, 0.0), |(m1, m2), (c, e)| {
            let w = c * c;
            (m1 + w * (e - e0), m2 + w * (e - e0).powi(2))
        })
}

/// `λ² Σ_j V_kj²`, the exact second LDOS moment of level `k` (0-based).
pub fn ldos_second_moment_exact(inst: &WbrmInstance, k: usize) -> f64 {
    let n = inst.n;
    let lo = k.saturating_sub(inst.b);
    let hi = (k + inst.b).min(n - 1);
    inst.lambda.powi(2) * (lo..=hi).map(|j| inst.v().get(k, j).powi(2)).sum::<f64>()
}

/// Straight-line fit of `ln Π` against `|ε|` for `lo <= |ε| <= hi`, pooling
/// both sides; bins with zero weight are skipped.
pub fn log_decay_fit(p: &ShapeProfile, lo: f64, hi: f64) -> Result<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = p
        .points()
        .into_iter()
        .filter(|&(e, v)| e.abs() >= lo && e.abs() <= hi && v > 0.0)
        .map(|(e, v)| (e.abs(), v.ln()))
        .unzip();
    line_fit(&x, &y, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diagonalize, generate_wbrm, hamiltonian};

    #[test]
    fn unperturbed_profiles_are_single_bins() {
        let inst = generate_wbrm(40, 2, 0.0, 1).unwrap();
        let spec = diagonalize(&hamiltonian(&inst)).unwrap();
        let ef = averaged_ef_shape(&[spec.clone()], &StateFilter::MiddleHalf).unwrap();
        assert!(ef.points().iter().all(|&(e, v)| v == if e == 0.0 { 1.0 } else { 0.0 }));
        assert_eq!(half_width(&ef).unwrap(), 1.0);
        let ldos = averaged_ldos_shape(&[spec], &StateFilter::MiddleHalf).unwrap();
        assert!(ldos.points().iter().all(|&(e, v)| v == if e == 0.0 { 1.0 } else { 0.0 }));
    }

    #[test]
    fn empty_filter_is_an_error() {
        let inst = generate_wbrm(10, 1, 1.0, 1).unwrap();
        let spec = diagonalize(&hamiltonian(&inst)).unwrap();
        let f = StateFilter::Indices(vec![]);
        assert_eq!(averaged_ef_shape(&[spec], &f).unwrap_err(), Error::EmptyFilter);
    }

    #[test]
    fn profiles_conserve_weight_and_merge() {
        let inst = generate_wbrm(60, 3, 1.5, 2).unwrap();
        let spec = diagonalize(&hamiltonian(&inst)).unwrap();
        let mut a = ShapeProfile::new(ShapeKind::Ef);
        accumulate_ef(&mut a, &spec, &[20, 21, 22]);
        let mut b = ShapeProfile::new(ShapeKind::Ef);
        accumulate_ef(&mut b, &spec, &[30, 31]);
        a.merge(&b);
        assert_eq!(a.count, 5);
        assert!((a.total() - 1.0).abs() < 1e-12);
        assert!(a.points().iter().all(|p| p.1 >= 0.0));
        let mut all = ShapeProfile::new(ShapeKind::Ef);
        accumulate_ef(&mut all, &spec, &[20, 21, 22, 30, 31]);
        for ((e1, v1), (e2, v2)) in a.points().iter().zip(all.points()) {
            assert_eq!(*e1, e2);
            assert!((v1 - v2).abs() < 1e-15);
        }
    }

    #[test]
    fn lorentzian_fwhm() {
        let gamma = 10.0;
        let mut p = ShapeProfile::new(ShapeKind::Ldos);
        p.add_state((-200..=200).map(|k| {
            let e = k as f64;
            (e, 1.0 / (e * e + gamma * gamma / 4.0))
        }));
        assert!((half_width(&p).unwrap() - gamma).abs() < 0.5);
    }

    #[test]
    fn noisy_plateau_keeps_its_full_width() {
        // A 200-bin plateau whose odd bins dip below half height.
        let mut p = ShapeProfile::new(ShapeKind::Ef);
        p.add_state((0..200).map(|k| (k as f64, if k % 7 == 3 { 0.3 } else { 1.0 })));
        let w = half_width(&p).unwrap();
        assert!((w - 200.0).abs() < 15.0, "{w}");
    }

    #[test]
    fn flat_profile_is_rejected() {
        let mut p = ShapeProfile::new(ShapeKind::Ef);
        p.add_state((0..5).map(|k| (k as f64, 1.0)));
        assert!(matches!(half_width(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn participation_ratio_limits() {
        assert_eq!(localization_length(&[0.0, 1.0, 0.0]), 1.0);
        let n = 16;
        let u = vec![1.0 / (n as f64).sqrt(); n];
        assert!((localization_length(&u) - n as f64).abs() < 1e-12);
        assert_eq!(eta(7.0, 7.0, 3), 0.0);
        assert_eq!(eta(13.0, 7.0, 3), 1.0);
    }

    #[test]
    fn ldos_sum_rules_hold_per_level() {
        let inst = generate_wbrm(80, 4, 2.0, 3).unwrap();
        let spec = diagonalize(&hamiltonian(&inst)).unwrap();
        for k in [0, 17, 40, 79] {
            let (m1, m2) = ldos_moments(&spec, k);
            assert!(m1.abs() < 1e-9, "first moment {m1}");
            let exact = ldos_second_moment_exact(&inst, k);
            assert!((m2 - exact).abs() < 1e-8, "{m2} vs {exact}");
        }
        // completeness over α
        for k in [0, 40] {
            let s: f64 = spec.components.column(k).iter().map(|c| c * c).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut p = ShapeProfile::new(ShapeKind::Ef);
        p.add_state([(0.2, 1.0), (1.1, 1.0)]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "epsilon_bin_center,intensity\n0,0.5\n1,0.5\n");
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Every state adds unit weight whatever its binning.
        #[test]
        fn profiles_stay_normalized(
            states in proptest::collection::vec(
                proptest::collection::vec((-50.0f64..50.0, 0.0f64..1.0), 1..30),
                1..8,
            ),
            bin_width in 0.25f64..3.0,
        ) {
            let mut p = ShapeProfile::with_bin_width(ShapeKind::Ef, bin_width);
            let mut added = 0;
            for s in &states {
                let before = p.count;
                p.add_state(s.iter().copied());
                added += p.count - before;
            }
            prop_assume!(added > 0);
            let total: f64 = p.points().iter().map(|q| q.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(p.points().iter().all(|q| q.1 >= 0.0));
        }
    }
}
