//! The Wigner-band random matrix model `H = H₀ + λV` with `E⁰_k = k`.

use std::hash::Hasher;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::{self, BandedSymmetricMatrix};
use crate::error::{Error, Result};
use crate::rng;

/// Default dimension limit for dense diagonalization.
pub const DENSE_LIMIT: usize = 4000;

/// Unperturbed energy of level `k` (1-based).
#[inline]
pub fn unperturbed_energy(k: usize) -> f64 {
    k as f64
}

/// One realization of the ensemble.
///
/// Serializes as `{n, b, lambda, seed}` only; the perturbation is regenerated
/// on deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceParams", into = "InstanceParams")]
pub struct WbrmInstance {
    pub n: usize,
    pub b: usize,
    pub lambda: f64,
    pub seed: u64,
    v: BandedSymmetricMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceParams {
    n: usize,
    b: usize,
    lambda: f64,
    seed: u64,
}

impl TryFrom<InstanceParams> for WbrmInstance {
    type Error = Error;

    fn try_from(p: InstanceParams) -> Result<Self> {
        generate_wbrm(p.n, p.b, p.lambda, p.seed)
    }
}

impl From<WbrmInstance> for InstanceParams {
    fn from(inst: WbrmInstance) -> Self {
        Self {
            n: inst.n,
            b: inst.b,
            lambda: inst.lambda,
            seed: inst.seed,
        }
    }
}

impl WbrmInstance {
    /// The perturbation `V` (zero diagonal).
    pub fn v(&self) -> &BandedSymmetricMatrix {
        &self.v
    }

    /// `V` between levels `i` and `j` (1-based).
    #[inline]
    pub fn v_at(&self, i: usize, j: usize) -> f64 {
        self.v.get(i - 1, j - 1)
    }

    /// Same perturbation at a different strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Draws a realization. Band `d` comes from stream `d` of `seed`, so the
/// result is independent of scheduling.
pub fn generate_wbrm(n: usize, b: usize, lambda: f64, seed: u64) -> Result<WbrmInstance> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if b < 1 || b >= n {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must satisfy 1 <= b < n, got b = {b}, n = {n}"
        )));
    }
    check_lambda(lambda)?;
    let bands: Vec<Vec<f64>> = (1..=b)
        .into_par_iter()
        .map(|d| rng::normals(seed, d as u64, n - d))
        .collect();
    let v = BandedSymmetricMatrix::from_parts(vec![0.0; n], bands)?;
    Ok(WbrmInstance {
        n,
        b,
        lambda,
        seed,
        v,
    })
}

/// `H₀ + λV` in band storage.
pub fn hamiltonian(inst: &WbrmInstance) -> BandedSymmetricMatrix {
    let mut h = inst.v.affine(inst.lambda, 0.0);
    for (i, x) in h.diag_mut().iter_mut().enumerate() {
        *x = unperturbed_energy(i + 1);
    }
    h
}

/// Eigen-decomposition of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending eigenvalues `E_α`.
    pub energies: Vec<f64>,
    /// `components[(α, k)] = C_{αk}`, one eigenvector per row (0-based).
    pub components: DMatrix<f64>,
}

impl SpectrumResult {
    pub fn n(&self) -> usize {
        self.energies.len()
    }

    /// Components of state `alpha` (0-based) over the unperturbed basis.
    pub fn row(&self, alpha: usize) -> Vec<f64> {
        self.components.row(alpha).iter().copied().collect()
    }
}

pub fn diagonalize(m: &BandedSymmetricMatrix) -> Result<SpectrumResult> {
    diagonalize_with_limit(m, DENSE_LIMIT)
}

pub fn diagonalize_with_limit(m: &BandedSymmetricMatrix, limit: usize) -> Result<SpectrumResult> {
    let n = m.n();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    let dense = m.to_dense();
    let eig = SymmetricEigen::try_new(dense, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::NonConvergence { fingerprint: fingerprint(m) })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let components = DMatrix::from_fn(n, n, |alpha, k| eig.eigenvectors[(k, order[alpha])]);
    Ok(SpectrumResult {
        energies,
        components,
    })
}

/// Eigenvalue `alpha` (0-based, ascending) without forming eigenvectors.
pub fn eigenvalue(m: &BandedSymmetricMatrix, alpha: usize) -> Result<f64> {
    banded::eigenvalue_by_bisection(m, alpha)
}

/// Hash of the matrix contents, reported with solver failures.
pub fn fingerprint(m: &BandedSymmetricMatrix) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    h.write_usize(m.n());
    h.write_usize(m.bandwidth());
    for x in m.diag() {
        h.write_u64(x.to_bits());
    }
    for d in 1..=m.bandwidth() {
        for x in m.band(d) {
            h.write_u64(x.to_bits());
        }
    }
    h.finish()
}

/// 0-based state indices in the middle half of an `n`-level spectrum.
pub fn middle_half(n: usize) -> std::ops::Range<usize> {
    n / 4..n - n / 4
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate_wbrm(1, 1, 1.0, 0).is_err());
        assert!(generate_wbrm(5, 5, 1.0, 0).is_err());
        assert!(generate_wbrm(5, 0, 1.0, 0).is_err());
        assert!(generate_wbrm(5, 1, -1.0, 0).is_err());
        assert!(generate_wbrm(5, 1, f64::NAN, 0).is_err());
    }

    #[test]
    fn zero_lambda_is_unperturbed() {
        let inst = generate_wbrm(5, 1, 0.0, 3).unwrap();
        let h = hamiltonian(&inst);
        assert_eq!(h.diag(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(h.band(1).iter().all(|&x| x == 0.0));
        let spec = diagonalize(&h).unwrap();
        assert_eq!(spec.energies, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(spec.components.map(f64::abs), DMatrix::identity(5, 5));
    }

    #[test]
    fn hamiltonian_is_linear_in_lambda() {
        let a = generate_wbrm(40, 3, 1.0, 11).unwrap();
        let b = a.with_lambda(5.0).unwrap();
        let ha = hamiltonian(&a);
        let hb = hamiltonian(&b);
        for d in 1..=3 {
            for (x, y) in ha.band(d).iter().zip(hb.band(d)) {
                assert_eq!(5.0 * x, *y);
            }
        }
        assert_eq!(ha.band(1), a.v().band(1));
        assert!(a.v().diag().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_wbrm(60, 4, 2.0, 99).unwrap();
        let b = generate_wbrm(60, 4, 2.0, 99).unwrap();
        let c = generate_wbrm(60, 4, 2.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let dense = hamiltonian(&a).to_dense();
        assert_eq!(dense, dense.transpose());
    }

    #[test]
    fn json_holds_parameters_only() {
        let a = generate_wbrm(30, 2, 1.5, 17).unwrap();
        let s = a.to_json().unwrap();
        assert_eq!(s, r#"{"n":30,"b":2,"lambda":1.5,"seed":17}"#);
        assert_eq!(WbrmInstance::from_json(&s).unwrap(), a);
        assert!(WbrmInstance::from_json(r#"{"n":3,"b":5,"lambda":1,"seed":1}"#).is_err());
    }

    #[test]
    fn two_by_two_closed_form() {
        let x = 0.7;
        let m = BandedSymmetricMatrix::from_parts(vec![1.0, 2.0], vec![vec![x]]).unwrap();
        let spec = diagonalize(&m).unwrap();
        let r = (1.0 + 4.0 * x * x).sqrt();
        assert!((spec.energies[0] - (3.0 - r) / 2.0).abs() < 1e-14);
        assert!((spec.energies[1] - (3.0 + r) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_invariants() {
        let inst = generate_wbrm(50, 3, 1.3, 5).unwrap();
        let h = hamiltonian(&inst);
        let spec = diagonalize(&h).unwrap();
        let dense = h.to_dense();
        let norm = dense.norm();
        let trace: f64 = (1..=50).map(|k| k as f64).sum();
        assert!((spec.energies.iter().sum::<f64>() - trace).abs() < 1e-8);
        assert!(spec.energies.windows(2).all(|w| w[0] <= w[1]));
        for alpha in 0..50 {
            let v = nalgebra::DVector::from_vec(spec.row(alpha));
            assert!((v.norm_squared() - 1.0).abs() < 1e-10);
            let r = &dense * &v - spec.energies[alpha] * &v;
            assert!(r.norm() <= 1e-8 * norm);
        }
        for alpha in [0, 20, 49] {
            let e = eigenvalue(&h, alpha).unwrap();
            assert!((e - spec.energies[alpha]).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_limit_is_enforced() {
        let inst = generate_wbrm(20, 1, 1.0, 0).unwrap();
        let err = diagonalize_with_limit(&hamiltonian(&inst), 10).unwrap_err();
        assert_eq!(err, Error::TooLarge { n: 20, limit: 10 });
    }
}
