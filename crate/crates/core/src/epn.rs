//! Eigenvalue power normalization.
//!
//! Two flavours are provided. [`slice_epn`] raises every frontal slice of an
//! order-3 tensor (each a PSD matrix) to a matrix power through its
//! eigendecomposition. [`tensor_epn`] whitens the whole tensor: HOSVD, a
//! spectral function on the core, reconstruction, then an optional
//! elementwise power.
//!
//! The spectral function is either the signed power `sgn(e)|e|^γ` or MaxExp,
//! `sgn(e)(1 - (1 - min(|e|/κ, 1))^(N+η))`, the probability that at least one
//! of `N` trials detects a subspace occurring with probability `|e|/κ`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{contract_vectors, mode_product, outer_power, reconstruct, unfold, DenseTensor, HosvdResult};

/// Slices must match their transpose to this absolute tolerance.
pub const SLICE_SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues down to `-NEG_EIG_TOL · max(1, λ_max)` are treated as zero.
pub const NEG_EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpnMode {
    None,
    Slice,
    Hosvd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralKind {
    Gamma,
    MaxExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpnConfig {
    pub mode: EpnMode,
    pub gamma: f64,
    #[serde(default = "one")]
    pub gamma_star: f64,
    #[serde(default = "gamma_kind")]
    pub spectral: SpectralKind,
    #[serde(default)]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

fn gamma_kind() -> SpectralKind {
    SpectralKind::Gamma
}

impl EpnConfig {
    pub fn none() -> Self {
        Self {
            mode: EpnMode::None,
            gamma: 1.0,
            gamma_star: 1.0,
            spectral: SpectralKind::Gamma,
            eta: 0.0,
        }
    }

    pub fn slice(gamma: f64) -> Self {
        Self {
            mode: EpnMode::Slice,
            gamma,
            ..Self::none()
        }
    }

    pub fn hosvd(gamma: f64) -> Self {
        Self {
            mode: EpnMode::Hosvd,
            gamma,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("gamma_star", self.gamma_star)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("epn.{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("epn.eta must be non-negative, got {}", self.eta)));
        }
        Ok(())
    }
}

/// An elementwise odd spectral function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFn {
    /// `sgn(e)|e|^γ`
    Gamma(f64),
    /// `sgn(e)(1 - (1 - min(|e|/κ, 1))^exponent)`
    MaxExp { kappa: f64, exponent: f64 },
}

impl SpectralFn {
    #[inline]
    pub fn eval(&self, e: f64) -> f64 {
        let mag = match *self {
            SpectralFn::Gamma(g) => e.abs().powf(g),
            SpectralFn::MaxExp { kappa, exponent } => {
                let p = (e.abs() / kappa).min(1.0);
                1.0 - (1.0 - p).powf(exponent)
            }
        };
        if e < 0.0 {
            -mag
        } else if e > 0.0 {
            mag
        } else {
            0.0
        }
    }
}

pub fn spectral_apply(e: &DenseTensor, f: SpectralFn) -> DenseTensor {
    e.map(|v| f.eval(v))
}

/// Symmetric PSD matrix power via eigendecomposition.
pub fn psd_power(m: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.max();
    let floor = -NEG_EIG_TOL * lmax.abs().max(1.0);
    let lmin = eig.eigenvalues.min();
    if lmin < floor {
        return Err(Error::PreconditionViolation(format!(
            "slice is not positive semi-definite (min eigenvalue {lmin:.3e})"
        )));
    }
    let powered = eig.eigenvalues.map(|l| if l > 0.0 { l.powf(gamma) } else { 0.0 });
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&powered) * v.transpose();
    // Restore exact symmetry lost to rounding.
    Ok((&out + out.transpose()) * 0.5)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!("slice of shape {}x{} is not square", m.nrows(), m.ncols())));
    }
    let dev = (m - m.transpose()).amax();
    if dev > SLICE_SYMMETRY_TOL {
        return Err(Error::PreconditionViolation(format!(
            "slice is not symmetric (max deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// Replaces every frontal slice `X[:, :, s]` by its matrix power `γ`. An
/// order-2 input is treated as a single slice.
pub fn slice_epn(x: &DenseTensor, gamma: f64) -> Result<DenseTensor> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    match x.order() {
        2 => {
            let m = DMatrix::from_column_slice(x.dims()[0], x.dims()[1], x.data());
            let p = psd_power(&m, gamma)?;
            DenseTensor::new(x.dims().to_vec(), p.as_slice().to_vec())
        }
        3 => {
            let mut out = x.clone();
            for s in 0..x.dims()[2] {
                let p = psd_power(&x.frontal_slice(s)?, gamma)?;
                out.set_frontal_slice(s, &p)?;
            }
            Ok(out)
        }
        r => Err(invalid(format!("slice EPN needs an order-2 or order-3 tensor, got order {r}"))),
    }
}

/// Higher-order SVD. `factors[k]` holds the left singular vectors of the
/// mode-k unfolding, ordered by decreasing singular value; the core is `X`
/// multiplied by every `factors[k]ᵀ`.
pub fn hosvd(x: &DenseTensor) -> Result<HosvdResult> {
    if x.order() < 2 {
        return Err(invalid("HOSVD needs a tensor of order at least 2"));
    }
    let mut factors = Vec::with_capacity(x.order());
    for k in 0..x.order() {
        let m = unfold(x, k)?;
        let svd = m.try_svd(true, false, 1e-15, 10_000).ok_or_else(|| Error::NumericFailure {
            mode: k,
            message: "SVD did not converge".into(),
        })?;
        let u = svd.u.ok_or_else(|| Error::NumericFailure {
            mode: k,
            message: "SVD returned no left singular vectors".into(),
        })?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure {
                mode: k,
                message: "non-finite singular vectors".into(),
            });
        }
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
        factors.push(sorted);
    }
    let mut core = x.clone();
    for (k, a) in factors.iter().enumerate() {
        core = mode_product(&core, &a.transpose(), k)?;
    }
    Ok(HosvdResult { core, factors })
}

/// HOSVD-based whitening. `trials` is the number of aggregated terms and
/// sets the MaxExp exponent `trials + η`; it is ignored in gamma mode. For
/// MaxExp, `κ` is the largest core magnitude.
pub fn tensor_epn(x: &DenseTensor, cfg: &EpnConfig, trials: usize) -> Result<DenseTensor> {
    let HosvdResult { core, factors } = hosvd(x)?;
    let f = match cfg.spectral {
        SpectralKind::Gamma => SpectralFn::Gamma(cfg.gamma),
        SpectralKind::MaxExp => {
            let kappa = core.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if kappa == 0.0 {
                return Ok(x.clone());
            }
            SpectralFn::MaxExp {
                kappa,
                exponent: trials as f64 + cfg.eta,
            }
        }
    };
    let whitened = reconstruct(&spectral_apply(&core, f), &factors)?;
    if cfg.gamma_star == 1.0 {
        return Ok(whitened);
    }
    Ok(spectral_apply(&whitened, SpectralFn::Gamma(cfg.gamma_star)))
}

/// Applies the EPN selected by `cfg.mode`.
pub fn apply(x: &DenseTensor, cfg: &EpnConfig, trials: usize) -> Result<DenseTensor> {
    match cfg.mode {
        EpnMode::None => Ok(x.clone()),
        EpnMode::Slice => slice_epn(x, cfg.gamma),
        EpnMode::Hosvd => tensor_epn(x, cfg, trials),
    }
}

/// `‖V̂(X) - V̂(Y)‖_F` with `V̂` the tensor EPN.
pub fn power_euclidean_distance(x: &DenseTensor, y: &DenseTensor, cfg: &EpnConfig) -> Result<f64> {
    let a = tensor_epn(x, cfg, 1)?;
    let b = tensor_epn(y, cfg, 1)?;
    if a.dims() != b.dims() {
        return Err(invalid("distance between tensors of different dims"));
    }
    let mut diff = a;
    diff.add_scaled(&b, -1.0)?;
    Ok(diff.frobenius())
}

/// Largest possible subspace coefficient of a unit vector against an
/// orthonormal r-tuple: `(1/√r)^r`.
pub fn detector_kappa(r: usize) -> f64 {
    (1.0 / (r as f64).sqrt()).powi(r as i32)
}

/// Coefficient of `⊗_r φ` on the rank-1 subspace spanned by `a_1 ⊗ .. ⊗ a_r`:
/// `Π_k <φ, a_k>`.
pub fn subspace_coefficient(phi: &[f64], basis: &[&[f64]]) -> Result<f64> {
    contract_vectors(&outer_power(phi, basis.len())?, basis)
}

/// MaxExp detector score for coefficient `e` of an order-`r` tensor over
/// `n_trials` trials.
pub fn detector_score(e: f64, r: usize, n_trials: usize, eta: f64) -> Result<f64> {
    if n_trials == 0 || r == 0 {
        return Err(invalid("detector needs r >= 1 and at least one trial"));
    }
    Ok(SpectralFn::MaxExp {
        kappa: detector_kappa(r),
        exponent: n_trials as f64 + eta,
    }
    .eval(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::outer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_slice_power() {
        let x = DenseTensor::new(vec![2, 2], vec![4.0, 0.0, 0.0, 1.0]).unwrap();
        let y = slice_epn(&x, 0.5).unwrap();
        let want = [2.0, 0.0, 0.0, 1.0];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_epn_rejects_asymmetric_and_indefinite() {
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(slice_epn(&x, 0.5), Err(Error::PreconditionViolation(_))));
        let y = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(slice_epn(&y, 0.5), Err(Error::PreconditionViolation(_))));
        let tiny = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, -1e-12]).unwrap();
        assert_eq!(slice_epn(&tiny, 0.5).unwrap().get(&[1, 1]), 0.0);
    }

    #[test]
    fn rank_one_hosvd() {
        let u = [0.6, 0.8];
        let v = [1.0, 0.0, 0.0];
        let w = [0.0, 1.0];
        let h = hosvd(&outer(&[&u, &v, &w]).unwrap()).unwrap();
        let big: Vec<f64> = h.core.data().iter().copied().filter(|c| c.abs() > 1e-12).collect();
        assert_eq!(big.len(), 1);
        assert!((big[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hosvd_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DenseTensor::from_fn(&[4, 3, 5], |_| rng.random_range(-1.0..1.0)).unwrap();
        let h = hosvd(&x).unwrap();
        assert!(h.reconstruct().unwrap().rel_frobenius_err(&x) < 1e-10);
        for a in &h.factors {
            let g = a.transpose() * a;
            let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
            assert!((g - id).norm() < 1e-10);
        }
    }

    #[test]
    fn spectral_functions() {
        let g = SpectralFn::Gamma(0.5);
        assert_eq!(g.eval(4.0), 2.0);
        assert_eq!(g.eval(-4.0), -2.0);
        assert_eq!(g.eval(0.0), 0.0);
        let m = SpectralFn::MaxExp { kappa: 1.0, exponent: 2.0 };
        assert_eq!(m.eval(0.5), 0.75);
        assert_eq!(m.eval(-0.5), -0.75);
        assert_eq!(m.eval(3.0), 1.0);
        assert_eq!(SpectralFn::Gamma(1.0).eval(0.3), 0.3);
    }

    #[test]
    fn detector_examples() {
        let k = detector_kappa(3);
        assert_eq!(detector_score(0.0, 3, 5, 0.0).unwrap(), 0.0);
        assert_eq!(detector_score(k / 2.0, 3, 2, 0.0).unwrap(), 0.75);
        let s = 1.0 / 3f64.sqrt();
        let e = subspace_coefficient(&[s, s, s], &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        assert!((e / k - 1.0).abs() < 1e-12);
        assert!((detector_score(e, 3, 1, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(EpnConfig::slice(0.36).validate().is_ok());
        assert!(EpnConfig::slice(0.0).validate().is_err());
        assert!(EpnConfig::hosvd(1.5).validate().is_err());
    }
}
