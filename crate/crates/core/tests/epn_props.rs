use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use seqtensor::epn::{slice_epn, spectral_apply, tensor_epn, EpnConfig, SpectralFn};
use seqtensor::sck::{sck_joint_tensor, SckConfig};
use seqtensor::tensor::DenseTensor;
use seqtensor::{PivotGrid, SkeletonSequence};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn spectral_functions_are_odd() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = DenseTensor::new(vec![200], data).unwrap();
    let neg = x.map(|v| -v);
    for f in [SpectralFn::Gamma(0.3), SpectralFn::MaxExp { kappa: 2.0, exponent: 7.0 }] {
        let (a, b) = (spectral_apply(&x, f), spectral_apply(&neg, f));
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| *p == -*q));
    }
}

#[test]
fn beta_spectra_are_whitened_upwards() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let beta = Beta::new(1.0, 3.0).unwrap();
    let p: Vec<f64> = (0..5000).map(|_| beta.sample(&mut rng)).collect();
    assert!(median(p.clone()) >= 0.1);
    // N = 1 trial plus η = 99 pseudo-trials.
    let maxexp = SpectralFn::MaxExp { kappa: 1.0, exponent: 1.0 + 99.0 };
    let gamma = SpectralFn::Gamma(0.1);
    // A power can only lift a median input of 0.1 to 0.1^0.1 ≈ 0.79.
    for (f, floor) in [(maxexp, 0.9), (gamma, 0.1f64.powf(0.1))] {
        let out: Vec<f64> = p.iter().map(|&v| f.eval(v)).collect();
        assert!(out.iter().zip(&p).all(|(o, i)| o >= i));
        assert!(median(out) >= floor, "{f:?}");
    }
}

fn sck_aggregate() -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let coords = (0..2 * 15 * 3).map(|_| rng.random_range(-0.9..0.9)).collect();
    let s = SkeletonSequence::new(0, 0, 2, 15, coords).unwrap();
    let cfg = SckConfig {
        joint_grid: PivotGrid::new(-1.0, 1.0, 3, 0.6).unwrap(),
        time_grid: PivotGrid::new(0.0, 1.0, 3, 0.5).unwrap(),
        epn: EpnConfig::none(),
        ..SckConfig::florence()
    };
    sck_joint_tensor(&s, 1, &cfg).unwrap()
}

#[test]
fn slice_epn_keeps_slices_psd() {
    let x = sck_aggregate();
    for gamma in [0.1, 0.36, 0.8] {
        let y = slice_epn(&x, gamma).unwrap();
        for k in 0..y.dims()[2] {
            let m = y.frontal_slice(k).unwrap();
            assert!((&m - m.transpose()).amax() <= 1e-12);
            assert!(SymmetricEigen::new(m).eigenvalues.min() >= -1e-9);
        }
    }
}

#[test]
fn identity_spectra_round_trip() {
    let x = sck_aggregate();
    assert!(slice_epn(&x, 1.0).unwrap().rel_frobenius_err(&x) <= 1e-10);
    assert!(tensor_epn(&x, &EpnConfig::hosvd(1.0), 1).unwrap().rel_frobenius_err(&x) <= 1e-10);
}
