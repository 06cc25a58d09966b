//! Sequence compatibility kernel.
//!
//! For two sequences `A` (M frames) and `B` (N frames) with the same joints,
//!
//! ```text
//! K(A, B) = 1/(M·N) Σ_i Σ_s Σ_t ( β1 Σ_d G_σ2(x_isd - y_itd) + β2 G_σ3(s/M - t/N) )^r
//! ```
//!
//! where `s`, `t` are 1-based frame numbers. Replacing every Gaussian by its
//! pivot linearization turns each bracket into a dot product of per-frame
//! feature vectors `v_is = [√β1 φ(x_is); √β2 z(s/M)]`, and the r-th power
//! into an inner product of outer powers, so that
//!
//! ```text
//! K̃(A, B) = Σ_i <X_i(A), X_i(B)>,   X_i = 1/N Σ_s ⊗_r v_is.
//! ```
//!
//! `X_i` is super-symmetric, which the descriptor exploits by storing only
//! its upper simplex.

pub mod plus;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::SkeletonSequence;
use crate::descriptor::{config_hash, Descriptor, KernelKind};
use crate::epn::{self, EpnConfig, EpnMode};
use crate::error::{invalid, Error, Result};
use crate::features::PivotGrid;
use crate::tensor::{packed_len, DenseTensor, SymmetricAccumulator, SymmetricLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SckConfig {
    pub beta1: f64,
    pub beta2: f64,
    /// Pivots on `[-1, 1]` for joint coordinates.
    pub joint_grid: PivotGrid,
    /// Pivots on `[0, 1]` for normalized frame numbers.
    pub time_grid: PivotGrid,
    pub order: usize,
    pub epn: EpnConfig,
}

impl SckConfig {
    pub fn new(
        beta1: f64,
        beta2: f64,
        joint_grid: PivotGrid,
        time_grid: PivotGrid,
        order: usize,
        epn: EpnConfig,
    ) -> Result<Self> {
        let cfg = Self {
            beta1,
            beta2,
            joint_grid,
            time_grid,
            order,
            epn,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// σ2 = 0.6, σ3 = 0.5, Z2 = 5, Z3 = 6, r = 3, slice EPN with γ = 0.36.
    pub fn florence() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.5,
            joint_grid: PivotGrid::new(-1.0, 1.0, 5, 0.6).expect("valid grid"),
            time_grid: PivotGrid::new(0.0, 1.0, 6, 0.5).expect("valid grid"),
            order: 3,
            epn: EpnConfig::slice(0.36),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_weights(&[("beta1", self.beta1), ("beta2", self.beta2)])?;
        if !(2..=3).contains(&self.order) {
            return Err(Error::Config(format!("order must be 2 or 3, got {}", self.order)));
        }
        self.epn.validate()
    }

    /// Side dimension `3·Z2 + Z3` of the per-joint tensors.
    pub fn side_dim(&self) -> usize {
        3 * self.joint_grid.len() + self.time_grid.len()
    }

    pub fn descriptor_len(&self, joints: usize) -> usize {
        packed_len(self.side_dim(), self.order) * joints
    }
}

/// Non-negative weights summing to one.
pub(crate) fn check_weights(weights: &[(&str, f64)]) -> Result<()> {
    for &(name, w) in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Config(format!("{name} must be non-negative, got {w}")));
        }
    }
    let sum: f64 = weights.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > 1e-12 {
        let names: Vec<&str> = weights.iter().map(|(n, _)| *n).collect();
        return Err(Error::Config(format!(
            "weights {} must sum to 1, got {sum}",
            names.join(" + ")
        )));
    }
    Ok(())
}

/// `(s - min S) / (max S - min S)`, or 0 when `S` has a single element.
pub fn time_norm(s: usize, set: &[usize]) -> Result<f64> {
    let (Some(&lo), Some(&hi)) = (set.iter().min(), set.iter().max()) else {
        return Err(invalid("time normalization over an empty set"));
    };
    Ok(if hi == lo {
        0.0
    } else {
        (s as f64 - lo as f64) / (hi - lo) as f64
    })
}

/// Feature vector `[√β1 φ(x_is); √β2 z((s+1)/N)]` of joint `i` at zero-based frame `s`.
fn frame_vector(seq: &SkeletonSequence, i: usize, s: usize, cfg: &SckConfig, out: &mut [f64]) {
    let jz = 3 * cfg.joint_grid.len();
    let (joint_part, time_part) = out.split_at_mut(jz);
    cfg.joint_grid
        .phi_vec_into(&seq.joint(i, s), cfg.beta1.sqrt(), joint_part);
    let t = (s + 1) as f64 / seq.frames() as f64;
    cfg.time_grid
        .phi_into(t, (cfg.beta2 * cfg.time_grid.c()).sqrt(), time_part);
}

/// Per-joint tensor `X_i = 1/N Σ_s ⊗_r v_is`.
pub fn sck_joint_tensor(seq: &SkeletonSequence, i: usize, cfg: &SckConfig) -> Result<DenseTensor> {
    if i >= seq.joints() {
        return Err(invalid(format!("joint {i} out of range for J={}", seq.joints())));
    }
    let d = cfg.side_dim();
    let mut x = DenseTensor::zeros(&vec![d; cfg.order])?;
    let mut v = vec![0.0; d];
    let w = 1.0 / seq.frames() as f64;
    for s in 0..seq.frames() {
        frame_vector(seq, i, s, cfg, &mut v);
        x.add_outer_power(&v, w)?;
    }
    Ok(x)
}

/// Per-joint tensors after EPN, packed and concatenated over joints.
pub fn sck_descriptor(seq: &SkeletonSequence, cfg: &SckConfig) -> Result<Descriptor> {
    cfg.validate()?;
    let layout = SymmetricLayout::new(cfg.side_dim(), cfg.order)?;
    let blocks: Vec<Vec<f64>> = (0..seq.joints())
        .into_par_iter()
        .map(|i| joint_block(seq, i, cfg, &layout))
        .collect::<Result<_>>()?;
    let out_of_domain = cfg
        .joint_grid
        .count_out_of_domain(seq.coords().iter().copied());
    Ok(Descriptor {
        kind: KernelKind::Sck,
        label: seq.label,
        subject: seq.subject,
        joints: seq.joints() as u32,
        config_hash: config_hash(cfg),
        values: blocks.concat(),
        out_of_domain,
    })
}

fn joint_block(seq: &SkeletonSequence, i: usize, cfg: &SckConfig, layout: &SymmetricLayout) -> Result<Vec<f64>> {
    if cfg.epn.mode == EpnMode::None {
        let mut acc = SymmetricAccumulator::new(layout);
        let mut v = vec![0.0; cfg.side_dim()];
        let w = 1.0 / seq.frames() as f64;
        for s in 0..seq.frames() {
            frame_vector(seq, i, s, cfg, &mut v);
            acc.add_outer_power(&v, w)?;
        }
        return Ok(acc.finish().coeffs);
    }
    let x = sck_joint_tensor(seq, i, cfg)?;
    whiten_and_pack(&x, &cfg.epn, seq.frames(), layout)
}

/// EPN followed by packing. The slice-wise power does not preserve
/// super-symmetry, so its output is projected back onto the symmetric
/// tensors (averaged over index permutations) before packing.
pub(crate) fn whiten_and_pack(
    x: &DenseTensor,
    cfg: &EpnConfig,
    trials: usize,
    layout: &SymmetricLayout,
) -> Result<Vec<f64>> {
    let v = epn::apply(x, cfg, trials)?;
    let v = if cfg.mode == EpnMode::None { v } else { layout.symmetrize(&v)? };
    Ok(layout.pack(&v)?.coeffs)
}

/// Exact kernel (Gaussians evaluated directly) or, with `linearized`, the
/// same sum with every Gaussian replaced by its pivot linearization.
pub fn exact_sck(a: &SkeletonSequence, b: &SkeletonSequence, cfg: &SckConfig, linearized: bool) -> Result<f64> {
    if a.joints() != b.joints() {
        return Err(invalid(format!(
            "joint counts differ: {} vs {}",
            a.joints(),
            b.joints()
        )));
    }
    let (m, n) = (a.frames(), b.frames());
    let time: Vec<f64> = (0..m)
        .flat_map(|s| {
            (0..n).map(move |t| {
                cfg.time_grid
                    .kernel((s + 1) as f64 / m as f64, (t + 1) as f64 / n as f64, linearized)
            })
        })
        .collect();
    let r = cfg.order as i32;
    let mut total = 0.0;
    for i in 0..a.joints() {
        for s in 0..m {
            let x = a.joint(i, s);
            for t in 0..n {
                let k = cfg.beta1 * cfg.joint_grid.sum_kernel(&x, &b.joint(i, t), linearized)
                    + cfg.beta2 * time[s * n + t];
                total += k.powi(r);
            }
        }
    }
    Ok(total / (m * n) as f64)
}
