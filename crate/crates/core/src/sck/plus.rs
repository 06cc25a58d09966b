//! SCK over subsequences and modalities.
//!
//! Every sequence is cut into subsequences of each length `τ ∈ P`, starting
//! at positions `u ∈ U_τ = {0, stride, 2·stride, ..} ∩ [0, N - τ]`, and
//! sampled at offsets `s ∈ S_τ = {0, .., τ-1}`. Each sample `(τ, u, s)` is
//! embedded as
//!
//! ```text
//! [√β1 φ(x_{i,u+s}); √β1^(q) φ^(q)(x^(q)_{u+s}) ..; √β2 z'(s/(τ-1)); √β3 z''(f(u, U_τ)); √β4 z'''(f(τ, P))]
//! ```
//!
//! and the per-joint tensor is the mean of the r-th outer powers over all
//! samples. Extra channels are per-frame vectors shared by every joint; they
//! use either a pivot map (sum kernel over components) or the raw vector
//! (linear kernel).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_weights, time_norm, whiten_and_pack};
use crate::dataio::SkeletonSequence;
use crate::descriptor::{config_hash, Descriptor, KernelKind};
use crate::epn::{EpnConfig, EpnMode};
use crate::error::{invalid, Error, Result};
use crate::features::PivotGrid;
use crate::tensor::{dot_slices, packed_len, DenseTensor, SymmetricAccumulator, SymmetricLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMap {
    Rbf(PivotGrid),
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraChannel {
    pub weight: f64,
    /// Expected component count `W_q` of the sequence channel.
    pub dim: usize,
    pub map: ChannelMap,
}

impl ExtraChannel {
    fn feature_len(&self) -> usize {
        match &self.map {
            ChannelMap::Rbf(g) => self.dim * g.len(),
            ChannelMap::Linear => self.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsequenceScheme {
    pub lengths: Vec<usize>,
    pub stride: usize,
}

impl SubsequenceScheme {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(Error::Config("subsequence lengths must be positive and non-empty".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("subsequence stride must be positive".into()));
        }
        Ok(())
    }

    pub fn min_len(&self) -> usize {
        self.lengths.iter().copied().min().unwrap_or(1)
    }

    /// Start positions `U_τ` in a sequence of `n` frames (empty if `τ > n`).
    pub fn positions(&self, tau: usize, n: usize) -> Vec<usize> {
        if tau > n {
            return Vec::new();
        }
        (0..=n - tau).step_by(self.stride).collect()
    }

    /// Every `(τ, u, s)` sample of a sequence of `n` frames, with its
    /// normalized coordinates.
    fn samples(&self, n: usize) -> Vec<Sample> {
        let mut out = Vec::new();
        for &tau in &self.lengths {
            let f_tau = time_norm(tau, &self.lengths).unwrap_or(0.0);
            let us = self.positions(tau, n);
            for &u in &us {
                let f_u = time_norm(u, &us).unwrap_or(0.0);
                for s in 0..tau {
                    let f_s = if tau > 1 { s as f64 / (tau - 1) as f64 } else { 0.0 };
                    out.push(Sample {
                        frame: u + s,
                        f_s,
                        f_u,
                        f_tau,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    frame: usize,
    f_s: f64,
    f_u: f64,
    f_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SckPlusConfig {
    pub joint_weight: f64,
    pub joint_grid: PivotGrid,
    pub extra: Vec<ExtraChannel>,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    /// `z'`: offset within a subsequence.
    pub snippet_grid: PivotGrid,
    /// `z''`: subsequence position within the sequence.
    pub position_grid: PivotGrid,
    /// `z'''`: subsequence length among the configured lengths.
    pub length_grid: PivotGrid,
    pub scheme: SubsequenceScheme,
    pub order: usize,
    pub epn: EpnConfig,
}

impl SckPlusConfig {
    /// Skeleton-only setting with `3·Z2 = 15`, `Z3 = Z4 = 5`, `Z5 = 3`.
    pub fn skeleton_default() -> Self {
        Self {
            joint_weight: 0.4,
            joint_grid: PivotGrid::new(-1.0, 1.0, 5, 0.6).expect("valid grid"),
            extra: Vec::new(),
            beta2: 0.3,
            beta3: 0.2,
            beta4: 0.1,
            snippet_grid: PivotGrid::new(0.0, 1.0, 5, 0.5).expect("valid grid"),
            position_grid: PivotGrid::new(0.0, 1.0, 5, 0.5).expect("valid grid"),
            length_grid: PivotGrid::new(0.0, 1.0, 3, 0.5).expect("valid grid"),
            scheme: SubsequenceScheme {
                lengths: vec![8, 10, 12, 14, 16, 18, 20],
                stride: 2,
            },
            order: 3,
            epn: EpnConfig::hosvd(0.36),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut weights = vec![("joint_weight", self.joint_weight)];
        let names: Vec<String> = (0..self.extra.len()).map(|q| format!("extra[{q}].weight")).collect();
        weights.extend(names.iter().map(String::as_str).zip(self.extra.iter().map(|c| c.weight)));
        weights.extend([("beta2", self.beta2), ("beta3", self.beta3), ("beta4", self.beta4)]);
        check_weights(&weights)?;
        if !(2..=3).contains(&self.order) {
            return Err(Error::Config(format!("order must be 2 or 3, got {}", self.order)));
        }
        if self.extra.iter().any(|c| c.dim == 0) {
            return Err(Error::Config("extra channel dims must be positive".into()));
        }
        self.scheme.validate()?;
        self.epn.validate()
    }

    pub fn side_dim(&self) -> usize {
        3 * self.joint_grid.len()
            + self.extra.iter().map(ExtraChannel::feature_len).sum::<usize>()
            + self.snippet_grid.len()
            + self.position_grid.len()
            + self.length_grid.len()
    }

    pub fn descriptor_len(&self, joints: usize) -> usize {
        packed_len(self.side_dim(), self.order) * joints
    }

    fn check_channels(&self, seq: &SkeletonSequence) -> Result<()> {
        if seq.channels().len() != self.extra.len() {
            return Err(invalid(format!(
                "sequence has {} extra channels, config expects {}",
                seq.channels().len(),
                self.extra.len()
            )));
        }
        for (q, (c, spec)) in seq.channels().iter().zip(&self.extra).enumerate() {
            if c.dim != spec.dim {
                return Err(invalid(format!("channel {q} has dim {}, config expects {}", c.dim, spec.dim)));
            }
        }
        Ok(())
    }

    fn sample_vector(&self, seq: &SkeletonSequence, i: usize, sm: &Sample, out: &mut [f64]) {
        let mut off = 0;
        let jz = 3 * self.joint_grid.len();
        self.joint_grid
            .phi_vec_into(&seq.joint(i, sm.frame), self.joint_weight.sqrt(), &mut out[off..off + jz]);
        off += jz;
        for (spec, ch) in self.extra.iter().zip(seq.channels()) {
            let len = spec.feature_len();
            let x = ch.frame(sm.frame);
            let dst = &mut out[off..off + len];
            match &spec.map {
                ChannelMap::Rbf(g) => g.phi_vec_into(x, spec.weight.sqrt(), dst),
                ChannelMap::Linear => {
                    let w = spec.weight.sqrt();
                    dst.iter_mut().zip(x).for_each(|(d, v)| *d = w * v);
                }
            }
            off += len;
        }
        for (grid, beta, arg) in [
            (&self.snippet_grid, self.beta2, sm.f_s),
            (&self.position_grid, self.beta3, sm.f_u),
            (&self.length_grid, self.beta4, sm.f_tau),
        ] {
            let len = grid.len();
            grid.phi_into(arg, (beta * grid.c()).sqrt(), &mut out[off..off + len]);
            off += len;
        }
    }
}

/// Sequences shorter than the shortest subsequence are looped up to it.
fn prepared(seq: &SkeletonSequence, cfg: &SckPlusConfig) -> SkeletonSequence {
    seq.looped_to(cfg.scheme.min_len())
}

/// Mean over all `(τ, u, s)` samples of `⊗_r` of the stacked feature vector.
pub fn sck_plus_joint_tensor(seq: &SkeletonSequence, i: usize, cfg: &SckPlusConfig) -> Result<DenseTensor> {
    cfg.check_channels(seq)?;
    if i >= seq.joints() {
        return Err(invalid(format!("joint {i} out of range for J={}", seq.joints())));
    }
    let seq = prepared(seq, cfg);
    let samples = cfg.scheme.samples(seq.frames());
    let d = cfg.side_dim();
    let mut x = DenseTensor::zeros(&vec![d; cfg.order])?;
    let mut v = vec![0.0; d];
    let w = 1.0 / samples.len() as f64;
    for sm in &samples {
        cfg.sample_vector(&seq, i, sm, &mut v);
        x.add_outer_power(&v, w)?;
    }
    Ok(x)
}

pub fn sck_plus_descriptor(seq: &SkeletonSequence, cfg: &SckPlusConfig) -> Result<Descriptor> {
    cfg.validate()?;
    cfg.check_channels(seq)?;
    let prepared_seq = prepared(seq, cfg);
    let samples = cfg.scheme.samples(prepared_seq.frames());
    let layout = SymmetricLayout::new(cfg.side_dim(), cfg.order)?;
    let blocks: Vec<Vec<f64>> = (0..seq.joints())
        .into_par_iter()
        .map(|i| {
            if cfg.epn.mode == EpnMode::None {
                let mut acc = SymmetricAccumulator::new(&layout);
                let mut v = vec![0.0; cfg.side_dim()];
                let w = 1.0 / samples.len() as f64;
                for sm in &samples {
                    cfg.sample_vector(&prepared_seq, i, sm, &mut v);
                    acc.add_outer_power(&v, w)?;
                }
                Ok(acc.finish().coeffs)
            } else {
                let x = sck_plus_joint_tensor(seq, i, cfg)?;
                whiten_and_pack(&x, &cfg.epn, samples.len(), &layout)
            }
        })
        .collect::<Result<_>>()?;
    let mut out_of_domain = cfg.joint_grid.count_out_of_domain(seq.coords().iter().copied());
    for (spec, ch) in cfg.extra.iter().zip(seq.channels()) {
        if let ChannelMap::Rbf(g) = &spec.map {
            out_of_domain += g.count_out_of_domain(ch.values.iter().copied());
        }
    }
    Ok(Descriptor {
        kind: KernelKind::SckPlus,
        label: seq.label,
        subject: seq.subject,
        joints: seq.joints() as u32,
        config_hash: config_hash(cfg),
        values: blocks.concat(),
        out_of_domain,
    })
}

/// Brute-force kernel over all pairs of samples, exact or with linearized
/// subkernels.
pub fn exact_sck_plus(
    a: &SkeletonSequence,
    b: &SkeletonSequence,
    cfg: &SckPlusConfig,
    linearized: bool,
) -> Result<f64> {
    if a.joints() != b.joints() {
        return Err(invalid(format!("joint counts differ: {} vs {}", a.joints(), b.joints())));
    }
    cfg.check_channels(a)?;
    cfg.check_channels(b)?;
    let (a, b) = (&prepared(a, cfg), &prepared(b, cfg));
    let sa = cfg.scheme.samples(a.frames());
    let sb = cfg.scheme.samples(b.frames());
    let r = cfg.order as i32;

    // Everything except the per-joint term depends only on the sample pair.
    let shared: Vec<f64> = sa
        .iter()
        .flat_map(|p| {
            sb.iter().map(move |q| {
                let mut k = cfg.beta2 * cfg.snippet_grid.kernel(p.f_s, q.f_s, linearized)
                    + cfg.beta3 * cfg.position_grid.kernel(p.f_u, q.f_u, linearized)
                    + cfg.beta4 * cfg.length_grid.kernel(p.f_tau, q.f_tau, linearized);
                for (spec, (ca, cb)) in cfg.extra.iter().zip(a.channels().iter().zip(b.channels())) {
                    let (x, y) = (ca.frame(p.frame), cb.frame(q.frame));
                    k += spec.weight
                        * match &spec.map {
                            ChannelMap::Rbf(g) => g.sum_kernel(x, y, linearized),
                            ChannelMap::Linear => dot_slices(x, y),
                        };
                }
                k
            })
        })
        .collect();

    let mut total = 0.0;
    for i in 0..a.joints() {
        for (pi, p) in sa.iter().enumerate() {
            let x = a.joint(i, p.frame);
            for (qi, q) in sb.iter().enumerate() {
                let k = cfg.joint_weight * cfg.joint_grid.sum_kernel(&x, &b.joint(i, q.frame), linearized)
                    + shared[pi * sb.len() + qi];
                total += k.powi(r);
            }
        }
    }
    Ok(total / (sa.len() * sb.len()) as f64)
}
