//! Dynamics compatibility kernel.
//!
//! DCK compares how pairs of joints move relative to each other. For joints
//! `i ≠ i'` and frames `s ≠ s'` of sequence `A` (M frames), and `t ≠ t'` of
//! `B` (N frames):
//!
//! ```text
//! K(A, B) = 1/Λ Σ_{i≠i'} Σ_{s≠s'} Σ_{t≠t'}
//!     G_σ2(d_A - d_B) · G_σ3(s/M - t/N) · G_σ3(s'/M - t'/N) · G_σ4(s - s') · G_σ4(t - t')
//! ```
//!
//! with displacements `d_A = (x_is - x_i's') / scale`, `Λ = J² · P_A · P_B`
//! and `P = N(N-1)` ordered frame pairs. `G_σ2` is the per-coordinate sum
//! kernel, as for SCK. Linearizing `G_σ2` and `G_σ3` factors the sum into
//! per-pair tensors of dims `3·Z2 × Z3 × Z3`:
//!
//! ```text
//! X_ii' = 1/(J·P) Σ_{s≠s'} G_σ4(s - s') · φ(d_ii'ss') ⊗ z(s/N) ⊗ z(s'/N).
//! ```
//!
//! On a pivot grid symmetric about zero, `X_i'i` is `X_ii'` with its pivots
//! reversed and its last two modes swapped, so `<X_ii', Y_ii'>` equals
//! `<X_i'i, Y_i'i>` and the descriptor keeps only `i > i'`, scaled by `√2`.

pub mod plus;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::SkeletonSequence;
use crate::descriptor::{config_hash, Descriptor, KernelKind};
use crate::epn::{self, EpnConfig, EpnMode};
use crate::error::{invalid, Error, Result};
use crate::features::{gauss, PivotGrid};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DckConfig {
    /// Pivots on `[-1, 1]` for scaled displacements.
    pub disp_grid: PivotGrid,
    /// Pivots on `[0, 1]` for normalized frame numbers.
    pub time_grid: PivotGrid,
    /// Damping bandwidth over the frame gap `s - s'`, in frames.
    pub sigma4: f64,
    /// Joints entering the pairs, in order; `None` uses every joint.
    pub joint_subset: Option<Vec<usize>>,
    /// Displacements are divided by this before embedding.
    pub disp_scale: f64,
    /// Use velocities `(x_is - x_i's') / max(1, |s' - s|)` instead of
    /// displacements.
    pub velocity: bool,
    pub epn: EpnConfig,
}

impl DckConfig {
    pub fn florence() -> Self {
        Self {
            disp_grid: PivotGrid::new(-1.0, 1.0, 5, 0.6).expect("valid grid"),
            time_grid: PivotGrid::new(0.0, 1.0, 5, 0.5).expect("valid grid"),
            sigma4: 5.0,
            joint_subset: None,
            disp_scale: 1.0,
            velocity: false,
            epn: EpnConfig::hosvd(0.85),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma4 > 0.0) || !self.sigma4.is_finite() {
            return Err(Error::Config(format!("sigma4 must be positive, got {}", self.sigma4)));
        }
        if !(self.disp_scale > 0.0) || !self.disp_scale.is_finite() {
            return Err(Error::Config(format!(
                "disp_scale must be positive, got {}",
                self.disp_scale
            )));
        }
        if let Some(subset) = &self.joint_subset {
            let mut sorted = subset.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != subset.len() || subset.len() < 2 {
                return Err(Error::Config(
                    "joint_subset needs at least 2 distinct joints".into(),
                ));
            }
        }
        if self.epn.mode == EpnMode::Slice {
            return Err(Error::Config(
                "slice EPN needs super-symmetric tensors; use hosvd or none for DCK".into(),
            ));
        }
        self.epn.validate()
    }

    /// Joints used for a sequence with `j` joints.
    pub fn joints_for(&self, j: usize) -> Result<Vec<usize>> {
        match &self.joint_subset {
            None if j >= 2 => Ok((0..j).collect()),
            None => Err(invalid("DCK needs at least 2 joints")),
            Some(s) => {
                if let Some(&bad) = s.iter().find(|&&i| i >= j) {
                    return Err(invalid(format!("joint {bad} in subset but J={j}")));
                }
                Ok(s.clone())
            }
        }
    }

    pub fn pair_dims(&self) -> [usize; 3] {
        [3 * self.disp_grid.len(), self.time_grid.len(), self.time_grid.len()]
    }

    pub fn descriptor_len(&self, subset_len: usize) -> usize {
        self.pair_dims().iter().product::<usize>() * subset_len * subset_len.saturating_sub(1) / 2
    }
}

/// Largest absolute coordinate difference between any two joints of the
/// subset, across any two frames; dividing displacements by it keeps them in
/// `[-1, 1]`.
pub fn max_displacement(seqs: &[SkeletonSequence], subset: Option<&[usize]>) -> f64 {
    let mut m = 0.0f64;
    for seq in seqs {
        let all: Vec<usize> = (0..seq.joints()).collect();
        let joints = subset.unwrap_or(&all);
        // Per-joint coordinate ranges over all frames bound every
        // cross-frame difference.
        let ranges: Vec<[(f64, f64); 3]> = joints
            .iter()
            .map(|&i| {
                let mut r = [(f64::INFINITY, f64::NEG_INFINITY); 3];
                for s in 0..seq.frames() {
                    let x = seq.joint(i, s);
                    for d in 0..3 {
                        r[d] = (r[d].0.min(x[d]), r[d].1.max(x[d]));
                    }
                }
                r
            })
            .collect();
        for (a, ra) in ranges.iter().enumerate() {
            for rb in &ranges[a + 1..] {
                for d in 0..3 {
                    m = m.max(ra[d].1 - rb[d].0).max(rb[d].1 - ra[d].0);
                }
            }
        }
    }
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `(x - x') / max(1, |s' - s|)`.
pub fn velocity(x: [f64; 3], x2: [f64; 3], s: usize, s2: usize) -> [f64; 3] {
    let gap = (s2 as f64 - s as f64).abs().max(1.0);
    [(x[0] - x2[0]) / gap, (x[1] - x2[1]) / gap, (x[2] - x2[2]) / gap]
}

/// One ordered frame pair `(s, s')` of a joint pair.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairTerm {
    pub disp: [f64; 3],
    pub t1: f64,
    pub t2: f64,
    pub damp: f64,
}

pub(crate) fn pair_terms(seq: &SkeletonSequence, i: usize, i2: usize, cfg: &DckConfig) -> Vec<PairTerm> {
    let n = seq.frames();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for s in 0..n {
        let x = seq.joint(i, s);
        for s2 in 0..n {
            if s2 == s {
                continue;
            }
            let y = seq.joint(i2, s2);
            let raw = if cfg.velocity {
                velocity(x, y, s, s2)
            } else {
                [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
            };
            let gap = s as f64 - s2 as f64;
            out.push(PairTerm {
                disp: raw.map(|v| v / cfg.disp_scale),
                t1: (s + 1) as f64 / n as f64,
                t2: (s2 + 1) as f64 / n as f64,
                damp: gauss(gap * gap, cfg.sigma4),
            });
        }
    }
    out
}

fn check_pair(seq: &SkeletonSequence, i: usize, i2: usize) -> Result<()> {
    if i == i2 {
        return Err(invalid("a DCK pair needs two different joints"));
    }
    if i >= seq.joints() || i2 >= seq.joints() {
        return Err(invalid(format!("joint pair ({i}, {i2}) out of range for J={}", seq.joints())));
    }
    if seq.frames() < 2 {
        return Err(invalid("DCK needs at least 2 frames"));
    }
    Ok(())
}

/// `X_ii'` normalized by `1/(J·P)`, with `J` the size of the joint subset.
pub fn dck_pair_tensor(seq: &SkeletonSequence, i: usize, i2: usize, cfg: &DckConfig) -> Result<DenseTensor> {
    check_pair(seq, i, i2)?;
    let j = cfg.joints_for(seq.joints())?.len();
    let terms = pair_terms(seq, i, i2, cfg);
    let scale = 1.0 / (j * terms.len()) as f64;
    let dims = cfg.pair_dims();
    let mut x = DenseTensor::zeros(&dims)?;
    let mut phi = vec![0.0; dims[0]];
    let mut z1 = vec![0.0; dims[1]];
    let mut z2 = vec![0.0; dims[2]];
    let zc = cfg.time_grid.c().sqrt();
    for t in &terms {
        cfg.disp_grid.phi_vec_into(&t.disp, 1.0, &mut phi);
        cfg.time_grid.phi_into(t.t1, zc, &mut z1);
        cfg.time_grid.phi_into(t.t2, zc, &mut z2);
        x.add_outer(&[&phi, &z1, &z2], scale * t.damp)?;
    }
    Ok(x)
}

/// Unordered joint pairs `(a, b)` with `a` after `b` in the subset order.
pub(crate) fn unordered_pairs(joints: &[usize]) -> Vec<(usize, usize)> {
    (0..joints.len())
        .flat_map(|a| (0..a).map(move |b| (joints[a], joints[b])))
        .collect()
}

pub fn dck_descriptor(seq: &SkeletonSequence, cfg: &DckConfig) -> Result<Descriptor> {
    cfg.validate()?;
    let joints = cfg.joints_for(seq.joints())?;
    let trials = seq.frames() * seq.frames().saturating_sub(1);
    let blocks: Vec<Vec<f64>> = unordered_pairs(&joints)
        .into_par_iter()
        .map(|(i, i2)| {
            let x = dck_pair_tensor(seq, i, i2, cfg)?;
            Ok(epn::apply(&x, &cfg.epn, trials)?.into_data())
        })
        .collect::<Result<_>>()?;
    let root2 = std::f64::consts::SQRT_2;
    let mut values = blocks.concat();
    values.iter_mut().for_each(|v| *v *= root2);
    let out_of_domain = count_disp_out_of_domain(seq, &joints, cfg);
    Ok(Descriptor {
        kind: KernelKind::Dck,
        label: seq.label,
        subject: seq.subject,
        joints: joints.len() as u32,
        config_hash: config_hash(cfg),
        values,
        out_of_domain,
    })
}

pub(crate) fn count_disp_out_of_domain(seq: &SkeletonSequence, joints: &[usize], cfg: &DckConfig) -> usize {
    unordered_pairs(joints)
        .iter()
        .map(|&(i, i2)| {
            pair_terms(seq, i, i2, cfg)
                .iter()
                .map(|t| cfg.disp_grid.count_out_of_domain(t.disp))
                .sum::<usize>()
        })
        .sum()
}

/// Brute-force kernel over all joint pairs and frame pairs, exact or with
/// linearized subkernels.
pub fn exact_dck(a: &SkeletonSequence, b: &SkeletonSequence, cfg: &DckConfig, linearized: bool) -> Result<f64> {
    if a.joints() != b.joints() {
        return Err(invalid(format!("joint counts differ: {} vs {}", a.joints(), b.joints())));
    }
    if a.frames() < 2 || b.frames() < 2 {
        return Err(invalid("DCK needs at least 2 frames"));
    }
    let joints = cfg.joints_for(a.joints())?;
    let (pa, pb) = (
        a.frames() * (a.frames() - 1),
        b.frames() * (b.frames() - 1),
    );
    let mut total = 0.0;
    for &i in &joints {
        for &i2 in &joints {
            if i == i2 {
                continue;
            }
            let ta = pair_terms(a, i, i2, cfg);
            let tb = pair_terms(b, i, i2, cfg);
            for p in &ta {
                for q in &tb {
                    total += cfg.disp_grid.sum_kernel(&p.disp, &q.disp, linearized)
                        * cfg.time_grid.kernel(p.t1, q.t1, linearized)
                        * cfg.time_grid.kernel(p.t2, q.t2, linearized)
                        * p.damp
                        * q.damp;
                }
            }
        }
    }
    let j = joints.len() as f64;
    Ok(total / (j * j * pa as f64 * pb as f64))
}
