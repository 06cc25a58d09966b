//! DCK⊕: dynamics compatibility over sliding windows.
//!
//! Windows of length `τ` start at positions `U = {0, stride, ..}`. Each
//! window contributes a velocity-based DCK pair tensor, tagged by an extra
//! mode embedding the normalized window position `f(u)`:
//!
//! ```text
//! X_ii' = 1/|U| Σ_{u∈U} X_ii'(window_u) ⊗ z(f(u)),
//! ```
//!
//! which linearizes `1/(|U_A||U_B|) Σ_{u,u'} K_D(window_u, window_u') · G_σ(f(u) - f(u'))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{count_disp_out_of_domain, dck_pair_tensor, exact_dck, unordered_pairs, DckConfig};
use crate::dataio::SkeletonSequence;
use crate::descriptor::{config_hash, Descriptor, KernelKind};
use crate::epn;
use crate::error::{invalid, Error, Result};
use crate::features::PivotGrid;
use crate::sck::time_norm;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DckPlusConfig {
    /// Per-window settings; `velocity` is forced on.
    pub base: DckConfig,
    pub tau: usize,
    pub stride: usize,
    /// Pivots on `[0, 1]` for window positions.
    pub pos_grid: PivotGrid,
}

impl DckPlusConfig {
    pub fn skeleton_default() -> Self {
        let mut base = DckConfig::florence();
        base.velocity = true;
        Self {
            base,
            tau: 8,
            stride: 4,
            pos_grid: PivotGrid::new(0.0, 1.0, 5, 0.5).expect("valid grid"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau < 2 {
            return Err(Error::Config(format!("tau must be at least 2, got {}", self.tau)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        self.base.validate()
    }

    pub fn window_config(&self) -> DckConfig {
        DckConfig { velocity: true, ..self.base.clone() }
    }

    pub fn positions(&self, frames: usize) -> Vec<usize> {
        if frames < self.tau {
            return Vec::new();
        }
        (0..=frames - self.tau).step_by(self.stride).collect()
    }

    pub fn pair_dims(&self) -> [usize; 4] {
        let [a, b, c] = self.base.pair_dims();
        [a, b, c, self.pos_grid.len()]
    }

    pub fn descriptor_len(&self, subset_len: usize) -> usize {
        self.pair_dims().iter().product::<usize>() * subset_len * subset_len.saturating_sub(1) / 2
    }

    fn check_frames(&self, seq: &SkeletonSequence) -> Result<Vec<usize>> {
        let positions = self.positions(seq.frames());
        if positions.is_empty() {
            return Err(invalid(format!(
                "sequence has {} frames, window needs {}",
                seq.frames(),
                self.tau
            )));
        }
        Ok(positions)
    }
}

pub fn dck_plus_pair_tensor(seq: &SkeletonSequence, i: usize, i2: usize, cfg: &DckPlusConfig) -> Result<DenseTensor> {
    let positions = cfg.check_frames(seq)?;
    let wcfg = cfg.window_config();
    let dims = cfg.pair_dims();
    let mut out = DenseTensor::zeros(&dims)?;
    let block = dims[..3].iter().product::<usize>();
    let mut z = vec![0.0; dims[3]];
    let zc = cfg.pos_grid.c().sqrt() / positions.len() as f64;
    for &u in &positions {
        let w = seq.window(u, cfg.tau)?;
        let x = dck_pair_tensor(&w, i, i2, &wcfg)?;
        cfg.pos_grid.phi_into(time_norm(u, &positions)?, zc, &mut z);
        for (k, &zk) in z.iter().enumerate() {
            let dst = &mut out.data_mut()[k * block..(k + 1) * block];
            for (d, &v) in dst.iter_mut().zip(x.data()) {
                *d += zk * v;
            }
        }
    }
    Ok(out)
}

pub fn dck_plus_descriptor(seq: &SkeletonSequence, cfg: &DckPlusConfig) -> Result<Descriptor> {
    cfg.validate()?;
    let positions = cfg.check_frames(seq)?;
    let joints = cfg.base.joints_for(seq.joints())?;
    let trials = cfg.tau * (cfg.tau - 1) * positions.len();
    let blocks: Vec<Vec<f64>> = unordered_pairs(&joints)
        .into_par_iter()
        .map(|(i, i2)| {
            let x = dck_plus_pair_tensor(seq, i, i2, cfg)?;
            Ok(epn::apply(&x, &cfg.base.epn, trials)?.into_data())
        })
        .collect::<Result<_>>()?;
    let root2 = std::f64::consts::SQRT_2;
    let mut values = blocks.concat();
    values.iter_mut().for_each(|v| *v *= root2);
    let out_of_domain = count_disp_out_of_domain(seq, &joints, &cfg.window_config());
    Ok(Descriptor {
        kind: KernelKind::DckPlus,
        label: seq.label,
        subject: seq.subject,
        joints: joints.len() as u32,
        config_hash: config_hash(cfg),
        values,
        out_of_domain,
    })
}

pub fn exact_dck_plus(
    a: &SkeletonSequence,
    b: &SkeletonSequence,
    cfg: &DckPlusConfig,
    linearized: bool,
) -> Result<f64> {
    let (ua, ub) = (cfg.check_frames(a)?, cfg.check_frames(b)?);
    let wcfg = cfg.window_config();
    let wa = ua.iter().map(|&u| a.window(u, cfg.tau)).collect::<Result<Vec<_>>>()?;
    let wb = ub.iter().map(|&u| b.window(u, cfg.tau)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (p, x) in ua.iter().zip(&wa) {
        let fa = time_norm(*p, &ua)?;
        for (q, y) in ub.iter().zip(&wb) {
            let fb = time_norm(*q, &ub)?;
            total += exact_dck(x, y, &wcfg, linearized)? * cfg.pos_grid.kernel(fa, fb, linearized);
        }
    }
    Ok(total / (ua.len() * ub.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dck::dck_descriptor;
    use crate::epn::EpnConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(j: usize, n: usize, rng: &mut ChaCha8Rng) -> SkeletonSequence {
        let coords = (0..j * n * 3).map(|_| rng.random_range(-0.5..0.5)).collect();
        SkeletonSequence::new(0, 0, j, n, coords).unwrap()
    }

    fn small_cfg(epn: EpnConfig, window: usize, stride: usize) -> DckPlusConfig {
        DckPlusConfig {
            base: DckConfig {
                disp_grid: PivotGrid::new(-1.0, 1.0, 5, 0.6).unwrap(),
                time_grid: PivotGrid::new(0.0, 1.0, 3, 0.5).unwrap(),
                sigma4: 2.0,
                joint_subset: None,
                disp_scale: 1.0,
                velocity: true,
                epn,
            },
            tau: window,
            stride,
            pos_grid: PivotGrid::new(0.0, 1.0, 4, 0.5).unwrap(),
        }
    }

    #[test]
    fn positions_follow_stride() {
        let cfg = small_cfg(EpnConfig::none(), 4, 3);
        assert_eq!(cfg.positions(10), vec![0, 3, 6]);
        assert_eq!(cfg.positions(4), vec![0]);
        assert!(cfg.positions(3).is_empty());
    }

    #[test]
    fn linearized_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let cfg = small_cfg(EpnConfig::none(), 4, 2);
        let a = random_seq(3, 8, &mut rng);
        let b = random_seq(3, 7, &mut rng);
        let da = dck_plus_descriptor(&a, &cfg).unwrap();
        let db = dck_plus_descriptor(&b, &cfg).unwrap();
        assert_eq!(da.len(), cfg.descriptor_len(3));
        let want = exact_dck_plus(&a, &b, &cfg, true).unwrap();
        let got = da.dot(&db).unwrap();
        assert!((got - want).abs() <= 1e-8 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn single_window_reduces_to_dck() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut cfg = small_cfg(EpnConfig::hosvd(0.85), 5, 1);
        cfg.pos_grid = PivotGrid::single_pivot(0.0, 1.0, 0.5).unwrap();
        let s = random_seq(3, 5, &mut rng);
        let plus = dck_plus_descriptor(&s, &cfg).unwrap();
        let plain = dck_descriptor(&s, &cfg.window_config()).unwrap();
        assert_eq!(plus.len(), plain.len());
        let diff = plus
            .values
            .iter()
            .zip(&plain.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn short_sequences_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let cfg = small_cfg(EpnConfig::none(), 6, 1);
        let s = random_seq(3, 5, &mut rng);
        assert!(matches!(dck_plus_descriptor(&s, &cfg), Err(Error::InvalidArgument(_))));
    }
}
