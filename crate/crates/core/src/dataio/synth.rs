//! Synthetic skeleton actions for end-to-end tests.
//!
//! Every class owns a template: per joint and axis, a sinusoid whose
//! frequency (in cycles per sequence) lies in the class's own band
//! `[1 + k, 1.5 + k)`, so bands never overlap. Joints sit on a rest pose
//! shared by all classes. A sequence jitters its template's phase and
//! amplitude, is scaled by its subject's body size, and gets Gaussian
//! noise. Sequences are emitted class-interleaved; subjects are assigned
//! round-robin within each class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SkeletonSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub joints: usize,
    pub frames: usize,
    pub noise: f64,
    pub subjects: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { classes: 4, per_class: 30, joints: 8, frames: 40, noise: 0.01, subjects: 10, seed: 42 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!("synth.classes must be at least 2, got {}", self.classes)));
        }
        if self.per_class == 0 || self.joints == 0 || self.frames == 0 || self.subjects == 0 {
            return Err(Error::Config("synth counts must be positive".into()));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!("synth.noise must be non-negative, got {}", self.noise)));
        }
        Ok(())
    }
}

struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<SkeletonSequence>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let j = cfg.joints;
    let rest: Vec<f64> = (0..3 * j).map(|_| rng.random_range(-0.4..0.4)).collect();
    let templates: Vec<Vec<Wave>> = (0..cfg.classes)
        .map(|k| {
            (0..3 * j)
                .map(|_| Wave {
                    amp: rng.random_range(0.1..0.25),
                    freq: 1.0 + k as f64 + rng.random_range(0.0..0.5),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                })
                .collect()
        })
        .collect();
    let body: Vec<f64> = (0..cfg.subjects).map(|_| rng.random_range(0.9..1.1)).collect();
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid normal");
    let n = cfg.frames;
    let mut out = Vec::with_capacity(cfg.classes * cfg.per_class);
    for m in 0..cfg.per_class {
        let subject = m as u32 % cfg.subjects;
        for (k, waves) in templates.iter().enumerate() {
            let shift = rng.random_range(-0.3..0.3);
            let gain = rng.random_range(0.9..1.1);
            let scale = body[subject as usize];
            let mut coords = Vec::with_capacity(3 * j * n);
            for s in 0..n {
                let t = s as f64 / n as f64;
                for (c, w) in waves.iter().enumerate() {
                    let v = rest[c] + gain * w.amp * (std::f64::consts::TAU * w.freq * t + w.phase + shift).sin();
                    let eps = if cfg.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    coords.push(scale * v + eps);
                }
            }
            out.push(SkeletonSequence::new(k as u32, subject + 1, j, n, coords)?);
        }
    }
    Ok(out)
}
