//! Exact-kernel Gram construction versus encode-then-dot timings.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::gram;
use crate::dataio::{synth_dataset, SkeletonSequence, SynthConfig};
use crate::dck::{dck_descriptor, exact_dck, DckConfig};
use crate::descriptor::Descriptor;
use crate::error::{invalid, Result};
use crate::sck::{exact_sck, sck_descriptor, SckConfig};

/// Environment variable that turns timing assertions into skips on
/// constrained machines.
pub const SKIP_ENV: &str = "SEQTENSOR_SKIP_BENCH";

pub fn bench_skipped() -> bool {
    std::env::var(SKIP_ENV).is_ok_and(|v| !v.is_empty() && v != "0")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kernel: String,
    pub sequences: usize,
    pub frames: usize,
    pub joints: usize,
    pub exact_secs: f64,
    pub linear_secs: f64,
    /// `exact_secs / linear_secs`.
    pub speedup: f64,
    /// Largest `|exact - linear|` between the two Gram matrices, relative
    /// to the largest exact entry; includes the effect of EPN if enabled.
    pub max_rel_gap: f64,
}

pub fn bench_sequences(t: usize, n: usize, j: usize, seed: u64) -> Result<Vec<SkeletonSequence>> {
    let cfg = SynthConfig {
        classes: 4,
        per_class: t.div_ceil(4),
        joints: j,
        frames: n,
        noise: 0.01,
        subjects: 10,
        seed,
    };
    let mut seqs = synth_dataset(&cfg)?;
    seqs.truncate(t);
    Ok(seqs)
}

fn descriptor_gram(ds: &[Descriptor]) -> Result<nalgebra::DMatrix<f64>> {
    Ok(gram(ds, |a, b| a.dot(b))?.values)
}

fn report(
    kernel: &str,
    seqs: &[SkeletonSequence],
    exact: impl Fn(&SkeletonSequence, &SkeletonSequence) -> Result<f64> + Sync,
    encode: impl Fn(&SkeletonSequence) -> Result<Descriptor> + Sync,
) -> Result<BenchReport> {
    use rayon::prelude::*;
    if seqs.len() < 2 {
        return Err(invalid("benchmark needs at least 2 sequences"));
    }
    let start = Instant::now();
    let g_exact = gram(seqs, &exact)?.values;
    let exact_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let ds = seqs.par_iter().map(&encode).collect::<Result<Vec<_>>>()?;
    let g_lin = descriptor_gram(&ds)?;
    let linear_secs = start.elapsed().as_secs_f64();
    let scale = g_exact.amax().max(f64::MIN_POSITIVE);
    Ok(BenchReport {
        kernel: kernel.into(),
        sequences: seqs.len(),
        frames: seqs[0].frames(),
        joints: seqs[0].joints(),
        exact_secs,
        linear_secs,
        speedup: exact_secs / linear_secs.max(1e-9),
        max_rel_gap: (&g_exact - &g_lin).amax() / scale,
    })
}

/// Exact SCK Gram versus encoding with `cfg` and taking dot products.
pub fn bench_sck(seqs: &[SkeletonSequence], cfg: &SckConfig) -> Result<BenchReport> {
    report("sck", seqs, |a, b| exact_sck(a, b, cfg, false), |s| sck_descriptor(s, cfg))
}

pub fn bench_dck(seqs: &[SkeletonSequence], cfg: &DckConfig) -> Result<BenchReport> {
    report("dck", seqs, |a, b| exact_dck(a, b, cfg, false), |s| dck_descriptor(s, cfg))
}
