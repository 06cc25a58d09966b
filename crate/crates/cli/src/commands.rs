use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use seqtensor::bench::{bench_dck, bench_sck, bench_sequences};
use seqtensor::classify::{
    accuracy, gram, late_fusion, mean_average_precision, per_class_accuracy, train_on_descriptors, LinearModel,
};
use seqtensor::dataio::{
    hip_center, limb_normalize, load_descriptors, load_sequences, median_bone_lengths, save_descriptors,
    save_sequences, synth_dataset, Topology,
};
use seqtensor::dck::plus::{dck_plus_descriptor, DckPlusConfig};
use seqtensor::dck::{dck_descriptor, exact_dck, max_displacement, DckConfig};
use seqtensor::epn::{slice_epn, tensor_epn, EpnConfig};
use seqtensor::features::max_approx_error;
use seqtensor::sck::plus::{sck_plus_descriptor, SckPlusConfig};
use seqtensor::sck::{exact_sck, sck_descriptor, sck_joint_tensor, SckConfig};
use seqtensor::{Descriptor, Error, PivotGrid, Result, SkeletonSequence};

use crate::config::{Kernel, RunConfig};

/// Upper bound on the worst pointwise error of the pivot approximation of a
/// Gaussian kernel on [-1, 1] with 11 pivots and σ = 0.5.
const RBF_EPS0: f64 = 0.33;
const IDENTITY_TOL: f64 = 1e-8;
const PD_TOL: f64 = 1e-8;
const EPN_IDENTITY_TOL: f64 = 1e-10;
const MIN_BENCH_SEQUENCES: usize = 50;

fn require_out(out: Option<&Path>, command: &str) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| Error::Config(format!("`{command}` needs --out")))
}

/// Re-raises `e` with `context` prepended, keeping its kind.
fn context(e: Error, ctx: &str) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
        Error::PreconditionViolation(m) => Error::PreconditionViolation(format!("{ctx}: {m}")),
        Error::CalibrationFailure(m) => Error::CalibrationFailure(format!("{ctx}: {m}")),
        Error::NumericFailure { mode, message } => Error::NumericFailure { mode, message: format!("{ctx}: {message}") },
        Error::Format { line, message } => Error::Format { line, message: format!("{ctx}: {message}") },
        Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
        Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{ctx}: {e}"))),
    }
}

pub fn synth(cfg: &RunConfig, out: Option<&Path>) -> Result<Value> {
    let out = require_out(out, "synth")?;
    let seqs = synth_dataset(&cfg.synth)?;
    save_sequences(&out, &seqs)?;
    Ok(json!({
        "command": "synth",
        "records": seqs.len(),
        "classes": cfg.synth.classes,
        "joints": cfg.synth.joints,
        "frames": cfg.synth.frames,
        "seed": cfg.synth.seed,
        "output": out,
    }))
}

fn preprocess(cfg: &RunConfig, seqs: Vec<SkeletonSequence>) -> Result<Vec<SkeletonSequence>> {
    let mut seqs = match cfg.preprocess.hip {
        Some(h) => seqs.iter().map(|s| hip_center(s, h)).collect::<Result<Vec<_>>>()?,
        None => seqs,
    };
    if cfg.preprocess.limb_normalize && !seqs.is_empty() {
        let topo = Topology::binary(seqs[0].joints());
        let reference = median_bone_lengths(&seqs, &topo)?;
        seqs = seqs.iter().map(|s| limb_normalize(s, &topo, &reference)).collect::<Result<Vec<_>>>()?;
    }
    Ok(seqs)
}

enum Encoder {
    Sck(SckConfig),
    Dck(DckConfig),
    SckPlus(SckPlusConfig),
    DckPlus(DckPlusConfig),
    Fusion(SckConfig, DckConfig, f64),
}

impl Encoder {
    fn new(cfg: &RunConfig, seqs: &[SkeletonSequence]) -> Result<Self> {
        let auto = max_displacement(seqs, cfg.dck.joint_subset.as_deref());
        Ok(match cfg.kernel {
            Kernel::Sck => Self::Sck(cfg.sck_config()?),
            Kernel::Dck => Self::Dck(cfg.dck_config(auto)?),
            Kernel::SckPlus => Self::SckPlus(cfg.sck_plus_config()?),
            Kernel::DckPlus => Self::DckPlus(cfg.dck_plus_config(auto)?),
            Kernel::Fusion => Self::Fusion(cfg.sck_config()?, cfg.dck_config(auto)?, cfg.fusion_weight),
        })
    }

    fn encode(&self, s: &SkeletonSequence) -> Result<Descriptor> {
        match self {
            Self::Sck(c) => sck_descriptor(s, c),
            Self::Dck(c) => dck_descriptor(s, c),
            Self::SckPlus(c) => sck_plus_descriptor(s, c),
            Self::DckPlus(c) => dck_plus_descriptor(s, c),
            Self::Fusion(a, b, w) => late_fusion(&sck_descriptor(s, a)?, &dck_descriptor(s, b)?, *w),
        }
    }
}

pub fn encode(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<Value> {
    let out = require_out(out, "encode")?;
    let seqs = preprocess(cfg, load_sequences(input)?)?;
    let encoder = Encoder::new(cfg, &seqs)?;
    let total = seqs.len();
    let step = (total / 10).max(1);
    let done = AtomicUsize::new(0);
    let ds = seqs
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let d = encoder.encode(s).map_err(|e| context(e, &format!("sequence {} (label {})", k + 1, s.label)))?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % step == 0 || n == total {
                eprintln!("encoded {n}/{total}");
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    let outside: Vec<(usize, usize)> =
        ds.iter().enumerate().filter(|(_, d)| d.out_of_domain > 0).map(|(k, d)| (k + 1, d.out_of_domain)).collect();
    let outside_total: usize = outside.iter().map(|(_, n)| n).sum();
    if outside_total > 0 {
        eprintln!(
            "warning: {outside_total} inputs in {} sequences fell outside their pivot grids",
            outside.len()
        );
    }
    save_descriptors(&out, &ds)?;
    Ok(json!({
        "command": "encode",
        "kernel": cfg.kernel,
        "sequences": ds.len(),
        "length": ds.first().map_or(0, Descriptor::len),
        "config_hash": ds.first().map(|d| format!("{:016x}", d.config_hash)),
        "out_of_domain": outside_total,
        "output": out,
    }))
}

fn check_consistent(ds: &[Descriptor]) -> Result<()> {
    let first = ds.first().ok_or_else(|| Error::Format { line: None, message: "no descriptors".into() })?;
    if let Some((k, _)) =
        ds.iter().enumerate().find(|(_, d)| d.len() != first.len() || d.config_hash != first.config_hash)
    {
        return Err(Error::Format {
            line: None,
            message: format!("descriptor {} was encoded with a different configuration", k + 1),
        });
    }
    Ok(())
}

fn split(cfg: &RunConfig, ds: Vec<Descriptor>) -> Result<(Vec<Descriptor>, Vec<Descriptor>)> {
    let held: BTreeSet<u32> = match &cfg.split.held_out {
        Some(h) => h.iter().copied().collect(),
        None => {
            let subjects: BTreeSet<u32> = ds.iter().map(|d| d.subject).collect();
            subjects.into_iter().skip(1).step_by(2).collect()
        }
    };
    let (test, train): (Vec<_>, Vec<_>) = ds.into_iter().partition(|d| held.contains(&d.subject));
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "split.held_out leaves an empty side ({} train, {} test)",
            train.len(),
            test.len()
        )));
    }
    if train.len() < test.len() {
        eprintln!("warning: training split ({}) is smaller than test split ({})", train.len(), test.len());
    }
    Ok((train, test))
}

fn unzip(ds: &[Descriptor]) -> (Vec<Vec<f64>>, Vec<u32>) {
    ds.iter().map(|d| (d.values.clone(), d.label)).unzip()
}

pub fn train(cfg: &RunConfig, descriptors: &Path, out: Option<&Path>) -> Result<Value> {
    let out = require_out(out, "train")?;
    let ds = load_descriptors(descriptors)?;
    check_consistent(&ds)?;
    let (train, test) = split(cfg, ds)?;
    let model = train_on_descriptors(&train, &cfg.svm)?;
    model.write_to(BufWriter::new(File::create(&out)?))?;
    let (xs, ys) = unzip(&train);
    Ok(json!({
        "command": "train",
        "train_samples": train.len(),
        "test_samples": test.len(),
        "classes": model.classes,
        "dim": model.dim(),
        "final_objective": model.loss_history.last(),
        "train_accuracy": accuracy(&model, &xs, &ys)?,
        "output": out,
    }))
}

pub fn eval(cfg: &RunConfig, descriptors: &Path, model_path: &Path, map: bool) -> Result<Value> {
    let model = LinearModel::read_from(std::io::BufReader::new(File::open(model_path)?))
        .map_err(|e| context(e, &model_path.display().to_string()))?;
    let ds = load_descriptors(descriptors)?;
    check_consistent(&ds)?;
    let (train, test) = split(cfg, ds)?;
    let (xs, ys) = unzip(&train);
    let (xt, yt) = unzip(&test);
    let per_class: Vec<Value> = per_class_accuracy(&model, &xt, &yt)?
        .into_iter()
        .map(|(label, acc)| json!({ "label": label, "accuracy": acc }))
        .collect();
    let mut report = json!({
        "command": "eval",
        "train_samples": train.len(),
        "test_samples": test.len(),
        "train_accuracy": accuracy(&model, &xs, &ys)?,
        "test_accuracy": accuracy(&model, &xt, &yt)?,
        "per_class": per_class,
    });
    if map || cfg.eval.map {
        report["map"] = json!(mean_average_precision(&model, &xt, &yt)?);
    }
    Ok(report)
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, pass: value <= threshold }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, pass: value >= threshold }
    }
}

fn max_rel_gap<F>(seqs: &[SkeletonSequence], f: F) -> Result<f64>
where
    F: Fn(&SkeletonSequence, &SkeletonSequence) -> Result<(f64, f64)>,
{
    let mut worst = 0.0f64;
    for a in seqs {
        for b in seqs {
            let (want, got) = f(a, b)?;
            worst = worst.max((want - got).abs() / want.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Runs the built-in consistency checks against the configured kernels.
pub fn verify(cfg: &RunConfig) -> Result<(Value, bool)> {
    let v = &cfg.verify;
    if v.sequences < 2 || v.joints < 2 || v.frames < 2 {
        return Err(Error::Config("verify needs at least 2 sequences, joints and frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seqs = (0..v.sequences)
        .map(|_| {
            let coords = (0..v.joints * v.frames * 3).map(|_| rng.random_range(-0.9..0.9)).collect();
            SkeletonSequence::new(0, 0, v.joints, v.frames, coords)
        })
        .collect::<Result<Vec<_>>>()?;

    let sck = SckConfig { epn: EpnConfig::none(), ..cfg.sck_config()? };
    let dck = DckConfig { epn: EpnConfig::none(), disp_scale: 1.0, ..cfg.dck_config(1.0)? };
    let mut checks = vec![
        Check::at_most(
            "sck_descriptor_identity",
            max_rel_gap(&seqs, |a, b| {
                Ok((exact_sck(a, b, &sck, true)?, sck_descriptor(a, &sck)?.dot(&sck_descriptor(b, &sck)?)?))
            })?,
            IDENTITY_TOL,
        ),
        Check::at_most(
            "dck_descriptor_identity",
            max_rel_gap(&seqs, |a, b| {
                Ok((exact_dck(a, b, &dck, true)?, dck_descriptor(a, &dck)?.dot(&dck_descriptor(b, &dck)?)?))
            })?,
            IDENTITY_TOL,
        ),
        Check::at_least("sck_gram_min_eig", gram(&seqs, |a, b| exact_sck(a, b, &sck, false))?.min_eig(), -PD_TOL),
        Check::at_least("dck_gram_min_eig", gram(&seqs, |a, b| exact_dck(a, b, &dck, false))?.min_eig(), -PD_TOL),
    ];

    let x = sck_joint_tensor(&seqs[0], 0, &sck)?;
    checks.push(Check::at_most("slice_epn_identity", slice_epn(&x, 1.0)?.rel_frobenius_err(&x), EPN_IDENTITY_TOL));
    checks.push(Check::at_most(
        "hosvd_epn_identity",
        tensor_epn(&x, &EpnConfig::hosvd(1.0), 1)?.rel_frobenius_err(&x),
        EPN_IDENTITY_TOL,
    ));

    let grid = |z| PivotGrid::new(-1.0, 1.0, z, 0.5);
    let (e3, e11) = (max_approx_error(&grid(3)?, 2000, cfg.seed), max_approx_error(&grid(11)?, 2000, cfg.seed));
    checks.push(Check::at_most("rbf_approx_error_z11", e11, RBF_EPS0));
    checks.push(Check::at_most("rbf_error_shrinks_with_pivots", e11, e3));

    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!("{} {}: {:.3e} (limit {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    let list: Vec<Value> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.pass }))
        .collect();
    Ok((json!({ "command": "verify", "pass": pass, "checks": list }), pass))
}

pub fn bench(cfg: &RunConfig) -> Result<Value> {
    let b = &cfg.bench;
    if b.sequences < MIN_BENCH_SEQUENCES {
        return Err(Error::Config(format!(
            "bench.sequences must be at least {MIN_BENCH_SEQUENCES}, got {}",
            b.sequences
        )));
    }
    let seqs = bench_sequences(b.sequences, b.frames, b.joints, cfg.seed)?;
    let sck = bench_sck(&seqs, &cfg.sck_config()?)?;
    let small = bench_sequences(b.dck_sequences, b.dck_frames, b.dck_joints, cfg.seed)?;
    let dck = bench_dck(&small, &cfg.dck_config(max_displacement(&small, None))?)?;
    Ok(json!({ "command": "bench", "reports": [sck, dck] }))
}
