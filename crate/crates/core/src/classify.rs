//! One-vs-rest linear SVM, late fusion and Gram-matrix checks.
//!
//! Each binary problem minimizes `λ/2 ‖w‖² + 1/n Σ max(0, 1 - y <w, x̃>)`
//! with `λ = 1/(C·n)` and `x̃ = [x; 1]` (the bias is an augmented weight).
//! The solver is mini-batch subgradient descent with step `1/(λt)`, a seeded
//! sample order and projection onto the ball of radius `1/√λ`; by default a
//! batch is the whole training set, which makes each step an exact
//! subgradient step. Subgradient steps do not decrease the objective
//! monotonically, so after each epoch both the last and the averaged
//! iterate are evaluated and the best model seen so far is kept.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::ByteReader;
use crate::descriptor::{Descriptor, KernelKind};
use crate::error::{invalid, Error, Result};
use crate::tensor::dot_slices;

const MODEL_MAGIC: &[u8; 4] = b"TAKM";
const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    /// Samples per subgradient step; `0` uses the whole training set.
    pub batch_size: usize,
    /// Seeds the sample order when `batch_size` splits the set.
    pub seed: u64,
    /// L2-normalize every input before training and prediction.
    pub normalize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1e-2, epochs: 100, batch_size: 0, seed: 42, normalize: true }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("svm.c must be positive, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("svm.epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: Vec<u32>,
    /// One row of `dim` weights per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub config: SvmConfig,
    /// Summed one-vs-rest objective of the kept iterates, per epoch.
    pub loss_history: Vec<f64>,
}

fn l2_normalized(x: &[f64]) -> Vec<f64> {
    let n = dot_slices(x, x).sqrt();
    if n > 0.0 {
        x.iter().map(|v| v / n).collect()
    } else {
        x.to_vec()
    }
}

fn prepare(xs: &[Vec<f64>], normalize: bool) -> Vec<Vec<f64>> {
    xs.par_iter()
        .map(|x| if normalize { l2_normalized(x) } else { x.clone() })
        .collect()
}

struct Binary {
    w: Vec<f64>,
    b: f64,
}

fn objective(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y * (dot_slices(w, x) + b)).max(0.0))
        .sum();
    0.5 * lambda * (dot_slices(w, w) + b * b) + hinge / xs.len() as f64
}

fn train_binary(xs: &[Vec<f64>], ys: &[f64], batches: &[Vec<Vec<usize>>], lambda: f64) -> (Binary, Vec<f64>) {
    let d = xs[0].len();
    let radius2 = 1.0 / lambda;
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut avg_w, mut avg_b) = (vec![0.0; d], 0.0);
    let mut best = Binary { w: vec![0.0; d], b: 0.0 };
    let mut best_obj = objective(&best.w, 0.0, xs, ys, lambda);
    let mut history = Vec::with_capacity(batches.len());
    let mut step = vec![0.0; d];
    let mut t = 0usize;
    for epoch in batches {
        for batch in epoch {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            step.iter_mut().for_each(|v| *v = 0.0);
            let mut step_b = 0.0;
            for &i in batch {
                let (x, y) = (&xs[i], ys[i]);
                if y * (dot_slices(&w, x) + b) < 1.0 {
                    for (sv, &xv) in step.iter_mut().zip(x) {
                        *sv += y * xv;
                    }
                    step_b += y;
                }
            }
            let shrink = 1.0 - eta * lambda;
            let k = eta / batch.len() as f64;
            for (wv, &sv) in w.iter_mut().zip(&step) {
                *wv = shrink * *wv + k * sv;
            }
            b = shrink * b + k * step_b;
            let norm2 = dot_slices(&w, &w) + b * b;
            if norm2 > radius2 {
                let s = (radius2 / norm2).sqrt();
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
            let a = 1.0 / t as f64;
            for (av, &wv) in avg_w.iter_mut().zip(&w) {
                *av += (wv - *av) * a;
            }
            avg_b += (b - avg_b) * a;
        }
        for (cw, cb) in [(&w, b), (&avg_w, avg_b)] {
            let obj = objective(cw, cb, xs, ys, lambda);
            if obj < best_obj {
                best_obj = obj;
                best.w.copy_from_slice(cw);
                best.b = cb;
            }
        }
        history.push(best_obj);
    }
    (best, history)
}

/// Trains one binary classifier per distinct label (sorted ascending).
pub fn train_svm(xs: &[Vec<f64>], ys: &[u32], cfg: &SvmConfig) -> Result<LinearModel> {
    cfg.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(invalid(format!("{} samples but {} labels", xs.len(), ys.len())));
    }
    let d = xs[0].len();
    if d == 0 || xs.iter().any(|x| x.len() != d) {
        return Err(invalid("training samples must share a nonzero dimension"));
    }
    let mut classes = ys.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(invalid("training needs at least 2 classes"));
    }
    let xs = prepare(xs, cfg.normalize);
    let n = xs.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let batch = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batches: Vec<Vec<Vec<usize>>> = (0..cfg.epochs)
        .map(|_| {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            o.chunks(batch).map(<[usize]>::to_vec).collect()
        })
        .collect();
    let fits: Vec<(Binary, Vec<f64>)> = classes
        .par_iter()
        .map(|&k| {
            let yk: Vec<f64> = ys.iter().map(|&y| if y == k { 1.0 } else { -1.0 }).collect();
            train_binary(&xs, &yk, &batches, lambda)
        })
        .collect();
    let loss_history = (0..cfg.epochs)
        .map(|e| fits.iter().map(|(_, h)| h[e]).sum())
        .collect();
    let (weights, biases) = fits.into_iter().map(|(b, _)| (b.w, b.b)).unzip();
    Ok(LinearModel { classes, weights, biases, config: cfg.clone(), loss_history })
}

pub fn train_on_descriptors(ds: &[Descriptor], cfg: &SvmConfig) -> Result<LinearModel> {
    let xs: Vec<Vec<f64>> = ds.iter().map(|d| d.values.clone()).collect();
    let ys: Vec<u32> = ds.iter().map(|d| d.label).collect();
    train_svm(&xs, &ys, cfg)
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Per-class scores `<w_k, x> + b_k`, after the model's normalization.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(invalid(format!("input has dim {}, model expects {}", x.len(), self.dim())));
        }
        let owned;
        let x = if self.config.normalize {
            owned = l2_normalized(x);
            &owned[..]
        } else {
            x
        };
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot_slices(w, x) + b)
            .collect())
    }

    /// Highest-scoring label; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<(u32, Vec<f64>)> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        Ok((self.classes[best], scores))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.push(self.config.normalize as u8);
        buf.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.classes.len() as u32).to_le_bytes());
        buf.extend_from_slice(&self.config.c.to_le_bytes());
        buf.extend_from_slice(&(self.config.epochs as u64).to_le_bytes());
        buf.extend_from_slice(&(self.config.batch_size as u64).to_le_bytes());
        buf.extend_from_slice(&self.config.seed.to_le_bytes());
        for ((label, bias), weights) in self.classes.iter().zip(&self.biases).zip(&self.weights) {
            buf.extend_from_slice(&label.to_le_bytes());
            buf.extend_from_slice(&bias.to_le_bytes());
            weights.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        }
        buf.extend_from_slice(&(self.loss_history.len() as u64).to_le_bytes());
        self.loss_history.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = ByteReader { bytes: &bytes, pos: 0 };
        if cur.take(4)? != MODEL_MAGIC {
            return Err(model_err("bad magic"));
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != MODEL_VERSION {
            return Err(model_err(format!("unsupported version {version}")));
        }
        let normalize = match cur.take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(model_err(format!("bad normalize flag {other}"))),
        };
        let dim = cur.u64()? as usize;
        let k = u32::from_le_bytes(cur.array()?) as usize;
        let c = cur.f64()?;
        let epochs = cur.u64()? as usize;
        let batch_size = cur.u64()? as usize;
        let seed = cur.u64()?;
        let (mut classes, mut biases, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..k {
            classes.push(u32::from_le_bytes(cur.array()?));
            biases.push(cur.f64()?);
            weights.push((0..dim).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?);
        }
        let h = cur.u64()? as usize;
        let loss_history = (0..h).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(model_err("trailing bytes"));
        }
        Ok(Self {
            classes,
            weights,
            biases,
            config: SvmConfig { c, epochs, batch_size, seed, normalize },
            loss_history,
        })
    }
}

fn model_err(msg: impl Into<String>) -> Error {
    Error::Format { line: None, message: format!("model file: {}", msg.into()) }
}

/// Fraction of correct predictions.
pub fn accuracy(model: &LinearModel, xs: &[Vec<f64>], ys: &[u32]) -> Result<f64> {
    let preds = xs.par_iter().map(|x| Ok(model.predict(x)?.0)).collect::<Result<Vec<_>>>()?;
    let hits = preds.iter().zip(ys).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / ys.len().max(1) as f64)
}

/// Accuracy per class label, for labels present in `ys`.
pub fn per_class_accuracy(model: &LinearModel, xs: &[Vec<f64>], ys: &[u32]) -> Result<Vec<(u32, f64)>> {
    let mut labels = ys.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let preds = xs.iter().map(|x| Ok(model.predict(x)?.0)).collect::<Result<Vec<_>>>()?;
    Ok(labels
        .into_iter()
        .map(|l| {
            let (n, hit) = preds.iter().zip(ys).filter(|(_, &y)| y == l).fold((0, 0), |(n, h), (p, _)| {
                (n + 1, h + usize::from(*p == l))
            });
            (l, hit as f64 / n as f64)
        })
        .collect())
}

/// Mean over classes of the average precision of ranking all samples by
/// that class's score.
pub fn mean_average_precision(model: &LinearModel, xs: &[Vec<f64>], ys: &[u32]) -> Result<f64> {
    let scores = xs.iter().map(|x| model.scores(x)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut counted = 0;
    for (k, &label) in model.classes.iter().enumerate() {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| scores[b][k].total_cmp(&scores[a][k]).then(a.cmp(&b)));
        let positives = ys.iter().filter(|&&y| y == label).count();
        if positives == 0 {
            continue;
        }
        let (mut hits, mut ap) = (0usize, 0.0);
        for (rank, &i) in order.iter().enumerate() {
            if ys[i] == label {
                hits += 1;
                ap += hits as f64 / (rank + 1) as f64;
            }
        }
        total += ap / positives as f64;
        counted += 1;
    }
    Ok(total / counted.max(1) as f64)
}

/// `[√w·a; √(1-w)·b]`, so fused dot products are `w·<a, a'> + (1-w)·<b, b'>`.
pub fn late_fusion(a: &Descriptor, b: &Descriptor, w: f64) -> Result<Descriptor> {
    if !(0.0..=1.0).contains(&w) {
        return Err(invalid(format!("fusion weight must be in [0, 1], got {w}")));
    }
    if a.label != b.label || a.subject != b.subject {
        return Err(invalid("fused descriptors describe different sequences"));
    }
    let (sa, sb) = (w.sqrt(), (1.0 - w).sqrt());
    let values = a
        .values
        .iter()
        .map(|v| sa * v)
        .chain(b.values.iter().map(|v| sb * v))
        .collect();
    Ok(Descriptor {
        kind: KernelKind::Fusion,
        label: a.label,
        subject: a.subject,
        joints: a.joints,
        config_hash: crate::descriptor::config_hash(&(a.config_hash, b.config_hash, w)),
        values,
        out_of_domain: a.out_of_domain + b.out_of_domain,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub ids: Vec<usize>,
}

impl GramMatrix {
    pub fn asymmetry(&self) -> f64 {
        (&self.values - self.values.transpose()).amax()
    }

    pub fn min_eig(&self) -> f64 {
        min_eig(&self.values)
    }
}

/// Evaluates `kernel` on every pair (upper triangle in parallel, mirrored).
pub fn gram<T, F>(items: &[T], kernel: F) -> Result<GramMatrix>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    let n = items.len();
    if n < 2 {
        return Err(invalid("a Gram matrix needs at least 2 items"));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let vals = pairs
        .par_iter()
        .map(|&(a, b)| kernel(&items[a], &items[b]))
        .collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(a, b), v) in pairs.iter().zip(vals) {
        m[(a, b)] = v;
        m[(b, a)] = v;
    }
    Ok(GramMatrix { values: m, ids: (0..n).collect() })
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
