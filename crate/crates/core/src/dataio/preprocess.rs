//! Hip-centering, limb-length normalization and subject splits.

use std::collections::BTreeSet;

use super::SkeletonSequence;
use crate::error::{invalid, Error, Result};

/// Subtracts joint `hip` from every joint, frame by frame.
pub fn hip_center(seq: &SkeletonSequence, hip: usize) -> Result<SkeletonSequence> {
    if hip >= seq.joints() {
        return Err(invalid(format!("hip joint {hip} out of range for J={}", seq.joints())));
    }
    let mut out = seq.clone();
    let j = seq.joints();
    for s in 0..seq.frames() {
        let h = seq.joint(hip, s);
        let frame = &mut out.coords_mut()[3 * s * j..3 * (s + 1) * j];
        for p in frame.chunks_exact_mut(3) {
            p[0] -= h[0];
            p[1] -= h[1];
            p[2] -= h[2];
        }
    }
    Ok(out)
}

/// A skeleton tree given by each joint's parent; the root has none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    parents: Vec<Option<usize>>,
    /// Joints ordered so that parents precede children.
    order: Vec<usize>,
}

impl Topology {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        let j = parents.len();
        if let Some(&bad) = parents.iter().flatten().find(|&&p| p >= j) {
            return Err(invalid(format!("parent {bad} out of range for J={j}")));
        }
        if parents.iter().filter(|p| p.is_none()).count() != 1 {
            return Err(invalid("topology needs exactly one root"));
        }
        let mut children = vec![Vec::new(); j];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(i);
            }
        }
        let root = parents.iter().position(Option::is_none).expect("one root");
        let mut order = vec![root];
        let mut k = 0;
        while k < order.len() {
            order.extend_from_slice(&children[order[k]]);
            k += 1;
        }
        if order.len() != j {
            return Err(invalid("topology contains a cycle"));
        }
        Ok(Self { parents, order })
    }

    /// Binary tree rooted at joint 0: `parent(i) = (i - 1) / 2`.
    pub fn binary(joints: usize) -> Self {
        let parents = (0..joints).map(|i| (i > 0).then(|| (i - 1) / 2)).collect();
        Self::new(parents).expect("binary tree is valid")
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn check_topology(seq: &SkeletonSequence, topo: &Topology) -> Result<()> {
    if topo.len() != seq.joints() {
        return Err(invalid(format!("topology has {} joints, sequence {}", topo.len(), seq.joints())));
    }
    Ok(())
}

/// Length of the bone ending at each joint, per frame (`0` for the root).
pub fn bone_lengths(seq: &SkeletonSequence, topo: &Topology, s: usize) -> Result<Vec<f64>> {
    check_topology(seq, topo)?;
    Ok((0..seq.joints())
        .map(|i| topo.parent(i).map_or(0.0, |p| norm3(sub3(seq.joint(i, s), seq.joint(p, s)))))
        .collect())
}

/// Per-bone median length over every frame of every sequence.
pub fn median_bone_lengths(seqs: &[SkeletonSequence], topo: &Topology) -> Result<Vec<f64>> {
    let mut per_bone = vec![Vec::new(); topo.len()];
    for seq in seqs {
        for s in 0..seq.frames() {
            for (i, l) in bone_lengths(seq, topo, s)?.into_iter().enumerate() {
                per_bone[i].push(l);
            }
        }
    }
    Ok(per_bone
        .into_iter()
        .map(|mut v| {
            if v.is_empty() {
                return 0.0;
            }
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                0.5 * (v[m - 1] + v[m])
            }
        })
        .collect())
}

/// Rescales every bone to its reference length, keeping its direction.
/// The root stays put; children are placed after their parents. A
/// zero-length bone points along `+y`.
pub fn limb_normalize(seq: &SkeletonSequence, topo: &Topology, reference: &[f64]) -> Result<SkeletonSequence> {
    check_topology(seq, topo)?;
    if reference.len() != seq.joints() {
        return Err(invalid("one reference length per joint is required"));
    }
    for &i in &topo.order[1..] {
        if !(reference[i] > 0.0) || !reference[i].is_finite() {
            return Err(invalid(format!("reference length of bone {i} must be positive")));
        }
    }
    let mut out = seq.clone();
    let j = seq.joints();
    for s in 0..seq.frames() {
        for &i in &topo.order[1..] {
            let p = topo.parent(i).expect("non-root joint");
            let bone = sub3(seq.joint(i, s), seq.joint(p, s));
            let n = norm3(bone);
            let dir = if n > 0.0 { bone.map(|v| v / n) } else { [0.0, 1.0, 0.0] };
            let base = 3 * (s * j + p);
            let parent_pos = [out.coords()[base], out.coords()[base + 1], out.coords()[base + 2]];
            let o = 3 * (s * j + i);
            for d in 0..3 {
                out.coords_mut()[o + d] = parent_pos[d] + reference[i] * dir[d];
            }
        }
    }
    Ok(out)
}

/// Partitions by subject: `held_out` subjects form the test side.
pub fn cross_subject_split(
    seqs: &[SkeletonSequence],
    held_out: &[u32],
) -> Result<(Vec<SkeletonSequence>, Vec<SkeletonSequence>)> {
    let held: BTreeSet<u32> = held_out.iter().copied().collect();
    let (test, train): (Vec<_>, Vec<_>) = seqs.iter().cloned().partition(|s| held.contains(&s.subject));
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "subject split leaves an empty side ({} train, {} test)",
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}

/// Every second subject id in ascending order (`{1..10}` gives `{2, 4, .., 10}`).
pub fn alternate_subjects(seqs: &[SkeletonSequence]) -> Vec<u32> {
    let ids: BTreeSet<u32> = seqs.iter().map(|s| s.subject).collect();
    ids.into_iter().skip(1).step_by(2).collect()
}
