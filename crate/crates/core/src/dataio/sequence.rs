use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A per-frame vector stream attached to a sequence (e.g. classifier
/// scores). `values[s * dim + w]` is component `w` at frame `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn frame(&self, s: usize) -> &[f64] {
        &self.values[s * self.dim..(s + 1) * self.dim]
    }

    /// Zeroes negative entries.
    pub fn rectified(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = v.max(0.0));
        self
    }
}

/// `J` joints tracked over `N` frames. Coordinates are stored frame-major:
/// joint `i` at frame `s` occupies `coords[3 * (s * J + i)..][..3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub label: u32,
    pub subject: u32,
    joints: usize,
    frames: usize,
    coords: Vec<f64>,
    channels: Vec<Channel>,
}

impl SkeletonSequence {
    pub fn new(label: u32, subject: u32, joints: usize, frames: usize, coords: Vec<f64>) -> Result<Self> {
        Self::with_channels(label, subject, joints, frames, coords, Vec::new())
    }

    pub fn with_channels(
        label: u32,
        subject: u32,
        joints: usize,
        frames: usize,
        coords: Vec<f64>,
        channels: Vec<Channel>,
    ) -> Result<Self> {
        if joints == 0 || frames == 0 {
            return Err(invalid(format!("sequence needs J >= 1 and N >= 1 (got {joints}, {frames})")));
        }
        if coords.len() != joints * frames * 3 {
            return Err(invalid(format!(
                "{} coordinates given for J={joints}, N={frames} (expected {})",
                coords.len(),
                joints * frames * 3
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        for (q, ch) in channels.iter().enumerate() {
            if ch.dim == 0 || ch.values.len() != ch.dim * frames {
                return Err(invalid(format!(
                    "channel {q} has {} values for dim {} and {frames} frames",
                    ch.values.len(),
                    ch.dim
                )));
            }
            if ch.values.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("channel {q} has non-finite values")));
            }
        }
        Ok(Self {
            label,
            subject,
            joints,
            frames,
            coords,
            channels,
        })
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Position of joint `i` at frame `s` (both zero-based).
    #[inline]
    pub fn joint(&self, i: usize, s: usize) -> [f64; 3] {
        let o = 3 * (s * self.joints + i);
        [self.coords[o], self.coords[o + 1], self.coords[o + 2]]
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// Frames `start..start + len`, channels included.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.frames {
            return Err(invalid(format!(
                "window {start}..{} outside {} frames",
                start + len,
                self.frames
            )));
        }
        let j3 = 3 * self.joints;
        let coords = self.coords[start * j3..(start + len) * j3].to_vec();
        let channels = self
            .channels
            .iter()
            .map(|c| Channel {
                dim: c.dim,
                values: c.values[start * c.dim..(start + len) * c.dim].to_vec(),
            })
            .collect();
        Self::with_channels(self.label, self.subject, self.joints, len, coords, channels)
    }

    /// Repeats frames cyclically until the sequence has at least `min_len`
    /// frames.
    pub fn looped_to(&self, min_len: usize) -> Self {
        if self.frames >= min_len {
            return self.clone();
        }
        let j3 = 3 * self.joints;
        let coords = (0..min_len)
            .flat_map(|s| {
                let f = s % self.frames;
                self.coords[f * j3..(f + 1) * j3].iter().copied()
            })
            .collect();
        let channels = self
            .channels
            .iter()
            .map(|c| Channel {
                dim: c.dim,
                values: (0..min_len)
                    .flat_map(|s| c.frame(s % self.frames).iter().copied())
                    .collect(),
            })
            .collect();
        Self {
            label: self.label,
            subject: self.subject,
            joints: self.joints,
            frames: min_len,
            coords,
            channels,
        }
    }

    /// Every frame repeated `k` times in place.
    pub fn repeat_frames(&self, k: usize) -> Self {
        let k = k.max(1);
        let j3 = 3 * self.joints;
        let coords = (0..self.frames * k)
            .flat_map(|s| {
                let f = s / k;
                self.coords[f * j3..(f + 1) * j3].iter().copied()
            })
            .collect();
        let channels = self
            .channels
            .iter()
            .map(|c| Channel {
                dim: c.dim,
                values: (0..self.frames * k)
                    .flat_map(|s| c.frame(s / k).iter().copied())
                    .collect(),
            })
            .collect();
        Self {
            label: self.label,
            subject: self.subject,
            joints: self.joints,
            frames: self.frames * k,
            coords,
            channels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> SkeletonSequence {
        let coords = (0..2 * 3 * 3).map(|v| v as f64).collect();
        let ch = Channel {
            dim: 2,
            values: vec![1.0, -1.0, 2.0, -2.0, 3.0, -3.0],
        };
        SkeletonSequence::with_channels(1, 2, 2, 3, coords, vec![ch]).unwrap()
    }

    #[test]
    fn indexing_is_frame_major() {
        let s = seq();
        assert_eq!(s.joint(0, 0), [0.0, 1.0, 2.0]);
        assert_eq!(s.joint(1, 0), [3.0, 4.0, 5.0]);
        assert_eq!(s.joint(0, 1), [6.0, 7.0, 8.0]);
        assert_eq!(s.channels()[0].frame(2), &[3.0, -3.0]);
    }

    #[test]
    fn validation() {
        assert!(SkeletonSequence::new(0, 0, 2, 3, vec![0.0; 17]).is_err());
        assert!(SkeletonSequence::new(0, 0, 0, 3, vec![]).is_err());
        assert!(SkeletonSequence::new(0, 0, 1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn window_loop_repeat() {
        let s = seq();
        let w = s.window(1, 2).unwrap();
        assert_eq!(w.joint(0, 0), s.joint(0, 1));
        assert!(s.window(2, 2).is_err());
        let l = s.looped_to(7);
        assert_eq!(l.frames(), 7);
        assert_eq!(l.joint(1, 6), s.joint(1, 0));
        assert_eq!(l.channels()[0].frame(4), s.channels()[0].frame(1));
        let r = s.repeat_frames(3);
        assert_eq!(r.frames(), 9);
        assert_eq!(r.joint(1, 5), s.joint(1, 1));
        assert_eq!(r.channels()[0].frame(8), s.channels()[0].frame(2));
        assert_eq!(s.channels()[0].clone().rectified().values, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
    }
}
