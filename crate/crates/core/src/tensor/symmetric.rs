//! Packed storage for super-symmetric tensors.
//!
//! A super-symmetric order-r tensor of side `d` has only `C(d+r-1, r)`
//! distinct entries, one per index multiset `i_1 <= .. <= i_r`. We store them
//! in lexicographic order, each scaled by `sqrt(multiplicity)` where the
//! multiplicity `r! / prod(count!)` is the number of full-tensor positions
//! sharing that multiset. With that scaling the plain Euclidean dot of two
//! packed vectors equals the full tensor inner product.

use super::DenseTensor;
use crate::error::{invalid, Error, Result};

/// Absolute tolerance on `max |X[idx] - X[sorted(idx)]|` accepted by
/// [`pack_supersym`].
pub const SUPERSYM_TOL: f64 = 1e-10;

/// `C(d + r - 1, r)`. Returns 0 when `d` or `r` is 0.
pub fn packed_len(d: usize, r: usize) -> usize {
    if d == 0 || r == 0 {
        return 0;
    }
    // After step k this is C(d + k, k + 1), so every division is exact.
    (0..r).fold(1usize, |c, k| c * (d + k) / (k + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedSymmetric {
    pub side_dim: usize,
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl PackedSymmetric {
    pub fn dot(&self, other: &PackedSymmetric) -> Result<f64> {
        if self.side_dim != other.side_dim || self.order != other.order {
            return Err(invalid("packed tensors of different shape"));
        }
        Ok(super::dot_slices(&self.coeffs, &other.coeffs))
    }
}

/// Enumeration of the index multisets of side `d`, order `r`, with the
/// full-offset → packed-slot map.
#[derive(Debug, Clone)]
pub struct SymmetricLayout {
    d: usize,
    r: usize,
    /// Multisets back to back, `r` entries each.
    multisets: Vec<usize>,
    sqrt_mult: Vec<f64>,
    slot_of_offset: Vec<usize>,
}

impl SymmetricLayout {
    pub fn new(d: usize, r: usize) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(invalid(format!("symmetric layout needs d, r >= 1 (got {d}, {r})")));
        }
        let n = packed_len(d, r);
        let full = d
            .checked_pow(r as u32)
            .ok_or_else(|| invalid("symmetric layout too large"))?;

        let mut multisets = Vec::with_capacity(n * r);
        let mut m = vec![0usize; r];
        loop {
            multisets.extend_from_slice(&m);
            // next nondecreasing sequence in lexicographic order
            let Some(pos) = (0..r).rev().find(|&p| m[p] + 1 < d) else {
                break;
            };
            let v = m[pos] + 1;
            m[pos..].iter_mut().for_each(|x| *x = v);
        }
        debug_assert_eq!(multisets.len(), n * r);

        let r_fact: f64 = (1..=r).map(|k| k as f64).product();
        let perms = permutations(r);
        let mut sqrt_mult = Vec::with_capacity(n);
        let mut slot_of_offset = vec![usize::MAX; full];
        let mut permuted = vec![0usize; r];
        for (slot, ms) in multisets.chunks_exact(r).enumerate() {
            let mut denom = 1.0;
            let mut run = 1usize;
            for w in 1..=r {
                if w < r && ms[w] == ms[w - 1] {
                    run += 1;
                } else {
                    denom *= (1..=run).map(|k| k as f64).product::<f64>();
                    run = 1;
                }
            }
            sqrt_mult.push((r_fact / denom).sqrt());
            for p in &perms {
                for (dst, &src) in permuted.iter_mut().zip(p) {
                    *dst = ms[src];
                }
                slot_of_offset[offset(&permuted, d)] = slot;
            }
        }
        Ok(Self {
            d,
            r,
            multisets,
            sqrt_mult,
            slot_of_offset,
        })
    }

    pub fn side_dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.sqrt_mult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_mult.is_empty()
    }

    pub fn multiset(&self, slot: usize) -> &[usize] {
        &self.multisets[slot * self.r..(slot + 1) * self.r]
    }

    pub fn multiplicity(&self, slot: usize) -> f64 {
        self.sqrt_mult[slot] * self.sqrt_mult[slot]
    }

    /// Packed slot of a full-tensor storage offset.
    pub fn slot_of_offset(&self, offset: usize) -> usize {
        self.slot_of_offset[offset]
    }

    fn check_shape(&self, x: &DenseTensor) -> Result<()> {
        if x.order() != self.r || x.dims().iter().any(|&k| k != self.d) {
            return Err(invalid(format!(
                "tensor of dims {:?} does not match symmetric layout d={}, r={}",
                x.dims(),
                self.d,
                self.r
            )));
        }
        Ok(())
    }

    /// Packs a super-symmetric tensor (checked to [`SUPERSYM_TOL`]).
    pub fn pack(&self, x: &DenseTensor) -> Result<PackedSymmetric> {
        self.check_shape(x)?;
        let dev = self.deviation_unchecked(x);
        if dev > SUPERSYM_TOL {
            return Err(Error::PreconditionViolation(format!(
                "tensor is not super-symmetric (max deviation {dev:.3e})"
            )));
        }
        let coeffs = (0..self.len())
            .map(|slot| x.data()[offset(self.multiset(slot), self.d)] * self.sqrt_mult[slot])
            .collect();
        Ok(PackedSymmetric {
            side_dim: self.d,
            order: self.r,
            coeffs,
        })
    }

    pub fn unpack(&self, p: &PackedSymmetric) -> Result<DenseTensor> {
        if p.side_dim != self.d || p.order != self.r || p.coeffs.len() != self.len() {
            return Err(invalid("packed tensor does not match layout"));
        }
        let data = self
            .slot_of_offset
            .iter()
            .map(|&slot| p.coeffs[slot] / self.sqrt_mult[slot])
            .collect();
        DenseTensor::new(vec![self.d; self.r], data)
    }

    /// Averages `x` over all permutations of its indices.
    pub fn symmetrize(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(x)?;
        // The mean over index permutations equals the mean over the distinct
        // positions sharing a multiset.
        let mut sums = vec![0.0; self.len()];
        for (&slot, &v) in self.slot_of_offset.iter().zip(x.data()) {
            sums[slot] += v;
        }
        for (s, m) in sums.iter_mut().zip(&self.sqrt_mult) {
            *s /= m * m;
        }
        let data = self.slot_of_offset.iter().map(|&slot| sums[slot]).collect();
        DenseTensor::new(x.dims().to_vec(), data)
    }

    fn deviation_unchecked(&self, x: &DenseTensor) -> f64 {
        let data = x.data();
        self.slot_of_offset
            .iter()
            .zip(data)
            .map(|(&slot, &v)| (v - data[offset(self.multiset(slot), self.d)]).abs())
            .fold(0.0, f64::max)
    }
}

fn offset(idx: &[usize], d: usize) -> usize {
    idx.iter().rev().fold(0, |acc, &i| acc * d + i)
}

/// All permutations of `0..r` (Heap's algorithm).
fn permutations(r: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..r).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; r];
    let mut i = 1;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn layout_for(x: &DenseTensor) -> Result<SymmetricLayout> {
    let d = x.dims()[0];
    if x.dims().iter().any(|&k| k != d) {
        return Err(invalid(format!(
            "super-symmetric tensors need equal dims, got {:?}",
            x.dims()
        )));
    }
    SymmetricLayout::new(d, x.order())
}

pub fn pack_supersym(x: &DenseTensor) -> Result<PackedSymmetric> {
    layout_for(x)?.pack(x)
}

pub fn unpack_supersym(p: &PackedSymmetric) -> Result<DenseTensor> {
    SymmetricLayout::new(p.side_dim, p.order)?.unpack(p)
}

/// Max over entries of `|X[idx] - X[sorted(idx)]|`.
pub fn supersym_deviation(x: &DenseTensor) -> Result<f64> {
    Ok(layout_for(x)?.deviation_unchecked(x))
}

pub fn symmetrize(x: &DenseTensor) -> Result<DenseTensor> {
    layout_for(x)?.symmetrize(x)
}

/// Accumulates `sum_n w_n ⊗_r v_n` directly in packed form, without ever
/// materializing the `d^r` dense tensor.
#[derive(Debug, Clone)]
pub struct SymmetricAccumulator<'a> {
    layout: &'a SymmetricLayout,
    coeffs: Vec<f64>,
}

impl<'a> SymmetricAccumulator<'a> {
    pub fn new(layout: &'a SymmetricLayout) -> Self {
        Self {
            layout,
            coeffs: vec![0.0; layout.len()],
        }
    }

    pub fn add_outer_power(&mut self, v: &[f64], weight: f64) -> Result<()> {
        let d = self.layout.d;
        if v.len() != d {
            return Err(invalid(format!(
                "vector of length {} for layout side {}",
                v.len(),
                d
            )));
        }
        let c = &mut self.coeffs;
        match self.layout.r {
            1 => c.iter_mut().zip(v).for_each(|(c, x)| *c += weight * x),
            2 => {
                let mut slot = 0;
                for i in 0..d {
                    let wi = weight * v[i];
                    for &vj in &v[i..] {
                        c[slot] += wi * vj;
                        slot += 1;
                    }
                }
            }
            3 => {
                let mut slot = 0;
                for i in 0..d {
                    let wi = weight * v[i];
                    for j in i..d {
                        let wij = wi * v[j];
                        for &vk in &v[j..] {
                            c[slot] += wij * vk;
                            slot += 1;
                        }
                    }
                }
            }
            r => {
                for (slot, ms) in self.layout.multisets.chunks_exact(r).enumerate() {
                    c[slot] += weight * ms.iter().map(|&i| v[i]).product::<f64>();
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> PackedSymmetric {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&self.layout.sqrt_mult)
            .map(|(c, m)| c * m)
            .collect();
        PackedSymmetric {
            side_dim: self.layout.d,
            order: self.layout.r,
            coeffs,
        }
    }
}
