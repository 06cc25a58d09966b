//! Dense order-r tensors and the handful of multilinear operations the
//! descriptors are built from.
//!
//! Layout convention, used everywhere in this crate: the **first index runs
//! fastest**. An entry `(i_1, .., i_r)` of a tensor with dims `(d_1, .., d_r)`
//! lives at offset `i_1 + d_1 * (i_2 + d_2 * (i_3 + ..))`. Mode indices in the
//! API are zero-based (`k = 0` is the first mode).
//!
//! The mode-k unfolding is a `d_k x (prod(dims) / d_k)` matrix whose columns
//! enumerate the remaining indices in ascending mode order, first-listed
//! fastest. With the layout above this means column `l + left * r`, where `l`
//! encodes the modes before `k` and `r` the modes after it.

mod symmetric;

pub use symmetric::{
    pack_supersym, packed_len, supersym_deviation, symmetrize, unpack_supersym, PackedSymmetric,
    SymmetricAccumulator, SymmetricLayout, SUPERSYM_TOL,
};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(invalid(format!(
                "dims {:?} describe {} entries but data has {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            advance(&mut idx, dims);
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &DenseTensor, factor: f64) -> Result<()> {
        if self.dims != other.dims {
            return Err(invalid(format!(
                "cannot add tensors of dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    /// `self += weight · (v_1 ⊗ .. ⊗ v_r)` without allocating the outer product.
    pub fn add_outer(&mut self, vectors: &[&[f64]], weight: f64) -> Result<()> {
        if vectors.len() != self.order() || vectors.iter().zip(&self.dims).any(|(v, &d)| v.len() != d) {
            return Err(invalid(format!(
                "outer product of lengths {:?} does not match dims {:?}",
                vectors.iter().map(|v| v.len()).collect::<Vec<_>>(),
                self.dims
            )));
        }
        add_outer_rec(&mut self.data, vectors, weight);
        Ok(())
    }

    /// `self += weight · ⊗_r v`.
    pub fn add_outer_power(&mut self, v: &[f64], weight: f64) -> Result<()> {
        let vs: Vec<&[f64]> = vec![v; self.order()];
        self.add_outer(&vs, weight)
    }

    /// Largest absolute entrywise difference; `inf` when the dims differ.
    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `||self - other||_F / ||other||_F` (absolute error when `other` is zero).
    pub fn rel_frobenius_err(&self, other: &DenseTensor) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = other.frobenius();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Frontal slice `X[:, :, s]` of an order-3 tensor.
    pub fn frontal_slice(&self, s: usize) -> Result<DMatrix<f64>> {
        if self.order() != 3 || s >= self.dims[2] {
            return Err(invalid(format!(
                "slice {} requested from tensor of dims {:?}",
                s, self.dims
            )));
        }
        let (d1, d2) = (self.dims[0], self.dims[1]);
        let start = s * d1 * d2;
        Ok(DMatrix::from_column_slice(
            d1,
            d2,
            &self.data[start..start + d1 * d2],
        ))
    }

    /// Overwrites the frontal slice `s` of an order-3 tensor.
    pub fn set_frontal_slice(&mut self, s: usize, m: &DMatrix<f64>) -> Result<()> {
        if self.order() != 3
            || s >= self.dims[2]
            || m.nrows() != self.dims[0]
            || m.ncols() != self.dims[1]
        {
            return Err(invalid("frontal slice shape mismatch"));
        }
        let (d1, d2) = (self.dims[0], self.dims[1]);
        let start = s * d1 * d2;
        // DMatrix storage is column-major, which matches first-index-fastest.
        self.data[start..start + d1 * d2].copy_from_slice(m.as_slice());
        Ok(())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(invalid("tensor order must be at least 1"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(invalid(format!("every dim must be positive, got {:?}", dims)));
    }
    Ok(())
}

/// Advances a multi-index in storage order (first index fastest).
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

// The last vector indexes the slowest-varying blocks of `data`.
fn add_outer_rec(data: &mut [f64], vectors: &[&[f64]], weight: f64) {
    let (last, rest) = vectors.split_last().expect("non-empty vector list");
    if rest.is_empty() {
        for (d, &x) in data.iter_mut().zip(last.iter()) {
            *d += weight * x;
        }
        return;
    }
    let block = data.len() / last.len();
    for (chunk, &x) in data.chunks_exact_mut(block).zip(last.iter()) {
        let w = weight * x;
        if w != 0.0 {
            add_outer_rec(chunk, rest, w);
        }
    }
}

/// Outer product `v_1 ⊗ v_2 ⊗ .. ⊗ v_r`.
pub fn outer(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(invalid("outer product of an empty vector list"));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(invalid("outer product of an empty vector"));
    }
    let mut data = vectors[0].to_vec();
    for v in &vectors[1..] {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &b in v.iter() {
            next.extend(data.iter().map(|&a| a * b));
        }
        data = next;
    }
    let dims = vectors.iter().map(|v| v.len()).collect();
    DenseTensor::new(dims, data)
}

/// `⊗_r v`: the order-r outer power of one vector.
pub fn outer_power(v: &[f64], r: usize) -> Result<DenseTensor> {
    if r == 0 {
        return Err(invalid("outer power of order 0"));
    }
    let vs: Vec<&[f64]> = std::iter::repeat(v).take(r).collect();
    outer(&vs)
}

/// `<X, Y> = sum of elementwise products`.
pub fn inner(x: &DenseTensor, y: &DenseTensor) -> Result<f64> {
    if x.dims != y.dims {
        return Err(invalid(format!(
            "inner product of tensors with dims {:?} and {:?}",
            x.dims, y.dims
        )));
    }
    Ok(dot_slices(&x.data, &y.data))
}

/// Euclidean dot product of two equal-length slices.
pub fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn split_at_mode(dims: &[usize], k: usize) -> (usize, usize, usize) {
    let left = dims[..k].iter().product();
    let right = dims[k + 1..].iter().product();
    (left, dims[k], right)
}

/// Mode-k product `X ×_k A`: contracts mode `k` of `X` with the columns of
/// `A`, so `Y[.., j, ..] = sum_i A[j, i] X[.., i, ..]`. Requires
/// `A.ncols() == dims[k]`; mode `k` of the result has size `A.nrows()`.
pub fn mode_product(x: &DenseTensor, a: &DMatrix<f64>, k: usize) -> Result<DenseTensor> {
    if k >= x.order() {
        return Err(invalid(format!(
            "mode {} out of range for order {}",
            k,
            x.order()
        )));
    }
    if a.ncols() != x.dims[k] {
        return Err(invalid(format!(
            "mode {} has size {} but matrix has {} columns",
            k,
            x.dims[k],
            a.ncols()
        )));
    }
    let (left, dk, right) = split_at_mode(&x.dims, k);
    let rows = a.nrows();
    let mut dims = x.dims.clone();
    dims[k] = rows;
    let mut out = vec![0.0; left * rows * right];
    for r in 0..right {
        for i in 0..dk {
            let src = &x.data[left * (i + dk * r)..left * (i + dk * r) + left];
            for j in 0..rows {
                let aji = a[(j, i)];
                if aji == 0.0 {
                    continue;
                }
                let dst = &mut out[left * (j + rows * r)..left * (j + rows * r) + left];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += aji * s;
                }
            }
        }
    }
    DenseTensor::new(dims, out)
}

/// Mode-k unfolding (see the module docs for the column order).
pub fn unfold(x: &DenseTensor, k: usize) -> Result<DMatrix<f64>> {
    if k >= x.order() {
        return Err(invalid(format!(
            "mode {} out of range for order {}",
            k,
            x.order()
        )));
    }
    let (left, dk, right) = split_at_mode(&x.dims, k);
    let mut m = DMatrix::zeros(dk, left * right);
    for r in 0..right {
        for i in 0..dk {
            for l in 0..left {
                m[(i, l + left * r)] = x.data[l + left * (i + dk * r)];
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &DMatrix<f64>, k: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    if k >= dims.len() {
        return Err(invalid(format!(
            "mode {} out of range for order {}",
            k,
            dims.len()
        )));
    }
    let (left, dk, right) = split_at_mode(dims, k);
    if m.nrows() != dk || m.ncols() != left * right {
        return Err(invalid(format!(
            "matrix {}x{} cannot fold into dims {:?} along mode {}",
            m.nrows(),
            m.ncols(),
            dims,
            k
        )));
    }
    let mut data = vec![0.0; left * dk * right];
    for r in 0..right {
        for i in 0..dk {
            for l in 0..left {
                data[l + left * (i + dk * r)] = m[(i, l + left * r)];
            }
        }
    }
    DenseTensor::new(dims.to_vec(), data)
}

/// Stacks tensors along mode `k`; every other dim must agree.
pub fn concat_mode(tensors: &[DenseTensor], k: usize) -> Result<DenseTensor> {
    let first = tensors
        .first()
        .ok_or_else(|| invalid("concatenation of an empty tensor list"))?;
    if k >= first.order() {
        return Err(invalid(format!(
            "mode {} out of range for order {}",
            k,
            first.order()
        )));
    }
    for t in &tensors[1..] {
        let compatible = t.order() == first.order()
            && t.dims
                .iter()
                .zip(&first.dims)
                .enumerate()
                .all(|(j, (a, b))| j == k || a == b);
        if !compatible {
            return Err(invalid(format!(
                "cannot concatenate dims {:?} with {:?} along mode {}",
                t.dims, first.dims, k
            )));
        }
    }
    let left: usize = first.dims[..k].iter().product();
    let right: usize = first.dims[k + 1..].iter().product();
    let total_k: usize = tensors.iter().map(|t| t.dims[k]).sum();
    let mut dims = first.dims.clone();
    dims[k] = total_k;
    let mut data = Vec::with_capacity(left * total_k * right);
    for r in 0..right {
        for t in tensors {
            let block = left * t.dims[k];
            data.extend_from_slice(&t.data[block * r..block * (r + 1)]);
        }
    }
    DenseTensor::new(dims, data)
}

/// Full contraction of `X` with one vector per mode:
/// `sum X[i_1..i_r] v_1[i_1] .. v_r[i_r]`.
pub fn contract_vectors(x: &DenseTensor, vectors: &[&[f64]]) -> Result<f64> {
    if vectors.len() != x.order() {
        return Err(invalid(format!(
            "{} vectors supplied for an order-{} tensor",
            vectors.len(),
            x.order()
        )));
    }
    let mut t = x.clone();
    for (k, v) in vectors.iter().enumerate().rev() {
        let row = DMatrix::from_row_slice(1, v.len(), v);
        t = mode_product(&t, &row, k)?;
    }
    Ok(t.data[0])
}

/// Result of a higher-order SVD: `X = core ×_1 A_1 ×_2 .. ×_r A_r`.
#[derive(Debug, Clone)]
pub struct HosvdResult {
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
}

impl HosvdResult {
    /// Multiplies `core` by every factor in turn.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        reconstruct(&self.core, &self.factors)
    }
}

pub fn reconstruct(core: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    if factors.len() != core.order() {
        return Err(invalid(format!(
            "{} factors for an order-{} core",
            factors.len(),
            core.order()
        )));
    }
    let mut t = core.clone();
    for (k, a) in factors.iter().enumerate() {
        t = mode_product(&t, a, k)?;
    }
    Ok(t)
}
