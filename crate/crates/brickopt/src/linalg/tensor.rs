use faer::prelude::*;
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex tensor in row-major layout with explicit axis lengths.
///
/// The invariant `product(shape) == data.len()` holds for every constructed
/// value; reshapes are metadata-only and transposes copy into the new layout,
/// so contracting after a transpose equals the permuted contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dim(format!(
                "shape {:?} holds {} scalars, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dim(format!("zero-length axis in shape {:?}", shape)));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Identity matrix as a rank-2 tensor.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        t
    }

    pub fn scalar(z: Complex64) -> Self {
        Self {
            shape: vec![1],
            data: vec![z],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Row-major strides of the current shape.
    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let s = self.strides();
        let off: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.data[off]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let s = self.strides();
        let off: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.data[off] = v;
    }

    /// Metadata-only reshape; the element count must be preserved.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dim(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Copying axis permutation: axis `k` of the result is axis `perm[k]`
    /// of the input.
    pub fn transpose(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.shape.len() {
            return Err(Error::Dim(format!(
                "permutation {:?} does not match rank {}",
                perm,
                self.shape.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Dim(format!("invalid permutation {:?}", perm)));
            }
            seen[p] = true;
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = self.strides();
        let moved: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        // Walk the output in row-major order, tracking the input offset.
        let rank = new_shape.len();
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            // increment multi-index
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                src += moved[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= moved[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data: out,
        })
    }

    /// Conjugate transpose of a rank-2 tensor.
    pub fn adjoint(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Dim("adjoint requires a matrix".into()));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Self::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j].conj();
            }
        }
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * z).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dim(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        contract(self, other, &[(1, 0)])
    }

    /// Kronecker product of two matrices.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Dim("kron requires matrices".into()));
        }
        let t = contract(self, other, &[])?; // (r1,c1,r2,c2)
        let t = t.transpose(&[0, 2, 1, 3])?;
        t.reshape(&[
            self.shape[0] * other.shape[0],
            self.shape[1] * other.shape[1],
        ])
    }

    pub fn trace(&self) -> Result<Complex64> {
        if self.rank() != 2 || self.shape[0] != self.shape[1] {
            return Err(Error::Dim("trace requires a square matrix".into()));
        }
        let n = self.shape[0];
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius inner product `Tr(self^dagger other)` over raw entries.
    pub fn inner(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Largest deviation of a rank-2 tensor from unitarity.
    pub fn unitarity_error(&self) -> f64 {
        match self.adjoint().and_then(|a| a.matmul(self)) {
            Ok(g) => {
                let n = g.shape[0];
                g.max_abs_diff(&Self::identity(n))
            }
            Err(_) => f64::INFINITY,
        }
    }

    pub(crate) fn to_faer(&self) -> Result<Mat<c64>> {
        if self.rank() != 2 {
            return Err(Error::Dim(format!(
                "expected a matrix, got rank {}",
                self.rank()
            )));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        Ok(Mat::from_fn(r, c, |i, j| self.data[i * c + j]))
    }

    pub(crate) fn from_faer(m: MatRef<'_, c64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Contract `a` and `b` over the given `(axis of a, axis of b)` pairs.
///
/// Remaining axes are ordered a-then-b; an empty pair list yields the outer
/// product. Paired axes must have equal lengths.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut a_contr = Vec::with_capacity(pairs.len());
    let mut b_contr = Vec::with_capacity(pairs.len());
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Dim(format!(
                "axis pair ({ia},{ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dim(format!(
                "contracted axes differ: a[{ia}]={} vs b[{ib}]={}",
                a.shape[ia], b.shape[ib]
            )));
        }
        if a_contr.contains(&ia) || b_contr.contains(&ib) {
            return Err(Error::Dim("axis contracted twice".into()));
        }
        a_contr.push(ia);
        b_contr.push(ib);
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|i| !a_contr.contains(i)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|i| !b_contr.contains(i)).collect();

    let fa: usize = a_free.iter().map(|&i| a.shape[i]).product();
    let fb: usize = b_free.iter().map(|&i| b.shape[i]).product();
    let cd: usize = a_contr.iter().map(|&i| a.shape[i]).product();

    let mut a_perm = a_free.clone();
    a_perm.extend_from_slice(&a_contr);
    let mut b_perm = b_contr.clone();
    b_perm.extend_from_slice(&b_free);

    let am = a.transpose(&a_perm)?.reshape(&[fa, cd])?;
    let bm = b.transpose(&b_perm)?.reshape(&[cd, fb])?;
    let cm = am.to_faer()? * bm.to_faer()?;
    let mut out_shape: Vec<usize> = a_free.iter().map(|&i| a.shape[i]).collect();
    out_shape.extend(b_free.iter().map(|&i| b.shape[i]));
    if out_shape.is_empty() {
        out_shape.push(1);
    }
    DenseTensor::from_faer(cm.as_ref()).reshape(&out_shape)
}
