//! Matrix product operators: canonical forms, dense conversion, compression
//! and merging of brickwall layers.

mod merge;
mod serial;

pub use merge::{merge_layer, MergeReport, MergeSide, SweepDir};
pub use serial::{read_mpo, write_mpo};

use num_complex::Complex64;

use crate::linalg::{contract, qr_isometry, rq_isometry, svd_truncate, DenseTensor};
use crate::{Error, Result};

/// Physical dimension per site (qubits).
pub const PHYS_DIM: usize = 2;

/// Gauge marker for an MPO.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalForm {
    None,
    /// Every tensor except the last is a left-isometry; the last carries the
    /// operator norm (canonical center at the last site).
    Left,
    /// Mirror image: center at the first site.
    Right,
    /// Center at the given site; tensors strictly left of it are
    /// left-isometries, tensors strictly right of it right-isometries.
    Mixed(usize),
}

/// Operator on `n` qubits as a chain of rank-4 tensors with axes
/// `(left bond, physical out, physical in, right bond)`.
#[derive(Debug, Clone)]
pub struct Mpo {
    tensors: Vec<DenseTensor>,
    canonical: CanonicalForm,
}

impl Mpo {
    pub fn new(tensors: Vec<DenseTensor>, canonical: CanonicalForm) -> Result<Self> {
        if tensors.len() < 2 {
            return Err(Error::Param("an MPO needs at least 2 sites".into()));
        }
        for (k, t) in tensors.iter().enumerate() {
            if t.rank() != 4 || t.shape()[1] != PHYS_DIM || t.shape()[2] != PHYS_DIM {
                return Err(Error::Dim(format!(
                    "site {k}: expected (left, {PHYS_DIM}, {PHYS_DIM}, right), got {:?}",
                    t.shape()
                )));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[3] != 1 {
            return Err(Error::Dim("boundary bonds must have dimension 1".into()));
        }
        for k in 0..tensors.len() - 1 {
            if tensors[k].shape()[3] != tensors[k + 1].shape()[0] {
                return Err(Error::Dim(format!(
                    "bond mismatch between sites {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(Self { tensors, canonical })
    }

    /// Identity operator with bond dimension 1 everywhere.
    pub fn identity(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Param("identity MPO needs at least 2 sites".into()));
        }
        let site = DenseTensor::identity(PHYS_DIM)
            .reshape(&[1, PHYS_DIM, PHYS_DIM, 1])
            .expect("2x2 fits");
        Ok(Self {
            tensors: vec![site; n_sites],
            canonical: CanonicalForm::None,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, k: usize) -> &DenseTensor {
        &self.tensors[k]
    }

    pub fn canonical_form(&self) -> CanonicalForm {
        self.canonical
    }

    /// Interior bond dimensions (between sites k and k+1).
    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.tensors.len() - 1)
            .map(|k| self.tensors[k].shape()[3])
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Conjugate the operator: swaps physical legs and conjugates entries.
    /// Canonical form is preserved by this transformation.
    pub fn adjoint(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| t.transpose(&[0, 2, 1, 3]).expect("rank 4").conj())
            .collect();
        Self {
            tensors,
            canonical: self.canonical,
        }
    }

    /// Dense matrix of the operator; guarded to 12 sites.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let n = self.n_sites();
        if n > 12 {
            return Err(Error::ResourceGuard(format!(
                "dense conversion of a {n}-site MPO exceeds the N <= 12 guard"
            )));
        }
        // running tensor with axes (rows so far, cols so far, bond)
        let mut v = DenseTensor::from_data(&[1, 1, 1], vec![Complex64::new(1.0, 0.0)])?;
        for t in &self.tensors {
            let r = v.shape()[0];
            let c = v.shape()[1];
            let step = contract(&v, t, &[(2, 0)])?; // (r, c, o, i, b')
            let step = step.transpose(&[0, 2, 1, 3, 4])?;
            let b = step.shape()[4];
            v = step.reshape(&[r * PHYS_DIM, c * PHYS_DIM, b])?;
        }
        let d = v.shape()[0];
        v.reshape(&[d, d])
    }

    /// Decompose a `2^n x 2^n` matrix into an MPO, truncating each bond to
    /// `chi_max` via successive SVDs. The result is left-canonical.
    pub fn from_dense(u: &DenseTensor, chi_max: usize, n_sites: usize) -> Result<Self> {
        Ok(Self::from_dense_with_weight(u, chi_max, n_sites)?.0)
    }

    /// `from_dense` also reporting the total discarded singular weight.
    pub fn from_dense_with_weight(
        u: &DenseTensor,
        chi_max: usize,
        n_sites: usize,
    ) -> Result<(Self, f64)> {
        if chi_max < 1 {
            return Err(Error::Param("chi_max must be at least 1".into()));
        }
        if n_sites < 2 {
            return Err(Error::Param("an MPO needs at least 2 sites".into()));
        }
        let d = 1usize << n_sites;
        if u.shape() != [d, d] {
            return Err(Error::Dim(format!(
                "expected a {d}x{d} matrix for {n_sites} sites, got {:?}",
                u.shape()
            )));
        }
        // split row/col indices into per-site bits and interleave them
        let bits = vec![PHYS_DIM; 2 * n_sites];
        let t = u.reshape(&bits)?;
        let mut perm = Vec::with_capacity(2 * n_sites);
        for k in 0..n_sites {
            perm.push(k); // out bit of site k
            perm.push(n_sites + k); // in bit of site k
        }
        let t = t.transpose(&perm)?;
        let mut rest = t.reshape(&[1, 4usize.pow(n_sites as u32)])?;
        let mut tensors = Vec::with_capacity(n_sites);
        let mut discarded = 0.0;
        for _ in 0..n_sites - 1 {
            let chi_l = rest.shape()[0];
            let tail = rest.shape()[1] / 4;
            let m = rest.reshape(&[chi_l * 4, tail])?;
            let svd = svd_truncate(&m, chi_max)?;
            discarded += svd.discarded_weight;
            let s = svd.rank();
            tensors.push(svd.left_isometry.reshape(&[chi_l, PHYS_DIM, PHYS_DIM, s])?);
            rest = svd.weighted_right();
        }
        let chi_l = rest.shape()[0];
        tensors.push(rest.reshape(&[chi_l, PHYS_DIM, PHYS_DIM, 1])?);
        Ok((
            Self {
                tensors,
                canonical: CanonicalForm::Left,
            },
            discarded,
        ))
    }

    /// Bring the MPO into left- or right-canonical form by a QR/RQ sweep.
    /// The dense operator is preserved.
    pub fn canonicalize(&self, form: CanonicalForm) -> Result<Self> {
        let n = self.n_sites();
        let mut tensors = self.tensors.clone();
        match form {
            CanonicalForm::Left => {
                for k in 0..n - 1 {
                    let sh = tensors[k].shape().to_vec();
                    let m = tensors[k].reshape(&[sh[0] * 4, sh[3]])?;
                    let (q, r) = qr_isometry(&m)?;
                    let s = q.shape()[1];
                    tensors[k] = q.reshape(&[sh[0], PHYS_DIM, PHYS_DIM, s])?;
                    tensors[k + 1] = contract(&r, &tensors[k + 1], &[(1, 0)])?;
                }
            }
            CanonicalForm::Right => {
                for k in (1..n).rev() {
                    let sh = tensors[k].shape().to_vec();
                    let m = tensors[k].reshape(&[sh[0], 4 * sh[3]])?;
                    let (r, q) = rq_isometry(&m)?;
                    let s = q.shape()[0];
                    tensors[k] = q.reshape(&[s, PHYS_DIM, PHYS_DIM, sh[3]])?;
                    tensors[k - 1] = contract(&tensors[k - 1], &r, &[(3, 0)])?;
                }
            }
            _ => {
                return Err(Error::Param(
                    "canonicalize targets the left or right form".into(),
                ))
            }
        }
        Ok(Self {
            tensors,
            canonical: form,
        })
    }

    /// Worst isometry violation of the claimed canonical form.
    pub fn canonical_error(&self) -> f64 {
        let n = self.n_sites();
        let check_left = |t: &DenseTensor| -> f64 {
            let sh = t.shape();
            let m = t.reshape(&[sh[0] * 4, sh[3]]).expect("rank 4");
            let g = m.adjoint().unwrap().matmul(&m).unwrap();
            g.max_abs_diff(&DenseTensor::identity(sh[3]))
        };
        let check_right = |t: &DenseTensor| -> f64 {
            let sh = t.shape();
            let m = t.reshape(&[sh[0], 4 * sh[3]]).expect("rank 4");
            let g = m.matmul(&m.adjoint().unwrap()).unwrap();
            g.max_abs_diff(&DenseTensor::identity(sh[0]))
        };
        let mut worst: f64 = 0.0;
        match self.canonical {
            CanonicalForm::None => {}
            CanonicalForm::Left => {
                for t in &self.tensors[..n - 1] {
                    worst = worst.max(check_left(t));
                }
            }
            CanonicalForm::Right => {
                for t in &self.tensors[1..] {
                    worst = worst.max(check_right(t));
                }
            }
            CanonicalForm::Mixed(c) => {
                for t in &self.tensors[..c.min(n)] {
                    worst = worst.max(check_left(t));
                }
                if c + 1 < n {
                    for t in &self.tensors[c + 1..] {
                        worst = worst.max(check_right(t));
                    }
                }
            }
        }
        worst
    }

    /// Truncate every interior bond to at most `chi` with an SVD sweep in
    /// mixed-canonical form (the center rides along with the cut bond).
    /// Returns the truncated MPO (right-canonical) and the discarded weight.
    pub fn truncate_bonds(&self, chi: usize) -> Result<(Self, f64)> {
        if chi < 1 {
            return Err(Error::Param("chi must be at least 1".into()));
        }
        let base = match self.canonical {
            CanonicalForm::Left => self.clone(),
            _ => self.canonicalize(CanonicalForm::Left)?,
        };
        let n = base.n_sites();
        let mut tensors = base.tensors;
        let mut discarded = 0.0;
        for k in (1..n).rev() {
            let sh = tensors[k].shape().to_vec();
            let m = tensors[k].reshape(&[sh[0], 4 * sh[3]])?;
            let svd = svd_truncate(&m, chi)?;
            discarded += svd.discarded_weight;
            let s = svd.rank();
            tensors[k] = svd.right_factor.reshape(&[s, PHYS_DIM, PHYS_DIM, sh[3]])?;
            // fold U * diag(s) into the neighbor; the center moves left
            let mut us = svd.left_isometry;
            for i in 0..us.shape()[0] {
                for j in 0..s {
                    let v = us.get(&[i, j]) * svd.singular_values[j];
                    us.set(&[i, j], v);
                }
            }
            tensors[k - 1] = contract(&tensors[k - 1], &us, &[(3, 0)])?;
        }
        Ok((
            Self {
                tensors,
                canonical: CanonicalForm::Right,
            },
            discarded,
        ))
    }

    /// Compress to the smallest bond dimension whose truncation stays within
    /// `eps_thres` of `self` in the Hilbert-Schmidt cost. Returns the
    /// compressed MPO and the bond dimension actually reached.
    pub fn compress_to_threshold(&self, eps_thres: f64) -> Result<(Self, usize)> {
        if eps_thres <= 0.0 {
            return Err(Error::Param("eps_thres must be positive".into()));
        }
        let base = self.canonicalize(CanonicalForm::Left)?;
        let chi_hi = base.max_bond();
        let try_chi = |chi: usize| -> Result<(Self, f64)> {
            let (cand, _) = base.truncate_bonds(chi)?;
            let cost = hs_cost(self, &cand)?;
            Ok((cand, cost))
        };
        let (cand, cost) = try_chi(1)?;
        if cost <= eps_thres {
            let chi = cand.max_bond();
            return Ok((cand, chi));
        }
        // smallest chi in (lo, hi] with cost <= eps; truncation cost is
        // monotone non-increasing in chi, so bisection applies
        let mut lo = 1usize; // known bad
        let mut hi = chi_hi; // known good (truncation is a no-op there)
        let mut best: Option<Self> = None;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let (cand, cost) = try_chi(mid)?;
            if cost <= eps_thres {
                hi = mid;
                best = Some(cand);
            } else {
                lo = mid;
            }
        }
        let result = match best {
            Some(m) => m,
            None => try_chi(hi)?.0,
        };
        let chi = result.max_bond();
        Ok((result, chi))
    }

    /// `Tr(M)` by chaining the physical-trace transfer matrices.
    pub fn trace(&self) -> Result<Complex64> {
        let mut v = DenseTensor::from_data(&[1], vec![Complex64::new(1.0, 0.0)])?;
        for t in &self.tensors {
            let sh = t.shape();
            let mut tr = DenseTensor::zeros(&[sh[0], sh[3]]);
            for l in 0..sh[0] {
                for r in 0..sh[3] {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for o in 0..PHYS_DIM {
                        acc += t.get(&[l, o, o, r]);
                    }
                    tr.set(&[l, r], acc);
                }
            }
            v = contract(&v, &tr, &[(0, 0)])?;
        }
        Ok(v.data()[0])
    }

    /// `Tr(a^dagger b)` via a single zipper contraction.
    pub fn overlap(a: &Mpo, b: &Mpo) -> Result<Complex64> {
        if a.n_sites() != b.n_sites() {
            return Err(Error::Param(format!(
                "site counts differ: {} vs {}",
                a.n_sites(),
                b.n_sites()
            )));
        }
        let mut v = DenseTensor::from_data(&[1, 1], vec![Complex64::new(1.0, 0.0)])?;
        for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
            let ca = ta.conj();
            // v[al, bl] * conj(a)[al, o, i, ar] -> (bl, o, i, ar)
            let step = contract(&v, &ca, &[(0, 0)])?;
            // ... * b[bl, o, i, br] -> (ar, br)
            v = contract(&step, tb, &[(0, 0), (1, 1), (2, 2)])?;
        }
        Ok(v.data()[0])
    }
}

/// Hilbert-Schmidt cost `1 - |Tr(a^dagger b)|^2 / d^2` between two MPOs.
///
/// For operators of unitary Frobenius scale the value lies in `[0, 1]` up to
/// arithmetic noise; the bound does not apply to arbitrarily scaled inputs.
pub fn hs_cost(a: &Mpo, b: &Mpo) -> Result<f64> {
    let t = Mpo::overlap(a, b)?;
    let d = (1u64 << a.n_sites()) as f64;
    let cost = 1.0 - t.norm_sqr() / (d * d);
    if !cost.is_finite() {
        return Err(Error::Numerical("non-finite Hilbert-Schmidt cost".into()));
    }
    Ok(cost)
}

#[cfg(test)]
pub mod tests_support {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Random MPO with the given interior bond dimension (clamped at the
    /// boundaries), rescaled to unitary Frobenius norm `sqrt(d)` and
    /// right-canonicalized so merges can consume it directly.
    pub fn random_mpo(n_sites: usize, chi: usize, seed: u64) -> Mpo {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut dims = vec![1usize];
        for k in 1..n_sites {
            let cap = 4usize.pow(k.min(n_sites - k) as u32);
            dims.push(chi.min(cap));
        }
        dims.push(1);
        let mut tensors: Vec<DenseTensor> = (0..n_sites)
            .map(|k| {
                let shape = [dims[k], PHYS_DIM, PHYS_DIM, dims[k + 1]];
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                DenseTensor::from_data(&shape, data).unwrap()
            })
            .collect();
        let m = Mpo::new(tensors.clone(), CanonicalForm::None).unwrap();
        let norm_sq = Mpo::overlap(&m, &m).unwrap().re;
        let d = (1u64 << n_sites) as f64;
        let per_site = (d / norm_sq).powf(0.5 / n_sites as f64);
        for t in &mut tensors {
            *t = t.scale(Complex64::new(per_site, 0.0));
        }
        Mpo::new(tensors, CanonicalForm::None)
            .unwrap()
            .canonicalize(CanonicalForm::Right)
            .unwrap()
    }
}
