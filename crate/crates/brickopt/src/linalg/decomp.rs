use faer::prelude::*;
use num_complex::Complex64;

use super::DenseTensor;
use crate::{Error, Result};

/// Truncated singular value decomposition `m ~= U diag(s) V^dagger`.
///
/// `left_isometry` is `U` (orthonormal columns), `right_factor` is `V^dagger`
/// (orthonormal rows), `singular_values` are sorted descending and
/// `discarded_weight` is the sum of squares of the dropped values, so the
/// Frobenius reconstruction error equals `sqrt(discarded_weight)`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left_isometry: DenseTensor,
    pub singular_values: Vec<f64>,
    pub right_factor: DenseTensor,
    pub discarded_weight: f64,
}

impl TruncatedSvd {
    /// Number of retained singular triplets.
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U diag(s) V^dagger` from the retained triplets.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let mut us = self.left_isometry.clone();
        let (r, k) = (us.shape()[0], us.shape()[1]);
        for i in 0..r {
            for j in 0..k {
                let v = us.get(&[i, j]) * self.singular_values[j];
                us.set(&[i, j], v);
            }
        }
        us.matmul(&self.right_factor)
    }

    /// `diag(s) V^dagger`, the weighted right factor used by MPO splits.
    pub fn weighted_right(&self) -> DenseTensor {
        let mut sv = self.right_factor.clone();
        let (k, c) = (sv.shape()[0], sv.shape()[1]);
        for i in 0..k {
            for j in 0..c {
                let v = sv.get(&[i, j]) * self.singular_values[i];
                sv.set(&[i, j], v);
            }
        }
        sv
    }
}

/// SVD of a matrix keeping at most `chi_max` singular triplets.
pub fn svd_truncate(m: &DenseTensor, chi_max: usize) -> Result<TruncatedSvd> {
    if chi_max < 1 {
        return Err(Error::Param("chi_max must be at least 1".into()));
    }
    if m.rank() != 2 {
        return Err(Error::Dim(format!(
            "svd_truncate expects a matrix, got rank {}",
            m.rank()
        )));
    }
    let a = m.to_faer()?;
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s = svd.S();
    let full = s.dim();
    // numerically-zero tail values carry no weight; dropping them keeps
    // bond dimensions at the true rank
    let cutoff = s[0].re * 1e-14;
    let mut rank = full;
    while rank > 1 && s[rank - 1].re <= cutoff {
        rank -= 1;
    }
    let keep = chi_max.min(rank);
    let mut singular_values = Vec::with_capacity(keep);
    for i in 0..keep {
        singular_values.push(s[i].re);
    }
    let mut discarded_weight = 0.0;
    for i in keep..full {
        let v = s[i].re;
        discarded_weight += v * v;
    }
    let u = svd.U();
    let v = svd.V();
    let rows = u.nrows();
    let cols = v.nrows();
    let mut u_data = Vec::with_capacity(rows * keep);
    for i in 0..rows {
        for j in 0..keep {
            u_data.push(u[(i, j)]);
        }
    }
    let mut vh_data = Vec::with_capacity(keep * cols);
    for i in 0..keep {
        for j in 0..cols {
            vh_data.push(v[(j, i)].conj());
        }
    }
    Ok(TruncatedSvd {
        left_isometry: DenseTensor::from_data(&[rows, keep], u_data)?,
        singular_values,
        right_factor: DenseTensor::from_data(&[keep, cols], vh_data)?,
        discarded_weight,
    })
}

/// Thin QR: `m = Q R` with orthonormal columns in `Q`.
pub fn qr_isometry(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let a = m.to_faer()?;
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    Ok((
        DenseTensor::from_faer(q.as_ref()),
        DenseTensor::from_faer(r.as_ref()),
    ))
}

/// Thin RQ-style split: `m = R Q` with orthonormal rows in `Q`.
///
/// Implemented as the adjoint of a QR of `m^dagger`; `R` is triangular up to
/// that identification, which is all the canonical-form sweeps need.
pub fn rq_isometry(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let (q, r) = qr_isometry(&m.adjoint()?)?;
    Ok((r.adjoint()?, q.adjoint()?))
}

/// Unitary polar factor of a square matrix.
///
/// Computed as `U V^dagger` from the SVD, which coincides with the polar
/// factor for full-rank input and deterministically completes rank-deficient
/// input (the continuous limit), so near-singular gradients at optima do not
/// error out.
pub fn polar_unitary_factor(m: &DenseTensor) -> Result<DenseTensor> {
    if m.rank() != 2 || m.shape()[0] != m.shape()[1] {
        return Err(Error::Dim("polar factor requires a square matrix".into()));
    }
    let n = m.shape()[0];
    // full SVD here: the null-space columns are exactly what completes a
    // rank-deficient input to a unitary
    let a = m.to_faer()?;
    let svd = a
        .svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let mut out = Mat::<c64>::zeros(n, n);
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        u,
        v.adjoint(),
        c64::new(1.0, 0.0),
        faer::get_global_parallelism(),
    );
    Ok(DenseTensor::from_faer(out.as_ref()))
}

/// `exp(prefactor * h)` for Hermitian `h` via eigendecomposition.
///
/// With a purely imaginary prefactor the result is unitary.
pub fn expm_skew_or_hermitian(h: &DenseTensor, prefactor: Complex64) -> Result<DenseTensor> {
    if h.rank() != 2 || h.shape()[0] != h.shape()[1] {
        return Err(Error::Dim("expm requires a square matrix".into()));
    }
    let n = h.shape()[0];
    let herm_err = h.max_abs_diff(&h.adjoint()?);
    let scale = h.max_abs().max(1.0);
    if herm_err > 1e-10 * scale {
        return Err(Error::Param(format!(
            "matrix is not Hermitian (asymmetry {herm_err:.2e})"
        )));
    }
    let a = h.to_faer()?;
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let mut out = Mat::<c64>::zeros(n, n);
    // U exp(prefactor * diag) U^dagger
    let mut scaled = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        let e = (prefactor * s[j].re).exp();
        for i in 0..n {
            scaled[(i, j)] = u[(i, j)] * e;
        }
    }
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        scaled.as_ref(),
        u.adjoint(),
        c64::new(1.0, 0.0),
        faer::get_global_parallelism(),
    );
    Ok(DenseTensor::from_faer(out.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unitary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rand_matrix(r: usize, c: usize, rng: &mut ChaCha12Rng) -> DenseTensor {
        let data = (0..r * c)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseTensor::from_data(&[r, c], data).unwrap()
    }

    #[test]
    fn svd_rank_one_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let u = rand_matrix(5, 1, &mut rng);
        let v = rand_matrix(1, 4, &mut rng);
        let m = u.matmul(&v).unwrap();
        let svd = svd_truncate(&m, 1).unwrap();
        assert!(svd.discarded_weight < 1e-24);
        assert!(svd.reconstruct().unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn svd_identity_truncation_weight() {
        let m = DenseTensor::identity(4);
        let svd = svd_truncate(&m, 2).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!((svd.singular_values[0] - 1.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-12);
        assert!((svd.discarded_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let m = rand_matrix(8, 8, &mut rng);
        let svd = svd_truncate(&m, 8).unwrap();
        let err = svd.reconstruct().unwrap().sub(&m).unwrap().frobenius_norm();
        assert!(err < 1e-12, "reconstruction error {err}");
        // values sorted descending
        for w in svd.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // isometry conditions
        let utu = svd
            .left_isometry
            .adjoint()
            .unwrap()
            .matmul(&svd.left_isometry)
            .unwrap();
        assert!(utu.max_abs_diff(&DenseTensor::identity(8)) < 1e-12);
    }

    #[test]
    fn svd_truncation_error_matches_discarded_weight() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let m = rand_matrix(10, 7, &mut rng);
        let svd = svd_truncate(&m, 3).unwrap();
        let err = svd.reconstruct().unwrap().sub(&m).unwrap().frobenius_norm();
        assert!((err - svd.discarded_weight.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn svd_rejects_bad_chi() {
        let m = DenseTensor::identity(2);
        assert!(matches!(svd_truncate(&m, 0), Err(Error::Param(_))));
    }

    #[test]
    fn qr_reconstruction_and_isometry() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let m = rand_matrix(6, 4, &mut rng);
        let (q, r) = qr_isometry(&m).unwrap();
        assert!(q.matmul(&r).unwrap().max_abs_diff(&m) < 1e-12);
        let qtq = q.adjoint().unwrap().matmul(&q).unwrap();
        assert!(qtq.max_abs_diff(&DenseTensor::identity(4)) < 1e-12);
    }

    #[test]
    fn qr_of_isometry_gives_phase_diagonal_r() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let u = random_unitary(5, &mut rng);
        let (q, r) = qr_isometry(&u).unwrap();
        assert!(q.matmul(&r).unwrap().max_abs_diff(&u) < 1e-12);
        for i in 0..5 {
            for j in 0..5 {
                let v = r.get(&[i, j]).norm();
                if i == j {
                    assert!((v - 1.0).abs() < 1e-10, "diagonal not unimodular: {v}");
                } else {
                    assert!(v < 1e-10, "off-diagonal R entry {v}");
                }
            }
        }
    }

    #[test]
    fn qr_of_zero_matrix_still_reconstructs() {
        let m = DenseTensor::zeros(&[3, 3]);
        let (q, r) = qr_isometry(&m).unwrap();
        assert!(r.max_abs() < 1e-14);
        assert!(q.matmul(&r).unwrap().max_abs() < 1e-14);
        let qtq = q.adjoint().unwrap().matmul(&q).unwrap();
        assert!(qtq.max_abs_diff(&DenseTensor::identity(3)) < 1e-12);
    }

    #[test]
    fn rq_reconstruction_and_row_isometry() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        let m = rand_matrix(4, 7, &mut rng);
        let (r, q) = rq_isometry(&m).unwrap();
        assert!(r.matmul(&q).unwrap().max_abs_diff(&m) < 1e-12);
        let qqt = q.matmul(&q.adjoint().unwrap()).unwrap();
        assert!(qqt.max_abs_diff(&DenseTensor::identity(4)) < 1e-12);
    }

    #[test]
    fn qr_then_rq_round_trips() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let m = rand_matrix(6, 6, &mut rng);
        let (q, r) = qr_isometry(&m).unwrap();
        let (r2, q2) = rq_isometry(&q.matmul(&r).unwrap()).unwrap();
        assert!(r2.matmul(&q2).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn polar_of_unitary_is_identity_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(28);
        let u = random_unitary(4, &mut rng);
        let p = polar_unitary_factor(&u).unwrap();
        assert!(p.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn polar_strips_positive_scaling() {
        let m = DenseTensor::identity(4).scale(Complex64::new(2.0, 0.0));
        let p = polar_unitary_factor(&m).unwrap();
        assert!(p.max_abs_diff(&DenseTensor::identity(4)) < 1e-12);
    }

    #[test]
    fn polar_matches_eigendecomposition_oracle() {
        // oracle: U = m (m^dagger m)^(-1/2) via Hermitian eigendecomposition
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let m = rand_matrix(4, 4, &mut rng);
        let mtm = m.adjoint().unwrap().matmul(&m).unwrap();
        let a = mtm.to_faer().unwrap();
        let evd = a.self_adjoint_eigen(faer::Side::Lower).unwrap();
        let u = evd.U();
        let s = evd.S();
        let mut inv_sqrt = Mat::<c64>::zeros(4, 4);
        for j in 0..4 {
            let e = c64::new(1.0 / s[j].re.sqrt(), 0.0);
            for i in 0..4 {
                inv_sqrt[(i, j)] = u[(i, j)] * e;
            }
        }
        let inv_sqrt = &inv_sqrt * u.adjoint();
        let oracle = m
            .matmul(&DenseTensor::from_faer(inv_sqrt.as_ref()))
            .unwrap();
        let p = polar_unitary_factor(&m).unwrap();
        assert!(p.max_abs_diff(&oracle) < 1e-10);
        assert!(p.unitarity_error() < 1e-12);
    }

    #[test]
    fn polar_is_always_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        for _ in 0..20 {
            let m = rand_matrix(4, 4, &mut rng);
            assert!(polar_unitary_factor(&m).unwrap().unitarity_error() < 1e-12);
        }
        // rank-deficient input takes the SVD completion instead of erroring
        let mut low = DenseTensor::zeros(&[4, 4]);
        low.set(&[0, 0], Complex64::new(3.0, 0.0));
        assert!(polar_unitary_factor(&low).unwrap().unitarity_error() < 1e-12);
    }

    #[test]
    fn expm_zero_is_identity() {
        let h = DenseTensor::zeros(&[3, 3]);
        let e = expm_skew_or_hermitian(&h, Complex64::new(0.0, -1.0)).unwrap();
        assert!(e.max_abs_diff(&DenseTensor::identity(3)) < 1e-14);
    }

    #[test]
    fn expm_pauli_z_is_diagonal_phase() {
        let z = DenseTensor::from_data(
            &[2, 2],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        )
        .unwrap();
        let t = 0.37;
        let e = expm_skew_or_hermitian(&z, Complex64::new(0.0, -t)).unwrap();
        assert!((e.get(&[0, 0]) - Complex64::new(0.0, -t).exp()).norm() < 1e-13);
        assert!((e.get(&[1, 1]) - Complex64::new(0.0, t).exp()).norm() < 1e-13);
        assert!(e.get(&[0, 1]).norm() < 1e-14);
    }

    #[test]
    fn expm_of_random_hermitian_is_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let m = rand_matrix(8, 8, &mut rng);
        let h = m.add(&m.adjoint().unwrap()).unwrap();
        let t = 0.83;
        let e = expm_skew_or_hermitian(&h, Complex64::new(0.0, -t)).unwrap();
        let einv = expm_skew_or_hermitian(&h, Complex64::new(0.0, t)).unwrap();
        let prod = e.matmul(&einv).unwrap();
        assert!(prod.max_abs_diff(&DenseTensor::identity(8)) < 1e-12);
        assert!(e.unitarity_error() < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let m = rand_matrix(3, 3, &mut rng);
        assert!(matches!(
            expm_skew_or_hermitian(&m, Complex64::new(0.0, -1.0)),
            Err(Error::Param(_))
        ));
    }
}
