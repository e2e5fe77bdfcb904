//! Dense complex linear algebra: tensors with explicit axis semantics,
//! contraction, and the matrix factorizations the rest of the crate is
//! built on.

mod decomp;
mod tensor;

pub use decomp::{
    expm_skew_or_hermitian, polar_unitary_factor, qr_isometry, rq_isometry, svd_truncate,
    TruncatedSvd,
};
pub use tensor::{contract, DenseTensor};

use num_complex::Complex64;
use rand::Rng;

/// Pin the dense-kernel backend to sequential execution. Worth calling when
/// the application parallelizes at the run level (or measures wall time);
/// the matrices here are small enough that threaded kernels rarely help.
pub fn set_sequential_backend() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Draw a Haar-ish random unitary by orthonormalizing a complex Gaussian
/// matrix. Good enough for tests and random circuit initialization.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DenseTensor {
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        // Box-Muller from two uniforms; exact Gaussianity is irrelevant here.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        data.push(Complex64::new(r * c, r * s));
    }
    let m = DenseTensor::from_data(&[n, n], data).expect("shape consistent");
    polar_unitary_factor(&m).expect("full-rank with probability one")
}
