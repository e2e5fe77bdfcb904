//! Two-qubit gate constructors for the supported models.

use num_complex::Complex64;

use super::pauli;
use crate::linalg::{expm_skew_or_hermitian, DenseTensor};
use crate::Result;

fn two_site(a: char, b: char) -> DenseTensor {
    pauli(a).kron(&pauli(b)).expect("2x2 kron")
}

/// Ising bond gate `exp(-i dt (J ZZ + g1/2 XI + g2/2 IX + h1/2 ZI + h2/2 IZ))`.
///
/// Interior bonds use `g1 = g2 = g`; a bond touching the first (last) qubit
/// doubles `g1`/`h1` (`g2`/`h2`) so the open-boundary fields are not halved.
pub fn ising_gate(j: f64, g1: f64, g2: f64, h1: f64, h2: f64, dt: f64) -> Result<DenseTensor> {
    let mut h = two_site('Z', 'Z').scale(Complex64::new(j, 0.0));
    h = h.add(&two_site('X', 'I').scale(Complex64::new(0.5 * g1, 0.0)))?;
    h = h.add(&two_site('I', 'X').scale(Complex64::new(0.5 * g2, 0.0)))?;
    h = h.add(&two_site('Z', 'I').scale(Complex64::new(0.5 * h1, 0.0)))?;
    h = h.add(&two_site('I', 'Z').scale(Complex64::new(0.5 * h2, 0.0)))?;
    expm_skew_or_hermitian(&h, Complex64::new(0.0, -dt))
}

/// Heisenberg bond gate
/// `exp(-i dt (h1/2 XI + h2/2 IX + sum_alpha J^alpha s^alpha s^alpha))`.
pub fn heisenberg_gate(j: [f64; 3], h1: f64, h2: f64, dt: f64) -> Result<DenseTensor> {
    let mut h = two_site('X', 'I').scale(Complex64::new(0.5 * h1, 0.0));
    h = h.add(&two_site('I', 'X').scale(Complex64::new(0.5 * h2, 0.0)))?;
    for (alpha, p) in ['X', 'Y', 'Z'].into_iter().enumerate() {
        h = h.add(&two_site(p, p).scale(Complex64::new(j[alpha], 0.0)))?;
    }
    expm_skew_or_hermitian(&h, Complex64::new(0.0, -dt))
}

/// Fermionic swap of two adjacent Jordan-Wigner modes.
pub fn fswap() -> DenseTensor {
    let z = |re: f64| Complex64::new(re, 0.0);
    let o = Complex64::new(0.0, 0.0);
    DenseTensor::from_data(
        &[4, 4],
        vec![
            z(1.0),
            o,
            o,
            o,
            o,
            o,
            z(1.0),
            o,
            o,
            z(1.0),
            o,
            o,
            o,
            o,
            o,
            z(-1.0),
        ],
    )
    .expect("4x4")
}

/// Hopping gate between adjacent modes for the Fermi-Hubbard chain:
/// evolution of `-T (a^dag a + h.c.)` over `dt`.
pub fn fh_kinetic_gate(t_hop: f64, dt: f64) -> DenseTensor {
    let theta = t_hop * dt;
    let (s, c) = theta.sin_cos();
    let mut m = DenseTensor::identity(4);
    m.set(&[1, 1], Complex64::new(c, 0.0));
    m.set(&[1, 2], Complex64::new(0.0, s));
    m.set(&[2, 1], Complex64::new(0.0, s));
    m.set(&[2, 2], Complex64::new(c, 0.0));
    m
}

/// On-site interaction combined with a fermionic swap: phase `e^{-i V dt}`
/// on the doubly occupied state, modes exchanged.
pub fn fh_interaction_swap_gate(v: f64, dt: f64) -> DenseTensor {
    let mut m = fswap();
    let phase = Complex64::new(0.0, -v * dt).exp();
    m.set(&[3, 3], -phase);
    m
}

/// Joint kinetic + diagonal-interaction + fermionic-swap gate of the
/// molecular swap network.
pub fn fsim_gate(t_pq: f64, v_pq: f64, dt: f64) -> DenseTensor {
    let theta = t_pq * dt;
    let (s, c) = theta.sin_cos();
    let mut m = DenseTensor::zeros(&[4, 4]);
    m.set(&[0, 0], Complex64::new(1.0, 0.0));
    m.set(&[1, 1], Complex64::new(0.0, -s));
    m.set(&[1, 2], Complex64::new(c, 0.0));
    m.set(&[2, 1], Complex64::new(c, 0.0));
    m.set(&[2, 2], Complex64::new(0.0, -s));
    m.set(&[3, 3], -Complex64::new(0.0, -v_pq * dt).exp());
    m
}
