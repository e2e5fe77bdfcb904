//! Weyl parameterization of two-qubit gates:
//! `G = (K1 x K2) V(a,b,c) (K3 x K4)` with
//! `V = exp(i (a XX + b YY + c ZZ))` and `K_j = Rz(theta) Ry(psi) Rz(phi)`.

use num_complex::Complex64;

use super::pauli;
use crate::circuit::{BrickwallCircuit, LayerOffset};
use crate::linalg::DenseTensor;
use crate::Result;

/// 15 real parameters of one two-qubit gate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeylParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `(theta, psi, phi)` of the four single-qubit corners K1..K4.
    pub corners: [(f64, f64, f64); 4],
}

impl WeylParams {
    pub fn from_flat(x: &[f64; 15]) -> Self {
        Self {
            a: x[0],
            b: x[1],
            c: x[2],
            corners: [
                (x[3], x[4], x[5]),
                (x[6], x[7], x[8]),
                (x[9], x[10], x[11]),
                (x[12], x[13], x[14]),
            ],
        }
    }

    pub fn to_flat(self) -> [f64; 15] {
        let c = self.corners;
        [
            self.a, self.b, self.c, c[0].0, c[0].1, c[0].2, c[1].0, c[1].1, c[1].2, c[2].0, c[2].1,
            c[2].2, c[3].0, c[3].1, c[3].2,
        ]
    }
}

fn rz(theta: f64) -> DenseTensor {
    let mut m = DenseTensor::zeros(&[2, 2]);
    m.set(&[0, 0], Complex64::new(0.0, -theta / 2.0).exp());
    m.set(&[1, 1], Complex64::new(0.0, theta / 2.0).exp());
    m
}

fn ry(psi: f64) -> DenseTensor {
    let (s, c) = (psi / 2.0).sin_cos();
    let mut m = DenseTensor::zeros(&[2, 2]);
    m.set(&[0, 0], Complex64::new(c, 0.0));
    m.set(&[0, 1], Complex64::new(-s, 0.0));
    m.set(&[1, 0], Complex64::new(s, 0.0));
    m.set(&[1, 1], Complex64::new(c, 0.0));
    m
}

fn corner(angles: (f64, f64, f64)) -> DenseTensor {
    let (theta, psi, phi) = angles;
    rz(theta)
        .matmul(&ry(psi))
        .and_then(|m| m.matmul(&rz(phi)))
        .expect("2x2 products")
}

/// `exp(i (a XX + b YY + c ZZ))`; the three generators commute, so the
/// factors multiply exactly.
fn weyl_core(a: f64, b: f64, c: f64) -> DenseTensor {
    let mut v = DenseTensor::identity(4);
    for (angle, p) in [(a, 'X'), (b, 'Y'), (c, 'Z')] {
        let pp = pauli(p).kron(&pauli(p)).expect("4x4");
        // exp(i x P) = cos(x) I + i sin(x) P for P^2 = I
        let (s, co) = angle.sin_cos();
        let term = DenseTensor::identity(4)
            .scale(Complex64::new(co, 0.0))
            .add(&pp.scale(Complex64::new(0.0, s)))
            .expect("4x4");
        v = v.matmul(&term).expect("4x4");
    }
    v
}

/// Build the gate matrix from Weyl parameters.
pub fn weyl_gate(p: &WeylParams) -> Result<DenseTensor> {
    let k12 = corner(p.corners[0]).kron(&corner(p.corners[1]))?;
    let k34 = corner(p.corners[2]).kron(&corner(p.corners[3]))?;
    k12.matmul(&weyl_core(p.a, p.b, p.c))?.matmul(&k34)
}

/// All 15 partial derivatives of the gate matrix, ordered
/// `[a, b, c, (theta1, psi1, phi1), ..., (theta4, psi4, phi4)]`.
pub fn weyl_jacobian(p: &WeylParams) -> Result<Vec<DenseTensor>> {
    let ks: Vec<DenseTensor> = p.corners.iter().map(|&c| corner(c)).collect();
    let v = weyl_core(p.a, p.b, p.c);
    let k12 = ks[0].kron(&ks[1])?;
    let k34 = ks[2].kron(&ks[3])?;

    let mut out = Vec::with_capacity(15);
    for pl in ['X', 'Y', 'Z'] {
        let pp = pauli(pl).kron(&pauli(pl))?.scale(Complex64::new(0.0, 1.0));
        out.push(k12.matmul(&pp)?.matmul(&v)?.matmul(&k34)?);
    }

    // d/d(theta) = (-i/2) Z K, d/d(psi) inserts (-i/2) Y after Rz(theta),
    // d/d(phi) = K (-i/2) Z
    let half = Complex64::new(0.0, -0.5);
    for j in 0..4 {
        let (theta, psi, phi) = p.corners[j];
        let dk_theta = pauli('Z').scale(half).matmul(&ks[j])?;
        let dk_psi = rz(theta)
            .matmul(&pauli('Y').scale(half))?
            .matmul(&ry(psi))?
            .matmul(&rz(phi))?;
        let dk_phi = ks[j].matmul(&pauli('Z').scale(half))?;
        for dk in [dk_theta, dk_psi, dk_phi] {
            let grad = match j {
                0 => dk.kron(&ks[1])?.matmul(&v)?.matmul(&k34)?,
                1 => ks[0].kron(&dk)?.matmul(&v)?.matmul(&k34)?,
                2 => k12.matmul(&v)?.matmul(&dk.kron(&ks[3])?)?,
                _ => k12.matmul(&v)?.matmul(&ks[2].kron(&dk)?)?,
            };
            out.push(grad);
        }
    }
    Ok(out)
}

/// A brickwall circuit where every gate carries Weyl parameters.
#[derive(Debug, Clone)]
pub struct WeylCircuit {
    pub n_qubits: usize,
    pub layers: Vec<WeylLayer>,
}

#[derive(Debug, Clone)]
pub struct WeylLayer {
    pub offset: LayerOffset,
    pub params: Vec<WeylParams>,
}

impl WeylCircuit {
    pub fn to_circuit(&self) -> Result<BrickwallCircuit> {
        let rows = self
            .layers
            .iter()
            .map(|l| {
                let mats = l.params.iter().map(weyl_gate).collect::<Result<Vec<_>>>()?;
                Ok((l.offset, mats))
            })
            .collect::<Result<Vec<_>>>()?;
        BrickwallCircuit::from_layer_matrices(self.n_qubits, rows)
    }

    pub fn gate_params(&self, layer: usize, index: usize) -> &WeylParams {
        &self.layers[layer].params[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm_skew_or_hermitian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_params(rng: &mut ChaCha12Rng) -> WeylParams {
        let mut flat = [0.0; 15];
        for x in &mut flat {
            *x = rng.gen_range(-2.0..2.0);
        }
        WeylParams::from_flat(&flat)
    }

    #[test]
    fn zero_parameters_give_identity() {
        let g = weyl_gate(&WeylParams::default()).unwrap();
        assert!(g.max_abs_diff(&DenseTensor::identity(4)) < 1e-14);
    }

    #[test]
    fn core_matches_matrix_exponential_oracle() {
        let p = WeylParams {
            a: std::f64::consts::FRAC_PI_4,
            ..Default::default()
        };
        let g = weyl_gate(&p).unwrap();
        // exp(i pi/4 XX) via the Hermitian exponential with prefactor +i
        let xx = pauli('X').kron(&pauli('X')).unwrap();
        let want =
            expm_skew_or_hermitian(&xx, Complex64::new(0.0, std::f64::consts::FRAC_PI_4)).unwrap();
        assert!(g.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn weyl_gates_are_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(120);
        for _ in 0..20 {
            let g = weyl_gate(&random_params(&mut rng)).unwrap();
            assert!(g.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(121);
        let step = 1e-6;
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let jac = weyl_jacobian(&p).unwrap();
            let flat = p.to_flat();
            for k in 0..15 {
                let mut up = flat;
                up[k] += step;
                let mut dn = flat;
                dn[k] -= step;
                let gu = weyl_gate(&WeylParams::from_flat(&up)).unwrap();
                let gd = weyl_gate(&WeylParams::from_flat(&dn)).unwrap();
                let fd = gu.sub(&gd).unwrap().scale(Complex64::new(0.5 / step, 0.0));
                let err = fd.max_abs_diff(&jac[k]);
                assert!(err < 1e-6, "parameter {k}: finite-difference gap {err}");
            }
        }
    }
}
