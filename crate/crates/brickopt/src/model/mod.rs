//! Hamiltonian families, Trotter-step construction, fermionic swap networks,
//! Weyl parameterization and double factorization.

mod df;
mod gates;
mod init;
mod trotter;
mod weyl;

pub use df::{double_factorize, read_integrals, write_integrals, DoubleFactorization};
pub use gates::{
    fh_interaction_swap_gate, fh_kinetic_gate, fsim_gate, fswap, heisenberg_gate, ising_gate,
};
pub use init::initialize_circuit;
pub use trotter::{fermi_hubbard_swap_network_step, layer_count, trotter_circuit, trotter_step};
pub use weyl::{weyl_gate, weyl_jacobian, WeylCircuit, WeylLayer, WeylParams};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::linalg::DenseTensor;
use crate::{Error, Result};

/// Name of the RNG used for disorder sampling, recorded in run outputs.
pub const DISORDER_RNG: &str = "chacha12";

/// Spin sector of a Fermi-Hubbard spin orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// The Hamiltonian families the toolkit knows how to Trotterize.
///
/// All chains are open-boundary. For the Fermi-Hubbard model `n_sites`
/// counts spin orbitals (qubits), for the molecular family orbitals.
#[derive(Debug, Clone)]
pub enum HamiltonianSpec {
    Ising {
        n_sites: usize,
        j: f64,
        g: f64,
        h: f64,
    },
    IsingDisordered {
        n_sites: usize,
        /// Bond couplings, length `n_sites - 1`.
        j: Vec<f64>,
        /// Transverse fields, length `n_sites`.
        g: Vec<f64>,
        /// Longitudinal fields, length `n_sites`.
        h: Vec<f64>,
    },
    Heisenberg {
        n_sites: usize,
        j: [f64; 3],
        h: [f64; 3],
    },
    FermiHubbard {
        n_spin_orbitals: usize,
        t_hop: f64,
        v_int: f64,
    },
    /// One diagonal molecular term: `sum T_ij a_i^dag a_j + 1/2 sum_{p!=q}
    /// V_pq n_p n_q` with real symmetric `t` and `v` (row-major, diagonal of
    /// `v` ignored).
    MolecularDiagonal {
        n_orbitals: usize,
        t: Vec<f64>,
        v: Vec<f64>,
    },
}

impl HamiltonianSpec {
    /// Number of qubits the model acts on.
    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Ising { n_sites, .. } => *n_sites,
            Self::IsingDisordered { n_sites, .. } => *n_sites,
            Self::Heisenberg { n_sites, .. } => *n_sites,
            Self::FermiHubbard {
                n_spin_orbitals, ..
            } => *n_spin_orbitals,
            Self::MolecularDiagonal { n_orbitals, .. } => *n_orbitals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        if n < 2 {
            return Err(Error::Param("a model needs at least 2 qubits".into()));
        }
        match self {
            Self::IsingDisordered { n_sites, j, g, h } => {
                if j.len() != n_sites - 1 || g.len() != *n_sites || h.len() != *n_sites {
                    return Err(Error::Param(format!(
                        "disordered couplings sized {}:{}:{} do not fit {} sites",
                        j.len(),
                        g.len(),
                        h.len(),
                        n_sites
                    )));
                }
            }
            Self::FermiHubbard {
                n_spin_orbitals, ..
            } => {
                if n_spin_orbitals % 2 != 0 {
                    return Err(Error::Param(
                        "the spinful Fermi-Hubbard chain needs an even spin-orbital count".into(),
                    ));
                }
            }
            Self::MolecularDiagonal { n_orbitals, t, v } => {
                let m = *n_orbitals;
                if t.len() != m * m || v.len() != m * m {
                    return Err(Error::Param(
                        "molecular t/v arrays must be n_orbitals^2".into(),
                    ));
                }
                for p in 0..m {
                    for q in 0..m {
                        if (t[p * m + q] - t[q * m + p]).abs() > 1e-10
                            || (v[p * m + q] - v[q * m + p]).abs() > 1e-10
                        {
                            return Err(Error::Param("molecular t/v must be symmetric".into()));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Same model family on a smaller chain, used for proxy evaluations and
    /// Trotter-error extrapolation. Disordered couplings are sliced.
    pub fn resized(&self, n_qubits: usize) -> Result<Self> {
        let spec = match self {
            Self::Ising { j, g, h, .. } => Self::Ising {
                n_sites: n_qubits,
                j: *j,
                g: *g,
                h: *h,
            },
            Self::IsingDisordered { j, g, h, n_sites } => {
                if n_qubits > *n_sites {
                    return Err(Error::Param(
                        "cannot grow a disordered model beyond its sampled couplings".into(),
                    ));
                }
                Self::IsingDisordered {
                    n_sites: n_qubits,
                    j: j[..n_qubits - 1].to_vec(),
                    g: g[..n_qubits].to_vec(),
                    h: h[..n_qubits].to_vec(),
                }
            }
            Self::Heisenberg { j, h, .. } => Self::Heisenberg {
                n_sites: n_qubits,
                j: *j,
                h: *h,
            },
            Self::FermiHubbard { t_hop, v_int, .. } => {
                if n_qubits % 2 != 0 {
                    return Err(Error::Param("spin-orbital count must stay even".into()));
                }
                Self::FermiHubbard {
                    n_spin_orbitals: n_qubits,
                    t_hop: *t_hop,
                    v_int: *v_int,
                }
            }
            Self::MolecularDiagonal { .. } => {
                return Err(Error::Param(
                    "a molecular term has fixed orbital count".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Uniformly sample per-site/bond Ising couplings in `[x/2, 3x/2]`.
/// The draw order (bonds, then g fields, then h fields) is fixed, so a seed
/// pins the model.
pub fn sample_disorder(j: f64, g: f64, h: f64, n_sites: usize, seed: u64) -> HamiltonianSpec {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |x: f64, count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| rng.gen_range(0.5 * x..1.5 * x))
            .collect()
    };
    HamiltonianSpec::IsingDisordered {
        n_sites,
        j: draw(j, n_sites - 1),
        g: draw(g, n_sites),
        h: draw(h, n_sites),
    }
}

// ---------------------------------------------------------------------------
// Pauli and fermionic building blocks
// ---------------------------------------------------------------------------

pub fn pauli(which: char) -> DenseTensor {
    let z = |re: f64, im: f64| Complex64::new(re, im);
    let data = match which {
        'I' => vec![z(1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(1.0, 0.0)],
        'X' => vec![z(0.0, 0.0), z(1.0, 0.0), z(1.0, 0.0), z(0.0, 0.0)],
        'Y' => vec![z(0.0, 0.0), z(0.0, -1.0), z(0.0, 1.0), z(0.0, 0.0)],
        'Z' => vec![z(1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-1.0, 0.0)],
        _ => panic!("unknown Pauli {which}"),
    };
    DenseTensor::from_data(&[2, 2], data).expect("2x2")
}

/// Dense operator placing single-site matrices at the given qubits
/// (identity elsewhere), qubit 0 most significant.
pub fn embed_sites(n_qubits: usize, ops: &[(usize, &DenseTensor)]) -> Result<DenseTensor> {
    let mut m = DenseTensor::identity(1);
    for q in 0..n_qubits {
        let site = ops.iter().find(|(i, _)| *i == q).map(|(_, op)| *op);
        m = match site {
            Some(op) => m.kron(op)?,
            None => m.kron(&DenseTensor::identity(2))?,
        };
    }
    Ok(m)
}

/// Jordan-Wigner lowering operator for mode `k` on `n` modes:
/// `Z^(k) tensor sigma^- tensor I...`.
pub fn jw_lowering(n_modes: usize, k: usize) -> Result<DenseTensor> {
    let sigma_minus = DenseTensor::from_data(
        &[2, 2],
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )?;
    let zs = pauli('Z');
    let mut ops: Vec<(usize, &DenseTensor)> = (0..k).map(|q| (q, &zs)).collect();
    ops.push((k, &sigma_minus));
    embed_sites(n_modes, &ops)
}

/// Occupation-number operator for mode `k`.
pub fn jw_number(n_modes: usize, k: usize) -> Result<DenseTensor> {
    let n = DenseTensor::from_data(
        &[2, 2],
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    )?;
    embed_sites(n_modes, &[(k, &n)])
}

/// Qubit hosting Fermi-Hubbard spin orbital `(p, s)` in the snake ordering
/// that makes on-site pairs sit on even bonds and same-spin neighbors on odd
/// bonds: even spatial orbitals store up-then-down, odd ones down-then-up.
pub fn fh_qubit_of(p: usize, s: Spin) -> usize {
    let up_first = p % 2 == 0;
    match (s, up_first) {
        (Spin::Up, true) | (Spin::Down, false) => 2 * p,
        (Spin::Up, false) | (Spin::Down, true) => 2 * p + 1,
    }
}

/// Dense Hamiltonian matrix of a model (guarded to 12 qubits). Fermionic
/// models are mapped with the Jordan-Wigner transformation in the same mode
/// ordering the swap-network circuits use.
pub fn dense_hamiltonian(spec: &HamiltonianSpec) -> Result<DenseTensor> {
    spec.validate()?;
    let n = spec.n_qubits();
    if n > 12 {
        return Err(Error::ResourceGuard(format!(
            "dense Hamiltonian for {n} qubits exceeds the N <= 12 guard"
        )));
    }
    let d = 1usize << n;
    let mut ham = DenseTensor::zeros(&[d, d]);
    let mut add = |m: DenseTensor, w: f64| {
        ham = ham
            .add(&m.scale(Complex64::new(w, 0.0)))
            .expect("dims agree");
    };
    match spec {
        HamiltonianSpec::Ising { j, g, h, .. } => {
            let (x, z) = (pauli('X'), pauli('Z'));
            for i in 0..n - 1 {
                add(embed_sites(n, &[(i, &z), (i + 1, &z)])?, *j);
            }
            for i in 0..n {
                add(embed_sites(n, &[(i, &x)])?, *g);
                add(embed_sites(n, &[(i, &z)])?, *h);
            }
        }
        HamiltonianSpec::IsingDisordered { j, g, h, .. } => {
            let (x, z) = (pauli('X'), pauli('Z'));
            for i in 0..n - 1 {
                add(embed_sites(n, &[(i, &z), (i + 1, &z)])?, j[i]);
            }
            for i in 0..n {
                add(embed_sites(n, &[(i, &x)])?, g[i]);
                add(embed_sites(n, &[(i, &z)])?, h[i]);
            }
        }
        HamiltonianSpec::Heisenberg { j, h, .. } => {
            let sigmas = [pauli('X'), pauli('Y'), pauli('Z')];
            for i in 0..n - 1 {
                for (alpha, sigma) in sigmas.iter().enumerate() {
                    add(embed_sites(n, &[(i, sigma), (i + 1, sigma)])?, j[alpha]);
                }
            }
            for i in 0..n {
                for (alpha, sigma) in sigmas.iter().enumerate() {
                    if h[alpha] != 0.0 {
                        add(embed_sites(n, &[(i, sigma)])?, h[alpha]);
                    }
                }
            }
        }
        HamiltonianSpec::FermiHubbard { t_hop, v_int, .. } => {
            let orbitals = n / 2;
            for p in 0..orbitals - 1 {
                for s in [Spin::Up, Spin::Down] {
                    let a = jw_lowering(n, fh_qubit_of(p, s))?;
                    let b = jw_lowering(n, fh_qubit_of(p + 1, s))?;
                    let hop = a.adjoint()?.matmul(&b)?;
                    let term = hop.add(&hop.adjoint()?)?;
                    add(term, -t_hop);
                }
            }
            for p in 0..orbitals {
                let nu = jw_number(n, fh_qubit_of(p, Spin::Up))?;
                let nd = jw_number(n, fh_qubit_of(p, Spin::Down))?;
                add(nu.matmul(&nd)?, 0.5 * v_int);
            }
        }
        HamiltonianSpec::MolecularDiagonal { n_orbitals, t, v } => {
            let m = *n_orbitals;
            for p in 0..m {
                for q in 0..m {
                    let w = t[p * m + q];
                    if w == 0.0 {
                        continue;
                    }
                    let ap = jw_lowering(n, p)?;
                    let aq = jw_lowering(n, q)?;
                    add(ap.adjoint()?.matmul(&aq)?, w);
                }
            }
            for p in 0..m {
                for q in 0..m {
                    if p == q {
                        continue;
                    }
                    let w = 0.5 * v[p * m + q];
                    if w == 0.0 {
                        continue;
                    }
                    add(jw_number(n, p)?.matmul(&jw_number(n, q)?)?, w);
                }
            }
        }
    }
    Ok(ham)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disorder_samples_stay_in_bounds_and_are_deterministic() {
        let (j, g, h) = (1.0, 0.75, 0.6);
        let a = sample_disorder(j, g, h, 20, 7);
        let b = sample_disorder(j, g, h, 20, 7);
        let c = sample_disorder(j, g, h, 20, 8);
        let (
            HamiltonianSpec::IsingDisordered {
                j: ja,
                g: ga,
                h: ha,
                ..
            },
            HamiltonianSpec::IsingDisordered { j: jb, .. },
            HamiltonianSpec::IsingDisordered { j: jc, .. },
        ) = (&a, &b, &c)
        else {
            panic!("wrong variant");
        };
        assert_eq!(ja, jb);
        assert_ne!(ja, jc);
        for &x in ja {
            assert!((0.5 * j..=1.5 * j).contains(&x));
        }
        for &x in ga {
            assert!((0.5 * g..=1.5 * g).contains(&x));
        }
        for &x in ha {
            assert!((0.5 * h..=1.5 * h).contains(&x));
        }
    }

    #[test]
    fn disorder_sample_mean_is_consistent_with_uniform_law() {
        // mean of U[x/2, 3x/2] is x with variance x^2/12
        let n = 100_000usize;
        let mut sum = 0.0;
        for seed in 0..100u64 {
            let spec = sample_disorder(1.0, 1.0, 1.0, (n / 100) + 1, seed);
            let HamiltonianSpec::IsingDisordered { j, .. } = &spec else {
                unreachable!()
            };
            sum += j.iter().sum::<f64>();
        }
        let mean = sum / n as f64;
        let std_err = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 3.0 * std_err,
            "mean {mean} departs from 1.0 by more than 3 standard errors"
        );
    }

    #[test]
    fn jw_anticommutation() {
        let n = 4;
        for p in 0..n {
            for q in 0..n {
                let ap = jw_lowering(n, p).unwrap();
                let aq = jw_lowering(n, q).unwrap();
                // {a_p, a_q^dagger} = delta_pq
                let anti = ap
                    .matmul(&aq.adjoint().unwrap())
                    .unwrap()
                    .add(&aq.adjoint().unwrap().matmul(&ap).unwrap())
                    .unwrap();
                let want = if p == q {
                    DenseTensor::identity(16)
                } else {
                    DenseTensor::zeros(&[16, 16])
                };
                assert!(anti.max_abs_diff(&want) < 1e-13, "p={p}, q={q}");
                // {a_p, a_q} = 0
                let anti2 = ap
                    .matmul(&aq)
                    .unwrap()
                    .add(&aq.matmul(&ap).unwrap())
                    .unwrap();
                assert!(anti2.max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn number_operator_matches_lowering_pair() {
        let n = 3;
        for k in 0..n {
            let a = jw_lowering(n, k).unwrap();
            let num = a.adjoint().unwrap().matmul(&a).unwrap();
            assert!(num.max_abs_diff(&jw_number(n, k).unwrap()) < 1e-13);
        }
    }

    #[test]
    fn dense_hamiltonians_are_hermitian() {
        let specs = vec![
            HamiltonianSpec::Ising {
                n_sites: 4,
                j: 1.0,
                g: 0.75,
                h: 0.6,
            },
            sample_disorder(1.0, 0.75, 0.6, 4, 3),
            HamiltonianSpec::Heisenberg {
                n_sites: 4,
                j: [1.0, 1.0, -0.5],
                h: [0.75, 0.0, 0.0],
            },
            HamiltonianSpec::FermiHubbard {
                n_spin_orbitals: 6,
                t_hop: 1.0,
                v_int: 4.0,
            },
        ];
        for spec in specs {
            let h = dense_hamiltonian(&spec).unwrap();
            assert!(h.max_abs_diff(&h.adjoint().unwrap()) < 1e-12);
        }
    }

    #[test]
    fn fh_snake_ordering_properties() {
        // on-site pairs sit on even bonds, same-spin neighbors on odd bonds
        for p in 0..5 {
            let u = fh_qubit_of(p, Spin::Up);
            let d = fh_qubit_of(p, Spin::Down);
            assert_eq!(u.min(d), 2 * p);
            assert_eq!(u.max(d), 2 * p + 1);
        }
        for p in 0..4 {
            // the odd bond (2p+1, 2p+2) hosts a same-spin pair of (p, p+1)
            let spins = [Spin::Up, Spin::Down];
            let found = spins.iter().any(|&s| {
                let a = fh_qubit_of(p, s);
                let b = fh_qubit_of(p + 1, s);
                a == 2 * p + 1 && b == 2 * p + 2
            });
            assert!(found, "no same-spin pair on odd bond after orbital {p}");
        }
    }

    #[test]
    fn resized_disordered_slices_couplings() {
        let spec = sample_disorder(1.0, 0.75, 0.6, 10, 4);
        let small = spec.resized(6).unwrap();
        let (
            HamiltonianSpec::IsingDisordered { j: jb, .. },
            HamiltonianSpec::IsingDisordered { j: js, .. },
        ) = (&spec, &small)
        else {
            unreachable!()
        };
        assert_eq!(&jb[..5], &js[..]);
        assert!(spec.resized(12).is_err());
    }
}
