//! Product-formula circuits: even/odd bond splitting for spin chains and
//! fermionic swap networks for the Fermi-Hubbard and molecular models.
//!
//! Layer accounting merges adjacent half-layers of consecutive blocks, so
//! `n` repetitions cost `2n+1` layers at order two and `10n+1` at order four
//! on spin chains (`4n+1` and `20n+1` on the Fermi-Hubbard swap network).

use num_complex::Complex64;

use super::gates::{fh_interaction_swap_gate, fh_kinetic_gate, fswap, ising_gate};
use super::{pauli, HamiltonianSpec};
use crate::circuit::{BrickwallCircuit, LayerOffset};
use crate::linalg::{expm_skew_or_hermitian, DenseTensor};
use crate::{Error, Result};

/// Time-slice coefficient of the fourth-order Suzuki composition.
pub fn suzuki_s2() -> f64 {
    (4.0 - 4f64.powf(1.0 / 3.0)).recip()
}

/// Number of brickwall layers of `n_reps` merged Trotter steps.
pub fn layer_count(spec: &HamiltonianSpec, order: u32, n_reps: usize) -> Result<usize> {
    if n_reps == 0 {
        return Err(Error::Param("n_reps must be at least 1".into()));
    }
    let n = n_reps;
    Ok(match spec {
        HamiltonianSpec::Ising { .. }
        | HamiltonianSpec::IsingDisordered { .. }
        | HamiltonianSpec::Heisenberg { .. } => match order {
            1 => 2 * n,
            2 => 2 * n + 1,
            4 => 10 * n + 1,
            _ => return Err(Error::Param(format!("unsupported Trotter order {order}"))),
        },
        HamiltonianSpec::FermiHubbard { .. } => match order {
            1 => 4 * n,
            2 => 4 * n + 1,
            4 => 20 * n + 1,
            _ => return Err(Error::Param(format!("unsupported Trotter order {order}"))),
        },
        HamiltonianSpec::MolecularDiagonal { n_orbitals, .. } => {
            let m = *n_orbitals;
            match order {
                1 | 2 => 2 * m * n,
                4 => 10 * m * n,
                _ => return Err(Error::Param(format!("unsupported Trotter order {order}"))),
            }
        }
    })
}

/// One Trotter step for simulation time `dt`.
pub fn trotter_step(spec: &HamiltonianSpec, order: u32, dt: f64) -> Result<BrickwallCircuit> {
    trotter_circuit(spec, order, dt, 1)
}

/// `n_reps` merged Trotter steps covering total time `t`.
pub fn trotter_circuit(
    spec: &HamiltonianSpec,
    order: u32,
    t: f64,
    n_reps: usize,
) -> Result<BrickwallCircuit> {
    spec.validate()?;
    if n_reps == 0 {
        return Err(Error::Param("n_reps must be at least 1".into()));
    }
    if !matches!(order, 1 | 2 | 4) {
        return Err(Error::Param(format!("unsupported Trotter order {order}")));
    }
    let circuit = match spec {
        HamiltonianSpec::Ising { .. }
        | HamiltonianSpec::IsingDisordered { .. }
        | HamiltonianSpec::Heisenberg { .. } => spin_chain_circuit(spec, order, t, n_reps)?,
        HamiltonianSpec::FermiHubbard { .. } => fermi_hubbard_circuit(spec, order, t, n_reps)?,
        HamiltonianSpec::MolecularDiagonal { .. } => molecular_circuit(spec, order, t, n_reps)?,
    };
    debug_assert_eq!(circuit.n_layers(), layer_count(spec, order, n_reps)?);
    Ok(circuit)
}

/// Swap-network Trotter step of the spinful Fermi-Hubbard chain.
pub fn fermi_hubbard_swap_network_step(
    spec: &HamiltonianSpec,
    order: u32,
    dt: f64,
) -> Result<BrickwallCircuit> {
    if !matches!(spec, HamiltonianSpec::FermiHubbard { .. }) {
        return Err(Error::Param(
            "the swap-network step applies to the Fermi-Hubbard model".into(),
        ));
    }
    trotter_step(spec, order, dt)
}

/// `[tau_1, ..., tau_K]`: per-block times of the second-order composition
/// underlying the requested order.
fn block_times(order: u32, t: f64, n_reps: usize) -> Vec<f64> {
    let dt = t / n_reps as f64;
    match order {
        2 => vec![dt; n_reps],
        4 => {
            let s2 = suzuki_s2();
            let pattern = [s2, s2, 1.0 - 4.0 * s2, s2, s2];
            (0..n_reps)
                .flat_map(|_| pattern.iter().map(move |c| c * dt))
                .collect()
        }
        _ => unreachable!("block_times is only used for even orders"),
    }
}

// ---------------------------------------------------------------------------
// Spin chains
// ---------------------------------------------------------------------------

/// Open-boundary edge factors: fields of edge qubits are not shared between
/// two bonds, so the touching gate carries them in full.
fn edge_factors(i: usize, n: usize) -> (f64, f64) {
    let left = if i == 0 { 2.0 } else { 1.0 };
    let right = if i + 1 == n - 1 { 2.0 } else { 1.0 };
    (left, right)
}

fn spin_bond_gate(spec: &HamiltonianSpec, i: usize, dt: f64) -> Result<DenseTensor> {
    let n = spec.n_qubits();
    let (e1, e2) = edge_factors(i, n);
    match spec {
        HamiltonianSpec::Ising { j, g, h, .. } => {
            ising_gate(*j, g * e1, g * e2, h * e1, h * e2, dt)
        }
        HamiltonianSpec::IsingDisordered { j, g, h, .. } => {
            ising_gate(j[i], g[i] * e1, g[i + 1] * e2, h[i] * e1, h[i + 1] * e2, dt)
        }
        HamiltonianSpec::Heisenberg { j, h, .. } => {
            // general field vector; the X-only case matches `heisenberg_gate`
            let mut ham = DenseTensor::zeros(&[4, 4]);
            for (alpha, p) in ['X', 'Y', 'Z'].into_iter().enumerate() {
                let sig = pauli(p);
                let two = sig.kron(&sig)?;
                ham = ham.add(&two.scale(Complex64::new(j[alpha], 0.0)))?;
                let left = sig.kron(&DenseTensor::identity(2))?;
                let right = DenseTensor::identity(2).kron(&sig)?;
                ham = ham.add(&left.scale(Complex64::new(0.5 * h[alpha] * e1, 0.0)))?;
                ham = ham.add(&right.scale(Complex64::new(0.5 * h[alpha] * e2, 0.0)))?;
            }
            expm_skew_or_hermitian(&ham, Complex64::new(0.0, -dt))
        }
        _ => unreachable!("spin gates are only built for spin chains"),
    }
}

fn spin_layer(
    spec: &HamiltonianSpec,
    offset: LayerOffset,
    dt: f64,
) -> Result<(LayerOffset, Vec<DenseTensor>)> {
    let n = spec.n_qubits();
    let mats = offset
        .pairs(n)
        .into_iter()
        .map(|(i, _)| spin_bond_gate(spec, i, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok((offset, mats))
}

fn spin_chain_circuit(
    spec: &HamiltonianSpec,
    order: u32,
    t: f64,
    n_reps: usize,
) -> Result<BrickwallCircuit> {
    let n = spec.n_qubits();
    let mut rows = Vec::new();
    match order {
        1 => {
            let dt = t / n_reps as f64;
            for _ in 0..n_reps {
                rows.push(spin_layer(spec, LayerOffset::Even, dt)?);
                rows.push(spin_layer(spec, LayerOffset::Odd, dt)?);
            }
        }
        _ => {
            let taus = block_times(order, t, n_reps);
            rows.push(spin_layer(spec, LayerOffset::Even, taus[0] / 2.0)?);
            for (k, &tau) in taus.iter().enumerate() {
                rows.push(spin_layer(spec, LayerOffset::Odd, tau)?);
                let half = match taus.get(k + 1) {
                    Some(&next) => (tau + next) / 2.0,
                    None => tau / 2.0,
                };
                rows.push(spin_layer(spec, LayerOffset::Even, half)?);
            }
        }
    }
    BrickwallCircuit::from_layer_matrices(n, rows)
}

// ---------------------------------------------------------------------------
// Spinful Fermi-Hubbard swap network
// ---------------------------------------------------------------------------

fn fh_kinetic_layer(n: usize, t_hop: f64, dt: f64) -> (LayerOffset, Vec<DenseTensor>) {
    let mats = LayerOffset::Odd
        .pairs(n)
        .into_iter()
        .map(|_| fh_kinetic_gate(t_hop, dt))
        .collect();
    (LayerOffset::Odd, mats)
}

fn fh_interaction_layer(n: usize, v_int: f64, dt: f64) -> (LayerOffset, Vec<DenseTensor>) {
    // the Hamiltonian's on-site term is (1/2) V n n, so the gate phase
    // carries V/2
    let mats = LayerOffset::Even
        .pairs(n)
        .into_iter()
        .map(|_| fh_interaction_swap_gate(0.5 * v_int, dt))
        .collect();
    (LayerOffset::Even, mats)
}

fn fh_swap_reversal_layer(n: usize) -> (LayerOffset, Vec<DenseTensor>) {
    let mats = LayerOffset::Even
        .pairs(n)
        .into_iter()
        .map(|_| fswap())
        .collect();
    (LayerOffset::Even, mats)
}

fn fermi_hubbard_circuit(
    spec: &HamiltonianSpec,
    order: u32,
    t: f64,
    n_reps: usize,
) -> Result<BrickwallCircuit> {
    let HamiltonianSpec::FermiHubbard {
        n_spin_orbitals,
        t_hop,
        v_int,
    } = spec
    else {
        unreachable!()
    };
    let n = *n_spin_orbitals;
    let mut rows = Vec::new();
    match order {
        1 => {
            let dt = t / n_reps as f64;
            for _ in 0..n_reps {
                rows.push(fh_kinetic_layer(n, *t_hop, dt));
                rows.push(fh_interaction_layer(n, *v_int, dt));
                rows.push(fh_kinetic_layer(n, *t_hop, dt));
                rows.push(fh_swap_reversal_layer(n));
            }
        }
        _ => {
            // K1(tau/2), IS(tau/2), K2(tau), IS(tau/2), K1 halves merged
            // across blocks; the second interaction layer swaps the snake
            // ordering back, so no reversal layer is needed
            let taus = block_times(order, t, n_reps);
            rows.push(fh_kinetic_layer(n, *t_hop, taus[0] / 2.0));
            for (k, &tau) in taus.iter().enumerate() {
                rows.push(fh_interaction_layer(n, *v_int, tau / 2.0));
                rows.push(fh_kinetic_layer(n, *t_hop, tau));
                rows.push(fh_interaction_layer(n, *v_int, tau / 2.0));
                let half = match taus.get(k + 1) {
                    Some(&next) => (tau + next) / 2.0,
                    None => tau / 2.0,
                };
                rows.push(fh_kinetic_layer(n, *t_hop, half));
            }
        }
    }
    BrickwallCircuit::from_layer_matrices(n, rows)
}

// ---------------------------------------------------------------------------
// Molecular swap network
// ---------------------------------------------------------------------------

struct ScheduledGate {
    /// Leftmost qubit of the gate.
    position: usize,
    /// Orbital currently on `position`.
    p: usize,
    /// Orbital currently on `position + 1`.
    q: usize,
}

/// Odd-even transposition schedule: layer k acts on parity-k bonds, every
/// orbital pair meets exactly once, and after `m` layers the ordering is
/// fully reversed.
fn molecular_schedule(m: usize) -> Vec<(LayerOffset, Vec<ScheduledGate>)> {
    let mut state: Vec<usize> = (0..m).collect();
    let mut layers = Vec::with_capacity(m);
    for k in 0..m {
        let offset = if k % 2 == 0 {
            LayerOffset::Even
        } else {
            LayerOffset::Odd
        };
        let mut gates = Vec::new();
        let mut i = offset.start();
        while i + 1 < m {
            gates.push(ScheduledGate {
                position: i,
                p: state[i],
                q: state[i + 1],
            });
            state.swap(i, i + 1);
            i += 2;
        }
        layers.push((offset, gates));
    }
    debug_assert!(state.iter().enumerate().all(|(i, &p)| p == m - 1 - i));
    layers
}

/// Two-site Hamiltonian of orbital pair `(p, q)` positioned left/right:
/// hopping, diagonal interaction and the per-meeting share of the one-body
/// diagonal (each orbital meets `m - 1` partners per forward pass).
fn molecular_pair_hamiltonian(
    t: &[f64],
    v: &[f64],
    m: usize,
    p: usize,
    q: usize,
) -> Result<DenseTensor> {
    let z = |re: f64| Complex64::new(re, 0.0);
    let mut h = DenseTensor::zeros(&[4, 4]);
    let hop = t[p * m + q];
    h.set(&[1, 2], z(hop));
    h.set(&[2, 1], z(hop));
    let share = (m - 1).max(1) as f64;
    let np = t[p * m + p] / share;
    let nq = t[q * m + q] / share;
    let vv = if p == q { 0.0 } else { v[p * m + q] };
    h.set(&[1, 1], z(nq));
    h.set(&[2, 2], z(np));
    h.set(&[3, 3], z(np + nq + vv));
    Ok(h)
}

fn molecular_gate(
    t: &[f64],
    v: &[f64],
    m: usize,
    p: usize,
    q: usize,
    dt: f64,
    swap_first: bool,
) -> Result<DenseTensor> {
    let h = molecular_pair_hamiltonian(t, v, m, p, q)?;
    let evo = expm_skew_or_hermitian(&h, Complex64::new(0.0, -dt))?;
    if swap_first {
        evo.matmul(&fswap())
    } else {
        fswap().matmul(&evo)
    }
}

fn molecular_circuit(
    spec: &HamiltonianSpec,
    order: u32,
    t_total: f64,
    n_reps: usize,
) -> Result<BrickwallCircuit> {
    let HamiltonianSpec::MolecularDiagonal { n_orbitals, t, v } = spec else {
        unreachable!()
    };
    let m = *n_orbitals;
    let schedule = molecular_schedule(m);
    let mut rows: Vec<(LayerOffset, Vec<DenseTensor>)> = Vec::new();

    let forward = |rows: &mut Vec<(LayerOffset, Vec<DenseTensor>)>, tau: f64| -> Result<()> {
        for (offset, gates) in &schedule {
            debug_assert!(gates
                .iter()
                .zip(offset.pairs(m))
                .all(|(g, (a, _))| g.position == a));
            let mats = gates
                .iter()
                .map(|g| molecular_gate(t, v, m, g.p, g.q, tau, false))
                .collect::<Result<Vec<_>>>()?;
            rows.push((*offset, mats));
        }
        Ok(())
    };
    // retraces the swap pattern backwards (swap first, then evolve), so a
    // forward pass followed by a mirror pass is time-symmetric and ends in
    // the original orbital ordering
    let mirror = |rows: &mut Vec<(LayerOffset, Vec<DenseTensor>)>, tau: f64| -> Result<()> {
        for (offset, gates) in schedule.iter().rev() {
            let mats = gates
                .iter()
                .map(|g| molecular_gate(t, v, m, g.p, g.q, tau, true))
                .collect::<Result<Vec<_>>>()?;
            rows.push((*offset, mats));
        }
        Ok(())
    };

    match order {
        1 => {
            let dt = t_total / n_reps as f64;
            for _ in 0..n_reps {
                forward(&mut rows, dt)?;
                // undo the fermionic swaps to restore the orbital ordering
                for (offset, gates) in schedule.iter().rev() {
                    let mats = gates.iter().map(|_| fswap()).collect();
                    rows.push((*offset, mats));
                }
            }
        }
        _ => {
            for tau in block_times(order, t_total, n_reps) {
                forward(&mut rows, tau / 2.0)?;
                mirror(&mut rows, tau / 2.0)?;
            }
        }
    }
    BrickwallCircuit::from_layer_matrices(m, rows)
}
