//! Brickwall circuit container: layers of two-qubit gates on alternating
//! adjacent qubit pairs.

use crate::linalg::DenseTensor;
use crate::{Error, Result, TOL_UNITARY};

/// Where a gate sits inside a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatePlacement {
    pub layer: usize,
    pub index: usize,
    /// Adjacent pair `(q, q+1)` the gate acts on.
    pub qubits: (usize, usize),
}

/// A 4x4 unitary placed on an adjacent qubit pair.
#[derive(Debug, Clone)]
pub struct UnitaryGate {
    pub matrix: DenseTensor,
    pub placement: GatePlacement,
}

impl UnitaryGate {
    pub fn new(matrix: DenseTensor, placement: GatePlacement) -> Result<Self> {
        if matrix.shape() != [4, 4] {
            return Err(Error::Dim(format!(
                "gate must be 4x4, got {:?}",
                matrix.shape()
            )));
        }
        let err = matrix.unitarity_error();
        if err > TOL_UNITARY {
            return Err(Error::Param(format!(
                "gate at layer {} position {} is not unitary (error {err:.2e})",
                placement.layer, placement.index
            )));
        }
        Ok(Self { matrix, placement })
    }
}

/// First qubit touched by a layer's leftmost gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOffset {
    /// Gates start at qubit 0: pairs (0,1), (2,3), ...
    Even,
    /// Gates start at qubit 1: pairs (1,2), (3,4), ...
    Odd,
}

impl LayerOffset {
    pub fn start(self) -> usize {
        match self {
            LayerOffset::Even => 0,
            LayerOffset::Odd => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            LayerOffset::Even => LayerOffset::Odd,
            LayerOffset::Odd => LayerOffset::Even,
        }
    }

    /// Qubit pairs of a full layer at this offset on `n_qubits` sites.
    pub fn pairs(self, n_qubits: usize) -> Vec<(usize, usize)> {
        let mut q = self.start();
        let mut out = Vec::new();
        while q + 1 < n_qubits {
            out.push((q, q + 1));
            q += 2;
        }
        out
    }
}

/// One brickwall layer: gates on disjoint adjacent pairs, sorted by qubit.
#[derive(Debug, Clone)]
pub struct Layer {
    pub offset: LayerOffset,
    pub gates: Vec<UnitaryGate>,
}

/// Brickwall circuit `W = W^L ... W^1` (layer 1 applied first).
#[derive(Debug, Clone)]
pub struct BrickwallCircuit {
    n_qubits: usize,
    layers: Vec<Layer>,
}

impl BrickwallCircuit {
    pub fn new(n_qubits: usize, layers: Vec<Layer>) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::Param("a circuit needs at least 2 qubits".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            let mut covered = vec![false; n_qubits];
            for (i, gate) in layer.gates.iter().enumerate() {
                let (a, b) = gate.placement.qubits;
                if b != a + 1 || b >= n_qubits {
                    return Err(Error::Param(format!(
                        "layer {l}: gate {i} on non-adjacent or out-of-range pair ({a},{b})"
                    )));
                }
                if covered[a] || covered[b] {
                    return Err(Error::Param(format!(
                        "layer {l}: overlapping gates at qubit pair ({a},{b})"
                    )));
                }
                if a % 2 != layer.offset.start() % 2 {
                    return Err(Error::Param(format!(
                        "layer {l}: gate at qubit {a} does not match layer offset"
                    )));
                }
                covered[a] = true;
                covered[b] = true;
            }
            for w in layer.gates.windows(2) {
                if w[1].placement.qubits.0 <= w[0].placement.qubits.0 {
                    return Err(Error::Param(format!("layer {l}: gates not sorted")));
                }
            }
        }
        let mut circuit = Self { n_qubits, layers };
        circuit.refresh_placements();
        Ok(circuit)
    }

    /// Convenience constructor: one full layer per (offset, gate matrices) row.
    pub fn from_layer_matrices(
        n_qubits: usize,
        rows: Vec<(LayerOffset, Vec<DenseTensor>)>,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(rows.len());
        for (l, (offset, mats)) in rows.into_iter().enumerate() {
            let pairs = offset.pairs(n_qubits);
            if pairs.len() != mats.len() {
                return Err(Error::Param(format!(
                    "layer {l}: expected {} gates for this offset, got {}",
                    pairs.len(),
                    mats.len()
                )));
            }
            let gates = mats
                .into_iter()
                .zip(&pairs)
                .enumerate()
                .map(|(i, (m, &qubits))| {
                    UnitaryGate::new(
                        m,
                        GatePlacement {
                            layer: l,
                            index: i,
                            qubits,
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(Layer { offset, gates });
        }
        Self::new(n_qubits, layers)
    }

    /// Full identity layer at the given offset.
    pub fn identity_layer(n_qubits: usize, layer_index: usize, offset: LayerOffset) -> Layer {
        let gates = offset
            .pairs(n_qubits)
            .into_iter()
            .enumerate()
            .map(|(i, qubits)| UnitaryGate {
                matrix: DenseTensor::identity(4),
                placement: GatePlacement {
                    layer: layer_index,
                    index: i,
                    qubits,
                },
            })
            .collect();
        Layer { offset, gates }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l]
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }

    pub fn gate(&self, layer: usize, index: usize) -> &UnitaryGate {
        &self.layers[layer].gates[index]
    }

    pub fn set_gate_matrix(&mut self, layer: usize, index: usize, m: DenseTensor) {
        self.layers[layer].gates[index].matrix = m;
    }

    /// Re-derive every gate's stored placement from its position; used after
    /// structural edits (appending layers, concatenation).
    fn refresh_placements(&mut self) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (i, gate) in layer.gates.iter_mut().enumerate() {
                gate.placement.layer = l;
                gate.placement.index = i;
            }
        }
    }

    pub fn push_layer(&mut self, layer: Layer) {
        self.layers.push(layer);
        self.refresh_placements();
    }

    /// Append all layers of `other` after this circuit's layers.
    pub fn concat(&mut self, other: &BrickwallCircuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Dim("concat: qubit counts differ".into()));
        }
        self.layers.extend(other.layers.iter().cloned());
        self.refresh_placements();
        Ok(())
    }

    pub fn max_unitarity_error(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| &l.gates)
            .map(|g| g.matrix.unitarity_error())
            .fold(0.0, f64::max)
    }

    /// Dense matrix of one layer via gate embedding (guarded to small N).
    pub fn layer_to_dense(&self, l: usize) -> Result<DenseTensor> {
        dense_layer(self.n_qubits, &self.layers[l])
    }

    /// Dense matrix of the full circuit, `W^L ... W^1`.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        if self.n_qubits > 12 {
            return Err(Error::ResourceGuard(format!(
                "dense circuit for {} qubits exceeds the N <= 12 guard",
                self.n_qubits
            )));
        }
        let d = 1usize << self.n_qubits;
        let mut w = DenseTensor::identity(d);
        for l in 0..self.layers.len() {
            let wl = self.layer_to_dense(l)?;
            w = wl.matmul(&w)?;
        }
        Ok(w)
    }
}

/// Dense embedding of a layer: kron of gates with identity padding.
pub fn dense_layer(n_qubits: usize, layer: &Layer) -> Result<DenseTensor> {
    if n_qubits > 12 {
        return Err(Error::ResourceGuard(format!(
            "dense layer for {n_qubits} qubits exceeds the N <= 12 guard"
        )));
    }
    let mut m = DenseTensor::identity(1);
    let mut q = 0usize;
    let mut gate_iter = layer.gates.iter().peekable();
    while q < n_qubits {
        if let Some(g) = gate_iter.peek() {
            if g.placement.qubits.0 == q {
                m = m.kron(&g.matrix)?;
                gate_iter.next();
                q += 2;
                continue;
            }
        }
        m = m.kron(&DenseTensor::identity(2))?;
        q += 1;
    }
    Ok(m)
}


#[cfg(test)]
mod tests {
    use super::tests_support::random_circuit;
    use super::*;
    use crate::linalg::random_unitary;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn layer_pair_patterns() {
        assert_eq!(LayerOffset::Even.pairs(6), vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(LayerOffset::Odd.pairs(6), vec![(1, 2), (3, 4)]);
        assert_eq!(LayerOffset::Even.pairs(5), vec![(0, 1), (2, 3)]);
        assert_eq!(LayerOffset::Odd.pairs(2), Vec::<(usize, usize)>::new());
    }

    #[test]
    fn rejects_overlapping_gates() {
        let g = DenseTensor::identity(4);
        let mk = |q: usize, i: usize| UnitaryGate {
            matrix: g.clone(),
            placement: GatePlacement {
                layer: 0,
                index: i,
                qubits: (q, q + 1),
            },
        };
        let layer = Layer {
            offset: LayerOffset::Even,
            gates: vec![mk(0, 0), mk(0, 1)],
        };
        assert!(matches!(
            BrickwallCircuit::new(4, vec![layer]),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn rejects_non_unitary_gate() {
        let m = DenseTensor::identity(4).scale(Complex64::new(2.0, 0.0));
        let res = UnitaryGate::new(
            m,
            GatePlacement {
                layer: 0,
                index: 0,
                qubits: (0, 1),
            },
        );
        assert!(matches!(res, Err(Error::Param(_))));
    }

    #[test]
    fn dense_identity_circuit_is_identity() {
        let c = BrickwallCircuit::new(
            4,
            vec![
                BrickwallCircuit::identity_layer(4, 0, LayerOffset::Even),
                BrickwallCircuit::identity_layer(4, 1, LayerOffset::Odd),
            ],
        )
        .unwrap();
        assert!(
            c.to_dense()
                .unwrap()
                .max_abs_diff(&DenseTensor::identity(16))
                < 1e-14
        );
    }

    #[test]
    fn dense_layer_matches_manual_kron() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let g = random_unitary(4, &mut rng);
        let c = BrickwallCircuit::from_layer_matrices(4, vec![(LayerOffset::Odd, vec![g.clone()])])
            .unwrap();
        let manual = DenseTensor::identity(2)
            .kron(&g)
            .unwrap()
            .kron(&DenseTensor::identity(2))
            .unwrap();
        assert!(c.to_dense().unwrap().max_abs_diff(&manual) < 1e-14);
    }

    #[test]
    fn layer_order_is_first_applied_first() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let c = random_circuit(4, 3, 11);
        let dense = c.to_dense().unwrap();
        let l0 = c.layer_to_dense(0).unwrap();
        let l1 = c.layer_to_dense(1).unwrap();
        let l2 = c.layer_to_dense(2).unwrap();
        let manual = l2.matmul(&l1).unwrap().matmul(&l0).unwrap();
        assert!(dense.max_abs_diff(&manual) < 1e-13);
        let _ = random_unitary(2, &mut rng);
    }
}
