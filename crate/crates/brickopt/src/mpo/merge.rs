//! Merging a brickwall layer of two-qubit gates into an MPO with on-the-fly
//! truncation.
//!
//! A sweep walks the chain gate by gate: the gate is contracted with its two
//! site tensors and the residual carried from the previous merge, the result
//! is split by a truncated SVD, and a QR on the remaining factor shifts the
//! canonical center to the next pair. Sites not touched by a gate pass
//! through with a trivial merge so the canonical bookkeeping stays intact.

use std::collections::HashMap;

use crate::circuit::Layer;
use crate::linalg::{contract, qr_isometry, rq_isometry, svd_truncate, DenseTensor};
use crate::mpo::{CanonicalForm, Mpo, PHYS_DIM};
use crate::{Error, Result};

/// Which side of the MPO the layer multiplies onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeSide {
    /// Result represents `M * W_layer` (the layer acts first). Repeated
    /// below-merges realize the top-environment recursion.
    Below,
    /// Result represents `W_layer * M` (the layer acts last); this is the
    /// bottom-environment recursion.
    Above,
}

/// Direction of the merging sweep. A left-to-right sweep consumes a
/// right-canonical MPO and leaves a left-canonical one, and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDir {
    LeftToRight,
    RightToLeft,
}

/// Truncation bookkeeping of one merge.
#[derive(Debug, Clone, Copy, Default)]
pub struct MergeReport {
    /// Sum of squared discarded singular values over all splits.
    pub total_discarded_weight: f64,
    /// Largest bond dimension present in the merged MPO.
    pub max_bond_reached: usize,
}

/// Merge one brickwall layer into `m`, truncating every new bond to
/// `chi_max`. If the input is not canonicalized opposite to the sweep
/// direction it is re-canonicalized first.
pub fn merge_layer(
    m: &Mpo,
    layer: &Layer,
    side: MergeSide,
    sweep: SweepDir,
    chi_max: usize,
) -> Result<(Mpo, MergeReport)> {
    if chi_max < 1 {
        return Err(Error::Param("chi_max must be at least 1".into()));
    }
    let n = m.n_sites();
    let mut gate_at: HashMap<usize, &DenseTensor> = HashMap::new();
    for g in &layer.gates {
        let (a, b) = g.placement.qubits;
        if b != a + 1 || b >= n {
            return Err(Error::Param(format!(
                "gate on pair ({a},{b}) does not fit a {n}-site chain"
            )));
        }
        if gate_at.insert(a, &g.matrix).is_some() {
            return Err(Error::Param(format!("two gates start at qubit {a}")));
        }
    }
    for g in &layer.gates {
        let (a, _) = g.placement.qubits;
        if gate_at.contains_key(&(a + 1)) {
            return Err(Error::Param(format!(
                "overlapping gates at qubits {a} and {}",
                a + 1
            )));
        }
    }

    let needed = match sweep {
        SweepDir::LeftToRight => CanonicalForm::Right,
        SweepDir::RightToLeft => CanonicalForm::Left,
    };
    let base = if m.canonical_form() == needed {
        m.clone()
    } else {
        m.canonicalize(needed)?
    };

    let mut report = MergeReport::default();
    let result = match sweep {
        SweepDir::LeftToRight => sweep_left_to_right(&base, &gate_at, side, chi_max, &mut report)?,
        SweepDir::RightToLeft => sweep_right_to_left(&base, &gate_at, side, chi_max, &mut report)?,
    };
    report.max_bond_reached = result.max_bond();
    Ok((result, report))
}

/// Contract a gate into the pair tensor `t2` with axes
/// `(left, o1, i1, o2, i2, right)` and restore that axis order.
fn apply_gate_to_pair(
    t2: &DenseTensor,
    gate: &DenseTensor,
    side: MergeSide,
) -> Result<DenseTensor> {
    let g4 = gate.reshape(&[PHYS_DIM, PHYS_DIM, PHYS_DIM, PHYS_DIM])?;
    match side {
        // (M W)[o, i] = sum_m M[o, m] W[m, i]: the MPO's in-legs meet the
        // gate's row (out) legs, the gate's column legs become the new ins.
        MergeSide::Below => {
            let t = contract(t2, &g4, &[(2, 0), (4, 1)])?; // (l, o1, o2, r, c1, c2)
            t.transpose(&[0, 1, 4, 2, 5, 3])
        }
        // (W M)[o, i] = sum_m W[o, m] M[m, i]: the MPO's out-legs meet the
        // gate's column legs, the gate's row legs become the new outs.
        MergeSide::Above => {
            let t = contract(t2, &g4, &[(1, 2), (3, 3)])?; // (l, i1, i2, r, r1, r2)
            t.transpose(&[0, 4, 1, 5, 2, 3])
        }
    }
}

fn sweep_left_to_right(
    base: &Mpo,
    gate_at: &HashMap<usize, &DenseTensor>,
    side: MergeSide,
    chi_max: usize,
    report: &mut MergeReport,
) -> Result<Mpo> {
    let n = base.n_sites();
    let mut tensors: Vec<DenseTensor> = Vec::with_capacity(n);
    // residual with axes (new left bond, old bond)
    let mut res = DenseTensor::identity(1);
    let mut k = 0usize;
    while k < n {
        if let Some(gate) = gate_at.get(&k) {
            let t1 = contract(&res, base.tensor(k), &[(1, 0)])?; // (a, o1, i1, b2)
            let t2 = contract(&t1, base.tensor(k + 1), &[(3, 0)])?; // (a, o1, i1, o2, i2, b3)
            let merged = apply_gate_to_pair(&t2, gate, side)?;
            let a = merged.shape()[0];
            let b3 = merged.shape()[5];
            let kmat = merged.reshape(&[a * 4, 4 * b3])?;
            let svd = svd_truncate(&kmat, chi_max)?;
            report.total_discarded_weight += svd.discarded_weight;
            let s = svd.rank();
            tensors.push(svd.left_isometry.reshape(&[a, PHYS_DIM, PHYS_DIM, s])?);
            let rest = svd.weighted_right(); // (s, 4*b3)
            if k + 1 == n - 1 {
                tensors.push(rest.reshape(&[s, PHYS_DIM, PHYS_DIM, 1])?);
                res = DenseTensor::identity(1);
            } else {
                let m2 = rest.reshape(&[s * 4, b3])?;
                let (q, r) = qr_isometry(&m2)?;
                let rp = q.shape()[1];
                tensors.push(q.reshape(&[s, PHYS_DIM, PHYS_DIM, rp])?);
                res = r;
            }
            k += 2;
        } else {
            let t = contract(&res, base.tensor(k), &[(1, 0)])?; // (a, o, i, b2)
            let a = t.shape()[0];
            let b2 = t.shape()[3];
            if k == n - 1 {
                tensors.push(t);
                res = DenseTensor::identity(1);
            } else {
                let m2 = t.reshape(&[a * 4, b2])?;
                let (q, r) = qr_isometry(&m2)?;
                let rp = q.shape()[1];
                tensors.push(q.reshape(&[a, PHYS_DIM, PHYS_DIM, rp])?);
                res = r;
            }
            k += 1;
        }
    }
    Mpo::new(tensors, CanonicalForm::Left)
}

fn sweep_right_to_left(
    base: &Mpo,
    gate_at: &HashMap<usize, &DenseTensor>,
    side: MergeSide,
    chi_max: usize,
    report: &mut MergeReport,
) -> Result<Mpo> {
    let n = base.n_sites();
    let mut tensors: Vec<Option<DenseTensor>> = vec![None; n];
    // residual with axes (old bond, new right bond)
    let mut res = DenseTensor::identity(1);
    let mut k = n - 1;
    loop {
        let gated = k > 0 && gate_at.contains_key(&(k - 1));
        if gated {
            let gate = gate_at[&(k - 1)];
            let t1 = contract(base.tensor(k), &res, &[(3, 0)])?; // (b2, o2, i2, a)
            let t2 = contract(base.tensor(k - 1), &t1, &[(3, 0)])?; // (b1, o1, i1, o2, i2, a)
            let merged = apply_gate_to_pair(&t2, gate, side)?;
            let b1 = merged.shape()[0];
            let a = merged.shape()[5];
            let kmat = merged.reshape(&[b1 * 4, 4 * a])?;
            let svd = svd_truncate(&kmat, chi_max)?;
            report.total_discarded_weight += svd.discarded_weight;
            let s = svd.rank();
            tensors[k] = Some(svd.right_factor.reshape(&[s, PHYS_DIM, PHYS_DIM, a])?);
            // left factor carries the weight; extract a right-isometry from it
            let mut ul = svd.left_isometry; // (4*b1, s)
            for i in 0..ul.shape()[0] {
                for j in 0..s {
                    let v = ul.get(&[i, j]) * svd.singular_values[j];
                    ul.set(&[i, j], v);
                }
            }
            if k - 1 == 0 {
                tensors[0] = Some(ul.reshape(&[1, PHYS_DIM, PHYS_DIM, s])?);
                break;
            }
            let m2 = ul.reshape(&[b1, 4 * s])?;
            let (r, q) = rq_isometry(&m2)?;
            let rp = q.shape()[0];
            tensors[k - 1] = Some(q.reshape(&[rp, PHYS_DIM, PHYS_DIM, s])?);
            res = r;
            k -= 2;
        } else {
            let t = contract(base.tensor(k), &res, &[(3, 0)])?; // (b1, o, i, a)
            let b1 = t.shape()[0];
            let a = t.shape()[3];
            if k == 0 {
                tensors[0] = Some(t);
                break;
            }
            let m2 = t.reshape(&[b1, 4 * a])?;
            let (r, q) = rq_isometry(&m2)?;
            let rp = q.shape()[0];
            tensors[k] = Some(q.reshape(&[rp, PHYS_DIM, PHYS_DIM, a])?);
            res = r;
            k -= 1;
        }
    }
    Mpo::new(
        tensors
            .into_iter()
            .map(|t| t.expect("all sites set"))
            .collect(),
        CanonicalForm::Right,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{BrickwallCircuit, GatePlacement, LayerOffset, UnitaryGate};
    use crate::linalg::random_unitary;
    use crate::mpo::tests_support::random_mpo;
    use crate::mpo::{hs_cost, Mpo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn full_layer(n: usize, offset: LayerOffset, seed: u64) -> Layer {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gates = offset
            .pairs(n)
            .into_iter()
            .enumerate()
            .map(|(i, qubits)| UnitaryGate {
                matrix: random_unitary(4, &mut rng),
                placement: GatePlacement {
                    layer: 0,
                    index: i,
                    qubits,
                },
            })
            .collect();
        Layer { offset, gates }
    }

    fn layer_dense(n: usize, layer: &Layer) -> DenseTensor {
        crate::circuit::dense_layer(n, layer).unwrap()
    }

    #[test]
    fn identity_layer_leaves_dense_unchanged() {
        let n = 6;
        let m = random_mpo(n, 3, 80);
        let dense = m.to_dense().unwrap();
        let layer = BrickwallCircuit::identity_layer(n, 0, LayerOffset::Even);
        for sweep in [SweepDir::LeftToRight, SweepDir::RightToLeft] {
            let (merged, report) =
                merge_layer(&m, &layer, MergeSide::Below, sweep, usize::MAX).unwrap();
            assert!(merged.to_dense().unwrap().max_abs_diff(&dense) < 1e-12);
            assert!(report.total_discarded_weight < 1e-20);
            assert!(merged.canonical_error() < 1e-10);
        }
    }

    #[test]
    fn merge_matches_dense_product_both_sides_and_sweeps() {
        let n = 6;
        let m = random_mpo(n, 3, 81);
        let md = m.to_dense().unwrap();
        for (li, offset) in [(0usize, LayerOffset::Even), (1, LayerOffset::Odd)] {
            let layer = full_layer(n, offset, 90 + li as u64);
            let wd = layer_dense(n, &layer);
            for sweep in [SweepDir::LeftToRight, SweepDir::RightToLeft] {
                let (below, rep) =
                    merge_layer(&m, &layer, MergeSide::Below, sweep, usize::MAX).unwrap();
                let want = md.matmul(&wd).unwrap();
                assert!(
                    below.to_dense().unwrap().max_abs_diff(&want) < 1e-12,
                    "below/{sweep:?}"
                );
                assert!(rep.total_discarded_weight < 1e-18);

                let (above, _) =
                    merge_layer(&m, &layer, MergeSide::Above, sweep, usize::MAX).unwrap();
                let want = wd.matmul(&md).unwrap();
                assert!(
                    above.to_dense().unwrap().max_abs_diff(&want) < 1e-12,
                    "above/{sweep:?}"
                );
            }
        }
    }

    #[test]
    fn chi_one_forces_truncation_on_entangling_layer() {
        let n = 4;
        let m = Mpo::identity(n).unwrap();
        let layer = full_layer(n, LayerOffset::Even, 92);
        let (merged, report) =
            merge_layer(&m, &layer, MergeSide::Below, SweepDir::LeftToRight, 1).unwrap();
        assert!(report.total_discarded_weight > 1e-6);
        assert_eq!(merged.max_bond(), 1);
    }

    #[test]
    fn discarded_weight_is_monotone_in_chi() {
        let n = 6;
        let m = random_mpo(n, 4, 83);
        let layer = full_layer(n, LayerOffset::Even, 93);
        let mut prev = f64::INFINITY;
        for chi in [1usize, 2, 4, 8, 16] {
            let (_, rep) =
                merge_layer(&m, &layer, MergeSide::Below, SweepDir::LeftToRight, chi).unwrap();
            assert!(
                rep.total_discarded_weight <= prev + 1e-12,
                "chi={chi}: {} > {prev}",
                rep.total_discarded_weight
            );
            prev = rep.total_discarded_weight;
        }
    }

    #[test]
    fn merge_auto_canonicalizes_wrong_form() {
        let n = 4;
        let m = random_mpo(n, 2, 84); // right-canonical
        let layer = full_layer(n, LayerOffset::Even, 94);
        // right-to-left sweep wants a left-canonical input; this one is not
        let wd = layer_dense(n, &layer);
        let want = m.to_dense().unwrap().matmul(&wd).unwrap();
        let (merged, _) = merge_layer(
            &m,
            &layer,
            MergeSide::Below,
            SweepDir::RightToLeft,
            usize::MAX,
        )
        .unwrap();
        assert!(merged.to_dense().unwrap().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn odd_layer_passes_untouched_sites_through() {
        let n = 5;
        let m = random_mpo(n, 3, 85);
        let layer = full_layer(n, LayerOffset::Odd, 95);
        let wd = layer_dense(n, &layer);
        let want = m.to_dense().unwrap().matmul(&wd).unwrap();
        for sweep in [SweepDir::LeftToRight, SweepDir::RightToLeft] {
            let (merged, _) = merge_layer(&m, &layer, MergeSide::Below, sweep, usize::MAX).unwrap();
            assert!(merged.to_dense().unwrap().max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn truncated_merge_stays_close_in_hs_cost() {
        let n = 6;
        let m = random_mpo(n, 2, 86);
        let layer = full_layer(n, LayerOffset::Even, 96);
        let (exact, _) = merge_layer(
            &m,
            &layer,
            MergeSide::Below,
            SweepDir::LeftToRight,
            usize::MAX,
        )
        .unwrap();
        let (trunc, rep) =
            merge_layer(&m, &layer, MergeSide::Below, SweepDir::LeftToRight, 4).unwrap();
        let cost = hs_cost(&exact, &trunc).unwrap();
        assert!(cost < 0.5);
        assert!(rep.max_bond_reached <= 4);
    }
}
