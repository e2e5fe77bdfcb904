//! Overlap, cost and gradient evaluation via cached tensor-network
//! environments.
//!
//! The overlap is `T(W) = Tr(U_ref^dag W)`. Cutting one gate out of the
//! trace network leaves a 4x4 environment, which is the holomorphic partial
//! derivative of `T` with respect to that gate's entries. A top-to-bottom
//! sweep stores the per-layer top environments; a bottom-to-top sweep keeps
//! a rolling bottom environment and, per layer, caches right boundaries in a
//! right-to-left pass before producing every partial derivative in a
//! left-to-right pass. The loss gradient follows from the Wirtinger rule
//! `grad L = -2 T(W) conj(dT/dG)`.

use num_complex::Complex64;

use crate::circuit::{BrickwallCircuit, Layer};
use crate::linalg::{contract, DenseTensor};
use crate::model::{weyl_jacobian, WeylCircuit};
use crate::mpo::{merge_layer, CanonicalForm, MergeSide, Mpo, SweepDir};
use crate::{Error, Result};

/// Costs, overlap and per-gate Euclidean gradient of one circuit.
#[derive(Debug, Clone)]
pub struct GradientResult {
    /// `T(W) = Tr(U_ref^dag W)`.
    pub overlap: Complex64,
    /// `1 - |T|^2 / d^2`.
    pub cost_hs: f64,
    /// `1 - Re(T) / d`.
    pub cost_frobenius: f64,
    /// Holomorphic partials `dT/dG`, indexed like the circuit's gates.
    pub overlap_partials: Vec<Vec<DenseTensor>>,
    /// `grad L = -2 T conj(dT/dG)` per gate.
    pub euclidean_gradient: Vec<Vec<DenseTensor>>,
}

impl GradientResult {
    pub fn gradient_norm(&self) -> f64 {
        self.euclidean_gradient
            .iter()
            .flatten()
            .map(|g| g.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Pick the merge sweep that consumes the MPO's current canonical form
/// without an extra canonicalization pass.
fn natural_sweep(m: &Mpo) -> SweepDir {
    match m.canonical_form() {
        CanonicalForm::Left => SweepDir::RightToLeft,
        _ => SweepDir::LeftToRight,
    }
}

/// Top environments `tops[l] = U_ref^dag W^{L-1} ... W^{l+1}` for every
/// layer, truncated at `chi_max`; `tops[L-1]` is the adjoint reference.
pub fn top_environments(
    circuit: &BrickwallCircuit,
    u_ref: &Mpo,
    chi_max: usize,
) -> Result<Vec<Mpo>> {
    let n_layers = circuit.n_layers();
    let mut tops: Vec<Mpo> = Vec::with_capacity(n_layers);
    let mut current = u_ref.adjoint();
    if n_layers == 0 {
        return Ok(tops);
    }
    tops.push(current.clone());
    for l in (1..n_layers).rev() {
        let (merged, _) = merge_layer(
            &current,
            circuit.layer(l),
            MergeSide::Below,
            natural_sweep(&current),
            chi_max,
        )?;
        current = merged;
        tops.push(current.clone());
    }
    tops.reverse();
    Ok(tops)
}

/// Bottom environments `bottoms[l] = W^{l-1} ... W^0` for every layer;
/// `bottoms[0]` is the identity MPO.
pub fn bottom_environments(circuit: &BrickwallCircuit, chi_max: usize) -> Result<Vec<Mpo>> {
    let n_layers = circuit.n_layers();
    let mut bottoms = Vec::with_capacity(n_layers);
    let mut current = Mpo::identity(circuit.n_qubits())?;
    for l in 0..n_layers {
        bottoms.push(current.clone());
        if l + 1 < n_layers {
            let (merged, _) = merge_layer(
                &current,
                circuit.layer(l),
                MergeSide::Above,
                natural_sweep(&current),
                chi_max,
            )?;
            current = merged;
        }
    }
    Ok(bottoms)
}

/// Boundary contraction machinery for one layer sandwiched between a top
/// and a bottom environment MPO.
///
/// Boundary tensors carry the top and bottom bond indices at a vertical cut
/// of the trace network; the physical legs are closed site by site (top in
/// meets gate out, gate in meets bottom out, bottom in wraps to top out).
pub struct LayerEnvironments<'a> {
    pub top: &'a Mpo,
    pub bottom: &'a Mpo,
}

impl<'a> LayerEnvironments<'a> {
    pub fn new(top: &'a Mpo, bottom: &'a Mpo) -> Self {
        Self { top, bottom }
    }

    pub fn boundary_start() -> DenseTensor {
        DenseTensor::identity(1)
    }

    /// Absorb the gate-free site `k` into a left boundary.
    pub fn absorb_single_left(&self, env: &DenseTensor, k: usize) -> Result<DenseTensor> {
        let a = self.top.tensor(k);
        let b = self.bottom.tensor(k);
        let t1 = contract(env, a, &[(0, 0)])?; // (bl, ao, am, ar)
                                               // bottom legs (bl, bo, bi, br): bo meets am, bi meets ao
        contract(&t1, b, &[(0, 0), (1, 2), (2, 1)])
    }

    /// Absorb the gate-free site `k` into a right boundary.
    pub fn absorb_single_right(&self, env: &DenseTensor, k: usize) -> Result<DenseTensor> {
        let a = self.top.tensor(k);
        let b = self.bottom.tensor(k);
        let t1 = contract(a, env, &[(3, 0)])?; // (al, ao, am, br_env)
        contract(&t1, b, &[(3, 3), (1, 2), (2, 1)])
    }

    /// Environment of the pair `(k, k+1)` with the gate cut out, plus the
    /// pair tensor reusable for boundary updates.
    fn pair_block(&self, l_env: &DenseTensor, k: usize) -> Result<DenseTensor> {
        let a1 = self.top.tensor(k);
        let a2 = self.top.tensor(k + 1);
        let b1 = self.bottom.tensor(k);
        let b2 = self.bottom.tensor(k + 1);
        let x = contract(l_env, a1, &[(0, 0)])?; // (bl, ao1, am1, amid)
        let x = contract(&x, b1, &[(0, 0), (1, 2)])?; // (am1, amid, bo1, bmid)
        let x = contract(&x, a2, &[(1, 0)])?; // (am1, bo1, bmid, ao2, am2, ar)
        contract(&x, b2, &[(2, 0), (3, 2)])
        // -> (am1, bo1, am2, ar, bo2, br)
    }

    /// `dT/dG` of the gate at `(k, k+1)`: rows are the gate's out legs,
    /// columns its in legs.
    pub fn gate_environment(
        &self,
        l_env: &DenseTensor,
        r_env: &DenseTensor,
        k: usize,
    ) -> Result<DenseTensor> {
        let x = self.pair_block(l_env, k)?;
        let m = contract(&x, r_env, &[(3, 0), (5, 1)])?; // (am1, bo1, am2, bo2)
        m.transpose(&[0, 2, 1, 3])?.reshape(&[4, 4])
    }

    /// Absorb the gated pair at `(k, k+1)` into a left boundary.
    pub fn absorb_pair_left(
        &self,
        l_env: &DenseTensor,
        k: usize,
        gate: &DenseTensor,
    ) -> Result<DenseTensor> {
        let x = self.pair_block(l_env, k)?; // (am1, bo1, am2, ar, bo2, br)
        let g4 = gate.reshape(&[2, 2, 2, 2])?; // (go1, go2, gi1, gi2)
        contract(&x, &g4, &[(0, 0), (2, 1), (1, 2), (4, 3)])
        // -> (ar, br)
    }

    /// Absorb the gated pair at `(k, k+1)` into a right boundary.
    pub fn absorb_pair_right(
        &self,
        r_env: &DenseTensor,
        k: usize,
        gate: &DenseTensor,
    ) -> Result<DenseTensor> {
        let a1 = self.top.tensor(k);
        let a2 = self.top.tensor(k + 1);
        let b1 = self.bottom.tensor(k);
        let b2 = self.bottom.tensor(k + 1);
        let x = contract(a2, r_env, &[(3, 0)])?; // (amid_a, ao2, am2, br_env)
        let x = contract(&x, b2, &[(3, 3), (1, 2)])?; // (amid_a, am2, bmid, bo2)
        let x = contract(a1, &x, &[(3, 0)])?; // (al, ao1, am1, am2, bmid, bo2)
        let x = contract(&x, b1, &[(4, 3), (1, 2)])?; // (al, am1, am2, bo2, bl, bo1)
        let g4 = gate.reshape(&[2, 2, 2, 2])?;
        let y = contract(&x, &g4, &[(1, 0), (2, 1), (5, 2), (3, 3)])?; // (al, bl)
        Ok(y)
    }

    /// Right boundaries at every clean cut of the layer: `r[k]` covers the
    /// sites `k..`, skipping cuts crossed by a gate.
    pub fn right_boundaries(&self, layer: &Layer) -> Result<Vec<Option<DenseTensor>>> {
        let n = self.top.n_sites();
        let mut gate_at = vec![None; n];
        for g in &layer.gates {
            gate_at[g.placement.qubits.0] = Some(&g.matrix);
        }
        let mut bounds: Vec<Option<DenseTensor>> = vec![None; n + 1];
        let mut env = Self::boundary_start();
        bounds[n] = Some(env.clone());
        let mut k = n;
        while k > 0 {
            if k >= 2 {
                if let Some(gate) = gate_at[k - 2] {
                    env = self.absorb_pair_right(&env, k - 2, gate)?;
                    k -= 2;
                    bounds[k] = Some(env.clone());
                    continue;
                }
            }
            env = self.absorb_single_right(&env, k - 1)?;
            k -= 1;
            if k == 0 || gate_at[k - 1].is_none() {
                bounds[k] = Some(env.clone());
            }
        }
        Ok(bounds)
    }
}

/// Partial derivatives of every gate in one layer; also returns the overlap
/// estimate obtained by closing the first gate's environment.
fn layer_partials(
    top: &Mpo,
    bottom: &Mpo,
    layer: &Layer,
) -> Result<(Vec<DenseTensor>, Option<Complex64>)> {
    let envs = LayerEnvironments::new(top, bottom);
    let rights = envs.right_boundaries(layer)?;
    let mut partials = Vec::with_capacity(layer.gates.len());
    let mut overlap = None;
    let mut l_env = LayerEnvironments::boundary_start();
    let mut k = 0usize;
    let mut gate_iter = layer.gates.iter().peekable();
    let n = top.n_sites();
    while k < n {
        if let Some(g) = gate_iter.peek() {
            if g.placement.qubits.0 == k {
                let r_env = rights[k + 2]
                    .as_ref()
                    .expect("cut right of a gate is clean");
                let m = envs.gate_environment(&l_env, r_env, k)?;
                if overlap.is_none() {
                    let t = contract(&m, &g.matrix, &[(0, 0), (1, 1)])?;
                    overlap = Some(t.data()[0]);
                }
                l_env = envs.absorb_pair_left(&l_env, k, &g.matrix)?;
                partials.push(m);
                gate_iter.next();
                k += 2;
                continue;
            }
        }
        l_env = envs.absorb_single_left(&l_env, k)?;
        k += 1;
    }
    Ok((partials, overlap))
}

/// Full evaluation: overlap, costs and all per-gate gradients.
///
/// Layer merges into the top/bottom environments are truncated at
/// `chi_max`; the left/right boundary tensors are exact.
pub fn evaluate(circuit: &BrickwallCircuit, u_ref: &Mpo, chi_max: usize) -> Result<GradientResult> {
    if circuit.n_qubits() != u_ref.n_sites() {
        return Err(Error::Param(format!(
            "circuit acts on {} qubits but the reference has {} sites",
            circuit.n_qubits(),
            u_ref.n_sites()
        )));
    }
    let n_layers = circuit.n_layers();
    let tops = top_environments(circuit, u_ref, chi_max)?;
    let mut bottom = Mpo::identity(circuit.n_qubits())?;
    let mut partials: Vec<Vec<DenseTensor>> = Vec::with_capacity(n_layers);
    let mut overlap: Option<Complex64> = None;
    for l in 0..n_layers {
        let layer = circuit.layer(l);
        let (layer_parts, t) = layer_partials(&tops[l], &bottom, layer)?;
        if overlap.is_none() {
            overlap = t;
        }
        partials.push(layer_parts);
        if l + 1 < n_layers {
            let (merged, _) = merge_layer(
                &bottom,
                layer,
                MergeSide::Above,
                natural_sweep(&bottom),
                chi_max,
            )?;
            bottom = merged;
        }
    }
    let overlap = match overlap {
        Some(t) => t,
        // a gate-free circuit: the overlap is the trace of the reference
        None => u_ref.adjoint().trace()?,
    };
    Ok(assemble_result(circuit, overlap, partials))
}

fn assemble_result(
    circuit: &BrickwallCircuit,
    overlap: Complex64,
    partials: Vec<Vec<DenseTensor>>,
) -> GradientResult {
    let d = (1u64 << circuit.n_qubits()) as f64;
    let cost_hs = 1.0 - overlap.norm_sqr() / (d * d);
    let cost_frobenius = 1.0 - overlap.re / d;
    let scale = -2.0 * overlap;
    let euclidean_gradient = partials
        .iter()
        .map(|row| row.iter().map(|m| m.conj().scale(scale)).collect())
        .collect();
    GradientResult {
        overlap,
        cost_hs,
        cost_frobenius,
        overlap_partials: partials,
        euclidean_gradient,
    }
}

/// Overlap and both costs without gradients: merge every layer into the
/// adjoint reference (no truncation) and take the trace.
pub fn cost_only(circuit: &BrickwallCircuit, u_ref: &Mpo) -> Result<(Complex64, f64, f64)> {
    if circuit.n_qubits() != u_ref.n_sites() {
        return Err(Error::Param(format!(
            "circuit acts on {} qubits but the reference has {} sites",
            circuit.n_qubits(),
            u_ref.n_sites()
        )));
    }
    let mut acc = u_ref.adjoint();
    for l in (0..circuit.n_layers()).rev() {
        let (merged, _) = merge_layer(
            &acc,
            circuit.layer(l),
            MergeSide::Below,
            natural_sweep(&acc),
            usize::MAX,
        )?;
        acc = merged;
    }
    let t = acc.trace()?;
    let d = (1u64 << circuit.n_qubits()) as f64;
    Ok((t, 1.0 - t.norm_sqr() / (d * d), 1.0 - t.re / d))
}

/// Loss gradient with respect to the 15 Weyl parameters of every gate:
/// the chain rule pairs the gate gradient with each Jacobian direction.
pub fn parameter_gradient(
    weyl: &WeylCircuit,
    u_ref: &Mpo,
    chi_max: usize,
) -> Result<Vec<Vec<[f64; 15]>>> {
    let circuit = weyl.to_circuit()?;
    let res = evaluate(&circuit, u_ref, chi_max)?;
    let mut out = Vec::with_capacity(weyl.layers.len());
    for (l, layer) in weyl.layers.iter().enumerate() {
        let mut row = Vec::with_capacity(layer.params.len());
        for (i, params) in layer.params.iter().enumerate() {
            let jac = weyl_jacobian(params)?;
            let grad = &res.euclidean_gradient[l][i];
            let mut g = [0.0; 15];
            for (slot, j) in g.iter_mut().zip(&jac) {
                *slot = grad.inner(j).re;
            }
            row.push(g);
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tests_support::random_circuit;
    use crate::circuit::LayerOffset;
    use crate::linalg::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Dense overlap `Tr(U_ref^dag W)` with one gate's matrix replaced,
    /// the independent oracle for the partial derivatives.
    fn dense_overlap_with(
        circuit: &BrickwallCircuit,
        u_ref_dense: &DenseTensor,
        replace: Option<(usize, usize, &DenseTensor)>,
    ) -> Complex64 {
        let n = circuit.n_qubits();
        let d = 1usize << n;
        let mut w = DenseTensor::identity(d);
        for (l, layer) in circuit.layers().iter().enumerate() {
            let mut m = DenseTensor::identity(1);
            let mut q = 0usize;
            let mut gates = layer.gates.iter().peekable();
            while q < n {
                if let Some(g) = gates.peek() {
                    if g.placement.qubits.0 == q {
                        let mat = match replace {
                            Some((rl, ri, alt)) if rl == l && ri == g.placement.index => alt,
                            _ => &g.matrix,
                        };
                        m = m.kron(mat).unwrap();
                        gates.next();
                        q += 2;
                        continue;
                    }
                }
                m = m.kron(&DenseTensor::identity(2)).unwrap();
                q += 1;
            }
            w = m.matmul(&w).unwrap();
        }
        u_ref_dense.inner(&w)
    }

    #[test]
    fn overlap_matches_dense_oracle() {
        let c = random_circuit(4, 3, 140);
        let mut rng = ChaCha12Rng::seed_from_u64(141);
        let u = random_unitary(16, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, 4).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        let want = dense_overlap_with(&c, &u, None);
        assert!((res.overlap - want).norm() < 1e-10 * want.norm().max(1.0));
        let (t2, chs, cf) = cost_only(&c, &u_ref).unwrap();
        assert!((t2 - want).norm() < 1e-10 * want.norm().max(1.0));
        assert!((chs - res.cost_hs).abs() < 1e-12);
        assert!((cf - res.cost_frobenius).abs() < 1e-12);
    }

    #[test]
    fn identity_reference_gives_factorized_trace() {
        // a lone gate among identity padding: T = 2^(N-2) Tr(G)
        let n = 4;
        let mut rng = ChaCha12Rng::seed_from_u64(142);
        let g = random_unitary(4, &mut rng);
        let c = BrickwallCircuit::from_layer_matrices(n, vec![(LayerOffset::Odd, vec![g.clone()])])
            .unwrap();
        let u_ref = Mpo::identity(n).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        let want = g.trace().unwrap() * Complex64::new(4.0, 0.0);
        assert!((res.overlap - want).norm() < 1e-10);
    }

    #[test]
    fn partials_match_dense_finite_differences() {
        let n = 4;
        let c = random_circuit(n, 3, 143);
        let mut rng = ChaCha12Rng::seed_from_u64(144);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        let step = 1e-6;
        for (l, layer) in c.layers().iter().enumerate() {
            for (i, gate) in layer.gates.iter().enumerate() {
                let m = &res.overlap_partials[l][i];
                // T is linear in the gate entries: probe two random entries
                // in both real and imaginary directions
                for &(r, s) in &[(0usize, 0usize), (2usize, 3usize)] {
                    for re_dir in [true, false] {
                        let delta = if re_dir {
                            Complex64::new(step, 0.0)
                        } else {
                            Complex64::new(0.0, step)
                        };
                        let mut up = gate.matrix.clone();
                        up.set(&[r, s], up.get(&[r, s]) + delta);
                        let mut dn = gate.matrix.clone();
                        dn.set(&[r, s], dn.get(&[r, s]) - delta);
                        let tu = dense_overlap_with(&c, &u, Some((l, i, &up)));
                        let td = dense_overlap_with(&c, &u, Some((l, i, &dn)));
                        let fd = (tu - td) / (2.0 * step);
                        let want = if re_dir {
                            m.get(&[r, s])
                        } else {
                            m.get(&[r, s]) * Complex64::new(0.0, 1.0)
                        };
                        assert!(
                            (fd - want).norm() < 1e-6 * want.norm().max(1.0),
                            "layer {l} gate {i} entry ({r},{s}) re_dir {re_dir}: fd {fd}, got {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn self_reference_is_stationary() {
        // the reference equals the circuit: cost vanishes and the
        // Riemannian gradient (tangent projection) is zero
        use crate::stiefel::riemannian_gradient;
        let n = 4;
        let c = random_circuit(n, 2, 145);
        let dense = c.to_dense().unwrap();
        let u_ref = Mpo::from_dense(&dense, usize::MAX, n).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        assert!(res.cost_hs < 1e-12, "cost {}", res.cost_hs);
        let rie = riemannian_gradient(&c, &res.euclidean_gradient).unwrap();
        assert!(rie.norm() < 1e-8, "riemannian norm {}", rie.norm());
    }

    #[test]
    fn phase_invariance_of_cost_and_gradient_norm() {
        let n = 4;
        let c = random_circuit(n, 2, 146);
        let mut rng = ChaCha12Rng::seed_from_u64(147);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let phased =
            Mpo::from_dense(&u.scale(Complex64::from_polar(1.0, 1.234)), usize::MAX, n).unwrap();
        let a = evaluate(&c, &u_ref, usize::MAX).unwrap();
        let b = evaluate(&c, &phased, usize::MAX).unwrap();
        assert!((a.cost_hs - b.cost_hs).abs() < 1e-12);
        for (ra, rb) in a.euclidean_gradient.iter().zip(&b.euclidean_gradient) {
            for (ga, gb) in ra.iter().zip(rb) {
                assert!((ga.frobenius_norm() - gb.frobenius_norm()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn environment_recursions_hold_densely() {
        let n = 4;
        let c = random_circuit(n, 3, 148);
        let mut rng = ChaCha12Rng::seed_from_u64(149);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let tops = top_environments(&c, &u_ref, usize::MAX).unwrap();
        // top recursion: E_top^(l-1) = E_top^l W^l
        assert!(
            tops[c.n_layers() - 1]
                .to_dense()
                .unwrap()
                .max_abs_diff(&u.adjoint().unwrap())
                < 1e-11
        );
        for l in (1..c.n_layers()).rev() {
            let want = tops[l]
                .to_dense()
                .unwrap()
                .matmul(&c.layer_to_dense(l).unwrap())
                .unwrap();
            assert!(tops[l - 1].to_dense().unwrap().max_abs_diff(&want) < 1e-11);
        }
        // bottom recursion: E_bottom^(l+1) = W^l E_bottom^l
        let bottoms = bottom_environments(&c, usize::MAX).unwrap();
        assert!(bottoms[0].max_bond() == 1);
        for l in 0..c.n_layers() - 1 {
            let want = c
                .layer_to_dense(l)
                .unwrap()
                .matmul(&bottoms[l].to_dense().unwrap())
                .unwrap();
            assert!(bottoms[l + 1].to_dense().unwrap().max_abs_diff(&want) < 1e-11);
        }
    }

    #[test]
    fn cost_relation_between_hs_and_frobenius() {
        let c = random_circuit(4, 3, 150);
        let mut rng = ChaCha12Rng::seed_from_u64(151);
        let u = random_unitary(16, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, 4).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        assert!(res.cost_hs <= 2.0 * res.cost_frobenius + 1e-12);
        assert!(res.cost_hs >= -1e-12 && res.cost_hs <= 1.0 + 1e-12);
    }

    #[test]
    fn qubit_mismatch_is_rejected() {
        let c = random_circuit(4, 2, 152);
        let u_ref = Mpo::identity(6).unwrap();
        assert!(matches!(
            evaluate(&c, &u_ref, usize::MAX),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn weyl_parameter_gradient_matches_finite_differences() {
        use crate::model::{WeylLayer, WeylParams};
        use rand::Rng;
        let n = 4;
        let mut rng = ChaCha12Rng::seed_from_u64(153);
        let mut layers = Vec::new();
        for offset in [LayerOffset::Even, LayerOffset::Odd] {
            let params = offset
                .pairs(n)
                .iter()
                .map(|_| {
                    let mut flat = [0.0; 15];
                    for x in &mut flat {
                        *x = rng.gen_range(-1.5..1.5);
                    }
                    WeylParams::from_flat(&flat)
                })
                .collect();
            layers.push(WeylLayer { offset, params });
        }
        let weyl = WeylCircuit {
            n_qubits: n,
            layers,
        };
        let mut rng2 = ChaCha12Rng::seed_from_u64(154);
        let u = random_unitary(1 << n, &mut rng2);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let grads = parameter_gradient(&weyl, &u_ref, usize::MAX).unwrap();

        let loss = |w: &WeylCircuit| -> f64 {
            let c = w.to_circuit().unwrap();
            let t = u.inner(&c.to_dense().unwrap());
            -t.norm_sqr()
        };
        let step = 1e-6;
        for l in 0..weyl.layers.len() {
            for i in 0..weyl.layers[l].params.len() {
                let flat = weyl.layers[l].params[i].to_flat();
                for k in 0..15 {
                    let mut up = weyl.clone();
                    let mut fu = flat;
                    fu[k] += step;
                    up.layers[l].params[i] = WeylParams::from_flat(&fu);
                    let mut dn = weyl.clone();
                    let mut fd_ = flat;
                    fd_[k] -= step;
                    dn.layers[l].params[i] = WeylParams::from_flat(&fd_);
                    let fd = (loss(&up) - loss(&dn)) / (2.0 * step);
                    let got = grads[l][i][k];
                    let scale = fd.abs().max(1.0);
                    assert!(
                        (fd - got).abs() < 2e-5 * scale,
                        "layer {l} gate {i} param {k}: fd {fd}, got {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn directional_derivative_matches_gradient_pairing() {
        // (L(R(W, t xi)) - L(W)) / t approaches the bundle pairing
        // sum Re Tr(grad^dag xi) as t -> 0
        use crate::stiefel::{project_to_tangent, retract_polar, TangentVector};
        let n = 4;
        let c = random_circuit(n, 3, 157);
        let mut rng = ChaCha12Rng::seed_from_u64(158);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let res = evaluate(&c, &u_ref, usize::MAX).unwrap();
        // random tangent bundle
        use rand::Rng;
        let mut xis: Vec<Vec<TangentVector>> = Vec::new();
        let mut pairing = 0.0;
        for (l, layer) in c.layers().iter().enumerate() {
            let mut row = Vec::new();
            for (i, _) in layer.gates.iter().enumerate() {
                let data = (0..16)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let raw = DenseTensor::from_data(&[4, 4], data).unwrap();
                let xi = project_to_tangent(c.gate(l, i), &raw).unwrap();
                pairing += res.euclidean_gradient[l][i].inner(&xi.matrix).re;
                row.push(xi);
            }
            xis.push(row);
        }
        let loss = |w: &BrickwallCircuit| -> f64 { -u.inner(&w.to_dense().unwrap()).norm_sqr() };
        let t = 1e-5;
        let mut moved = c.clone();
        for (l, row) in xis.iter().enumerate() {
            for (i, xi) in row.iter().enumerate() {
                let scaled = TangentVector {
                    matrix: xi.matrix.scale(Complex64::new(t, 0.0)),
                    placement: xi.placement,
                };
                let g = retract_polar(c.gate(l, i), &scaled).unwrap();
                moved.set_gate_matrix(l, i, g.matrix);
            }
        }
        let slope = (loss(&moved) - loss(&c)) / t;
        let rel = (slope - pairing).abs() / pairing.abs().max(1.0);
        assert!(rel <= 1e-4, "directional derivative off by {rel:.2e}");
    }

    #[test]
    fn evaluate_cost_scales_linearly_in_gate_count() {
        // smoke check of the contraction-cost scaling: tripling the layer
        // count must not blow the wall time up superlinearly
        let n = 6;
        let mut rng = ChaCha12Rng::seed_from_u64(159);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, 16, n).unwrap();
        let time_l = |layers: usize| -> f64 {
            let c = random_circuit(n, layers, 300 + layers as u64);
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let t0 = std::time::Instant::now();
                let _ = evaluate(&c, &u_ref, 16).unwrap();
                best = best.min(t0.elapsed().as_secs_f64());
            }
            best
        };
        // skip the bond-growth transient: all three sizes are past the
        // chi = 16 saturation point, where the marginal layer cost is flat
        let sizes = [8usize, 16, 24];
        let times: Vec<f64> = sizes.iter().map(|&l| time_l(l)).collect();
        let logs: Vec<(f64, f64)> = sizes
            .iter()
            .zip(&times)
            .map(|(&l, &t)| ((l as f64).ln(), t.ln()))
            .collect();
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|p| p.0).sum();
        let sy: f64 = logs.iter().map(|p| p.1).sum();
        let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
        let exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        // a smoke check, not a hard assertion: wall clocks on shared
        // machines are lumpy, so only flag growth way past linear
        println!("evaluate wall-time growth exponent in |W|: {exponent:.2} ({times:?})");
        assert!(
            exponent < 2.5,
            "evaluate wall time grows like |W|^{exponent:.2}"
        );
    }

    #[test]
    fn truncated_evaluation_tracks_exact_cost() {
        let n = 6;
        let c = random_circuit(n, 3, 155);
        let mut rng = ChaCha12Rng::seed_from_u64(156);
        let u = random_unitary(1 << n, &mut rng);
        let u_ref = Mpo::from_dense(&u, usize::MAX, n).unwrap();
        let exact = evaluate(&c, &u_ref, usize::MAX).unwrap();
        let trunc = evaluate(&c, &u_ref, 16).unwrap();
        // random references are near-maximally far; truncation error stays
        // small relative to the O(1) cost
        assert!((exact.cost_hs - trunc.cost_hs).abs() < 0.2);
    }
}
