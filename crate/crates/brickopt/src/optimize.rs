//! Optimizers: Riemannian ADAM with momentum transport and the local
//! polar-update sweep, plus stopping rules and run bookkeeping.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::BrickwallCircuit;
use crate::gradient::{
    bottom_environments, evaluate, top_environments, GradientResult, LayerEnvironments,
};
use crate::linalg::{polar_unitary_factor, DenseTensor};
use crate::mpo::{merge_layer, CanonicalForm, MergeSide, Mpo, SweepDir};
use crate::stiefel::{
    project_to_tangent, retract_polar, riemannian_gradient, TangentBundlePoint, TangentVector,
};
use crate::{Error, Result};

/// Hyperparameters of the Riemannian ADAM optimizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyperparams {
    /// Learning rate.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Guard added to `sqrt(v_t)` against division by zero.
    pub eps_div: f64,
    /// Optional classic bias correction; the plain update omits it.
    pub bias_correction: bool,
}

impl Default for AdamHyperparams {
    fn default() -> Self {
        Self {
            alpha: 1e-2,
            beta1: 0.9,
            beta2: 0.99,
            eps_div: 1e-12,
            bias_correction: false,
        }
    }
}

/// ADAM state: step counter, first momentum as a tangent bundle at the
/// current iterate, and the scalar second momentum from the bundle metric.
#[derive(Debug, Clone)]
pub struct RiemannianAdamState {
    pub step: usize,
    pub first_momentum: Option<TangentBundlePoint>,
    pub second_momentum: f64,
    pub hyper: AdamHyperparams,
}

impl RiemannianAdamState {
    pub fn new(hyper: AdamHyperparams) -> Self {
        Self {
            step: 0,
            first_momentum: None,
            second_momentum: 0.0,
            hyper,
        }
    }
}

/// One Riemannian ADAM step.
///
/// Projects the Euclidean gradient, transports the previous momentum into
/// the current tangent spaces (the stored iterate is the retraction of the
/// previous one, so transport reduces to re-projection), accumulates the
/// scalar second momentum, and retracts each gate along the scaled update.
pub fn riemannian_adam_step(
    circuit: &BrickwallCircuit,
    state: &mut RiemannianAdamState,
    grad: &GradientResult,
) -> Result<BrickwallCircuit> {
    let rie = riemannian_gradient(circuit, &grad.euclidean_gradient)?;
    let grad_sq = rie.inner(&rie);
    let h = state.hyper;

    let momentum = match state.first_momentum.take() {
        Some(prev) => {
            if !prev.matches_circuit(circuit) {
                return Err(Error::Param(
                    "momentum bundle does not match the circuit's gate index set".into(),
                ));
            }
            let mut entries = Vec::with_capacity(circuit.n_layers());
            for (l, row) in prev.layers().iter().enumerate() {
                let mut out_row = Vec::with_capacity(row.len());
                for (i, tv) in row.iter().enumerate() {
                    let transported = project_to_tangent(circuit.gate(l, i), &tv.matrix)?;
                    let combined = transported.matrix.scale(Complex64::new(h.beta1, 0.0)).add(
                        &rie.get(l, i)
                            .matrix
                            .scale(Complex64::new(1.0 - h.beta1, 0.0)),
                    )?;
                    out_row.push(TangentVector {
                        matrix: combined,
                        placement: tv.placement,
                    });
                }
                entries.push(out_row);
            }
            TangentBundlePoint::from_entries(entries)
        }
        None => rie.scale(1.0 - h.beta1),
    };
    state.second_momentum = h.beta2 * state.second_momentum + (1.0 - h.beta2) * grad_sq;
    state.step += 1;

    let (m_hat_scale, v_hat) = if h.bias_correction {
        let t = state.step as f64;
        (
            1.0 / (1.0 - h.beta1.powf(t)),
            state.second_momentum / (1.0 - h.beta2.powf(t)),
        )
    } else {
        (1.0, state.second_momentum)
    };
    let step_scale = -h.alpha * m_hat_scale / (v_hat.max(0.0).sqrt() + h.eps_div);

    let mut updated = circuit.clone();
    for (l, row) in momentum.layers().iter().enumerate() {
        for (i, tv) in row.iter().enumerate() {
            let xi = TangentVector {
                matrix: tv.matrix.scale(Complex64::new(step_scale, 0.0)),
                placement: tv.placement,
            };
            let new_gate = retract_polar(circuit.gate(l, i), &xi)?;
            updated.set_gate_matrix(l, i, new_gate.matrix);
        }
    }
    state.first_momentum = Some(momentum);
    Ok(updated)
}

/// Direction of one local-sweep step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrder {
    TopDown,
    BottomUp,
}

/// The gate-update sequence of one sweep step: layers in sweep order, each
/// layer's gates left-to-right then right-to-left (every gate twice).
pub fn sweep_gate_sequence(circuit: &BrickwallCircuit, order: SweepOrder) -> Vec<(usize, usize)> {
    let layers: Vec<usize> = match order {
        SweepOrder::TopDown => (0..circuit.n_layers()).rev().collect(),
        SweepOrder::BottomUp => (0..circuit.n_layers()).collect(),
    };
    let mut seq = Vec::new();
    for l in layers {
        let n_gates = circuit.layer(l).gates.len();
        for i in 0..n_gates {
            seq.push((l, i));
        }
        for i in (0..n_gates).rev() {
            seq.push((l, i));
        }
    }
    seq
}

fn natural_sweep(m: &Mpo) -> SweepDir {
    match m.canonical_form() {
        CanonicalForm::Left => SweepDir::RightToLeft,
        _ => SweepDir::LeftToRight,
    }
}

/// One local-update sweep: every gate is replaced by the polar factor that
/// maximizes the local overlap, twice per step in a left-right-left pass,
/// with boundaries refreshed incrementally after every replacement.
pub fn local_sweep_step(
    circuit: &mut BrickwallCircuit,
    u_ref: &Mpo,
    order: SweepOrder,
    chi_max: usize,
) -> Result<()> {
    if circuit.n_qubits() != u_ref.n_sites() {
        return Err(Error::Param(format!(
            "circuit acts on {} qubits but the reference has {} sites",
            circuit.n_qubits(),
            u_ref.n_sites()
        )));
    }
    let n_layers = circuit.n_layers();
    if n_layers == 0 {
        return Ok(());
    }
    match order {
        SweepOrder::TopDown => {
            // layers below keep their pre-sweep gates: store all bottoms,
            // roll the top environment downward with updated layers
            let bottoms = bottom_environments(circuit, chi_max)?;
            let mut top = u_ref.adjoint();
            for l in (0..n_layers).rev() {
                update_layer_gates(circuit, l, &top, &bottoms[l])?;
                if l > 0 {
                    let (merged, _) = merge_layer(
                        &top,
                        circuit.layer(l),
                        MergeSide::Below,
                        natural_sweep(&top),
                        chi_max,
                    )?;
                    top = merged;
                }
            }
        }
        SweepOrder::BottomUp => {
            let tops = top_environments(circuit, u_ref, chi_max)?;
            let mut bottom = Mpo::identity(circuit.n_qubits())?;
            for l in 0..n_layers {
                update_layer_gates(circuit, l, &tops[l], &bottom)?;
                if l + 1 < n_layers {
                    let (merged, _) = merge_layer(
                        &bottom,
                        circuit.layer(l),
                        MergeSide::Above,
                        natural_sweep(&bottom),
                        chi_max,
                    )?;
                    bottom = merged;
                }
            }
        }
    }
    Ok(())
}

/// Back-and-forth pass over one layer. The left pass caches the left
/// boundaries seen by each gate; the right pass reuses them while rolling
/// the right boundary over the refreshed gates.
fn update_layer_gates(
    circuit: &mut BrickwallCircuit,
    l: usize,
    top: &Mpo,
    bottom: &Mpo,
) -> Result<()> {
    let envs = LayerEnvironments::new(top, bottom);
    let n = circuit.n_qubits();
    let gate_starts: Vec<usize> = circuit
        .layer(l)
        .gates
        .iter()
        .map(|g| g.placement.qubits.0)
        .collect();
    if gate_starts.is_empty() {
        return Ok(());
    }
    let rights = envs.right_boundaries(circuit.layer(l))?;

    // left-to-right pass
    let mut l_env = LayerEnvironments::boundary_start();
    let mut left_cache: Vec<DenseTensor> = Vec::with_capacity(gate_starts.len());
    let mut k = 0usize;
    let mut gi = 0usize;
    while k < n {
        if gi < gate_starts.len() && gate_starts[gi] == k {
            let r_env = rights[k + 2].as_ref().expect("clean cut right of a gate");
            let m = envs.gate_environment(&l_env, r_env, k)?;
            let new_gate = polar_update(&m)?;
            circuit.set_gate_matrix(l, gi, new_gate);
            left_cache.push(l_env.clone());
            l_env = envs.absorb_pair_left(&l_env, k, &circuit.gate(l, gi).matrix)?;
            gi += 1;
            k += 2;
        } else {
            l_env = envs.absorb_single_left(&l_env, k)?;
            k += 1;
        }
    }

    // right-to-left pass over the refreshed gates
    let mut r_env = LayerEnvironments::boundary_start();
    let mut k = n;
    let mut gi = gate_starts.len();
    while k > 0 {
        if gi > 0 && gate_starts[gi - 1] == k - 2 {
            gi -= 1;
            let start = k - 2;
            let m = envs.gate_environment(&left_cache[gi], &r_env, start)?;
            let new_gate = polar_update(&m)?;
            circuit.set_gate_matrix(l, gi, new_gate);
            r_env = envs.absorb_pair_right(&r_env, start, &circuit.gate(l, gi).matrix)?;
            k -= 2;
        } else {
            r_env = envs.absorb_single_right(&r_env, k - 1)?;
            k -= 1;
        }
    }
    Ok(())
}

/// Gate maximizing `Re T` given the cut-out environment `m = dT/dG`:
/// the unitary polar factor of `conj(m)`.
fn polar_update(m: &DenseTensor) -> Result<DenseTensor> {
    polar_unitary_factor(&m.conj())
}

/// Windowed relative-deviation stopping rule: converged once
/// `2 |C_{i-n} - C_i| / (C_{i-n} + C_i) <= tol` with `n = ceil(0.01 i)`.
pub fn early_stop(trajectory: &[f64], tol: f64) -> bool {
    let i = trajectory.len().saturating_sub(1);
    if i == 0 {
        return false;
    }
    let n = ((0.01 * i as f64).ceil() as usize).max(1);
    let older = trajectory[i - n.min(i)];
    let latest = trajectory[i];
    let denom = older + latest;
    if denom == 0.0 {
        // both costs are exactly zero: nothing left to optimize
        return true;
    }
    2.0 * ((older - latest) / denom).abs() <= tol
}

/// Default early-stopping tolerance.
pub const EARLY_STOP_TOL: f64 = 1e-5;

/// Which optimizer drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Riemannian,
    Sweep,
}

/// Stopping configuration of one run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iter: usize,
    pub early_stop: bool,
    pub early_stop_tol: f64,
    /// Optional absolute cost target.
    pub target_cost: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            early_stop: true,
            early_stop_tol: EARLY_STOP_TOL,
            target_cost: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    EarlyStop,
    TargetCost,
}

/// Persisted outcome of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub hyper: AdamHyperparams,
    pub stop: StopRule,
    /// Cost after every iteration, starting with the initial cost.
    pub trajectory: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub init_cost: f64,
    pub final_cost: f64,
    pub improvement_ratio: f64,
}

/// Iterate the chosen method, recording the cost per iteration.
///
/// The Hilbert-Schmidt cost is measured by the environment-cached
/// evaluation at the given `chi_max`. The sweep method alternates the sweep
/// direction each step, starting top-down.
pub fn optimize(
    circuit: &mut BrickwallCircuit,
    u_ref: &Mpo,
    method: Method,
    hyper: AdamHyperparams,
    stop: StopRule,
    chi_max: usize,
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut res = evaluate(circuit, u_ref, chi_max)?;
    let mut trajectory = vec![res.cost_hs];
    let mut state = RiemannianAdamState::new(hyper);
    let mut stop_reason = StopReason::MaxIter;
    for iter in 0..stop.max_iter {
        match method {
            Method::Riemannian => {
                *circuit = riemannian_adam_step(circuit, &mut state, &res)?;
            }
            Method::Sweep => {
                let order = if iter % 2 == 0 {
                    SweepOrder::TopDown
                } else {
                    SweepOrder::BottomUp
                };
                local_sweep_step(circuit, u_ref, order, chi_max)?;
            }
        }
        res = evaluate(circuit, u_ref, chi_max)?;
        if !res.cost_hs.is_finite() {
            return Err(Error::Numerical(
                "non-finite cost during optimization".into(),
            ));
        }
        trajectory.push(res.cost_hs);
        if let Some(target) = stop.target_cost {
            if res.cost_hs <= target {
                stop_reason = StopReason::TargetCost;
                break;
            }
        }
        if stop.early_stop && early_stop(&trajectory, stop.early_stop_tol) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    let init_cost = trajectory[0];
    let final_cost = *trajectory.last().expect("non-empty");
    Ok(RunRecord {
        method,
        hyper,
        stop,
        iterations: trajectory.len() - 1,
        stop_reason,
        wall_time_s: started.elapsed().as_secs_f64(),
        init_cost,
        final_cost,
        improvement_ratio: if final_cost > 0.0 {
            init_cost / final_cost
        } else {
            f64::INFINITY
        },
        trajectory,
    })
}
