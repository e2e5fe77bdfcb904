//! Circuit initialization: match the layer budget to repeated second- or
//! fourth-order Trotterizations, fall back to a 2+4 concatenation with an
//! optimized time split, and pad any remainder with identity layers.

use num_complex::Complex64;

use super::{dense_hamiltonian, layer_count, trotter_circuit, HamiltonianSpec};
use crate::circuit::{BrickwallCircuit, LayerOffset};
use crate::linalg::{expm_skew_or_hermitian, DenseTensor};
use crate::{Error, Result};

/// How an initial circuit was chosen; recorded in run outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// `n_reps` repetitions of one Trotter order.
    Trotter { order: u32, n_reps: usize },
    /// Second-order block over `t1` followed by a fourth-order block over
    /// `t - t1`.
    Concat { n2: usize, n4: usize, t1: f64 },
    /// A smaller initialization extended by identity layers.
    Padded {
        base: Box<InitPolicy>,
        identity_layers: usize,
    },
}

impl std::fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitPolicy::Trotter { order, n_reps } => write!(f, "trotter{order} x {n_reps}"),
            InitPolicy::Concat { n2, n4, t1 } => {
                write!(f, "trotter2 x {n2} (t1={t1:.6}) + trotter4 x {n4}")
            }
            InitPolicy::Padded {
                base,
                identity_layers,
            } => write!(f, "{base} + {identity_layers} identity layers"),
        }
    }
}

/// Initialize a brickwall circuit with exactly `l_target` layers
/// approximating the evolution of `spec` over time `t`.
pub fn initialize_circuit(
    spec: &HamiltonianSpec,
    t: f64,
    l_target: usize,
) -> Result<(BrickwallCircuit, InitPolicy)> {
    spec.validate()?;
    if t <= 0.0 {
        return Err(Error::Param("simulation time must be positive".into()));
    }
    let min_l = layer_count(spec, 2, 1)?;
    if l_target < min_l {
        return Err(Error::Param(format!(
            "{l_target} layers are fewer than one second-order step ({min_l})"
        )));
    }
    if let Some((c, p)) = try_exact(spec, t, l_target)? {
        return Ok((c, p));
    }
    // no exact structural match: reuse the largest achievable budget and
    // extend with identity layers
    for pad in 1..=(l_target - min_l) {
        if let Some((mut c, p)) = try_exact(spec, t, l_target - pad)? {
            for _ in 0..pad {
                let offset = match c.layers().last() {
                    Some(layer) => layer.offset.flipped(),
                    None => LayerOffset::Even,
                };
                let idx = c.n_layers();
                c.push_layer(BrickwallCircuit::identity_layer(c.n_qubits(), idx, offset));
            }
            return Ok((
                c,
                InitPolicy::Padded {
                    base: Box::new(p),
                    identity_layers: pad,
                },
            ));
        }
    }
    Err(Error::Param(format!(
        "no initialization found for {l_target} layers"
    )))
}

/// Rules (1) and (2) of the cascade: repeated single-order Trotterization,
/// then a 2+4 concatenation with an optimized split of the simulation time.
fn try_exact(
    spec: &HamiltonianSpec,
    t: f64,
    l_target: usize,
) -> Result<Option<(BrickwallCircuit, InitPolicy)>> {
    let proxy = proxy_spec(spec);
    let mut matches: Vec<(u32, usize)> = Vec::new();
    for order in [2u32, 4] {
        if let Some(n) = solve_reps(spec, order, l_target)? {
            matches.push((order, n));
        }
    }
    if !matches.is_empty() {
        let (order, n) = if matches.len() == 1 {
            matches[0]
        } else {
            match &proxy {
                Some(p) => *matches
                    .iter()
                    .min_by(|a, b| {
                        let ca = proxy_cost(p, t, |s| trotter_circuit(s, a.0, t, a.1))
                            .unwrap_or(f64::INFINITY);
                        let cb = proxy_cost(p, t, |s| trotter_circuit(s, b.0, t, b.1))
                            .unwrap_or(f64::INFINITY);
                        ca.partial_cmp(&cb).expect("finite costs")
                    })
                    .expect("non-empty"),
                // without a tractable proxy the higher order wins
                None => *matches.iter().max_by_key(|m| m.0).expect("non-empty"),
            }
        };
        let circuit = trotter_circuit(spec, order, t, n)?;
        return Ok(Some((circuit, InitPolicy::Trotter { order, n_reps: n })));
    }

    // concatenation: layers(2, n2) + layers(4, n4) == l_target
    let mut best: Option<(f64, BrickwallCircuit, InitPolicy)> = None;
    let mut n2 = 1usize;
    while layer_count(spec, 2, n2)? < l_target {
        let remaining = l_target - layer_count(spec, 2, n2)?;
        if let Some(n4) = solve_reps(spec, 4, remaining)? {
            let (t1, cost) = match &proxy {
                Some(p) => optimize_split(p, t, n2, n4)?,
                None => (t * n2 as f64 / (n2 + n4) as f64, f64::INFINITY),
            };
            if best.as_ref().map(|(c, _, _)| cost < *c).unwrap_or(true) {
                let circuit = build_concat(spec, t, t1, n2, n4)?;
                best = Some((cost, circuit, InitPolicy::Concat { n2, n4, t1 }));
            }
        }
        n2 += 1;
    }
    Ok(best.map(|(_, c, p)| (c, p)))
}

fn solve_reps(spec: &HamiltonianSpec, order: u32, l_target: usize) -> Result<Option<usize>> {
    let mut n = 1usize;
    loop {
        let l = layer_count(spec, order, n)?;
        if l == l_target {
            return Ok(Some(n));
        }
        if l > l_target {
            return Ok(None);
        }
        n += 1;
    }
}

fn build_concat(
    spec: &HamiltonianSpec,
    t: f64,
    t1: f64,
    n2: usize,
    n4: usize,
) -> Result<BrickwallCircuit> {
    let mut c = trotter_circuit(spec, 2, t1, n2)?;
    let tail = trotter_circuit(spec, 4, t - t1, n4)?;
    c.concat(&tail)?;
    Ok(c)
}

/// Down-scaled stand-in for proxy-error evaluations; `None` when the model
/// cannot be shrunk into the dense regime.
fn proxy_spec(spec: &HamiltonianSpec) -> Option<HamiltonianSpec> {
    let n = spec.n_qubits();
    if n <= 8 {
        return Some(spec.clone());
    }
    match spec {
        HamiltonianSpec::MolecularDiagonal { .. } => None,
        _ => spec.resized(8).ok(),
    }
}

fn proxy_cost<F>(proxy: &HamiltonianSpec, t: f64, build: F) -> Result<f64>
where
    F: Fn(&HamiltonianSpec) -> Result<BrickwallCircuit>,
{
    let h = dense_hamiltonian(proxy)?;
    let exact = expm_skew_or_hermitian(&h, Complex64::new(0.0, -t))?;
    let circuit = build(proxy)?.to_dense()?;
    Ok(hs_cost_dense(&exact, &circuit))
}

fn hs_cost_dense(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let t = a.inner(b);
    let d = a.shape()[0] as f64;
    1.0 - t.norm_sqr() / (d * d)
}

/// Golden-section search for the time split `t = t1 + t2` minimizing the
/// proxy error of the 2+4 concatenation.
fn optimize_split(proxy: &HamiltonianSpec, t: f64, n2: usize, n4: usize) -> Result<(f64, f64)> {
    let f = |t1: f64| -> Result<f64> { proxy_cost(proxy, t, |s| build_concat(s, t, t1, n2, n4)) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = 1e-3 * t;
    let mut b = (1.0 - 1e-3) * t;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let t1 = 0.5 * (a + b);
    Ok((t1, f(t1)?))
}
