//! Riemannian primitives on the manifold of 4x4 unitaries: metric, tangent
//! projection, polar retraction and vector transport.
//!
//! The tangent space at a unitary `G` consists of matrices `G A` with `A`
//! anti-Hermitian; the metric is the real part of the Frobenius pairing.

use num_complex::Complex64;

use crate::circuit::{BrickwallCircuit, GatePlacement, UnitaryGate};
use crate::linalg::{polar_unitary_factor, DenseTensor};
use crate::{Error, Result, TOL_UNITARY};

/// Tangent vector at a gate, tagged with the gate's placement so bundle
/// bookkeeping can detect base-point mixups.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub matrix: DenseTensor,
    pub placement: GatePlacement,
}

impl TangentVector {
    /// `|| G^dagger X + X^dagger G || / 2`, zero for exact tangent vectors.
    pub fn tangency_error(&self, base: &UnitaryGate) -> f64 {
        let gx = base
            .matrix
            .adjoint()
            .expect("gate is a matrix")
            .matmul(&self.matrix)
            .expect("4x4");
        let sym = gx
            .add(&gx.adjoint().expect("matrix"))
            .expect("same shape")
            .scale(Complex64::new(0.5, 0.0));
        sym.max_abs()
    }
}

/// One tangent vector per gate, indexed like the circuit's gate list.
#[derive(Debug, Clone)]
pub struct TangentBundlePoint {
    entries: Vec<Vec<TangentVector>>,
}

impl TangentBundlePoint {
    pub fn zeros(circuit: &BrickwallCircuit) -> Self {
        let entries = circuit
            .layers()
            .iter()
            .map(|layer| {
                layer
                    .gates
                    .iter()
                    .map(|g| TangentVector {
                        matrix: DenseTensor::zeros(&[4, 4]),
                        placement: g.placement,
                    })
                    .collect()
            })
            .collect();
        Self { entries }
    }

    pub fn from_entries(entries: Vec<Vec<TangentVector>>) -> Self {
        Self { entries }
    }

    pub fn layers(&self) -> &[Vec<TangentVector>] {
        &self.entries
    }

    pub fn get(&self, layer: usize, index: usize) -> &TangentVector {
        &self.entries[layer][index]
    }

    pub fn get_mut(&mut self, layer: usize, index: usize) -> &mut TangentVector {
        &mut self.entries[layer][index]
    }

    pub fn matches_circuit(&self, circuit: &BrickwallCircuit) -> bool {
        self.entries.len() == circuit.n_layers()
            && self
                .entries
                .iter()
                .enumerate()
                .all(|(l, row)| row.len() == circuit.layer(l).gates.len())
    }

    /// Bundle inner product: sum of per-gate metric values.
    pub fn inner(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(x, y)| x.matrix.inner(&y.matrix).re)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|t| TangentVector {
                            matrix: t.matrix.scale(Complex64::new(s, 0.0)),
                            placement: t.placement,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Riemannian metric `Re Tr(X^dagger Y)` of two tangent vectors at the same
/// base point.
pub fn inner_product(x: &TangentVector, y: &TangentVector) -> Result<f64> {
    if x.placement != y.placement {
        return Err(Error::Param(
            "inner product of tangent vectors at different base points".into(),
        ));
    }
    Ok(x.matrix.inner(&y.matrix).re)
}

/// Project an ambient matrix onto the tangent space at `g`:
/// `G skew(G^dagger eta)` with `skew(M) = (M - M^dagger)/2`.
pub fn project_to_tangent(g: &UnitaryGate, eta: &DenseTensor) -> Result<TangentVector> {
    let gh_eta = g.matrix.adjoint()?.matmul(eta)?;
    let skew = gh_eta
        .sub(&gh_eta.adjoint()?)?
        .scale(Complex64::new(0.5, 0.0));
    Ok(TangentVector {
        matrix: g.matrix.matmul(&skew)?,
        placement: g.placement,
    })
}

/// Polar retraction: the unitary polar factor of `G + xi`, placement kept.
pub fn retract_polar(g: &UnitaryGate, xi: &TangentVector) -> Result<UnitaryGate> {
    if xi.placement != g.placement {
        return Err(Error::Param("tangent vector not based at this gate".into()));
    }
    let moved = g.matrix.add(&xi.matrix)?;
    let u = polar_unitary_factor(&moved)?;
    debug_assert!(u.unitarity_error() < TOL_UNITARY);
    Ok(UnitaryGate {
        matrix: u,
        placement: g.placement,
    })
}

/// Transport `xi` along `eta`: project onto the tangent space at the
/// retracted point. The result records the retracted point as its base.
pub fn vector_transport(
    g: &UnitaryGate,
    eta: &TangentVector,
    xi: &TangentVector,
) -> Result<(UnitaryGate, TangentVector)> {
    let new_base = retract_polar(g, eta)?;
    let moved = project_to_tangent(&new_base, &xi.matrix)?;
    Ok((new_base, moved))
}

/// Entrywise tangent projection of a per-gate Euclidean gradient.
pub fn riemannian_gradient(
    circuit: &BrickwallCircuit,
    euclidean: &[Vec<DenseTensor>],
) -> Result<TangentBundlePoint> {
    if euclidean.len() != circuit.n_layers()
        || euclidean
            .iter()
            .enumerate()
            .any(|(l, row)| row.len() != circuit.layer(l).gates.len())
    {
        return Err(Error::Param(
            "euclidean gradient index set does not match the circuit".into(),
        ));
    }
    let mut entries = Vec::with_capacity(euclidean.len());
    for (l, row) in euclidean.iter().enumerate() {
        let mut out_row = Vec::with_capacity(row.len());
        for (i, e) in row.iter().enumerate() {
            out_row.push(project_to_tangent(circuit.gate(l, i), e)?);
        }
        entries.push(out_row);
    }
    Ok(TangentBundlePoint::from_entries(entries))
}
