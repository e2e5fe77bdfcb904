//! Double factorization of a two-electron integral tensor into rotated
//! number-operator interactions, plus the `ints-v1` integral file format.
//!
//! The two-body operator `sum v_pqrs a_p^dag a_q^dag a_r a_s` is normal
//! ordered into quadratic-in-density form, the matricized tensor
//! `A[(p,s),(q,r)] = v_pqrs` is eigendecomposed, and each eigenvector is
//! reshaped and eigendecomposed again, yielding per-term rotations `U` and
//! eigenvalues `lambda` with `V = S + sum_l sign_l (sum_i lambda_i n_i)^2 / 2`
//! where `S` is the induced one-body correction.

use std::fmt::Write as _;
use std::path::Path;

use faer::prelude::*;

use crate::linalg::DenseTensor;
use crate::{Error, Result};

/// Result of the two-level eigendecomposition.
#[derive(Debug, Clone)]
pub struct DoubleFactorization {
    /// One-body correction `S_pq` from normal ordering (`-sum_k v_pkqk`).
    pub one_body_correction: DenseTensor,
    /// Orthogonal basis changes `U^(l)` (columns are rotated orbitals).
    pub rotations: Vec<DenseTensor>,
    /// Scaled eigenvalue vectors; the term reconstructs as
    /// `sign * (sum_i lambda_i n_i)^2 / 2`.
    pub lambdas: Vec<Vec<f64>>,
    /// Sign of each retained eigenvalue of the matricized tensor.
    pub signs: Vec<f64>,
    pub n_rot: usize,
}

impl DoubleFactorization {
    /// Rebuild `v_pqrs` from the retained terms (physicists' index order).
    pub fn reconstruct_two_body(&self, n_orbitals: usize) -> Vec<f64> {
        let m = n_orbitals;
        let mut v = vec![0.0; m * m * m * m];
        for l in 0..self.n_rot {
            let u = &self.rotations[l];
            let lam = &self.lambdas[l];
            // g = U diag(lambda) U^T, scaled so g g^T carries the 1/2
            let mut g = vec![0.0; m * m];
            for p in 0..m {
                for s in 0..m {
                    let mut acc = 0.0;
                    for i in 0..lam.len() {
                        acc += u.get(&[p, i]).re * lam[i] * u.get(&[s, i]).re;
                    }
                    g[p * m + s] = acc;
                }
            }
            let half_sign = 0.5 * self.signs[l];
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for s in 0..m {
                            v[((p * m + q) * m + r) * m + s] +=
                                half_sign * g[p * m + s] * g[q * m + r];
                        }
                    }
                }
            }
        }
        v
    }
}

/// Double-factorize a two-electron tensor `v_pqrs` (physicists' index
/// order, real) with one-electron integrals `t_pq`. Terms whose matricized
/// eigenvalue magnitude is at or below `tol` are dropped.
pub fn double_factorize(
    t_pq: &[f64],
    v_pqrs: &[f64],
    n_orbitals: usize,
    tol: f64,
) -> Result<DoubleFactorization> {
    let m = n_orbitals;
    if t_pq.len() != m * m || v_pqrs.len() != m * m * m * m {
        return Err(Error::Dim(format!(
            "integral arrays do not match {m} orbitals"
        )));
    }
    let v = |p: usize, q: usize, r: usize, s: usize| v_pqrs[((p * m + q) * m + r) * m + s];
    // required symmetries: exchange v_pqrs = v_qpsr and (real) hermiticity
    // v_pqrs = v_srqp
    let scale = v_pqrs.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    if (v(p, q, r, s) - v(q, p, s, r)).abs() > 1e-9 * scale
                        || (v(p, q, r, s) - v(s, r, q, p)).abs() > 1e-9 * scale
                    {
                        return Err(Error::Param(
                            "two-electron tensor violates exchange/hermiticity symmetry".into(),
                        ));
                    }
                }
            }
        }
    }

    // one-body correction from normal ordering
    let mut s_corr = DenseTensor::zeros(&[m, m]);
    for p in 0..m {
        for q in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc -= v(p, k, q, k);
            }
            s_corr.set(&[p, q], num_complex::Complex64::new(acc, 0.0));
        }
    }

    // matricize: A[(p,s),(q,r)] = v_pqrs, symmetric by the exchange rule
    let mm = m * m;
    let a = Mat::<c64>::from_fn(mm, mm, |x, y| {
        let (p, s) = (x / m, x % m);
        let (q, r) = (y / m, y % m);
        c64::new(v(p, q, r, s), 0.0)
    });
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let w = evd.S();
    let x = evd.U();
    let mut order: Vec<usize> = (0..mm).collect();
    order.sort_by(|&i, &j| w[j].re.abs().partial_cmp(&w[i].re.abs()).expect("finite"));

    let w_max = w[order[0]].re.abs();
    let cutoff = if tol > 0.0 { tol } else { w_max * 1e-12 };
    let mut rotations = Vec::new();
    let mut lambdas = Vec::new();
    let mut signs = Vec::new();
    for &idx in &order {
        let weight = w[idx].re;
        if weight.abs() <= cutoff {
            continue;
        }
        // reshape the eigenvector into g[p, s]; symmetric by hermiticity
        let g = Mat::<c64>::from_fn(m, m, |p, s| x[(p * m + s, idx)]);
        let g_evd = g
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Numerical(format!("inner eigendecomposition: {e:?}")))?;
        let gs = g_evd.S();
        let gu = g_evd.U();
        // deterministic gauge: eigenvalues sorted descending, columns
        // flipped so the largest entry is positive
        let mut u = DenseTensor::zeros(&[m, m]);
        let mut lam = vec![0.0; m];
        let amp = (2.0 * weight.abs()).sqrt();
        let mut cols: Vec<usize> = (0..m).collect();
        cols.sort_by(|&i, &j| gs[j].re.partial_cmp(&gs[i].re).expect("finite"));
        for (col_out, &col_in) in cols.iter().enumerate() {
            let mut best = 0usize;
            for p in 0..m {
                if gu[(p, col_in)].re.abs() > gu[(best, col_in)].re.abs() {
                    best = p;
                }
            }
            let flip = if gu[(best, col_in)].re < 0.0 {
                -1.0
            } else {
                1.0
            };
            for p in 0..m {
                u.set(
                    &[p, col_out],
                    num_complex::Complex64::new(flip * gu[(p, col_in)].re, 0.0),
                );
            }
            // u u^T is flip-invariant, so lambda keeps its sign
            lam[col_out] = amp * gs[col_in].re;
        }
        rotations.push(u);
        lambdas.push(lam);
        signs.push(weight.signum());
    }
    let n_rot = rotations.len();
    Ok(DoubleFactorization {
        one_body_correction: s_corr,
        rotations,
        lambdas,
        signs,
        n_rot,
    })
}

// ---------------------------------------------------------------------------
// ints-v1 file format
// ---------------------------------------------------------------------------

/// Read an `ints-v1` molecular-integral file: one-electron matrix `t_pq`
/// and two-electron tensor `v_pqrs` (dense, physicists' index order).
pub fn read_integrals<P: AsRef<Path>>(path: P) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .peekable();
    let magic = tokens
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    if magic != "ints-v1" {
        return Err(Error::Format(format!(
            "expected ints-v1 header, got {magic}"
        )));
    }
    let kw = tokens.next();
    if kw != Some("n_orbitals") {
        return Err(Error::Format("expected n_orbitals".into()));
    }
    let m: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format("bad orbital count".into()))?;
    if tokens.next() != Some("t_pq") {
        return Err(Error::Format("expected t_pq block".into()));
    }
    let mut t = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        let x: f64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("short t_pq block".into()))?;
        t.push(x);
    }
    if tokens.next() != Some("v_pqrs") {
        return Err(Error::Format("expected v_pqrs block".into()));
    }
    let mut v = Vec::with_capacity(m * m * m * m);
    for _ in 0..m * m * m * m {
        let x: f64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("short v_pqrs block".into()))?;
        v.push(x);
    }
    if tokens.next().is_some() {
        return Err(Error::Format("trailing tokens after v_pqrs".into()));
    }
    Ok((m, t, v))
}

/// Write integrals in the `ints-v1` format.
pub fn write_integrals<P: AsRef<Path>>(path: P, m: usize, t: &[f64], v: &[f64]) -> Result<()> {
    if t.len() != m * m || v.len() != m.pow(4) {
        return Err(Error::Dim(
            "integral arrays do not match orbital count".into(),
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "ints-v1");
    let _ = writeln!(out, "n_orbitals {m}");
    let _ = writeln!(out, "t_pq");
    for row in t.chunks(m) {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "v_pqrs");
    for row in v.chunks(m) {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    std::fs::write(path, out)?;
    Ok(())
}
