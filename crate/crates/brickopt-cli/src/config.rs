//! Experiment configuration: one TOML document per experiment, strictly
//! validated (unknown keys rejected) before any computation starts.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use brickopt::model::{double_factorize, read_integrals, sample_disorder, HamiltonianSpec};
use brickopt::optimize::{AdamHyperparams, Method, StopRule, EARLY_STOP_TOL};
use brickopt::reference::ReferenceSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Simulation time.
    pub t: f64,
    pub reference: ReferenceConfig,
    pub circuit: CircuitConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scaling: Option<ScalingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_sites: usize,
    #[serde(default)]
    pub j: Option<f64>,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    /// Heisenberg couplings (x, y, z).
    #[serde(default)]
    pub j_vec: Option<[f64; 3]>,
    /// Heisenberg fields (x, y, z).
    #[serde(default)]
    pub h_vec: Option<[f64; 3]>,
    #[serde(default)]
    pub t_hop: Option<f64>,
    #[serde(default)]
    pub v_int: Option<f64>,
    /// Disorder seeds; one run per seed (disordered Ising only).
    #[serde(default)]
    pub disorder_seeds: Option<Vec<u64>>,
    /// Path to an ints-v1 file (molecular only).
    #[serde(default)]
    pub integrals: Option<String>,
    /// Index of the double-factorized term to simulate (molecular only).
    #[serde(default)]
    pub term_index: Option<usize>,
    /// Eigenvalue cutoff of the double factorization.
    #[serde(default)]
    pub df_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ising,
    IsingDisordered,
    Heisenberg,
    FermiHubbard,
    MolecularDiagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default = "default_order")]
    pub order: u32,
    pub n_reps: usize,
    pub chi_max: usize,
    pub eps_thres: f64,
    /// Reuse cached references from this directory.
    #[serde(default)]
    pub cache_dir: Option<String>,
}

fn default_order() -> u32 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    /// Layer budgets; one run per entry.
    pub layers: Vec<usize>,
    /// Bond dimension of the gradient-evaluation environments; defaults to
    /// the reference chi_max.
    #[serde(default)]
    pub env_chi_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default = "default_tol")]
    pub early_stop_tol: f64,
    #[serde(default)]
    pub target_cost: Option<f64>,
    #[serde(default)]
    pub bias_correction: bool,
}

fn default_alpha() -> f64 {
    1e-2
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.99
}
fn default_true() -> bool {
    true
}
fn default_tol() -> f64 {
    EARLY_STOP_TOL
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; relative paths resolve under the output root.
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    /// Trotter time steps of the scaling grid (at least 4).
    pub dt_grid: Vec<f64>,
    /// Families to fit: "trotter1", "trotter2", "trotter4", "optimized".
    pub families: Vec<String>,
    /// Iteration budget of the optimized family.
    #[serde(default = "default_scaling_iters")]
    pub opt_max_iter: usize,
}

fn default_scaling_iters() -> usize {
    300
}

impl ExperimentConfig {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.as_ref().display()))?;
        let config: ExperimentConfig = toml::from_str(&text).context("parsing config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t <= 0.0 {
            bail!("t must be positive");
        }
        if self.circuit.layers.is_empty() {
            bail!("circuit.layers must list at least one layer budget");
        }
        if self.reference.eps_thres <= 0.0 {
            bail!("reference.eps_thres must be positive");
        }
        if self.reference.n_reps == 0 || self.reference.chi_max == 0 {
            bail!("reference.n_reps and reference.chi_max must be at least 1");
        }
        match self.model.kind {
            ModelKind::Ising | ModelKind::IsingDisordered => {
                if self.model.j.is_none() || self.model.g.is_none() || self.model.h.is_none() {
                    bail!("ising models need j, g and h");
                }
            }
            ModelKind::Heisenberg => {
                if self.model.j_vec.is_none() || self.model.h_vec.is_none() {
                    bail!("the heisenberg model needs j_vec and h_vec");
                }
            }
            ModelKind::FermiHubbard => {
                if self.model.t_hop.is_none() || self.model.v_int.is_none() {
                    bail!("the fermi-hubbard model needs t_hop and v_int");
                }
                if self.model.n_sites % 2 != 0 {
                    bail!("fermi-hubbard n_sites counts spin orbitals and must be even");
                }
            }
            ModelKind::MolecularDiagonal => {
                if self.model.integrals.is_none() || self.model.term_index.is_none() {
                    bail!("the molecular model needs integrals and term_index");
                }
            }
        }
        if self.model.disorder_seeds.is_some() && self.model.kind != ModelKind::IsingDisordered {
            bail!("disorder_seeds only applies to ising_disordered");
        }
        if let Some(s) = &self.scaling {
            if s.dt_grid.len() < 4 {
                bail!("scaling.dt_grid needs at least 4 points");
            }
            for f in &s.families {
                if !matches!(
                    f.as_str(),
                    "trotter1" | "trotter2" | "trotter4" | "optimized"
                ) {
                    bail!("unknown scaling family {f}");
                }
            }
        }
        Ok(())
    }

    /// Seeds of the individual runs (a single pseudo-seed when the model is
    /// not disordered).
    pub fn run_seeds(&self) -> Vec<u64> {
        match (&self.model.kind, &self.model.disorder_seeds) {
            (ModelKind::IsingDisordered, Some(seeds)) if !seeds.is_empty() => seeds.clone(),
            (ModelKind::IsingDisordered, _) => vec![0],
            _ => vec![0],
        }
    }

    /// Instantiate the Hamiltonian for one run seed.
    pub fn hamiltonian(&self, seed: u64) -> Result<HamiltonianSpec> {
        let m = &self.model;
        let spec = match m.kind {
            ModelKind::Ising => HamiltonianSpec::Ising {
                n_sites: m.n_sites,
                j: m.j.expect("validated"),
                g: m.g.expect("validated"),
                h: m.h.expect("validated"),
            },
            ModelKind::IsingDisordered => sample_disorder(
                m.j.expect("validated"),
                m.g.expect("validated"),
                m.h.expect("validated"),
                m.n_sites,
                seed,
            ),
            ModelKind::Heisenberg => HamiltonianSpec::Heisenberg {
                n_sites: m.n_sites,
                j: m.j_vec.expect("validated"),
                h: m.h_vec.expect("validated"),
            },
            ModelKind::FermiHubbard => HamiltonianSpec::FermiHubbard {
                n_spin_orbitals: m.n_sites,
                t_hop: m.t_hop.expect("validated"),
                v_int: m.v_int.expect("validated"),
            },
            ModelKind::MolecularDiagonal => {
                let path = m.integrals.as_ref().expect("validated");
                let (orbitals, t_pq, v_pqrs) = read_integrals(path)?;
                if orbitals != m.n_sites {
                    bail!(
                        "integral file holds {orbitals} orbitals, config says {}",
                        m.n_sites
                    );
                }
                let df = double_factorize(&t_pq, &v_pqrs, orbitals, m.df_tol.unwrap_or(0.0))?;
                let term = m.term_index.expect("validated");
                if term >= df.n_rot {
                    bail!("term_index {term} out of range (n_rot = {})", df.n_rot);
                }
                molecular_term_spec(&df, term, orbitals)
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn reference_spec(&self, hamiltonian: HamiltonianSpec) -> ReferenceSpec {
        ReferenceSpec {
            hamiltonian,
            t: self.t,
            order: self.reference.order,
            n_reps: self.reference.n_reps,
            chi_max: self.reference.chi_max,
            eps_thres: self.reference.eps_thres,
        }
    }

    pub fn hyper(&self) -> AdamHyperparams {
        AdamHyperparams {
            alpha: self.optimizer.alpha,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            eps_div: 1e-12,
            bias_correction: self.optimizer.bias_correction,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_iter: self.optimizer.max_iter,
            early_stop: self.optimizer.early_stop,
            early_stop_tol: self.optimizer.early_stop_tol,
            target_cost: self.optimizer.target_cost,
        }
    }

    pub fn env_chi(&self) -> usize {
        self.circuit.env_chi_max.unwrap_or(self.reference.chi_max)
    }
}

/// Diagonal Hamiltonian of one double-factorized term in its rotated basis:
/// `T = diag(sign * lambda^2)` one-body and `V_pq = 2 sign lambda_p lambda_q`
/// off-diagonal density-density couplings.
fn molecular_term_spec(
    df: &brickopt::model::DoubleFactorization,
    term: usize,
    m: usize,
) -> HamiltonianSpec {
    let lam = &df.lambdas[term];
    let sign = df.signs[term];
    let mut t = vec![0.0; m * m];
    let mut v = vec![0.0; m * m];
    for p in 0..m {
        t[p * m + p] = sign * lam[p] * lam[p];
        for q in 0..m {
            if p != q {
                v[p * m + q] = 2.0 * sign * lam[p] * lam[q];
            }
        }
    }
    HamiltonianSpec::MolecularDiagonal {
        n_orbitals: m,
        t,
        v,
    }
}

/// FNV-1a content hash of the resolved configuration (plus the CLI seed),
/// stamped into every output file.
pub fn config_hash(config: &ExperimentConfig, seed_override: Option<u64>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let text = serde_json::to_string(config).expect("config serializes");
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    if let Some(s) = seed_override {
        h ^= s;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
