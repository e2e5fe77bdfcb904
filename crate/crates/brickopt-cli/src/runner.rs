//! Command implementations: reference building, the optimize pipeline with
//! a worker pool over independent (seed, layers) runs, the scaling study
//! and the method comparison.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::Serialize;

use brickopt::circuit::BrickwallCircuit;
use brickopt::gradient::evaluate;
use brickopt::model::{initialize_circuit, trotter_circuit, HamiltonianSpec, DISORDER_RNG};
use brickopt::mpo::{write_mpo, Mpo};
use brickopt::optimize::{optimize, Method, RunRecord, StopRule};
use brickopt::reference::{
    build_reference, build_reference_cached, reference_cache_key, ErrorBudget,
};

use crate::config::{config_hash, ExperimentConfig};

/// Resolved run environment: output directory, seeds, worker count.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub hash: u64,
}

impl RunContext {
    pub fn new(
        config: &ExperimentConfig,
        out_flag: Option<PathBuf>,
        seed_flag: Option<u64>,
        threads_flag: Option<usize>,
    ) -> Result<Self> {
        let root = out_flag.unwrap_or_else(|| {
            std::env::var("BRICKOPT_OUT_ROOT")
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from("brickopt-out"))
        });
        let out_dir = match &config.output.dir {
            Some(d) if PathBuf::from(d).is_absolute() => PathBuf::from(d),
            Some(d) => root.join(d),
            None => root,
        };
        let seeds = match seed_flag {
            Some(s) => vec![s],
            None => config.run_seeds(),
        };
        let threads = threads_flag
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            })
            .max(1);
        Ok(Self {
            out_dir,
            seeds,
            threads,
            hash: config_hash(config, seed_flag),
        })
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        std::fs::create_dir_all(self.out_dir.join("records"))?;
        Ok(())
    }
}

/// Run `jobs` closures over a fixed-size worker pool; results keep job
/// order, so downstream files are deterministic.
fn run_parallel<T, F>(n_jobs: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n_jobs).map(|_| None).collect());
    let errors: Mutex<Vec<anyhow::Error>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n_jobs.max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= n_jobs {
                    break;
                }
                match f(idx) {
                    Ok(v) => slots
                        .lock()
                        .expect("poisoned")
                        .get_mut(idx)
                        .map(|s| *s = Some(v))
                        .unwrap_or(()),
                    Err(e) => errors.lock().expect("poisoned").push(e),
                }
            });
        }
    });
    let mut errs = errors.into_inner().expect("poisoned");
    if let Some(e) = errs.pop() {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|s| s.expect("all jobs completed"))
        .collect())
}

fn build_ref_for_seed(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(HamiltonianSpec, Mpo, ErrorBudget, usize)> {
    let hamiltonian = config.hamiltonian(seed)?;
    let rspec = config.reference_spec(hamiltonian.clone());
    let (mpo, budget, chi) = match &config.reference.cache_dir {
        Some(dir) => build_reference_cached(&rspec, std::path::Path::new(dir))?,
        None => build_reference(&rspec)?,
    };
    Ok((hamiltonian, mpo, budget, chi))
}

pub fn cmd_build_ref(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    ctx.ensure_out()?;
    for &seed in &ctx.seeds {
        let (hamiltonian, mpo, budget, chi) = build_ref_for_seed(config, seed)?;
        let rspec = config.reference_spec(hamiltonian);
        let key = reference_cache_key(&rspec);
        let path = ctx.out_dir.join(format!("reference-{key:016x}.mpo"));
        write_mpo(&mpo, &path)?;
        let budget_json = serde_json::json!({
            "config_hash": format!("{:016x}", ctx.hash),
            "seed": seed,
            "achieved_chi": chi,
            "bond_dims": mpo.bond_dims(),
            "budget": budget,
            "mpo_file": path.file_name().map(|s| s.to_string_lossy().into_owned()),
        });
        let bpath = ctx.out_dir.join(format!("reference-{key:016x}.json"));
        std::fs::write(&bpath, serde_json::to_string_pretty(&budget_json)?)?;
        println!(
            "seed {seed}: reference chi {chi}, budget (trot {:.2e}, trunc {:.2e}, comp {:.2e}) -> {}",
            budget.eps_trot,
            budget.eps_trunc,
            budget.eps_comp,
            path.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct RunOutput<'a> {
    config_hash: String,
    /// Full resolved configuration, echoed for self-contained records.
    config: &'a ExperimentConfig,
    seed: u64,
    layers: usize,
    init_policy: String,
    disorder_rng: &'static str,
    reference_chi: usize,
    reference_budget: ErrorBudget,
    record: RunRecord,
    final_circuit: String,
}

struct SummaryRow {
    seed: u64,
    layers: usize,
    init_cost: f64,
    final_cost: f64,
    improvement_ratio: f64,
    iterations: usize,
    wall_time_s: f64,
}

fn write_summary(ctx: &RunContext, rows: &[SummaryRow]) -> Result<PathBuf> {
    let mut csv = String::new();
    let _ = writeln!(csv, "# config-hash: {:016x}", ctx.hash);
    let _ = writeln!(csv, "# rows ordered by (seed, L)");
    let _ = writeln!(
        csv,
        "L,init_cost,final_cost,improvement_ratio,iterations,wall_time"
    );
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.6e},{},{:.3}",
            r.layers, r.init_cost, r.final_cost, r.improvement_ratio, r.iterations, r.wall_time_s
        );
    }
    let path = ctx.out_dir.join("summary.csv");
    std::fs::write(&path, csv)?;
    Ok(path)
}

fn run_one(
    config: &ExperimentConfig,
    ctx: &RunContext,
    seed: u64,
    layers: usize,
    method: Method,
    hamiltonian: &HamiltonianSpec,
    u_ref: &Mpo,
    budget: &ErrorBudget,
    ref_chi: usize,
) -> Result<(RunRecord, String)> {
    let (mut circuit, policy) = initialize_circuit(hamiltonian, config.t, layers)?;
    let record = optimize(
        &mut circuit,
        u_ref,
        method,
        config.hyper(),
        config.stop_rule(),
        config.env_chi(),
    )?;
    let circuit_path = ctx
        .out_dir
        .join("records")
        .join(format!("circuit_seed{seed}_L{layers}_{method:?}.json"));
    std::fs::write(&circuit_path, circuit_to_json(&circuit)?)?;
    let out = RunOutput {
        config_hash: format!("{:016x}", ctx.hash),
        config,
        seed,
        layers,
        init_policy: policy.to_string(),
        disorder_rng: DISORDER_RNG,
        reference_chi: ref_chi,
        reference_budget: *budget,
        record: record.clone(),
        final_circuit: circuit_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let record_path = ctx
        .out_dir
        .join("records")
        .join(format!("run_seed{seed}_L{layers}_{method:?}.json"));
    std::fs::write(&record_path, serde_json::to_string_pretty(&out)?)?;
    Ok((record, policy.to_string()))
}

pub fn cmd_optimize(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    ctx.ensure_out()?;
    // one reference per seed, shared across layer budgets
    let refs = run_parallel(ctx.seeds.len(), ctx.threads, |i| {
        build_ref_for_seed(config, ctx.seeds[i])
    })?;
    let mut jobs = Vec::new();
    for (si, &seed) in ctx.seeds.iter().enumerate() {
        for &layers in &config.circuit.layers {
            jobs.push((si, seed, layers));
        }
    }
    let results = run_parallel(jobs.len(), ctx.threads, |i| {
        let (si, seed, layers) = jobs[i];
        let (hamiltonian, u_ref, budget, chi) = &refs[si];
        let (record, _) = run_one(
            config,
            ctx,
            seed,
            layers,
            config.optimizer.method,
            hamiltonian,
            u_ref,
            budget,
            *chi,
        )?;
        Ok(SummaryRow {
            seed,
            layers,
            init_cost: record.init_cost,
            final_cost: record.final_cost,
            improvement_ratio: record.improvement_ratio,
            iterations: record.iterations,
            wall_time_s: record.wall_time_s,
        })
    })?;
    let path = write_summary(ctx, &results)?;
    for r in &results {
        println!(
            "seed {} L {}: cost {:.3e} -> {:.3e} (x{:.1}) in {} iterations",
            r.seed, r.layers, r.init_cost, r.final_cost, r.improvement_ratio, r.iterations
        );
    }
    println!("summary: {}", path.display());
    Ok(())
}

pub fn cmd_compare_methods(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    ctx.ensure_out()?;
    let refs = run_parallel(ctx.seeds.len(), ctx.threads, |i| {
        build_ref_for_seed(config, ctx.seeds[i])
    })?;
    let mut jobs = Vec::new();
    for (si, &seed) in ctx.seeds.iter().enumerate() {
        for &layers in &config.circuit.layers {
            for method in [Method::Riemannian, Method::Sweep] {
                jobs.push((si, seed, layers, method));
            }
        }
    }
    let results = run_parallel(jobs.len(), ctx.threads, |i| {
        let (si, seed, layers, method) = jobs[i];
        let (hamiltonian, u_ref, budget, chi) = &refs[si];
        let (record, _) = run_one(
            config,
            ctx,
            seed,
            layers,
            method,
            hamiltonian,
            u_ref,
            budget,
            *chi,
        )?;
        Ok((seed, layers, method, record))
    })?;
    let mut csv = String::new();
    let _ = writeln!(csv, "# config-hash: {:016x}", ctx.hash);
    let _ = writeln!(csv, "seed,L,method,iterations,final_cost,stop_reason");
    for (seed, layers, method, record) in &results {
        let _ = writeln!(
            csv,
            "{seed},{layers},{method:?},{},{:.12e},{:?}",
            record.iterations, record.final_cost, record.stop_reason
        );
        println!(
            "seed {seed} L {layers} {method:?}: {} iterations, final cost {:.3e}",
            record.iterations, record.final_cost
        );
    }
    let path = ctx.out_dir.join("comparison.csv");
    std::fs::write(&path, csv)?;
    println!("comparison: {}", path.display());
    Ok(())
}

pub fn cmd_scaling(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    ctx.ensure_out()?;
    let scaling = config
        .scaling
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config error: scaling block missing"))?;
    let seed = ctx.seeds[0];
    let (hamiltonian, u_ref, _, _) = build_ref_for_seed(config, seed)?;

    let mut csv = String::new();
    let _ = writeln!(csv, "# config-hash: {:016x}", ctx.hash);
    let _ = writeln!(csv, "family,dt,n_reps,cost,sqrt_cost");
    let mut fits = String::new();
    let _ = writeln!(fits, "# config-hash: {:016x}", ctx.hash);
    let _ = writeln!(
        fits,
        "family,slope_cost,slope_sqrt_cost,residual,points_used"
    );

    for family in &scaling.families {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for &dt in &scaling.dt_grid {
            let n_reps = (config.t / dt).round().max(1.0) as usize;
            let actual_dt = config.t / n_reps as f64;
            let cost = match family.as_str() {
                "trotter1" | "trotter2" | "trotter4" => {
                    let order: u32 = family[7..].parse().expect("validated family");
                    let c = trotter_circuit(&hamiltonian, order, config.t, n_reps)?;
                    evaluate(&c, &u_ref, config.env_chi())?.cost_hs
                }
                "optimized" => {
                    let order = 2;
                    let mut c = trotter_circuit(&hamiltonian, order, config.t, n_reps)?;
                    let stop = StopRule {
                        max_iter: scaling.opt_max_iter,
                        ..config.stop_rule()
                    };
                    let record = optimize(
                        &mut c,
                        &u_ref,
                        Method::Riemannian,
                        config.hyper(),
                        stop,
                        config.env_chi(),
                    )?;
                    record.final_cost
                }
                other => anyhow::bail!("config error: unknown scaling family {other}"),
            };
            let _ = writeln!(
                csv,
                "{family},{actual_dt:.12e},{n_reps},{cost:.12e},{:.12e}",
                cost.max(0.0).sqrt()
            );
            if cost > 0.0 {
                points.push((actual_dt, cost));
            } else {
                eprintln!("scaling: dropped non-positive cost {cost:.3e} at dt {actual_dt:.3e} ({family})");
            }
            println!("{family}: dt {actual_dt:.4} -> cost {cost:.3e}");
        }
        if points.len() >= 2 {
            let (slope_cost, residual) = loglog_slope(&points);
            let sqrt_points: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, y.sqrt())).collect();
            let (slope_sqrt, _) = loglog_slope(&sqrt_points);
            let _ = writeln!(
                fits,
                "{family},{slope_cost:.6},{slope_sqrt:.6},{residual:.3e},{}",
                points.len()
            );
            println!(
                "{family}: slope of sqrt(cost) {slope_sqrt:.3}, slope of cost {slope_cost:.3}"
            );
        }
    }
    std::fs::write(ctx.out_dir.join("scaling.csv"), csv)?;
    std::fs::write(ctx.out_dir.join("fits.csv"), fits)?;
    println!(
        "scaling data: {}",
        ctx.out_dir.join("scaling.csv").display()
    );
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`, with the fit residual.
pub fn loglog_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = logs
        .iter()
        .map(|p| (intercept + slope * p.0 - p.1).powi(2))
        .sum::<f64>()
        .sqrt()
        / n.sqrt();
    (slope, residual)
}

fn circuit_to_json(circuit: &BrickwallCircuit) -> Result<String> {
    let layers: Vec<serde_json::Value> = circuit
        .layers()
        .iter()
        .map(|layer| {
            let gates: Vec<serde_json::Value> = layer
                .gates
                .iter()
                .map(|g| {
                    let entries: Vec<[f64; 2]> =
                        g.matrix.data().iter().map(|z| [z.re, z.im]).collect();
                    serde_json::json!({
                        "qubits": [g.placement.qubits.0, g.placement.qubits.1],
                        "matrix": entries,
                    })
                })
                .collect();
            serde_json::json!({ "gates": gates })
        })
        .collect();
    Ok(serde_json::to_string(&serde_json::json!({
        "format": "bwc-v1",
        "n_qubits": circuit.n_qubits(),
        "layers": layers,
    }))?)
}
