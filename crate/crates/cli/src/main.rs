//! `stabclust` command-line front end.

mod bench;
mod manifest;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stabclust::{
    evaluate, gen_diet, gen_synthetic, run_ci, run_ic, run_sc, AlphaHat, ClusterSolution, Dataset, DietSpec,
    InstabilityReport, NormKind, PipelineConfig, SyntheticSpec,
};

use crate::manifest::{with_suffix, RunManifest};

/// Exit code for solver failures and infeasible models.
pub const EXIT_SOLVER: u8 = 2;
/// Exit code for a verification mismatch.
pub const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "stabclust", version, about = "Cluster observed LP decisions by shared objective vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run one method on a dataset.
    Solve(SolveArgs),
    /// Score a stored solution on a dataset.
    Evaluate(EvaluateArgs),
    /// Run every method over a grid of generated instances.
    Bench(bench::BenchArgs),
    /// Check the MIP models and the instability measure against exhaustive oracles.
    Verify(verify::VerifyArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random polytopes with noisy optimal observations.
    Synthetic(SyntheticArgs),
    /// Diet problems built from the embedded nutrient table.
    Diet(DietArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    n: usize,
    /// Rows per decision-maker, including the bounding box.
    #[arg(long)]
    m: usize,
    #[arg(long = "K")]
    k: usize,
    /// Number of distinct true cost vectors; defaults to K.
    #[arg(long = "L-hint")]
    l_hint: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// One feasible region for every decision-maker.
    #[arg(long)]
    shared: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DietArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Sc,
    Ci,
    Ic,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum NormArg {
    L1,
    Linf,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => NormKind::L1,
            NormArg::Linf => NormKind::LInf,
        }
    }
}

/// Options shared by every command that solves models.
#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Wall-clock limit per branch-and-bound run, in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    /// Strict-cone floor on the selected multipliers.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cap on the multipliers.
    #[arg(long = "M2", default_value_t = 1e3)]
    m2: f64,
    #[arg(long, value_enum, default_value_t = NormArg::Linf)]
    norm: NormArg,
    /// Seed for k-means.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    pub fn config(&self, l: usize) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig {
            l,
            norm: self.norm.into(),
            seed: self.seed,
            alpha: AlphaHat::new(self.alpha)?,
            m2: self.m2,
            ..PipelineConfig::default()
        };
        cfg.bnb.time_limit_s = self.time_limit;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(value_enum)]
    method: Method,
    dataset: PathBuf,
    #[arg(long = "L")]
    l: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output prefix; writes `<prefix>.json`, `<prefix>.csv` and
    /// `<prefix>.manifest.json`. Without it the JSON goes to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    dataset: PathBuf,
    /// A solution file, or a result file written by `solve`.
    solution: PathBuf,
    #[arg(long, value_enum, default_value_t = NormArg::Linf)]
    norm: NormArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Result file written by `solve`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub method: String,
    pub manifest: Option<String>,
    /// Solution scored by the instability measure.
    pub solution: ClusterSolution,
    /// Oracle-evaluated instability of `solution`.
    pub instability: InstabilityReport,
    /// Lower-bound model objective (joint method only).
    pub lb_objective: Option<f64>,
    /// Upper-bound model objective (joint method only).
    pub ub_objective: Option<f64>,
    pub optimal: Option<bool>,
    pub wall_s: f64,
    pub warnings: Vec<String>,
    /// Full method output.
    pub details: serde_json::Value,
}

pub fn read_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Dataset::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(output: Option<&Path>, json: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => write_file(p, json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn cmd_gen(cmd: GenCommand) -> anyhow::Result<()> {
    let start = Instant::now();
    let (ds, config, seed, output) = match cmd {
        GenCommand::Synthetic(a) => {
            let spec = SyntheticSpec {
                l_hint: a.l_hint.unwrap_or(a.k),
                noise_amplitude: a.noise,
                shared: a.shared,
                ..SyntheticSpec::new(a.n, a.m, a.k, a.seed)
            };
            (gen_synthetic(&spec)?, serde_json::to_value(&spec)?, a.seed, a.output)
        }
        GenCommand::Diet(a) => {
            let spec = DietSpec {
                noise_amplitude: a.noise,
                ..DietSpec::new(a.k, a.seed)
            };
            (gen_diet(&spec)?, serde_json::to_value(&spec)?, a.seed, a.output)
        }
    };
    let json = ds.to_json()?;
    emit(output.as_deref(), &json)?;
    if let Some(p) = &output {
        RunManifest::new(config, vec![seed], start, vec![p.clone()]).write_for(p)?;
        eprintln!("wrote {} items with {} variables to {}", ds.k(), ds.n, p.display());
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let ds = read_dataset(&a.dataset)?;
    let cfg = a.solver.config(a.l)?;
    let tol = cfg.bnb.tol;
    let manifest_path = a.output.as_ref().map(|p| with_suffix(p, ".manifest.json"));
    let mut result = match a.method {
        Method::Sc => {
            let out = run_sc(&ds, &cfg)?;
            SolveResult {
                method: "sc".into(),
                manifest: None,
                solution: out.reported.clone(),
                instability: out.reported_instability.clone(),
                lb_objective: out.lb.as_ref().map(|b| b.solution.objective),
                ub_objective: out.ub.as_ref().map(|b| b.solution.objective),
                optimal: Some(out.optimal),
                wall_s: 0.0,
                warnings: out.warnings.clone(),
                details: serde_json::to_value(&out)?,
            }
        }
        Method::Ci | Method::Ic => {
            let out = match a.method {
                Method::Ci => run_ci(&ds, &cfg)?,
                _ => run_ic(&ds, &cfg)?,
            };
            let instability = evaluate(&ds.normalized()?, &out.solution, cfg.norm, &tol)?;
            SolveResult {
                method: if matches!(a.method, Method::Ci) { "ci" } else { "ic" }.into(),
                manifest: None,
                solution: out.solution.clone(),
                instability,
                lb_objective: None,
                ub_objective: None,
                optimal: None,
                wall_s: 0.0,
                warnings: out.warnings.clone(),
                details: serde_json::to_value(&out)?,
            }
        }
    };
    result.wall_s = start.elapsed().as_secs_f64();
    result.manifest = manifest_path.as_ref().map(|p| p.display().to_string());
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let json = serde_json::to_string_pretty(&result)?;
    match &a.output {
        Some(prefix) => {
            let json_path = with_suffix(prefix, ".json");
            let csv_path = with_suffix(prefix, ".csv");
            write_file(&json_path, &json)?;
            write_file(&csv_path, &per_k_csv(&result)?)?;
            RunManifest::new(
                serde_json::to_value(&cfg)?,
                vec![cfg.seed],
                start,
                vec![json_path, csv_path],
            )
            .write_for(prefix)?;
        }
        None => println!("{json}"),
    }
    eprintln!("{}", summary(&result));
    Ok(())
}

fn summary(r: &SolveResult) -> String {
    let mut s = format!("{}: instability {:.6}", r.method, r.instability.overall);
    if let (Some(lb), Some(ub)) = (r.lb_objective, r.ub_objective) {
        s.push_str(&format!(", LB {lb:.6}, UB {ub:.6}"));
    }
    if let Some(opt) = r.optimal {
        s.push_str(&format!(", optimal {opt}"));
    }
    s
}

/// One row per observation: `k,cluster,instability`.
fn per_k_csv(r: &SolveResult) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "cluster", "instability"])?;
    for (k, v) in r.instability.per_k.iter().enumerate() {
        w.write_record([k.to_string(), r.solution.assignment[k].to_string(), v.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let ds = read_dataset(&a.dataset)?.normalized()?;
    let text = std::fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let sol: ClusterSolution = match serde_json::from_str::<SolveResult>(&text) {
        Ok(r) => r.solution,
        Err(_) => serde_json::from_str(&text).with_context(|| format!("parsing {}", a.solution.display()))?,
    };
    if sol.assignment.len() != ds.k() {
        bail!("solution has {} observations, dataset has {}", sol.assignment.len(), ds.k());
    }
    let report = evaluate(&ds, &sol, a.norm.into(), &stabclust::Tolerances::default())?;
    emit(a.output.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(c) => cmd_gen(c).map(|_| ExitCode::SUCCESS),
        Command::Solve(a) => cmd_solve(a).map(|_| ExitCode::SUCCESS),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => bench::run(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => verify::run(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
