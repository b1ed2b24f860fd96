use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use stabclust::{evaluate, gen_synthetic, run_sc, Dataset, HeuristicOutcome, SyntheticSpec};

use crate::manifest::{with_suffix, RunManifest};
use crate::SolverArgs;

/// Environment variable holding the number of bench workers.
pub const WORKERS_ENV: &str = "STABCLUST_WORKERS";

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long = "K", value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long = "L", value_delimiter = ',', required = true)]
    l: Vec<usize>,
    /// Instance seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Number of distinct true cost vectors; defaults to K.
    #[arg(long = "L-hint")]
    l_hint: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long)]
    shared: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Row table; the mean over L values goes to `<output>.mean.csv`.
    #[arg(short, long, default_value = "bench.csv")]
    output: PathBuf,
}

/// One bench row. `ic` and `ci` are evaluated instabilities, `ub` and `lb`
/// the bound-model objectives.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub seed: u64,
    pub ic: Option<f64>,
    pub ci: Option<f64>,
    pub ub: Option<f64>,
    pub lb: Option<f64>,
    pub ic_s: Option<f64>,
    pub ci_s: Option<f64>,
    pub ub_s: Option<f64>,
    pub lb_s: Option<f64>,
    pub status: String,
}

#[derive(Debug, Serialize)]
pub struct MeanRow {
    n: usize,
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    seed: u64,
    n_l: usize,
    ic: Option<f64>,
    ci: Option<f64>,
    ub: Option<f64>,
    lb: Option<f64>,
    ic_s: Option<f64>,
    ci_s: Option<f64>,
    ub_s: Option<f64>,
    lb_s: Option<f64>,
}

fn workers() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v}"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn row(ds: &Dataset, n: usize, m: usize, k: usize, l: usize, seed: u64, solver: &SolverArgs) -> BenchRow {
    let mut r = BenchRow {
        n,
        m,
        k,
        l,
        seed,
        ic: None,
        ci: None,
        ub: None,
        lb: None,
        ic_s: None,
        ci_s: None,
        ub_s: None,
        lb_s: None,
        status: String::new(),
    };
    let cfg = match solver.config(l) {
        Ok(c) => c,
        Err(e) => {
            r.status = format!("failed: {e}");
            return r;
        }
    };
    let out = match run_sc(ds, &cfg) {
        Ok(o) => o,
        Err(e) => {
            r.status = format!("failed: {e}");
            return r;
        }
    };
    let mut missing = Vec::new();
    let mut score = |name: &str, h: &Result<HeuristicOutcome, String>| match h {
        Ok(o) => match evaluate(ds, &o.solution, cfg.norm, &cfg.bnb.tol) {
            Ok(rep) => (Some(rep.overall), Some(o.wall_s)),
            Err(e) => {
                missing.push(format!("{name}: {e}"));
                (None, Some(o.wall_s))
            }
        },
        Err(e) => {
            missing.push(format!("{name}: {e}"));
            (None, None)
        }
    };
    (r.ic, r.ic_s) = score("ic", &out.ic);
    (r.ci, r.ci_s) = score("ci", &out.ci);
    if let Some(b) = &out.ub {
        (r.ub, r.ub_s) = (Some(b.solution.objective), Some(b.wall_s));
    } else {
        missing.push("ub".into());
    }
    if let Some(b) = &out.lb {
        (r.lb, r.lb_s) = (Some(b.solution.objective), Some(b.wall_s));
    } else {
        missing.push("lb".into());
    }
    r.status = if !missing.is_empty() {
        format!("partial: {}", missing.join("; "))
    } else if out.optimal {
        "optimal".into()
    } else {
        "open".into()
    };
    r
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    let v = v?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Averages every column over the L values of each instance.
pub fn mean_over_l(rows: &[BenchRow]) -> Vec<MeanRow> {
    let mut groups: BTreeMap<(usize, usize, usize, u64), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.m, r.k, r.seed)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, m, k, seed), g)| MeanRow {
            n,
            m,
            k,
            seed,
            n_l: g.len(),
            ic: mean(g.iter().map(|r| r.ic)),
            ci: mean(g.iter().map(|r| r.ci)),
            ub: mean(g.iter().map(|r| r.ub)),
            lb: mean(g.iter().map(|r| r.lb)),
            ic_s: mean(g.iter().map(|r| r.ic_s)),
            ci_s: mean(g.iter().map(|r| r.ci_s)),
            ub_s: mean(g.iter().map(|r| r.ub_s)),
            lb_s: mean(g.iter().map(|r| r.lb_s)),
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &PathBuf, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(a: BenchArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut instances = Vec::new();
    for &n in &a.n {
        for &m in &a.m {
            for &k in &a.k {
                for &seed in &a.seeds {
                    let spec = SyntheticSpec {
                        l_hint: a.l_hint.unwrap_or(k).min(k),
                        noise_amplitude: a.noise,
                        shared: a.shared,
                        ..SyntheticSpec::new(n, m, k, seed)
                    };
                    let ds = gen_synthetic(&spec)
                        .and_then(|d| d.normalized())
                        .with_context(|| format!("generating n={n} m={m} K={k} seed={seed}"))?;
                    instances.push((n, m, k, seed, ds));
                }
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| a.l.iter().map(move |&l| (i, l)))
        .filter(|&(i, l)| l >= 1 && l <= instances[i].2)
        .collect();
    if jobs.is_empty() {
        bail!("no (instance, L) pair with 1 <= L <= K");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers()? {
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    let mut rows: Vec<BenchRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, l)| {
                let (n, m, k, seed, ds) = &instances[i];
                let r = row(ds, *n, *m, *k, l, *seed, &a.solver);
                info!("n={n} m={m} K={k} L={l} seed={seed}: {}", r.status);
                r
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.n, r.m, r.k, r.l, r.seed));
    let mean_path = with_suffix(&a.output, ".mean.csv");
    write_csv(&a.output, &rows)?;
    write_csv(&mean_path, &mean_over_l(&rows))?;
    let config = serde_json::json!({
        "n": a.n, "m": a.m, "K": a.k, "L": a.l, "l_hint": a.l_hint, "noise": a.noise, "shared": a.shared,
        "solver": a.solver.config(1)?,
    });
    RunManifest::new(config, a.seeds.clone(), start, vec![a.output.clone(), mean_path]).write_for(&a.output)?;
    let failed = rows.iter().filter(|r| r.status.starts_with("failed")).count();
    eprintln!("{} rows written to {} ({failed} failed)", rows.len(), a.output.display());
    Ok(())
}
