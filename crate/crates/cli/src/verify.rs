use std::process::ExitCode;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabclust::formulation::{BigMConfig, DEFAULT_ALPHA};
use stabclust::oracle::{bf_instability, bf_sc};
use stabclust::{
    box_example, build_sc_lb, build_sc_ub, compute_big_m, gen_synthetic, solve_mip, validate_big_m, worst_case_distance,
    BnbConfig, Dataset, MipStatus, NormKind, SyntheticSpec, Tolerances,
};

use crate::{NormArg, EXIT_MISMATCH};

const TOL: f64 = 1e-6;

#[derive(Args)]
pub struct VerifyArgs {
    /// Number of random instances (n <= 3, m <= 8, K <= 6, L <= 2).
    #[arg(long, default_value_t = 50)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the three-box fixture.
    #[arg(long)]
    skip_example: bool,
    /// Replace every row-relaxation constant with this value.
    #[arg(long = "inject-m3")]
    inject_m3: Option<f64>,
    #[arg(long, value_enum, default_value_t = NormArg::Linf)]
    norm: NormArg,
    /// Wall-clock limit per branch-and-bound run, in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
}

struct Checker {
    norm: NormKind,
    inject_m3: Option<f64>,
    bnb: BnbConfig,
    tol: Tolerances,
    checks: usize,
    mismatches: Vec<String>,
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs())),
        (None, None) => true,
        _ => false,
    }
}

impl Checker {
    fn big_m(&self, ds: &Dataset) -> anyhow::Result<BigMConfig> {
        let computed = compute_big_m(ds, 1e3, &self.tol)?;
        Ok(match self.inject_m3 {
            Some(v) => {
                let m3 = ds.items.iter().map(|it| vec![v; it.dmp.m()]).collect();
                BigMConfig::manual(computed.m1, computed.m2, m3)?
            }
            None => computed,
        })
    }

    /// Injected relaxation constants smaller than the computed ones.
    fn undersized_m3(&self, ds: &Dataset) -> Option<String> {
        let v = self.inject_m3?;
        let computed = compute_big_m(ds, 1e3, &self.tol).ok()?;
        let short: Vec<(usize, usize, f64)> = computed
            .m3
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(i, &m)| (k, i, m)))
            .filter(|&(_, _, m)| v < m)
            .collect();
        let &(k, i, m) = short.first()?;
        Some(format!(
            "injected M3 = {v} is below the computed value on {} rows, e.g. M3[{k},{i}] = {m:.4}",
            short.len()
        ))
    }

    /// Objective of the bound model, `None` when infeasible, with any big-M
    /// warnings raised at the solution.
    fn mip(&self, ds: &Dataset, l: usize, alpha: Option<f64>) -> anyhow::Result<(Option<f64>, Vec<String>)> {
        let bm = self.big_m(ds)?;
        let (model, map) = match alpha {
            Some(a) => build_sc_ub(ds, l, self.norm, &bm, a)?,
            None => build_sc_lb(ds, l, self.norm, &bm)?,
        };
        let sol = solve_mip(&model, &self.bnb, None)?;
        match sol.status {
            MipStatus::Optimal => {
                let warnings = validate_big_m(&model, &sol.x, &map.big_m)
                    .into_iter()
                    .map(|w| format!("big-M {} = {} binding in row {}", w.label, w.value, w.row_name))
                    .collect();
                Ok((Some(sol.objective), warnings))
            }
            MipStatus::Infeasible => Ok((None, Vec::new())),
            other => anyhow::bail!("search stopped with {other:?}"),
        }
    }

    fn record(&mut self, ok: bool, what: String) {
        self.checks += 1;
        if !ok {
            println!("MISMATCH {what}");
            self.mismatches.push(what);
        }
    }

    fn instance(&mut self, name: &str, ds: &Dataset, l: usize) -> anyhow::Result<()> {
        for alpha in [None, Some(DEFAULT_ALPHA)] {
            let side = if alpha.is_some() { "UB" } else { "LB" };
            let oracle = match bf_sc(ds, l, self.norm, alpha, &self.tol) {
                Ok(r) => Some(r),
                Err(stabclust::Error::Infeasible) => None,
                Err(e) => return Err(e.into()),
            };
            let (got, warnings) = self.mip(ds, l, alpha)?;
            let want = oracle.as_ref().map(|r| r.objective);
            let ok = same(got, want);
            let mut what = format!("{name} {side}: model {got:?}, oracle {want:?}");
            if !ok {
                let notes: Vec<String> = warnings.into_iter().chain(self.undersized_m3(ds)).collect();
                if !notes.is_empty() {
                    what.push_str(&format!(" [{}]", notes.join("; ")));
                }
            }
            self.record(ok, what);
            let Some(r) = oracle else { continue };
            for (k, it) in ds.items.iter().enumerate() {
                let c = &r.cost_vectors[r.assignment[k]];
                let got = worst_case_distance(&it.dmp, &it.x_hat, c, self.norm, &self.tol).ok();
                let want = bf_instability(&it.dmp, &it.x_hat, c, self.norm, &self.tol).ok();
                self.record(
                    same(got, want),
                    format!("{name} {side} k={k} distance: {got:?}, oracle {want:?}"),
                );
            }
        }
        Ok(())
    }
}

/// Random guarded instance and its cluster count.
fn random_instance(seed: u64) -> anyhow::Result<(Dataset, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=3);
    let m = rng.random_range(2 * n + 1..=8);
    let k = rng.random_range(3..=6);
    let l = rng.random_range(1..=2);
    let ds = gen_synthetic(&SyntheticSpec::new(n, m, k, seed))?.normalized()?;
    Ok((ds, l))
}

pub fn run(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let mut bnb = BnbConfig::default();
    bnb.time_limit_s = a.time_limit;
    let mut ch = Checker {
        norm: a.norm.into(),
        inject_m3: a.inject_m3,
        bnb,
        tol: Tolerances::default(),
        checks: 0,
        mismatches: Vec::new(),
    };
    if !a.skip_example {
        let ds = box_example().normalized()?;
        ch.instance("example", &ds, 2)?;
        let cases = [(0, [0.0, -1.0]), (2, [-1.0, 0.0])];
        for (k, c) in cases {
            let it = &ds.items[k];
            let got = worst_case_distance(&it.dmp, &it.x_hat, &c, ch.norm, &ch.tol).ok();
            let want = bf_instability(&it.dmp, &it.x_hat, &c, ch.norm, &ch.tol).ok();
            ch.record(same(got, want), format!("example k={k} c={c:?} distance: {got:?}, oracle {want:?}"));
        }
        println!("example fixture: {} checks", ch.checks);
    }
    for i in 0..a.instances {
        let seed = a.seed.wrapping_add(i);
        let (ds, l) = random_instance(seed)?;
        ch.instance(&format!("seed {seed}"), &ds, l)?;
    }
    if a.instances > 0 {
        println!("random suite: {} instances from seed {}", a.instances, a.seed);
    }
    if ch.mismatches.is_empty() {
        println!("PASS: {} checks", ch.checks);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: {} of {} checks mismatched", ch.mismatches.len(), ch.checks);
        Ok(ExitCode::from(EXIT_MISMATCH))
    }
}
