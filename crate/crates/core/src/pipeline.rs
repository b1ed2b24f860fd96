//! End-to-end methods: cluster-then-infer (CI), infer-then-cluster (IC) and
//! the joint model (SC) seeded with the better heuristic.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{
    build_sc_lb, build_sc_ub, compute_big_m, extract_solution, strict_cone_check, AlphaHat, BigMConfig,
    ScVariableMap, DEFAULT_CONE_EPS, DEFAULT_M2,
};
use crate::incumbent::seed_cluster;
use crate::instability::{evaluate, InstabilityReport};
use crate::kmeans::{kmeans, DEFAULT_RESTARTS};
use crate::lp::Tolerances;
use crate::mip::{solve_mip, BnbConfig, MipModel, MipSolution, MipStatus};
use crate::model::{Certificate, ClusterSolution, CostVector, Dataset, NormKind, Provenance};

const ALPHA_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSide {
    Ub,
    Lb,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub l: usize,
    pub norm: NormKind,
    pub seed: u64,
    pub alpha: AlphaHat,
    pub bnb: BnbConfig,
    pub bound_side: BoundSide,
    pub m2: f64,
    pub kmeans_restarts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            l: 2,
            norm: NormKind::LInf,
            seed: 0,
            alpha: AlphaHat::default(),
            bnb: BnbConfig::default(),
            bound_side: BoundSide::Both,
            m2: DEFAULT_M2,
            kmeans_restarts: DEFAULT_RESTARTS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidInput("number of clusters must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a two-stage heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicOutcome {
    pub solution: ClusterSolution,
    /// Largest per-cluster lower-bound objective, when computed.
    pub lb_objective: Option<f64>,
    /// Smallest strict-cone floor used by any cluster; `None` if some cluster
    /// fell back to its lower-bound cost vector.
    pub alpha_used: Option<f64>,
    pub warnings: Vec<String>,
    pub wall_s: f64,
}

struct ClusterSolve {
    solution: ClusterSolution,
    alpha: Option<f64>,
    lb_objective: Option<f64>,
    warnings: Vec<String>,
}

/// Solves the one-cluster model, upper bound when `alpha` is set, seeded
/// with a constructive incumbent when one exists.
fn single_cluster(
    sub: &Dataset,
    big_m: &BigMConfig,
    cfg: &PipelineConfig,
    alpha: Option<f64>,
) -> Result<(MipSolution, ScVariableMap)> {
    let (model, map) = match alpha {
        Some(a) => build_sc_ub(sub, 1, cfg.norm, big_m, a)?,
        None => build_sc_lb(sub, 1, cfg.norm, big_m)?,
    };
    let tol = &cfg.bnb.tol;
    let warm = seed_cluster(sub, alpha, big_m.m2, cfg.norm, tol)
        .and_then(|seed| warm_start_assemble(sub, &seed, &map, &model, tol).ok());
    Ok((solve_mip(&model, &cfg.bnb, warm.as_deref())?, map))
}

/// Solves the one-cluster upper-bound model for `members`, lowering alpha on
/// infeasibility and falling back to the lower-bound model.
fn solve_cluster(
    ds: &Dataset,
    members: &[usize],
    big_m: &BigMConfig,
    cfg: &PipelineConfig,
    with_lb: bool,
) -> Result<ClusterSolve> {
    let sub = ds.subset(members);
    let bm = big_m.restrict(members);
    let tol = &cfg.bnb.tol;
    let mut warnings = Vec::new();
    let lb = if with_lb {
        Some(single_cluster(&sub, &bm, cfg, None)?)
    } else {
        None
    };
    let mut alpha = cfg.alpha.value();
    for attempt in 0..=ALPHA_RETRIES {
        let (sol, map) = single_cluster(&sub, &bm, cfg, Some(alpha))?;
        if sol.has_solution() {
            return Ok(ClusterSolve {
                solution: extract_solution(&sol, &map, &sub, tol)?,
                alpha: Some(alpha),
                lb_objective: lb.as_ref().filter(|(s, _)| s.has_solution()).map(|(s, _)| s.objective),
                warnings,
            });
        }
        if sol.status != MipStatus::Infeasible || attempt == ALPHA_RETRIES {
            break;
        }
        let msg = format!("cluster {members:?}: upper-bound model infeasible at alpha {alpha}, retrying with {}", alpha / 10.0);
        warn!("{msg}");
        warnings.push(msg);
        alpha /= 10.0;
    }
    let (sol, map) = match lb {
        Some(pair) => pair,
        None => single_cluster(&sub, &bm, cfg, None)?,
    };
    if !sol.has_solution() {
        return Err(Error::NoSolution(format!("cluster {members:?} has no feasible cost vector")));
    }
    let msg = format!("cluster {members:?}: using the lower-bound cost vector");
    warn!("{msg}");
    warnings.push(msg);
    Ok(ClusterSolve {
        lb_objective: Some(sol.objective),
        solution: extract_solution(&sol, &map, &sub, tol)?,
        alpha: None,
        warnings,
    })
}

/// Solves every nonempty cluster independently and merges the results in
/// label order.
fn solve_clusters(
    ds: &Dataset,
    assignment: &[usize],
    l: usize,
    big_m: &BigMConfig,
    cfg: &PipelineConfig,
    with_lb: bool,
    provenance: Provenance,
) -> Result<(ClusterSolution, Option<f64>, Option<f64>, Vec<String>)> {
    let mut groups = vec![Vec::new(); l];
    for (k, &lab) in assignment.iter().enumerate() {
        groups[lab].push(k);
    }
    let solved = groups
        .par_iter()
        .map(|members| {
            if members.is_empty() {
                Ok(None)
            } else {
                solve_cluster(ds, members, big_m, cfg, with_lb).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fallback_c = solved
        .iter()
        .flatten()
        .next()
        .map(|s| s.solution.cost_vectors[0].clone())
        .ok_or_else(|| Error::NoSolution("every cluster is empty".into()))?;
    let mut cost_vectors = Vec::with_capacity(l);
    let mut certificates: Vec<Option<Certificate>> = vec![None; ds.k()];
    let mut objective = 0.0f64;
    let mut lb_objective = with_lb.then_some(0.0f64);
    let mut alpha_used = Some(f64::INFINITY);
    let mut warnings = Vec::new();
    for (lab, s) in solved.into_iter().enumerate() {
        let Some(s) = s else {
            cost_vectors.push(fallback_c.clone());
            continue;
        };
        cost_vectors.push(s.solution.cost_vectors[0].clone());
        for (pos, &k) in groups[lab].iter().enumerate() {
            certificates[k] = Some(s.solution.certificates[pos].clone());
        }
        objective = objective.max(s.solution.objective);
        lb_objective = match (lb_objective, s.lb_objective) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        alpha_used = match (alpha_used, s.alpha) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        warnings.extend(s.warnings);
    }
    let solution = ClusterSolution {
        assignment: assignment.to_vec(),
        cost_vectors,
        certificates: certificates.into_iter().map(|c| c.expect("every observation is in a cluster")).collect(),
        objective,
        provenance,
    };
    Ok((solution, lb_objective, alpha_used, warnings))
}

fn run_ci_with(ds: &Dataset, big_m: &BigMConfig, cfg: &PipelineConfig, with_lb: bool) -> Result<HeuristicOutcome> {
    let start = Instant::now();
    let km = kmeans(&ds.observations(), cfg.l, cfg.seed, cfg.kmeans_restarts)?;
    let (solution, lb_objective, alpha_used, warnings) =
        solve_clusters(ds, &km.assignment, cfg.l, big_m, cfg, with_lb, Provenance::Ci)?;
    Ok(HeuristicOutcome {
        solution,
        lb_objective,
        alpha_used,
        warnings,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

fn run_ic_with(ds: &Dataset, big_m: &BigMConfig, cfg: &PipelineConfig, with_lb: bool) -> Result<HeuristicOutcome> {
    let start = Instant::now();
    let singles = (0..ds.k())
        .into_par_iter()
        .map(|k| solve_cluster(ds, &[k], big_m, cfg, false))
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<Vec<f64>> = singles
        .iter()
        .map(|s| s.solution.cost_vectors[0].as_slice().to_vec())
        .collect();
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for c in &costs {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    let l_eff = cfg.l.min(distinct.len());
    let km = kmeans(&costs, l_eff, cfg.seed, cfg.kmeans_restarts)?;
    let (solution, lb_objective, alpha_used, mut warnings) =
        solve_clusters(ds, &km.assignment, cfg.l, big_m, cfg, with_lb, Provenance::Ic)?;
    for s in singles {
        warnings.extend(s.warnings);
    }
    Ok(HeuristicOutcome {
        solution,
        lb_objective,
        alpha_used,
        warnings,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// k-means on the observations, then one cost vector per cluster.
pub fn run_ci(dataset: &Dataset, cfg: &PipelineConfig) -> Result<HeuristicOutcome> {
    cfg.validate()?;
    let ds = dataset.normalized()?;
    let big_m = compute_big_m(&ds, cfg.m2, &cfg.bnb.tol)?;
    run_ci_with(&ds, &big_m, cfg, cfg.bound_side == BoundSide::Both)
}

/// One cost vector per observation, k-means on those, then one corrected
/// cost vector per cluster.
pub fn run_ic(dataset: &Dataset, cfg: &PipelineConfig) -> Result<HeuristicOutcome> {
    cfg.validate()?;
    let ds = dataset.normalized()?;
    let big_m = compute_big_m(&ds, cfg.m2, &cfg.bnb.tol)?;
    run_ic_with(&ds, &big_m, cfg, cfg.bound_side == BoundSide::Both)
}

/// Full variable assignment of the clustering model built with `map` that
/// reproduces `heuristic`, checked against `model`.
pub fn warm_start_assemble(
    dataset: &Dataset,
    heuristic: &ClusterSolution,
    map: &ScVariableMap,
    model: &MipModel,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    if heuristic.assignment.len() != map.k() || heuristic.certificates.len() != map.k() {
        return Err(Error::Dimension {
            expected: map.k(),
            got: heuristic.assignment.len(),
            context: "heuristic assignment".into(),
        });
    }
    if heuristic.n_clusters() > map.l {
        return Err(Error::InvalidInput(format!(
            "heuristic has {} clusters, model has {}",
            heuristic.n_clusters(),
            map.l
        )));
    }
    let mut x = vec![0.0; map.n_cols];
    let mut t = 0.0f64;
    for (k, cert) in heuristic.certificates.iter().enumerate() {
        let item = &dataset.items[k];
        for j in 0..map.n {
            x[map.x[k][j]] = cert.x[j];
        }
        for (i, &lam) in cert.lambda.iter().enumerate() {
            x[map.lambda[k][i]] = lam;
        }
        for &i in &cert.active {
            x[map.v[k][i]] = 1.0;
        }
        x[map.u[k][heuristic.assignment[k]]] = 1.0;
        let dist = map.norm.distance(&item.x_hat, &cert.x);
        if map.norm == NormKind::L1 {
            for j in 0..map.n {
                x[map.e[k][j]] = (item.x_hat[j] - cert.x[j]).abs();
            }
        }
        t = t.max(dist);
    }
    for lab in 0..map.l {
        let c = heuristic
            .cost_vectors
            .get(lab)
            .or(heuristic.cost_vectors.first())
            .map(CostVector::as_slice)
            .ok_or_else(|| Error::InvalidInput("heuristic has no cost vectors".into()))?;
        for j in 0..map.n {
            x[map.c[lab][j]] = c[j];
            x[map.c_plus[lab][j]] = c[j].max(0.0);
            x[map.c_minus[lab][j]] = (-c[j]).max(0.0);
            x[map.z[lab][j]] = if c[j] >= 0.0 { 1.0 } else { 0.0 };
        }
    }
    x[map.t] = t;
    model.check_feasible(&x, tol)?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSolve {
    pub solution: ClusterSolution,
    pub status: MipStatus,
    /// Proven lower bound from branch and bound.
    pub bound: f64,
    pub alpha: Option<f64>,
    pub nodes: u64,
    pub wall_s: f64,
    pub warm_start_accepted: bool,
    /// Objective of the accepted warm start.
    pub warm_start_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScOutcome {
    pub ub: Option<BoundSolve>,
    pub lb: Option<BoundSolve>,
    /// The solution with the smaller evaluated instability.
    pub reported: ClusterSolution,
    pub reported_instability: InstabilityReport,
    pub optimal: bool,
    pub ci: std::result::Result<HeuristicOutcome, String>,
    pub ic: std::result::Result<HeuristicOutcome, String>,
    pub warnings: Vec<String>,
}

fn solve_bound(
    ds: &Dataset,
    big_m: &BigMConfig,
    cfg: &PipelineConfig,
    alpha: Option<f64>,
    warm: Option<&ClusterSolution>,
    warnings: &mut Vec<String>,
) -> Result<(BoundSolve, MipSolution)> {
    let start = Instant::now();
    let (model, map) = match alpha {
        Some(a) => build_sc_ub(ds, cfg.l, cfg.norm, big_m, a)?,
        None => build_sc_lb(ds, cfg.l, cfg.norm, big_m)?,
    };
    let assembled = match warm {
        Some(h) => match warm_start_assemble(ds, h, &map, &model, &cfg.bnb.tol) {
            Ok(x) => Some(x),
            Err(e) => {
                let side = if alpha.is_some() { "upper" } else { "lower" };
                let msg = format!("{side}-bound warm start rejected: {e}");
                warn!("{msg}");
                warnings.push(msg);
                None
            }
        },
        None => None,
    };
    let warm_obj = assembled.as_ref().map(|x| model.lp().objective_value(x));
    let sol = solve_mip(&model, &cfg.bnb, assembled.as_deref())?;
    if !sol.has_solution() {
        return Err(match sol.status {
            MipStatus::Infeasible => Error::Infeasible,
            _ => Error::NoSolution("time limit reached without an incumbent".into()),
        });
    }
    let solution = extract_solution(&sol, &map, ds, &cfg.bnb.tol)?;
    let out = BoundSolve {
        solution,
        status: sol.status,
        bound: sol.bound,
        alpha,
        nodes: sol.stats.nodes,
        wall_s: start.elapsed().as_secs_f64(),
        warm_start_accepted: sol.stats.warm_start_accepted,
        warm_start_objective: warm_obj,
    };
    Ok((out, sol))
}

fn certified_lower(l: &BoundSolve) -> f64 {
    if l.status == MipStatus::Optimal {
        l.solution.objective
    } else {
        l.bound
    }
}

/// Runs CI and IC, solves the lower-bound model seeded with the better of the
/// two, then the upper-bound model with the same seed and the lower bound as
/// a stopping floor.
pub fn run_sc(dataset: &Dataset, cfg: &PipelineConfig) -> Result<ScOutcome> {
    cfg.validate()?;
    let ds = dataset.normalized()?;
    let tol = cfg.bnb.tol;
    let big_m = compute_big_m(&ds, cfg.m2, &tol)?;
    let (ci, ic) = rayon::join(
        || run_ci_with(&ds, &big_m, cfg, false),
        || run_ic_with(&ds, &big_m, cfg, false),
    );
    let mut warnings = Vec::new();
    fn usable(h: &Result<HeuristicOutcome>) -> Option<&HeuristicOutcome> {
        h.as_ref().ok().filter(|o| o.alpha_used.is_some())
    }
    let incumbent = match (usable(&ci), usable(&ic)) {
        (Some(a), Some(b)) => Some(if b.solution.objective < a.solution.objective { b } else { a }),
        (a, b) => a.or(b),
    };
    if let Some(h) = incumbent {
        info!(
            "incumbent from {} with objective {}",
            h.solution.provenance.label(),
            h.solution.objective
        );
    }

    let mut lb = None;
    if cfg.bound_side != BoundSide::Ub {
        match solve_bound(&ds, &big_m, cfg, None, incumbent.map(|h| &h.solution), &mut warnings) {
            Ok((bs, _)) => lb = Some(bs),
            Err(e) => warnings.push(format!("lower-bound model failed: {e}")),
        }
    }
    let mut ub = None;
    if cfg.bound_side != BoundSide::Lb {
        let mut ub_cfg = cfg.clone();
        ub_cfg.bnb.objective_floor = lb.as_ref().map(certified_lower);
        let mut alpha = cfg.alpha.value();
        if let Some(a) = incumbent.and_then(|h| h.alpha_used) {
            if a < alpha {
                warnings.push(format!("upper-bound model built with the heuristic's alpha {a}"));
                alpha = a;
            }
        }
        for attempt in 0..=ALPHA_RETRIES {
            match solve_bound(&ds, &big_m, &ub_cfg, Some(alpha), incumbent.map(|h| &h.solution), &mut warnings) {
                Ok((bs, _)) => {
                    ub = Some(bs);
                    break;
                }
                Err(Error::Infeasible) if attempt < ALPHA_RETRIES => {
                    let msg = format!("upper-bound model infeasible at alpha {alpha}, retrying with {}", alpha / 10.0);
                    warn!("{msg}");
                    warnings.push(msg);
                    alpha /= 10.0;
                }
                Err(e) => {
                    warnings.push(format!("upper-bound model failed: {e}"));
                    break;
                }
            }
        }
    }
    let mut optimal = false;
    if let (Some(u), Some(l)) = (&ub, &lb) {
        let lower = certified_lower(l);
        let gap_closed = (u.solution.objective - lower).abs() <= 1e-6 * (1.0 + u.solution.objective.abs());
        let cone = l.status == MipStatus::Optimal
            && strict_cone_check(&ds, &l.solution, DEFAULT_CONE_EPS, &tol)?.iter().all(|&b| b);
        optimal = gap_closed || cone;
    } else if let Some(l) = &lb {
        optimal = l.status == MipStatus::Optimal
            && strict_cone_check(&ds, &l.solution, DEFAULT_CONE_EPS, &tol)?.iter().all(|&b| b);
    }

    let mut candidates = Vec::new();
    for bs in [&ub, &lb].into_iter().flatten() {
        let report = evaluate(&ds, &bs.solution, cfg.norm, &tol)?;
        candidates.push((bs.solution.clone(), report));
    }
    let Some((reported, reported_instability)) = candidates
        .into_iter()
        .reduce(|best, next| if next.1.overall < best.1.overall - 1e-12 { next } else { best })
    else {
        return Err(Error::NoSolution(format!("no bound model produced a solution: {}", warnings.join("; "))));
    };
    Ok(ScOutcome {
        ub,
        lb,
        reported,
        reported_instability,
        optimal,
        ci: ci.map_err(|e| e.to_string()),
        ic: ic.map_err(|e| e.to_string()),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub solution: Option<ClusterSolution>,
    pub instability: Option<InstabilityReport>,
    pub wall_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<MethodReport>,
    pub lb_objective: Option<f64>,
    pub ub_objective: Option<f64>,
    pub optimal: bool,
    /// Whether the joint solution is no worse than both heuristics; `None`
    /// when optimality was not established.
    pub ordering_holds: Option<bool>,
}

impl ComparisonReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// `method,overall,per_cluster_max,wall_s`; per-cluster values are
    /// separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,overall,per_cluster_max,wall_s\n");
        for m in &self.methods {
            let (overall, per) = match &m.instability {
                Some(r) => (
                    format!("{}", r.overall),
                    r.per_cluster.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
                ),
                None => ("NA".into(), String::new()),
            };
            out.push_str(&format!("{},{},{},{}\n", m.method, overall, per, m.wall_s));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// Runs all methods and scores each by its evaluated instability.
pub fn compare(dataset: &Dataset, cfg: &PipelineConfig) -> Result<ComparisonReport> {
    let ds = dataset.normalized()?;
    let tol = cfg.bnb.tol;
    let sc = run_sc(&ds, cfg)?;
    let score = |name: &str, h: &std::result::Result<HeuristicOutcome, String>| match h {
        Ok(o) => MethodReport {
            method: name.into(),
            instability: evaluate(&ds, &o.solution, cfg.norm, &tol).ok(),
            solution: Some(o.solution.clone()),
            wall_s: o.wall_s,
            error: None,
        },
        Err(e) => MethodReport {
            method: name.into(),
            solution: None,
            instability: None,
            wall_s: 0.0,
            error: Some(e.clone()),
        },
    };
    let ci = score("CI", &sc.ci);
    let ic = score("IC", &sc.ic);
    let sc_wall = sc.ub.as_ref().map_or(0.0, |b| b.wall_s) + sc.lb.as_ref().map_or(0.0, |b| b.wall_s);
    let sc_report = MethodReport {
        method: "SC".into(),
        solution: Some(sc.reported.clone()),
        instability: Some(sc.reported_instability.clone()),
        wall_s: sc_wall,
        error: None,
    };
    let ordering_holds = sc.optimal.then(|| {
        let sc_val = sc.reported_instability.overall;
        [&ci, &ic]
            .iter()
            .filter_map(|m| m.instability.as_ref())
            .all(|r| sc_val <= r.overall + 1e-6)
    });
    Ok(ComparisonReport {
        methods: vec![ic, ci, sc_report],
        lb_objective: sc.lb.as_ref().map(|b| b.solution.objective),
        ub_objective: sc.ub.as_ref().map(|b| b.solution.objective),
        optimal: sc.optimal,
        ordering_holds,
    })
}
