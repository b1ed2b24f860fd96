//! Worst-case distance between an observation and the optimal face of its
//! decision-maker's LP, and its aggregation over a clustering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, LpStatus, RowSense, Tolerances};
use crate::mip::{solve_mip, BnbConfig, MipModel, MipStatus};
use crate::model::{ClusterSolution, Dataset, Dmp, NormKind};

/// Rows with a dual above this are fixed at equality on the optimal face.
const DUAL_SUPPORT_TOL: f64 = 1e-9;

/// The optimal face `{A x >= b, c'x <= z* + eps}` with the rows carrying a
/// positive optimal dual held at equality.
fn optimal_face(dmp: &Dmp, c: &[f64], tol: &Tolerances) -> Result<LpModel> {
    let lp = dmp.to_lp(c)?;
    let sol = solve_lp(&lp, tol)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let z = sol.objective;
    let mut face = LpModel::new(dmp.n());
    for (i, row) in dmp.a.iter().enumerate() {
        let sense = if sol.duals[i] > DUAL_SUPPORT_TOL {
            RowSense::Eq
        } else {
            RowSense::Ge
        };
        face.add_named_row(lp.row_name(i).to_string(), row.clone(), sense, dmp.b[i])?;
    }
    if c.iter().any(|&v| v != 0.0) {
        face.add_named_row("opt", c.to_vec(), RowSense::Le, z + tol.tol_opt_face * (1.0 + z.abs()))?;
    }
    Ok(face)
}

/// Coordinate ranges `(min_j, max_j)` over the feasible set of `face`.
fn coordinate_ranges(face: &LpModel, tol: &Tolerances) -> Result<Vec<(f64, f64)>> {
    let n = face.n_vars();
    let mut probe = face.clone();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut ends = [0.0; 2];
        for (s, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut obj = vec![0.0; n];
            obj[j] = sign;
            probe.set_objective(obj)?;
            let sol = solve_lp(&probe, tol)?;
            match sol.status {
                LpStatus::Optimal => ends[s] = sol.x[j],
                LpStatus::Infeasible => return Err(Error::Infeasible),
                LpStatus::Unbounded => return Err(Error::Unbounded),
            }
        }
        out.push((ends[0], ends[1]));
    }
    Ok(out)
}

/// `max { d(x_hat, x) : x optimal for min c'x over the region }`.
pub fn worst_case_distance(
    dmp: &Dmp,
    x_hat: &[f64],
    c: &[f64],
    norm: NormKind,
    tol: &Tolerances,
) -> Result<f64> {
    if x_hat.len() != dmp.n() || c.len() != dmp.n() {
        return Err(Error::Dimension {
            expected: dmp.n(),
            got: x_hat.len().min(c.len()),
            context: "observation or cost vector".into(),
        });
    }
    let face = optimal_face(dmp, c, tol)?;
    let ranges = coordinate_ranges(&face, tol)?;
    match norm {
        NormKind::LInf => Ok(ranges
            .iter()
            .zip(x_hat)
            .map(|(&(lo, hi), &xh)| (xh - lo).max(hi - xh))
            .fold(0.0, f64::max)),
        NormKind::L1 => l1_worst_case(&face, &ranges, x_hat, tol),
    }
}

/// Maximizes `sum_j |x_hat_j - x_j|` over the face with one sign binary per
/// coordinate.
fn l1_worst_case(face: &LpModel, ranges: &[(f64, f64)], x_hat: &[f64], tol: &Tolerances) -> Result<f64> {
    let n = face.n_vars();
    let mut model = face.clone();
    model.set_objective(vec![0.0; n])?;
    let mut binaries = Vec::with_capacity(n);
    for j in 0..n {
        let (lo, hi) = ranges[j];
        let outside = (lo - x_hat[j]).max(x_hat[j] - hi).max(0.0);
        let big_m = 2.0 * ((hi - lo) + outside) + 1.0;
        let e = model.add_var(format!("e{j}"), 0.0, f64::INFINITY, -1.0);
        let s = model.add_var(format!("s{j}"), 0.0, 1.0, 0.0);
        binaries.push(s);
        // e <= x_hat - x + M s
        model.add_sparse_row(format!("env_lo{j}"), &[(e, 1.0), (j, 1.0), (s, -big_m)], RowSense::Le, x_hat[j])?;
        // e <= x - x_hat + M (1 - s)
        model.add_sparse_row(format!("env_hi{j}"), &[(e, 1.0), (j, -1.0), (s, big_m)], RowSense::Le, big_m - x_hat[j])?;
        model.add_sparse_row(format!("abs_lo{j}"), &[(e, 1.0), (j, 1.0)], RowSense::Ge, x_hat[j])?;
        model.add_sparse_row(format!("abs_hi{j}"), &[(e, 1.0), (j, -1.0)], RowSense::Ge, -x_hat[j])?;
    }
    let mip = MipModel::new(model, binaries)?;
    let cfg = BnbConfig {
        tol: *tol,
        ..BnbConfig::default()
    };
    let sol = solve_mip(&mip, &cfg, None)?;
    match sol.status {
        MipStatus::Optimal => Ok(-sol.objective),
        MipStatus::Infeasible => Err(Error::Infeasible),
        _ => Err(Error::NoSolution("L1 worst-case search did not finish".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub per_k: Vec<f64>,
    /// Largest member value per cluster, `0` for empty clusters.
    pub per_cluster: Vec<f64>,
    pub overall: f64,
}

/// Worst-case distance of every observation under its cluster's cost vector.
pub fn evaluate(dataset: &Dataset, sol: &ClusterSolution, norm: NormKind, tol: &Tolerances) -> Result<InstabilityReport> {
    if sol.assignment.len() != dataset.k() {
        return Err(Error::Dimension {
            expected: dataset.k(),
            got: sol.assignment.len(),
            context: "assignment".into(),
        });
    }
    if let Some(&bad) = sol.assignment.iter().find(|&&l| l >= sol.n_clusters()) {
        return Err(Error::InvalidInput(format!("assignment refers to missing cluster {bad}")));
    }
    let per_k = (0..dataset.k())
        .into_par_iter()
        .map(|k| {
            let item = &dataset.items[k];
            let c = sol.cost_vectors[sol.assignment[k]].as_slice();
            worst_case_distance(&item.dmp, &item.x_hat, c, norm, tol)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut per_cluster = vec![0.0f64; sol.n_clusters()];
    for (k, &l) in sol.assignment.iter().enumerate() {
        per_cluster[l] = per_cluster[l].max(per_k[k]);
    }
    let overall = per_cluster.iter().copied().fold(0.0, f64::max);
    Ok(InstabilityReport {
        per_k,
        per_cluster,
        overall,
    })
}
