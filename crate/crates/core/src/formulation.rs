//! Mixed-integer models for joint clustering and cost-vector inference.
//!
//! For each observation `k` the model picks `n` rows of its region (`v^k`)
//! that are tight at a point `x^k` and whose nonnegative combination
//! `A^k' lambda^k` equals the cost vector `c^l` of the cluster it is assigned
//! to (`u_kl`). Cost vectors have unit L1 norm, split by sign with binaries
//! `z^l`. The objective is the largest distance between an observation and its
//! point `x^k`.
//!
//! The lower-bound model only asks for `lambda >= 0`; the upper-bound model
//! also requires `lambda_i >= alpha` on every selected row, which makes each
//! `x^k` the unique optimum of its LP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{row_max, solve_lp, LpModel, LpStatus, RowSense, Tolerances};
use crate::mip::{BigMEntry, MipModel, MipSolution};
use crate::model::{Certificate, ClusterSolution, CostVector, Dataset, NormKind, Provenance};

pub const DEFAULT_M2: f64 = 1e3;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_CONE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BigMStrategy {
    Computed,
    Manual,
}

/// Big-M constants: `m1` links cost vectors to row combinations, `m2` caps
/// the multipliers, `m3[k][i]` relaxes row tightness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMConfig {
    pub m1: f64,
    pub m2: f64,
    pub m3: Vec<Vec<f64>>,
    pub strategy: BigMStrategy,
}

impl BigMConfig {
    pub fn manual(m1: f64, m2: f64, m3: Vec<Vec<f64>>) -> Result<Self> {
        let cfg = BigMConfig {
            m1,
            m2,
            m3,
            strategy: BigMStrategy::Manual,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: String, value: f64| Error::BadBigM { name, value };
        if !(self.m1.is_finite() && self.m1 > 0.0) {
            return Err(bad("M1".into(), self.m1));
        }
        if !(self.m2.is_finite() && self.m2 > 0.0) {
            return Err(bad("M2".into(), self.m2));
        }
        for (k, row) in self.m3.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(format!("M3[{k},{i}]"), v));
                }
            }
        }
        Ok(())
    }

    /// Constants for the sub-dataset made of observations `indices`.
    pub fn restrict(&self, indices: &[usize]) -> BigMConfig {
        BigMConfig {
            m3: indices.iter().map(|&k| self.m3[k].clone()).collect(),
            ..self.clone()
        }
    }
}

/// `M3[k][i] = max a_i'x - b_i + 1` over each region and
/// `M1 = 1 + M2 * max_{k,j} sum_i |a_ij|`.
pub fn compute_big_m(dataset: &Dataset, m2: f64, tol: &Tolerances) -> Result<BigMConfig> {
    let m3 = dataset
        .items
        .par_iter()
        .map(|item| {
            let lp = item.dmp.to_lp(&vec![0.0; dataset.n])?;
            (0..item.dmp.m())
                .map(|i| Ok(row_max(&lp, i, tol)? - item.dmp.b[i] + 1.0))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let col_sum = dataset
        .items
        .iter()
        .flat_map(|item| (0..dataset.n).map(move |j| item.dmp.a.iter().map(|r| r[j].abs()).sum::<f64>()))
        .fold(0.0, f64::max);
    let cfg = BigMConfig {
        m1: 1.0 + m2 * col_sum,
        m2,
        m3,
        strategy: BigMStrategy::Computed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Strict-cone floor `alpha` on the selected multipliers, in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaHat(f64);

impl AlphaHat {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {value}")));
        }
        Ok(AlphaHat(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for AlphaHat {
    fn default() -> Self {
        AlphaHat(DEFAULT_ALPHA)
    }
}

/// Column indices of every model variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScVariableMap {
    pub n: usize,
    pub l: usize,
    pub norm: NormKind,
    /// `None` for the lower-bound model.
    pub alpha: Option<f64>,
    pub x: Vec<Vec<usize>>,
    pub lambda: Vec<Vec<usize>>,
    pub v: Vec<Vec<usize>>,
    /// L1 distance parts, empty under the max norm.
    pub e: Vec<Vec<usize>>,
    pub u: Vec<Vec<usize>>,
    pub c: Vec<Vec<usize>>,
    pub c_plus: Vec<Vec<usize>>,
    pub c_minus: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
    pub t: usize,
    pub n_cols: usize,
    pub big_m: Vec<BigMEntry>,
}

impl ScVariableMap {
    pub fn k(&self) -> usize {
        self.x.len()
    }
}

/// Lower-bound model.
pub fn build_sc_lb(dataset: &Dataset, l: usize, norm: NormKind, big_m: &BigMConfig) -> Result<(MipModel, ScVariableMap)> {
    build_sc(dataset, l, norm, big_m, None)
}

/// Upper-bound model: the lower-bound model plus `lambda_i >= alpha v_i`.
pub fn build_sc_ub(
    dataset: &Dataset,
    l: usize,
    norm: NormKind,
    big_m: &BigMConfig,
    alpha: f64,
) -> Result<(MipModel, ScVariableMap)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    build_sc(dataset, l, norm, big_m, Some(alpha))
}

fn build_sc(
    dataset: &Dataset,
    l: usize,
    norm: NormKind,
    big_m: &BigMConfig,
    alpha: Option<f64>,
) -> Result<(MipModel, ScVariableMap)> {
    dataset.validate()?;
    if l == 0 {
        return Err(Error::InvalidInput("number of clusters must be positive".into()));
    }
    if !dataset.is_normalized() {
        return Err(Error::InvalidInput("dataset rows must be L1-normalized".into()));
    }
    big_m.validate()?;
    if big_m.m3.len() != dataset.k() {
        return Err(Error::Dimension {
            expected: dataset.k(),
            got: big_m.m3.len(),
            context: "M3 decision-makers".into(),
        });
    }
    for (k, item) in dataset.items.iter().enumerate() {
        if big_m.m3[k].len() != item.dmp.m() {
            return Err(Error::Dimension {
                expected: item.dmp.m(),
                got: big_m.m3[k].len(),
                context: format!("M3 rows of decision-maker {k}"),
            });
        }
    }
    let n = dataset.n;
    let kk = dataset.k();
    let mut lp = LpModel::new(0);
    let inf = f64::INFINITY;
    let mut binaries = Vec::new();

    let mut x = Vec::with_capacity(kk);
    let mut lambda = Vec::with_capacity(kk);
    let mut v = Vec::with_capacity(kk);
    let mut e = Vec::new();
    for (k, item) in dataset.items.iter().enumerate() {
        let m = item.dmp.m();
        x.push((0..n).map(|j| lp.add_var(format!("x_{k}_{j}"), -inf, inf, 0.0)).collect::<Vec<_>>());
        lambda.push((0..m).map(|i| lp.add_var(format!("lam_{k}_{i}"), 0.0, inf, 0.0)).collect::<Vec<_>>());
        let vk: Vec<usize> = (0..m).map(|i| lp.add_var(format!("v_{k}_{i}"), 0.0, 1.0, 0.0)).collect();
        binaries.extend_from_slice(&vk);
        v.push(vk);
        if norm == NormKind::L1 {
            e.push((0..n).map(|j| lp.add_var(format!("e_{k}_{j}"), 0.0, inf, 0.0)).collect::<Vec<_>>());
        }
    }
    let u: Vec<Vec<usize>> = (0..kk)
        .map(|k| (0..l).map(|c| lp.add_var(format!("u_{k}_{c}"), 0.0, 1.0, 0.0)).collect())
        .collect();
    binaries.extend(u.iter().flatten());
    let mut c = Vec::with_capacity(l);
    let mut c_plus = Vec::with_capacity(l);
    let mut c_minus = Vec::with_capacity(l);
    let mut z = Vec::with_capacity(l);
    for lab in 0..l {
        c.push((0..n).map(|j| lp.add_var(format!("c_{lab}_{j}"), -1.0, 1.0, 0.0)).collect::<Vec<_>>());
        c_plus.push((0..n).map(|j| lp.add_var(format!("cp_{lab}_{j}"), 0.0, 1.0, 0.0)).collect::<Vec<_>>());
        c_minus.push((0..n).map(|j| lp.add_var(format!("cm_{lab}_{j}"), 0.0, 1.0, 0.0)).collect::<Vec<_>>());
        let zl: Vec<usize> = (0..n).map(|j| lp.add_var(format!("z_{lab}_{j}"), 0.0, 1.0, 0.0)).collect();
        binaries.extend_from_slice(&zl);
        z.push(zl);
    }
    let t = lp.add_var("t", 0.0, inf, 1.0);

    let mut registry = Vec::new();
    let (m1, m2) = (big_m.m1, big_m.m2);
    for (k, item) in dataset.items.iter().enumerate() {
        let dmp = &item.dmp;
        // c^l = A^k' lambda^k whenever u_kl = 1
        for lab in 0..l {
            for j in 0..n {
                let mut terms = vec![(c[lab][j], 1.0)];
                for (i, row) in dmp.a.iter().enumerate() {
                    if row[j] != 0.0 {
                        terms.push((lambda[k][i], -row[j]));
                    }
                }
                terms.push((u[k][lab], m1));
                let hi = lp.add_sparse_row(format!("link_hi_{k}_{lab}_{j}"), &terms, RowSense::Le, m1)?;
                let last = terms.len() - 1;
                terms[last].1 = -m1;
                let lo = lp.add_sparse_row(format!("link_lo_{k}_{lab}_{j}"), &terms, RowSense::Ge, -m1)?;
                for row in [hi, lo] {
                    registry.push(BigMEntry {
                        row,
                        label: "M1".into(),
                        value: m1,
                        gate: u[k][lab],
                        relaxed_when: 0.0,
                    });
                }
            }
        }
        for i in 0..dmp.m() {
            let cap = lp.add_sparse_row(
                format!("lam_cap_{k}_{i}"),
                &[(lambda[k][i], 1.0), (v[k][i], -m2)],
                RowSense::Le,
                0.0,
            )?;
            registry.push(BigMEntry {
                row: cap,
                label: "M2".into(),
                value: m2,
                gate: v[k][i],
                relaxed_when: 1.0,
            });
            if let Some(a) = alpha {
                lp.add_sparse_row(
                    format!("lam_floor_{k}_{i}"),
                    &[(lambda[k][i], 1.0), (v[k][i], -a)],
                    RowSense::Ge,
                    0.0,
                )?;
            }
            let mut terms: Vec<(usize, f64)> = (0..n)
                .filter(|&j| dmp.a[i][j] != 0.0)
                .map(|j| (x[k][j], dmp.a[i][j]))
                .collect();
            lp.add_sparse_row(format!("feas_{k}_{i}"), &terms, RowSense::Ge, dmp.b[i])?;
            let m3 = big_m.m3[k][i];
            terms.push((v[k][i], m3));
            let tight = lp.add_sparse_row(format!("tight_{k}_{i}"), &terms, RowSense::Le, dmp.b[i] + m3)?;
            registry.push(BigMEntry {
                row: tight,
                label: "M3".into(),
                value: m3,
                gate: v[k][i],
                relaxed_when: 0.0,
            });
        }
        let sel: Vec<(usize, f64)> = v[k].iter().map(|&col| (col, 1.0)).collect();
        lp.add_sparse_row(format!("select_{k}"), &sel, RowSense::Eq, n as f64)?;
        let asg: Vec<(usize, f64)> = u[k].iter().map(|&col| (col, 1.0)).collect();
        lp.add_sparse_row(format!("assign_{k}"), &asg, RowSense::Eq, 1.0)?;
        let xh = &item.x_hat;
        match norm {
            NormKind::LInf => {
                for j in 0..n {
                    lp.add_sparse_row(format!("dist_lo_{k}_{j}"), &[(t, 1.0), (x[k][j], 1.0)], RowSense::Ge, xh[j])?;
                    lp.add_sparse_row(format!("dist_hi_{k}_{j}"), &[(t, 1.0), (x[k][j], -1.0)], RowSense::Ge, -xh[j])?;
                }
            }
            NormKind::L1 => {
                for j in 0..n {
                    let ej = e[k][j];
                    lp.add_sparse_row(format!("dist_lo_{k}_{j}"), &[(ej, 1.0), (x[k][j], 1.0)], RowSense::Ge, xh[j])?;
                    lp.add_sparse_row(format!("dist_hi_{k}_{j}"), &[(ej, 1.0), (x[k][j], -1.0)], RowSense::Ge, -xh[j])?;
                }
                let mut terms = vec![(t, 1.0)];
                terms.extend(e[k].iter().map(|&col| (col, -1.0)));
                lp.add_sparse_row(format!("dist_sum_{k}"), &terms, RowSense::Ge, 0.0)?;
            }
        }
    }
    for lab in 0..l {
        let mut norm_terms = Vec::with_capacity(2 * n);
        for j in 0..n {
            lp.add_sparse_row(
                format!("split_{lab}_{j}"),
                &[(c[lab][j], 1.0), (c_plus[lab][j], -1.0), (c_minus[lab][j], 1.0)],
                RowSense::Eq,
                0.0,
            )?;
            lp.add_sparse_row(
                format!("pos_{lab}_{j}"),
                &[(c_plus[lab][j], 1.0), (z[lab][j], -1.0)],
                RowSense::Le,
                0.0,
            )?;
            lp.add_sparse_row(
                format!("neg_{lab}_{j}"),
                &[(c_minus[lab][j], 1.0), (z[lab][j], 1.0)],
                RowSense::Le,
                1.0,
            )?;
            norm_terms.push((c_plus[lab][j], 1.0));
            norm_terms.push((c_minus[lab][j], 1.0));
        }
        lp.add_sparse_row(format!("unit_{lab}"), &norm_terms, RowSense::Eq, 1.0)?;
    }
    let n_cols = lp.n_vars();
    let map = ScVariableMap {
        n,
        l,
        norm,
        alpha,
        x,
        lambda,
        v,
        e,
        u,
        c,
        c_plus,
        c_minus,
        z,
        t,
        n_cols,
        big_m: registry,
    };
    Ok((MipModel::new(lp, binaries)?, map))
}

/// Reads clusters, unit cost vectors and certificates from a model solution.
pub fn extract_solution(
    sol: &MipSolution,
    map: &ScVariableMap,
    dataset: &Dataset,
    tol: &Tolerances,
) -> Result<ClusterSolution> {
    if !sol.has_solution() {
        return Err(Error::NoSolution("model has no incumbent".into()));
    }
    if sol.x.len() != map.n_cols || map.k() != dataset.k() {
        return Err(Error::Dimension {
            expected: map.n_cols,
            got: sol.x.len(),
            context: "solution vector".into(),
        });
    }
    let xs = &sol.x;
    let mut assignment = Vec::with_capacity(map.k());
    for k in 0..map.k() {
        let mut chosen = None;
        for lab in 0..map.l {
            let val = xs[map.u[k][lab]];
            if val.min(1.0 - val).abs() > tol.tol_int && (val - val.round()).abs() > tol.tol_int {
                return Err(Error::FractionalAssignment { k, l: lab, value: val });
            }
            if val > 0.5 && chosen.is_none() {
                chosen = Some(lab);
            }
        }
        assignment.push(chosen.ok_or(Error::FractionalAssignment { k, l: 0, value: 0.0 })?);
    }
    let cost_vectors = (0..map.l)
        .map(|lab| CostVector::normalized(map.c[lab].iter().map(|&j| xs[j]).collect()))
        .collect::<Result<Vec<_>>>()?;
    let certificates = (0..map.k())
        .map(|k| Certificate {
            x: map.x[k].iter().map(|&j| xs[j]).collect(),
            lambda: map.lambda[k].iter().map(|&j| xs[j].max(0.0)).collect(),
            active: map.v[k]
                .iter()
                .enumerate()
                .filter(|(_, &j)| xs[j] > 0.5)
                .map(|(i, _)| i)
                .collect(),
        })
        .collect();
    Ok(ClusterSolution {
        assignment,
        cost_vectors,
        certificates,
        objective: sol.objective,
        provenance: if map.alpha.is_some() {
            Provenance::ScUb
        } else {
            Provenance::ScLb
        },
    })
}

/// Per cluster: whether its cost vector is a combination of every member's
/// selected rows with all multipliers `> eps`.
///
/// Solved as `max s` subject to `A_S' lambda = c`, `lambda >= s`, so the
/// answer does not depend on the LP feasibility tolerance.
pub fn strict_cone_check(dataset: &Dataset, sol: &ClusterSolution, eps: f64, tol: &Tolerances) -> Result<Vec<bool>> {
    if sol.certificates.len() != dataset.k() {
        return Err(Error::InvalidInput("solution carries no certificates".into()));
    }
    let n = dataset.n;
    let clusters = sol.clusters();
    clusters
        .iter()
        .enumerate()
        .map(|(lab, members)| {
            if members.is_empty() {
                return Ok(true);
            }
            let c = sol.cost_vectors[lab].as_slice();
            let mut lp = LpModel::new(0);
            let s = lp.add_var("s", f64::NEG_INFINITY, 1.0, -1.0);
            for &k in members {
                let active = &sol.certificates[k].active;
                let a = &dataset.items[k].dmp.a;
                let cols: Vec<usize> = active
                    .iter()
                    .map(|i| lp.add_var(format!("lam_{k}_{i}"), 0.0, f64::INFINITY, 0.0))
                    .collect();
                for &col in &cols {
                    lp.add_sparse_row(format!("floor_{col}"), &[(col, 1.0), (s, -1.0)], RowSense::Ge, 0.0)?;
                }
                for j in 0..n {
                    let terms: Vec<(usize, f64)> = active
                        .iter()
                        .zip(&cols)
                        .filter(|(&i, _)| a[i][j] != 0.0)
                        .map(|(&i, &col)| (col, a[i][j]))
                        .collect();
                    if terms.is_empty() {
                        if c[j].abs() > tol.tol_feas {
                            return Ok(false);
                        }
                        continue;
                    }
                    lp.add_sparse_row(format!("cone_{k}_{j}"), &terms, RowSense::Eq, c[j])?;
                }
            }
            let sol = solve_lp(&lp, tol)?;
            Ok(sol.status == LpStatus::Optimal && sol.x[s] > eps)
        })
        .collect()
}
