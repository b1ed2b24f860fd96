//! Exhaustive reference solvers for tiny instances.
//!
//! These enumerate vertices, partitions and sign patterns directly and are
//! used to check the MIP formulations and the instability LPs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, LpStatus, RowSense, Tolerances};
use crate::model::{Dataset, Dmp, NormKind};

pub const MAX_VERTEX_N: usize = 6;
pub const MAX_VERTEX_M: usize = 25;
pub const MAX_SC_K: usize = 8;
pub const MAX_SC_L: usize = 3;

const MERGE_TOL: f64 = 1e-7;

/// Vertices of a region with every nonsingular active row set defining each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSet {
    pub vertices: Vec<Vec<f64>>,
    pub active_sets: Vec<Vec<Vec<usize>>>,
}

/// Solves the square system `m x = r`; `None` when (numerically) singular.
pub(crate) fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 * scale {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[i][k] -= f * m[c][k];
                }
                r[i] -= f * r[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Next `n`-combination of `0..m` in lexicographic order.
fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let n = idx.len();
    let mut i = n;
    while i > 0 {
        i -= 1;
        if idx[i] < m - n + i {
            idx[i] += 1;
            for k in i + 1..n {
                idx[k] = idx[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All vertices from all `C(m, n)` row subsets.
pub fn enum_vertices(dmp: &Dmp, tol: &Tolerances) -> Result<VertexSet> {
    dmp.validate()?;
    let (m, n) = (dmp.m(), dmp.n());
    if n > MAX_VERTEX_N || m > MAX_VERTEX_M {
        return Err(Error::SizeGuard(format!(
            "vertex enumeration needs n <= {MAX_VERTEX_N} and m <= {MAX_VERTEX_M}, got n = {n}, m = {m}"
        )));
    }
    let mut out = VertexSet {
        vertices: Vec::new(),
        active_sets: Vec::new(),
    };
    if m < n {
        return Ok(out);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let sys = idx.iter().map(|&i| dmp.a[i].clone()).collect();
        let rhs = idx.iter().map(|&i| dmp.b[i]).collect();
        if let Some(x) = solve_square(sys, rhs) {
            let feasible = (0..m).all(|i| dmp.b[i] - dmp.activity(i, &x) <= tol.tol_feas * (1.0 + dmp.b[i].abs()));
            if feasible {
                let found = out
                    .vertices
                    .iter()
                    .position(|v| NormKind::LInf.distance(v, &x) <= MERGE_TOL);
                match found {
                    Some(p) => out.active_sets[p].push(idx.clone()),
                    None => {
                        out.vertices.push(x);
                        out.active_sets.push(vec![idx.clone()]);
                    }
                }
            }
        }
        if !next_combination(&mut idx, m) {
            break;
        }
    }
    Ok(out)
}

/// Worst-case distance from `x_hat` to the optimal face under `c`, over the
/// enumerated vertices.
pub fn bf_instability(dmp: &Dmp, x_hat: &[f64], c: &[f64], norm: NormKind, tol: &Tolerances) -> Result<f64> {
    let vs = enum_vertices(dmp, tol)?;
    if vs.vertices.is_empty() {
        return Err(Error::Infeasible);
    }
    let values: Vec<f64> = vs
        .vertices
        .iter()
        .map(|v| v.iter().zip(c).map(|(a, b)| a * b).sum())
        .collect();
    let z = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = z + tol.tol_opt_face * (1.0 + z.abs());
    Ok(vs
        .vertices
        .iter()
        .zip(&values)
        .filter(|(_, &val)| val <= cut)
        .map(|(v, _)| norm.distance(x_hat, v))
        .fold(0.0, f64::max))
}

/// Distance from `x_hat` to the nearest vertex of the region.
pub fn nearest_vertex_distance(dmp: &Dmp, x_hat: &[f64], norm: NormKind, tol: &Tolerances) -> Result<f64> {
    let vs = enum_vertices(dmp, tol)?;
    vs.vertices
        .iter()
        .map(|v| norm.distance(x_hat, v))
        .reduce(f64::min)
        .ok_or(Error::Infeasible)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfScResult {
    pub objective: f64,
    /// Cluster label of every observation.
    pub assignment: Vec<usize>,
    pub cost_vectors: Vec<Vec<f64>>,
    /// Vertex chosen for each observation.
    pub vertices: Vec<Vec<f64>>,
}

/// A candidate certificate for one observation.
#[derive(Debug, Clone)]
struct Choice {
    vertex: usize,
    active: Vec<usize>,
    dist: f64,
}

/// Finds `c` with `||c||_1 = 1` and `c = A_S' lambda`, `lambda >= alpha` on
/// each chosen active set `S`, trying every sign pattern of `c`.
fn common_cost(
    items: &[(&Dmp, &[usize])],
    n: usize,
    alpha: f64,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    let n_lambda: usize = items.iter().map(|(_, s)| s.len()).sum();
    for pattern in 0u32..(1 << n) {
        let sign = |j: usize| if (pattern >> j) & 1 == 1 { -1.0 } else { 1.0 };
        let mut lp = LpModel::new(n + n_lambda);
        for j in 0..n {
            let s = sign(j);
            lp.set_bounds(j, if s > 0.0 { 0.0 } else { f64::NEG_INFINITY }, if s > 0.0 { f64::INFINITY } else { 0.0 })?;
        }
        for p in 0..n_lambda {
            lp.set_bounds(n + p, alpha, f64::INFINITY)?;
        }
        let norm_row: Vec<(usize, f64)> = (0..n).map(|j| (j, sign(j))).collect();
        lp.add_sparse_row("norm", &norm_row, RowSense::Eq, 1.0)?;
        let mut offset = n;
        for (dmp, set) in items {
            for j in 0..n {
                let mut row = vec![(j, 1.0)];
                for (q, &i) in set.iter().enumerate() {
                    if dmp.a[i][j] != 0.0 {
                        row.push((offset + q, -dmp.a[i][j]));
                    }
                }
                lp.add_sparse_row(format!("cone{offset}_{j}"), &row, RowSense::Eq, 0.0)?;
            }
            offset += set.len();
        }
        let sol = solve_lp(&lp, tol)?;
        if sol.status == LpStatus::Optimal {
            return Ok(Some(sol.x[..n].to_vec()));
        }
    }
    Ok(None)
}

struct ClusterSearch<'a> {
    dataset: &'a Dataset,
    choices: Vec<Vec<Choice>>,
    vertex_sets: Vec<VertexSet>,
    alpha: f64,
    tol: Tolerances,
}

/// Best value of one cluster with the chosen vertices and cost vector.
type ClusterBest = Option<(f64, Vec<usize>, Vec<f64>)>;

impl ClusterSearch<'_> {
    fn cluster_best(&self, members: &[usize]) -> Result<ClusterBest> {
        let mut best: ClusterBest = None;
        let mut picks = Vec::with_capacity(members.len());
        self.dfs(members, 0, 0.0, &mut picks, &mut best)?;
        Ok(best)
    }

    fn dfs(
        &self,
        members: &[usize],
        depth: usize,
        current: f64,
        picks: &mut Vec<usize>,
        best: &mut ClusterBest,
    ) -> Result<()> {
        if depth == members.len() {
            let items: Vec<(&Dmp, &[usize])> = members
                .iter()
                .zip(picks.iter())
                .map(|(&k, &p)| (&self.dataset.items[k].dmp, self.choices[k][p].active.as_slice()))
                .collect();
            if let Some(c) = common_cost(&items, self.dataset.n, self.alpha, &self.tol)? {
                *best = Some((current, picks.clone(), c));
            }
            return Ok(());
        }
        let k = members[depth];
        for (p, ch) in self.choices[k].iter().enumerate() {
            let value = current.max(ch.dist);
            if best.as_ref().is_some_and(|(b, _, _)| value >= *b) {
                break;
            }
            picks.push(p);
            let feasible = depth + 1 == members.len() || {
                let items: Vec<(&Dmp, &[usize])> = members[..=depth]
                    .iter()
                    .zip(picks.iter())
                    .map(|(&k, &p)| (&self.dataset.items[k].dmp, self.choices[k][p].active.as_slice()))
                    .collect();
                common_cost(&items, self.dataset.n, self.alpha, &self.tol)?.is_some()
            };
            if feasible {
                self.dfs(members, depth + 1, value, picks, best)?;
            }
            picks.pop();
        }
        Ok(())
    }
}

/// Restricted-growth label strings: observation 0 gets label 0 and each
/// later observation reuses a label or opens the next unused one.
fn canonical_assignments(k: usize, l: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, l: usize, cur: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for lab in 0..(used + 1).min(l) {
            cur.push(lab);
            rec(k, l, cur, used.max(lab + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, l, &mut Vec::with_capacity(k), 0, &mut out);
    out
}

/// Exact clustering optimum by enumerating partitions, vertex and active-set
/// choices, and cost-vector sign patterns. `alpha = None` gives the
/// lower-bound model; `Some(a)` requires multipliers `>= a` on every selected
/// row.
pub fn bf_sc(
    dataset: &Dataset,
    l: usize,
    norm: NormKind,
    alpha: Option<f64>,
    tol: &Tolerances,
) -> Result<BfScResult> {
    dataset.validate()?;
    let k = dataset.k();
    if k > MAX_SC_K || l > MAX_SC_L || l == 0 {
        return Err(Error::SizeGuard(format!(
            "exhaustive clustering needs K <= {MAX_SC_K} and 1 <= L <= {MAX_SC_L}, got K = {k}, L = {l}"
        )));
    }
    let mut vertex_sets = Vec::with_capacity(k);
    let mut choices = Vec::with_capacity(k);
    for item in &dataset.items {
        let vs = enum_vertices(&item.dmp, tol)?;
        let mut ch: Vec<Choice> = Vec::new();
        for (v, sets) in vs.active_sets.iter().enumerate() {
            let dist = norm.distance(&item.x_hat, &vs.vertices[v]);
            for s in sets {
                ch.push(Choice {
                    vertex: v,
                    active: s.clone(),
                    dist,
                });
            }
        }
        ch.sort_by(|a, b| a.dist.total_cmp(&b.dist));
        choices.push(ch);
        vertex_sets.push(vs);
    }
    let search = ClusterSearch {
        dataset,
        choices,
        vertex_sets,
        alpha: alpha.unwrap_or(0.0),
        tol: *tol,
    };
    let mut memo: HashMap<u32, ClusterBest> = HashMap::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for labels in canonical_assignments(k, l) {
        let mut masks = vec![0u32; l];
        for (i, &lab) in labels.iter().enumerate() {
            masks[lab] |= 1 << i;
        }
        let mut value = 0.0f64;
        let mut ok = true;
        for &mask in masks.iter().filter(|&&m| m != 0) {
            if !memo.contains_key(&mask) {
                let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                memo.insert(mask, search.cluster_best(&members)?);
            }
            match &memo[&mask] {
                Some((v, _, _)) => value = value.max(*v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && best.as_ref().is_none_or(|(b, _)| value < *b - 1e-12) {
            best = Some((value, labels));
        }
    }
    let Some((objective, assignment)) = best else {
        return Err(Error::NoSolution("no partition admits a common cost vector".into()));
    };
    let mut cost_vectors = vec![Vec::new(); l];
    let mut vertices = vec![Vec::new(); k];
    for (lab, cv) in cost_vectors.iter_mut().enumerate() {
        let members: Vec<usize> = (0..k).filter(|&i| assignment[i] == lab).collect();
        if members.is_empty() {
            let mut e = vec![0.0; dataset.n];
            e[0] = 1.0;
            *cv = e;
            continue;
        }
        let mask = members.iter().fold(0u32, |m, &i| m | 1 << i);
        let (_, picks, c) = memo[&mask].clone().expect("cluster value was memoized");
        *cv = c;
        for (&i, &p) in members.iter().zip(&picks) {
            let ch = &search.choices[i][p];
            vertices[i] = search.vertex_sets[i].vertices[ch.vertex].clone();
        }
    }
    Ok(BfScResult {
        objective,
        assignment,
        cost_vectors,
        vertices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(u1: f64, u2: f64) -> Dmp {
        Dmp::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-u1, -u2, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn square_and_triangle_vertices() {
        let tol = Tolerances::default();
        let vs = enum_vertices(&boxed(2.5, 2.5), &tol).unwrap();
        assert_eq!(vs.vertices.len(), 4);
        for v in [[0.0, 0.0], [2.5, 0.0], [0.0, 2.5], [2.5, 2.5]] {
            assert!(vs.vertices.iter().any(|w| w == &v.to_vec()));
        }
        let tri = Dmp::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.5, -0.5]], vec![0.0, 0.0, -0.5]).unwrap();
        assert_eq!(enum_vertices(&tri, &tol).unwrap().vertices.len(), 3);
    }

    #[test]
    fn degenerate_vertex_has_several_active_sets() {
        // Apex (0, 0) of x >= 0, y >= 0 and x + y >= 0 (redundant through it).
        let d = Dmp::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5], vec![-0.5, -0.5]],
            vec![0.0, 0.0, 0.0, -1.0],
        )
        .unwrap();
        let vs = enum_vertices(&d, &Tolerances::default()).unwrap();
        let p = vs.vertices.iter().position(|v| v == &vec![0.0, 0.0]).unwrap();
        assert_eq!(vs.active_sets[p].len(), 3);
    }

    #[test]
    fn size_guard() {
        let d = Dmp::new(vec![vec![1.0; 7]], vec![0.0]).unwrap();
        assert!(matches!(enum_vertices(&d, &Tolerances::default()), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn instability_by_enumeration() {
        let tol = Tolerances::default();
        let v = bf_instability(&boxed(1.5, 1.0), &[1.2, 1.0], &[0.0, -1.0], NormKind::LInf, &tol).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
        let v = bf_instability(&boxed(2.5, 2.5), &[2.5, 0.3], &[-1.0, 0.0], NormKind::LInf, &tol).unwrap();
        assert!((v - 2.2).abs() < 1e-12);
        let v = bf_instability(&boxed(2.5, 2.5), &[2.5, 0.3], &[-0.5, 0.5], NormKind::LInf, &tol).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn canonical_label_strings() {
        assert_eq!(canonical_assignments(3, 2).len(), 4);
        assert_eq!(canonical_assignments(4, 3).len(), 14);
        assert_eq!(canonical_assignments(3, 1), vec![vec![0, 0, 0]]);
    }
}
