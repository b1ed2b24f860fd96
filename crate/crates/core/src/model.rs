//! Decision-makers, observations and datasets.
//!
//! Decision-maker `k` solves `min c'x s.t. A x >= b` over a bounded region.
//! Rows are expected to be L1-normalized before any clustering model is built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpModel, LpStatus, RowSense, Tolerances};

/// Feasible region `{x : A x >= b}` of one decision-maker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dmp {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Dmp {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let dmp = Dmp { a, b, labels: None };
        dmp.validate()?;
        Ok(dmp)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                got: labels.len(),
                context: "row labels".into(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::InvalidModel("decision-maker has no rows".into()));
        }
        if self.b.len() != self.a.len() {
            return Err(Error::Dimension {
                expected: self.a.len(),
                got: self.b.len(),
                context: "right-hand side".into(),
            });
        }
        let n = self.a[0].len();
        if n == 0 {
            return Err(Error::InvalidModel("decision-maker has no variables".into()));
        }
        for row in &self.a {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                    context: "constraint row".into(),
                });
            }
        }
        let finite = self.a.iter().flatten().chain(&self.b).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.m() {
                return Err(Error::Dimension {
                    expected: self.m(),
                    got: labels.len(),
                    context: "row labels".into(),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// Activity `a_i'x` of row `i`.
    pub fn activity(&self, i: usize, x: &[f64]) -> f64 {
        self.a[i].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Largest violation of `A x >= b`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.m())
            .map(|i| self.b[i] - self.activity(i, x))
            .fold(0.0, f64::max)
    }

    /// Rows tight at `x` within `tol`.
    pub fn active_rows(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.m())
            .filter(|&i| (self.activity(i, x) - self.b[i]).abs() <= tol)
            .collect()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.a
            .iter()
            .all(|row| (row.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() <= tol)
    }

    /// LP `min c'x s.t. A x >= b` with free variables.
    pub fn to_lp(&self, c: &[f64]) -> Result<LpModel> {
        let mut lp = LpModel::new(self.n());
        lp.set_objective(c.to_vec())?;
        for (i, row) in self.a.iter().enumerate() {
            let name = match &self.labels {
                Some(l) => l[i].clone(),
                None => format!("r{i}"),
            };
            lp.add_named_row(name, row.clone(), RowSense::Ge, self.b[i])?;
        }
        Ok(lp)
    }
}

/// Scales every row and its right-hand side to unit L1 norm. `k` only labels
/// the error.
pub fn normalize_rows(dmp: &Dmp, k: usize) -> Result<Dmp> {
    let mut out = dmp.clone();
    for (i, row) in out.a.iter_mut().enumerate() {
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return Err(Error::ZeroRow { k, row: i });
        }
        if norm != 1.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            out.b[i] /= norm;
        }
    }
    Ok(out)
}

/// Cost vector with unit L1 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    /// Accepts `c` if `||c||_1 = 1` within `1e-6`.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        let norm: f64 = c.iter().map(|v| v.abs()).sum();
        if !c.iter().all(|v| v.is_finite()) || (norm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("cost vector has L1 norm {norm}, expected 1")));
        }
        Ok(CostVector(c))
    }

    /// Rescales `c` to unit L1 norm.
    pub fn normalized(c: Vec<f64>) -> Result<Self> {
        let norm: f64 = c.iter().map(|v| v.abs()).sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero cost vector".into()));
        }
        Ok(CostVector(c.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum NormKind {
    L1,
    #[default]
    LInf,
}

impl NormKind {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            NormKind::L1 => diffs.sum(),
            NormKind::LInf => diffs.fold(0.0, f64::max),
        }
    }
}

/// One observed decision with the region it was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataItem {
    #[serde(flatten)]
    pub dmp: Dmp,
    pub x_hat: Vec<f64>,
}

/// Clustering input: `K` observations sharing the variable count `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub items: Vec<DataItem>,
}

impl Dataset {
    pub fn new(items: Vec<DataItem>) -> Result<Self> {
        let n = items.first().map_or(0, |it| it.dmp.n());
        let ds = Dataset { n, items };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::InvalidInput("dataset has no items".into()));
        }
        for item in &self.items {
            item.dmp.validate()?;
            if item.dmp.n() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    got: item.dmp.n(),
                    context: "decision-maker variable count".into(),
                });
            }
            if item.x_hat.len() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    got: item.x_hat.len(),
                    context: "observation length".into(),
                });
            }
            if !item.x_hat.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput("non-finite observation".into()));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.items.len()
    }

    /// Row-normalized copy.
    pub fn normalized(&self) -> Result<Dataset> {
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(k, it)| {
                Ok(DataItem {
                    dmp: normalize_rows(&it.dmp, k)?,
                    x_hat: it.x_hat.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { n: self.n, items })
    }

    pub fn is_normalized(&self) -> bool {
        self.items.iter().all(|it| it.dmp.is_normalized(1e-9))
    }

    /// The items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n: self.n,
            items: indices.iter().map(|&k| self.items[k].clone()).collect(),
        }
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.items.iter().map(|it| it.x_hat.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        let ds: Dataset = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ScUb,
    ScLb,
    Ci,
    Ic,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::ScUb => "SC-UB",
            Provenance::ScLb => "SC-LB",
            Provenance::Ci => "CI",
            Provenance::Ic => "IC",
        }
    }
}

/// Vertex and row multipliers certifying that `x` is optimal for the
/// decision-maker under the cluster's cost vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Rows selected as the active set.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    /// Cluster label of every observation.
    pub assignment: Vec<usize>,
    pub cost_vectors: Vec<CostVector>,
    pub certificates: Vec<Certificate>,
    pub objective: f64,
    pub provenance: Provenance,
}

impl ClusterSolution {
    pub fn n_clusters(&self) -> usize {
        self.cost_vectors.len()
    }

    /// Members of each cluster in index order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (k, &l) in self.assignment.iter().enumerate() {
            out[l].push(k);
        }
        out
    }

    /// Nonempty clusters as a sorted partition, independent of labels.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut p: Vec<Vec<usize>> = self.clusters().into_iter().filter(|c| !c.is_empty()).collect();
        p.sort();
        p
    }
}

/// Optimal point and value of `min c'x` over the decision-maker's region.
pub fn forward_solve(dmp: &Dmp, c: &[f64], tol: &Tolerances) -> Result<(Vec<f64>, f64)> {
    let sol = solve_lp(&dmp.to_lp(c)?, tol)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.x, sol.objective)),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreflightReport {
    /// Coordinate-wise minimum over the region.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Largest `s` with `a_i'x - s ||a_i||_1 >= b_i` for all rows.
    pub interior_slack: f64,
    /// `interior_slack` above the feasibility tolerance.
    pub full_dimensional: bool,
}

/// Checks that the region is nonempty and bounded and measures how far its
/// most interior point is from the boundary.
pub fn preflight(dmp: &Dmp, tol: &Tolerances) -> Result<PreflightReport> {
    dmp.validate()?;
    let n = dmp.n();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; n];
            c[j] = sign;
            let sol = solve_lp(&dmp.to_lp(&c)?, tol)?;
            match sol.status {
                LpStatus::Infeasible => return Err(Error::Infeasible),
                LpStatus::Unbounded => {
                    let mut direction = vec![0.0; n];
                    direction[j] = -sign;
                    return Err(Error::UnboundedRegion { direction });
                }
                LpStatus::Optimal => {
                    if sign > 0.0 {
                        lower[j] = sol.x[j];
                    } else {
                        upper[j] = sol.x[j];
                    }
                }
            }
        }
    }
    // max s  s.t.  a_i'x - s ||a_i||_1 >= b_i
    let mut lp = LpModel::new(n + 1);
    let mut obj = vec![0.0; n + 1];
    obj[n] = -1.0;
    lp.set_objective(obj)?;
    for (i, row) in dmp.a.iter().enumerate() {
        let mut coeffs = row.clone();
        coeffs.push(-row.iter().map(|v| v.abs()).sum::<f64>());
        lp.add_row(coeffs, RowSense::Ge, dmp.b[i])?;
    }
    let sol = solve_lp(&lp, tol)?;
    let interior_slack = match sol.status {
        LpStatus::Optimal => sol.x[n],
        _ => return Err(Error::Infeasible),
    };
    Ok(PreflightReport {
        lower,
        upper,
        interior_slack,
        full_dimensional: interior_slack > tol.tol_feas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm1() -> Dmp {
        Dmp::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-1.5, -1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    fn dm3() -> Dmp {
        Dmp::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-2.5, -2.5, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn normalize_scales_rows() {
        let d = Dmp::new(vec![vec![2.0, 2.0], vec![-1.0, 0.0]], vec![4.0, -1.5]).unwrap();
        let nd = normalize_rows(&d, 0).unwrap();
        assert_eq!(nd.a[0], vec![0.5, 0.5]);
        assert_eq!(nd.b[0], 1.0);
        assert_eq!(nd.a[1], vec![-1.0, 0.0]);
        assert_eq!(nd.b[1], -1.5);
        assert_eq!(normalize_rows(&nd, 0).unwrap(), nd);
        assert_eq!(normalize_rows(&dm1(), 0).unwrap(), dm1());
    }

    #[test]
    fn zero_row_rejected() {
        let d = Dmp::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, -1.0]).unwrap();
        assert_eq!(normalize_rows(&d, 4), Err(Error::ZeroRow { k: 4, row: 1 }));
    }

    #[test]
    fn forward_solves() {
        let tol = Tolerances::default();
        let (x, z) = forward_solve(&dm1(), &[-1.0, 0.0], &tol).unwrap();
        assert!((z + 1.5).abs() < 1e-12);
        assert!((x[0] - 1.5).abs() < 1e-12);
        let (x, z) = forward_solve(&dm3(), &[-0.5, 0.5], &tol).unwrap();
        assert!((z + 1.25).abs() < 1e-12);
        assert!((x[0] - 2.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        let (_, z) = forward_solve(&dm3(), &[1.0, 0.0], &tol).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn preflight_unit_square() {
        let sq = Dmp::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![0.0, 0.0, -1.0, -1.0],
        )
        .unwrap();
        let r = preflight(&sq, &Tolerances::default()).unwrap();
        assert_eq!(r.lower, vec![0.0, 0.0]);
        assert_eq!(r.upper, vec![1.0, 1.0]);
        // x = (0.5, 0.5) is at distance 0.5 from each side.
        assert!((r.interior_slack - 0.5).abs() < 1e-12);
        assert!(r.full_dimensional);
    }

    #[test]
    fn preflight_half_space_unbounded() {
        let h = Dmp::new(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        assert!(matches!(
            preflight(&h, &Tolerances::default()),
            Err(Error::UnboundedRegion { .. })
        ));
    }

    #[test]
    fn preflight_single_point() {
        let p = Dmp::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap();
        let r = preflight(&p, &Tolerances::default()).unwrap();
        assert_eq!(r.interior_slack, 0.0);
        assert!(!r.full_dimensional);
    }

    #[test]
    fn cost_vector_norm() {
        assert!(CostVector::new(vec![0.5, -0.5]).is_ok());
        assert!(CostVector::new(vec![0.5, 0.4]).is_err());
        assert_eq!(CostVector::normalized(vec![2.0, -2.0]).unwrap().as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn dataset_json_round_trip() {
        let ds = Dataset::new(vec![DataItem {
            dmp: dm1().with_labels(vec!["a".into(), "b".into(), "c".into(), "d".into()]).unwrap(),
            x_hat: vec![1.2, 0.1 + 0.2],
        }])
        .unwrap();
        let text = ds.to_json().unwrap();
        assert!(text.contains("\"A\""));
        assert_eq!(Dataset::from_json(&text).unwrap(), ds);
    }
}
