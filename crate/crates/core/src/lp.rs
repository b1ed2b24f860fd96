//! Dense linear programs and their solution.
//!
//! Models are stated in minimization form with `>=`, `<=` and `=` rows and
//! per-variable bounds (either side may be infinite). [`solve_lp`] runs a
//! two-phase primal simplex on a dense tableau and reports row duals with the
//! convention that a `>=` row of a minimization has a nonnegative dual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::Simplex;

/// Sense of a linear row `a'x (sense) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            RowSense::Ge => (self.rhs - act).max(0.0),
            RowSense::Le => (act - self.rhs).max(0.0),
            RowSense::Eq => (act - self.rhs).abs(),
        }
    }

    /// Signed distance from the row limit; nonnegative when satisfied. Equality
    /// rows report the negated absolute residual.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            RowSense::Ge => act - self.rhs,
            RowSense::Le => self.rhs - act,
            RowSense::Eq => -(act - self.rhs).abs(),
        }
    }
}

/// A linear program `min c'x` subject to rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    n_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
    bounds: Vec<(f64, f64)>,
    row_names: Vec<String>,
    col_names: Vec<String>,
}

impl LpModel {
    /// Creates a model with `n_vars` free variables, zero objective and no rows.
    pub fn new(n_vars: usize) -> Self {
        LpModel {
            n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n_vars],
            row_names: Vec::new(),
            col_names: (0..n_vars).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn row_name(&self, i: usize) -> &str {
        &self.row_names[i]
    }

    pub fn row_names(&self) -> &[String] {
        &self.row_names
    }

    pub fn col_name(&self, j: usize) -> &str {
        &self.col_names[j]
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) -> Result<()> {
        if objective.len() != self.n_vars {
            return Err(Error::Dimension {
                expected: self.n_vars,
                got: objective.len(),
                context: "objective".into(),
            });
        }
        self.objective = objective;
        Ok(())
    }

    pub fn set_objective_coeff(&mut self, j: usize, value: f64) {
        self.objective[j] = value;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> Result<()> {
        if j >= self.n_vars {
            return Err(Error::Dimension {
                expected: self.n_vars,
                got: j,
                context: "variable index".into(),
            });
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidModel(format!(
                "bounds [{lower}, {upper}] on variable {j} are empty"
            )));
        }
        self.bounds[j] = (lower, upper);
        Ok(())
    }

    pub fn set_col_name(&mut self, j: usize, name: impl Into<String>) {
        self.col_names[j] = name.into();
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> Result<usize> {
        let name = format!("r{}", self.rows.len());
        self.add_named_row(name, coeffs, sense, rhs)
    }

    pub fn add_named_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<f64>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize> {
        if coeffs.len() != self.n_vars {
            return Err(Error::Dimension {
                expected: self.n_vars,
                got: coeffs.len(),
                context: "row coefficients".into(),
            });
        }
        if coeffs.iter().any(|a| !a.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidModel("non-finite row data".into()));
        }
        let row = self.rows.len();
        if coeffs.iter().all(|&a| a == 0.0) {
            let impossible = match sense {
                RowSense::Ge => rhs > 0.0,
                RowSense::Le => rhs < 0.0,
                RowSense::Eq => rhs != 0.0,
            };
            if impossible {
                return Err(Error::EmptyRow { row });
            }
        }
        self.rows.push(Row { coeffs, sense, rhs });
        self.row_names.push(name.into());
        Ok(row)
    }

    /// Appends a row given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse_row(
        &mut self,
        name: impl Into<String>,
        terms: &[(usize, f64)],
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize> {
        let mut coeffs = vec![0.0; self.n_vars];
        for &(j, a) in terms {
            if j >= self.n_vars {
                return Err(Error::Dimension {
                    expected: self.n_vars,
                    got: j,
                    context: "sparse row column".into(),
                });
            }
            coeffs[j] += a;
        }
        self.add_named_row(name, coeffs, sense, rhs)
    }

    /// Appends a new variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        let j = self.n_vars;
        self.n_vars += 1;
        self.objective.push(cost);
        self.bounds.push((lower, upper));
        self.col_names.push(name.into());
        for row in &mut self.rows {
            row.coeffs.push(0.0);
        }
        j
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`, with the offending row index
    /// (`None` for a bound violation).
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (i, row) in self.rows.iter().enumerate() {
            let v = row.violation(x);
            if v > worst.0 {
                worst = (v, Some(i));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let v = (lo - x[j]).max(x[j] - hi).max(0.0);
            if v > worst.0 {
                worst = (v, None);
            }
        }
        worst
    }
}

/// Numerical tolerances shared by the LP and MIP solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_pivot: f64,
    pub tol_feas: f64,
    pub tol_int: f64,
    pub tol_opt_face: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_pivot: 1e-9,
            tol_feas: 1e-7,
            tol_int: 1e-6,
            tol_opt_face: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tol_pivot, self.tol_feas, self.tol_int, self.tol_opt_face];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidTolerances("all tolerances must be positive".into()));
        }
        if self.tol_pivot >= self.tol_feas {
            return Err(Error::InvalidTolerances("tol_pivot must be below tol_feas".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. Primal and dual vectors are only meaningful when
/// `status` is [`LpStatus::Optimal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual per row; nonnegative for `>=` rows, nonpositive for `<=` rows.
    pub duals: Vec<f64>,
    /// Reduced costs of the structural variables.
    pub reduced_costs: Vec<f64>,
    /// Basic columns: `j < n_vars` is a structural variable, `n_vars + i` the
    /// logical variable of row `i`.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
            iterations,
        }
    }
}

/// Solves `model` with the two-phase dense simplex.
pub fn solve_lp(model: &LpModel, tol: &Tolerances) -> Result<LpSolution> {
    tol.validate()?;
    let mut simplex = Simplex::new(model, *tol)?;
    let status = simplex.solve()?;
    Ok(simplex_solution(&simplex, status))
}

pub(crate) fn simplex_solution(simplex: &Simplex, status: LpStatus) -> LpSolution {
    if status != LpStatus::Optimal {
        return LpSolution::non_optimal(status, simplex.iterations());
    }
    LpSolution {
        status,
        x: simplex.primal_values(),
        objective: simplex.objective_value(),
        duals: simplex.row_duals(),
        reduced_costs: simplex.structural_reduced_costs(),
        basis: simplex.basic_columns(),
        iterations: simplex.iterations(),
    }
}

/// Maximum activity of row `row_index` over the feasible region of `model`.
pub fn row_max(model: &LpModel, row_index: usize, tol: &Tolerances) -> Result<f64> {
    if row_index >= model.n_rows() {
        return Err(Error::Dimension {
            expected: model.n_rows(),
            got: row_index,
            context: "row index".into(),
        });
    }
    let mut probe = model.clone();
    let objective: Vec<f64> = model.row(row_index).coeffs.iter().map(|a| -a).collect();
    probe.set_objective(objective)?;
    let sol = solve_lp(&probe, tol)?;
    match sol.status {
        LpStatus::Optimal => Ok(-sol.objective),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn single_active_bound() {
        let mut lp = LpModel::new(1);
        lp.set_objective(vec![-1.0]).unwrap();
        lp.add_row(vec![-1.0], RowSense::Ge, -1.5).unwrap();
        lp.add_row(vec![1.0], RowSense::Ge, 0.0).unwrap();
        let sol = solve_lp(&lp, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.5).abs() < 1e-12);
        assert!((sol.objective + 1.5).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
        assert!(sol.duals[1].abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LpModel::new(1);
        lp.add_row(vec![1.0], RowSense::Ge, 2.0).unwrap();
        lp.add_row(vec![-1.0], RowSense::Ge, -1.0).unwrap();
        assert_eq!(solve_lp(&lp, &tol()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpModel::new(1);
        lp.set_objective(vec![-1.0]).unwrap();
        lp.add_row(vec![1.0], RowSense::Ge, 0.0).unwrap();
        assert_eq!(solve_lp(&lp, &tol()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn zero_row_with_positive_rhs_rejected() {
        let mut lp = LpModel::new(2);
        assert_eq!(
            lp.add_row(vec![0.0, 0.0], RowSense::Ge, 1.0),
            Err(Error::EmptyRow { row: 0 })
        );
        assert_eq!(
            lp.add_row(vec![0.0, 0.0], RowSense::Eq, -1.0),
            Err(Error::EmptyRow { row: 0 })
        );
        assert!(lp.add_row(vec![1.0], RowSense::Ge, 0.0).is_err());
    }

    #[test]
    fn equality_rows_and_bounds() {
        // min x + 2y s.t. x + y = 3, 0 <= x <= 2, y >= 0 -> x = 2, y = 1.
        let mut lp = LpModel::new(2);
        lp.set_objective(vec![1.0, 2.0]).unwrap();
        lp.set_bounds(0, 0.0, 2.0).unwrap();
        lp.set_bounds(1, 0.0, f64::INFINITY).unwrap();
        lp.add_row(vec![1.0, 1.0], RowSense::Eq, 3.0).unwrap();
        let sol = solve_lp(&lp, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 4.0).abs() < 1e-12);
        // Dual of the equality is the price of y; x sits at its upper bound
        // with reduced cost 1 - 2 = -1.
        assert!((sol.duals[0] - 2.0).abs() < 1e-12);
        assert!((sol.reduced_costs[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn le_rows_have_nonpositive_duals() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6 (as min of the negation)
        let mut lp = LpModel::new(2);
        lp.set_objective(vec![-1.0, -1.0]).unwrap();
        lp.add_row(vec![1.0, 2.0], RowSense::Le, 4.0).unwrap();
        lp.add_row(vec![3.0, 1.0], RowSense::Le, 6.0).unwrap();
        lp.add_row(vec![1.0, 0.0], RowSense::Ge, 0.0).unwrap();
        lp.add_row(vec![0.0, 1.0], RowSense::Ge, 0.0).unwrap();
        let sol = solve_lp(&lp, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.6).abs() < 1e-9 && (sol.x[1] - 1.2).abs() < 1e-9);
        assert!(sol.duals[0] < 0.0 && sol.duals[1] < 0.0);
        let dual_obj: f64 = lp.rows().iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
        assert!((dual_obj - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn row_max_unit_square() {
        let mut lp = LpModel::new(2);
        lp.add_row(vec![1.0, 0.0], RowSense::Ge, 0.0).unwrap();
        lp.add_row(vec![0.0, 1.0], RowSense::Ge, 0.0).unwrap();
        lp.add_row(vec![-1.0, 0.0], RowSense::Ge, -1.0).unwrap();
        lp.add_row(vec![0.0, -1.0], RowSense::Ge, -1.0).unwrap();
        assert!((row_max(&lp, 0, &tol()).unwrap() - 1.0).abs() < 1e-12);
        assert!((row_max(&lp, 2, &tol()).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn row_max_single_point_region() {
        let mut lp = LpModel::new(1);
        lp.add_row(vec![1.0], RowSense::Ge, 0.0).unwrap();
        lp.add_row(vec![-1.0], RowSense::Ge, 0.0).unwrap();
        assert!(row_max(&lp, 0, &tol()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tolerances_validation() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances {
            tol_pivot: 1e-6,
            tol_feas: 1e-7,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
        let zero = Tolerances {
            tol_int: 0.0,
            ..Tolerances::default()
        };
        assert!(zero.validate().is_err());
    }
}
