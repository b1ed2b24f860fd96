//! Dense bounded-variable tableau simplex.
//!
//! Every row `i` of the model gets a logical column `y_i` with `y_i = a_i'x`,
//! so the constraint system is homogeneous (`y - Ax = 0`) and all row senses
//! become bounds on `y`. Phase 1 adds artificial columns only for rows whose
//! logical cannot start basic within its bounds. After phase 1 the artificial
//! columns are dropped whenever none of them is basic, which keeps tableaux
//! compact for the branch-and-bound warm starts.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp::{LpModel, LpStatus, RowSense, Tolerances};

const TOL_DUAL: f64 = 1e-9;
const REFRESH_EVERY: usize = 64;
/// Degenerate dual pivots tolerated before a warm solve gives up and the
/// caller falls back to a cold solve.
const DUAL_STALL_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    Free,
    Fixed,
}

/// Basis description sufficient to rebuild a tableau for a model.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    basis: Vec<usize>,
    state: Vec<VarState>,
}

#[derive(Debug, Clone)]
struct Problem {
    m: usize,
    n: usize,
    /// Row-major m x n constraint matrix.
    a: Vec<f64>,
    cost: Vec<f64>,
}

#[derive(Clone)]
pub(crate) struct Simplex {
    prob: Arc<Problem>,
    tol: Tolerances,
    ncols: usize,
    n_art: usize,
    t: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    iterations: usize,
    since_refresh: usize,
    phase2_ready: bool,
    pivot_nz: Vec<usize>,
    pivot_row: Vec<f64>,
}

fn initial_state(lo: f64, hi: f64) -> (VarState, f64) {
    if lo == hi {
        (VarState::Fixed, lo)
    } else if lo.is_finite() {
        (VarState::Lower, lo)
    } else if hi.is_finite() {
        (VarState::Upper, hi)
    } else {
        (VarState::Free, 0.0)
    }
}

impl Simplex {
    pub(crate) fn new(model: &LpModel, tol: Tolerances) -> Result<Self> {
        let m = model.n_rows();
        let n = model.n_vars();
        let mut a = Vec::with_capacity(m * n);
        for row in model.rows() {
            a.extend_from_slice(&row.coeffs);
        }
        let prob = Arc::new(Problem {
            m,
            n,
            a,
            cost: model.objective().to_vec(),
        });
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for &(l, h) in model.bounds() {
            lo.push(l);
            hi.push(h);
        }
        for row in model.rows() {
            let (l, h) = match row.sense {
                RowSense::Ge => (row.rhs, f64::INFINITY),
                RowSense::Le => (f64::NEG_INFINITY, row.rhs),
                RowSense::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        Ok(Self::cold(prob, tol, lo, hi))
    }

    /// Builds the phase-1 tableau for the given bounds.
    fn cold(prob: Arc<Problem>, tol: Tolerances, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let (m, n) = (prob.m, prob.n);
        let mut state = Vec::with_capacity(n + m);
        let mut val = Vec::with_capacity(n + m);
        for j in 0..n {
            let (s, v) = initial_state(lo[j], hi[j]);
            state.push(s);
            val.push(v);
        }
        // Decide per row whether the logical starts basic or needs an artificial.
        let mut art_rows = Vec::new();
        let mut art_sign = Vec::new();
        for i in 0..m {
            let act: f64 = prob.a[i * n..(i + 1) * n]
                .iter()
                .zip(&val[..n])
                .map(|(a, v)| a * v)
                .sum();
            let (l, h) = (lo[n + i], hi[n + i]);
            if act >= l - tol.tol_feas && act <= h + tol.tol_feas {
                state.push(VarState::Basic);
                val.push(act);
            } else {
                let target = if act < l { l } else { h };
                let s = if l == h {
                    VarState::Fixed
                } else if act < l {
                    VarState::Lower
                } else {
                    VarState::Upper
                };
                state.push(s);
                val.push(target);
                art_rows.push(i);
                art_sign.push(if act - target >= 0.0 { 1.0 } else { -1.0 });
            }
        }
        let n_art = art_rows.len();
        let ncols = n + m + n_art;
        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        for i in 0..m {
            let row = &mut t[i * ncols..(i + 1) * ncols];
            for j in 0..n {
                row[j] = -prob.a[i * n + j];
            }
            row[n + i] = 1.0;
            basis[i] = n + i;
        }
        let mut lo = lo;
        let mut hi = hi;
        for (a_idx, (&i, &sigma)) in art_rows.iter().zip(&art_sign).enumerate() {
            let col = n + m + a_idx;
            let row = &mut t[i * ncols..(i + 1) * ncols];
            if sigma < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            row[col] = 1.0;
            basis[i] = col;
            lo.push(0.0);
            hi.push(f64::INFINITY);
            state.push(VarState::Basic);
            val.push(0.0);
        }
        let mut cost = prob.cost.clone();
        cost.resize(ncols, 0.0);
        let mut s = Simplex {
            prob,
            tol,
            ncols,
            n_art,
            t,
            d: vec![0.0; ncols],
            cost,
            lo,
            hi,
            val,
            basis,
            state,
            iterations: 0,
            since_refresh: 0,
            phase2_ready: false,
            pivot_nz: Vec::new(),
            pivot_row: Vec::new(),
        };
        s.refresh_basic_values();
        s
    }

    /// Fresh phase-1 tableau for the template's problem with new structural
    /// bounds.
    pub(crate) fn cold_from(template: &Simplex, struct_bounds: &[(f64, f64)]) -> Self {
        let (m, n) = (template.m(), template.n());
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for &(l, h) in struct_bounds {
            lo.push(l);
            hi.push(h);
        }
        lo.extend_from_slice(&template.lo[n..n + m]);
        hi.extend_from_slice(&template.hi[n..n + m]);
        Self::cold(template.prob.clone(), template.tol, lo, hi)
    }

    pub(crate) fn is_warm(&self) -> bool {
        self.phase2_ready
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    fn m(&self) -> usize {
        self.prob.m
    }

    fn n(&self) -> usize {
        self.prob.n
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m() + self.n()).max(1)
    }

    fn stall_limit(&self) -> usize {
        10 * (self.m() + self.n()).max(1)
    }

    /// Recomputes basic values from the nonbasic ones: `x_B = -T_N x_N`.
    fn refresh_basic_values(&mut self) {
        let nc = self.ncols;
        for r in 0..self.m() {
            let row = &self.t[r * nc..(r + 1) * nc];
            let mut s = 0.0;
            for (j, &tv) in row.iter().enumerate() {
                if tv != 0.0 && self.state[j] != VarState::Basic {
                    s -= tv * self.val[j];
                }
            }
            self.val[self.basis[r]] = s;
        }
        self.since_refresh = 0;
    }

    fn recompute_reduced_costs(&mut self, cost: &[f64]) {
        let nc = self.ncols;
        self.d.copy_from_slice(&cost[..nc]);
        for r in 0..self.m() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * nc..(r + 1) * nc];
                for (dj, &tv) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tv;
                }
            }
        }
        for r in 0..self.m() {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let m = self.m();
        let piv = self.t[r * nc + q];
        {
            let prow = &mut self.t[r * nc..(r + 1) * nc];
            let inv = 1.0 / piv;
            for v in prow.iter_mut() {
                *v *= inv;
            }
            prow[q] = 1.0;
        }
        self.pivot_nz.clear();
        self.pivot_row.clear();
        for (j, &v) in self.t[r * nc..(r + 1) * nc].iter().enumerate() {
            if v.abs() > 1e-14 {
                self.pivot_nz.push(j);
                self.pivot_row.push(v);
            }
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (&j, &pv) in self.pivot_nz.iter().zip(&self.pivot_row) {
                row[j] -= f * pv;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (&j, &pv) in self.pivot_nz.iter().zip(&self.pivot_row) {
                self.d[j] -= f * pv;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        // Caller fixes the leaving state; default to the nearest bound.
        let (l, h) = (self.lo[leaving], self.hi[leaving]);
        self.state[leaving] = if l == h {
            VarState::Fixed
        } else if l.is_finite() && (!h.is_finite() || (self.val[leaving] - l).abs() <= (h - self.val[leaving]).abs()) {
            VarState::Lower
        } else if h.is_finite() {
            VarState::Upper
        } else {
            VarState::Free
        };
        self.iterations += 1;
        self.since_refresh += 1;
    }

    fn set_leaving_to(&mut self, col: usize, at_lower: bool) {
        let (l, h) = (self.lo[col], self.hi[col]);
        if l == h {
            self.state[col] = VarState::Fixed;
            self.val[col] = l;
        } else if at_lower {
            self.state[col] = VarState::Lower;
            self.val[col] = l;
        } else {
            self.state[col] = VarState::Upper;
            self.val[col] = h;
        }
    }

    /// Primal simplex on the current cost vector `cost`.
    fn primal(&mut self, cost: &[f64]) -> Result<LpStatus> {
        self.recompute_reduced_costs(cost);
        let nc = self.ncols;
        let tp = self.tol.tol_pivot;
        let tf = self.tol.tol_feas;
        let cap = self.iteration_cap();
        let stall_limit = self.stall_limit();
        let mut stall = 0usize;
        let mut bland = false;
        let mut iters = 0usize;
        loop {
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_basic_values();
            }
            // Pricing.
            let mut q = usize::MAX;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..nc {
                let dj = self.d[j];
                let (gain, dj_dir) = match self.state[j] {
                    VarState::Lower if dj < -TOL_DUAL => (-dj, 1.0),
                    VarState::Upper if dj > TOL_DUAL => (dj, -1.0),
                    VarState::Free if dj.abs() > TOL_DUAL => (dj.abs(), if dj < 0.0 { 1.0 } else { -1.0 }),
                    _ => continue,
                };
                if bland {
                    q = j;
                    dir = dj_dir;
                    break;
                }
                if gain > best {
                    best = gain;
                    q = j;
                    dir = dj_dir;
                }
            }
            if q == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            iters += 1;
            if iters > cap {
                return Err(Error::NumericalFailure { iterations: iters });
            }
            // Ratio test.
            let own_range = self.hi[q] - self.lo[q];
            let mut leave = usize::MAX;
            let mut theta;
            if bland {
                theta = f64::INFINITY;
                for r in 0..self.m() {
                    let alpha = dir * self.t[r * nc + q];
                    let b = self.basis[r];
                    let ratio = if alpha > tp && self.lo[b].is_finite() {
                        ((self.val[b] - self.lo[b]).max(0.0)) / alpha
                    } else if alpha < -tp && self.hi[b].is_finite() {
                        ((self.hi[b] - self.val[b]).max(0.0)) / -alpha
                    } else {
                        continue;
                    };
                    if ratio < theta || (ratio == theta && leave != usize::MAX && b < self.basis[leave]) {
                        theta = ratio;
                        leave = r;
                    }
                }
            } else {
                let mut bound = f64::INFINITY;
                for r in 0..self.m() {
                    let alpha = dir * self.t[r * nc + q];
                    let b = self.basis[r];
                    let ratio = if alpha > tp && self.lo[b].is_finite() {
                        ((self.val[b] - self.lo[b]).max(0.0) + tf) / alpha
                    } else if alpha < -tp && self.hi[b].is_finite() {
                        ((self.hi[b] - self.val[b]).max(0.0) + tf) / -alpha
                    } else {
                        continue;
                    };
                    bound = bound.min(ratio);
                }
                theta = f64::INFINITY;
                let mut best_alpha = 0.0;
                for r in 0..self.m() {
                    let alpha = dir * self.t[r * nc + q];
                    let b = self.basis[r];
                    let ratio = if alpha > tp && self.lo[b].is_finite() {
                        ((self.val[b] - self.lo[b]).max(0.0)) / alpha
                    } else if alpha < -tp && self.hi[b].is_finite() {
                        ((self.hi[b] - self.val[b]).max(0.0)) / -alpha
                    } else {
                        continue;
                    };
                    if ratio <= bound && alpha.abs() > best_alpha {
                        best_alpha = alpha.abs();
                        theta = ratio;
                        leave = r;
                    }
                }
            }
            let flip = own_range.is_finite() && own_range <= theta;
            if !flip && leave == usize::MAX {
                return Ok(LpStatus::Unbounded);
            }
            let step = if flip { own_range } else { theta };
            let improvement = step * self.d[q].abs();
            if improvement > 1e-12 {
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }
            if step != 0.0 {
                for r in 0..self.m() {
                    let alpha = dir * self.t[r * nc + q];
                    if alpha != 0.0 {
                        let b = self.basis[r];
                        self.val[b] -= alpha * step;
                    }
                }
            }
            self.val[q] += dir * step;
            if flip {
                if dir > 0.0 {
                    self.state[q] = VarState::Upper;
                    self.val[q] = self.hi[q];
                } else {
                    self.state[q] = VarState::Lower;
                    self.val[q] = self.lo[q];
                }
                self.iterations += 1;
                continue;
            }
            let b = self.basis[leave];
            let alpha = dir * self.t[leave * nc + q];
            let entering_val = self.val[q];
            self.pivot(leave, q);
            self.set_leaving_to(b, alpha > 0.0);
            self.val[q] = entering_val;
        }
    }

    /// Dual simplex from a dual-feasible basis. Returns `Infeasible` when a
    /// primal-infeasible row admits no entering column. With `stall_exit`, a
    /// long run of degenerate pivots is reported as a numerical failure.
    fn dual(&mut self, stall_exit: bool) -> Result<LpStatus> {
        let nc = self.ncols;
        let tp = self.tol.tol_pivot;
        let tf = self.tol.tol_feas;
        let cap = self.iteration_cap();
        let stall_limit = DUAL_STALL_LIMIT.max(self.m());
        let mut stall = 0usize;
        let mut perturbed = false;
        let mut last_obj = self.objective_value();
        let mut iters = 0usize;
        loop {
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_basic_values();
            }
            let mut leave = usize::MAX;
            let mut worst = 0.0;
            let mut below = false;
            for r in 0..self.m() {
                let b = self.basis[r];
                let v = self.val[b];
                let scale = 1.0 + v.abs().min(1e6) * 1e-9;
                if v < self.lo[b] - tf * scale {
                    let infeas = self.lo[b] - v;
                    if infeas > worst {
                        worst = infeas;
                        leave = r;
                        below = true;
                    }
                } else if v > self.hi[b] + tf * scale {
                    let infeas = v - self.hi[b];
                    if infeas > worst {
                        worst = infeas;
                        leave = r;
                        below = false;
                    }
                }
            }
            if leave == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            iters += 1;
            if iters > cap {
                return Err(Error::NumericalFailure { iterations: iters });
            }
            let row = leave * nc;
            // x_b = -sum T[r][j] x_j; to increase x_b (below lower) we need
            // increasing j with T < 0 or decreasing j with T > 0.
            let sign = if below { 1.0 } else { -1.0 };
            let mut bound = f64::INFINITY;
            for j in 0..nc {
                let tv = self.t[row + j] * sign;
                let ok = match self.state[j] {
                    VarState::Lower => tv < -tp,
                    VarState::Upper => tv > tp,
                    VarState::Free => tv.abs() > tp,
                    _ => false,
                };
                if ok {
                    let ratio = (self.d[j].abs() + TOL_DUAL) / tv.abs();
                    bound = bound.min(ratio);
                }
            }
            if bound == f64::INFINITY {
                return Ok(LpStatus::Infeasible);
            }
            let mut q = usize::MAX;
            let mut best_t = 0.0;
            for j in 0..nc {
                let tv = self.t[row + j] * sign;
                let ok = match self.state[j] {
                    VarState::Lower => tv < -tp,
                    VarState::Upper => tv > tp,
                    VarState::Free => tv.abs() > tp,
                    _ => false,
                };
                if ok {
                    let ratio = self.d[j].abs() / tv.abs();
                    if ratio <= bound && tv.abs() > best_t {
                        best_t = tv.abs();
                        q = j;
                    }
                }
            }
            let b = self.basis[leave];
            let target = if below { self.lo[b] } else { self.hi[b] };
            let tq = self.t[row + q];
            let delta = (self.val[b] - target) / tq;
            for r in 0..self.m() {
                let tv = self.t[r * nc + q];
                if tv != 0.0 {
                    let bb = self.basis[r];
                    self.val[bb] -= tv * delta;
                }
            }
            let entering_val = self.val[q] + delta;
            self.pivot(leave, q);
            self.set_leaving_to(b, below);
            self.val[q] = entering_val;
            let obj = self.objective_value();
            if obj > last_obj + 1e-12 * (1.0 + last_obj.abs()) {
                last_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    if stall_exit || perturbed {
                        return Err(Error::NumericalFailure { iterations: iters });
                    }
                    self.perturb_reduced_costs();
                    perturbed = true;
                    stall = 0;
                }
            }
        }
    }

    /// Pushes nonbasic reduced costs away from zero in their dual-feasible
    /// direction to break dual degeneracy. The next primal pass recomputes
    /// them from the true costs.
    fn perturb_reduced_costs(&mut self) {
        for j in 0..self.ncols {
            let delta = 1e-7 * (1.0 + self.d[j].abs()) * (1.0 + ((j as u64 * 2_654_435_761) % 1000) as f64 / 1000.0);
            match self.state[j] {
                VarState::Lower => self.d[j] += delta,
                VarState::Upper => self.d[j] -= delta,
                _ => {}
            }
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        let mut worst = 0.0f64;
        for &b in &self.basis {
            let v = self.val[b];
            worst = worst.max(self.lo[b] - v).max(v - self.hi[b]);
        }
        worst
    }

    /// Full two-phase solve from the current (cold) tableau.
    pub(crate) fn solve(&mut self) -> Result<LpStatus> {
        if self.n_art > 0 {
            let mut phase1 = vec![0.0; self.ncols];
            for c in phase1.iter_mut().skip(self.n() + self.m()) {
                *c = 1.0;
            }
            let status = self.primal(&phase1)?;
            debug_assert_eq!(status, LpStatus::Optimal);
            self.refresh_basic_values();
            let infeas: f64 = (self.n() + self.m()..self.ncols).map(|j| self.val[j]).sum();
            if infeas > self.tol.tol_feas * (1.0 + self.n_art as f64).sqrt() {
                return Ok(LpStatus::Infeasible);
            }
            self.retire_artificials();
        }
        self.phase2_ready = true;
        self.finish_phase2()
    }

    fn finish_phase2(&mut self) -> Result<LpStatus> {
        let cost = self.cost.clone();
        for _ in 0..4 {
            let status = self.primal(&cost)?;
            if status != LpStatus::Optimal {
                return Ok(status);
            }
            self.refresh_basic_values();
            if self.max_primal_infeasibility() <= self.tol.tol_feas {
                return Ok(LpStatus::Optimal);
            }
            // Drift: restore primal feasibility from the dual side.
            self.reinvert()?;
            if self.dual(false)? == LpStatus::Infeasible {
                return Ok(LpStatus::Infeasible);
            }
        }
        Ok(LpStatus::Optimal)
    }

    /// Fixes artificials at zero, pivots basic ones out where possible and
    /// drops the artificial columns when none remains basic.
    fn retire_artificials(&mut self) {
        let (n, m, nc) = (self.n(), self.m(), self.ncols);
        for j in n + m..nc {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::Fixed;
                self.val[j] = 0.0;
            }
        }
        for r in 0..m {
            let b = self.basis[r];
            if b < n + m {
                continue;
            }
            let mut q = usize::MAX;
            let mut best = 1e-7;
            for j in 0..n + m {
                let tv = self.t[r * nc + j].abs();
                if self.state[j] != VarState::Basic && tv > best {
                    best = tv;
                    q = j;
                }
            }
            if q != usize::MAX {
                let entering_val = self.val[q];
                self.pivot(r, q);
                self.set_leaving_to(b, true);
                self.val[q] = entering_val;
            }
        }
        if self.basis.iter().all(|&b| b < n + m) {
            let new_nc = n + m;
            let mut t = vec![0.0; m * new_nc];
            for r in 0..m {
                t[r * new_nc..(r + 1) * new_nc].copy_from_slice(&self.t[r * nc..r * nc + new_nc]);
            }
            self.t = t;
            self.ncols = new_nc;
            self.n_art = 0;
            self.d.truncate(new_nc);
            self.cost.truncate(new_nc);
            self.lo.truncate(new_nc);
            self.hi.truncate(new_nc);
            self.val.truncate(new_nc);
            self.state.truncate(new_nc);
        }
        self.refresh_basic_values();
    }

    /// Rebuilds the tableau from the original matrix for the current basis.
    fn reinvert(&mut self) -> Result<()> {
        if self.n_art > 0 {
            self.refresh_basic_values();
            return Ok(());
        }
        let target = self.basis.clone();
        self.load_basis(&target)?;
        self.refresh_basic_values();
        let cost = self.cost.clone();
        self.recompute_reduced_costs(&cost);
        Ok(())
    }

    /// Sets the tableau to `B^{-1}[-A | I]` for the basis `target` (no
    /// artificial columns). States of nonbasic columns are left untouched.
    fn load_basis(&mut self, target: &[usize]) -> Result<()> {
        let (m, n) = (self.m(), self.n());
        let nc = n + m;
        debug_assert_eq!(self.ncols, nc);
        let mut t = vec![0.0; m * nc];
        for i in 0..m {
            for j in 0..n {
                t[i * nc + j] = -self.prob.a[i * n + j];
            }
            t[i * nc + n + i] = 1.0;
        }
        self.t = t;
        self.basis = (n..n + m).collect();
        let mut in_target = vec![false; nc];
        for &b in target {
            in_target[b] = true;
        }
        let saved_state = self.state.clone();
        let saved_iters = self.iterations;
        for &q in target.iter().filter(|&&q| q < n) {
            let mut r_best = usize::MAX;
            let mut best = 1e-9;
            for r in 0..m {
                let b = self.basis[r];
                if b >= n && !in_target[b] {
                    let tv = self.t[r * nc + q].abs();
                    if tv > best {
                        best = tv;
                        r_best = r;
                    }
                }
            }
            if r_best == usize::MAX {
                return Err(Error::NumericalFailure { iterations: self.iterations });
            }
            self.pivot(r_best, q);
        }
        self.iterations = saved_iters;
        self.state = saved_state;
        for &b in &self.basis {
            self.state[b] = VarState::Basic;
        }
        Ok(())
    }

    pub(crate) fn snapshot(&self) -> Option<BasisSnapshot> {
        if self.n_art > 0 || !self.phase2_ready {
            return None;
        }
        Some(BasisSnapshot {
            basis: self.basis.clone(),
            state: self.state.clone(),
        })
    }

    /// Rebuilds a phase-2 tableau from `snapshot`, then applies `bounds`
    /// (one entry per structural variable).
    pub(crate) fn from_snapshot(template: &Simplex, snapshot: &BasisSnapshot) -> Result<Self> {
        let (m, n) = (template.m(), template.n());
        let nc = n + m;
        let mut s = Simplex {
            prob: template.prob.clone(),
            tol: template.tol,
            ncols: nc,
            n_art: 0,
            t: Vec::new(),
            d: vec![0.0; nc],
            cost: template.cost[..nc].to_vec(),
            lo: template.lo[..nc].to_vec(),
            hi: template.hi[..nc].to_vec(),
            val: vec![0.0; nc],
            basis: Vec::new(),
            state: snapshot.state.clone(),
            iterations: 0,
            since_refresh: 0,
            phase2_ready: true,
            pivot_nz: Vec::new(),
            pivot_row: Vec::new(),
        };
        s.load_basis(&snapshot.basis)?;
        for j in 0..nc {
            s.val[j] = match s.state[j] {
                VarState::Lower | VarState::Fixed => s.lo[j],
                VarState::Upper => s.hi[j],
                VarState::Free => 0.0,
                VarState::Basic => 0.0,
            };
        }
        s.refresh_basic_values();
        let cost = s.cost.clone();
        s.recompute_reduced_costs(&cost);
        Ok(s)
    }

    /// Changes the bounds of structural variable `j`, keeping the tableau.
    pub(crate) fn set_var_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        if self.lo[j] == lo && self.hi[j] == hi {
            return;
        }
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.state[j] == VarState::Basic {
            return;
        }
        let old = self.val[j];
        let (state, new) = if lo == hi {
            (VarState::Fixed, lo)
        } else if lo.is_finite() && hi.is_finite() {
            if self.d[j] >= 0.0 {
                (VarState::Lower, lo)
            } else {
                (VarState::Upper, hi)
            }
        } else {
            initial_state(lo, hi)
        };
        self.state[j] = state;
        self.val[j] = new;
        let delta = new - old;
        if delta != 0.0 {
            let nc = self.ncols;
            for r in 0..self.m() {
                let tv = self.t[r * nc + j];
                if tv != 0.0 {
                    let b = self.basis[r];
                    self.val[b] -= tv * delta;
                }
            }
        }
    }

    /// Re-optimizes after bound changes: dual simplex then primal cleanup.
    /// Falls back to a cold solve when the warm path fails numerically.
    pub(crate) fn reoptimize(&mut self) -> Result<LpStatus> {
        if !self.phase2_ready || self.n_art > 0 {
            return self.resolve_cold();
        }
        let warm = (|| -> Result<LpStatus> {
            // Nonbasic columns must be dual feasible for the dual simplex.
            for j in 0..self.ncols {
                match self.state[j] {
                    VarState::Lower if self.d[j] < -TOL_DUAL && self.hi[j].is_finite() => {
                        self.move_nonbasic(j, self.hi[j], VarState::Upper)
                    }
                    VarState::Upper if self.d[j] > TOL_DUAL && self.lo[j].is_finite() => {
                        self.move_nonbasic(j, self.lo[j], VarState::Lower)
                    }
                    _ => {}
                }
            }
            if self.dual(true)? == LpStatus::Infeasible {
                return Ok(LpStatus::Infeasible);
            }
            self.finish_phase2()
        })();
        match warm {
            Ok(status) => Ok(status),
            Err(_) => self.resolve_cold(),
        }
    }

    fn move_nonbasic(&mut self, j: usize, value: f64, state: VarState) {
        let delta = value - self.val[j];
        self.val[j] = value;
        self.state[j] = state;
        let nc = self.ncols;
        for r in 0..self.m() {
            let tv = self.t[r * nc + j];
            if tv != 0.0 {
                let b = self.basis[r];
                self.val[b] -= tv * delta;
            }
        }
    }

    fn resolve_cold(&mut self) -> Result<LpStatus> {
        let nm = self.n() + self.m();
        let lo = self.lo[..nm].to_vec();
        let hi = self.hi[..nm].to_vec();
        let iters = self.iterations;
        *self = Self::cold(self.prob.clone(), self.tol, lo, hi);
        self.iterations = iters;
        self.solve()
    }

    pub(crate) fn primal_values(&self) -> Vec<f64> {
        self.val[..self.n()].to_vec()
    }

    pub(crate) fn objective_value(&self) -> f64 {
        self.prob
            .cost
            .iter()
            .zip(&self.val[..self.n()])
            .map(|(c, v)| c * v)
            .sum()
    }

    pub(crate) fn row_duals(&self) -> Vec<f64> {
        let n = self.n();
        (0..self.m())
            .map(|i| if self.state[n + i] == VarState::Basic { 0.0 } else { self.d[n + i] })
            .collect()
    }

    pub(crate) fn structural_reduced_costs(&self) -> Vec<f64> {
        (0..self.n())
            .map(|j| if self.state[j] == VarState::Basic { 0.0 } else { self.d[j] })
            .collect()
    }

    pub(crate) fn basic_columns(&self) -> Vec<usize> {
        let mut b = self.basis.clone();
        b.sort_unstable();
        b
    }

    pub(crate) fn tableau_bytes(&self) -> usize {
        self.t.len() * std::mem::size_of::<f64>()
    }
}
