//! Mixed 0-1 linear programs solved by LP-based branch and bound.
//!
//! Nodes are explored best-bound first; among nodes with equal bound the most
//! recently created one is taken, so the search dives naturally. Each node
//! reoptimizes from its parent's basis with the dual simplex. Recently
//! branched parents keep their tableau in a bounded cache so both children can
//! start without refactoring.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::rc::Rc;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpModel, LpStatus, RowSense, Tolerances};
use crate::simplex::{BasisSnapshot, Simplex};

const TABLEAU_CACHE_BYTES: usize = 256 << 20;

/// A linear model in which the listed columns must take values in {0, 1}.
#[derive(Debug, Clone)]
pub struct MipModel {
    base: LpModel,
    binaries: Vec<usize>,
}

impl MipModel {
    /// Wraps `base`, declaring `binaries` as 0-1 columns. Their bounds are
    /// clamped to `[0, 1]`.
    pub fn new(mut base: LpModel, mut binaries: Vec<usize>) -> Result<Self> {
        binaries.sort_unstable();
        binaries.dedup();
        for &j in &binaries {
            if j >= base.n_vars() {
                return Err(Error::Dimension {
                    expected: base.n_vars(),
                    got: j,
                    context: "binary column index".into(),
                });
            }
            let (lo, hi) = base.bounds()[j];
            base.set_bounds(j, lo.max(0.0), hi.min(1.0))?;
        }
        Ok(MipModel { base, binaries })
    }

    pub fn lp(&self) -> &LpModel {
        &self.base
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn n_vars(&self) -> usize {
        self.base.n_vars()
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.binaries.binary_search(&j).is_ok()
    }

    /// Bound, row and integrality check of `x`, in that order. Returns the
    /// first violation as [`Error::WarmStartInfeasible`]; bound and
    /// integrality violations report `row = n_rows + column`.
    pub fn check_feasible(&self, x: &[f64], tol: &Tolerances) -> Result<()> {
        let lp = &self.base;
        if x.len() != lp.n_vars() {
            return Err(Error::Dimension {
                expected: lp.n_vars(),
                got: x.len(),
                context: "candidate solution".into(),
            });
        }
        for (j, &(lo, hi)) in lp.bounds().iter().enumerate() {
            let v = (lo - x[j]).max(x[j] - hi).max(0.0);
            if !(v <= tol.tol_feas * (1.0 + x[j].abs())) {
                return Err(Error::WarmStartInfeasible {
                    row: lp.n_rows() + j,
                    name: format!("bounds of {}", lp.col_name(j)),
                    violation: v,
                });
            }
        }
        for (i, row) in lp.rows().iter().enumerate() {
            let v = row.violation(x);
            if !(v <= tol.tol_feas * (1.0 + row.rhs.abs())) {
                return Err(Error::WarmStartInfeasible {
                    row: i,
                    name: lp.row_name(i).to_string(),
                    violation: v,
                });
            }
        }
        for &j in &self.binaries {
            let v = (x[j] - x[j].round()).abs();
            if v > tol.tol_int {
                return Err(Error::WarmStartInfeasible {
                    row: lp.n_rows() + j,
                    name: format!("integrality of {}", lp.col_name(j)),
                    violation: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branching {
    /// Branch on the binary farthest from integrality, lowest index on ties.
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeOrder {
    BestFirst,
    /// Depth-first until the first incumbent, then best-first.
    DiveThenBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub time_limit_s: f64,
    pub node_limit: u64,
    /// Nodes whose bound is within `rel_gap * max(1, |incumbent|)` of the
    /// incumbent are pruned.
    pub rel_gap: f64,
    pub branching: Branching,
    pub node_order: NodeOrder,
    pub tol: Tolerances,
    /// Proven lower bound on the optimum; the search stops once the
    /// incumbent reaches it.
    #[serde(default)]
    pub objective_floor: Option<f64>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            time_limit_s: 600.0,
            node_limit: 10_000_000,
            rel_gap: 1e-6,
            branching: Branching::MostFractional,
            node_order: NodeOrder::DiveThenBest,
            tol: Tolerances::default(),
            objective_floor: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    /// Node limit reached with an incumbent.
    Feasible { gap: f64 },
    Infeasible,
    /// Time limit reached; `gap` is infinite when no incumbent exists.
    TimeLimit { gap: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MipStats {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub wall_s: f64,
    pub warm_start_accepted: bool,
    /// `(node count, objective)` each time the incumbent improved.
    pub incumbent_history: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Best integer-feasible point, empty when none was found.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub stats: MipStats,
}

impl MipSolution {
    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }

    pub fn gap(&self) -> f64 {
        if !self.has_solution() {
            return f64::INFINITY;
        }
        (self.objective - self.bound).max(0.0) / self.objective.abs().max(1.0)
    }
}

/// Fixing state of one binary at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Zero,
    One,
}

struct Node {
    seq: u64,
    parent: Option<u64>,
    bound: f64,
    fixes: Vec<Fix>,
    basis: Option<Rc<BasisSnapshot>>,
}

/// A node with its priority key; larger keys pop first.
struct Queued(Node, f64);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Ties go to the newest node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.1.total_cmp(&other.1).then(self.0.seq.cmp(&other.0.seq))
    }
}

/// Parent tableaux kept for their pending children.
struct TableauCache {
    entries: HashMap<u64, (Simplex, u8)>,
    order: VecDeque<u64>,
    bytes: usize,
}

impl TableauCache {
    fn new() -> Self {
        TableauCache {
            entries: HashMap::new(),
            order: VecDeque::new(),
            bytes: 0,
        }
    }

    fn insert(&mut self, seq: u64, simplex: Simplex, children: u8) {
        let size = simplex.tableau_bytes();
        if size > TABLEAU_CACHE_BYTES {
            return;
        }
        while self.bytes + size > TABLEAU_CACHE_BYTES {
            let Some(old) = self.order.pop_front() else { break };
            if let Some((s, _)) = self.entries.remove(&old) {
                self.bytes -= s.tableau_bytes();
            }
        }
        self.bytes += size;
        self.entries.insert(seq, (simplex, children));
        self.order.push_back(seq);
    }

    /// Takes (last child) or clones the cached tableau of `seq`.
    fn take(&mut self, seq: u64) -> Option<Simplex> {
        let (simplex, left) = self.entries.get_mut(&seq)?;
        if *left > 1 {
            *left -= 1;
            return Some(simplex.clone());
        }
        let (simplex, _) = self.entries.remove(&seq)?;
        self.bytes -= simplex.tableau_bytes();
        self.order.retain(|&s| s != seq);
        Some(simplex)
    }

    /// Drops one pending child of `seq` without using the tableau.
    fn release(&mut self, seq: u64) {
        if let Some((_, left)) = self.entries.get_mut(&seq) {
            if *left > 1 {
                *left -= 1;
            } else if let Some((s, _)) = self.entries.remove(&seq) {
                self.bytes -= s.tableau_bytes();
                self.order.retain(|&x| x != seq);
            }
        }
    }
}

/// Groups of binaries constrained by `sum = 1` equality rows.
fn find_gub_sets(model: &MipModel) -> Vec<Vec<usize>> {
    let mut sets = Vec::new();
    for row in model.base.rows() {
        if row.sense != RowSense::Eq || (row.rhs - 1.0).abs() > 1e-12 {
            continue;
        }
        let mut members = Vec::new();
        let mut ok = true;
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match model.binaries.binary_search(&j) {
                Ok(p) if a == 1.0 => members.push(p),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && members.len() >= 2 {
            sets.push(members);
        }
    }
    sets
}

struct Search<'a> {
    model: &'a MipModel,
    cfg: BnbConfig,
    template: Simplex,
    /// For each binary position, the GUB set it belongs to (first match).
    gub_of: Vec<Option<usize>>,
    gub_sets: Vec<Vec<usize>>,
    incumbent: Option<(Vec<f64>, f64)>,
    stats: MipStats,
    cache: TableauCache,
    next_seq: u64,
}

impl<'a> Search<'a> {
    fn floor_reached(&self) -> bool {
        match (&self.incumbent, self.cfg.objective_floor) {
            (Some((_, obj)), Some(floor)) => *obj <= floor + self.cfg.rel_gap * obj.abs().max(1.0),
            _ => false,
        }
    }

    fn prune_level(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => obj - self.cfg.rel_gap * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn node_simplex(&mut self, node: &Node) -> Result<Simplex> {
        if let Some(p) = node.parent {
            if let Some(s) = self.cache.take(p) {
                return Ok(s);
            }
        }
        if let Some(snap) = &node.basis {
            if let Ok(s) = Simplex::from_snapshot(&self.template, snap) {
                return Ok(s);
            }
        }
        Ok(Simplex::cold_from(&self.template, &self.node_bounds(&node.fixes)))
    }

    fn node_bounds(&self, fixes: &[Fix]) -> Vec<(f64, f64)> {
        let mut bounds = self.model.base.bounds().to_vec();
        for (p, &j) in self.model.binaries.iter().enumerate() {
            bounds[j] = fix_bounds(fixes[p]);
        }
        bounds
    }

    fn solve_node(&mut self, node: &Node) -> Result<(Simplex, LpStatus)> {
        let mut spx = self.node_simplex(node)?;
        for (p, &j) in self.model.binaries.iter().enumerate() {
            let (lo, hi) = fix_bounds(node.fixes[p]);
            spx.set_var_bounds(j, lo, hi);
        }
        let before = spx.iterations();
        let status = if spx.is_warm() { spx.reoptimize()? } else { spx.solve()? };
        self.stats.lp_iterations += spx.iterations().saturating_sub(before) as u64;
        Ok((spx, status))
    }

    fn try_incumbent(&mut self, x: Vec<f64>, obj: f64) {
        if self.model.check_feasible(&x, &self.cfg.tol).is_err() {
            debug!("rejected numerically infeasible integer point (obj {obj})");
            return;
        }
        let better = match &self.incumbent {
            Some((_, best)) => obj < *best - 1e-12,
            None => true,
        };
        if better {
            debug!("incumbent {obj} at node {}", self.stats.nodes);
            self.stats.incumbent_history.push((self.stats.nodes, obj));
            self.incumbent = Some((x, obj));
        }
    }

    /// Fixes binaries at their rounded values and re-solves, giving an exactly
    /// integral point with consistent continuous part.
    fn polish(&mut self, spx: &Simplex, x: &[f64]) -> Result<()> {
        let mut fixed = spx.clone();
        let mut xr = x.to_vec();
        for &j in &self.model.binaries {
            let r = x[j].round().clamp(0.0, 1.0);
            xr[j] = r;
            fixed.set_var_bounds(j, r, r);
        }
        let status = fixed.reoptimize()?;
        if status == LpStatus::Optimal {
            let mut xp = fixed.primal_values();
            for &j in &self.model.binaries {
                xp[j] = xr[j];
            }
            let obj = self.model.base.objective_value(&xp);
            self.try_incumbent(xp, obj);
        } else {
            let obj = self.model.base.objective_value(&xr);
            self.try_incumbent(xr, obj);
        }
        Ok(())
    }

    fn choose_branch(&self, x: &[f64], fixes: &[Fix]) -> Option<usize> {
        let tol = self.cfg.tol.tol_int;
        let mut best: Option<(usize, f64)> = None;
        for (p, &j) in self.model.binaries.iter().enumerate() {
            if fixes[p] != Fix::Free {
                continue;
            }
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac > tol && best.is_none_or(|(_, f)| frac > f) {
                best = Some((p, frac));
            }
        }
        best.map(|(p, _)| p)
    }

    fn run(&mut self, root_fixes: Vec<Fix>) -> Result<MipStatus> {
        let start = Instant::now();
        let mut heap = BinaryHeap::new();
        let mut diving = self.cfg.node_order == NodeOrder::DiveThenBest && self.incumbent.is_none();
        let key = |node: &Node, diving: bool| if diving { node.seq as f64 } else { -node.bound };
        heap.push(Queued(
            Node {
                seq: 0,
                parent: None,
                bound: f64::NEG_INFINITY,
                fixes: root_fixes,
                basis: None,
            },
            0.0,
        ));
        self.next_seq = 1;
        while let Some(Queued(node, _)) = heap.pop() {
            if self.floor_reached() {
                break;
            }
            if diving && self.incumbent.is_some() {
                diving = false;
                heap = heap
                    .into_iter()
                    .map(|q| {
                        let k = key(&q.0, false);
                        Queued(q.0, k)
                    })
                    .collect();
            }
            if node.bound >= self.prune_level() {
                if let Some(p) = node.parent {
                    self.cache.release(p);
                }
                continue;
            }
            if start.elapsed().as_secs_f64() > self.cfg.time_limit_s {
                heap.push(Queued(node, 0.0));
                self.stats.wall_s = start.elapsed().as_secs_f64();
                return Ok(self.limit_status(&heap, true));
            }
            if self.stats.nodes >= self.cfg.node_limit {
                heap.push(Queued(node, 0.0));
                self.stats.wall_s = start.elapsed().as_secs_f64();
                return Ok(self.limit_status(&heap, false));
            }
            self.stats.nodes += 1;
            let (spx, status) = self.solve_node(&node)?;
            match status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Err(Error::Unbounded),
                LpStatus::Optimal => {}
            }
            let bound = spx.objective_value().max(node.bound);
            if bound >= self.prune_level() {
                continue;
            }
            let x = spx.primal_values();
            let Some(p) = self.choose_branch(&x, &node.fixes) else {
                self.polish(&spx, &x)?;
                continue;
            };
            let children = self.children(&node.fixes, p, &x);
            let snapshot = spx.snapshot().map(Rc::new);
            let seq = node.seq;
            self.cache.insert(seq, spx, children.len() as u8);
            for fixes in children {
                let child = Node {
                    seq: self.next_seq,
                    parent: Some(seq),
                    bound,
                    fixes,
                    basis: snapshot.clone(),
                };
                self.next_seq += 1;
                let k = key(&child, diving);
                heap.push(Queued(child, k));
            }
        }
        self.stats.wall_s = start.elapsed().as_secs_f64();
        Ok(if self.incumbent.is_some() {
            MipStatus::Optimal
        } else {
            MipStatus::Infeasible
        })
    }

    /// Child fixings, the preferred child last so it is explored first.
    fn children(&self, fixes: &[Fix], p: usize, x: &[f64]) -> Vec<Vec<Fix>> {
        if let Some(g) = self.gub_of[p] {
            let set = &self.gub_sets[g];
            let free: Vec<usize> = set.iter().copied().filter(|&q| fixes[q] == Fix::Free).collect();
            if free.len() >= 2 {
                // Member with the largest LP value, lowest index on ties.
                let mut pick = free[0];
                for &q in &free[1..] {
                    if x[self.model.binaries[q]] > x[self.model.binaries[pick]] {
                        pick = q;
                    }
                }
                let mut off = fixes.to_vec();
                off[pick] = Fix::Zero;
                let mut on = fixes.to_vec();
                for &q in &free {
                    on[q] = if q == pick { Fix::One } else { Fix::Zero };
                }
                return vec![off, on];
            }
        }
        let mut zero = fixes.to_vec();
        zero[p] = Fix::Zero;
        let mut one = fixes.to_vec();
        one[p] = Fix::One;
        if x[self.model.binaries[p]] >= 0.5 {
            vec![zero, one]
        } else {
            vec![one, zero]
        }
    }

    fn limit_status(&self, heap: &BinaryHeap<Queued>, time: bool) -> MipStatus {
        let open = heap.iter().map(|q| q.0.bound).fold(f64::INFINITY, f64::min);
        let gap = match &self.incumbent {
            Some((_, obj)) => (obj - open.min(*obj)).max(0.0) / obj.abs().max(1.0),
            None => f64::INFINITY,
        };
        if time || self.incumbent.is_none() {
            MipStatus::TimeLimit { gap }
        } else {
            MipStatus::Feasible { gap }
        }
    }
}

fn fix_bounds(f: Fix) -> (f64, f64) {
    match f {
        Fix::Free => (0.0, 1.0),
        Fix::Zero => (0.0, 0.0),
        Fix::One => (1.0, 1.0),
    }
}

/// Solves `model` by branch and bound. A `warm_start` point is validated and
/// used as the initial incumbent; an infeasible one is rejected with
/// [`Error::WarmStartInfeasible`].
pub fn solve_mip(model: &MipModel, cfg: &BnbConfig, warm_start: Option<&[f64]>) -> Result<MipSolution> {
    cfg.tol.validate()?;
    if !(cfg.rel_gap >= 0.0) || !(cfg.time_limit_s > 0.0) {
        return Err(Error::InvalidInput("rel_gap must be >= 0 and time_limit_s > 0".into()));
    }
    let template = Simplex::new(&model.base, cfg.tol)?;
    let gub_sets = find_gub_sets(model);
    let mut gub_of = vec![None; model.binaries.len()];
    for (g, set) in gub_sets.iter().enumerate() {
        for &p in set {
            gub_of[p].get_or_insert(g);
        }
    }
    let mut search = Search {
        model,
        cfg: *cfg,
        template,
        gub_of,
        gub_sets,
        incumbent: None,
        stats: MipStats::default(),
        cache: TableauCache::new(),
        next_seq: 0,
    };
    if let Some(ws) = warm_start {
        model.check_feasible(ws, &cfg.tol)?;
        let mut x = ws.to_vec();
        for &j in &model.binaries {
            x[j] = x[j].round();
        }
        let obj = model.base.objective_value(&x);
        search.stats.warm_start_accepted = true;
        search.stats.incumbent_history.push((0, obj));
        search.incumbent = Some((x, obj));
    }
    let status = search.run(vec![Fix::Free; model.binaries.len()])?;
    let (x, objective) = match search.incumbent.take() {
        Some((x, obj)) => (x, obj),
        None => (Vec::new(), f64::INFINITY),
    };
    let bound = match status {
        MipStatus::Optimal => objective,
        MipStatus::Infeasible => f64::INFINITY,
        MipStatus::Feasible { gap } | MipStatus::TimeLimit { gap } => {
            if gap.is_finite() {
                objective - gap * objective.abs().max(1.0)
            } else {
                f64::NEG_INFINITY
            }
        }
    };
    if matches!(status, MipStatus::TimeLimit { .. }) {
        warn!("branch and bound hit the time limit after {} nodes", search.stats.nodes);
    }
    Ok(MipSolution {
        status,
        x,
        objective,
        bound,
        stats: search.stats,
    })
}

fn lp_name(raw: &str) -> String {
    const EXTRA: &str = "!\"#$%&()/,.;?@_`'{}|~";
    let mut s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || EXTRA.contains(c) { c } else { '_' })
        .collect();
    let first = s.chars().next();
    if first.is_none_or(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E') {
        s.insert(0, '_');
    }
    s
}

fn unique_names(raw: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    raw.iter()
        .map(|r| {
            let base = lp_name(r);
            let mut name = base.clone();
            let mut k = 1;
            while !seen.insert(name.clone()) {
                name = format!("{base}_{k}");
                k += 1;
            }
            name
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, prefix: &str, terms: &[(f64, &str)]) {
    let mut line = String::from(prefix);
    for (a, name) in terms {
        let term = if *a < 0.0 {
            format!(" - {} {}", fmt_num(-a), name)
        } else {
            format!(" + {} {}", fmt_num(*a), name)
        };
        if line.len() + term.len() > 250 {
            out.push_str(&line);
            out.push('\n');
            line = String::from("   ");
        }
        line.push_str(&term);
    }
    out.push_str(&line);
}

/// Serializes `model` in CPLEX LP format.
pub fn export_lp_file(model: &MipModel) -> Result<String> {
    let lp = &model.base;
    if lp.n_vars() == 0 {
        return Err(Error::InvalidModel("model has no variables".into()));
    }
    for (i, row) in lp.rows().iter().enumerate() {
        if row.coeffs.iter().all(|&a| a == 0.0) {
            return Err(Error::EmptyRow { row: i });
        }
    }
    let cols = unique_names(lp.col_names());
    let rows = unique_names(lp.row_names());
    let mut out = String::from("\\ stabclust model export\nMinimize\n");
    let mut obj: Vec<(f64, &str)> = lp
        .objective()
        .iter()
        .zip(&cols)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, n)| (*c, n.as_str()))
        .collect();
    if obj.is_empty() {
        obj.push((0.0, cols[0].as_str()));
    }
    write_terms(&mut out, " obj:", &obj);
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows().iter().enumerate() {
        let terms: Vec<(f64, &str)> = row
            .coeffs
            .iter()
            .zip(&cols)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, n)| (*a, n.as_str()))
            .collect();
        write_terms(&mut out, &format!(" {}:", rows[i]), &terms);
        let op = match row.sense {
            RowSense::Ge => ">=",
            RowSense::Le => "<=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, &(lo, hi)) in lp.bounds().iter().enumerate() {
        let name = &cols[j];
        let _ = if lo == hi {
            writeln!(out, " {name} = {}", fmt_num(lo))
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            writeln!(out, " {name} free")
        } else if hi == f64::INFINITY {
            writeln!(out, " {name} >= {}", fmt_num(lo))
        } else {
            writeln!(out, " {} <= {name} <= {}", fmt_num(lo), fmt_num(hi))
        };
    }
    if !model.binaries.is_empty() {
        out.push_str("Binaries\n");
        for &j in &model.binaries {
            let _ = writeln!(out, " {}", cols[j]);
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// A big-M coefficient in a model, relaxed when `gate` takes `relaxed_when`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMEntry {
    pub row: usize,
    pub label: String,
    pub value: f64,
    pub gate: usize,
    pub relaxed_when: f64,
}

/// A relaxed big-M row that is (nearly) tight at the solution, meaning the
/// constant may be cutting off better points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMWarning {
    pub row: usize,
    pub row_name: String,
    pub label: String,
    pub value: f64,
    pub slack: f64,
}

/// Flags registry rows whose gate is in the relaxed state and whose slack is
/// at most `1e-6 * M`.
pub fn validate_big_m(model: &MipModel, x: &[f64], registry: &[BigMEntry]) -> Vec<BigMWarning> {
    let lp = &model.base;
    let mut warnings = Vec::new();
    for e in registry {
        if e.row >= lp.n_rows() || e.gate >= x.len() {
            continue;
        }
        if (x[e.gate] - e.relaxed_when).abs() > 0.5 {
            continue;
        }
        let slack = lp.row(e.row).slack(x);
        if slack <= 1e-6 * e.value.abs() {
            warn!(
                "big-M {} = {} is binding in row {} (slack {slack:.3e})",
                e.label,
                e.value,
                lp.row_name(e.row)
            );
            warnings.push(BigMWarning {
                row: e.row,
                row_name: lp.row_name(e.row).to_string(),
                label: e.label.clone(),
                value: e.value,
                slack,
            });
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> MipModel {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut lp = LpModel::new(3);
        lp.set_objective(vec![-5.0, -4.0, -3.0]).unwrap();
        lp.add_row(vec![2.0, 3.0, 1.0], RowSense::Le, 5.0).unwrap();
        lp.add_row(vec![4.0, 1.0, 2.0], RowSense::Le, 11.0).unwrap();
        lp.add_row(vec![3.0, 4.0, 2.0], RowSense::Le, 8.0).unwrap();
        MipModel::new(lp, vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn single_binary() {
        let mut lp = LpModel::new(1);
        lp.set_objective(vec![-1.0]).unwrap();
        let mip = MipModel::new(lp, vec![0]).unwrap();
        let sol = solve_mip(&mip, &BnbConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.x, vec![1.0]);
        assert_eq!(sol.objective, -1.0);
    }

    #[test]
    fn small_knapsack() {
        let sol = solve_mip(&knapsack(), &BnbConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        // a = b = 1 uses 5 <= 5, 5 <= 11, 7 <= 8; all three exceed row 1.
        assert!((sol.objective + 9.0).abs() < 1e-9);
        assert_eq!(sol.x, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_mip() {
        let mut lp = LpModel::new(2);
        lp.add_row(vec![1.0, 1.0], RowSense::Eq, 1.5).unwrap();
        let mip = MipModel::new(lp, vec![0, 1]).unwrap();
        let sol = solve_mip(&mip, &BnbConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
        assert!(!sol.has_solution());
    }

    #[test]
    fn warm_start_checked() {
        let mip = knapsack();
        let err = solve_mip(&mip, &BnbConfig::default(), Some(&[1.0, 1.0, 1.0])).unwrap_err();
        match err {
            Error::WarmStartInfeasible { row, .. } => assert_eq!(row, 0),
            e => panic!("unexpected {e:?}"),
        }
        let sol = solve_mip(&mip, &BnbConfig::default(), Some(&[0.0, 1.0, 1.0])).unwrap();
        assert!(sol.stats.warm_start_accepted);
        assert_eq!(sol.stats.incumbent_history[0], (0, -7.0));
        assert!((sol.objective + 9.0).abs() < 1e-9);
    }

    #[test]
    fn objective_floor_stops_search() {
        let mip = knapsack();
        let cfg = BnbConfig {
            objective_floor: Some(-9.0),
            ..BnbConfig::default()
        };
        let sol = solve_mip(&mip, &cfg, Some(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.stats.nodes, 0);
        // A floor below the optimum leaves the search unchanged.
        let cfg = BnbConfig {
            objective_floor: Some(-12.0),
            ..BnbConfig::default()
        };
        let sol = solve_mip(&mip, &cfg, Some(&[0.0, 1.0, 1.0])).unwrap();
        assert!((sol.objective + 9.0).abs() < 1e-9);
        assert!(sol.stats.nodes > 0);
    }

    #[test]
    fn gub_rows_detected() {
        let mut lp = LpModel::new(4);
        lp.set_objective(vec![3.0, 1.0, 2.0, 0.5]).unwrap();
        lp.add_row(vec![1.0, 1.0, 1.0, 0.0], RowSense::Eq, 1.0).unwrap();
        lp.add_row(vec![0.0, 1.0, 0.0, 1.0], RowSense::Ge, 1.0).unwrap();
        let mip = MipModel::new(lp, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(find_gub_sets(&mip), vec![vec![0, 1, 2]]);
        let sol = solve_mip(&mip, &BnbConfig::default(), None).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_export_minimal() {
        let mut lp = LpModel::new(1);
        lp.set_objective(vec![-1.0]).unwrap();
        let mip = MipModel::new(lp, vec![0]).unwrap();
        let text = export_lp_file(&mip).unwrap();
        assert!(text.contains("obj: - 1.0 x0"));
        assert!(text.contains("0.0 <= x0 <= 1.0"));
        assert!(text.contains("Binaries\n x0\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn lp_export_rejects_empty() {
        let mip = MipModel::new(LpModel::new(0), vec![]).unwrap();
        assert!(export_lp_file(&mip).is_err());
    }

    #[test]
    fn names_sanitized() {
        assert_eq!(lp_name("x[1,2]"), "x_1,2_");
        assert_eq!(lp_name("e1"), "_e1");
        assert_eq!(lp_name("3a"), "_3a");
    }

    #[test]
    fn big_m_binding_flagged() {
        // y <= 10 z, relaxed when z = 1.
        let mut lp = LpModel::new(2);
        lp.add_row(vec![1.0, -10.0], RowSense::Le, 0.0).unwrap();
        let mip = MipModel::new(lp, vec![1]).unwrap();
        let reg = [BigMEntry {
            row: 0,
            label: "M".into(),
            value: 10.0,
            gate: 1,
            relaxed_when: 1.0,
        }];
        assert_eq!(validate_big_m(&mip, &[10.0, 1.0], &reg).len(), 1);
        assert!(validate_big_m(&mip, &[3.0, 1.0], &reg).is_empty());
        assert!(validate_big_m(&mip, &[0.0, 0.0], &reg).is_empty());
    }
}
