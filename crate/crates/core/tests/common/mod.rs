//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use stabclust::{solve_lp, LpModel, LpStatus, MipModel, RowSense, Tolerances};

/// A row `(coefficients, sense code, rhs)`; sense 0 is `>=`, 1 is `<=`,
/// anything else `=`.
pub type RawRow = (Vec<f64>, u8, f64);

/// Solves the square system `m x = r` by Gaussian elimination with partial
/// pivoting; `None` when singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-9 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = m[i][c] / m[c][c];
                for k in c..n {
                    m[i][k] -= f * m[c][k];
                }
                r[i] -= f * r[c];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// Minimum of `c'x` over `{G x >= h}` by checking every basic solution.
pub fn vertex_min(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = g.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let sys: Vec<Vec<f64>> = idx.iter().map(|&i| g[i].clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
        if let Some(x) = solve_square(sys, rhs) {
            let feasible = g
                .iter()
                .zip(h)
                .all(|(row, &b)| row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() >= b - 1e-7);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// LP over the box `[-5, 5]^n` plus `rows`, and the same region as `G x >= h`.
pub fn boxed_lp(c: &[f64], rows: &[RawRow]) -> (LpModel, Vec<Vec<f64>>, Vec<f64>) {
    let n = c.len();
    let mut model = LpModel::new(n);
    model.set_objective(c.to_vec()).unwrap();
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..n {
        model.set_bounds(j, -5.0, 5.0).unwrap();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        g.push(e.clone());
        h.push(-5.0);
        e[j] = -1.0;
        g.push(e);
        h.push(-5.0);
    }
    for (a, s, b) in rows {
        if a.iter().all(|v| v.abs() < 1e-3) {
            continue;
        }
        let sense = match s {
            0 => RowSense::Ge,
            1 => RowSense::Le,
            _ => RowSense::Eq,
        };
        model.add_row(a.clone(), sense, *b).unwrap();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        match sense {
            RowSense::Ge => {
                g.push(a.clone());
                h.push(*b);
            }
            RowSense::Le => {
                g.push(neg);
                h.push(-b);
            }
            RowSense::Eq => {
                g.push(a.clone());
                h.push(*b);
                g.push(neg);
                h.push(-b);
            }
        }
    }
    (model, g, h)
}

/// MIP with `nb` leading binaries and `nc` continuous variables in `[-4, 4]`.
pub fn small_mip(nb: usize, nc: usize, c: Vec<f64>, rows: Vec<RawRow>) -> MipModel {
    let n = nb + nc;
    let mut lp = LpModel::new(n);
    lp.set_objective(c).unwrap();
    for j in nb..n {
        lp.set_bounds(j, -4.0, 4.0).unwrap();
    }
    for (a, s, b) in rows {
        if a.iter().all(|v| v.abs() < 1e-3) {
            continue;
        }
        let sense = if s == 0 { RowSense::Ge } else { RowSense::Le };
        lp.add_row(a, sense, b).unwrap();
    }
    MipModel::new(lp, (0..nb).collect()).unwrap()
}

/// Optimum over every fixing of the binaries.
pub fn exhaustive(model: &MipModel) -> Option<f64> {
    let bins = model.binaries();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut lp = model.lp().clone();
        for (p, &j) in bins.iter().enumerate() {
            let v = ((mask >> p) & 1) as f64;
            lp.set_bounds(j, v, v).unwrap();
        }
        let sol = solve_lp(&lp, &Tolerances::default()).unwrap();
        if sol.status == LpStatus::Optimal {
            best = Some(best.map_or(sol.objective, |b: f64| b.min(sol.objective)));
        }
    }
    best
}
