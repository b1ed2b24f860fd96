//! Constructive incumbents for the single-cluster models: candidate cost
//! vectors are certified on every member by a forward solve and its duals.

use crate::lp::{solve_lp, LpModel, LpStatus, RowSense, Tolerances};
use crate::model::{Certificate, ClusterSolution, CostVector, Dataset, Dmp, NormKind, Provenance};

const SUPPORT_TOL: f64 = 1e-12;
const INDEPENDENCE_TOL: f64 = 1e-8;
const FACE_TILT: f64 = 1e-3;

/// Greedily picks `n` linearly independent rows from `order`.
fn independent_rows(dmp: &Dmp, order: impl IntoIterator<Item = usize>) -> Option<Vec<usize>> {
    let n = dmp.n();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut picked = Vec::with_capacity(n);
    for i in order {
        if picked.contains(&i) {
            continue;
        }
        let mut r = dmp.a[i].clone();
        for q in &basis {
            let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            for (rv, qv) in r.iter_mut().zip(q) {
                *rv -= dot * qv;
            }
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > INDEPENDENCE_TOL {
            basis.push(r.into_iter().map(|v| v / norm).collect());
            picked.push(i);
            if picked.len() == n {
                return Some(picked);
            }
        }
    }
    None
}

fn tight_rows(dmp: &Dmp, x: &[f64], tol: &Tolerances) -> Vec<usize> {
    (0..dmp.m())
        .filter(|&i| dmp.activity(i, x) - dmp.b[i] <= tol.tol_feas * (1.0 + dmp.b[i].abs()))
        .collect()
}

/// Vertex certificate for `c`: the forward-solve optimum with its duals as
/// multipliers. With `alpha`, every selected multiplier must reach it.
pub(crate) fn certify(dmp: &Dmp, c: &[f64], alpha: Option<f64>, m2: f64, tol: &Tolerances) -> Option<Certificate> {
    let sol = solve_lp(&dmp.to_lp(c).ok()?, tol).ok()?;
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let mut lambda: Vec<f64> = sol.duals.iter().map(|&y| y.max(0.0)).collect();
    for y in lambda.iter_mut() {
        if *y <= SUPPORT_TOL {
            *y = 0.0;
        }
    }
    let support: Vec<usize> = (0..dmp.m()).filter(|&i| lambda[i] > 0.0).collect();
    let active = independent_rows(dmp, support.iter().copied().chain(tight_rows(dmp, &sol.x, tol)))?;
    if support.iter().any(|i| !active.contains(i)) || lambda.iter().any(|&y| y > m2) {
        return None;
    }
    if let Some(a) = alpha {
        if active.iter().any(|&i| lambda[i] < a) {
            return None;
        }
    }
    Some(Certificate {
        x: sol.x,
        lambda,
        active,
    })
}

/// Normalized sum of `n` independent rows active at the optimum of `c0`;
/// that vertex is the unique optimum of the result.
fn cone_center(dmp: &Dmp, c0: &[f64], tol: &Tolerances) -> Option<Vec<f64>> {
    let sol = solve_lp(&dmp.to_lp(c0).ok()?, tol).ok()?;
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let n = dmp.n();
    let nonbasic = (0..dmp.m()).filter(|i| !sol.basis.contains(&(n + i)));
    let rows = independent_rows(dmp, nonbasic.chain(tight_rows(dmp, &sol.x, tol)))?;
    let mut c = vec![0.0; n];
    for &i in &rows {
        for (cj, aj) in c.iter_mut().zip(&dmp.a[i]) {
            *cj += aj;
        }
    }
    CostVector::normalized(c).ok().map(CostVector::into_inner)
}

/// Point of the region closest to `x_hat` in the max norm.
fn projection(dmp: &Dmp, x_hat: &[f64], tol: &Tolerances) -> Option<Vec<f64>> {
    let n = dmp.n();
    let mut lp = LpModel::new(n);
    let s = lp.add_var("s", 0.0, f64::INFINITY, 1.0);
    for i in 0..dmp.m() {
        lp.add_row(
            dmp.a[i].iter().copied().chain(std::iter::once(0.0)).collect(),
            RowSense::Ge,
            dmp.b[i],
        )
        .ok()?;
    }
    for j in 0..n {
        lp.add_sparse_row(format!("up{j}"), &[(j, 1.0), (s, -1.0)], RowSense::Le, x_hat[j]).ok()?;
        lp.add_sparse_row(format!("dn{j}"), &[(j, 1.0), (s, 1.0)], RowSense::Ge, x_hat[j]).ok()?;
    }
    let sol = solve_lp(&lp, tol).ok()?;
    (sol.status == LpStatus::Optimal).then(|| sol.x[..n].to_vec())
}

/// Cost vectors whose unique optimum is a vertex of the face nearest to
/// `x_hat`, plus the cone centers reached from the coordinate directions.
pub(crate) fn observation_candidates(dmp: &Dmp, x_hat: &[f64], tol: &Tolerances) -> Vec<Vec<f64>> {
    let n = dmp.n();
    let mut starts = Vec::new();
    if let Some(p) = projection(dmp, x_hat, tol) {
        let tight = tight_rows(dmp, &p, tol);
        if !tight.is_empty() {
            let mut c = vec![0.0; n];
            for &i in &tight {
                for (cj, aj) in c.iter_mut().zip(&dmp.a[i]) {
                    *cj += aj;
                }
            }
            // Small tilts select different vertices of the face through `p`.
            let scale = FACE_TILT * c.iter().map(|v| v.abs()).sum::<f64>();
            for j in 0..n {
                for sign in [1.0, -1.0] {
                    let mut tilted = c.clone();
                    tilted[j] += sign * scale;
                    starts.push(tilted);
                }
            }
            starts.push(c);
        }
    }
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; n];
            c[j] = sign;
            starts.push(c);
        }
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c0 in starts {
        if c0.iter().all(|&v| v == 0.0) {
            continue;
        }
        if let Some(c) = cone_center(dmp, &c0, tol) {
            if !out.iter().any(|o| o.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12)) {
                out.push(c);
            }
        }
    }
    out
}

/// Best single-cluster solution over candidate cost vectors built from every
/// member, or `None` when no candidate certifies all members.
pub(crate) fn seed_cluster(
    sub: &Dataset,
    alpha: Option<f64>,
    m2: f64,
    norm: NormKind,
    tol: &Tolerances,
) -> Option<ClusterSolution> {
    let per_member: Vec<Vec<Vec<f64>>> = sub
        .items
        .iter()
        .map(|it| observation_candidates(&it.dmp, &it.x_hat, tol))
        .collect();
    let mut candidates: Vec<Vec<f64>> = per_member.iter().flatten().cloned().collect();
    let firsts: Vec<&Vec<f64>> = per_member.iter().filter_map(|c| c.first()).collect();
    if firsts.len() > 1 {
        let mut mean = vec![0.0; sub.n];
        for c in &firsts {
            for (m, v) in mean.iter_mut().zip(c.iter()) {
                *m += v;
            }
        }
        if let Ok(c) = CostVector::normalized(mean) {
            candidates.push(c.into_inner());
        }
    }
    let mut best: Option<ClusterSolution> = None;
    'candidates: for c in candidates {
        let mut certificates = Vec::with_capacity(sub.k());
        let mut objective = 0.0f64;
        for it in &sub.items {
            let Some(cert) = certify(&it.dmp, &c, alpha, m2, tol) else {
                continue 'candidates;
            };
            objective = objective.max(norm.distance(&it.x_hat, &cert.x));
            if best.as_ref().is_some_and(|b| objective >= b.objective) {
                continue 'candidates;
            }
            certificates.push(cert);
        }
        let Ok(cost) = CostVector::new(c) else { continue };
        best = Some(ClusterSolution {
            assignment: vec![0; sub.k()],
            cost_vectors: vec![cost],
            certificates,
            objective,
            provenance: Provenance::ScUb,
        });
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::box_example;

    #[test]
    fn certificate_on_box_corner() {
        let ds = box_example().normalized().unwrap();
        let tol = Tolerances::default();
        let cert = certify(&ds.items[0].dmp, &[-0.5, -0.5], Some(0.05), 1e3, &tol).unwrap();
        assert!((cert.x[0] - 1.5).abs() < 1e-9 && (cert.x[1] - 1.0).abs() < 1e-9);
        assert_eq!(cert.active.len(), 2);
        // An edge cost has a one-row support and no strict certificate.
        assert!(certify(&ds.items[0].dmp, &[0.0, -1.0], Some(0.05), 1e3, &tol).is_none());
        assert!(certify(&ds.items[0].dmp, &[0.0, -1.0], None, 1e3, &tol).is_some());
    }

    #[test]
    fn seeded_cluster_matches_example() {
        let ds = box_example().normalized().unwrap();
        let tol = Tolerances::default();
        let sub = ds.subset(&[0, 1]);
        let s = seed_cluster(&sub, Some(0.05), 1e3, NormKind::LInf, &tol).unwrap();
        assert!((s.objective - 0.4).abs() < 1e-9, "{s:?}");
    }
}
