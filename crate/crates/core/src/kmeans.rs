//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITERATIONS: usize = 300;
const SHIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared Euclidean distances to the assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
}

impl KmeansResult {
    /// Nonempty clusters as a sorted partition of point indices.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &l) in self.assignment.iter().enumerate() {
            out[l].push(i);
        }
        let mut p: Vec<Vec<usize>> = out.into_iter().filter(|c| !c.is_empty()).collect();
        p.sort();
        p
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (l, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (l, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], l: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < l {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let pick = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

fn means(points: &[Vec<f64>], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &l) in points.iter().zip(assignment) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (l, c) in centroids.iter_mut().enumerate() {
        if counts[l] > 0 {
            *c = sums[l].iter().map(|s| s / counts[l] as f64).collect();
        }
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[Vec<f64>], assignment: &mut [usize], centroids: &mut [Vec<f64>]) {
    loop {
        let mut counts = vec![0usize; centroids.len()];
        for &l in assignment.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let mut far = None;
        for (i, p) in points.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[assignment[i]]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { return };
        assignment[i] = empty;
        centroids[empty] = points[i].clone();
        means(points, assignment, centroids);
    }
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KmeansResult {
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let previous = centroids.clone();
        means(points, &assignment, &mut centroids);
        repair_empty(points, &mut assignment, &mut centroids);
        let shift = previous
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        let unchanged = next == assignment;
        assignment = next;
        if unchanged || shift < SHIFT_TOL {
            break;
        }
    }
    if assignment.iter().collect::<std::collections::HashSet<_>>().len() < centroids.len() {
        repair_empty(points, &mut assignment, &mut centroids);
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    KmeansResult {
        assignment,
        centroids,
        inertia,
        iterations,
    }
}

/// Best of `restarts` seeded k-means++ runs; ties go to the lowest restart.
pub fn kmeans(points: &[Vec<f64>], l: usize, seed: u64, restarts: usize) -> Result<KmeansResult> {
    if l == 0 {
        return Err(Error::InvalidInput("number of clusters must be positive".into()));
    }
    let Some(dim) = points.first().map(Vec::len) else {
        return Err(Error::TooFewPoints { points: 0, clusters: l });
    };
    if points.iter().any(|p| p.len() != dim || !p.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidInput("points must be finite and of equal length".into()));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
        }
    }
    if distinct.len() < l {
        return Err(Error::TooFewPoints {
            points: distinct.len(),
            clusters: l,
        });
    }
    let runs: Vec<KmeansResult> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, plus_plus(points, l, &mut rng))
        })
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = r;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}
