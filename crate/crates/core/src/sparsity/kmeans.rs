//! Lloyd's algorithm with k-means++ seeding.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringModel {
    pub k: usize,
    pub state_dim: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances of every point to its assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once an iteration improves inertia by less than this.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iters: 300,
            tol: 1e-10,
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.par_iter().map(|p| nearest(p, centroids)).unzip()
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if u < acc {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // all remaining points coincide with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[pick]));
        }
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Fits `k` clusters to `points` (rows of equal length).
pub fn kmeans_fit(points: &[Vec<f64>], config: &KMeansConfig) -> Result<ClusteringModel> {
    let n = points.len();
    let k = config.k;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={n}, got {k}"
        )));
    }
    let m = points[0].len();
    if m == 0 || points.iter().any(|p| p.len() != m) {
        return Err(Error::Shape(
            "points must share a positive dimension".into(),
        ));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "points contain non-finite values".into(),
        ));
    }

    let mut centroids = kmeans_plus_plus(points, k, config.seed);
    let (mut assignments, mut dists) = assign(points, &centroids);
    let mut inertia: f64 = dists.iter().sum();
    let mut history = vec![inertia];
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; m]; k];
        let mut sizes = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignments) {
            sizes[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            }
        }
        // re-seed empty clusters at the point farthest from its centroid
        for j in 0..k {
            if sizes[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assignments[a]]);
                        let db = sq_dist(&points[b], &centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                centroids[j] = points[far].clone();
                assignments[far] = j;
            }
        }
        let (next_assign, next_dists) = assign(points, &centroids);
        let next_inertia: f64 = next_dists.iter().sum();
        let changed = next_assign != assignments;
        let improvement = inertia - next_inertia;
        assignments = next_assign;
        dists = next_dists;
        inertia = next_inertia;
        history.push(inertia);
        if !changed || improvement < config.tol {
            break;
        }
    }
    debug_assert_eq!(dists.len(), n);

    Ok(ClusteringModel {
        k,
        state_dim: m,
        centroids,
        assignments,
        inertia,
        inertia_history: history,
        iterations,
    })
}

impl ClusteringModel {
    /// Nearest-centroid index of an arbitrary point.
    pub fn predict(&self, point: &[f64]) -> usize {
        nearest(point, &self.centroids).0
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &j in &self.assignments {
            sizes[j] += 1;
        }
        sizes
    }
}
