use crate::error::{Error, Result};
use crate::sparsity::kmeans::{sq_dist, ClusteringModel};

/// Per-cluster dispersion and its z-score across clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityScores {
    /// `sum_{i in k} ||mu_k - x_i||^2 / (N_k m)`.
    pub raw: Vec<f64>,
    /// `(raw - mean) / std`, unweighted, population standard deviation.
    pub z: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

/// Mean squared per-coordinate deviation of each cluster from its centroid,
/// standardized across clusters.
pub fn cluster_sparsity(model: &ClusteringModel, points: &[Vec<f64>]) -> Result<SparsityScores> {
    if points.len() != model.assignments.len() {
        return Err(Error::Shape(format!(
            "{} points but {} assignments",
            points.len(),
            model.assignments.len()
        )));
    }
    let m = model.state_dim as f64;
    let mut sums = vec![0.0; model.k];
    let mut sizes = vec![0usize; model.k];
    for (p, &j) in points.iter().zip(&model.assignments) {
        sums[j] += sq_dist(&model.centroids[j], p);
        sizes[j] += 1;
    }
    if let Some(j) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster(j));
    }
    let raw: Vec<f64> = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| s / (n as f64 * m))
        .collect();
    Ok(SparsityScores {
        z: standardize(&raw),
        raw,
        cluster_sizes: sizes,
    })
}

/// Population z-scores; a constant input maps to all zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
    let std = var.sqrt();
    if !(std > 0.0) || std <= 1e-12 * mean.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Per-point multiplicative cost penalties for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector {
    pub values: Vec<f64>,
    pub batch_size: usize,
}

impl PenaltyVector {
    /// `max(value, 1)` on every entry. Breaks the sum-to-batch-size identity.
    pub fn clamped_min_one(&self) -> PenaltyVector {
        PenaltyVector {
            values: self.values.iter().map(|v| v.max(1.0)).collect(),
            batch_size: self.batch_size,
        }
    }
}

/// Softmax of the batch members' cluster z-scores, times the batch length.
pub fn batch_penalties(
    scores: &SparsityScores,
    batch_assignments: &[usize],
) -> Result<PenaltyVector> {
    if batch_assignments.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(&bad) = batch_assignments.iter().find(|&&j| j >= scores.z.len()) {
        return Err(Error::InvalidArgument(format!(
            "cluster {bad} out of range"
        )));
    }
    let logits: Vec<f64> = batch_assignments.iter().map(|&j| scores.z[j]).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    let n = batch_assignments.len();
    Ok(PenaltyVector {
        values: exps.iter().map(|e| e / total * n as f64).collect(),
        batch_size: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(centroids: Vec<Vec<f64>>, assignments: Vec<usize>) -> ClusteringModel {
        ClusteringModel {
            k: centroids.len(),
            state_dim: centroids[0].len(),
            centroids,
            assignments,
            inertia: 0.0,
            inertia_history: vec![],
            iterations: 0,
        }
    }

    #[test]
    fn spot_values() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![5.0, 5.0]];
        let m = model(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![0, 0, 1]);
        let s = cluster_sparsity(&m, &pts).unwrap();
        assert_eq!(s.raw, vec![0.5, 0.0]);
        assert_eq!(s.cluster_sizes, vec![2, 1]);
        assert_eq!(s.z, vec![1.0, -1.0]);
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let pts = vec![vec![0.0]];
        let m = model(vec![vec![0.0], vec![1.0]], vec![0]);
        assert!(matches!(
            cluster_sparsity(&m, &pts),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn softmax_spot_values() {
        let scores = SparsityScores {
            raw: vec![0.0, 0.0],
            z: vec![3f64.ln(), 0.0],
            cluster_sizes: vec![1, 1],
        };
        let p = batch_penalties(&scores, &[0, 1]).unwrap();
        assert!((p.values[0] - 1.5).abs() < 1e-15);
        assert!((p.values[1] - 0.5).abs() < 1e-15);
        assert_eq!(p.clamped_min_one().values, vec![1.5, 1.0]);

        let flat = SparsityScores {
            raw: vec![1.0; 3],
            z: vec![0.0; 3],
            cluster_sizes: vec![1; 3],
        };
        let p = batch_penalties(&flat, &[2, 0, 1, 1]).unwrap();
        assert!(p.values.iter().all(|&v| v == 1.0));
        assert!(batch_penalties(&flat, &[]).is_err());
        assert!(batch_penalties(&flat, &[3]).is_err());
    }

    #[test]
    fn constant_scores_standardize_to_zero() {
        assert_eq!(standardize(&[2.0, 2.0, 2.0]), vec![0.0; 3]);
    }
}
