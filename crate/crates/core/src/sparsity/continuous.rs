//! Continuous-state datasets: CSV schema, clustering-based cost rescaling
//! and the cluster export used for visualization.
//!
//! Schema: `traj_id,t,s_0..s_{m-1},a_0..a_{p-1},r,c,ns_0..ns_{m-1}`, with an
//! optional `c_orig` column right after `c` in penalized files.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::{fmt_real, parse_real};
use crate::sparsity::kmeans::{kmeans_fit, ClusteringModel, KMeansConfig};
use crate::sparsity::score::{batch_penalties, cluster_sparsity, SparsityScores};
use crate::sparsity::tabular::{penalize_costs, Costs, PenalizedCosts, Penalty};

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRow {
    pub traj_id: u64,
    pub t: u64,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub c: f64,
    pub ns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDataset {
    pub state_dim: usize,
    pub action_dim: usize,
    pub rows: Vec<ContinuousRow>,
}

impl ContinuousDataset {
    pub fn states(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.s.clone()).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.c).collect()
    }

    pub fn distinct_states(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.s.iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
            .collect::<HashSet<_>>()
            .len()
    }
}

fn indexed_run(cols: &[&str], start: usize, prefix: &str) -> usize {
    let mut n = 0;
    while start + n < cols.len() && cols[start + n] == format!("{prefix}{n}") {
        n += 1;
    }
    n
}

fn header_columns(m: usize, p: usize, with_original: bool) -> String {
    let mut h = String::from("traj_id,t");
    for i in 0..m {
        let _ = write!(h, ",s_{i}");
    }
    for i in 0..p {
        let _ = write!(h, ",a_{i}");
    }
    h.push_str(",r,c");
    if with_original {
        h.push_str(",c_orig");
    }
    for i in 0..m {
        let _ = write!(h, ",ns_{i}");
    }
    h
}

pub fn read_continuous_csv(text: &str) -> Result<ContinuousDataset> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?.1;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "traj_id" || cols[1] != "t" {
        return Err(Error::parse(1, "header must start with traj_id,t"));
    }
    let m = indexed_run(&cols, 2, "s_");
    let p = indexed_run(&cols, 2 + m, "a_");
    if m == 0 {
        return Err(Error::parse(1, "no state columns s_0.."));
    }
    let mut at = 2 + m + p;
    if cols.get(at) != Some(&"r") || cols.get(at + 1) != Some(&"c") {
        return Err(Error::parse(1, "expected r,c after the action columns"));
    }
    at += 2;
    let has_original = cols.get(at) == Some(&"c_orig");
    if has_original {
        at += 1;
    }
    if indexed_run(&cols, at, "ns_") != m || at + m != cols.len() {
        return Err(Error::parse(
            1,
            format!("expected ns_0..ns_{} to close the header", m - 1),
        ));
    }
    let width = cols.len();

    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != width {
            return Err(Error::parse(
                line_no,
                format!("expected {width} columns, got {}", f.len()),
            ));
        }
        let int = |j: usize| -> Result<u64> {
            f[j].trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("column {} is not an integer", cols[j])))
        };
        let reals = |from: usize, n: usize| -> Result<Vec<f64>> {
            (from..from + n)
                .map(|j| parse_real(f[j], line_no))
                .collect()
        };
        let base = 2 + m + p;
        let row = ContinuousRow {
            traj_id: int(0)?,
            t: int(1)?,
            s: reals(2, m)?,
            a: reals(2 + m, p)?,
            r: parse_real(f[base], line_no)?,
            c: parse_real(f[base + 1], line_no)?,
            ns: reals(at, m)?,
        };
        if row
            .s
            .iter()
            .chain(&row.a)
            .chain(&row.ns)
            .any(|v| !v.is_finite())
            || !row.r.is_finite()
            || !row.c.is_finite()
        {
            return Err(Error::parse(line_no, "non-finite value"));
        }
        rows.push(row);
    }
    Ok(ContinuousDataset {
        state_dim: m,
        action_dim: p,
        rows,
    })
}

/// Writes the dataset; with `original_costs`, a `c_orig` column follows `c`.
pub fn write_continuous_csv(data: &ContinuousDataset, original_costs: Option<&[f64]>) -> String {
    let mut out = header_columns(data.state_dim, data.action_dim, original_costs.is_some());
    out.push('\n');
    for (i, row) in data.rows.iter().enumerate() {
        let _ = write!(out, "{},{}", row.traj_id, row.t);
        for v in row.s.iter().chain(&row.a) {
            let _ = write!(out, ",{}", fmt_real(*v));
        }
        let _ = write!(out, ",{},{}", fmt_real(row.r), fmt_real(row.c));
        if let Some(orig) = original_costs {
            let _ = write!(out, ",{}", fmt_real(orig[i]));
        }
        for v in &row.ns {
            let _ = write!(out, ",{}", fmt_real(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub k: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub clamp_min_one: bool,
    pub max_iters: usize,
}

impl PreprocessConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        PreprocessConfig {
            k,
            seed,
            batch_size: 1024,
            clamp_min_one: false,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutput {
    /// Input dataset with every cost multiplied by its penalty.
    pub penalized: ContinuousDataset,
    pub original_costs: Vec<f64>,
    /// Per-transition penalty, in file order.
    pub penalties: Vec<f64>,
    pub model: ClusteringModel,
    pub scores: SparsityScores,
}

/// Clusters the states, scores each cluster, and rescales every cost by the
/// softmax penalty of its sequential batch.
pub fn preprocess_continuous(
    data: &ContinuousDataset,
    config: &PreprocessConfig,
) -> Result<PreprocessOutput> {
    if data.rows.is_empty() {
        return Err(Error::InvalidArgument("dataset has no transitions".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let distinct = data.distinct_states();
    if config.k > distinct {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds the {distinct} distinct states",
            config.k
        )));
    }
    let states = data.states();
    let model = kmeans_fit(
        &states,
        &KMeansConfig {
            k: config.k,
            seed: config.seed,
            max_iters: config.max_iters,
            tol: 1e-10,
        },
    )?;
    let scores = cluster_sparsity(&model, &states)?;

    let mut penalties = Vec::with_capacity(states.len());
    for chunk in model.assignments.chunks(config.batch_size) {
        let mut batch = batch_penalties(&scores, chunk)?;
        if config.clamp_min_one {
            batch = batch.clamped_min_one();
        }
        penalties.extend(batch.values);
    }

    let original_costs = data.costs();
    let vector = crate::sparsity::score::PenaltyVector {
        values: penalties.clone(),
        batch_size: penalties.len(),
    };
    let PenalizedCosts::PerPoint(new_costs) =
        penalize_costs(Costs::PerPoint(&original_costs), Penalty::PerPoint(&vector))?
    else {
        unreachable!("per-point inputs give per-point output")
    };
    let mut penalized = data.clone();
    for (row, c) in penalized.rows.iter_mut().zip(&new_costs) {
        row.c = *c;
    }
    Ok(PreprocessOutput {
        penalized,
        original_costs,
        penalties,
        model,
        scores,
    })
}

/// `clusters.csv`: one row per transition state.
pub fn write_clusters_csv(out: &PreprocessOutput, states: &[Vec<f64>]) -> String {
    let m = out.model.state_dim;
    let mut text = String::from("point_id");
    for i in 0..m {
        let _ = write!(text, ",s_{i}");
    }
    text.push_str(",cluster,z_score,penalty\n");
    for (i, s) in states.iter().enumerate() {
        let j = out.model.assignments[i];
        let _ = write!(text, "{i}");
        for v in s {
            let _ = write!(text, ",{}", fmt_real(*v));
        }
        let _ = writeln!(
            text,
            ",{j},{},{}",
            fmt_real(out.scores.z[j]),
            fmt_real(out.penalties[i])
        );
    }
    text
}

/// `centroids.csv`: one row per cluster.
pub fn write_centroids_csv(out: &PreprocessOutput) -> String {
    let m = out.model.state_dim;
    let mut text = String::from("cluster");
    for i in 0..m {
        let _ = write!(text, ",mu_{i}");
    }
    text.push_str(",raw_score,z_score\n");
    for (j, mu) in out.model.centroids.iter().enumerate() {
        let _ = write!(text, "{j}");
        for v in mu {
            let _ = write!(text, ",{}", fmt_real(*v));
        }
        let _ = writeln!(
            text,
            ",{},{}",
            fmt_real(out.scores.raw[j]),
            fmt_real(out.scores.z[j])
        );
    }
    text
}
