//! Test-only helpers: random instances and a dense solver that does not
//! share code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdice::cmdp::{Policy, TabularCmdp};
use spdice::table::Table;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random CMDP with rewards and costs uniform in [0, 1).
pub fn random_cmdp(seed: u64, ns: usize, na: usize, gamma: f64, threshold: f64) -> TabularCmdp {
    let mut r = rng(seed);
    let mut t = vec![0.0; ns * na * ns];
    for row in t.chunks_mut(ns) {
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = r.random::<f64>() + 0.05;
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    let reward = Table::from_fn(ns, na, |_, _| r.random());
    let cost = Table::from_fn(ns, na, |_, _| r.random());
    let mut p0: Vec<f64> = (0..ns).map(|_| r.random::<f64>() + 0.1).collect();
    let z: f64 = p0.iter().sum();
    p0.iter_mut().for_each(|v| *v /= z);
    TabularCmdp::new(ns, na, t, reward, cost, p0, gamma, threshold).unwrap()
}

pub fn random_policy(seed: u64, ns: usize, na: usize) -> Policy {
    let mut r = rng(seed);
    let probs = Table::from_fn(ns, na, |_, _| r.random::<f64>() + 0.01);
    let rows: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let z: f64 = probs.row(s).iter().sum();
            probs.row(s).iter().map(|p| p / z).collect()
        })
        .collect();
    Policy::new(Table::from_rows(&rows).unwrap()).unwrap()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn t(cmdp: &TabularCmdp, s: usize, a: usize, s2: usize) -> f64 {
    let (ns, na) = (cmdp.p0().len(), cmdp.reward().cols());
    cmdp.transition()[(s * na + a) * ns + s2]
}

/// Normalized value `(1 - gamma) p0^T V` of `f` under `policy`, by solving
/// `V = f_pi + gamma P_pi V` directly.
pub fn exact_value(cmdp: &TabularCmdp, policy: &Policy, f: &Table) -> f64 {
    let ns = cmdp.p0().len();
    let na = f.cols();
    let g = cmdp.gamma();
    let mut a = vec![vec![0.0; ns]; ns];
    let mut b = vec![0.0; ns];
    for s in 0..ns {
        a[s][s] += 1.0;
        for act in 0..na {
            let p = policy.prob(s, act);
            b[s] += p * f[(s, act)];
            for s2 in 0..ns {
                a[s][s2] -= g * p * t(cmdp, s, act, s2);
            }
        }
    }
    let v = solve_dense(a, b);
    (1.0 - g) * cmdp.p0().iter().zip(&v).map(|(p, v)| p * v).sum::<f64>()
}

/// Occupancy by summing the discounted state distribution forward in time.
pub fn forward_occupancy(cmdp: &TabularCmdp, policy: &Policy, steps: usize) -> Table {
    let ns = cmdp.p0().len();
    let na = cmdp.reward().cols();
    let g = cmdp.gamma();
    let mut dist = cmdp.p0().to_vec();
    let mut d = Table::zeros(ns, na);
    let mut disc = 1.0 - g;
    for _ in 0..steps {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let m = dist[s] * policy.prob(s, a);
                d[(s, a)] += disc * m;
                for s2 in 0..ns {
                    next[s2] += m * t(cmdp, s, a, s2);
                }
            }
        }
        dist = next;
        disc *= g;
    }
    d
}

/// Every deterministic policy of a small CMDP.
pub fn all_deterministic(ns: usize, na: usize) -> Vec<Policy> {
    let total = na.pow(ns as u32);
    (0..total)
        .map(|mut code| {
            let acts: Vec<usize> = (0..ns)
                .map(|_| {
                    let a = code % na;
                    code /= na;
                    a
                })
                .collect();
            Policy::deterministic(&acts, na).unwrap()
        })
        .collect()
}
