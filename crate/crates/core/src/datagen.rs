//! Seeded random CMDPs, behavior policies, offline trajectory datasets and
//! the count/maximum-likelihood statistics built from them.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;

use crate::cmdp::{
    occupancy_from_policy, optimal_policy, policy_evaluation, policy_from_occupancy,
    solve_constrained_lp, Dynamics, Policy, TabularCmdp,
};
use crate::error::{Error, Result};
use crate::format::{fmt_real, parse_real};
use crate::rng::{rng_from_seed, StreamRng};
use crate::table::Table;

/// Parameters of the random goal-reaching CMDP family.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCmdpConfig {
    pub n_states: usize,
    pub n_actions: usize,
    /// Number of distinct successors of every `(s, a)`.
    pub connectivity: usize,
    pub cost_threshold: f64,
    pub gamma: f64,
    /// Fraction of state-action pairs that carry unit cost.
    pub cost_fraction: f64,
    /// Redraw the costly pairs (up to this many times) until the
    /// reward-optimal policy exceeds the threshold. Zero disables.
    pub max_cost_redraws: usize,
}

impl Default for RandomCmdpConfig {
    fn default() -> Self {
        RandomCmdpConfig {
            n_states: 50,
            n_actions: 4,
            connectivity: 4,
            cost_threshold: 0.1,
            gamma: 0.95,
            cost_fraction: 0.1,
            max_cost_redraws: 1000,
        }
    }
}

fn dirichlet_ones(rng: &mut StreamRng, k: usize) -> Vec<f64> {
    // Dirichlet(1, ..., 1) = normalized unit exponentials
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random CMDP: sparse Dirichlet transitions, a unit reward on the least
/// visited state (under the uniform policy) and binary costs on a random
/// subset of the remaining pairs. The start state is state 0.
pub fn generate_random_cmdp(seed: u64, config: &RandomCmdpConfig) -> Result<TabularCmdp> {
    let RandomCmdpConfig {
        n_states: ns,
        n_actions: na,
        connectivity,
        ..
    } = *config;
    if ns == 0 || na == 0 {
        return Err(Error::InvalidArgument(
            "n_states and n_actions must be positive".into(),
        ));
    }
    if connectivity == 0 || connectivity > ns {
        return Err(Error::InvalidArgument(format!(
            "connectivity must be in 1..={ns}, got {connectivity}"
        )));
    }
    if !(0.0..=1.0).contains(&config.cost_fraction) {
        return Err(Error::InvalidArgument(
            "cost_fraction must be in [0, 1]".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);

    let mut transition = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let mut succ = sample(&mut rng, ns, connectivity).into_vec();
            succ.sort_unstable();
            let probs = dirichlet_ones(&mut rng, connectivity);
            let base = (s * na + a) * ns;
            for (s2, p) in succ.into_iter().zip(probs) {
                transition[base + s2] = p;
            }
        }
    }
    let mut p0 = vec![0.0; ns];
    p0[0] = 1.0;

    let skeleton = TabularCmdp::new(
        ns,
        na,
        transition.clone(),
        Table::zeros(ns, na),
        Table::zeros(ns, na),
        p0.clone(),
        config.gamma,
        config.cost_threshold,
    )?;
    let visits = occupancy_from_policy(&skeleton, &Policy::uniform(ns, na))?.state_marginal();
    let goal = least_visited(&visits);

    let reward = Table::from_fn(ns, na, |s, _| if s == goal { 1.0 } else { 0.0 });

    let eligible: Vec<(usize, usize)> = (0..ns)
        .filter(|&s| s != goal)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .collect();
    let n_costly = ((config.cost_fraction * (ns * na) as f64).round() as usize).min(eligible.len());
    let draw_costs = |rng: &mut StreamRng| {
        let mut cost = Table::zeros(ns, na);
        for i in sample(rng, eligible.len(), n_costly) {
            let (s, a) = eligible[i];
            cost[(s, a)] = 1.0;
        }
        cost
    };
    let with_reward = skeleton.with_reward(reward)?;
    let mut cmdp = with_reward.with_cost(draw_costs(&mut rng))?;
    if config.max_cost_redraws > 0 && n_costly > 0 {
        // keep the constrained problem non-vacuous: the unconstrained
        // optimum must violate the threshold
        let star = optimal_policy(&cmdp)?;
        for _ in 0..config.max_cost_redraws {
            if policy_evaluation(&cmdp, &star)?.normalized_cost > config.cost_threshold {
                break;
            }
            cmdp = with_reward.with_cost(draw_costs(&mut rng))?;
        }
    }
    Ok(cmdp)
}

/// Index of the smallest entry; ties go to the lowest index.
fn least_visited(visits: &[f64]) -> usize {
    let mut best = 0;
    for (s, &v) in visits.iter().enumerate() {
        if v < visits[best] {
            best = s;
        }
    }
    best
}

/// `optimality * pi_star + (1 - optimality) * uniform`, where `pi_star` is
/// the deterministic reward-optimal policy ignoring costs.
pub fn make_behavior_policy(cmdp: &TabularCmdp, optimality: f64) -> Result<Policy> {
    check_optimality(optimality)?;
    let star = optimal_policy(cmdp)?;
    star.mix(
        &Policy::uniform(cmdp.n_states(), cmdp.n_actions()),
        optimality,
    )
}

/// Same mixture around the constrained-LP policy instead of the
/// unconstrained optimum.
pub fn make_constrained_behavior_policy(cmdp: &TabularCmdp, optimality: f64) -> Result<Policy> {
    check_optimality(optimality)?;
    let lp = policy_from_occupancy(&solve_constrained_lp(cmdp)?)?;
    lp.mix(
        &Policy::uniform(cmdp.n_states(), cmdp.n_actions()),
        optimality,
    )
}

fn check_optimality(optimality: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&optimality) {
        return Err(Error::InvalidArgument(format!(
            "optimality must be in [0, 1], got {optimality}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub c: f64,
    pub s_next: usize,
}

/// Offline tabular dataset: a set of trajectories of bounded length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Vec<Transition>>,
    pub horizon: usize,
    pub source_seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
}

impl Dataset {
    pub fn empty(n_states: usize, n_actions: usize) -> Self {
        Dataset {
            trajectories: Vec::new(),
            horizon: 1,
            source_seed: 0,
            n_states,
            n_actions,
        }
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, traj) in self.trajectories.iter().enumerate() {
            if traj.len() > self.horizon {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {i} has {} steps, horizon is {}",
                    traj.len(),
                    self.horizon
                )));
            }
            for tr in traj {
                if tr.s >= self.n_states || tr.s_next >= self.n_states || tr.a >= self.n_actions {
                    return Err(Error::InvalidArgument(format!(
                        "transition {tr:?} out of bounds in trajectory {i}"
                    )));
                }
                if !tr.r.is_finite() || !tr.c.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite reward or cost in trajectory {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sample_index(rng: &mut StreamRng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Rolls out `n_trajectories` episodes of exactly `horizon` steps.
pub fn sample_dataset(
    cmdp: &TabularCmdp,
    policy: &Policy,
    n_trajectories: usize,
    horizon: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_trajectories == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(
            "n_trajectories and horizon must be >= 1".into(),
        ));
    }
    if policy.n_states() != cmdp.n_states() || policy.n_actions() != cmdp.n_actions() {
        return Err(Error::Shape("policy shape differs from the CMDP".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut trajectories = Vec::with_capacity(n_trajectories);
    for _ in 0..n_trajectories {
        let mut s = sample_index(&mut rng, cmdp.p0());
        let mut traj = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let a = sample_index(&mut rng, policy.probs().row(s));
            let s_next = sample_index(&mut rng, cmdp.next(s, a));
            traj.push(Transition {
                s,
                a,
                r: cmdp.reward()[(s, a)],
                c: cmdp.cost()[(s, a)],
                s_next,
            });
            s = s_next;
        }
        trajectories.push(traj);
    }
    Ok(Dataset {
        trajectories,
        horizon,
        source_seed: seed,
        n_states: cmdp.n_states(),
        n_actions: cmdp.n_actions(),
    })
}

/// Per-pair visit counts `n(s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    n_actions: usize,
    n: Vec<u64>,
}

impl VisitCounts {
    pub fn from_matrix(n: &[Vec<u64>]) -> Result<Self> {
        let n_actions = n.first().map_or(0, Vec::len);
        if n.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Shape("ragged count matrix".into()));
        }
        Ok(VisitCounts {
            n_actions,
            n: n.concat(),
        })
    }

    pub fn get(&self, s: usize, a: usize) -> u64 {
        self.n[s * self.n_actions + a]
    }

    pub fn n_states(&self) -> usize {
        self.n.len().checked_div(self.n_actions).unwrap_or(0)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn as_table(&self) -> Table {
        Table::from_fn(self.n_states(), self.n_actions, |s, a| {
            self.get(s, a) as f64
        })
    }
}

pub fn visit_counts(dataset: &Dataset) -> VisitCounts {
    let mut n = vec![0u64; dataset.n_states * dataset.n_actions];
    for tr in dataset.transitions() {
        n[tr.s * dataset.n_actions + tr.a] += 1;
    }
    VisitCounts {
        n_actions: dataset.n_actions,
        n,
    }
}

/// Maximum-likelihood dynamics and empirical state-action distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MleModel {
    n_states: usize,
    n_actions: usize,
    t_hat: Vec<f64>,
    d_data: Table,
    observed: Vec<bool>,
}

impl MleModel {
    /// Builds a model from explicit dynamics and data distribution; pairs
    /// with `d_data = 0` are unobserved and get self-loop rows.
    pub fn from_parts(dynamics: &impl Dynamics, d_data: Table) -> Result<Self> {
        let (ns, na) = (dynamics.n_states(), dynamics.n_actions());
        if d_data.shape() != (ns, na) {
            return Err(Error::Shape(
                "d_data shape differs from the dynamics".into(),
            ));
        }
        if d_data.iter().any(|&x| !(x >= 0.0)) || (d_data.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(
                "d_data must be a non-negative distribution".into(),
            ));
        }
        let mut t_hat = vec![0.0; ns * na * ns];
        let mut observed = vec![false; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let base = (s * na + a) * ns;
                if d_data[(s, a)] > 0.0 {
                    observed[s * na + a] = true;
                    t_hat[base..base + ns].copy_from_slice(dynamics.next(s, a));
                } else {
                    t_hat[base + s] = 1.0;
                }
            }
        }
        Ok(MleModel {
            n_states: ns,
            n_actions: na,
            t_hat,
            d_data,
            observed,
        })
    }

    pub fn d_data(&self) -> &Table {
        &self.d_data
    }

    pub fn is_observed(&self, s: usize, a: usize) -> bool {
        self.observed[s * self.n_actions + a]
    }

    pub fn observed_mask(&self) -> Table {
        Table::from_fn(self.n_states, self.n_actions, |s, a| {
            if self.is_observed(s, a) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Row-major `[state][action][next_state]`.
    pub fn t_hat(&self) -> &[f64] {
        &self.t_hat
    }
}

impl Dynamics for MleModel {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn next(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.t_hat[base..base + self.n_states]
    }
}

pub fn mle_estimate(dataset: &Dataset) -> Result<MleModel> {
    let total = dataset.n_transitions();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "cannot estimate a model from an empty dataset".into(),
        ));
    }
    let (ns, na) = (dataset.n_states, dataset.n_actions);
    let counts = visit_counts(dataset);
    let mut t_hat = vec![0.0; ns * na * ns];
    for tr in dataset.transitions() {
        t_hat[(tr.s * na + tr.a) * ns + tr.s_next] += 1.0;
    }
    let mut observed = vec![false; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            let n = counts.get(s, a);
            if n > 0 {
                observed[s * na + a] = true;
                t_hat[base..base + ns]
                    .iter_mut()
                    .for_each(|x| *x /= n as f64);
            } else {
                t_hat[base + s] = 1.0;
            }
        }
    }
    let d_data = Table::from_fn(ns, na, |s, a| counts.get(s, a) as f64 / total as f64);
    Ok(MleModel {
        n_states: ns,
        n_actions: na,
        t_hat,
        d_data,
        observed,
    })
}

/// Mean observed reward and cost per pair; unobserved pairs are zero.
pub fn empirical_reward_cost(dataset: &Dataset) -> (Table, Table) {
    let (ns, na) = (dataset.n_states, dataset.n_actions);
    let mut r = Table::zeros(ns, na);
    let mut c = Table::zeros(ns, na);
    let counts = visit_counts(dataset);
    for tr in dataset.transitions() {
        r[(tr.s, tr.a)] += tr.r;
        c[(tr.s, tr.a)] += tr.c;
    }
    for s in 0..ns {
        for a in 0..na {
            let n = counts.get(s, a);
            if n > 0 {
                r[(s, a)] /= n as f64;
                c[(s, a)] /= n as f64;
            }
        }
    }
    (r, c)
}

pub const TABULAR_HEADER: &str = "traj_id,t,s,a,r,c,s_next";

pub fn write_tabular_csv(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(64 * dataset.n_transitions() + 32);
    out.push_str(TABULAR_HEADER);
    out.push('\n');
    for (i, traj) in dataset.trajectories.iter().enumerate() {
        for (t, tr) in traj.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{t},{},{},{},{},{}",
                tr.s,
                tr.a,
                fmt_real(tr.r),
                fmt_real(tr.c),
                tr.s_next
            );
        }
    }
    out
}

/// Parses the tabular schema. Dimensions default to `max index + 1` when
/// not given. Rows must be grouped by `traj_id` in file order.
pub fn read_tabular_csv(
    text: &str,
    n_states: Option<usize>,
    n_actions: Option<usize>,
) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file"))?
        .1
        .trim();
    if header != TABULAR_HEADER {
        return Err(Error::parse(
            1,
            format!("expected header {TABULAR_HEADER:?}, got {header:?}"),
        ));
    }
    let mut trajectories: Vec<Vec<Transition>> = Vec::new();
    let mut current_id: Option<u64> = None;
    let (mut max_s, mut max_a) = (0usize, 0usize);
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::parse(
                line_no,
                format!("expected 7 columns, got {}", cols.len()),
            ));
        }
        let int = |j: usize| -> Result<usize> {
            cols[j]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("column {j} is not an index")))
        };
        let traj_id = int(0)? as u64;
        let tr = Transition {
            s: int(2)?,
            a: int(3)?,
            r: parse_real(cols[4], line_no)?,
            c: parse_real(cols[5], line_no)?,
            s_next: int(6)?,
        };
        if current_id != Some(traj_id) {
            trajectories.push(Vec::new());
            current_id = Some(traj_id);
        }
        max_s = max_s.max(tr.s).max(tr.s_next);
        max_a = max_a.max(tr.a);
        trajectories.last_mut().expect("pushed above").push(tr);
    }
    let horizon = trajectories.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let dataset = Dataset {
        trajectories,
        horizon,
        source_seed: 0,
        n_states: n_states.unwrap_or(max_s + 1),
        n_actions: n_actions.unwrap_or(max_a + 1),
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_generator_shape() {
        let m = generate_random_cmdp(3, &RandomCmdpConfig::default()).unwrap();
        assert_eq!((m.n_states(), m.n_actions()), (50, 4));
        for s in 0..50 {
            for a in 0..4 {
                let nz = m.next(s, a).iter().filter(|&&p| p > 0.0).count();
                assert_eq!(nz, 4);
            }
        }
        assert_eq!(m.cost().sum(), 20.0);
        let goal = (0..50).find(|&s| m.reward()[(s, 0)] == 1.0).unwrap();
        assert!(m.cost().row(goal).iter().all(|&c| c == 0.0));
        assert_eq!(m.reward().sum(), 4.0);
    }

    #[test]
    fn full_connectivity_is_dense() {
        let cfg = RandomCmdpConfig {
            n_states: 6,
            n_actions: 2,
            connectivity: 6,
            ..Default::default()
        };
        let m = generate_random_cmdp(11, &cfg).unwrap();
        assert!(m.transition().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = RandomCmdpConfig::default();
        let a = generate_random_cmdp(42, &cfg).unwrap();
        let b = generate_random_cmdp(42, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_random_cmdp(43, &cfg).unwrap());
    }

    #[test]
    fn connectivity_bounds() {
        let cfg = RandomCmdpConfig {
            n_states: 3,
            connectivity: 4,
            ..Default::default()
        };
        assert!(generate_random_cmdp(0, &cfg).is_err());
    }

    #[test]
    fn behavior_mixture_arithmetic() {
        let cfg = RandomCmdpConfig {
            n_states: 5,
            n_actions: 2,
            connectivity: 2,
            ..Default::default()
        };
        let m = generate_random_cmdp(5, &cfg).unwrap();
        let uni = make_behavior_policy(&m, 0.0).unwrap();
        assert_eq!(uni, Policy::uniform(5, 2));
        let star = make_behavior_policy(&m, 1.0).unwrap();
        assert!(star.probs().iter().all(|&p| p == 0.0 || p == 1.0));
        let half = make_behavior_policy(&m, 0.5).unwrap();
        for s in 0..5 {
            let best = star.greedy_actions()[s];
            for a in 0..2 {
                let expect = if a == best { 0.75 } else { 0.25 };
                assert_eq!(half.prob(s, a), expect);
            }
        }
        assert!(make_behavior_policy(&m, 1.5).is_err());
    }

    fn tiny() -> TabularCmdp {
        generate_random_cmdp(
            9,
            &RandomCmdpConfig {
                n_states: 4,
                n_actions: 2,
                connectivity: 2,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn horizon_one_starts_from_p0() {
        let m = tiny();
        let ds = sample_dataset(&m, &Policy::uniform(4, 2), 25, 1, 1).unwrap();
        assert!(ds.trajectories.iter().all(|t| t.len() == 1 && t[0].s == 0));
    }

    #[test]
    fn counting_identity() {
        let m = tiny();
        let ds = sample_dataset(&m, &Policy::uniform(4, 2), 7, 13, 2).unwrap();
        let n = visit_counts(&ds);
        assert_eq!(n.total(), 7 * 13);
        assert_eq!(visit_counts(&Dataset::empty(4, 2)).total(), 0);
    }

    #[test]
    fn repeated_pair_counts() {
        let tr = Transition {
            s: 0,
            a: 1,
            r: 0.0,
            c: 0.0,
            s_next: 0,
        };
        let ds = Dataset {
            trajectories: vec![vec![tr; 3]],
            horizon: 3,
            source_seed: 0,
            n_states: 2,
            n_actions: 2,
        };
        let n = visit_counts(&ds);
        assert_eq!(n.get(0, 1), 3);
        let mle = mle_estimate(&ds).unwrap();
        assert_eq!(mle.next(0, 1), &[1.0, 0.0]);
        assert!(!mle.is_observed(1, 0));
        assert_eq!(mle.next(1, 0), &[0.0, 1.0]);
        assert!((mle.d_data().sum() - 1.0).abs() < 1e-12);
        assert!(mle_estimate(&Dataset::empty(2, 2)).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = tiny();
        let ds = sample_dataset(&m, &Policy::uniform(4, 2), 3, 5, 3).unwrap();
        let text = write_tabular_csv(&ds);
        let back = read_tabular_csv(&text, Some(4), Some(2)).unwrap();
        assert_eq!(back.trajectories, ds.trajectories);

        let bad = format!("{TABULAR_HEADER}\n0,0,1,0,0.0,0.0,2\n0,1,1,x,0,0,1\n");
        match read_tabular_csv(&bad, None, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
