//! Exact tabular constrained MDPs: policy evaluation, discounted occupancy
//! measures, and the occupancy-measure linear program used as the optimal
//! reference.
//!
//! All "normalized" quantities are discounted sums scaled by `(1 - gamma)`,
//! so a normalized return is the expectation of the reward under the
//! occupancy measure `d(s, a) = (1 - gamma) * sum_t gamma^t Pr(s_t = s, a_t = a)`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::table::Table;

const PROB_TOL: f64 = 1e-9;

/// Anything with tabular transition dynamics `T(s' | s, a)`.
pub trait Dynamics {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Successor distribution of `(s, a)`, indexed by next state.
    fn next(&self, s: usize, a: usize) -> &[f64];
}

/// Tabular constrained MDP with a single cost constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCmdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Table,
    cost: Table,
    p0: Vec<f64>,
    gamma: f64,
    cost_threshold: f64,
}

fn check_distribution(p: &[f64], what: impl Fn() -> String) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "{} has a negative or non-finite entry",
            what()
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!(
            "{} sums to {sum}, not 1",
            what()
        )));
    }
    Ok(())
}

impl TabularCmdp {
    /// Builds a CMDP, checking every structural invariant.
    ///
    /// `transition` is row-major `[state][action][next_state]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Table,
        cost: Table,
        p0: Vec<f64>,
        gamma: f64,
        cost_threshold: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel(
                "need at least one state and one action".into(),
            ));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Shape(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.shape() != (n_states, n_actions) || cost.shape() != (n_states, n_actions) {
            return Err(Error::Shape(
                "reward/cost must be n_states x n_actions".into(),
            ));
        }
        if p0.len() != n_states {
            return Err(Error::Shape(format!(
                "p0 has {} entries, expected {n_states}",
                p0.len()
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(cost_threshold >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "cost threshold must be >= 0, got {cost_threshold}"
            )));
        }
        if !reward.all_finite() || !cost.all_finite() {
            return Err(Error::InvalidModel(
                "reward/cost contain non-finite values".into(),
            ));
        }
        if cost.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidModel("costs must be non-negative".into()));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                check_distribution(&transition[base..base + n_states], || {
                    format!("transition[{s}][{a}]")
                })?;
            }
        }
        check_distribution(&p0, || "p0".to_string())?;
        Ok(TabularCmdp {
            n_states,
            n_actions,
            transition,
            reward,
            cost,
            p0,
            gamma,
            cost_threshold,
        })
    }

    pub fn reward(&self) -> &Table {
        &self.reward
    }

    pub fn cost(&self) -> &Table {
        &self.cost
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost_threshold(&self) -> f64 {
        self.cost_threshold
    }

    /// Row-major `[state][action][next_state]` transition tensor.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn with_cost(&self, cost: Table) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.reward.clone(),
            cost,
            self.p0.clone(),
            self.gamma,
            self.cost_threshold,
        )
    }

    pub fn with_reward(&self, reward: Table) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            reward,
            self.cost.clone(),
            self.p0.clone(),
            self.gamma,
            self.cost_threshold,
        )
    }

    pub fn with_threshold(&self, cost_threshold: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(cost_threshold >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "cost threshold must be >= 0, got {cost_threshold}"
            )));
        }
        out.cost_threshold = cost_threshold;
        Ok(out)
    }
}

impl Dynamics for TabularCmdp {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn next(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }
}

/// Stochastic policy `pi(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: Table,
}

impl Policy {
    pub fn new(probs: Table) -> Result<Self> {
        for s in 0..probs.rows() {
            check_distribution(probs.row(s), || format!("policy row {s}"))?;
        }
        Ok(Policy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            probs: Table::filled(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    /// One action per state, taken with probability one.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        if let Some(&bad) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::Shape(format!("action {bad} out of range")));
        }
        Ok(Policy {
            probs: Table::from_fn(actions.len(), n_actions, |s, a| {
                if actions[s] == a {
                    1.0
                } else {
                    0.0
                }
            }),
        })
    }

    pub fn probs(&self) -> &Table {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn n_states(&self) -> usize {
        self.probs.rows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.cols()
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Policy, weight: f64) -> Result<Policy> {
        let probs = self
            .probs
            .zip_map(&other.probs, |a, b| weight * a + (1.0 - weight) * b)?;
        Ok(Policy { probs })
    }

    /// Greedy action of each row; ties go to the lowest index.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.n_states())
            .map(|s| argmax(self.probs.row(s)))
            .collect()
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Discounted state-action occupancy `d(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    d: Table,
}

impl OccupancyMeasure {
    pub fn new(d: Table) -> Result<Self> {
        if d.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument(
                "occupancy entries must be non-negative".into(),
            ));
        }
        Ok(OccupancyMeasure { d })
    }

    pub fn table(&self) -> &Table {
        &self.d
    }

    pub fn total(&self) -> f64 {
        self.d.sum()
    }

    /// `sum_{s,a} d(s, a) f(s, a)`.
    pub fn expectation(&self, f: &Table) -> f64 {
        self.d.dot(f)
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        (0..self.d.rows())
            .map(|s| self.d.row(s).iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub normalized_return: f64,
    pub normalized_cost: f64,
}

fn check_policy_shape(dynamics: &impl Dynamics, policy: &Policy) -> Result<()> {
    if policy.n_states() != dynamics.n_states() || policy.n_actions() != dynamics.n_actions() {
        return Err(Error::Shape(format!(
            "policy is {}x{}, model is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            dynamics.n_states(),
            dynamics.n_actions()
        )));
    }
    Ok(())
}

/// `P_pi[s][s'] = sum_a pi(a|s) T(s'|s,a)`.
fn policy_transition(dynamics: &impl Dynamics, policy: &Policy) -> DMatrix<f64> {
    let n = dynamics.n_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in 0..dynamics.n_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (s2, &t) in dynamics.next(s, a).iter().enumerate() {
                p[(s, s2)] += w * t;
            }
        }
    }
    p
}

fn solve_dense(m: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    m.lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("I - gamma P_pi is singular".into()))
}

/// Unnormalized state values `V = (I - gamma P_pi)^-1 f_pi` for an arbitrary
/// per-pair signal `f`.
pub fn state_values(
    dynamics: &impl Dynamics,
    gamma: f64,
    policy: &Policy,
    signal: &Table,
) -> Result<Vec<f64>> {
    check_policy_shape(dynamics, policy)?;
    let n = dynamics.n_states();
    let p = policy_transition(dynamics, policy);
    let m = DMatrix::identity(n, n) - p * gamma;
    let f = DVector::from_fn(n, |s, _| {
        policy
            .probs()
            .row(s)
            .iter()
            .zip(signal.row(s))
            .map(|(w, r)| w * r)
            .sum()
    });
    Ok(solve_dense(m, f)?.iter().copied().collect())
}

/// Exact normalized return and cost of `policy`.
pub fn policy_evaluation(cmdp: &TabularCmdp, policy: &Policy) -> Result<EvalResult> {
    let scale = 1.0 - cmdp.gamma;
    let value = |signal: &Table| -> Result<f64> {
        let v = state_values(cmdp, cmdp.gamma, policy, signal)?;
        Ok(scale * v.iter().zip(&cmdp.p0).map(|(v, p)| v * p).sum::<f64>())
    };
    Ok(EvalResult {
        normalized_return: value(&cmdp.reward)?,
        normalized_cost: value(&cmdp.cost)?,
    })
}

/// Occupancy of `policy` under arbitrary dynamics and start distribution.
pub fn occupancy_under(
    dynamics: &impl Dynamics,
    p0: &[f64],
    gamma: f64,
    policy: &Policy,
) -> Result<OccupancyMeasure> {
    check_policy_shape(dynamics, policy)?;
    let n = dynamics.n_states();
    if p0.len() != n {
        return Err(Error::Shape("p0 length differs from n_states".into()));
    }
    let p = policy_transition(dynamics, policy);
    // x = (1 - gamma) (I - gamma P^T)^-1 p0
    let m = DMatrix::identity(n, n) - p.transpose() * gamma;
    let b = DVector::from_fn(n, |s, _| (1.0 - gamma) * p0[s]);
    let x = solve_dense(m, b)?;
    let d = Table::from_fn(n, dynamics.n_actions(), |s, a| {
        (policy.prob(s, a) * x[s]).max(0.0)
    });
    OccupancyMeasure::new(d)
}

/// Discounted occupancy `d^pi` of `policy` in `cmdp`.
pub fn occupancy_from_policy(cmdp: &TabularCmdp, policy: &Policy) -> Result<OccupancyMeasure> {
    occupancy_under(cmdp, &cmdp.p0, cmdp.gamma, policy)
}

/// `pi(a|s) = d(s,a) / sum_a d(s,a)`; rows without mass become uniform.
pub fn policy_from_occupancy(d: &OccupancyMeasure) -> Result<Policy> {
    let t = d.table();
    if t.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("negative occupancy entry".into()));
    }
    Ok(Policy {
        probs: normalize_rows(t),
    })
}

pub(crate) fn normalize_rows(t: &Table) -> Table {
    let mut out = t.clone();
    let n_actions = t.cols();
    for s in 0..t.rows() {
        let row = out.row_mut(s);
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            row.iter_mut().for_each(|x| *x /= mass);
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / n_actions as f64);
        }
    }
    out
}

/// Max-norm violation of the Bellman flow equations
/// `sum_a d(s',a) = (1-gamma) p0(s') + gamma sum_{s,a} T(s'|s,a) d(s,a)`.
pub fn flow_residual_under(dynamics: &impl Dynamics, p0: &[f64], gamma: f64, d: &Table) -> f64 {
    let n = dynamics.n_states();
    let mut balance: Vec<f64> = (0..n)
        .map(|s| d.row(s).iter().sum::<f64>() - (1.0 - gamma) * p0[s])
        .collect();
    for s in 0..n {
        for a in 0..dynamics.n_actions() {
            let mass = d[(s, a)];
            if mass == 0.0 {
                continue;
            }
            for (s2, &t) in dynamics.next(s, a).iter().enumerate() {
                balance[s2] -= gamma * t * mass;
            }
        }
    }
    balance.iter().fold(0.0, |m, b| m.max(b.abs()))
}

pub fn bellman_flow_residual(cmdp: &TabularCmdp, d: &OccupancyMeasure) -> f64 {
    flow_residual_under(cmdp, &cmdp.p0, cmdp.gamma, d.table())
}

/// Optimal occupancy of the constrained program
/// `max sum d R  s.t.  flow(d), d >= 0, sum d C <= threshold`.
///
/// An infinite threshold drops the cost row.
pub fn solve_constrained_lp(cmdp: &TabularCmdp) -> Result<OccupancyMeasure> {
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..ns * na)
        .map(|i| problem.add_var(cmdp.reward.as_slice()[i], (0.0, f64::INFINITY)))
        .collect();
    let var = |s: usize, a: usize| vars[s * na + a];

    // dense coefficient rows; minilp wants sorted, duplicate-free terms
    let mut rows = vec![vec![0.0; ns * na]; ns];
    for s in 0..ns {
        for a in 0..na {
            rows[s][s * na + a] += 1.0;
            for (s2, &t) in cmdp.next(s, a).iter().enumerate() {
                rows[s2][s * na + a] -= cmdp.gamma * t;
            }
        }
    }
    for (s2, row) in rows.iter().enumerate() {
        let terms: Vec<_> = row
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != 0.0)
            .map(|(i, &c)| (vars[i], c))
            .collect();
        problem.add_constraint(
            terms.as_slice(),
            ComparisonOp::Eq,
            (1.0 - cmdp.gamma) * cmdp.p0[s2],
        );
    }
    if cmdp.cost_threshold.is_finite() {
        let terms: Vec<_> = cmdp
            .cost
            .indexed()
            .filter(|&(_, _, c)| c != 0.0)
            .map(|(s, a, c)| (var(s, a), c))
            .collect();
        problem.add_constraint(terms.as_slice(), ComparisonOp::Le, cmdp.cost_threshold);
    }
    let solution = problem.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::CostInfeasible(format!(
            "no occupancy measure meets cost threshold {}",
            cmdp.cost_threshold
        )),
        minilp::Error::Unbounded => Error::InvalidModel("occupancy LP unbounded".into()),
    })?;
    let d = Table::from_fn(ns, na, |s, a| solution[var(s, a)].max(0.0));
    OccupancyMeasure::new(d)
}

/// Deterministic reward-optimal policy of the unconstrained MDP, found by
/// exact policy iteration. Ties go to the lowest action index.
pub fn optimal_policy(cmdp: &TabularCmdp) -> Result<Policy> {
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    let q_of = |v: &[f64], s: usize, a: usize| -> f64 {
        cmdp.reward[(s, a)]
            + cmdp.gamma
                * cmdp
                    .next(s, a)
                    .iter()
                    .zip(v)
                    .map(|(t, v)| t * v)
                    .sum::<f64>()
    };
    let mut actions: Vec<usize> = (0..ns).map(|s| argmax(cmdp.reward.row(s))).collect();
    // Policy iteration terminates in at most |A|^|S| steps; in practice a handful.
    for _ in 0..10_000 {
        let policy = Policy::deterministic(&actions, na)?;
        let v = state_values(cmdp, cmdp.gamma, &policy, &cmdp.reward)?;
        let mut changed = false;
        #[allow(clippy::needless_range_loop)]
        for s in 0..ns {
            let current = q_of(&v, s, actions[s]);
            let mut best = actions[s];
            let mut best_q = current;
            for a in 0..na {
                let q = q_of(&v, s, a);
                if q > best_q + 1e-12 * (1.0 + best_q.abs()) {
                    best = a;
                    best_q = q;
                }
            }
            if best != actions[s] {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            // canonical tie-breaking: lowest index among near-maximal actions
            for (s, act) in actions.iter_mut().enumerate() {
                let qs: Vec<f64> = (0..na).map(|a| q_of(&v, s, a)).collect();
                let top = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                *act = qs
                    .iter()
                    .position(|&q| q >= top - 1e-12 * (1.0 + top.abs()))
                    .unwrap_or(0);
            }
            return Policy::deterministic(&actions, na);
        }
    }
    Err(Error::NonConvergence {
        iterations: 10_000,
        flow_residual: f64::NAN,
        kkt_residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(reward: Vec<f64>, gamma: f64) -> TabularCmdp {
        let na = reward.len();
        TabularCmdp::new(
            1,
            na,
            vec![1.0; na],
            Table::from_vec(1, na, reward).unwrap(),
            Table::zeros(1, na),
            vec![1.0],
            gamma,
            0.1,
        )
        .unwrap()
    }

    fn two_state() -> TabularCmdp {
        // action 0 stays, action 1 swaps
        let t = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        TabularCmdp::new(
            2,
            2,
            t,
            Table::from_vec(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
            Table::from_vec(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
            vec![1.0, 0.0],
            0.9,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn constant_reward_single_state() {
        let m = single_state(vec![1.0, 1.0, 1.0], 0.7);
        let pi = Policy::new(Table::from_vec(1, 3, vec![0.2, 0.3, 0.5]).unwrap()).unwrap();
        let ev = policy_evaluation(&m, &pi).unwrap();
        assert!((ev.normalized_return - 1.0).abs() < 1e-12);
        assert_eq!(ev.normalized_cost, 0.0);
    }

    #[test]
    fn zero_reward_gives_zero_return() {
        let m = two_state().with_reward(Table::zeros(2, 2)).unwrap();
        let ev = policy_evaluation(&m, &Policy::uniform(2, 2)).unwrap();
        assert_eq!(ev.normalized_return, 0.0);
    }

    #[test]
    fn single_state_occupancy_is_policy() {
        let m = single_state(vec![0.3, 0.9], 0.5);
        let pi = Policy::new(Table::from_vec(1, 2, vec![0.25, 0.75]).unwrap()).unwrap();
        let d = occupancy_from_policy(&m, &pi).unwrap();
        assert!((d.table()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((d.table()[(0, 1)] - 0.75).abs() < 1e-15);
        assert_eq!(bellman_flow_residual(&m, &d), 0.0);
    }

    #[test]
    fn zero_occupancy_residual() {
        let m = two_state();
        let d = OccupancyMeasure::new(Table::zeros(2, 2)).unwrap();
        let r = bellman_flow_residual(&m, &d);
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn occupancy_extraction_edge_cases() {
        let mut t = Table::zeros(3, 2);
        t[(1, 1)] = 0.4;
        let pi = policy_from_occupancy(&OccupancyMeasure::new(t).unwrap()).unwrap();
        assert_eq!(pi.probs().row(1), &[0.0, 1.0]);
        assert_eq!(pi.probs().row(0), &[0.5, 0.5]);
        assert_eq!(pi.probs().row(2), &[0.5, 0.5]);

        let uni = OccupancyMeasure::new(Table::filled(2, 4, 0.125)).unwrap();
        assert_eq!(policy_from_occupancy(&uni).unwrap(), Policy::uniform(2, 4));

        assert!(OccupancyMeasure::new(Table::filled(1, 1, -1.0)).is_err());
    }

    #[test]
    fn lp_constant_reward() {
        let m = two_state().with_reward(Table::filled(2, 2, 0.4)).unwrap();
        let d = solve_constrained_lp(&m).unwrap();
        assert!((d.expectation(m.reward()) - 0.4).abs() < 1e-9);
    }

    #[test]
    fn lp_infeasible_threshold_is_reported() {
        // every action costs 1, so any occupancy has cost 1 > 0.5
        let m = two_state().with_cost(Table::filled(2, 2, 1.0)).unwrap();
        assert!(matches!(
            solve_constrained_lp(&m),
            Err(Error::CostInfeasible(_))
        ));
    }

    #[test]
    fn rejects_bad_models() {
        let bad_t = TabularCmdp::new(
            1,
            1,
            vec![0.5],
            Table::zeros(1, 1),
            Table::zeros(1, 1),
            vec![1.0],
            0.9,
            0.0,
        );
        assert!(matches!(bad_t, Err(Error::InvalidModel(_))));
        let bad_gamma = TabularCmdp::new(
            1,
            1,
            vec![1.0],
            Table::zeros(1, 1),
            Table::zeros(1, 1),
            vec![1.0],
            1.0,
            0.0,
        );
        assert!(bad_gamma.is_err());
        let pi = Policy::uniform(3, 2);
        assert!(matches!(
            policy_evaluation(&two_state(), &pi),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn optimal_policy_two_state() {
        // reward only in state 1: go there and stay
        let pi = optimal_policy(&two_state()).unwrap();
        assert_eq!(pi.greedy_actions(), vec![1, 0]);
    }
}
