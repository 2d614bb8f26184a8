//! Tabular constrained DICE with chi-square regularization.
//!
//! The primal program over correction ratios `w(s,a) = d(s,a) / d_D(s,a)`
//!
//! ```text
//! max  sum d_D w R - alpha * sum d_D f(w)          f(x) = (x - 1)^2 / 2
//! s.t. sum d_D w C <= threshold
//!      sum_a d(s',a) = (1-gamma) p0(s') + gamma sum_{s,a} T_hat(s'|s,a) d(s,a)
//!      sum d_D w = 1,  w >= 0
//! ```
//!
//! is solved through its dual in `(nu, lambda, mu)`. For fixed duals the
//! inner maximization is closed-form,
//! `w = max(0, 1 + (e - mu) / alpha)` with
//! `e(s,a) = R - lambda C + gamma sum_{s'} T_hat(s'|s,a) nu(s') - nu(s)`,
//! which makes the dual
//!
//! ```text
//! g = (1-gamma) p0 . nu + lambda threshold + mu + alpha/2 sum d_D (max(z,0)^2 - 1),
//! z = 1 + (e - mu) / alpha
//! ```
//!
//! convex and piecewise quadratic. It is minimized by projected Newton steps
//! (`lambda >= 0`) with an Armijo backtracking search, so the reported dual
//! objective `-g` never decreases between iterations.
//!
//! Only pairs observed in the data carry mass. Observed pairs whose estimated
//! successors include a state with no usable action are dropped first (their
//! flow could never be balanced), repeatedly until nothing changes.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::cmdp::{flow_residual_under, normalize_rows, Dynamics, OccupancyMeasure, Policy};
use crate::datagen::{Dataset, MleModel};
use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    ChiSquare,
}

impl Divergence {
    pub fn f(self, x: f64) -> f64 {
        match self {
            Divergence::ChiSquare => 0.5 * (x - 1.0) * (x - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the divergence from the data distribution.
    pub alpha_reg: f64,
    pub max_iters: usize,
    /// Initial step length of each line search.
    pub dual_step: f64,
    /// Stopping threshold on flow, normalization and complementarity residuals.
    pub tol: f64,
    pub divergence: Divergence,
    /// Keep one [`TraceRow`] per iteration.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha_reg: 0.01,
            max_iters: 50_000,
            dual_step: 1.0,
            tol: 1e-5,
            divergence: Divergence::ChiSquare,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_reg > 0.0 && self.alpha_reg.is_finite()) {
            return Err(Error::InvalidArgument("alpha_reg must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !(self.dual_step > 0.0) {
            return Err(Error::InvalidArgument("dual_step must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// One line of the convergence diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub dual_obj: f64,
    pub flow_residual: f64,
    pub lambda: f64,
    pub est_cost: f64,
    pub est_return: f64,
}

pub const TRACE_HEADER: &str = "iter,dual_obj,flow_residual,lambda,est_cost,est_return";

pub fn write_trace_csv(trace: &[TraceRow]) -> String {
    use crate::format::fmt_real;
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_real(r.dual_obj),
            fmt_real(r.flow_residual),
            fmt_real(r.lambda),
            fmt_real(r.est_cost),
            fmt_real(r.est_return)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiceSolution {
    /// Correction ratios; zero off the usable support.
    pub omega: Table,
    pub d_est: OccupancyMeasure,
    pub lambda_cost: f64,
    pub nu: Vec<f64>,
    pub mu_norm: f64,
    pub iterations: usize,
    pub flow_residual: f64,
    /// `|1 - sum d_D w|`.
    pub normalization_residual: f64,
    /// `sum d C` with the cost passed to the solver.
    pub est_cost: f64,
    pub est_return: f64,
    /// `sum d_D f(w)`.
    pub divergence: f64,
    pub dual_objective: f64,
    pub trace: Vec<TraceRow>,
}

struct Pair {
    s: usize,
    a: usize,
    weight: f64,
    reward: f64,
    cost: f64,
    succ: Vec<(usize, f64)>,
}

/// Observed pairs that can carry flow, after pruning dead ends.
fn usable_support(model: &MleModel, p0: &[f64]) -> Result<Vec<(usize, usize)>> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut usable: Vec<bool> = (0..ns * na)
        .map(|i| model.is_observed(i / na, i % na) && model.d_data().as_slice()[i] > 0.0)
        .collect();
    loop {
        let alive: Vec<bool> = (0..ns)
            .map(|s| (0..na).any(|a| usable[s * na + a]))
            .collect();
        let mut changed = false;
        for s in 0..ns {
            for a in 0..na {
                let i = s * na + a;
                if usable[i]
                    && model
                        .next(s, a)
                        .iter()
                        .enumerate()
                        .any(|(s2, &t)| t > 0.0 && !alive[s2])
                {
                    usable[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            if let Some(s) = (0..ns).find(|&s| p0[s] > 0.0 && !alive[s]) {
                return Err(Error::SupportInfeasible(format!(
                    "initial state {s} has no usable action in the data"
                )));
            }
            break;
        }
    }
    Ok((0..ns * na)
        .filter(|&i| usable[i])
        .map(|i| (i / na, i % na))
        .collect())
}

/// Smallest achievable `sum d C` over the usable flow polytope.
fn min_support_cost(pairs: &[Pair], ns: usize, p0: &[f64], gamma: f64) -> Result<f64> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = pairs
        .iter()
        .map(|p| problem.add_var(p.cost, (0.0, f64::INFINITY)))
        .collect();
    let mut rows = vec![vec![0.0; pairs.len()]; ns];
    for (j, p) in pairs.iter().enumerate() {
        rows[p.s][j] += 1.0;
        for &(s2, t) in &p.succ {
            rows[s2][j] -= gamma * t;
        }
    }
    for (s, row) in rows.iter().enumerate() {
        let terms: Vec<_> = row
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != 0.0)
            .map(|(j, &c)| (vars[j], c))
            .collect();
        if terms.is_empty() {
            continue;
        }
        problem.add_constraint(terms.as_slice(), ComparisonOp::Eq, (1.0 - gamma) * p0[s]);
    }
    match problem.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(_) => Err(Error::SupportInfeasible(
            "no occupancy on the data support satisfies the flow equations".into(),
        )),
    }
}

struct Dual<'a> {
    pairs: &'a [Pair],
    ns: usize,
    gamma: f64,
    alpha: f64,
    p0: &'a [f64],
    threshold: f64,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    z: Vec<f64>,
}

impl Dual<'_> {
    fn dim(&self) -> usize {
        self.ns + 2
    }

    fn lambda_idx(&self) -> usize {
        self.ns
    }

    fn mu_idx(&self) -> usize {
        self.ns + 1
    }

    fn z(&self, p: &Pair, x: &[f64]) -> f64 {
        let lambda = x[self.lambda_idx()];
        let mu = x[self.mu_idx()];
        let future: f64 = p.succ.iter().map(|&(s2, t)| t * x[s2]).sum();
        let e = p.reward - lambda * p.cost + self.gamma * future - x[p.s];
        1.0 + (e - mu) / self.alpha
    }

    fn eval(&self, x: &[f64]) -> Eval {
        let n = self.dim();
        let mut grad = vec![0.0; n];
        let mut value = x[self.mu_idx()];
        for s in 0..self.ns {
            grad[s] = (1.0 - self.gamma) * self.p0[s];
            value += grad[s] * x[s];
        }
        if self.threshold.is_finite() {
            grad[self.lambda_idx()] = self.threshold;
            value += self.threshold * x[self.lambda_idx()];
        }
        grad[self.mu_idx()] = 1.0;
        let mut z_all = Vec::with_capacity(self.pairs.len());
        for p in self.pairs {
            let z = self.z(p, x);
            z_all.push(z);
            let zp = z.max(0.0);
            value += 0.5 * self.alpha * p.weight * (zp * zp - 1.0);
            if zp > 0.0 {
                // gradient of alpha/2 w z+^2 is w z+ a_p
                let m = p.weight * zp;
                for &(s2, t) in &p.succ {
                    grad[s2] += m * self.gamma * t;
                }
                grad[p.s] -= m;
                grad[self.lambda_idx()] -= m * p.cost;
                grad[self.mu_idx()] -= m;
            }
        }
        Eval {
            value,
            grad,
            z: z_all,
        }
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut a: Vec<(usize, f64)> = Vec::with_capacity(8);
        for (p, &zp) in self.pairs.iter().zip(z) {
            if zp <= 0.0 {
                continue;
            }
            a.clear();
            for &(s2, t) in &p.succ {
                a.push((s2, self.gamma * t));
            }
            a.push((p.s, -1.0));
            a.push((self.lambda_idx(), -p.cost));
            a.push((self.mu_idx(), -1.0));
            let scale = p.weight / self.alpha;
            for &(i, ai) in &a {
                for &(j, aj) in &a {
                    h[(i, j)] += scale * ai * aj;
                }
            }
        }
        h
    }
}

struct Residuals {
    flow: f64,
    normalization: f64,
    complementarity: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.flow.max(self.normalization).max(self.complementarity)
    }
}

fn residuals(dual: &Dual<'_>, x: &[f64], grad: &[f64]) -> Residuals {
    let flow = grad[..dual.ns].iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let complementarity = if dual.threshold.is_finite() {
        // projected gradient of the bound lambda >= 0
        x[dual.lambda_idx()].min(grad[dual.lambda_idx()]).abs()
    } else {
        0.0
    };
    Residuals {
        flow,
        normalization: grad[dual.mu_idx()].abs(),
        complementarity,
    }
}

/// Solves the regularized constrained occupancy program on the data support.
///
/// `reward` and `cost` are `[state][action]` tables; pass penalized costs to
/// get the conservative variants. An infinite `cost_threshold` removes the
/// cost constraint.
pub fn solve_coptidice(
    model: &MleModel,
    reward: &Table,
    cost: &Table,
    p0: &[f64],
    gamma: f64,
    cost_threshold: f64,
    config: &SolverConfig,
) -> Result<DiceSolution> {
    config.validate()?;
    let (ns, na) = (model.n_states(), model.n_actions());
    if reward.shape() != (ns, na) || cost.shape() != (ns, na) || p0.len() != ns {
        return Err(Error::Shape("reward/cost/p0 do not match the model".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if !(cost_threshold >= 0.0) {
        return Err(Error::InvalidArgument("cost threshold must be >= 0".into()));
    }
    if model.d_data().sum() <= 0.0 {
        return Err(Error::InvalidArgument("empty data distribution".into()));
    }

    let pairs: Vec<Pair> = usable_support(model, p0)?
        .into_iter()
        .map(|(s, a)| Pair {
            s,
            a,
            weight: model.d_data()[(s, a)],
            reward: reward[(s, a)],
            cost: cost[(s, a)],
            succ: model
                .next(s, a)
                .iter()
                .enumerate()
                .filter(|&(_, &t)| t > 0.0)
                .map(|(s2, &t)| (s2, t))
                .collect(),
        })
        .collect();

    if cost_threshold.is_finite() {
        let floor = min_support_cost(&pairs, ns, p0, gamma)?;
        if floor > cost_threshold + 1e-12 {
            return Err(Error::CostInfeasible(format!(
                "smallest cost reachable on the data support is {floor:.6}, threshold is {cost_threshold}"
            )));
        }
    }

    let dual = Dual {
        pairs: &pairs,
        ns,
        gamma,
        alpha: config.alpha_reg,
        p0,
        threshold: cost_threshold,
    };
    let n = dual.dim();
    let li = dual.lambda_idx();
    let mut x = vec![0.0; n];
    let mut current = dual.eval(&x);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..config.max_iters {
        let res = residuals(&dual, &x, &current.grad);
        if config.record_trace {
            trace.push(trace_row(&dual, iter, &x, &current, res.flow));
        }
        if res.worst() <= config.tol {
            converged = true;
            iterations = iter;
            break;
        }
        iterations = iter + 1;

        // lambda is pinned when it sits on its bound and the gradient pushes outward
        let lambda_free = cost_threshold.is_finite() && !(x[li] <= 0.0 && current.grad[li] > 0.0);
        let free: Vec<usize> = (0..n).filter(|&i| i != li || lambda_free).collect();

        let direction = newton_direction(&dual, &current, &free);
        let accepted = direction
            .and_then(|d| line_search(&dual, &x, &current, &d, config.dual_step))
            .or_else(|| {
                let mut d = vec![0.0; n];
                for &i in &free {
                    d[i] = -current.grad[i];
                }
                let h = dual.hessian(&current.z);
                let curvature = (0..n).map(|i| h[(i, i)]).fold(1.0, f64::max);
                line_search(&dual, &x, &current, &d, 1.0 / curvature)
            });
        match accepted {
            Some((next_x, next_eval)) => {
                x = next_x;
                current = next_eval;
            }
            None => break,
        }
    }

    let res = residuals(&dual, &x, &current.grad);
    if !converged {
        if res.worst() <= config.tol {
            converged = true;
        } else {
            return Err(Error::NonConvergence {
                iterations,
                flow_residual: res.flow,
                kkt_residual: res.worst(),
            });
        }
    }
    debug_assert!(converged);

    let mut omega = Table::zeros(ns, na);
    for (p, &z) in pairs.iter().zip(&current.z) {
        omega[(p.s, p.a)] = z.max(0.0);
    }
    let d = omega.zip_map(model.d_data(), |w, dd| w * dd)?;
    let d_est = OccupancyMeasure::new(d)?;
    let divergence = pairs
        .iter()
        .map(|p| p.weight * config.divergence.f(omega[(p.s, p.a)]))
        .sum();
    Ok(DiceSolution {
        flow_residual: flow_residual_under(model, p0, gamma, d_est.table()),
        normalization_residual: (1.0 - d_est.total()).abs(),
        est_cost: d_est.expectation(cost),
        est_return: d_est.expectation(reward),
        omega,
        d_est,
        lambda_cost: x[li],
        nu: x[..ns].to_vec(),
        mu_norm: x[dual.mu_idx()],
        iterations,
        divergence,
        dual_objective: -current.value,
        trace,
    })
}

fn trace_row(dual: &Dual<'_>, iter: usize, x: &[f64], eval: &Eval, flow: f64) -> TraceRow {
    let (mut cost, mut ret) = (0.0, 0.0);
    for (p, &z) in dual.pairs.iter().zip(&eval.z) {
        let d = p.weight * z.max(0.0);
        cost += d * p.cost;
        ret += d * p.reward;
    }
    TraceRow {
        iter,
        dual_obj: -eval.value,
        flow_residual: flow,
        lambda: x[dual.lambda_idx()],
        est_cost: cost,
        est_return: ret,
    }
}

fn newton_direction(dual: &Dual<'_>, eval: &Eval, free: &[usize]) -> Option<Vec<f64>> {
    let h = dual.hessian(&eval.z);
    let k = free.len();
    let scale = free
        .iter()
        .map(|&i| h[(i, i)])
        .fold(0.0, f64::max)
        .max(1e-300);
    let ridge = 1e-10 * scale;
    let sub = DMatrix::from_fn(k, k, |r, c| {
        h[(free[r], free[c])] + if r == c { ridge } else { 0.0 }
    });
    let rhs = DVector::from_fn(k, |r, _| -eval.grad[free[r]]);
    let step = match sub.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => sub.lu().solve(&rhs)?,
    };
    if step.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut d = vec![0.0; dual.dim()];
    for (r, &i) in free.iter().enumerate() {
        d[i] = step[r];
    }
    Some(d)
}

/// Armijo backtracking along `x + t d`, projecting `lambda` onto `>= 0`.
fn line_search(
    dual: &Dual<'_>,
    x: &[f64],
    current: &Eval,
    d: &[f64],
    t0: f64,
) -> Option<(Vec<f64>, Eval)> {
    const ARMIJO: f64 = 1e-4;
    let li = dual.lambda_idx();
    let mut t = t0;
    for _ in 0..60 {
        let mut cand: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        cand[li] = cand[li].max(0.0);
        let decrease: f64 = current
            .grad
            .iter()
            .zip(cand.iter().zip(x))
            .map(|(g, (c, xi))| g * (c - xi))
            .sum();
        if decrease < 0.0 {
            let eval = dual.eval(&cand);
            if eval.value <= current.value + ARMIJO * decrease {
                return Some((cand, eval));
            }
        }
        t *= 0.5;
    }
    None
}

/// `pi(a|s) ∝ d_D(s,a) w(s,a)`; rows without mass are uniform.
pub fn extract_policy(solution: &DiceSolution, model: &MleModel) -> Policy {
    let d = solution
        .omega
        .zip_map(model.d_data(), |w, dd| w * dd)
        .expect("solution and model share a shape");
    Policy::new(normalize_rows(&d)).expect("normalized rows are distributions")
}

/// Per-trajectory importance-weighted discounted returns, scaled by
/// `(1 - gamma)`.
pub fn trajectory_is_values(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
    gamma: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dataset.trajectories.len());
    for (i, traj) in dataset.trajectories.iter().enumerate() {
        let mut ratio = 1.0;
        let mut ret = 0.0;
        let mut discount = 1.0;
        for (t, tr) in traj.iter().enumerate() {
            let b = behavior.prob(tr.s, tr.a);
            if b <= 0.0 {
                return Err(Error::ZeroBehaviorProbability {
                    trajectory: i,
                    step: t,
                    state: tr.s,
                    action: tr.a,
                });
            }
            ratio *= target.prob(tr.s, tr.a) / b;
            ret += discount * tr.r;
            discount *= gamma;
        }
        out.push((1.0 - gamma) * ratio * ret);
    }
    Ok(out)
}

/// Trajectory-wise importance-sampling estimate of the normalized return.
pub fn trajectory_is_estimate(
    dataset: &Dataset,
    target: &Policy,
    behavior: &Policy,
    gamma: f64,
) -> Result<f64> {
    let values = trajectory_is_values(dataset, target, behavior, gamma)?;
    if values.is_empty() {
        return Ok(0.0);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::TabularCmdp;

    fn single_state(rewards: &[f64]) -> (TabularCmdp, MleModel) {
        let na = rewards.len();
        let m = TabularCmdp::new(
            1,
            na,
            vec![1.0; na],
            Table::from_vec(1, na, rewards.to_vec()).unwrap(),
            Table::zeros(1, na),
            vec![1.0],
            0.9,
            1.0,
        )
        .unwrap();
        let model = MleModel::from_parts(&m, Table::filled(1, na, 1.0 / na as f64)).unwrap();
        (m, model)
    }

    #[test]
    fn regularization_limits_single_state() {
        let (m, model) = single_state(&[0.0, 1.0, 0.5]);
        let big = SolverConfig {
            alpha_reg: 1e6,
            ..Default::default()
        };
        let sol = solve_coptidice(&model, m.reward(), m.cost(), m.p0(), 0.9, 1.0, &big).unwrap();
        for a in 0..3 {
            assert!((sol.omega[(0, a)] - 1.0).abs() < 1e-5, "{:?}", sol.omega);
        }
        let small = SolverConfig {
            alpha_reg: 1e-3,
            ..Default::default()
        };
        let sol = solve_coptidice(&model, m.reward(), m.cost(), m.p0(), 0.9, 1.0, &small).unwrap();
        let pi = extract_policy(&sol, &model);
        assert!(pi.prob(0, 1) > 0.999, "{:?}", pi);
    }

    #[test]
    fn unit_ratios_reproduce_behavior() {
        let (_, model) = single_state(&[0.0, 1.0]);
        let sol = DiceSolution {
            omega: Table::filled(1, 2, 1.0),
            d_est: OccupancyMeasure::new(Table::filled(1, 2, 0.5)).unwrap(),
            lambda_cost: 0.0,
            nu: vec![0.0],
            mu_norm: 0.0,
            iterations: 0,
            flow_residual: 0.0,
            normalization_residual: 0.0,
            est_cost: 0.0,
            est_return: 0.5,
            divergence: 0.0,
            dual_objective: 0.0,
            trace: Vec::new(),
        };
        assert_eq!(extract_policy(&sol, &model), Policy::uniform(1, 2));
        let mut one_hot = sol.clone();
        one_hot.omega = Table::from_vec(1, 2, vec![0.0, 2.0]).unwrap();
        assert_eq!(extract_policy(&one_hot, &model).probs().row(0), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let (m, model) = single_state(&[0.0, 1.0]);
        let cfg = SolverConfig {
            alpha_reg: 0.0,
            ..Default::default()
        };
        assert!(solve_coptidice(&model, m.reward(), m.cost(), m.p0(), 0.9, 1.0, &cfg).is_err());
    }

    #[test]
    fn cost_infeasible_is_reported() {
        let (m, model) = single_state(&[0.0, 1.0]);
        let cost = Table::filled(1, 2, 1.0);
        let res = solve_coptidice(
            &model,
            m.reward(),
            &cost,
            m.p0(),
            0.9,
            0.5,
            &Default::default(),
        );
        assert!(matches!(res, Err(Error::CostInfeasible(_))));
    }

    #[test]
    fn unsupported_start_state_is_reported() {
        // two states, data only in state 1, start in state 0
        let m = TabularCmdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            Table::zeros(2, 1),
            Table::zeros(2, 1),
            vec![1.0, 0.0],
            0.9,
            1.0,
        )
        .unwrap();
        let model =
            MleModel::from_parts(&m, Table::from_vec(2, 1, vec![0.0, 1.0]).unwrap()).unwrap();
        let res = solve_coptidice(
            &model,
            m.reward(),
            m.cost(),
            m.p0(),
            0.9,
            f64::INFINITY,
            &Default::default(),
        );
        assert!(matches!(res, Err(Error::SupportInfeasible(_))));
    }

    #[test]
    fn importance_sampling_zero_probability() {
        let ds = Dataset {
            trajectories: vec![vec![crate::datagen::Transition {
                s: 0,
                a: 1,
                r: 1.0,
                c: 0.0,
                s_next: 0,
            }]],
            horizon: 1,
            source_seed: 0,
            n_states: 1,
            n_actions: 2,
        };
        let behavior = Policy::deterministic(&[0], 2).unwrap();
        let err = trajectory_is_estimate(&ds, &Policy::uniform(1, 2), &behavior, 0.9);
        assert!(matches!(
            err,
            Err(Error::ZeroBehaviorProbability {
                trajectory: 0,
                step: 0,
                ..
            })
        ));
    }
}
