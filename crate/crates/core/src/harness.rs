//! Seed x dataset-size sweeps over the solver variants, scored by exact
//! evaluation on the generating CMDP.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::cmdp::{
    occupancy_from_policy, occupancy_under, policy_evaluation, policy_from_occupancy,
    solve_constrained_lp, Policy, TabularCmdp,
};
use crate::datagen::{
    empirical_reward_cost, generate_random_cmdp, make_behavior_policy,
    make_constrained_behavior_policy, mle_estimate, sample_dataset, visit_counts, Dataset,
    RandomCmdpConfig,
};
use crate::dice::{extract_policy, solve_coptidice, SolverConfig};
use crate::error::{Error, Result};
use crate::format::fmt_real;
use crate::rng::{derive_indexed, derive_seed};
use crate::sparsity::{constant_penalty, penalize_table, tabular_penalty};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    LpOracle,
    Behavior,
    CoptidiceNaive,
    SpCdice,
    ConstantPenalty,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LpOracle,
        Method::Behavior,
        Method::CoptidiceNaive,
        Method::SpCdice,
        Method::ConstantPenalty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::LpOracle => "lp_oracle",
            Method::Behavior => "behavior",
            Method::CoptidiceNaive => "coptidice_naive",
            Method::SpCdice => "sp_cdice",
            Method::ConstantPenalty => "constant_penalty",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which policy generates the offline data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Constrained-LP policy mixed with uniform.
    CostSatisfying,
    /// Reward-optimal policy mixed with uniform.
    CostViolating,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::CostSatisfying => "cost_satisfying",
            Preset::CostViolating => "cost_violating",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "cost_satisfying" => Ok(Preset::CostSatisfying),
            "cost_violating" => Ok(Preset::CostViolating),
            _ => Err(Error::InvalidArgument(format!("unknown preset {s:?}"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn behavior_policy(cmdp: &TabularCmdp, preset: Preset, optimality: f64) -> Result<Policy> {
    match preset {
        Preset::CostSatisfying => make_constrained_behavior_policy(cmdp, optimality),
        Preset::CostViolating => make_behavior_policy(cmdp, optimality),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub cmdp_seed: u64,
    pub cmdp: RandomCmdpConfig,
    pub dataset_seeds: Vec<u64>,
    pub trajectory_grid: Vec<usize>,
    pub horizon: usize,
    pub optimality: f64,
    pub methods: Vec<Method>,
    pub alpha_tabular: f64,
    pub constant_alpha: f64,
    pub solver: SolverConfig,
    pub preset: Preset,
    /// Fill `wall_time_ms`; off by default so results are byte-reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            cmdp_seed: 0,
            cmdp: RandomCmdpConfig::default(),
            dataset_seeds: (0..10).collect(),
            trajectory_grid: vec![10, 50, 100, 500, 1000],
            horizon: 50,
            optimality: 0.7,
            methods: Method::ALL.to_vec(),
            alpha_tabular: 2.0,
            constant_alpha: 10.0,
            solver: SolverConfig::default(),
            preset: Preset::CostViolating,
            record_timing: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dataset_seeds.is_empty()
            || self.trajectory_grid.is_empty()
            || self.methods.is_empty()
        {
            return Err(Error::InvalidArgument(
                "seeds, trajectory grid and methods must be non-empty".into(),
            ));
        }
        if self.trajectory_grid.contains(&0) || self.horizon == 0 {
            return Err(Error::InvalidArgument(
                "trajectory counts and horizon must be >= 1".into(),
            ));
        }
        if !(self.alpha_tabular >= 0.0) || !(self.constant_alpha > 0.0) {
            return Err(Error::InvalidArgument(
                "penalty multipliers out of range".into(),
            ));
        }
        self.solver.validate()
    }

    pub fn build_cmdp(&self) -> Result<TabularCmdp> {
        generate_random_cmdp(derive_seed(self.cmdp_seed, "cmdp"), &self.cmdp)
    }

    /// Seed of the dataset drawn for `(dataset_seed, n_trajectories)`.
    pub fn data_seed(&self, dataset_seed: u64, n_trajectories: usize) -> u64 {
        let per_seed = derive_indexed(self.cmdp_seed, "data", dataset_seed);
        derive_indexed(per_seed, "trajectories", n_trajectories as u64)
    }
}

/// Slack on `true_cost > threshold`, absorbing round-off in exact evaluation.
pub const VIOLATION_TOL: f64 = 1e-9;

pub fn is_violation(true_cost: f64, threshold: f64) -> bool {
    true_cost > threshold + VIOLATION_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub n_trajectories: usize,
    pub true_return: f64,
    pub true_cost: f64,
    pub est_return: f64,
    pub est_cost: f64,
    pub violated: bool,
    pub wall_time_ms: f64,
    /// `ok`, or the failure class of a flagged row.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn status_of(err: &Error) -> &'static str {
    match err {
        Error::NonConvergence { .. } => "nonconvergence",
        Error::CostInfeasible(_) => "cost_infeasible",
        Error::SupportInfeasible(_) => "support_infeasible",
        _ => "error",
    }
}

struct Outcome {
    true_eval: (f64, f64),
    est: (f64, f64),
}

fn run_method(
    method: Method,
    spec: &ExperimentSpec,
    cmdp: &TabularCmdp,
    behavior: &Policy,
    lp_policy: &Policy,
    dataset: &Dataset,
    cost_alpha: f64,
) -> Result<Outcome> {
    let eval = |pi: &Policy| -> Result<(f64, f64)> {
        let e = policy_evaluation(cmdp, pi)?;
        Ok((e.normalized_return, e.normalized_cost))
    };
    match method {
        Method::LpOracle => {
            let t = eval(lp_policy)?;
            Ok(Outcome {
                true_eval: t,
                est: t,
            })
        }
        Method::Behavior => {
            let mle = mle_estimate(dataset)?;
            let (r, c) = empirical_reward_cost(dataset);
            Ok(Outcome {
                true_eval: eval(behavior)?,
                est: (mle.d_data().dot(&r), mle.d_data().dot(&c)),
            })
        }
        Method::CoptidiceNaive | Method::SpCdice | Method::ConstantPenalty => {
            let mle = mle_estimate(dataset)?;
            let (r, c) = empirical_reward_cost(dataset);
            let cost = match method {
                Method::SpCdice => penalize_table(
                    &c,
                    &tabular_penalty(&visit_counts(dataset), spec.alpha_tabular)?,
                )?,
                Method::ConstantPenalty => {
                    penalize_table(&c, &constant_penalty(c.rows(), c.cols(), cost_alpha)?)?
                }
                _ => c,
            };
            let sol = solve_coptidice(
                &mle,
                &r,
                &cost,
                cmdp.p0(),
                cmdp.gamma(),
                cmdp.cost_threshold(),
                &spec.solver,
            )?;
            let pi = extract_policy(&sol, &mle);
            Ok(Outcome {
                true_eval: eval(&pi)?,
                est: (sol.est_return, sol.est_cost),
            })
        }
    }
}

/// Runs every `(seed, N, method)` cell. Rows are ordered by method, then
/// trajectory count, then seed, whatever the degree of parallelism.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cmdp = spec.build_cmdp()?;
    run_sweep_on(spec, &cmdp, spec.constant_alpha)
}

/// [`run_sweep`] on a given CMDP with an explicit constant multiplier.
pub fn run_sweep_on(
    spec: &ExperimentSpec,
    cmdp: &TabularCmdp,
    constant_alpha: f64,
) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let behavior = behavior_policy(cmdp, spec.preset, spec.optimality)?;
    let lp_policy = policy_from_occupancy(&solve_constrained_lp(cmdp)?)?;
    let threshold = cmdp.cost_threshold();

    let cells: Vec<(u64, usize)> = spec
        .dataset_seeds
        .iter()
        .flat_map(|&seed| spec.trajectory_grid.iter().map(move |&n| (seed, n)))
        .collect();

    let mut rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(seed, n)| -> Result<Vec<ResultRow>> {
            let dataset =
                sample_dataset(cmdp, &behavior, n, spec.horizon, spec.data_seed(seed, n))?;
            let mut out = Vec::with_capacity(spec.methods.len());
            for &method in &spec.methods {
                let start = Instant::now();
                let outcome = run_method(
                    method,
                    spec,
                    cmdp,
                    &behavior,
                    &lp_policy,
                    &dataset,
                    constant_alpha,
                );
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                let wall_time_ms = if spec.record_timing { elapsed } else { 0.0 };
                out.push(match outcome {
                    Ok(o) => ResultRow {
                        method,
                        seed,
                        n_trajectories: n,
                        true_return: o.true_eval.0,
                        true_cost: o.true_eval.1,
                        est_return: o.est.0,
                        est_cost: o.est.1,
                        violated: is_violation(o.true_eval.1, threshold),
                        wall_time_ms,
                        status: "ok".into(),
                    },
                    Err(e) => ResultRow {
                        method,
                        seed,
                        n_trajectories: n,
                        true_return: f64::NAN,
                        true_cost: f64::NAN,
                        est_return: f64::NAN,
                        est_cost: f64::NAN,
                        violated: false,
                        wall_time_ms,
                        status: status_of(&e).into(),
                    },
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let order = |r: &ResultRow| {
        let pos = spec
            .methods
            .iter()
            .position(|&m| m == r.method)
            .unwrap_or(usize::MAX);
        let seed_pos = spec
            .dataset_seeds
            .iter()
            .position(|&s| s == r.seed)
            .unwrap_or(usize::MAX);
        (pos, r.n_trajectories, seed_pos)
    };
    rows.sort_by_key(order);
    Ok(rows)
}

/// Smallest multiplier from `grid` whose constant-penalty rows never violate
/// across the whole sweep; the largest grid value if none qualifies.
pub fn tune_constant_alpha(spec: &ExperimentSpec, cmdp: &TabularCmdp, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let probe = ExperimentSpec {
        methods: vec![Method::ConstantPenalty],
        ..spec.clone()
    };
    for &alpha in &sorted {
        let rows = run_sweep_on(&probe, cmdp, alpha)?;
        if rows.iter().all(|r| r.is_ok() && !r.violated) {
            return Ok(alpha);
        }
    }
    Ok(*sorted.last().expect("non-empty"))
}

pub const DEFAULT_CONSTANT_GRID: [f64; 6] = [1.25, 1.5, 2.0, 3.0, 5.0, 10.0];

pub const RESULTS_HEADER: &str =
    "method,seed,n_trajectories,true_return,true_cost,est_return,est_cost,violated,wall_time_ms,status";

pub fn write_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.n_trajectories,
            fmt_real(r.true_return),
            fmt_real(r.true_cost),
            fmt_real(r.est_return),
            fmt_real(r.est_cost),
            r.violated,
            fmt_real(r.wall_time_ms),
            r.status
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub n_trajectories: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub violation_rate: f64,
    /// Rows that contributed (flagged rows are excluded).
    pub count: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-(method, N) mean and population standard deviation over successful
/// rows, ordered by method then N.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.method, r.n_trajectories))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((method, n), members)| {
            let ok: Vec<&ResultRow> = members.into_iter().filter(|r| r.is_ok()).collect();
            let returns: Vec<f64> = ok.iter().map(|r| r.true_return).collect();
            let costs: Vec<f64> = ok.iter().map(|r| r.true_cost).collect();
            let (return_mean, return_std) = mean_std(&returns);
            let (cost_mean, cost_std) = mean_std(&costs);
            let violations = ok.iter().filter(|r| r.violated).count();
            AggregateRow {
                method,
                n_trajectories: n,
                return_mean,
                return_std,
                cost_mean,
                cost_std,
                violation_rate: if ok.is_empty() {
                    f64::NAN
                } else {
                    violations as f64 / ok.len() as f64
                },
                count: ok.len(),
            }
        })
        .collect()
}

pub const AGGREGATE_HEADER: &str =
    "method,n_trajectories,return_mean,return_std,cost_mean,cost_std,violation_rate";

pub fn write_aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.n_trajectories,
            fmt_real(r.return_mean),
            fmt_real(r.return_std),
            fmt_real(r.cost_mean),
            fmt_real(r.cost_std),
            fmt_real(r.violation_rate)
        );
    }
    out
}

/// One `(s, a)` cell of the true-vs-estimated cost comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCell {
    pub s: usize,
    pub a: usize,
    pub c_true_contrib: f64,
    pub c_est_contrib: f64,
    pub discrepancy: f64,
    pub penalty: f64,
    /// Among the ten largest `|discrepancy|`.
    pub top10: bool,
}

/// Per-pair cost contribution of the naive solver's policy under the true
/// model versus the estimated model, next to the count penalty.
pub fn estimation_error_report(
    cmdp: &TabularCmdp,
    dataset: &Dataset,
    alpha_tabular: f64,
    solver: &SolverConfig,
) -> Result<Vec<ErrorCell>> {
    let mle = mle_estimate(dataset)?;
    let (r, c_hat) = empirical_reward_cost(dataset);
    let sol = solve_coptidice(
        &mle,
        &r,
        &c_hat,
        cmdp.p0(),
        cmdp.gamma(),
        cmdp.cost_threshold(),
        solver,
    )?;
    let policy = extract_policy(&sol, &mle);
    let d_true = occupancy_from_policy(cmdp, &policy)?;
    let d_model = occupancy_under(&mle, cmdp.p0(), cmdp.gamma(), &policy)?;
    let penalty = tabular_penalty(&visit_counts(dataset), alpha_tabular)?;

    let true_contrib: Table = d_true.table().zip_map(cmdp.cost(), |d, c| d * c)?;
    let est_contrib: Table = d_model.table().zip_map(&c_hat, |d, c| d * c)?;
    let mut cells: Vec<ErrorCell> = true_contrib
        .indexed()
        .map(|(s, a, ct)| {
            let ce = est_contrib[(s, a)];
            ErrorCell {
                s,
                a,
                c_true_contrib: ct,
                c_est_contrib: ce,
                discrepancy: ct - ce,
                penalty: penalty.omega[(s, a)],
                top10: false,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&i, &j| {
        cells[j]
            .discrepancy
            .abs()
            .total_cmp(&cells[i].discrepancy.abs())
            .then(i.cmp(&j))
    });
    for &i in order.iter().take(10) {
        cells[i].top10 = true;
    }
    Ok(cells)
}

pub const ERROR_GRID_HEADER: &str = "s,a,c_true_contrib,c_est_contrib,discrepancy,penalty,top10";

pub fn write_error_grid_csv(cells: &[ErrorCell]) -> String {
    let mut out = String::from(ERROR_GRID_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.s,
            c.a,
            fmt_real(c.c_true_contrib),
            fmt_real(c.c_est_contrib),
            fmt_real(c.discrepancy),
            fmt_real(c.penalty),
            c.top10
        );
    }
    out
}
