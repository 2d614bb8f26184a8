//! `spdice`: generate CMDPs and datasets, rescale costs by data sparsity,
//! solve, sweep and export visualization data.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
//! Every failure prints a single line starting with `spdice: `.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdice::cmdp::{
    policy_evaluation, policy_from_occupancy, solve_constrained_lp, Dynamics, Policy, TabularCmdp,
};
use spdice::datagen::{
    empirical_reward_cost, generate_random_cmdp, mle_estimate, read_tabular_csv, sample_dataset,
    visit_counts, write_tabular_csv, Dataset, RandomCmdpConfig,
};
use spdice::dice::{extract_policy, solve_coptidice, write_trace_csv, SolverConfig};
use spdice::format::{fmt_real, read_cmdp, write_cmdp};
use spdice::harness::{
    aggregate, behavior_policy, estimation_error_report, is_violation, run_sweep_on,
    tune_constant_alpha, write_aggregate_csv, write_error_grid_csv, write_results_csv,
    ExperimentSpec, Method, Preset, DEFAULT_CONSTANT_GRID,
};
use spdice::rng::derive_seed;
use spdice::sparsity::{
    constant_penalty, penalize_table, preprocess_continuous, read_continuous_csv, tabular_penalty,
    write_centroids_csv, write_clusters_csv, write_continuous_csv, PreprocessConfig,
    TabularPenalty,
};

use config::{parse_config, List, Resolver};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(spdice::error::Error),
    Io(PathBuf, std::io::Error),
}

impl From<spdice::error::Error> for CliError {
    fn from(e: spdice::error::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    fn line(&self) -> String {
        use spdice::error::Error as E;
        let one_line = |s: String| s.replace('\n', " ");
        match self {
            CliError::Usage(msg) => format!("spdice: usage: {}", one_line(msg.clone())),
            CliError::Io(path, e) => format!("spdice: error[io]: {}: {e}", path.display()),
            CliError::Runtime(e) => {
                let kind = match e {
                    E::NonConvergence { .. } => "nonconvergence",
                    E::CostInfeasible(_) | E::SupportInfeasible(_) => "infeasible",
                    E::Parse { .. } => "parse",
                    E::Io(_) => "io",
                    E::Singular(_) => "singular",
                    _ => "invalid",
                };
                format!("spdice: error[{kind}]: {}", one_line(e.to_string()))
            }
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "spdice",
    version,
    about = "Sparsity-aware offline constrained RL on tabular CMDPs"
)]
struct Cli {
    /// Root seed; every stage draws from a named sub-stream of it [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Key-value config file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Progress messages on stderr (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random CMDP (cmdp.txt)
    GenCmdp(CmdpArgs),
    /// Sample an offline dataset (dataset.csv)
    GenData(GenDataArgs),
    /// Rescale dataset costs by a sparsity penalty
    Penalize(PenalizeArgs),
    /// Solve one method on one dataset (solution.txt, policy.csv, trace.csv)
    Solve(SolveArgs),
    /// Seed x dataset-size sweep (results.csv, aggregate.csv)
    Sweep(SweepArgs),
    /// Per-pair true versus estimated cost contributions (error_grid.csv)
    ErrorGrid(ErrorGridArgs),
    /// Cluster a continuous dataset (clusters.csv, centroids.csv)
    ExportViz(VizArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct CmdpArgs {
    /// Number of states [default: 50]
    #[arg(long)]
    n_states: Option<usize>,
    /// Number of actions [default: 4]
    #[arg(long)]
    n_actions: Option<usize>,
    /// Successors per state-action pair [default: 4]
    #[arg(long)]
    connectivity: Option<usize>,
    /// Cost threshold, `inf` for none [default: 0.1]
    #[arg(long)]
    threshold: Option<f64>,
    /// Discount factor in (0, 1) [default: 0.95]
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct SourceArgs {
    /// CMDP file from gen-cmdp; generated from the seed when absent
    #[arg(long)]
    cmdp: Option<PathBuf>,
    /// Tabular dataset from gen-data; sampled from the seed when absent
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    cmdp_args: CmdpArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct DataArgs {
    /// Number of trajectories [default: 100]
    #[arg(long)]
    trajectories: Option<usize>,
    /// Steps per trajectory [default: 50]
    #[arg(long)]
    horizon: Option<usize>,
    /// Weight of the preset policy against uniform, in [0, 1] [default: 0.7]
    #[arg(long)]
    optimality: Option<f64>,
    /// cost-violating or cost-satisfying [default: cost-violating]
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct SolverArgs {
    /// Divergence weight of the solver [default: 0.01]
    #[arg(long)]
    alpha_reg: Option<f64>,
    /// Residual tolerance [default: 1e-5]
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap [default: 50000]
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// CMDP file; generated from the seed when absent
    #[arg(long)]
    cmdp: Option<PathBuf>,
    #[command(flatten)]
    cmdp_args: CmdpArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct PenalizeArgs {
    /// Treat --input as a continuous-state dataset and cluster it
    #[arg(long, conflicts_with = "cmdp")]
    continuous: bool,
    #[command(flatten)]
    source: SourceArgs,
    /// Penalty multiplier [default: 2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of clusters (continuous) [default: 50]
    #[arg(long)]
    k: Option<usize>,
    /// Softmax batch length (continuous) [default: 1024]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Apply max(penalty, 1) (continuous)
    #[arg(long)]
    clamp_min_one: bool,
    /// Keep the unpenalized cost in a c_orig column
    #[arg(long)]
    keep_original: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// lp_oracle, behavior, coptidice_naive, sp_cdice or constant_penalty [default: sp_cdice]
    #[arg(long)]
    method: Option<String>,
    /// Penalty multiplier [default: 2 for sp_cdice, 10 for constant_penalty]
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cmdp_args: CmdpArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of dataset seeds [default: 10]
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated trajectory counts [default: 10,50,100,500,1000]
    #[arg(long)]
    trajectories: Option<String>,
    /// Steps per trajectory [default: 50]
    #[arg(long)]
    horizon: Option<usize>,
    /// Weight of the preset policy against uniform [default: 0.7]
    #[arg(long)]
    optimality: Option<f64>,
    /// cost-violating or cost-satisfying [default: cost-violating]
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated methods [default: all]
    #[arg(long)]
    method: Option<String>,
    /// Count-penalty multiplier of sp_cdice [default: 2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Constant-penalty multiplier, or `auto` to tune for zero violations [default: auto]
    #[arg(long)]
    constant_alpha: Option<String>,
    /// Record wall-clock time per cell (makes results.csv run-dependent)
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct ErrorGridArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Multiplier of the reported count penalty [default: 2]
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct VizArgs {
    /// Continuous-state dataset
    #[arg(long)]
    input: PathBuf,
    /// Number of clusters [default: 50]
    #[arg(long)]
    k: Option<usize>,
    /// Softmax batch length [default: 1024]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Apply max(penalty, 1)
    #[arg(long)]
    clamp_min_one: bool,
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    verbose: u8,
    res: Resolver,
    written: Vec<PathBuf>,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("spdice: {}", msg.as_ref());
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        self.written.push(path);
        Ok(())
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn check(cond: bool, msg: &str) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.to_string()))
    }
}

fn parse_with<T, E: std::fmt::Display>(
    key: &str,
    text: Option<String>,
    parse: impl Fn(&str) -> Result<T, E>,
) -> CliResult<Option<T>> {
    text.map(|t| parse(&t).map_err(|e| CliError::Usage(format!("--{key}: {e}"))))
        .transpose()
}

fn resolve_cmdp_config(ctx: &mut Ctx, a: &CmdpArgs) -> CliResult<RandomCmdpConfig> {
    let d = RandomCmdpConfig::default();
    let config = RandomCmdpConfig {
        n_states: ctx.res.get("n-states", a.n_states, d.n_states)?,
        n_actions: ctx.res.get("n-actions", a.n_actions, d.n_actions)?,
        connectivity: ctx
            .res
            .get("connectivity", a.connectivity, d.connectivity)?,
        cost_threshold: ctx.res.get("threshold", a.threshold, d.cost_threshold)?,
        gamma: ctx.res.get("gamma", a.gamma, d.gamma)?,
        ..d
    };
    check(
        config.n_states >= 1 && config.n_actions >= 1,
        "--n-states and --n-actions must be >= 1",
    )?;
    check(
        (1..=config.n_states).contains(&config.connectivity),
        "--connectivity must be in 1..=n-states",
    )?;
    check(
        config.gamma > 0.0 && config.gamma < 1.0,
        "--gamma must be in (0, 1)",
    )?;
    check(config.cost_threshold >= 0.0, "--threshold must be >= 0")?;
    Ok(config)
}

fn load_or_generate_cmdp(
    ctx: &mut Ctx,
    path: Option<&Path>,
    a: &CmdpArgs,
) -> CliResult<(TabularCmdp, bool)> {
    match path {
        Some(p) => {
            ctx.res.note("cmdp", p.display());
            let mut cmdp = read_cmdp(&read_file(p)?)?;
            if let Some(t) = ctx.res.optional("threshold", a.threshold)? {
                check(t >= 0.0, "--threshold must be >= 0")?;
                cmdp = cmdp.with_threshold(t)?;
            }
            Ok((cmdp, false))
        }
        None => {
            let config = resolve_cmdp_config(ctx, a)?;
            ctx.log("generating CMDP");
            Ok((
                generate_random_cmdp(derive_seed(ctx.seed, "cmdp"), &config)?,
                true,
            ))
        }
    }
}

fn resolve_preset(ctx: &mut Ctx, cli: Option<String>) -> CliResult<Preset> {
    let cli = parse_with("preset", cli, str::parse::<Preset>)?;
    ctx.res.get("preset", cli, Preset::CostViolating)
}

fn resolve_optimality(ctx: &mut Ctx, cli: Option<f64>) -> CliResult<f64> {
    let v = ctx.res.get("optimality", cli, 0.7)?;
    check((0.0..=1.0).contains(&v), "--optimality must be in [0, 1]")?;
    Ok(v)
}

fn resolve_horizon(ctx: &mut Ctx, cli: Option<usize>) -> CliResult<usize> {
    let v = ctx.res.get("horizon", cli, 50)?;
    check(v >= 1, "--horizon must be >= 1")?;
    Ok(v)
}

fn sample_from(ctx: &mut Ctx, cmdp: &TabularCmdp, a: &DataArgs) -> CliResult<(Dataset, Policy)> {
    let n = ctx.res.get("trajectories", a.trajectories, 100usize)?;
    check(n >= 1, "--trajectories must be >= 1")?;
    let horizon = resolve_horizon(ctx, a.horizon)?;
    let optimality = resolve_optimality(ctx, a.optimality)?;
    let preset = resolve_preset(ctx, a.preset.clone())?;
    let behavior = behavior_policy(cmdp, preset, optimality)?;
    ctx.log(format!("sampling {n} trajectories"));
    let data = sample_dataset(cmdp, &behavior, n, horizon, derive_seed(ctx.seed, "data"))?;
    Ok((data, behavior))
}

/// CMDP plus dataset, each read from disk or derived from the seed.
fn load_source(ctx: &mut Ctx, src: &SourceArgs) -> CliResult<(TabularCmdp, Dataset)> {
    let (cmdp, _) = load_or_generate_cmdp(ctx, src.cmdp.as_deref(), &src.cmdp_args)?;
    let data = match &src.input {
        Some(p) => {
            ctx.res.note("input", p.display());
            read_tabular_csv(
                &read_file(p)?,
                Some(cmdp.n_states()),
                Some(cmdp.n_actions()),
            )?
        }
        None => sample_from(ctx, &cmdp, &src.data)?.0,
    };
    Ok((cmdp, data))
}

fn resolve_solver(ctx: &mut Ctx, a: &SolverArgs) -> CliResult<SolverConfig> {
    let d = SolverConfig::default();
    let config = SolverConfig {
        alpha_reg: ctx.res.get("alpha-reg", a.alpha_reg, d.alpha_reg)?,
        tol: ctx.res.get("tol", a.tol, d.tol)?,
        max_iters: ctx.res.get("max-iters", a.max_iters, d.max_iters)?,
        ..d
    };
    check(
        config.alpha_reg > 0.0 && config.alpha_reg.is_finite(),
        "--alpha-reg must be positive",
    )?;
    check(config.tol > 0.0, "--tol must be positive")?;
    check(config.max_iters >= 1, "--max-iters must be >= 1")?;
    Ok(config)
}

fn resolve_alpha(ctx: &mut Ctx, cli: Option<f64>, default: f64) -> CliResult<f64> {
    let v = ctx.res.get("alpha", cli, default)?;
    check(v >= 0.0 && v.is_finite(), "--alpha must be finite and >= 0")?;
    Ok(v)
}

fn gen_cmdp(ctx: &mut Ctx, a: &CmdpArgs) -> CliResult<()> {
    let (cmdp, _) = load_or_generate_cmdp(ctx, None, a)?;
    ctx.write("cmdp.txt", &write_cmdp(&cmdp))
}

fn gen_data(ctx: &mut Ctx, a: &GenDataArgs) -> CliResult<()> {
    let (cmdp, generated) = load_or_generate_cmdp(ctx, a.cmdp.as_deref(), &a.cmdp_args)?;
    let (data, _) = sample_from(ctx, &cmdp, &a.data)?;
    if generated {
        ctx.write("cmdp.txt", &write_cmdp(&cmdp))?;
    }
    ctx.write("dataset.csv", &write_tabular_csv(&data))
}

fn penalty_csv(p: &TabularPenalty, counts: &spdice::datagen::VisitCounts) -> String {
    let mut out = String::from("s,a,count,penalty\n");
    for (s, a, w) in p.omega.indexed() {
        let _ = writeln!(out, "{s},{a},{},{}", counts.get(s, a), fmt_real(w));
    }
    out
}

fn penalized_tabular_csv(
    data: &Dataset,
    omega: &spdice::table::Table,
    keep_original: bool,
) -> String {
    let mut out = String::from("traj_id,t,s,a,r,c");
    if keep_original {
        out.push_str(",c_orig");
    }
    out.push_str(",s_next\n");
    for (i, traj) in data.trajectories.iter().enumerate() {
        for (t, tr) in traj.iter().enumerate() {
            let _ = write!(
                out,
                "{i},{t},{},{},{},{}",
                tr.s,
                tr.a,
                fmt_real(tr.r),
                fmt_real(tr.c * omega[(tr.s, tr.a)])
            );
            if keep_original {
                let _ = write!(out, ",{}", fmt_real(tr.c));
            }
            let _ = writeln!(out, ",{}", tr.s_next);
        }
    }
    out
}

fn resolve_clustering(
    ctx: &mut Ctx,
    k: Option<usize>,
    batch: Option<usize>,
    clamp: bool,
) -> CliResult<PreprocessConfig> {
    let k = ctx.res.get("k", k, 50usize)?;
    check(k >= 1, "--k must be >= 1")?;
    let batch_size = ctx.res.get("batch-size", batch, 1024usize)?;
    check(batch_size >= 1, "--batch-size must be >= 1")?;
    let clamp_min_one = ctx.res.flag("clamp-min-one", clamp)?;
    Ok(PreprocessConfig {
        batch_size,
        clamp_min_one,
        ..PreprocessConfig::new(k, derive_seed(ctx.seed, "kmeans"))
    })
}

fn penalize(ctx: &mut Ctx, a: &PenalizeArgs) -> CliResult<()> {
    let keep_original = ctx.res.flag("keep-original", a.keep_original)?;
    if a.continuous {
        let input = a
            .source
            .input
            .as_ref()
            .ok_or_else(|| CliError::Usage("--continuous requires --input".into()))?;
        ctx.res.note("input", input.display());
        ctx.res.note("continuous", true);
        let config = resolve_clustering(ctx, a.k, a.batch_size, a.clamp_min_one)?;
        let data = read_continuous_csv(&read_file(input)?)?;
        ctx.log(format!(
            "clustering {} states into {} clusters",
            data.rows.len(),
            config.k
        ));
        let out = preprocess_continuous(&data, &config)?;
        let original = keep_original.then_some(out.original_costs.as_slice());
        ctx.write(
            "penalized.csv",
            &write_continuous_csv(&out.penalized, original),
        )?;
        ctx.write("clusters.csv", &write_clusters_csv(&out, &data.states()))?;
        ctx.write("centroids.csv", &write_centroids_csv(&out))
    } else {
        let alpha = resolve_alpha(ctx, a.alpha, 2.0)?;
        let (_, data) = load_source(ctx, &a.source)?;
        let counts = visit_counts(&data);
        let p = tabular_penalty(&counts, alpha)?;
        ctx.write("penalty.csv", &penalty_csv(&p, &counts))?;
        ctx.write(
            "penalized.csv",
            &penalized_tabular_csv(&data, &p.omega, keep_original),
        )
    }
}

fn solve(ctx: &mut Ctx, a: &SolveArgs) -> CliResult<()> {
    let method = parse_with("method", a.method.clone(), str::parse::<Method>)?;
    let method = ctx.res.get("method", method, Method::SpCdice)?;
    let solver = SolverConfig {
        record_trace: true,
        ..resolve_solver(ctx, &a.solver)?
    };
    let (cmdp, data) = load_source(ctx, &a.source)?;

    let mut summary = format!("method = {method}\n");
    let policy = match method {
        Method::LpOracle => policy_from_occupancy(&solve_constrained_lp(&cmdp)?)?,
        Method::Behavior => {
            let mle = mle_estimate(&data)?;
            policy_from_occupancy(&spdice::cmdp::OccupancyMeasure::new(mle.d_data().clone())?)?
        }
        _ => {
            let mle = mle_estimate(&data)?;
            let (r, c) = empirical_reward_cost(&data);
            let cost = match method {
                Method::SpCdice => {
                    let alpha = resolve_alpha(ctx, a.alpha, 2.0)?;
                    penalize_table(&c, &tabular_penalty(&visit_counts(&data), alpha)?)?
                }
                Method::ConstantPenalty => {
                    let alpha = resolve_alpha(ctx, a.alpha, 10.0)?;
                    check(alpha > 0.0, "--alpha must be positive for constant_penalty")?;
                    penalize_table(&c, &constant_penalty(c.rows(), c.cols(), alpha)?)?
                }
                _ => c,
            };
            ctx.log("solving");
            let sol = solve_coptidice(
                &mle,
                &r,
                &cost,
                cmdp.p0(),
                cmdp.gamma(),
                cmdp.cost_threshold(),
                &solver,
            )?;
            for (k, v) in [
                ("est_return", sol.est_return),
                ("est_cost", sol.est_cost),
                ("lambda", sol.lambda_cost),
                ("flow_residual", sol.flow_residual),
                ("normalization_residual", sol.normalization_residual),
                ("divergence", sol.divergence),
                ("dual_objective", sol.dual_objective),
            ] {
                let _ = writeln!(summary, "{k} = {}", fmt_real(v));
            }
            let _ = writeln!(summary, "iterations = {}", sol.iterations);
            ctx.write("trace.csv", &write_trace_csv(&sol.trace))?;
            extract_policy(&sol, &mle)
        }
    };
    let eval = policy_evaluation(&cmdp, &policy)?;
    let _ = writeln!(
        summary,
        "true_return = {}",
        fmt_real(eval.normalized_return)
    );
    let _ = writeln!(summary, "true_cost = {}", fmt_real(eval.normalized_cost));
    let _ = writeln!(
        summary,
        "violated = {}",
        is_violation(eval.normalized_cost, cmdp.cost_threshold())
    );

    let mut pcsv = String::from("s,a,prob\n");
    for (s, act, p) in policy.probs().indexed() {
        let _ = writeln!(pcsv, "{s},{act},{}", fmt_real(p));
    }
    ctx.write("policy.csv", &pcsv)?;
    ctx.write("solution.txt", &summary)
}

fn sweep(ctx: &mut Ctx, a: &SweepArgs) -> CliResult<()> {
    let cmdp_config = resolve_cmdp_config(ctx, &a.cmdp_args)?;
    let solver = resolve_solver(ctx, &a.solver)?;
    let n_seeds = ctx.res.get("seeds", a.seeds, 10u64)?;
    check(n_seeds >= 1, "--seeds must be >= 1")?;
    let grid = parse_with(
        "trajectories",
        a.trajectories.clone(),
        str::parse::<List<usize>>,
    )?;
    let grid = ctx
        .res
        .get("trajectories", grid, List(vec![10, 50, 100, 500, 1000]))?;
    check(!grid.0.contains(&0), "--trajectories entries must be >= 1")?;
    let methods = parse_with("method", a.method.clone(), str::parse::<List<Method>>)?;
    let methods = ctx.res.get("method", methods, List(Method::ALL.to_vec()))?;
    let spec = ExperimentSpec {
        cmdp_seed: ctx.seed,
        cmdp: cmdp_config,
        dataset_seeds: (0..n_seeds).collect(),
        trajectory_grid: grid.0,
        horizon: resolve_horizon(ctx, a.horizon)?,
        optimality: resolve_optimality(ctx, a.optimality)?,
        methods: methods.0,
        alpha_tabular: resolve_alpha(ctx, a.alpha, 2.0)?,
        constant_alpha: 1.0,
        solver,
        preset: resolve_preset(ctx, a.preset.clone())?,
        record_timing: ctx.res.flag("timing", a.timing)?,
    };
    let cmdp = spec.build_cmdp()?;
    let constant = ctx.res.get(
        "constant-alpha",
        a.constant_alpha.clone(),
        "auto".to_string(),
    )?;
    let constant_alpha = if constant == "auto" {
        if spec.methods.contains(&Method::ConstantPenalty) {
            ctx.log("tuning the constant multiplier");
            let tuned = tune_constant_alpha(&spec, &cmdp, &DEFAULT_CONSTANT_GRID)?;
            ctx.res.note("constant-alpha-tuned", tuned);
            tuned
        } else {
            1.0
        }
    } else {
        let v: f64 = constant.parse().map_err(|_| {
            CliError::Usage(format!(
                "--constant-alpha: expected a number or auto, got {constant:?}"
            ))
        })?;
        check(
            v > 0.0 && v.is_finite(),
            "--constant-alpha must be positive",
        )?;
        v
    };
    ctx.log("running sweep");
    let rows = run_sweep_on(&spec, &cmdp, constant_alpha)?;
    ctx.write("cmdp.txt", &write_cmdp(&cmdp))?;
    ctx.write("results.csv", &write_results_csv(&rows))?;
    ctx.write("aggregate.csv", &write_aggregate_csv(&aggregate(&rows)))
}

fn error_grid(ctx: &mut Ctx, a: &ErrorGridArgs) -> CliResult<()> {
    let solver = resolve_solver(ctx, &a.solver)?;
    let alpha = resolve_alpha(ctx, a.alpha, 2.0)?;
    let mut src = a.source.clone();
    if src.input.is_none() && src.data.trajectories.is_none() {
        src.data.trajectories = Some(10);
    }
    let (cmdp, data) = load_source(ctx, &src)?;
    let cells = estimation_error_report(&cmdp, &data, alpha, &solver)?;
    ctx.write("error_grid.csv", &write_error_grid_csv(&cells))
}

fn export_viz(ctx: &mut Ctx, a: &VizArgs) -> CliResult<()> {
    ctx.res.note("input", a.input.display());
    let config = resolve_clustering(ctx, a.k, a.batch_size, a.clamp_min_one)?;
    let data = read_continuous_csv(&read_file(&a.input)?)?;
    let out = preprocess_continuous(&data, &config)?;
    ctx.write("clusters.csv", &write_clusters_csv(&out, &data.states()))?;
    ctx.write("centroids.csv", &write_centroids_csv(&out))
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let file = match &cli.config {
        Some(p) => parse_config(&read_file(p)?)?,
        None => Default::default(),
    };
    let mut res = Resolver::new(file);
    let seed = res.get("seed", cli.seed, 0u64)?;
    let out = res.get(
        "out",
        cli.out.map(|p| p.display().to_string()),
        "out".to_string(),
    )?;
    let out = PathBuf::from(out);
    fs::create_dir_all(&out).map_err(|e| CliError::Io(out.clone(), e))?;
    let mut ctx = Ctx {
        seed,
        out,
        verbose: cli.verbose,
        res,
        written: Vec::new(),
    };
    let name = match &cli.command {
        Command::GenCmdp(a) => {
            gen_cmdp(&mut ctx, a)?;
            "gen-cmdp"
        }
        Command::GenData(a) => {
            gen_data(&mut ctx, a)?;
            "gen-data"
        }
        Command::Penalize(a) => {
            penalize(&mut ctx, a)?;
            "penalize"
        }
        Command::Solve(a) => {
            solve(&mut ctx, a)?;
            "solve"
        }
        Command::Sweep(a) => {
            sweep(&mut ctx, a)?;
            "sweep"
        }
        Command::ErrorGrid(a) => {
            error_grid(&mut ctx, a)?;
            "error-grid"
        }
        Command::ExportViz(a) => {
            export_viz(&mut ctx, a)?;
            "export-viz"
        }
    };
    let resolved = ctx.res.render(name);
    ctx.write("config_resolved.txt", &resolved)?;
    Ok(ctx.written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("spdice: usage: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}
