mod common;

use common::*;
use proptest::prelude::*;
use spdice::cmdp::*;
use spdice::datagen::*;
use spdice::dice::*;
use spdice::error::Error;
use spdice::sparsity::{penalize_table, tabular_penalty};

/// Exact model with full support: uniform-policy occupancy as data.
fn exact_model(m: &TabularCmdp) -> MleModel {
    let (ns, na) = (m.n_states(), m.n_actions());
    let d = occupancy_from_policy(m, &Policy::uniform(ns, na)).unwrap();
    MleModel::from_parts(m, d.table().clone()).unwrap()
}

fn solve(m: &TabularCmdp, model: &MleModel, alpha_reg: f64) -> Result<DiceSolution, Error> {
    let config = SolverConfig {
        alpha_reg,
        record_trace: true,
        ..Default::default()
    };
    solve_coptidice(
        model,
        m.reward(),
        m.cost(),
        m.p0(),
        m.gamma(),
        m.cost_threshold(),
        &config,
    )
}

fn check_residuals(sol: &DiceSolution, tol: f64) {
    assert!(sol.flow_residual <= tol, "flow {}", sol.flow_residual);
    assert!(sol.normalization_residual <= tol);
    assert!(sol.omega.iter().all(|&w| w >= 0.0));
    assert!((sol.d_est.total() - 1.0).abs() <= tol);
}

#[test]
fn approaches_the_lp_with_small_regularization() {
    for seed in 0..10 {
        let free = random_cmdp(seed, 3, 2, 0.9, f64::INFINITY);
        let costs: Vec<f64> = all_deterministic(3, 2)
            .iter()
            .map(|p| policy_evaluation(&free, p).unwrap().normalized_cost)
            .collect();
        let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = free.with_threshold(lo + 0.3 * (hi - lo)).unwrap();
        let model = exact_model(&m);
        let lp = solve_constrained_lp(&m).unwrap();
        let sol = solve(&m, &model, 1e-4).unwrap();
        check_residuals(&sol, 1e-5);
        assert!(sol.est_cost <= m.cost_threshold() + 1e-4);
        let lp_ret = lp.expectation(m.reward());
        assert!(
            (sol.est_return - lp_ret).abs() < 0.02 * lp_ret.abs().max(1e-3),
            "dice {} lp {lp_ret}",
            sol.est_return
        );
        // the occupancy is realized by the extracted policy on the true model
        let pi = extract_policy(&sol, &model);
        let e = policy_evaluation(&m, &pi).unwrap();
        assert!((e.normalized_return - sol.est_return).abs() < 1e-6);
        assert!((e.normalized_cost - sol.est_cost).abs() < 1e-6);
    }
}

#[test]
fn complementary_slackness() {
    for seed in 0..20 {
        let m = random_cmdp(seed, 4, 2, 0.9, 0.45);
        let model = exact_model(&m);
        match solve(&m, &model, 1e-2) {
            Ok(sol) => {
                check_residuals(&sol, 1e-5);
                assert!(sol.lambda_cost >= 0.0);
                if sol.lambda_cost > 1e-8 {
                    assert!((sol.est_cost - m.cost_threshold()).abs() < 1e-4);
                } else {
                    assert!(sol.est_cost <= m.cost_threshold() + 1e-4);
                }
            }
            Err(Error::CostInfeasible(_)) => {
                let min = all_deterministic(4, 2)
                    .iter()
                    .map(|p| policy_evaluation(&m, p).unwrap().normalized_cost)
                    .fold(f64::INFINITY, f64::min);
                assert!(min > m.cost_threshold());
            }
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn regularization_trades_return_for_divergence() {
    let m = random_cmdp(5, 4, 3, 0.9, 0.5);
    let model = exact_model(&m);
    let grid = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let sols: Vec<DiceSolution> = grid
        .iter()
        .map(|&a| solve(&m, &model, a).unwrap())
        .collect();
    for w in sols.windows(2) {
        assert!(w[1].divergence <= w[0].divergence + 1e-7);
        assert!(w[1].est_return <= w[0].est_return + 1e-7);
    }
    for s in &sols {
        check_residuals(s, 1e-5);
    }
}

#[test]
fn dual_objective_trace_is_monotone() {
    let m = random_cmdp(2, 5, 2, 0.95, 0.4);
    let sol = solve(&m, &exact_model(&m), 1e-2).unwrap();
    assert!(!sol.trace.is_empty());
    for w in sol.trace.windows(2) {
        assert!(w[1].dual_obj >= w[0].dual_obj - 1e-9 * w[0].dual_obj.abs().max(1.0));
    }
    let csv = write_trace_csv(&sol.trace);
    assert!(csv.starts_with(TRACE_HEADER));
    assert_eq!(csv.lines().count(), sol.trace.len() + 1);
}

#[test]
fn trajectory_is_matches_on_policy_average() {
    let m = random_cmdp(3, 2, 2, 0.5, 1.0);
    let pi = random_policy(4, 2, 2);
    let data = sample_dataset(&m, &pi, 500, 30, 1).unwrap();
    let est = trajectory_is_estimate(&data, &pi, &pi, m.gamma()).unwrap();
    let mc: f64 = data
        .trajectories
        .iter()
        .map(|traj| {
            let mut disc = 1.0;
            let mut ret = 0.0;
            for tr in traj {
                ret += disc * tr.r;
                disc *= m.gamma();
            }
            (1.0 - m.gamma()) * ret
        })
        .sum::<f64>()
        / data.trajectories.len() as f64;
    assert!((est - mc).abs() <= 1e-15 * mc.abs().max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn penalized_solutions_are_conservative(seed in 0u64..10_000, n in 5usize..60, alpha in 0.0f64..4.0) {
        let m = spdice::datagen::generate_random_cmdp(seed, &RandomCmdpConfig {
            n_states: 8, n_actions: 3, connectivity: 3, ..Default::default()
        }).unwrap();
        let pi = make_behavior_policy(&m, 0.5).unwrap();
        let data = sample_dataset(&m, &pi, n, 20, seed).unwrap();
        let mle = mle_estimate(&data).unwrap();
        let (r, c) = empirical_reward_cost(&data);
        let cp = penalize_table(&c, &tabular_penalty(&visit_counts(&data), alpha).unwrap()).unwrap();
        match solve_coptidice(&mle, &r, &cp, m.p0(), m.gamma(), m.cost_threshold(), &SolverConfig::default()) {
            Ok(sol) => {
                let original = sol.d_est.expectation(&c);
                let penalized = sol.d_est.expectation(&cp);
                prop_assert!(original <= penalized);
                prop_assert!((penalized - sol.est_cost).abs() < 1e-9);
                prop_assert!(sol.flow_residual <= 1e-5);
            }
            Err(Error::CostInfeasible(_)) | Err(Error::SupportInfeasible(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
