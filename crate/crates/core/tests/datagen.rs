mod common;

use common::*;
use proptest::prelude::*;
use spdice::cmdp::*;
use spdice::datagen::*;
use spdice::format::{read_cmdp, write_cmdp};
use spdice::table::Table;

#[test]
fn random_cmdp_structure() {
    let config = RandomCmdpConfig::default();
    for seed in 0..5 {
        let m = generate_random_cmdp(seed, &config).unwrap();
        assert_eq!((m.n_states(), m.n_actions()), (50, 4));
        assert_eq!(m.p0()[0], 1.0);
        for s in 0..50 {
            for a in 0..4 {
                let row = m.next(s, a);
                assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 4);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // reward sits on the least-visited state under the uniform policy
        let visits = occupancy_from_policy(&m, &Policy::uniform(50, 4))
            .unwrap()
            .state_marginal();
        let goal = (0..50)
            .min_by(|&i, &j| visits[i].total_cmp(&visits[j]).then(i.cmp(&j)))
            .unwrap();
        for s in 0..50 {
            for a in 0..4 {
                assert_eq!(m.reward()[(s, a)], if s == goal { 1.0 } else { 0.0 });
                if s == goal {
                    assert_eq!(m.cost()[(s, a)], 0.0);
                }
            }
        }
        assert_eq!(m.cost().sum(), 20.0);
        assert!(m.cost().iter().all(|&c| c == 0.0 || c == 1.0));
        let star = policy_evaluation(&m, &optimal_policy(&m).unwrap()).unwrap();
        assert!(star.normalized_cost > 0.1);
        assert_eq!(m, generate_random_cmdp(seed, &config).unwrap());
    }
}

#[test]
fn cmdp_text_round_trip_is_exact() {
    let m = random_cmdp(4, 4, 3, 0.93, f64::INFINITY);
    let text = write_cmdp(&m);
    let back = read_cmdp(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(write_cmdp(&back), text);
}

#[test]
fn sampled_trajectories_follow_the_model() {
    let m = random_cmdp(1, 4, 2, 0.9, 0.5);
    let pi = random_policy(2, 4, 2);
    let data = sample_dataset(&m, &pi, 50, 20, 3).unwrap();
    assert_eq!(data.trajectories.len(), 50);
    for traj in &data.trajectories {
        assert_eq!(traj.len(), 20);
        for w in traj.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
        for tr in traj {
            assert!(t(&m, tr.s, tr.a, tr.s_next) > 0.0);
            assert_eq!(tr.r, m.reward()[(tr.s, tr.a)]);
            assert_eq!(tr.c, m.cost()[(tr.s, tr.a)]);
        }
    }
    assert_eq!(data, sample_dataset(&m, &pi, 50, 20, 3).unwrap());
    assert_ne!(data, sample_dataset(&m, &pi, 50, 20, 4).unwrap());
}

#[test]
fn mle_converges_to_the_true_model() {
    let m = random_cmdp(11, 3, 2, 0.9, 0.5);
    let data = sample_dataset(&m, &Policy::uniform(3, 2), 2000, 500, 5).unwrap();
    assert_eq!(data.n_transitions(), 1_000_000);
    let mle = mle_estimate(&data).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert!(mle.is_observed(s, a));
            for s2 in 0..3 {
                assert!((mle.next(s, a)[s2] - t(&m, s, a, s2)).abs() < 0.02);
            }
        }
    }
    assert!((mle.d_data().sum() - 1.0).abs() < 1e-12);
}

#[test]
fn unobserved_pairs_self_loop() {
    let data = Dataset {
        trajectories: vec![vec![Transition {
            s: 0,
            a: 0,
            r: 1.0,
            c: 0.5,
            s_next: 1,
        }]],
        horizon: 1,
        source_seed: 0,
        n_states: 2,
        n_actions: 2,
    };
    let mle = mle_estimate(&data).unwrap();
    assert_eq!(mle.next(0, 0), &[0.0, 1.0]);
    assert_eq!(mle.next(1, 1), &[0.0, 1.0]);
    assert_eq!(mle.next(0, 1), &[1.0, 0.0]);
    assert!(!mle.is_observed(1, 0));
    let (r, c) = empirical_reward_cost(&data);
    assert_eq!(r.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(c.as_slice(), &[0.5, 0.0, 0.0, 0.0]);
    assert!(mle_estimate(&Dataset::empty(2, 2)).is_err());
}

#[test]
fn csv_errors_carry_line_numbers() {
    let text = "traj_id,t,s,a,r,c,s_next\n0,0,0,0,1,0,1\n0,1,1,x,1,0,0\n";
    match read_tabular_csv(text, None, None) {
        Err(spdice::error::Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert!(read_tabular_csv("s,a\n", None, None).is_err());
    assert!(read_tabular_csv(
        "traj_id,t,s,a,r,c,s_next\n0,0,5,0,1,0,1\n",
        Some(2),
        Some(1)
    )
    .is_err());
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    let tr = (0usize..4, 0usize..3, -5.0f64..5.0, 0.0f64..2.0, 0usize..4)
        .prop_map(|(s, a, r, c, s_next)| Transition { s, a, r, c, s_next });
    prop::collection::vec(prop::collection::vec(tr, 1..8), 1..6).prop_map(|trajectories| {
        let horizon = trajectories.iter().map(Vec::len).max().unwrap();
        Dataset {
            trajectories,
            horizon,
            source_seed: 0,
            n_states: 4,
            n_actions: 3,
        }
    })
}

proptest! {
    #[test]
    fn csv_round_trip(data in arb_dataset()) {
        let text = write_tabular_csv(&data);
        let back = read_tabular_csv(&text, Some(4), Some(3)).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn counts_and_mle_rows(data in arb_dataset()) {
        let counts = visit_counts(&data);
        prop_assert_eq!(counts.total() as usize, data.n_transitions());
        let mle = mle_estimate(&data).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                let row = mle.next(s, a);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert_eq!(mle.is_observed(s, a), counts.get(s, a) > 0);
                let want = counts.get(s, a) as f64 / data.n_transitions() as f64;
                prop_assert!((mle.d_data()[(s, a)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn behavior_policies_are_mixtures(seed in 0u64..50, w in 0.0f64..=1.0) {
        let m = random_cmdp(seed, 4, 3, 0.9, 0.6);
        let pi = make_behavior_policy(&m, w).unwrap();
        let star = optimal_policy(&m).unwrap();
        let uniform = Policy::uniform(4, 3);
        let want = star.mix(&uniform, w).unwrap();
        prop_assert!(pi.probs().max_abs_diff(want.probs()) < 1e-15);
    }
}

#[test]
fn from_parts_requires_a_distribution() {
    let m = random_cmdp(0, 2, 2, 0.9, 0.5);
    assert!(MleModel::from_parts(&m, Table::filled(2, 2, 0.3)).is_err());
    let model = MleModel::from_parts(&m, Table::filled(2, 2, 0.25)).unwrap();
    assert_eq!(model.next(1, 0), m.next(1, 0));
}
