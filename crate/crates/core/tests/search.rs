mod common;

use colt_core::env::Environment;
use colt_core::policy::{phi_small, select_child, NodeStats, PolicyParams};
use colt_core::program::{Mutator, ProgramState};
use colt_core::proposers::ScriptedProfile;
use colt_core::search::{rollout, run_search, NodeId, SampleKind, SearchConfig};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn alteration_pool() -> colt_core::search::ProposerPool {
    pool(vec![
        ("small", Box::new(RegressingProposer { id: "small".into() })),
        ("large", scripted(ScriptedProfile::perfect_greedy())),
    ])
}

#[test]
fn zero_trials_reports_the_unoptimized_program() {
    let env = env(4);
    let set = models(&[("solo", 8e9)]);
    let mut p = pool(vec![("solo", scripted(ScriptedProfile::perfect_greedy()))]);
    let res = run_search(&env, &mut p, &SearchConfig::new(set, 0, 4, 1)).unwrap();
    assert_eq!(res.best_speedup, 1.0);
    assert!(res.samples.is_empty());
    assert!(res.best_state.trace().is_empty());
}

#[test]
fn greedy_single_model_reaches_the_horizon_four_optimum() {
    let env = env(4);
    let set = models(&[("solo", 8e9)]);
    let mut p = pool(vec![("solo", scripted(ScriptedProfile::perfect_greedy()))]);
    let res = run_search(&env, &mut p, &SearchConfig::new(set, 50, 4, 3)).unwrap();
    assert!((res.best_speedup - 36.4).abs() < 1e-9, "{}", res.best_speedup);
    check_tree_invariants(&res, 50).unwrap();
}

#[test]
fn identical_seeds_give_identical_runs() {
    let env = env(6);
    let run = |seed| {
        let set = models(&[("weak", 20e9), ("strong", 300e9)]);
        let mut p = pool(vec![("weak", scripted(weak())), ("strong", scripted(strong()))]);
        run_search(&env, &mut p, &SearchConfig::new(set, 120, 6, seed)).unwrap()
    };
    let (a, b, c) = (run(11), run(11), run(12));
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.tree.nodes(), b.tree.nodes());
    assert_ne!(a.samples, c.samples);
}

#[test]
fn depth_one_rollouts_average_the_single_step_rewards() {
    let env = env(8);
    let root = env.initial();
    let rewards: Vec<f64> = Mutator::all()
        .iter()
        .map(|&m| env.reward(&root.apply(m).unwrap()))
        .collect();
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rewards.len() as f64;
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let observed = (0..n).map(|_| rollout(&root, 1, &env, &mut rng).1).sum::<f64>() / n as f64;
    let sigma = (var / n as f64).sqrt();
    assert!((observed - mean).abs() <= 3.0 * sigma, "{observed} vs {mean} (sigma {sigma})");
}

#[test]
fn course_alteration_replaces_persistent_small_regressions() {
    let env = env(6);
    let set = models(&[("small", 8e9), ("large", 300e9)]);
    let config = SearchConfig::new(set.clone(), 60, 6, 9);
    let res = run_search(&env, &mut alteration_pool(), &config).unwrap();
    assert!(res.alterations() > 0);
    check_tree_invariants(&res, 60).unwrap();

    let large = set.lookup("large").unwrap();
    for (i, s) in res.samples.iter().enumerate() {
        if s.kind != SampleKind::Alteration {
            continue;
        }
        let pruned = &res.samples[i - 1];
        assert!(pruned.pruned && pruned.regression && pruned.acting_model == "small");
        let tomb = res.tree.node(NodeId(pruned.node));
        assert!(tomb.pruned);
        // The trigger needs an earlier small-model regression on the path.
        let earlier = res
            .tree
            .path_to(tomb.parent.unwrap())
            .into_iter()
            .skip(1)
            .filter(|&id| {
                let n = res.tree.node(id);
                n.is_regression && n.expanded_by.is_some_and(|m| m != large)
            })
            .count();
        assert!(earlier >= 1);
        let replacement = res.tree.node(NodeId(s.node));
        assert_eq!(replacement.expanded_by, Some(large));
        assert_eq!(replacement.parent, tomb.parent);
        assert_eq!(s.acting_model, "large");
    }
    assert_eq!(res.final_stats[large.0].stats.course_alterations as usize, res.alterations());
    let regular_large = res.samples.iter().filter(|s| s.kind == SampleKind::Expansion && s.acting_model == "large").count();
    assert_eq!(res.final_stats[large.0].stats.calls as usize, regular_large);
}

#[test]
fn first_small_regression_on_a_path_is_kept() {
    let env = env(6);
    let set = models(&[("small", 8e9), ("large", 300e9)]);
    let res = run_search(&env, &mut alteration_pool(), &SearchConfig::new(set, 60, 6, 9)).unwrap();
    for s in res.samples.iter().filter(|s| s.regression && s.acting_model == "small" && !s.pruned) {
        let node = res.tree.node(NodeId(s.node));
        let earlier = res
            .tree
            .path_to(node.parent.unwrap())
            .into_iter()
            .skip(1)
            .filter(|&id| {
                let n = res.tree.node(id);
                n.is_regression && n.expanded_by.is_some_and(|m| m.0 == 0)
            })
            .count();
        assert_eq!(earlier, 0, "a repeat small regression survived at node {}", s.node);
    }
}

#[test]
fn disabling_course_alteration_keeps_every_child() {
    let env = env(6);
    let set = models(&[("small", 8e9), ("large", 300e9)]);
    let mut config = SearchConfig::new(set, 60, 6, 9);
    config.course_alteration_enabled = false;
    let res = run_search(&env, &mut alteration_pool(), &config).unwrap();
    assert_eq!(res.alterations(), 0);
    assert!(res.samples.iter().filter(|s| s.regression).count() >= 2);
    check_tree_invariants(&res, 60).unwrap();
}

#[test]
fn largest_only_runs_never_alter_course() {
    let env = env(5);
    let set = models(&[("big", 300e9)]);
    let mut p = pool(vec![("big", scripted(weak()))]);
    let res = run_search(&env, &mut p, &SearchConfig::new(set, 150, 5, 2)).unwrap();
    assert_eq!(res.alterations(), 0);
    check_tree_invariants(&res, 150).unwrap();
}

#[test]
fn joint_states_carry_the_recommended_model() {
    let env = env(5);
    let set = models(&[("weak", 20e9), ("strong", 300e9)]);
    let mut p = pool(vec![("weak", scripted(weak())), ("strong", scripted(strong()))]);
    let res = run_search(&env, &mut p, &SearchConfig::new(set.clone(), 100, 5, 4)).unwrap();
    for s in res.samples.iter().filter(|s| s.kind != SampleKind::Terminal) {
        let node = res.tree.node(NodeId(s.node));
        assert_eq!(Some(set.id(node.acting_model)), s.next_model.as_deref());
        let parent = res.tree.node(node.parent.unwrap());
        let expected_expander = if s.kind == SampleKind::Alteration { set.largest() } else { parent.acting_model };
        assert_eq!(node.expanded_by, Some(expected_expander));
        let replayed = ProgramState::from_trace(node.state.trace(), 5).unwrap();
        assert_eq!(replayed, node.state);
        assert_eq!(&node.state.trace()[..parent.state.depth()], parent.state.trace());
    }
}

/// Walks the final tree with a fresh replica of the selection rule and
/// checks that full nodes route to the child the policy prefers.
#[test]
fn selection_follows_the_size_prior_when_rewards_tie() {
    let set = models(&[("weak", 20e9), ("strong", 300e9)]);
    let params = PolicyParams { lambda: 1.0, c: 0.0, ..PolicyParams::default() };
    let phis: Vec<f64> = set.models().iter().map(|m| phi_small(m, &set, params.epsilon).unwrap()).collect();
    let visited = NodeStats { visits: 3, cumulative_reward: 1.0, raw_cost: 1.0 };
    let children = [(visited, phis[1]), (visited, phis[0])];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert_eq!(select_child(&children, 6, &params, &mut rng).unwrap(), 1);
    }
}

#[test]
fn invariants_hold_across_branching_factors() {
    let env = env(5);
    for branching in 1..=3 {
        let set = models(&[("weak", 20e9), ("strong", 300e9)]);
        let mut config = SearchConfig::new(set, 200, 5, branching as u64);
        config.policy.branching = branching;
        let mut p = pool(vec![("weak", scripted(weak())), ("strong", scripted(strong()))]);
        let res = run_search(&env, &mut p, &config).unwrap();
        check_tree_invariants(&res, 200).unwrap();
        assert!(res.best_speedup >= speedup_of(&env, &res) - 1e-12);
        assert_eq!(res.best_speedup, speedup_of(&env, &res));
    }
}
