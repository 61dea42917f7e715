mod common;

use common::brute_force_ratio;
use workshare_core::mdp::{optimal_relative_reward, MdpConfig, Mechanism, SolverOptions};

const TOL: f64 = 1e-4;
const POLICY_LIMIT: u64 = 300_000;

fn check(m: Mechanism, max_fork: u8, window: u8, alpha: f64) -> bool {
    let cfg = MdpConfig::new(m, alpha)
        .with_max_fork(max_fork)
        .with_windows(window, window);
    let Some(bf) = brute_force_ratio(&cfg, POLICY_LIMIT) else {
        return false;
    };
    let vi = optimal_relative_reward(&cfg, &SolverOptions::default())
        .unwrap()
        .value;
    assert!(
        (vi - bf.best_ratio).abs() <= TOL,
        "{m} maxFork {max_fork} window {window} alpha {alpha}: solver {vi}, exhaustive {} over {} policies",
        bf.best_ratio,
        bf.policies
    );
    true
}

#[test]
fn solver_matches_exhaustive_search_at_max_fork_two() {
    for m in Mechanism::ALL {
        for w in [1, 2] {
            for alpha in [0.2, 0.4] {
                assert!(check(m, 2, w, alpha));
            }
        }
    }
}

#[test]
fn solver_matches_exhaustive_search_at_max_fork_three() {
    let mut covered = 0;
    for m in [Mechanism::Bitcoin, Mechanism::FruitChains] {
        for alpha in [0.2, 0.4] {
            if check(m, 3, 1, alpha) {
                covered += 1;
            }
        }
    }
    assert_eq!(covered, 4);
}
