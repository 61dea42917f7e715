//! Exhaustive policy search over the attack MDP, used as an oracle for the
//! value-iteration solver on small instances.

#![allow(dead_code)]

use std::collections::HashMap;

use workshare_core::mdp::{feasible_actions, step, Action, MdpConfig, MdpState};

/// Expected one-step rewards and successors of one state-action pair.
#[derive(Clone, Debug)]
struct Edge {
    ra: f64,
    rh: f64,
    next: Vec<(usize, f64)>,
}

pub struct Explicit {
    pub states: Vec<MdpState>,
    actions: Vec<Vec<(Action, Edge)>>,
}

/// Builds the full model reachable from the initial state under any action.
pub fn explicit(cfg: &MdpConfig<f64>) -> Explicit {
    let mut index: HashMap<MdpState, usize> = HashMap::new();
    let mut states = vec![MdpState::INITIAL];
    index.insert(MdpState::INITIAL, 0);
    let mut actions = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let s = states[i];
        let mut list = Vec::new();
        for a in feasible_actions(cfg, &s) {
            let mut e = Edge {
                ra: 0.0,
                rh: 0.0,
                next: Vec::new(),
            };
            for t in step(cfg, &s, a).expect("feasible") {
                e.ra += t.probability * t.reward_a;
                e.rh += t.probability * t.reward_h;
                let j = *index.entry(t.next).or_insert_with(|| {
                    states.push(t.next);
                    states.len() - 1
                });
                e.next.push((j, t.probability));
            }
            list.push((a, e));
        }
        actions.push(list);
        i += 1;
    }
    Explicit { states, actions }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting; `None`
/// when `A` is numerically singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// States reachable from the initial state under `policy`.
fn reachable(m: &Explicit, policy: &HashMap<usize, usize>) -> Vec<usize> {
    let mut seen = vec![false; m.states.len()];
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(s) = stack.pop() {
        if std::mem::replace(&mut seen[s], true) {
            continue;
        }
        out.push(s);
        stack.extend(m.actions[s][policy[&s]].1.next.iter().map(|&(j, _)| j));
    }
    out
}

/// Stationary distribution on `states` from `π(I − P) = 0`, `Σπ = 1`.
fn stationary(m: &Explicit, policy: &HashMap<usize, usize>, states: &[usize]) -> Option<Vec<f64>> {
    let n = states.len();
    let pos: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // rows are equations, columns are π entries
    let mut a = vec![vec![0.0; n]; n];
    for (i, &s) in states.iter().enumerate() {
        a[i][i] += 1.0;
        for &(j, q) in &m.actions[s][policy[&s]].1.next {
            a[pos[&j]][i] -= q;
        }
    }
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    solve_linear(a, b)
}

/// Cesàro limit from the initial state by lazy power iteration.
fn cesaro(m: &Explicit, policy: &HashMap<usize, usize>) -> Vec<(usize, f64)> {
    let n = m.states.len();
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..1_000_000 {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            next[s] += 0.5 * p;
            for &(j, q) in &m.actions[s][policy[&s]].1.next {
                next[j] += 0.5 * p * q;
            }
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff < 1e-15 {
            break;
        }
    }
    pi.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect()
}

/// Long-run `(attacker, honest)` reward rates of the chain started in the
/// initial state.
fn rates(m: &Explicit, policy: &HashMap<usize, usize>) -> (f64, f64) {
    let states = reachable(m, policy);
    let dist: Vec<(usize, f64)> = match stationary(m, policy, &states) {
        Some(pi) if pi.iter().all(|&p| p > -1e-9) => states.into_iter().zip(pi).collect(),
        _ => cesaro(m, policy),
    };
    let (mut a, mut h) = (0.0, 0.0);
    for (s, p) in dist {
        let e = &m.actions[s][policy[&s]].1;
        a += p * e.ra;
        h += p * e.rh;
    }
    (a, h)
}

/// Result of the exhaustive search.
pub struct BruteForce {
    pub best_ratio: f64,
    pub policies: u64,
}

/// Enumerates every deterministic policy on the states reachable from the
/// initial state and returns the best attacker share of settled rewards;
/// `None` once more than `limit` policies turn up.
pub fn brute_force_ratio(cfg: &MdpConfig<f64>, limit: u64) -> Option<BruteForce> {
    let m = explicit(cfg);
    let mut best = BruteForce {
        best_ratio: 0.0,
        policies: 0,
    };
    dfs(&m, &mut HashMap::new(), &mut best, limit);
    (best.policies <= limit).then_some(best)
}

fn dfs(
    m: &Explicit,
    policy: &mut HashMap<usize, usize>,
    best: &mut BruteForce,
    limit: u64,
) {
    // first reachable state without an action
    let mut seen: Vec<bool> = vec![false; m.states.len()];
    let mut stack = vec![0];
    let mut open = None;
    while let Some(s) = stack.pop() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        match policy.get(&s) {
            Some(&a) => stack.extend(m.actions[s][a].1.next.iter().map(|&(j, _)| j)),
            None => {
                open = Some(s);
                break;
            }
        }
    }
    let Some(s) = open else {
        best.policies += 1;
        if best.policies > limit {
            return;
        }
        let (a, h) = rates(m, policy);
        if a + h > 0.0 {
            best.best_ratio = best.best_ratio.max(a / (a + h));
        }
        return;
    };
    for a in 0..m.actions[s].len() {
        if best.policies > limit {
            break;
        }
        policy.insert(s, a);
        dfs(m, policy, best, limit);
    }
    policy.remove(&s);
}
