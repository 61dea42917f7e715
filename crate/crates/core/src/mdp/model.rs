use std::collections::{HashMap, VecDeque};

use crate::scalar::Real;

use super::{Action, Fork, MdpConfig, MdpError, Mechanism, MdpState, TransitionEntry};

/// Actions available in `s`. Adopt is always available; Wait and Match are
/// withheld once either branch reaches `max_fork`, so the attacker has to
/// resolve the fork there.
pub fn feasible_actions<F: Real>(cfg: &MdpConfig<F>, s: &MdpState) -> Vec<Action> {
    let mut out = vec![Action::Adopt];
    let room = s.attacker < cfg.max_fork && s.public < cfg.max_fork;
    if room {
        out.push(Action::Wait);
        if s.fork == Fork::CLast && s.public >= 1 && s.attacker >= s.public {
            out.push(Action::Match);
        }
    }
    for k in 1..=s.attacker.saturating_sub(s.public) {
        out.push(Action::Override(k));
    }
    out
}

/// Rewards settled before the mining event.
#[derive(Clone, Copy, Debug)]
struct Settled<F> {
    a: F,
    h: F,
    elapsed: F,
}

impl<F: Real> Settled<F> {
    fn zero() -> Self {
        Settled {
            a: F::zero(),
            h: F::zero(),
            elapsed: F::zero(),
        }
    }

    fn add(&mut self, a: F, h: F) {
        self.a = self.a + a;
        self.h = self.h + h;
        self.elapsed = self.elapsed + F::one();
    }
}

/// Publishes the first `n` private blocks into the main chain, orphaning the
/// public branch. Returns the new pending mask.
fn publish<F: Real>(cfg: &MdpConfig<F>, s: &MdpState, n: u8, acc: &mut Settled<F>) -> u16 {
    let omega = u32::from(cfg.omega);
    let fruit = cfg.mechanism == Mechanism::FruitChains;
    let mut pending: u32 = 0;
    for i in 0..16u32 {
        if s.pending >> i & 1 == 0 {
            continue;
        }
        let depth = i + u32::from(n);
        if depth < omega {
            pending |= 1 << depth;
        } else if fruit {
            acc.elapsed = acc.elapsed + F::one();
        } else {
            acc.add(F::one(), F::zero());
        }
    }
    for d in 1..=n {
        let contested = d <= s.public && (fruit || d <= cfg.wfork);
        if fruit {
            // attacker fruits were credited when mined
            if contested {
                let depth = u32::from(n - d);
                if depth < omega {
                    pending |= 1 << depth;
                } else {
                    acc.elapsed = acc.elapsed + F::one();
                }
            }
            continue;
        }
        if contested && cfg.mechanism.splits() {
            let depth = u32::from(n - d);
            if depth < omega {
                pending |= 1 << depth;
                continue;
            }
        }
        acc.add(F::one(), F::zero());
    }
    pending as u16
}

/// Pending heights referenced by an honest block that becomes canonical.
fn settle_pending<F: Real>(cfg: &MdpConfig<F>, pending: u16, acc: &mut Settled<F>) {
    let split = cfg.attacker_split();
    for _ in 0..pending.count_ones() {
        acc.add(split, F::one() - split);
    }
}

/// Outcome distribution of taking `action` in `s`.
pub fn step<F: Real>(
    cfg: &MdpConfig<F>,
    s: &MdpState,
    action: Action,
) -> Result<Vec<TransitionEntry<F>>, MdpError> {
    if !feasible_actions(cfg, s).contains(&action) {
        return Err(MdpError::InfeasibleAction { state: *s, action });
    }
    let mut acc = Settled::zero();
    let mut orphaned = 0u8;
    let base = match action {
        Action::Adopt => {
            if s.public == 0 {
                MdpState::new(0, 0, Fork::ALast, s.pending)
            } else {
                settle_pending(cfg, s.pending, &mut acc);
                let split = cfg.attacker_split();
                for d in 1..=s.public {
                    let uncle = cfg.mechanism.splits()
                        && d <= s.attacker
                        && d <= cfg.wfork
                        && s.public + 1 - d <= cfg.omega;
                    if uncle {
                        acc.add(split, F::one() - split);
                    } else {
                        acc.add(F::zero(), F::one());
                    }
                }
                MdpState::INITIAL
            }
        }
        Action::Wait => *s,
        Action::Match => MdpState::new(s.attacker, s.public, Fork::Active, s.pending),
        Action::Override(k) => {
            let n = s.public + k;
            let pending = publish(cfg, s, n, &mut acc);
            orphaned = s.public;
            MdpState::new(s.attacker - n, 0, Fork::ALast, pending)
        }
    };

    let alpha = cfg.alpha;
    let honest = F::one() - alpha;
    let fruit = cfg.mechanism == Mechanism::FruitChains;
    let mut out = Vec::with_capacity(3);
    let mut push = |p: F, next: MdpState, extra: Settled<F>, orphaned: u8| {
        if p > F::zero() {
            out.push(TransitionEntry {
                probability: p,
                next,
                reward_a: extra.a,
                reward_h: extra.h,
                elapsed: extra.elapsed,
                orphaned,
            });
        }
    };

    let mut attacker_acc = acc;
    if fruit {
        attacker_acc.add(F::one(), F::zero());
    }
    let attacker_fork = if base.fork == Fork::Active {
        Fork::Active
    } else {
        Fork::ALast
    };
    push(
        alpha,
        MdpState::new(base.attacker + 1, base.public, attacker_fork, base.pending),
        attacker_acc,
        orphaned,
    );

    let on_public = MdpState::new(base.attacker, base.public + 1, Fork::CLast, base.pending);
    if base.fork == Fork::Active {
        let mut gamma_acc = acc;
        let pending = publish(cfg, &base, base.public, &mut gamma_acc);
        let next = MdpState::new(base.attacker - base.public, 1, Fork::CLast, pending);
        push(cfg.gamma * honest, next, gamma_acc, orphaned + base.public);
        push((F::one() - cfg.gamma) * honest, on_public, acc, orphaned);
    } else {
        push(honest, on_public, acc, orphaned);
    }
    Ok(out)
}

/// States reachable from [`MdpState::INITIAL`], in breadth-first order.
#[derive(Clone, Debug, Default)]
pub struct StateSpace {
    pub states: Vec<MdpState>,
    index: HashMap<MdpState, u32>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &MdpState) -> Option<usize> {
        self.index.get(s).map(|&i| i as usize)
    }

    fn intern(&mut self, s: MdpState, queue: &mut VecDeque<u32>) -> u32 {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.states.len() as u32;
        self.states.push(s);
        self.index.insert(s, i);
        queue.push_back(i);
        i
    }
}

/// The reachable MDP in compressed sparse form.
///
/// Actions of state `s` are `action_start[s]..action_start[s + 1]`;
/// transitions of action `a` are `trans_start[a]..trans_start[a + 1]`.
/// Expected one-step rewards are stored per action.
#[derive(Clone, Debug)]
pub struct CompiledMdp<F> {
    pub config: MdpConfig<F>,
    pub space: StateSpace,
    pub actions: Vec<Action>,
    pub action_start: Vec<usize>,
    pub trans_start: Vec<usize>,
    pub next: Vec<u32>,
    pub prob: Vec<F>,
    /// Expected attacker reward per action.
    pub reward_a: Vec<F>,
    /// Expected honest reward per action.
    pub reward_h: Vec<F>,
    /// Expected double-spend bonus per action.
    pub bonus: Vec<F>,
    /// Expected settled heights per action.
    pub elapsed: Vec<F>,
}

impl<F: Real> CompiledMdp<F> {
    pub fn build(cfg: &MdpConfig<F>) -> Result<Self, MdpError> {
        cfg.validate()?;
        let mut space = StateSpace::default();
        let mut queue = VecDeque::new();
        space.intern(MdpState::INITIAL, &mut queue);

        let mut actions = Vec::new();
        let mut action_start = vec![0];
        let mut trans_start = vec![0];
        let (mut next, mut prob) = (Vec::new(), Vec::new());
        let (mut reward_a, mut reward_h) = (Vec::new(), Vec::new());
        let (mut bonus, mut elapsed) = (Vec::new(), Vec::new());

        let v_ds = cfg.double_spend_value;
        let mut expected = 0u32;
        while let Some(si) = queue.pop_front() {
            // BFS pops states in insertion order, so rows line up with indices
            debug_assert_eq!(si, expected);
            expected += 1;
            let s = space.states[si as usize];
            for action in feasible_actions(cfg, &s) {
                let entries = step(cfg, &s, action)?;
                let (mut ra, mut rh, mut rb, mut el) = (F::zero(), F::zero(), F::zero(), F::zero());
                for e in &entries {
                    let j = space.intern(e.next, &mut queue);
                    next.push(j);
                    prob.push(e.probability);
                    ra = ra + e.probability * e.reward_a;
                    rh = rh + e.probability * e.reward_h;
                    el = el + e.probability * e.elapsed;
                    if e.orphaned >= cfg.confirmations && e.orphaned > 0 {
                        rb = rb + e.probability * v_ds * F::from_u8(e.orphaned).unwrap();
                    }
                }
                actions.push(action);
                reward_a.push(ra);
                reward_h.push(rh);
                bonus.push(rb);
                elapsed.push(el);
                trans_start.push(next.len());
            }
            action_start.push(actions.len());
        }

        Ok(CompiledMdp {
            config: cfg.clone(),
            space,
            actions,
            action_start,
            trans_start,
            next,
            prob,
            reward_a,
            reward_h,
            bonus,
            elapsed,
        })
    }

    pub fn num_states(&self) -> usize {
        self.space.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn actions_of(&self, s: usize) -> std::ops::Range<usize> {
        self.action_start[s]..self.action_start[s + 1]
    }

    pub fn transitions_of(&self, a: usize) -> std::ops::Range<usize> {
        self.trans_start[a]..self.trans_start[a + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: Mechanism) -> MdpConfig<f64> {
        MdpConfig::new(m, 0.3)
    }

    #[test]
    fn initial_state_actions() {
        let acts = feasible_actions(&cfg(Mechanism::Bitcoin), &MdpState::INITIAL);
        assert_eq!(acts, vec![Action::Adopt, Action::Wait]);
    }

    #[test]
    fn match_and_override_when_ahead() {
        let s = MdpState::new(2, 1, Fork::CLast, 0);
        let acts = feasible_actions(&cfg(Mechanism::Bitcoin), &s);
        assert!(acts.contains(&Action::Match));
        assert!(acts.contains(&Action::Override(1)));
    }

    #[test]
    fn wait_suppressed_at_cap() {
        let c = cfg(Mechanism::Bitcoin);
        let s = MdpState::new(c.max_fork, 0, Fork::ALast, 0);
        assert!(!feasible_actions(&c, &s).contains(&Action::Wait));
    }

    #[test]
    fn wait_from_initial() {
        let out = step(&cfg(Mechanism::Bitcoin), &MdpState::INITIAL, Action::Wait).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].next, MdpState::new(1, 0, Fork::ALast, 0));
        assert_eq!(out[1].next, MdpState::new(0, 1, Fork::CLast, 0));
        assert!((out[0].probability - 0.3).abs() < 1e-15);
        assert!(out.iter().all(|e| e.reward_a == 0.0 && e.elapsed == 0.0));
    }

    #[test]
    fn rs_adopt_splits_contested_height() {
        let s = MdpState::new(1, 1, Fork::CLast, 0);
        let out = step(&cfg(Mechanism::RewardSplitting), &s, Action::Adopt).unwrap();
        for e in out {
            assert_eq!(e.reward_a, 0.5);
            assert_eq!(e.reward_h, 0.5);
        }
    }

    #[test]
    fn aged_out_competitor_pays_attacker_in_full() {
        let c = cfg(Mechanism::ProportionalSplitting).with_windows(2, 6);
        // height three below the fork point is about to leave the window
        let s = MdpState::new(1, 0, Fork::ALast, 0b10);
        let out = step(&c, &s, Action::Override(1)).unwrap();
        for e in out {
            assert_eq!(e.reward_a, 2.0);
            assert_eq!(e.reward_h, 0.0);
            assert_eq!(e.next.pending, 0);
        }
    }

    #[test]
    fn infeasible_action_rejected() {
        let r = step(&cfg(Mechanism::Bitcoin), &MdpState::INITIAL, Action::Match);
        assert!(matches!(r, Err(MdpError::InfeasibleAction { .. })));
    }

    #[test]
    fn probabilities_sum_to_one() {
        for m in Mechanism::ALL {
            let c = cfg(m).with_max_fork(5);
            let mdp = CompiledMdp::build(&c).unwrap();
            for a in 0..mdp.num_actions() {
                let total: f64 = mdp.transitions_of(a).map(|t| mdp.prob[t]).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
