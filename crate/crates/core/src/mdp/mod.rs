//! Adversarial mining strategies as a Markov decision process.
//!
//! Each step of the process is exactly one mining event: the attacker finds
//! the next block with probability `alpha`, the honest network otherwise.
//! Before the event the attacker picks one of [`Action::Adopt`],
//! [`Action::Wait`], [`Action::Match`], or [`Action::Override`]. The state
//! tracks the private and public branch lengths since the last common block,
//! the fork status, and a bitmask of contested heights on the main chain that
//! are still waiting for an honest block to reference the orphaned honest
//! competitor (see [`MdpState::pending`]).
//!
//! Rewards are settled lazily. A height is paid once its outcome can no
//! longer change: when the honest branch is adopted, when attacker blocks
//! are published into the main chain without an honest competitor, or when
//! a contested height drops out of the object eligibility window.
//!
//! The three security metrics are long-run ratios over this chain and are
//! solved in [`metrics`] with a bisection on the ratio and relative value
//! iteration per probe ([`solver`]).

mod model;
pub mod metrics;
pub mod solver;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use metrics::{
    censorship_susceptibility, evaluate_metric, evaluate_policy, honest_policy,
    honest_relative_reward, optimal_relative_reward, optimal_relative_reward_on,
    subversion_gain, sweep, Metric, MetricValue, PolicyEvaluation, SweepRow,
};
pub use model::{feasible_actions, step, CompiledMdp, StateSpace};
pub use solver::{SolveStats, SolverOptions};

/// Reward mechanism whose incentive structure is being evaluated.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    /// Winner of each height takes the whole height reward.
    Bitcoin,
    /// Rewards are carried by fruits; stale honest fruits are lost.
    FruitChains,
    /// Contested heights split evenly between the two sides.
    RewardSplitting,
    /// Contested heights split in proportion to mining power.
    ProportionalSplitting,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Bitcoin,
        Mechanism::FruitChains,
        Mechanism::RewardSplitting,
        Mechanism::ProportionalSplitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Bitcoin => "bitcoin",
            Mechanism::FruitChains => "fruitchains",
            Mechanism::RewardSplitting => "rs",
            Mechanism::ProportionalSplitting => "prs",
        }
    }

    fn splits(self) -> bool {
        matches!(
            self,
            Mechanism::RewardSplitting | Mechanism::ProportionalSplitting
        )
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bitcoin" | "btc" => Ok(Mechanism::Bitcoin),
            "fruitchains" | "fruitchain" | "fc" => Ok(Mechanism::FruitChains),
            "rs" | "reward-splitting" => Ok(Mechanism::RewardSplitting),
            "prs" | "proportional-reward-splitting" => Ok(Mechanism::ProportionalSplitting),
            other => Err(MdpError::InvalidConfig(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// Who produced the most recent block of the ongoing fork.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fork {
    /// The attacker has matched and honest miners are split between branches.
    Active,
    /// The honest network mined last.
    CLast,
    /// The attacker mined last (also used for the fork-free state).
    ALast,
}

/// One state of the selfish-mining process.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct MdpState {
    /// Private attacker branch length since the last common block.
    pub attacker: u8,
    /// Public honest branch length since the last common block.
    pub public: u8,
    pub fork: Fork,
    /// Bit `i` set: the main-chain height `i` below the common block is an
    /// attacker block with an eligible orphaned honest competitor that no
    /// honest main-chain block has referenced yet. Heights without a
    /// competitor are settled on publication, so only set bits are kept.
    pub pending: u16,
}

impl MdpState {
    pub const INITIAL: MdpState = MdpState {
        attacker: 0,
        public: 0,
        fork: Fork::ALast,
        pending: 0,
    };

    pub fn new(attacker: u8, public: u8, fork: Fork, pending: u16) -> Self {
        MdpState {
            attacker,
            public,
            fork,
            pending,
        }
    }

    /// History bitstring, tip first, up to the deepest pending height.
    pub fn history(&self) -> String {
        let len = 16 - self.pending.leading_zeros() as usize;
        (0..len)
            .map(|i| if self.pending >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {:?}, \"{}\")",
            self.attacker,
            self.public,
            self.fork,
            self.history()
        )
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Adopt,
    Wait,
    Match,
    /// Publish a private prefix `k` blocks longer than the public branch.
    Override(u8),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Adopt => f.write_str("adopt"),
            Action::Wait => f.write_str("wait"),
            Action::Match => f.write_str("match"),
            Action::Override(k) => write!(f, "override({k})"),
        }
    }
}

/// One outcome of taking an action in a state.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEntry<F> {
    pub probability: F,
    pub next: MdpState,
    /// Height (or fruit) rewards settled to the attacker.
    pub reward_a: F,
    /// Height (or fruit) rewards settled to honest miners.
    pub reward_h: F,
    /// Number of heights (fruits) whose reward was settled.
    pub elapsed: F,
    /// Honest main-chain blocks orphaned by this transition.
    pub orphaned: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig<F> {
    pub alpha: F,
    /// Fraction of honest power that mines on the attacker branch during a tie.
    pub gamma: F,
    /// Object eligibility window.
    pub omega: u8,
    /// Fork eligibility window.
    pub wfork: u8,
    /// Branch length cap; at the cap the attacker must resolve the fork.
    pub max_fork: u8,
    /// Double-spend value per orphaned block, in block rewards.
    pub double_spend_value: F,
    /// Orphaned honest blocks needed for a successful double spend.
    pub confirmations: u8,
    pub mechanism: Mechanism,
    /// Blocks per fruit; only 1 is modelled.
    pub fruit_ratio: u32,
    /// Replaces `alpha` in the proportional split only.
    pub split_alpha: Option<F>,
}

impl<F: Real> MdpConfig<F> {
    pub fn new(mechanism: Mechanism, alpha: F) -> Self {
        let gamma = if mechanism == Mechanism::FruitChains {
            F::zero()
        } else {
            F::lit(0.5)
        };
        MdpConfig {
            alpha,
            gamma,
            omega: 6,
            wfork: 6,
            max_fork: 12,
            double_spend_value: F::lit(3.0),
            confirmations: 6,
            mechanism,
            fruit_ratio: 1,
            split_alpha: None,
        }
    }

    pub fn with_gamma(mut self, gamma: F) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_windows(mut self, omega: u8, wfork: u8) -> Self {
        self.omega = omega;
        self.wfork = wfork;
        self
    }

    pub fn with_max_fork(mut self, max_fork: u8) -> Self {
        self.max_fork = max_fork;
        self
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        let bad = |m: String| Err(MdpError::InvalidConfig(m));
        if !(self.alpha >= F::zero() && self.alpha < F::lit(0.5)) {
            return bad(format!("alpha must lie in [0, 0.5), got {:?}", self.alpha));
        }
        if !(self.gamma >= F::zero() && self.gamma <= F::one()) {
            return bad(format!("gamma must lie in [0, 1], got {:?}", self.gamma));
        }
        if self.omega == 0 || self.omega > 16 {
            return bad(format!("omega must lie in [1, 16], got {}", self.omega));
        }
        if self.wfork == 0 {
            return bad("wfork must be at least 1".into());
        }
        if self.max_fork < 2 || self.max_fork > 40 {
            return bad(format!("max_fork must lie in [2, 40], got {}", self.max_fork));
        }
        if self.double_spend_value < F::zero() {
            return bad("double_spend_value must be nonnegative".into());
        }
        if self.mechanism == Mechanism::FruitChains {
            if self.gamma != F::zero() && self.gamma != F::one() {
                return bad("fruitchains supports gamma 0 or 1 only".into());
            }
            if self.fruit_ratio != 1 {
                return bad("fruitchains is modelled with fruit_ratio = 1 only".into());
            }
        }
        if let Some(s) = self.split_alpha {
            if !(s >= F::zero() && s <= F::one()) {
                return bad("split_alpha must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// Attacker's share of a contested height when the honest competitor is
    /// referenced in time.
    pub(crate) fn attacker_split(&self) -> F {
        match self.mechanism {
            Mechanism::RewardSplitting => F::lit(0.5),
            Mechanism::ProportionalSplitting => self.split_alpha.unwrap_or(self.alpha),
            _ => F::zero(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("invalid MDP configuration: {0}")]
    InvalidConfig(String),
    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { state: MdpState, action: Action },
    #[error("solver did not converge within {iterations} iterations")]
    Nonconvergence { iterations: usize },
}
