//! Synchronous round-based executions of the protocol and empirical
//! checkers for consistency, chain growth, freshness, and fairness.
//!
//! Per-round probabilities below are per party: a party with `q` queries
//! succeeds in a round with probability `1 − (1 − 2^-T)^q`.

mod adversary;
mod harness;
mod measure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::work::{CoreError, PartyId, ProtocolConfig};

pub use harness::{run_batch, run_execution, ExecutionTrace, TipEvent, TraceEvent};
pub use measure::{
    evaluate, ic_bound_check, ic_bound_factor, measure_consistency, measure_fairness,
    measure_freshness, measure_growth, FairnessEntry, FreshnessResult, PropertyReport,
    RewardSummary,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Protocol(#[from] CoreError),
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("parameters violate the honest-majority condition (alpha = {alpha:.6}, beta = {beta:.6})")]
    Compliance { alpha: f64, beta: f64 },
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    AllHonest,
    SelfishMining,
    PrivateChain,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all_honest" | "honest" => Ok(Strategy::AllHonest),
            "selfish_mining" | "selfish" => Ok(Strategy::SelfishMining),
            "private_chain" | "private" => Ok(Strategy::PrivateChain),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub protocol: ProtocolConfig,
    pub rounds: u64,
    pub seed: u64,
    pub strategy: Strategy,
    /// Lead at which the private-chain adversary publishes.
    pub private_lead: u64,
    /// Per-party query counts, overriding `protocol.queries`.
    pub party_queries: Option<Vec<u32>>,
    /// Expected new transactions per round.
    pub tx_rate: f64,
    pub lambda: f64,
    pub waive_compliance: bool,
    /// δ used for the growth envelope and `T0`.
    pub delta_target: f64,
    /// Growth window in rounds; a fifth of the horizon when unset.
    pub growth_window: Option<u64>,
    pub growth_slack: f64,
    /// Records per fairness window.
    pub fairness_window: u64,
    /// Subset whose record fraction is measured; defaults to the corrupted
    /// parties, or party 0 when there are none.
    pub fairness_subset: Option<Vec<PartyId>>,
    pub reward_per_height: f64,
    /// ε for the sample-size bound when judging fairness.
    pub fairness_epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            protocol: ProtocolConfig {
                block_threshold: 9,
                share_threshold: 4,
                safety: 12,
                ..ProtocolConfig::default()
            },
            rounds: 10_000,
            seed: 0,
            strategy: Strategy::AllHonest,
            private_lead: 2,
            party_queries: None,
            tx_rate: 0.1,
            lambda: 1.01,
            waive_compliance: false,
            delta_target: 0.1,
            growth_window: None,
            growth_slack: 0.15,
            fairness_window: 1000,
            fairness_subset: None,
            reward_per_height: 1.0,
            fairness_epsilon: 0.1,
        }
    }
}

impl SimConfig {
    pub fn queries_of(&self, party: usize) -> u32 {
        self.party_queries
            .as_ref()
            .and_then(|q| q.get(party).copied())
            .unwrap_or(self.protocol.queries)
    }

    /// Number of corrupted parties, `round(ρ·n)`; zero for all-honest runs.
    pub fn corrupted(&self) -> u32 {
        match self.strategy {
            Strategy::AllHonest => 0,
            _ => (self.protocol.rho * f64::from(self.protocol.parties)).round() as u32,
        }
    }

    /// Parties `0..n−t` are honest, the rest form the adversary.
    pub fn honest_count(&self) -> u32 {
        self.protocol.parties - self.corrupted()
    }

    pub fn growth_window(&self) -> u64 {
        self.growth_window.unwrap_or(self.rounds / 5).max(1)
    }

    /// Corrupted parties, or the first `round(ρ·n)` parties (at least one)
    /// in an all-honest run.
    pub fn coalition(&self) -> Vec<PartyId> {
        let n = self.protocol.parties;
        match self.strategy {
            Strategy::AllHonest => {
                let t = ((self.protocol.rho * f64::from(n)).round() as u32).clamp(1, n);
                (0..t).collect()
            }
            _ => (self.honest_count()..n).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.protocol.validate()?;
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if let Some(q) = &self.party_queries {
            if q.len() != self.protocol.parties as usize {
                return bad("party_queries must list one count per party");
            }
        }
        if !(self.lambda > 1.0) {
            return bad("lambda must exceed 1");
        }
        if !(self.delta_target > 0.0 && self.delta_target < 1.0) {
            return bad("delta_target must lie in (0, 1)");
        }
        if !(self.growth_slack >= 0.0 && self.growth_slack < 1.0) {
            return bad("growth_slack must lie in [0, 1)");
        }
        if !(self.tx_rate >= 0.0 && self.tx_rate <= 1.0) {
            return bad("tx_rate must lie in [0, 1]");
        }
        if self.fairness_window == 0 {
            return bad("fairness_window must be at least 1");
        }
        if !(self.reward_per_height > 0.0) {
            return bad("reward_per_height must be positive");
        }
        if !(self.fairness_epsilon > 0.0 && self.fairness_epsilon < 1.0) {
            return bad("fairness_epsilon must lie in (0, 1)");
        }
        if self.strategy != Strategy::AllHonest && self.honest_count() == 0 {
            return bad("at least one honest party is required");
        }
        if self.strategy == Strategy::PrivateChain && self.private_lead == 0 {
            return bad("private_lead must be at least 1");
        }
        let d = DerivedParams::from_config(self);
        if self.rounds > 0 && self.rounds < d.wait {
            return Err(SimError::InvalidConfig(format!(
                "rounds ({}) must be at least wait ({})",
                self.rounds, d.wait
            )));
        }
        Ok(())
    }
}

/// Quantities computed from a configuration; never set by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Mean per-party block probability per round.
    pub p: f64,
    /// Mean per-party workshare probability per round.
    pub p_f: f64,
    /// Probability that some honest party mines a block in a round.
    pub alpha: f64,
    /// Expected adversarial blocks per round.
    pub beta: f64,
    pub gamma: f64,
    /// Freshness horizon in rounds, rounded up.
    pub wait: u64,
    pub q_ratio: f64,
    pub kappa_f: f64,
    pub t0: f64,
    /// Lower growth rate in records per round, from the expected number of
    /// honest workshare-grade queries.
    pub g0: f64,
    /// Upper growth rate in records per round, over all queries.
    pub g1: f64,
}

fn per_round(threshold: u32, queries: u32) -> f64 {
    let p = (-f64::from(threshold)).exp2();
    1.0 - (1.0 - p).powf(f64::from(queries))
}

impl DerivedParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        let pc = &cfg.protocol;
        let n = pc.parties;
        let honest = cfg.honest_count();
        let (mut miss_h, mut beta, mut sum_p, mut sum_pf) = (1.0f64, 0.0, 0.0, 0.0);
        // expected workshares per round, all and honest
        let (mut rate, mut honest_rate) = (0.0, 0.0);
        for i in 0..n {
            let q = cfg.queries_of(i as usize);
            let p = per_round(pc.block_threshold, q);
            let pf = per_round(pc.share_threshold, q);
            sum_p += p;
            sum_pf += pf;
            let r = f64::from(q) * pc.p_f();
            rate += r;
            if i < honest {
                miss_h *= 1.0 - p;
                honest_rate += r;
            } else {
                beta += p;
            }
        }
        let alpha = 1.0 - miss_h;
        let delta_net = pc.delay as f64;
        let gamma = alpha / (1.0 + delta_net * alpha);
        let kappa = pc.safety as f64;
        let wait = if gamma > 0.0 {
            (2.0 * delta_net + 2.0 * kappa / gamma).ceil() as u64
        } else {
            u64::MAX
        };
        let q_ratio = pc.p_f() / pc.p();
        let kappa_f = 2.0 * q_ratio * pc.recency as f64 * kappa;
        let delta = cfg.delta_target;
        DerivedParams {
            p: sum_p / f64::from(n),
            p_f: sum_pf / f64::from(n),
            alpha,
            beta,
            gamma,
            wait,
            q_ratio,
            kappa_f,
            t0: 5.0 * kappa_f / delta,
            g0: (1.0 - delta) * honest_rate,
            g1: (1.0 + delta) * rate,
        }
    }
}

/// `α(1 − 2(Δ+1)α) ≥ λβ` with `α = 1 − (1−p)^{(1−ρ)n}` and `β = ρnp`.
pub fn compliance_check(n: u32, rho: f64, delta: u64, p: f64, lambda: f64) -> bool {
    let n = f64::from(n);
    let alpha = 1.0 - (1.0 - p).powf((1.0 - rho) * n);
    let beta = rho * n * p;
    compliant(alpha, beta, delta, lambda)
}

fn compliant(alpha: f64, beta: f64, delta: u64, lambda: f64) -> bool {
    alpha * (1.0 - 2.0 * (delta as f64 + 1.0) * alpha) >= lambda * beta
}

/// Compliance on the derived parameters of a configuration.
pub fn config_compliant(cfg: &SimConfig) -> bool {
    let d = DerivedParams::from_config(cfg);
    compliant(d.alpha, d.beta, cfg.protocol.delay, cfg.lambda)
}
