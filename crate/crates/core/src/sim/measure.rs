use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::protocol::Chain;
use crate::rewards::{allocate_all, eligible_objects, finalized_heights};
use crate::sampling::achievable_inaccuracy;
use crate::work::PartyId;

use super::harness::ExecutionTrace;
use super::{config_compliant, SimError, Strategy};

fn contains_at(chain: &Chain, id: u64, height: u64) -> bool {
    chain.block_at(height).is_some_and(|b| b.id() == id)
}

/// Whether, for every pair of honest parties and rounds `r ≤ r'`, the chain
/// of one at `r` minus its last `t` blocks is a prefix of the chain of the
/// other at `r'`.
pub fn measure_consistency(trace: &ExecutionTrace, t: u64) -> bool {
    let genesis = match trace.final_chains.first() {
        Some(c) => c.genesis_id(),
        None => return true,
    };
    // deepest anchor so far; all earlier anchors are its ancestors
    let mut anchor = (genesis, 0u64);
    let mut held: HashMap<PartyId, Chain> = HashMap::new();
    let mut i = 0;
    let tips = &trace.tips;
    while i < tips.len() {
        let round = tips[i].round;
        let mut moved = false;
        while i < tips.len() && tips[i].round == round {
            let e = &tips[i];
            if !contains_at(&e.chain, anchor.0, anchor.1) {
                return false;
            }
            let h = e.chain.height().saturating_sub(t);
            if h > anchor.1 {
                let b = e.chain.block_at(h).expect("height within chain");
                anchor = (b.id(), h);
                moved = true;
            }
            held.insert(e.party, e.chain.clone());
            i += 1;
        }
        if moved && !held.values().all(|c| contains_at(c, anchor.0, anchor.1)) {
            return false;
        }
    }
    true
}

/// Smallest record increment of any honest chain over `t0` rounds relative
/// to the longest honest chain at the window start, and the largest over
/// `t1` rounds relative to the shortest; `None` when the horizon is shorter
/// than a window.
pub fn measure_growth(trace: &ExecutionTrace, t0: u64, t1: u64) -> Option<(u64, u64)> {
    let rows = &trace.records;
    let lo: Vec<u64> = rows.iter().map(|r| *r.iter().min().unwrap_or(&0)).collect();
    let hi: Vec<u64> = rows.iter().map(|r| *r.iter().max().unwrap_or(&0)).collect();
    let (t0, t1) = (t0 as usize, t1 as usize);
    if t0 == 0 || t1 == 0 || t0 >= rows.len() || t1 >= rows.len() {
        return None;
    }
    let min = (0..rows.len() - t0)
        .map(|s| lo[s + t0].saturating_sub(hi[s]))
        .min()?;
    let max = (0..rows.len() - t1)
        .map(|s| hi[s + t1].saturating_sub(lo[s]))
        .max()?;
    Some((min, max))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreshnessResult {
    /// Honest objects mined before `rounds − wait`.
    pub checked: u64,
    pub violations: u64,
}

/// Every honest object mined before `rounds − wait` must sit in every final
/// honest chain at least `κ` blocks from the end.
pub fn measure_freshness(trace: &ExecutionTrace) -> FreshnessResult {
    let cutoff = trace.config.rounds.saturating_sub(trace.derived.wait);
    let kappa = trace.config.protocol.safety;
    let positions: Vec<(HashMap<u64, u64>, u64)> = trace
        .final_chains
        .iter()
        .map(|c| {
            let mut pos = HashMap::new();
            for l in c.links() {
                pos.insert(l.block.id(), l.height);
                for s in &l.block.shares {
                    pos.insert(s.id(), l.height);
                }
            }
            (pos, c.height())
        })
        .collect();
    let mut res = FreshnessResult::default();
    for (id, _, round, _) in trace.honest_mined() {
        if round >= cutoff {
            continue;
        }
        res.checked += 1;
        let ok = positions
            .iter()
            .all(|(pos, h)| pos.get(&id).is_some_and(|&at| at + kappa <= *h));
        if !ok {
            res.violations += 1;
        }
    }
    res
}

/// Records of `chain` in order: each block's share list, then the block.
fn record_owners(chain: &Chain) -> Vec<PartyId> {
    let mut out = Vec::new();
    for b in chain.blocks().iter().skip(1) {
        out.extend(b.shares.iter().map(|s| s.miner));
        out.push(b.miner);
    }
    out
}

/// Smallest fraction of records owned by `subset` over all windows of
/// `window` consecutive records of the first honest final chain.
pub fn measure_fairness(trace: &ExecutionTrace, window: u64, subset: &[PartyId]) -> Option<f64> {
    let chain = trace.final_chains.first()?;
    let set: HashSet<PartyId> = subset.iter().copied().collect();
    let hits: Vec<u64> = record_owners(chain)
        .iter()
        .map(|o| u64::from(set.contains(o)))
        .collect();
    let w = window as usize;
    if w == 0 || hits.len() < w {
        return None;
    }
    let mut cur: u64 = hits[..w].iter().sum();
    let mut best = cur;
    for i in w..hits.len() {
        cur = cur + hits[i] - hits[i - w];
        best = best.min(cur);
    }
    Some(best as f64 / window as f64)
}

/// `(1+δ)/(1−δ)`, at most `1 + 3δ` for `δ ≤ 1/3`.
pub fn ic_bound_factor(delta: f64) -> f64 {
    (1.0 + delta) / (1.0 - delta)
}

/// Checks an allocated fraction against `(1 ± δ)·ρ`; only the upper side
/// applies to adversarial runs.
pub fn ic_bound_check(fraction: f64, rho: f64, delta: f64, honest_run: bool) -> Result<bool, SimError> {
    if !(delta > 0.0 && delta < 0.3) {
        return Err(SimError::InvalidConfig("delta must lie in (0, 0.3)".into()));
    }
    let upper = fraction <= (1.0 + delta) * rho;
    let lower = !honest_run || fraction >= (1.0 - delta) * rho;
    Ok(upper && lower)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessEntry {
    pub subset: Vec<PartyId>,
    /// Query share of the subset.
    pub phi: f64,
    pub window: u64,
    pub observed_fraction: Option<f64>,
    /// `1 − observed/φ`, floored at zero.
    pub observed_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSummary {
    pub finalized_heights: u64,
    /// Eligible objects over the finalized heights.
    pub objects: u64,
    pub per_party: BTreeMap<PartyId, f64>,
    pub coalition: Vec<PartyId>,
    pub coalition_fraction: f64,
    pub coalition_phi: f64,
    /// Accuracy the sample-size bound predicts for `objects` samples.
    pub predicted_delta: Option<f64>,
    pub ic_bound_ok: Option<bool>,
    /// `|Σ payouts − Σ pots| / Σ pots`.
    pub conservation_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub rounds: u64,
    pub final_height: u64,
    pub compliance_ok: bool,
    pub consistency_ok: bool,
    pub growth_window: u64,
    pub growth_min: Option<u64>,
    pub growth_max: Option<u64>,
    pub growth_lower_bound: f64,
    pub growth_upper_bound: f64,
    pub growth_ok: bool,
    pub wait: u64,
    pub freshness_checked: u64,
    pub freshness_violations: u64,
    pub fairness: Vec<FairnessEntry>,
    pub rewards: Option<RewardSummary>,
}

impl PropertyReport {
    /// Consistency, growth, freshness, and reward conservation at `1e-9`.
    pub fn all_ok(&self) -> bool {
        self.consistency_ok
            && self.growth_ok
            && self.freshness_violations == 0
            && self
                .rewards
                .as_ref()
                .is_some_and(|r| r.conservation_error <= 1e-9)
    }
}

fn query_share(trace: &ExecutionTrace, subset: &[PartyId]) -> f64 {
    let cfg = &trace.config;
    let total: u64 = (0..cfg.protocol.parties)
        .map(|i| u64::from(cfg.queries_of(i as usize)))
        .sum();
    let part: u64 = subset
        .iter()
        .filter(|&&i| i < cfg.protocol.parties)
        .map(|&i| u64::from(cfg.queries_of(i as usize)))
        .sum();
    part as f64 / total as f64
}

fn reward_summary(trace: &ExecutionTrace) -> Option<RewardSummary> {
    let cfg = &trace.config;
    let pc = &cfg.protocol;
    let chain = trace.final_chains.first()?;
    let alloc = allocate_all(chain, cfg.reward_per_height, pc).ok()?;
    let eligible = eligible_objects(chain, pc);
    let heights = finalized_heights(chain, pc);
    let objects: u64 = heights
        .clone()
        .filter_map(|h| eligible.get(&h))
        .map(|v| v.len() as u64)
        .sum();
    let total: f64 = alloc.per_party.values().sum();
    let conservation_error = if alloc.distributed > 0.0 {
        (total - alloc.distributed).abs() / alloc.distributed
    } else {
        0.0
    };
    let coalition = cfg.coalition();
    let set: HashSet<PartyId> = coalition.iter().copied().collect();
    // the adversary mines under the first corrupted id
    let coalition_fraction = alloc.coalition_fraction(&set);
    let phi = query_share(trace, &coalition);
    let predicted_delta = achievable_inaccuracy(objects as f64, cfg.fairness_epsilon, phi).ok();
    let honest_run = cfg.strategy == Strategy::AllHonest;
    let ic_bound_ok = predicted_delta
        .filter(|&d| d < 0.3)
        .and_then(|d| ic_bound_check(coalition_fraction, phi, d, honest_run).ok());
    Some(RewardSummary {
        finalized_heights: heights.count() as u64,
        objects,
        per_party: alloc
            .per_party
            .keys()
            .map(|&p| (p, alloc.fraction(p)))
            .collect(),
        coalition,
        coalition_fraction,
        coalition_phi: phi,
        predicted_delta,
        ic_bound_ok,
        conservation_error,
    })
}

/// Evaluates every property on one trace.
pub fn evaluate(trace: &ExecutionTrace) -> PropertyReport {
    let cfg = &trace.config;
    let d = &trace.derived;
    let t = cfg.growth_window();
    let growth = measure_growth(trace, t, t);
    let lower = d.g0 * t as f64 * (1.0 - cfg.growth_slack);
    let upper = d.g1 * t as f64 * (1.0 + cfg.growth_slack);
    let growth_ok = growth.is_none_or(|(lo, hi)| lo as f64 >= lower && hi as f64 <= upper);
    let fresh = measure_freshness(trace);
    let subset = cfg.fairness_subset.clone().unwrap_or_else(|| {
        if cfg.corrupted() > 0 {
            cfg.coalition()
        } else {
            vec![0]
        }
    });
    let phi = query_share(trace, &subset);
    let observed = measure_fairness(trace, cfg.fairness_window, &subset);
    PropertyReport {
        seed: cfg.seed,
        rounds: cfg.rounds,
        final_height: trace.final_chains.first().map_or(0, Chain::height),
        compliance_ok: config_compliant(cfg),
        consistency_ok: measure_consistency(trace, cfg.protocol.safety),
        growth_window: t,
        growth_min: growth.map(|g| g.0),
        growth_max: growth.map(|g| g.1),
        growth_lower_bound: lower,
        growth_upper_bound: upper,
        growth_ok,
        wait: d.wait,
        freshness_checked: fresh.checked,
        freshness_violations: fresh.violations,
        fairness: vec![FairnessEntry {
            subset,
            phi,
            window: cfg.fairness_window,
            observed_fraction: observed,
            observed_delta: observed.map(|o| (1.0 - o / phi).max(0.0)),
        }],
        rewards: reward_summary(trace),
    }
}
