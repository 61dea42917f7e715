//! Proportional reward splitting over a finalized chain.
//!
//! Every height `h ≥ 1` has one reward pot. It is shared by the canonical
//! block at `h` and all uncles and workshares whose referenced block sits at
//! `h − 1`, in proportion to intrinsic work. A height is final once the
//! chain has `h + R` blocks, because no later block may still include an
//! object of that height.

mod legacy;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::Chain;
use crate::scalar::Scalar;
use crate::work::{PartyId, ProtocolConfig};

pub use legacy::{
    legacy_block_reward, legacy_block_weight, legacy_share_bits, legacy_share_reward,
    legacy_share_weight,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("no eligible object at height {0}")]
    Degenerate(u64),
    #[error("height {height} is not final on a chain of length {len}")]
    NotFinalized { height: u64, len: u64 },
    #[error("reward must be positive")]
    NonPositiveReward,
    #[error("domain error: {0}")]
    Domain(&'static str),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectKind {
    Block,
    Uncle,
    Workshare,
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectKind::Block => "block",
            ObjectKind::Uncle => "uncle",
            ObjectKind::Workshare => "workshare",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibleObject {
    pub kind: ObjectKind,
    pub height: u64,
    pub work: u32,
    pub owner: PartyId,
    /// Height of the containing block (own height for canonical blocks).
    pub published_at: u64,
    pub id: u64,
}

/// Collects eligible objects per height, re-checking both windows, the work
/// thresholds, and first inclusion independently of block validation.
pub fn eligible_objects(chain: &Chain, cfg: &ProtocolConfig) -> BTreeMap<u64, Vec<EligibleObject>> {
    let blocks = chain.blocks();
    let canonical: HashMap<u64, u64> = blocks
        .iter()
        .enumerate()
        .map(|(h, b)| (b.id(), h as u64))
        .collect();
    // uncle id -> (height, fork depth)
    let mut uncles: HashMap<u64, (u64, u64)> = HashMap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut out: BTreeMap<u64, Vec<EligibleObject>> = BTreeMap::new();
    for (c, b) in blocks.iter().enumerate() {
        let c = c as u64;
        if c > 0 {
            out.entry(c).or_default().push(EligibleObject {
                kind: ObjectKind::Block,
                height: c,
                work: b.work(),
                owner: b.miner,
                published_at: c,
                id: b.id(),
            });
        }
        for e in &b.shares {
            if canonical.contains_key(&e.id()) || !seen.insert(e.id()) {
                continue;
            }
            let parent = canonical
                .get(&e.parent())
                .map(|&h| (h, 0))
                .or_else(|| uncles.get(&e.parent()).map(|&(h, d)| (h, d)));
            let Some((r, depth)) = parent else { continue };
            if r >= c || r + cfg.recency < c {
                continue;
            }
            let work = e.work();
            let kind = if work > cfg.block_threshold {
                if depth + 1 > cfg.fork_window {
                    continue;
                }
                uncles.insert(e.id(), (r + 1, depth + 1));
                ObjectKind::Uncle
            } else if work > cfg.share_threshold {
                ObjectKind::Workshare
            } else {
                continue;
            };
            out.entry(r + 1).or_default().push(EligibleObject {
                kind,
                height: r + 1,
                work,
                owner: e.miner,
                published_at: c,
                id: e.id(),
            });
        }
    }
    out
}

/// Heights `h ≥ 1` with `h + R ≤ len`.
pub fn finalized_heights(chain: &Chain, cfg: &ProtocolConfig) -> std::ops::RangeInclusive<u64> {
    let last = chain.len().saturating_sub(cfg.recency);
    1..=last
}

/// One payout line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoutRow<S> {
    pub height: u64,
    pub party: PartyId,
    pub kind: ObjectKind,
    pub work: u32,
    pub payout: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardAllocation<S> {
    pub per_party: BTreeMap<PartyId, S>,
    pub per_height: BTreeMap<u64, BTreeMap<PartyId, S>>,
    pub rows: Vec<PayoutRow<S>>,
    /// Sum of the pots that were distributed.
    pub distributed: S,
}

impl<S: Scalar> RewardAllocation<S> {
    pub fn total(&self) -> S {
        self.per_party
            .values()
            .cloned()
            .fold(S::zero(), |a, b| a + b)
    }

    /// Share of `party` in everything distributed.
    pub fn fraction(&self, party: PartyId) -> f64 {
        let total = self.total().to_f64_lossy();
        if total == 0.0 {
            return 0.0;
        }
        self.per_party
            .get(&party)
            .map_or(0.0, |v| v.to_f64_lossy() / total)
    }

    /// Combined share of a set of parties.
    pub fn coalition_fraction(&self, parties: &HashSet<PartyId>) -> f64 {
        parties.iter().map(|&p| self.fraction(p)).sum()
    }

    /// CSV with columns `height,party,kind,work,payout`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "height,party,kind,work,payout")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.height,
                r.party,
                r.kind,
                r.work,
                r.payout.to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

fn split<S: Scalar>(objs: &[EligibleObject], reward: &S) -> Vec<(usize, S)> {
    let total: u64 = objs.iter().map(|o| u64::from(o.work)).sum();
    let total_s = S::from_count(total);
    objs.iter()
        .enumerate()
        .map(|(i, o)| {
            let amount = reward.clone() * S::from_count(u64::from(o.work)) / total_s.clone();
            (i, amount)
        })
        .collect()
}

/// Splits `reward` among the eligible objects of height `h`.
pub fn allocate_height<S: Scalar>(
    chain: &Chain,
    h: u64,
    reward: S,
    cfg: &ProtocolConfig,
) -> Result<BTreeMap<PartyId, S>, RewardError> {
    if reward <= S::zero() {
        return Err(RewardError::NonPositiveReward);
    }
    if h == 0 || h + cfg.recency > chain.len() {
        return Err(RewardError::NotFinalized {
            height: h,
            len: chain.len(),
        });
    }
    let all = eligible_objects(chain, cfg);
    let objs = all.get(&h).ok_or(RewardError::Degenerate(h))?;
    let mut out = BTreeMap::new();
    for (i, amount) in split(objs, &reward) {
        let e = out.entry(objs[i].owner).or_insert_with(S::zero);
        *e = e.clone() + amount;
    }
    Ok(out)
}

/// Allocates `per_height` tokens for every finalized height.
pub fn allocate_all<S: Scalar>(
    chain: &Chain,
    per_height: S,
    cfg: &ProtocolConfig,
) -> Result<RewardAllocation<S>, RewardError> {
    if per_height <= S::zero() {
        return Err(RewardError::NonPositiveReward);
    }
    let all = eligible_objects(chain, cfg);
    let mut alloc = RewardAllocation {
        per_party: BTreeMap::new(),
        per_height: BTreeMap::new(),
        rows: Vec::new(),
        distributed: S::zero(),
    };
    for h in finalized_heights(chain, cfg) {
        let objs = all.get(&h).ok_or(RewardError::Degenerate(h))?;
        let height_map = alloc.per_height.entry(h).or_default();
        for (i, amount) in split(objs, &per_height) {
            let o = &objs[i];
            let e = height_map.entry(o.owner).or_insert_with(S::zero);
            *e = e.clone() + amount.clone();
            let p = alloc.per_party.entry(o.owner).or_insert_with(S::zero);
            *p = p.clone() + amount.clone();
            alloc.rows.push(PayoutRow {
                height: h,
                party: o.owner,
                kind: o.kind,
                work: o.work,
                payout: amount,
            });
        }
        alloc.distributed = alloc.distributed.clone() + per_height.clone();
    }
    Ok(alloc)
}
