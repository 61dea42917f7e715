use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::work::{
    classify, share_digest, tx_digest, Oracle, PartyId, ProtocolConfig, Transaction, WorkObject,
    WorkObjectHeader,
};

use super::chain::Chain;
use super::validate::{validate_block, validate_chain, Violation, WindowView};

/// What a party diffuses in one round.
#[derive(Clone, Debug, Default)]
pub struct Message {
    pub from: PartyId,
    pub chain: Option<Chain>,
    pub objects: Vec<Arc<WorkObject>>,
    pub txs: Vec<Transaction>,
}

/// Heaviest valid chain among `local` and `candidates`. Ties keep `local`,
/// then the first received.
pub fn maxvalid<'a, I>(local: &Chain, candidates: I, cfg: &ProtocolConfig) -> Chain
where
    I: IntoIterator<Item = &'a Chain>,
{
    let mut best = local.clone();
    for c in candidates {
        if c.total_work() <= best.total_work() || c.tip_id() == best.tip_id() {
            continue;
        }
        if validate_chain(c, cfg) {
            best = c.clone();
        }
    }
    best
}

/// Sanitized lists ready for the next block on top of a chain.
#[derive(Clone, Debug, Default)]
pub struct Sanitized {
    pub txs: Vec<Transaction>,
    pub shares: Vec<Arc<WorkObject>>,
    /// Pool entries that can never become valid on this chain.
    pub dropped: Vec<u64>,
}

fn permanent(v: &[Violation]) -> bool {
    !v.iter().all(|x| *x == Violation::DanglingRef)
}

/// Keeps the transactions and pool objects that are valid if included in
/// the next block on `chain`. Uncles come first, in dependency order, so
/// shares may reference them.
pub fn sanitize<'a, I>(
    mempool_tx: &[Transaction],
    pool: I,
    chain: &Chain,
    cfg: &ProtocolConfig,
) -> Sanitized
where
    I: IntoIterator<Item = &'a Arc<WorkObject>>,
{
    let mut view = WindowView::new(chain, cfg);
    let mut out = Sanitized::default();
    admit_objects(&mut view, pool, cfg, &mut out);
    out.txs = sanitize_txs(mempool_tx, chain);
    out
}

fn admit_objects<'a, I>(view: &mut WindowView, pool: I, cfg: &ProtocolConfig, out: &mut Sanitized)
where
    I: IntoIterator<Item = &'a Arc<WorkObject>>,
{
    let (mut uncles, mut shares): (Vec<_>, Vec<_>) = pool
        .into_iter()
        .partition(|o| o.work() > cfg.block_threshold);
    uncles.sort_by_key(|o| (o.mint_round, o.id()));
    shares.sort_by_key(|o| (o.mint_round, o.id()));
    // an uncle may build on another uncle of the pool
    loop {
        let mut progress = false;
        let mut rest = Vec::new();
        for u in uncles {
            match view.check(u, cfg) {
                Ok(kind) => {
                    view.admit(u, kind);
                    out.shares.push(u.clone());
                    progress = true;
                }
                Err(v) if permanent(&v) => out.dropped.push(u.id()),
                Err(_) => rest.push(u),
            }
        }
        uncles = rest;
        if !progress || uncles.is_empty() {
            break;
        }
    }
    for s in shares {
        match view.check(s, cfg) {
            Ok(kind) => {
                view.admit(s, kind);
                out.shares.push(s.clone());
            }
            Err(v) if permanent(&v) => out.dropped.push(s.id()),
            Err(_) => {}
        }
    }
}

struct Working {
    tip: u64,
    view: WindowView,
    shares: Vec<Arc<WorkObject>>,
    share_digest: u64,
}

/// Objects a party produced in one round.
#[derive(Clone, Debug, Default)]
pub struct RoundOutput {
    pub blocks: Vec<Arc<WorkObject>>,
    pub shares: Vec<Arc<WorkObject>>,
    /// Set when the local chain was extended by the party itself.
    pub chain: Option<Chain>,
    pub adopted: bool,
}

/// Local state of an honest party.
pub struct PartyState {
    pub id: PartyId,
    pub chain: Chain,
    pub mempool_tx: Vec<Transaction>,
    pool: HashMap<u64, Arc<WorkObject>>,
    pool_age: HashMap<u64, u64>,
    working: Option<Working>,
}

/// Rounds an unresolvable pool object is kept around.
const POOL_PATIENCE: u64 = 10_000;

impl PartyState {
    pub fn new(id: PartyId, genesis: Chain) -> Self {
        PartyState {
            id,
            chain: genesis,
            mempool_tx: Vec::new(),
            pool: HashMap::new(),
            pool_age: HashMap::new(),
            working: None,
        }
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    fn pool_insert(&mut self, o: Arc<WorkObject>, round: u64) -> bool {
        if self.pool.contains_key(&o.id()) {
            return false;
        }
        self.pool_age.insert(o.id(), round);
        let o = if o.txs.is_empty() && o.shares.is_empty() {
            o
        } else {
            Arc::new(o.as_share())
        };
        self.pool.insert(o.id(), o);
        true
    }

    fn pool_remove(&mut self, id: u64) {
        self.pool.remove(&id);
        self.pool_age.remove(&id);
    }

    /// Blocks and shares of `other` above its common block with `self.chain`.
    fn harvest(&mut self, other: &Chain, with_shares: bool, cfg: &ProtocolConfig, round: u64) {
        let common = self.chain.common_height(other).unwrap_or(0);
        let floor = self
            .chain
            .height()
            .saturating_sub(cfg.recency + cfg.fork_window);
        let mut found = Vec::new();
        for link in other.links() {
            if link.height <= common || link.height < floor {
                break;
            }
            found.push(link.block.clone());
            if with_shares {
                found.extend(link.block.shares.iter().cloned());
            }
        }
        for o in found {
            self.pool_insert(o, round);
        }
    }

    fn rebuild(&mut self, cfg: &ProtocolConfig, round: u64) {
        let mut view = WindowView::new(&self.chain, cfg);
        let mut out = Sanitized::default();
        admit_objects(&mut view, self.pool.values(), cfg, &mut out);
        for id in out.dropped {
            self.pool_remove(id);
        }
        let stale: Vec<u64> = self
            .pool_age
            .iter()
            .filter(|(_, &r)| r + POOL_PATIENCE < round)
            .map(|(&id, _)| id)
            .collect();
        for id in stale {
            self.pool_remove(id);
        }
        let chain = &self.chain;
        self.mempool_tx.retain(|t| !chain.contains_tx(t.0));
        self.working = Some(Working {
            tip: self.chain.tip_id(),
            share_digest: share_digest(&out.shares),
            view,
            shares: out.shares,
        });
    }

    fn admit_new(&mut self, new: &[Arc<WorkObject>], cfg: &ProtocolConfig) {
        let Some(w) = self.working.as_mut() else {
            return;
        };
        let mut out = Sanitized::default();
        admit_objects(&mut w.view, new.iter(), cfg, &mut out);
        if !out.shares.is_empty() {
            w.shares.extend(out.shares);
            w.share_digest = share_digest(&w.shares);
        }
        for id in out.dropped {
            self.pool_remove(id);
        }
    }

    /// One round of the mining loop: adopt the heaviest valid chain, then
    /// spend exactly `cfg.queries` oracle queries on top of it.
    pub fn execute_round(
        &mut self,
        inbox: &[Message],
        oracle: &Oracle,
        cfg: &ProtocolConfig,
        round: u64,
    ) -> RoundOutput {
        let mut out = RoundOutput::default();
        let candidates: Vec<&Chain> = inbox.iter().filter_map(|m| m.chain.as_ref()).collect();
        let best = maxvalid(&self.chain, candidates.iter().copied(), cfg);
        if best.tip_id() != self.chain.tip_id() {
            let old = std::mem::replace(&mut self.chain, best);
            if !old.is_prefix_of(&self.chain) {
                self.harvest(&old, true, cfg, round);
            }
            out.adopted = true;
        }
        for c in &candidates {
            if c.tip_id() != self.chain.tip_id() && c.total_work() <= self.chain.total_work() {
                self.harvest(c, false, cfg, round);
            }
        }
        let mut fresh = Vec::new();
        for m in inbox {
            for o in &m.objects {
                if self.pool_insert(o.clone(), round) {
                    fresh.push(o.clone());
                }
            }
            self.mempool_tx.extend(m.txs.iter().copied());
        }

        let tip_changed = self
            .working
            .as_ref()
            .is_none_or(|w| w.tip != self.chain.tip_id());
        if tip_changed {
            self.rebuild(cfg, round);
        } else if !fresh.is_empty() {
            self.admit_new(&fresh, cfg);
        }

        let mut txs = sanitize_txs(&self.mempool_tx, &self.chain);
        let mut txd = tx_digest(&txs);
        for i in 0..u64::from(cfg.queries) {
            let w = self.working.as_ref().expect("built above");
            let header = WorkObjectHeader {
                tx_digest: txd,
                share_digest: w.share_digest,
                parent_ref: self.chain.tip_id(),
                stable_ref: self
                    .chain
                    .height()
                    .checked_sub(cfg.safety)
                    .and_then(|h| self.chain.block_at(h))
                    .map(|b| b.id()),
                nonce: i,
            };
            let hash = oracle.query(&header, self.id, round, i);
            let class = classify(hash.work(), cfg);
            if class.is_block() {
                let block = Arc::new(WorkObject {
                    header,
                    hash,
                    txs: std::mem::take(&mut txs),
                    shares: w.shares.clone(),
                    miner: self.id,
                    mint_round: round,
                });
                debug_assert_eq!(validate_block(&block, &self.chain, cfg), Ok(()));
                self.chain = self.chain.extend(block.clone());
                let _ = self.chain.tip().valid.set(true);
                out.blocks.push(block);
                self.rebuild(cfg, round);
                txs = sanitize_txs(&self.mempool_tx, &self.chain);
                txd = tx_digest(&txs);
            } else if class.is_share() {
                let share = Arc::new(WorkObject {
                    header,
                    hash,
                    txs: Vec::new(),
                    shares: Vec::new(),
                    miner: self.id,
                    mint_round: round,
                });
                self.pool_insert(share.clone(), round);
                self.admit_new(std::slice::from_ref(&share), cfg);
                out.shares.push(share);
            }
        }
        if !out.blocks.is_empty() {
            out.chain = Some(self.chain.clone());
        }
        out
    }
}

fn sanitize_txs(mempool: &[Transaction], chain: &Chain) -> Vec<Transaction> {
    let mut seen = HashSet::new();
    mempool
        .iter()
        .copied()
        .filter(|t| !chain.contains_tx(t.0) && seen.insert(t.0))
        .collect()
}
