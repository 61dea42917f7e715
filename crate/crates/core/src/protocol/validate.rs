use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::work::{classify, share_digest, tx_digest, ProtocolConfig, WorkObject};

use super::chain::Chain;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    TxDigestMismatch,
    ShareDigestMismatch,
    BadParent,
    DuplicateObject,
    InvalidTransaction,
    InsufficientWork,
    Stale,
    ForkTooDeep,
    DanglingRef,
    NotIncluded,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::TxDigestMismatch => "TX_DIGEST_MISMATCH",
            Violation::ShareDigestMismatch => "SHARE_DIGEST_MISMATCH",
            Violation::BadParent => "BAD_PARENT",
            Violation::DuplicateObject => "DUPLICATE_OBJECT",
            Violation::InvalidTransaction => "INVALID_TRANSACTION",
            Violation::InsufficientWork => "INSUFFICIENT_WORK",
            Violation::Stale => "STALE",
            Violation::ForkTooDeep => "FORK_TOO_DEEP",
            Violation::DanglingRef => "DANGLING_REF",
            Violation::NotIncluded => "NOT_INCLUDED",
        };
        f.write_str(s)
    }
}

/// How a valid share-list entry counts towards rewards.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryKind {
    /// `height` is the parent height plus one; `depth` the hops to the chain.
    Uncle { height: u64, depth: u64 },
    /// `height` is the referenced height plus one.
    Workshare { height: u64 },
}

impl EntryKind {
    pub fn height(&self) -> u64 {
        match *self {
            EntryKind::Uncle { height, .. } | EntryKind::Workshare { height } => height,
        }
    }
}

#[derive(Copy, Clone, Debug)]
struct RefInfo {
    height: u64,
    /// Zero for canonical blocks.
    depth: u64,
}

/// Everything needed to check share-list entries of a block at height
/// `containing`: recent canonical blocks, uncles they include, and every
/// object already published in the window.
#[derive(Clone)]
pub(crate) struct WindowView {
    chain: Chain,
    containing: u64,
    canonical: HashMap<u64, u64>,
    uncles: HashMap<u64, RefInfo>,
    seen: HashSet<u64>,
}

impl WindowView {
    /// View for a block to be appended on top of `chain`.
    pub(crate) fn new(chain: &Chain, cfg: &ProtocolConfig) -> Self {
        let containing = chain.height() + 1;
        let span = cfg.recency + cfg.fork_window + 1;
        let mut canonical = HashMap::new();
        let mut uncles = HashMap::new();
        let mut seen = HashSet::new();
        let recent: Vec<_> = chain.links().take(span as usize).collect();
        for link in &recent {
            canonical.insert(link.block.id(), link.height);
        }
        // oldest first so an uncle's parent uncle is known before it
        for link in recent.iter().rev() {
            for e in &link.block.shares {
                seen.insert(e.id());
                if e.work() > cfg.block_threshold {
                    let parent = canonical
                        .get(&e.parent())
                        .map(|&h| RefInfo { height: h, depth: 0 })
                        .or_else(|| uncles.get(&e.parent()).copied());
                    if let Some(p) = parent {
                        uncles.insert(
                            e.id(),
                            RefInfo {
                                height: p.height + 1,
                                depth: p.depth + 1,
                            },
                        );
                    }
                }
            }
        }
        WindowView {
            chain: chain.clone(),
            containing,
            canonical,
            uncles,
            seen,
        }
    }

    fn resolve(&self, id: u64) -> Option<RefInfo> {
        self.canonical
            .get(&id)
            .map(|&h| RefInfo { height: h, depth: 0 })
            .or_else(|| self.uncles.get(&id).copied())
    }

    pub(crate) fn is_published(&self, id: u64) -> bool {
        self.seen.contains(&id) || self.canonical.contains_key(&id)
    }

    /// Checks one entry as if it were appended to the share list under
    /// construction.
    pub(crate) fn check(
        &self,
        e: &WorkObject,
        cfg: &ProtocolConfig,
    ) -> Result<EntryKind, Vec<Violation>> {
        let mut v = Vec::new();
        if self.is_published(e.id()) {
            v.push(Violation::DuplicateObject);
        }
        let class = classify(e.work(), cfg);
        if !class.is_share() {
            v.push(Violation::InsufficientWork);
        }
        let kind = match self.resolve(e.parent()) {
            None => {
                let deep = self.chain.links().any(|l| l.block.id() == e.parent());
                v.push(if deep {
                    Violation::Stale
                } else {
                    Violation::DanglingRef
                });
                None
            }
            Some(r) => {
                if r.height >= self.containing || r.height + cfg.recency < self.containing {
                    v.push(Violation::Stale);
                }
                if class.is_block() {
                    let depth = r.depth + 1;
                    if depth > cfg.fork_window {
                        v.push(Violation::ForkTooDeep);
                    }
                    Some(EntryKind::Uncle {
                        height: r.height + 1,
                        depth,
                    })
                } else {
                    Some(EntryKind::Workshare {
                        height: r.height + 1,
                    })
                }
            }
        };
        match kind {
            Some(k) if v.is_empty() => Ok(k),
            _ => Err(v),
        }
    }

    pub(crate) fn admit(&mut self, e: &WorkObject, kind: EntryKind) {
        self.seen.insert(e.id());
        if let EntryKind::Uncle { height, depth } = kind {
            self.uncles.insert(e.id(), RefInfo { height, depth });
        }
    }
}

/// Checks `b` as the next block on top of `chain`.
pub fn validate_block(
    b: &WorkObject,
    chain: &Chain,
    cfg: &ProtocolConfig,
) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if tx_digest(&b.txs) != b.header.tx_digest {
        v.push(Violation::TxDigestMismatch);
    }
    if share_digest(&b.shares) != b.header.share_digest {
        v.push(Violation::ShareDigestMismatch);
    }
    if b.parent() != chain.tip_id() {
        v.push(Violation::BadParent);
    }
    let mut txs = HashSet::new();
    if b
        .txs
        .iter()
        .any(|t| !txs.insert(t.0) || chain.contains_tx(t.0))
    {
        v.push(Violation::InvalidTransaction);
    }
    if b.work() <= cfg.block_threshold {
        v.push(Violation::InsufficientWork);
    }
    let mut view = WindowView::new(chain, cfg);
    if view.is_published(b.id()) {
        v.push(Violation::DuplicateObject);
    }
    for e in &b.shares {
        if e.id() == b.id() {
            v.push(Violation::DuplicateObject);
            continue;
        }
        match view.check(e, cfg) {
            Ok(kind) => view.admit(e, kind),
            Err(mut errs) => {
                v.append(&mut errs);
                view.seen.insert(e.id());
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        v.sort();
        v.dedup();
        Err(v)
    }
}

/// Validates every block of `chain`; results are cached on the links, so a
/// chain is only ever checked against one configuration.
pub fn validate_chain(chain: &Chain, cfg: &ProtocolConfig) -> bool {
    let mut pending = Vec::new();
    let mut cur = Some(chain.clone());
    while let Some(c) = cur {
        match c.cached_validity() {
            Some(true) => break,
            Some(false) => {
                for p in pending {
                    mark(&p, false);
                }
                return false;
            }
            None => {
                cur = c.parent_chain();
                if cur.is_none() {
                    // a parentless link other than genesis
                    mark(&c, false);
                    for p in pending {
                        mark(&p, false);
                    }
                    return false;
                }
                pending.push(c);
            }
        }
    }
    let mut ok = true;
    for c in pending.into_iter().rev() {
        if ok {
            let parent = c.parent_chain().expect("checked above");
            ok = validate_block(c.tip_block(), &parent, cfg).is_ok();
        }
        mark(&c, ok);
    }
    ok
}

fn mark(c: &Chain, ok: bool) {
    let _ = c.tip().valid.set(ok);
}

fn locate(chain: &Chain, containing: u64, id: u64) -> Option<(Chain, usize)> {
    let prefix = chain.prefix(containing)?;
    let pos = prefix.tip_block().shares.iter().position(|s| s.id() == id)?;
    Some((prefix, pos))
}

fn check_in_place(
    obj: &WorkObject,
    chain: &Chain,
    containing: u64,
    cfg: &ProtocolConfig,
) -> Result<EntryKind, Vec<Violation>> {
    let Some((prefix, pos)) = locate(chain, containing, obj.id()) else {
        return Err(vec![Violation::NotIncluded]);
    };
    let parent = prefix.parent_chain().ok_or(vec![Violation::NotIncluded])?;
    let mut view = WindowView::new(&parent, cfg);
    for e in &prefix.tip_block().shares[..pos] {
        match view.check(e, cfg) {
            Ok(k) => view.admit(e, k),
            Err(_) => {
                view.seen.insert(e.id());
            }
        }
    }
    let mut result = view.check(obj, cfg);
    // included in exactly one share list of the chain
    let later = chain
        .links()
        .filter(|l| l.height > containing && l.height <= containing + cfg.recency)
        .any(|l| l.block.shares.iter().any(|s| s.id() == obj.id()));
    if later {
        match &mut result {
            Ok(_) => result = Err(vec![Violation::DuplicateObject]),
            Err(v) => v.push(Violation::DuplicateObject),
        }
    }
    result
}

/// Uncle validity of `u` inside the share list of the block at `containing`.
pub fn validate_uncle(
    u: &WorkObject,
    chain: &Chain,
    containing: u64,
    cfg: &ProtocolConfig,
) -> Result<(), Vec<Violation>> {
    if u.work() <= cfg.block_threshold {
        return Err(vec![Violation::InsufficientWork]);
    }
    check_in_place(u, chain, containing, cfg).map(|_| ())
}

/// Workshare validity of `ws` inside the share list of the block at
/// `containing`.
pub fn validate_workshare(
    ws: &WorkObject,
    chain: &Chain,
    containing: u64,
    cfg: &ProtocolConfig,
) -> Result<(), Vec<Violation>> {
    check_in_place(ws, chain, containing, cfg).map(|_| ())
}
