use std::sync::{Arc, OnceLock};

use im::HashSet as PSet;

use crate::work::WorkObject;

/// One block of a persistent chain together with cumulative data.
#[derive(Debug)]
pub struct Link {
    pub block: Arc<WorkObject>,
    parent: Option<Arc<Link>>,
    pub height: u64,
    /// Sum of intrinsic work from genesis through this block.
    pub total_work: u64,
    /// Blocks plus share-list entries from genesis through this block.
    pub records: u64,
    txs: PSet<u64>,
    pub(crate) valid: OnceLock<bool>,
}

impl Link {
    pub fn parent(&self) -> Option<&Arc<Link>> {
        self.parent.as_ref()
    }
}

impl Drop for Link {
    // unlink iteratively so long chains do not overflow the stack
    fn drop(&mut self) {
        let mut next = self.parent.take();
        while let Some(link) = next {
            match Arc::try_unwrap(link) {
                Ok(mut inner) => next = inner.parent.take(),
                Err(_) => break,
            }
        }
    }
}

/// An immutable chain; cloning and extending share structure.
#[derive(Clone, Debug)]
pub struct Chain {
    tip: Arc<Link>,
}

impl Chain {
    pub fn from_genesis(genesis: WorkObject) -> Chain {
        let work = u64::from(genesis.work());
        let link = Link {
            block: Arc::new(genesis),
            parent: None,
            height: 0,
            total_work: work,
            records: 1,
            txs: PSet::new(),
            valid: OnceLock::from(true),
        };
        Chain { tip: Arc::new(link) }
    }

    /// Appends `block` without validating it.
    pub fn extend(&self, block: Arc<WorkObject>) -> Chain {
        let mut txs = self.tip.txs.clone();
        for t in &block.txs {
            txs.insert(t.0);
        }
        let link = Link {
            parent: Some(self.tip.clone()),
            height: self.tip.height + 1,
            total_work: self.tip.total_work + u64::from(block.work()),
            records: self.tip.records + 1 + block.shares.len() as u64,
            txs,
            valid: OnceLock::new(),
            block,
        };
        Chain {
            tip: Arc::new(link),
        }
    }

    pub fn tip(&self) -> &Arc<Link> {
        &self.tip
    }

    pub fn tip_block(&self) -> &Arc<WorkObject> {
        &self.tip.block
    }

    pub fn tip_id(&self) -> u64 {
        self.tip.block.id()
    }

    pub fn height(&self) -> u64 {
        self.tip.height
    }

    /// Number of blocks including genesis.
    pub fn len(&self) -> u64 {
        self.tip.height + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_work(&self) -> u64 {
        self.tip.total_work
    }

    pub fn records(&self) -> u64 {
        self.tip.records
    }

    pub fn contains_tx(&self, id: u64) -> bool {
        self.tip.txs.contains(&id)
    }

    /// Links from the tip back to genesis.
    pub fn links(&self) -> Links<'_> {
        Links {
            next: Some(&self.tip),
        }
    }

    pub fn link_at(&self, height: u64) -> Option<&Arc<Link>> {
        if height > self.height() {
            return None;
        }
        self.links().find(|l| l.height == height)
    }

    pub fn block_at(&self, height: u64) -> Option<&Arc<WorkObject>> {
        self.link_at(height).map(|l| &l.block)
    }

    /// Chain truncated to `height`.
    pub fn prefix(&self, height: u64) -> Option<Chain> {
        self.link_at(height).map(|l| Chain { tip: l.clone() })
    }

    pub fn parent_chain(&self) -> Option<Chain> {
        self.tip.parent.clone().map(|tip| Chain { tip })
    }

    /// Blocks from genesis to tip.
    pub fn blocks(&self) -> Vec<Arc<WorkObject>> {
        let mut out: Vec<_> = self.links().map(|l| l.block.clone()).collect();
        out.reverse();
        out
    }

    pub fn genesis_id(&self) -> u64 {
        self.links().last().expect("nonempty").block.id()
    }

    /// Height of the deepest common block, if the chains share a genesis.
    pub fn common_height(&self, other: &Chain) -> Option<u64> {
        let (mut a, mut b) = (&self.tip, &other.tip);
        loop {
            while a.height > b.height {
                a = a.parent.as_ref()?;
            }
            while b.height > a.height {
                b = b.parent.as_ref()?;
            }
            if Arc::ptr_eq(a, b) || a.block.id() == b.block.id() {
                return Some(a.height);
            }
            a = a.parent.as_ref()?;
            b = b.parent.as_ref()?;
        }
    }

    pub fn is_prefix_of(&self, other: &Chain) -> bool {
        other
            .link_at(self.height())
            .is_some_and(|l| l.block.id() == self.tip_id())
    }

    pub(crate) fn cached_validity(&self) -> Option<bool> {
        self.tip.valid.get().copied()
    }
}

pub struct Links<'a> {
    next: Option<&'a Arc<Link>>,
}

impl<'a> Iterator for Links<'a> {
    type Item = &'a Arc<Link>;

    fn next(&mut self) -> Option<Self::Item> {
        let cur = self.next?;
        self.next = cur.parent.as_ref();
        Some(cur)
    }
}
