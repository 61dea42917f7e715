use std::collections::HashSet;
use std::sync::Arc;

use crate::protocol::{Chain, Message, PartyState};
use crate::work::{Oracle, PartyId, ProtocolConfig, WorkObject};

use super::{SimConfig, Strategy};

/// Result of one adversarial round.
pub(crate) struct AdversaryStep {
    pub blocks: Vec<Arc<WorkObject>>,
    pub shares: Vec<Arc<WorkObject>>,
    /// Published chain prefix and the height it reaches.
    pub release: Option<(Message, u64)>,
}

/// The corrupted parties acting as one miner with their pooled queries.
pub(crate) struct Adversary {
    state: PartyState,
    cfg: ProtocolConfig,
    strategy: Strategy,
    private_lead: u64,
    /// Height of the published prefix of the private chain.
    released: u64,
    public_height: u64,
    withheld: Vec<Arc<WorkObject>>,
    /// Blocks the honest parties know about.
    public: HashSet<u64>,
}

impl Adversary {
    pub fn new(id: PartyId, genesis: Chain, sim: &SimConfig, queries: u32) -> Self {
        let mut public = HashSet::new();
        public.insert(genesis.tip_id());
        Adversary {
            state: PartyState::new(id, genesis),
            cfg: ProtocolConfig {
                queries,
                ..sim.protocol.clone()
            },
            strategy: sim.strategy,
            private_lead: sim.private_lead,
            released: 0,
            public_height: 0,
            withheld: Vec::new(),
            public,
        }
    }

    pub fn id(&self) -> PartyId {
        self.state.id
    }

    fn wants_adopt(&self, best: &Chain) -> bool {
        let own = &self.state.chain;
        if best.total_work() <= own.total_work() {
            return false;
        }
        match self.strategy {
            Strategy::PrivateChain => best.height() > own.height() + self.private_lead,
            _ => true,
        }
    }

    /// Observes this round's honest messages (rushing), mines, and decides
    /// what to publish.
    pub fn act(
        &mut self,
        honest: &[Message],
        honest_blocks: &[Arc<WorkObject>],
        best: &Chain,
        oracle: &Oracle,
        round: u64,
    ) -> AdversaryStep {
        for b in honest_blocks {
            self.public.insert(b.id());
        }
        mark_public(&mut self.public, best);
        let adopt = self.wants_adopt(best);
        let mut inbox: Vec<Message> = honest
            .iter()
            .map(|m| Message {
                from: m.from,
                chain: None,
                objects: m.objects.clone(),
                txs: m.txs.clone(),
            })
            .collect();
        inbox.push(Message {
            from: PartyId::MAX,
            chain: adopt.then(|| best.clone()),
            objects: honest_blocks.to_vec(),
            txs: Vec::new(),
        });
        let out = self.state.execute_round(&inbox, oracle, &self.cfg, round);
        if out.adopted {
            self.released = self.state.chain.height();
            let public = &self.public;
            self.withheld.retain(|s| public.contains(&s.parent()));
        }
        self.withheld.extend(out.shares.iter().cloned());

        let own = self.state.chain.height();
        let grew = best.height() > self.public_height;
        self.public_height = self.public_height.max(best.height());
        let target = match self.strategy {
            Strategy::AllHonest => None,
            Strategy::SelfishMining if grew && !out.adopted => {
                let lead = own as i64 - best.height() as i64;
                match lead {
                    0 | 1 => Some(own),
                    l if l >= 2 => Some(own.min(self.released + 2)),
                    _ => None,
                }
            }
            Strategy::SelfishMining => None,
            Strategy::PrivateChain => {
                (own >= best.height() + self.private_lead).then_some(own)
            }
        };
        let release = target
            .filter(|&h| h > self.released)
            .map(|h| self.release(h));
        AdversaryStep {
            blocks: out.blocks,
            shares: out.shares,
            release,
        }
    }

    /// Publishes the private chain up to `height` together with withheld
    /// shares whose referenced block was already public.
    fn release(&mut self, height: u64) -> (Message, u64) {
        let prefix = self
            .state
            .chain
            .prefix(height)
            .expect("release height within the private chain");
        let public = &self.public;
        let (out, keep): (Vec<_>, Vec<_>) = self
            .withheld
            .drain(..)
            .partition(|s| public.contains(&s.parent()));
        self.withheld = keep;
        mark_public(&mut self.public, &prefix);
        self.released = height;
        let msg = Message {
            from: self.state.id,
            chain: Some(prefix),
            objects: out,
            txs: Vec::new(),
        };
        (msg, height)
    }
}

fn mark_public(public: &mut HashSet<u64>, chain: &Chain) {
    for l in chain.links() {
        if !public.insert(l.block.id()) {
            break;
        }
    }
}
