use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::protocol::{Chain, Message, PartyState};
use crate::work::{Oracle, PartyId, ProtocolConfig, Transaction, WorkObject};

use super::adversary::Adversary;
use super::measure::{evaluate, PropertyReport};
use super::{config_compliant, DerivedParams, SimConfig, SimError};

/// One line of the exported trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Mined {
        round: u64,
        party: PartyId,
        id: u64,
        parent: u64,
        work: u32,
        block: bool,
    },
    Adopted {
        round: u64,
        party: PartyId,
        tip: u64,
        height: u64,
    },
    Released {
        round: u64,
        party: PartyId,
        height: u64,
        shares: usize,
    },
}

/// A party's chain after it changed in some round.
#[derive(Clone, Debug)]
pub struct TipEvent {
    pub round: u64,
    pub party: PartyId,
    pub chain: Chain,
}

#[derive(Clone, Debug)]
pub struct ExecutionTrace {
    pub config: SimConfig,
    pub derived: DerivedParams,
    pub honest: Vec<PartyId>,
    pub adversary: Option<PartyId>,
    pub events: Vec<TraceEvent>,
    /// Tip changes of honest parties in round order.
    pub tips: Vec<TipEvent>,
    /// `records[r][i]`: records on honest party `i`'s chain after round `r`.
    pub records: Vec<Vec<u64>>,
    pub final_chains: Vec<Chain>,
}

impl ExecutionTrace {
    /// One JSON object per event.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Honest objects as `(id, owner, round, is_block)`.
    pub fn honest_mined(&self) -> impl Iterator<Item = (u64, PartyId, u64, bool)> + '_ {
        let honest = self.honest.len() as PartyId;
        self.events.iter().filter_map(move |e| match *e {
            TraceEvent::Mined {
                round,
                party,
                id,
                block,
                ..
            } if party < honest => Some((id, party, round, block)),
            _ => None,
        })
    }
}

fn mined_events(round: u64, party: PartyId, objs: &[std::sync::Arc<WorkObject>], block: bool) -> impl Iterator<Item = TraceEvent> + '_ {
    objs.iter().map(move |o| TraceEvent::Mined {
        round,
        party,
        id: o.id(),
        parent: o.parent(),
        work: o.work(),
        block,
    })
}

/// Runs one execution. Honest messages of round `r` reach every honest
/// party at the start of round `r + Δ`; the adversary sees them within
/// round `r` and its own messages arrive at `r + 1`.
pub fn run_execution(cfg: &SimConfig) -> Result<ExecutionTrace, SimError> {
    cfg.validate()?;
    let derived = DerivedParams::from_config(cfg);
    if !cfg.waive_compliance && !config_compliant(cfg) {
        return Err(SimError::Compliance {
            alpha: derived.alpha,
            beta: derived.beta,
        });
    }
    let pc = &cfg.protocol;
    let oracle = Oracle::new(cfg.seed, pc.kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7478_5f72_6174_65);
    let genesis = Chain::from_genesis(WorkObject::genesis(pc.kappa));

    let honest = cfg.honest_count();
    let party_cfgs: Vec<ProtocolConfig> = (0..honest)
        .map(|i| ProtocolConfig {
            queries: cfg.queries_of(i as usize),
            ..pc.clone()
        })
        .collect();
    let mut parties: Vec<PartyState> = (0..honest)
        .map(|i| PartyState::new(i, genesis.clone()))
        .collect();
    let mut adversary = if cfg.corrupted() > 0 {
        let queries = (honest..pc.parties).map(|i| cfg.queries_of(i as usize)).sum();
        Some(Adversary::new(honest, genesis.clone(), cfg, queries))
    } else {
        None
    };

    let mut pending: BTreeMap<u64, Vec<Message>> = BTreeMap::new();
    let mut events = Vec::new();
    let mut tips = Vec::new();
    let mut records = Vec::with_capacity(cfg.rounds as usize);
    let mut last_tip: HashMap<PartyId, u64> = HashMap::new();
    let mut next_tx = 0u64;

    for r in 0..cfg.rounds {
        let mut inbox = pending.remove(&r).unwrap_or_default();
        if cfg.tx_rate > 0.0 && rng.gen_bool(cfg.tx_rate) {
            inbox.insert(
                0,
                Message {
                    from: PartyId::MAX,
                    txs: vec![Transaction(next_tx)],
                    ..Message::default()
                },
            );
            next_tx += 1;
        }

        let mut sent = Vec::new();
        let mut honest_blocks = Vec::new();
        for (i, party) in parties.iter_mut().enumerate() {
            let out = party.execute_round(&inbox, &oracle, &party_cfgs[i], r);
            let id = party.id;
            events.extend(mined_events(r, id, &out.blocks, true));
            events.extend(mined_events(r, id, &out.shares, false));
            if out.chain.is_some() || !out.shares.is_empty() {
                honest_blocks.extend(out.blocks.iter().cloned());
                sent.push(Message {
                    from: id,
                    chain: out.chain,
                    objects: out.shares,
                    txs: Vec::new(),
                });
            }
        }

        let mut row = Vec::with_capacity(parties.len());
        for party in &parties {
            row.push(party.chain.records());
            let tip = party.chain.tip_id();
            if last_tip.insert(party.id, tip) != Some(tip) {
                events.push(TraceEvent::Adopted {
                    round: r,
                    party: party.id,
                    tip,
                    height: party.chain.height(),
                });
                tips.push(TipEvent {
                    round: r,
                    party: party.id,
                    chain: party.chain.clone(),
                });
            }
        }
        records.push(row);

        if let Some(adv) = adversary.as_mut() {
            let best = parties
                .iter()
                .map(|p| &p.chain)
                .fold(None::<&Chain>, |b, c| match b {
                    Some(b) if b.total_work() >= c.total_work() => Some(b),
                    _ => Some(c),
                })
                .expect("at least one honest party")
                .clone();
            let step = adv.act(&sent, &honest_blocks, &best, &oracle, r);
            events.extend(mined_events(r, adv.id(), &step.blocks, true));
            events.extend(mined_events(r, adv.id(), &step.shares, false));
            if let Some((msg, height)) = step.release {
                events.push(TraceEvent::Released {
                    round: r,
                    party: adv.id(),
                    height,
                    shares: msg.objects.len(),
                });
                pending.entry(r + 1).or_default().insert(0, msg);
            }
        }
        if !sent.is_empty() {
            pending.entry(r + pc.delay).or_default().extend(sent);
        }
    }

    Ok(ExecutionTrace {
        config: cfg.clone(),
        derived,
        honest: (0..honest).collect(),
        adversary: adversary.as_ref().map(|a| a.id()),
        events,
        tips,
        records,
        final_chains: parties.into_iter().map(|p| p.chain).collect(),
    })
}

/// Property reports for one configuration under several seeds, in seed
/// order; executions run in parallel.
pub fn run_batch(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<PropertyReport>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let c = SimConfig {
                seed,
                ..cfg.clone()
            };
            run_execution(&c).map(|t| evaluate(&t))
        })
        .collect()
}
