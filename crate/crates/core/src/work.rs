//! Simulated random oracle, intrinsic work, and the work-object data model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type PartyId = u32;

/// Opaque transaction payload; validity means the id is not already on chain.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transaction(pub u64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("kappa must lie in [1, 64], got {0}")]
    BadKappa(u32),
    #[error("hash value {value} does not fit in {kappa} bits")]
    HashOutOfRange { value: u64, kappa: u32 },
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
}

/// An oracle output in `[0, 2^kappa)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HashValue {
    value: u64,
    kappa: u8,
}

impl HashValue {
    pub fn new(value: u64, kappa: u32) -> Result<Self, CoreError> {
        if kappa == 0 || kappa > 64 {
            return Err(CoreError::BadKappa(kappa));
        }
        if kappa < 64 && value >> kappa != 0 {
            return Err(CoreError::HashOutOfRange { value, kappa });
        }
        Ok(HashValue {
            value,
            kappa: kappa as u8,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn kappa(&self) -> u32 {
        u32::from(self.kappa)
    }

    pub fn work(&self) -> u32 {
        intrinsic_work(self.value, self.kappa())
    }
}

/// `kappa − ⌊log₂ value⌋`, with value 0 mapped to `kappa`.
pub fn intrinsic_work(value: u64, kappa: u32) -> u32 {
    if value == 0 {
        kappa
    } else {
        kappa - (63 - value.leading_zeros())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Classification {
    None,
    WorkshareOnly,
    WorkshareAndBlock,
}

impl Classification {
    pub fn is_share(self) -> bool {
        self != Classification::None
    }

    pub fn is_block(self) -> bool {
        self == Classification::WorkshareAndBlock
    }
}

/// Thresholds are strict: work equal to a threshold does not qualify.
pub fn classify(work: u32, cfg: &ProtocolConfig) -> Classification {
    if work > cfg.block_threshold {
        Classification::WorkshareAndBlock
    } else if work > cfg.share_threshold {
        Classification::WorkshareOnly
    } else {
        Classification::None
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based pseudorandom function standing in for the hash function.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Oracle {
    seed: u64,
    kappa: u32,
}

impl Oracle {
    pub fn new(seed: u64, kappa: u32) -> Result<Self, CoreError> {
        if kappa == 0 || kappa > 64 {
            return Err(CoreError::BadKappa(kappa));
        }
        Ok(Oracle { seed, kappa })
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Deterministic in all arguments; outputs are uniform on `[0, 2^kappa)`.
    pub fn query(
        &self,
        header: &WorkObjectHeader,
        party: PartyId,
        round: u64,
        index: u64,
    ) -> HashValue {
        let mut z = mix(self.seed ^ header.fingerprint());
        z = mix(z ^ u64::from(party).rotate_left(48));
        z = mix(z ^ round);
        z = mix(z ^ index.rotate_left(17));
        let value = if self.kappa == 64 {
            z
        } else {
            z >> (64 - self.kappa)
        };
        HashValue {
            value,
            kappa: self.kappa as u8,
        }
    }
}

/// Digest of the empty list.
pub const EMPTY_DIGEST: u64 = 0;

/// Order-sensitive digest of a list of byte strings.
pub fn digest<I, B>(items: I) -> u64
where
    I: IntoIterator<Item = B>,
    B: AsRef<[u8]>,
{
    let mut hasher = Sha256::new();
    let mut count = 0u64;
    for item in items {
        let bytes = item.as_ref();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
        count += 1;
    }
    if count == 0 {
        return EMPTY_DIGEST;
    }
    let out = hasher.finalize();
    let d = u64::from_le_bytes(out[..8].try_into().expect("8 bytes"));
    // keep the sentinel unambiguous
    if d == EMPTY_DIGEST {
        1
    } else {
        d
    }
}

pub fn tx_digest(txs: &[Transaction]) -> u64 {
    digest(txs.iter().map(|t| t.0.to_le_bytes()))
}

/// Share lists are digested in hash order, so permutations agree.
pub fn share_digest(shares: &[Arc<WorkObject>]) -> u64 {
    let mut ids: Vec<u64> = shares.iter().map(|s| s.id()).collect();
    ids.sort_unstable();
    digest(ids.iter().map(|i| i.to_le_bytes()))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkObjectHeader {
    pub tx_digest: u64,
    pub share_digest: u64,
    /// Hash of the referenced block.
    pub parent_ref: u64,
    /// Hash of the block `kappa` deep in the miner's chain, when it exists.
    pub stable_ref: Option<u64>,
    pub nonce: u64,
}

impl WorkObjectHeader {
    fn fingerprint(&self) -> u64 {
        let mut z = mix(self.tx_digest);
        z = mix(z ^ self.share_digest);
        z = mix(z ^ self.parent_ref);
        z = mix(z ^ self.stable_ref.map_or(u64::MAX, mix));
        mix(z ^ self.nonce)
    }
}

/// A block and/or workshare, depending on its intrinsic work.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkObject {
    pub header: WorkObjectHeader,
    pub hash: HashValue,
    pub txs: Vec<Transaction>,
    pub shares: Vec<Arc<WorkObject>>,
    pub miner: PartyId,
    pub mint_round: u64,
}

impl WorkObject {
    /// Hash value, used as the object identifier.
    pub fn id(&self) -> u64 {
        self.hash.value()
    }

    pub fn work(&self) -> u32 {
        self.hash.work()
    }

    pub fn parent(&self) -> u64 {
        self.header.parent_ref
    }

    /// Copy without bodies, as carried inside a share list.
    pub fn as_share(&self) -> WorkObject {
        WorkObject {
            header: self.header,
            hash: self.hash,
            txs: Vec::new(),
            shares: Vec::new(),
            miner: self.miner,
            mint_round: self.mint_round,
        }
    }

    pub fn genesis(kappa: u32) -> WorkObject {
        let header = WorkObjectHeader {
            tx_digest: EMPTY_DIGEST,
            share_digest: EMPTY_DIGEST,
            parent_ref: 0,
            stable_ref: None,
            nonce: 0,
        };
        let kappa = kappa.clamp(1, 64);
        let value = mix(0x6765_6e65_7369_73) >> (64 - kappa);
        WorkObject {
            header,
            hash: HashValue {
                value,
                kappa: kappa as u8,
            },
            txs: Vec::new(),
            shares: Vec::new(),
            miner: PartyId::MAX,
            mint_round: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kappa: u32,
    /// Block threshold in work bits.
    pub block_threshold: u32,
    /// Workshare threshold in work bits.
    pub share_threshold: u32,
    /// Object eligibility window, in blocks.
    pub recency: u64,
    /// Fork eligibility window, in blocks.
    pub fork_window: u64,
    /// Blocks excluded from the tail on ledger extraction.
    pub safety: u64,
    pub parties: u32,
    /// Adversarial fraction of the parties.
    pub rho: f64,
    /// Oracle queries per party per round.
    pub queries: u32,
    /// Network delay in rounds.
    pub delay: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            kappa: 64,
            block_threshold: 12,
            share_threshold: 6,
            recency: 17,
            fork_window: 6,
            safety: 6,
            parties: 10,
            rho: 0.0,
            queries: 4,
            delay: 1,
        }
    }
}

impl ProtocolConfig {
    /// Per-query block probability `2^-T_b`.
    pub fn p(&self) -> f64 {
        (-f64::from(self.block_threshold)).exp2()
    }

    /// Per-query workshare probability `2^-T_ws`.
    pub fn p_f(&self) -> f64 {
        (-f64::from(self.share_threshold)).exp2()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: &str| Err(CoreError::InvalidConfig(m.to_string()));
        if self.kappa == 0 || self.kappa > 64 {
            return Err(CoreError::BadKappa(self.kappa));
        }
        if self.share_threshold > self.block_threshold {
            return bad("share_threshold must not exceed block_threshold");
        }
        if self.block_threshold >= self.kappa {
            return bad("block_threshold must be below kappa");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if self.recency == 0 || self.fork_window == 0 || self.safety == 0 {
            return bad("windows must be at least 1");
        }
        if self.parties == 0 {
            return bad("at least one party is required");
        }
        if self.delay == 0 {
            return bad("delay must be at least one round");
        }
        Ok(())
    }
}
