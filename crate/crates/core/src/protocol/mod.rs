//! Chain validity, heaviest-chain selection, the per-round mining loop, and
//! ledger extraction.
//!
//! Heights start at 0 for genesis. A share or uncle included in the block at
//! height `c` must reference a block at height `r` with `c − R ≤ r ≤ c − 1`,
//! where `R` is [`ProtocolConfig::recency`](crate::work::ProtocolConfig);
//! its own height is `r + 1`. References resolve through the chain itself:
//! canonical blocks and uncles already included, including earlier entries of
//! the same share list.

mod chain;
mod ledger;
mod party;
mod validate;

pub use chain::{Chain, Link, Links};
pub use ledger::extract_ledger;
pub use party::{maxvalid, sanitize, Message, PartyState, RoundOutput, Sanitized};
pub use validate::{
    validate_block, validate_chain, validate_uncle, validate_workshare, EntryKind, Violation,
};
