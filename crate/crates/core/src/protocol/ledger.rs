use crate::work::Transaction;

use super::chain::Chain;

/// Transactions of all blocks except the last `safety`, in chain order.
pub fn extract_ledger(chain: &Chain, safety: u64) -> Vec<Transaction> {
    if chain.len() <= safety {
        return Vec::new();
    }
    let keep = chain.len() - safety;
    chain
        .blocks()
        .iter()
        .take(keep as usize)
        .flat_map(|b| b.txs.iter().copied())
        .collect()
}
