//! Workshare weight and reward formulas of the earlier design draft.
//! Pure evaluators; nothing here feeds into fork choice.

use super::RewardError;

/// `b = −log₂(T / powHash)`.
pub fn legacy_share_bits(target: f64, pow_hash: f64) -> Result<f64, RewardError> {
    if !(target > 0.0 && pow_hash > 0.0) {
        return Err(RewardError::Domain("target and hash must be positive"));
    }
    Ok(-(target / pow_hash).log2())
}

/// `ΔS = 2^-b · 2^-(d+1)`.
pub fn legacy_share_weight(bits: f64, distance: u32) -> Result<f64, RewardError> {
    if !(bits >= 0.0) {
        return Err(RewardError::Domain("bits must be nonnegative"));
    }
    Ok((-bits).exp2() * (-(f64::from(distance) + 1.0)).exp2())
}

/// `S_t = S_b + Σ ΔS`.
pub fn legacy_block_weight(block_weight: f64, shares: &[f64]) -> f64 {
    block_weight + shares.iter().sum::<f64>()
}

/// `R_ws = R_b · S_ws / S_t`, zero when `S_t` is zero.
pub fn legacy_share_reward(block_reward: f64, share_weight: f64, total_weight: f64) -> f64 {
    if total_weight == 0.0 {
        0.0
    } else {
        block_reward * share_weight / total_weight
    }
}

/// `R_b = k · diff_b`.
pub fn legacy_block_reward(k: f64, difficulty: f64) -> f64 {
    k * difficulty
}
