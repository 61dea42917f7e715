//! Workshare-augmented heaviest-chain consensus: the protocol itself,
//! proportional reward splitting, sample-size bounds, an MDP attack
//! evaluator, and a round-based execution simulator.

pub mod mdp;
pub mod protocol;
pub mod rewards;
pub mod sampling;
pub mod scalar;
pub mod sim;
pub mod work;

use num_rational::BigRational;

/// Floating-point allocation, as used by the simulator.
pub type Allocation = rewards::RewardAllocation<f64>;
/// Exact allocation over rationals.
pub type ExactAllocation = rewards::RewardAllocation<BigRational>;
pub type MdpConfigF64 = mdp::MdpConfig<f64>;
pub type CompiledMdpF64 = mdp::CompiledMdp<f64>;
