//! Chernoff-bound sample sizes for estimating mining power from workshares.
//!
//! With `n` workshares and honest fraction `p`, the probability that the
//! observed honest count deviates by more than a factor `δ` is bounded by
//! `ε = exp(−δ²·n·p / 2)`. The three functions below solve this identity
//! for `n`, `δ`, and `ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const BYTES_PER_SHARE: u64 = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("epsilon must lie in (0, 1)")]
    Epsilon,
    #[error("delta must lie in (0, 1)")]
    Delta,
    #[error("p must lie in (0, 1]")]
    Probability,
    #[error("sample count must be at least 1")]
    Samples,
    #[error("at least 1000 trials are required")]
    Trials,
}

fn check_eps<F: Real>(eps: F) -> Result<(), SamplingError> {
    if eps > F::zero() && eps < F::one() {
        Ok(())
    } else {
        Err(SamplingError::Epsilon)
    }
}

fn check_delta<F: Real>(delta: F) -> Result<(), SamplingError> {
    if delta > F::zero() && delta < F::one() {
        Ok(())
    } else {
        Err(SamplingError::Delta)
    }
}

fn check_p<F: Real>(p: F) -> Result<(), SamplingError> {
    if p > F::zero() && p <= F::one() {
        Ok(())
    } else {
        Err(SamplingError::Probability)
    }
}

/// `−2·ln ε / (δ²·p)` before rounding up.
pub fn required_samples_exact<F: Real>(eps: F, delta: F, p: F) -> Result<F, SamplingError> {
    check_eps(eps)?;
    check_delta(delta)?;
    check_p(p)?;
    Ok(-F::lit(2.0) * eps.ln() / (delta * delta * p))
}

pub fn required_samples<F: Real>(eps: F, delta: F, p: F) -> Result<u64, SamplingError> {
    let n = required_samples_exact(eps, delta, p)?;
    Ok(n.ceil().to_u64().expect("finite sample count"))
}

/// `sqrt(−2·ln ε / (n·p))`.
pub fn achievable_inaccuracy<F: Real>(n: F, eps: F, p: F) -> Result<F, SamplingError> {
    check_eps(eps)?;
    check_p(p)?;
    if !(n >= F::one()) {
        return Err(SamplingError::Samples);
    }
    Ok((-F::lit(2.0) * eps.ln() / (n * p)).sqrt())
}

/// `exp(−δ²·n·p / 2)`.
pub fn error_bound<F: Real>(n: F, delta: F, p: F) -> Result<F, SamplingError> {
    check_delta(delta)?;
    check_p(p)?;
    if !(n >= F::one()) {
        return Err(SamplingError::Samples);
    }
    Ok((-(delta * delta * n * p) / F::lit(2.0)).exp())
}

pub fn storage_overhead(n: u64, bytes_per_share: u64) -> u64 {
    n * bytes_per_share
}

/// Kibibytes (1 KB = 1024 B).
pub fn kilobytes(bytes: u64) -> f64 {
    bytes as f64 / 1024.0
}

/// One line of the sample-size table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub p: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub n: u64,
    /// `n` rounded to the nearest thousand for reporting.
    pub n_rounded: u64,
    /// Storage of `n_rounded` shares.
    pub bytes: u64,
    pub kb: f64,
}

pub fn sampling_row(eps: f64, delta: f64, p: f64) -> Result<SamplingRow, SamplingError> {
    let n = required_samples(eps, delta, p)?;
    let n_rounded = ((n as f64 / 1000.0).round() as u64).max(1) * 1000;
    let bytes = storage_overhead(n_rounded, BYTES_PER_SHARE);
    Ok(SamplingRow {
        p,
        delta,
        epsilon: eps,
        n,
        n_rounded,
        bytes,
        kb: kilobytes(bytes),
    })
}

/// Monte-Carlo check of the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub trials: u64,
    /// Fraction of trials with `|X/n − p| > δ·p`.
    pub two_sided_rate: f64,
    /// Fraction of trials with `X/n < (1 − δ)·p`.
    pub lower_tail_rate: f64,
    /// Fraction of trials with `X/n > (1 + δ)·p`.
    pub upper_tail_rate: f64,
}

impl EmpiricalResult {
    /// Three binomial standard deviations around `rate`.
    pub fn three_sigma(&self, rate: f64) -> f64 {
        3.0 * (rate * (1.0 - rate) / self.trials as f64).sqrt()
    }
}

/// Draws `X ~ Binomial(n, p)` `trials` times.
pub fn empirical_validation(
    n: u64,
    p: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalResult, SamplingError> {
    check_p(p)?;
    check_delta(delta)?;
    if n == 0 {
        return Err(SamplingError::Samples);
    }
    if trials < 1000 {
        return Err(SamplingError::Trials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut low, mut high) = (0u64, 0u64);
    for _ in 0..trials {
        let x = (0..n).filter(|_| rng.gen_bool(p)).count() as f64 / n as f64;
        if x < (1.0 - delta) * p {
            low += 1;
        } else if x > (1.0 + delta) * p {
            high += 1;
        }
    }
    let t = trials as f64;
    Ok(EmpiricalResult {
        trials,
        two_sided_rate: (low + high) as f64 / t,
        lower_tail_rate: low as f64 / t,
        upper_tail_rate: high as f64 / t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(required_samples(0.1, 0.03, 0.85).unwrap(), 6020);
        assert_eq!(required_samples(0.1, 0.03, 0.65).unwrap(), 7873);
        assert_eq!(storage_overhead(6000, 80), 480_000);
        assert_eq!(kilobytes(640_000), 625.0);
    }

    #[test]
    fn table_rows() {
        let r = sampling_row(0.1, 0.03, 0.85).unwrap();
        assert_eq!((r.n, r.n_rounded), (6020, 6000));
        assert!((r.kb - 468.75).abs() < 1e-9);
        let r = sampling_row(0.1, 0.03, 0.65).unwrap();
        assert_eq!(r.n_rounded, 8000);
        assert_eq!(r.kb, 625.0);
    }

    #[test]
    fn round_trip() {
        let n = required_samples_exact(0.1, 0.05, 0.7).unwrap();
        let d = achievable_inaccuracy(n, 0.1, 0.7).unwrap();
        assert!((d - 0.05f64).abs() < 1e-12);
        let e = error_bound(n, 0.05, 0.7).unwrap();
        assert!((e - 0.1f64).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(required_samples(0.0, 0.1, 0.5), Err(SamplingError::Epsilon));
        assert_eq!(required_samples(0.1, 1.0, 0.5), Err(SamplingError::Delta));
        assert_eq!(required_samples(0.1, 0.1, 0.0), Err(SamplingError::Probability));
        assert!(empirical_validation(10, 0.5, 0.1, 10, 1).is_err());
    }

    #[test]
    fn certain_success_never_deviates() {
        let r = empirical_validation(100, 1.0, 0.03, 1000, 3).unwrap();
        assert_eq!(r.two_sided_rate, 0.0);
    }
}
