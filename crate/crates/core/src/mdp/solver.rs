//! Relative value iteration for average-reward objectives.
//!
//! Every probe runs on the aperiodic transform `τ·I + (1 − τ)·P`, which has
//! the same optimal gain as the original chain. After each sweep the
//! one-step differences `Tv − v` bracket the optimal gain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::model::CompiledMdp;
use super::MdpError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Self-loop weight of the aperiodic transform.
    pub tau: f64,
    /// Stop once the gain bracket is narrower than this.
    pub span_tol: f64,
    /// Width of the final bracket around a ratio objective.
    pub ratio_tol: f64,
    /// Sweeps allowed per probe.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tau: 0.1,
            span_tol: 1e-7,
            ratio_tol: 1e-6,
            max_iterations: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Value iteration sweeps over all probes.
    pub iterations: usize,
    /// Gain problems solved (bisection probes).
    pub probes: usize,
    pub states: usize,
}

/// Linear combination of the per-action reward streams.
#[derive(Clone, Copy, Debug)]
pub struct Weights<F> {
    pub attacker: F,
    pub honest: F,
    pub bonus: F,
    pub elapsed: F,
}

impl<F: Real> Weights<F> {
    pub fn attacker() -> Self {
        Weights {
            attacker: F::one(),
            honest: F::zero(),
            bonus: F::zero(),
            elapsed: F::zero(),
        }
    }

    pub fn honest() -> Self {
        Weights {
            attacker: F::zero(),
            honest: F::one(),
            bonus: F::zero(),
            elapsed: F::zero(),
        }
    }

    fn rewards(&self, mdp: &CompiledMdp<F>) -> Vec<F> {
        (0..mdp.num_actions())
            .map(|a| {
                self.attacker * mdp.reward_a[a]
                    + self.honest * mdp.reward_h[a]
                    + self.bonus * mdp.bonus[a]
                    + self.elapsed * mdp.elapsed[a]
            })
            .collect()
    }
}

/// When a probe may stop early.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// Iterate until the bracket is narrower than `span_tol`.
    Span,
    /// Stop as soon as the sign of the gain is known.
    Sign,
}

#[derive(Clone, Debug)]
pub struct GainSolution<F> {
    pub lower: F,
    pub upper: F,
    pub iterations: usize,
    /// Chosen action index (into [`CompiledMdp::actions`]) per state.
    pub policy: Vec<u32>,
}

impl<F: Real> GainSolution<F> {
    pub fn gain(&self) -> F {
        (self.lower + self.upper) / F::lit(2.0)
    }
}

/// Maximal (or, with `policy`, fixed-policy) long-run average of the
/// weighted reward. `values` is the warm start and receives the final
/// relative values.
pub fn solve_gain<F: Real>(
    mdp: &CompiledMdp<F>,
    weights: &Weights<F>,
    policy: Option<&[u32]>,
    opts: &SolverOptions,
    stop: StopRule,
    values: &mut Vec<F>,
) -> Result<GainSolution<F>, MdpError> {
    let n = mdp.num_states();
    if values.len() != n {
        *values = vec![F::zero(); n];
    }
    let rewards = weights.rewards(mdp);
    let tau = F::lit(opts.tau);
    let keep = F::one() - tau;
    let span_tol = F::lit(opts.span_tol);

    let mut next_values = vec![F::zero(); n];
    let mut diffs = vec![F::zero(); n];
    let mut choice = vec![0u32; n];

    for it in 1..=opts.max_iterations {
        let v = &*values;
        next_values
            .par_iter_mut()
            .zip(diffs.par_iter_mut())
            .zip(choice.par_iter_mut())
            .enumerate()
            .for_each(|(s, ((nv, d), c))| {
                let q = |a: usize| {
                    let mut acc = F::zero();
                    for t in mdp.transitions_of(a) {
                        acc = acc + mdp.prob[t] * v[mdp.next[t] as usize];
                    }
                    rewards[a] + keep * acc + tau * v[s]
                };
                let (best_a, best) = match policy {
                    Some(p) => (p[s] as usize, q(p[s] as usize)),
                    None => {
                        let mut best_a = mdp.action_start[s];
                        let mut best = q(best_a);
                        for a in mdp.actions_of(s).skip(1) {
                            let val = q(a);
                            if val > best {
                                best = val;
                                best_a = a;
                            }
                        }
                        (best_a, best)
                    }
                };
                *nv = best;
                *d = best - v[s];
                *c = best_a as u32;
            });

        let (lo, hi) = diffs
            .par_iter()
            .fold(
                || (F::infinity(), F::neg_infinity()),
                |(lo, hi), &d| (lo.min(d), hi.max(d)),
            )
            .reduce(
                || (F::infinity(), F::neg_infinity()),
                |a, b| (a.0.min(b.0), a.1.max(b.1)),
            );

        let anchor = next_values[0];
        values
            .par_iter_mut()
            .zip(next_values.par_iter())
            .for_each(|(v, &nv)| *v = nv - anchor);

        let done = hi - lo < span_tol
            || (stop == StopRule::Sign && (lo > F::zero() || hi < F::zero()));
        if done {
            return Ok(GainSolution {
                lower: lo,
                upper: hi,
                iterations: it,
                policy: choice,
            });
        }
    }
    Err(MdpError::Nonconvergence {
        iterations: opts.max_iterations,
    })
}

/// Largest ρ with `max_π avg(num − ρ·den) ≥ 0`, that is the optimal
/// long-run ratio `avg(num) / avg(den)`, found by bisection on `[lo, hi]`.
pub fn solve_ratio<F: Real>(
    mdp: &CompiledMdp<F>,
    num: &Weights<F>,
    den: &Weights<F>,
    bounds: (F, F),
    opts: &SolverOptions,
    stats: &mut SolveStats,
) -> Result<F, MdpError> {
    let (mut lo, mut hi) = bounds;
    let tol = F::lit(opts.ratio_tol);
    let mut values = Vec::new();
    stats.states = mdp.num_states();
    while hi - lo > tol {
        let rho = (lo + hi) / F::lit(2.0);
        let w = Weights {
            attacker: num.attacker - rho * den.attacker,
            honest: num.honest - rho * den.honest,
            bonus: num.bonus - rho * den.bonus,
            elapsed: num.elapsed - rho * den.elapsed,
        };
        let sol = solve_gain(mdp, &w, None, opts, StopRule::Sign, &mut values)?;
        stats.iterations += sol.iterations;
        stats.probes += 1;
        if sol.lower > F::zero() {
            lo = rho;
        } else if sol.upper < F::zero() {
            hi = rho;
        } else {
            // gain indistinguishable from zero: ρ is the root up to span_tol
            return Ok(rho);
        }
    }
    Ok((lo + hi) / F::lit(2.0))
}
