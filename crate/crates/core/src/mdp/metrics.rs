//! Incentive compatibility, subversion gain, and censorship susceptibility.
//!
//! Time is counted in mining events, one per MDP step. Subversion gain is
//! the attacker's income plus double-spend bonus per event minus its fair
//! share `alpha`; censorship susceptibility is the fraction of the honest
//! income `1 − alpha` per event that the attacker can destroy.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::model::CompiledMdp;
use super::solver::{solve_gain, solve_ratio, SolveStats, SolverOptions, StopRule, Weights};
use super::{Action, MdpConfig, MdpError, Mechanism};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    IncentiveCompatibility,
    SubversionGain,
    CensorshipSusceptibility,
}

impl Metric {
    pub const ALL: [Metric; 3] = [
        Metric::IncentiveCompatibility,
        Metric::SubversionGain,
        Metric::CensorshipSusceptibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::IncentiveCompatibility => "ic",
            Metric::SubversionGain => "subversion",
            Metric::CensorshipSusceptibility => "censorship",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ic" | "incentive-compatibility" => Ok(Metric::IncentiveCompatibility),
            "subversion" | "subversion-gain" => Ok(Metric::SubversionGain),
            "censorship" | "censorship-susceptibility" => Ok(Metric::CensorshipSusceptibility),
            other => Err(MdpError::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue<F> {
    pub value: F,
    pub stats: SolveStats,
}

/// Long-run averages per mining event of one fixed policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvaluation<F> {
    pub attacker: F,
    pub honest: F,
    pub bonus: F,
    pub iterations: usize,
}

impl<F: Real> PolicyEvaluation<F> {
    pub fn relative_reward(&self) -> F {
        let total = self.attacker + self.honest;
        if total > F::zero() {
            self.attacker / total
        } else {
            F::zero()
        }
    }
}

/// Publishes every attacker block at once and adopts every honest block.
pub fn honest_policy<F: Real>(mdp: &CompiledMdp<F>) -> Vec<u32> {
    (0..mdp.num_states())
        .map(|s| {
            let st = mdp.space.states[s];
            let wanted = if st.attacker > st.public {
                Action::Override(st.attacker - st.public)
            } else {
                Action::Adopt
            };
            mdp.actions_of(s)
                .find(|&a| mdp.actions[a] == wanted)
                .expect("honest action always feasible") as u32
        })
        .collect()
}

pub fn evaluate_policy<F: Real>(
    mdp: &CompiledMdp<F>,
    policy: &[u32],
    opts: &SolverOptions,
) -> Result<PolicyEvaluation<F>, MdpError> {
    let mut values = Vec::new();
    let mut run = |w: Weights<F>| -> Result<(F, usize), MdpError> {
        let sol = solve_gain(mdp, &w, Some(policy), opts, StopRule::Span, &mut values)?;
        Ok((sol.gain(), sol.iterations))
    };
    let (attacker, i1) = run(Weights::attacker())?;
    let (honest, i2) = run(Weights::honest())?;
    let (bonus, i3) = run(Weights {
        attacker: F::zero(),
        honest: F::zero(),
        bonus: F::one(),
        elapsed: F::zero(),
    })?;
    Ok(PolicyEvaluation {
        attacker,
        honest,
        bonus,
        iterations: i1 + i2 + i3,
    })
}

/// Relative reward of the honest policy; equals `alpha`.
pub fn honest_relative_reward<F: Real>(
    cfg: &MdpConfig<F>,
    opts: &SolverOptions,
) -> Result<F, MdpError> {
    let mdp = CompiledMdp::build(cfg)?;
    let policy = honest_policy(&mdp);
    Ok(evaluate_policy(&mdp, &policy, opts)?.relative_reward())
}

/// Maximal long-run share of settled rewards the attacker can obtain.
pub fn optimal_relative_reward<F: Real>(
    cfg: &MdpConfig<F>,
    opts: &SolverOptions,
) -> Result<MetricValue<F>, MdpError> {
    let mdp = CompiledMdp::build(cfg)?;
    optimal_relative_reward_on(&mdp, opts)
}

pub fn optimal_relative_reward_on<F: Real>(
    mdp: &CompiledMdp<F>,
    opts: &SolverOptions,
) -> Result<MetricValue<F>, MdpError> {
    let mut stats = SolveStats::default();
    if mdp.config.alpha == F::zero() {
        stats.states = mdp.num_states();
        return Ok(MetricValue {
            value: F::zero(),
            stats,
        });
    }
    let num = Weights::attacker();
    let den = Weights {
        attacker: F::one(),
        honest: F::one(),
        bonus: F::zero(),
        elapsed: F::zero(),
    };
    let value = solve_ratio(mdp, &num, &den, (F::zero(), F::one()), opts, &mut stats)?;
    Ok(MetricValue { value, stats })
}

fn max_gain<F: Real>(
    mdp: &CompiledMdp<F>,
    w: Weights<F>,
    opts: &SolverOptions,
) -> Result<(F, SolveStats), MdpError> {
    let mut values = Vec::new();
    let sol = solve_gain(mdp, &w, None, opts, StopRule::Span, &mut values)?;
    let stats = SolveStats {
        iterations: sol.iterations,
        probes: 1,
        states: mdp.num_states(),
    };
    Ok((sol.gain(), stats))
}

/// Attacker income plus double-spend bonus per mining event, above `alpha`.
pub fn subversion_gain<F: Real>(
    cfg: &MdpConfig<F>,
    opts: &SolverOptions,
) -> Result<MetricValue<F>, MdpError> {
    let mdp = CompiledMdp::build(cfg)?;
    let w = Weights {
        attacker: F::one(),
        honest: F::zero(),
        bonus: F::one(),
        elapsed: F::zero(),
    };
    let (g, stats) = max_gain(&mdp, w, opts)?;
    Ok(MetricValue {
        value: (g - cfg.alpha).max(F::zero()),
        stats,
    })
}

/// Largest fraction of honest income per mining event the attacker can
/// remove.
pub fn censorship_susceptibility<F: Real>(
    cfg: &MdpConfig<F>,
    opts: &SolverOptions,
) -> Result<MetricValue<F>, MdpError> {
    let mdp = CompiledMdp::build(cfg)?;
    let w = Weights {
        attacker: F::zero(),
        honest: -F::one(),
        bonus: F::zero(),
        elapsed: F::zero(),
    };
    let (g, stats) = max_gain(&mdp, w, opts)?;
    let fair = F::one() - cfg.alpha;
    let min_honest = -g;
    let value = (F::one() - min_honest / fair).max(F::zero()).min(F::one());
    Ok(MetricValue { value, stats })
}

pub fn evaluate_metric<F: Real>(
    metric: Metric,
    cfg: &MdpConfig<F>,
    opts: &SolverOptions,
) -> Result<MetricValue<F>, MdpError> {
    match metric {
        Metric::IncentiveCompatibility => optimal_relative_reward(cfg, opts),
        Metric::SubversionGain => subversion_gain(cfg, opts),
        Metric::CensorshipSusceptibility => censorship_susceptibility(cfg, opts),
    }
}

/// One point of a metric curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mechanism: Mechanism,
    pub metric: Metric,
    pub alpha: f64,
    pub gamma: f64,
    pub omega: u8,
    pub wfork: u8,
    pub value: f64,
    pub solver_iterations: usize,
}

/// Evaluates `metric` at every `alpha`, keeping the rest of `base`.
pub fn sweep<F: Real>(
    metric: Metric,
    base: &MdpConfig<F>,
    alphas: &[F],
    opts: &SolverOptions,
) -> Result<Vec<SweepRow>, MdpError> {
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = MdpConfig {
                alpha,
                ..base.clone()
            };
            let v = evaluate_metric(metric, &cfg, opts)?;
            Ok(SweepRow {
                mechanism: cfg.mechanism,
                metric,
                alpha: alpha.to_f64().unwrap_or(f64::NAN),
                gamma: cfg.gamma.to_f64().unwrap_or(f64::NAN),
                omega: cfg.omega,
                wfork: cfg.wfork,
                value: v.value.to_f64().unwrap_or(f64::NAN),
                solver_iterations: v.stats.iterations,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_alpha_is_zero() {
        let opts = SolverOptions::default();
        for m in [Mechanism::Bitcoin, Mechanism::ProportionalSplitting] {
            let cfg = MdpConfig::new(m, 0.0f64).with_max_fork(4);
            assert_eq!(optimal_relative_reward(&cfg, &opts).unwrap().value, 0.0);
            assert!(subversion_gain(&cfg, &opts).unwrap().value.abs() < 1e-6);
            assert!(censorship_susceptibility(&cfg, &opts).unwrap().value.abs() < 1e-6);
        }
    }

    #[test]
    fn honest_policy_earns_fair_share() {
        let opts = SolverOptions::default();
        let cfg = MdpConfig::new(Mechanism::RewardSplitting, 0.2f64).with_max_fork(5);
        let r = honest_relative_reward(&cfg, &opts).unwrap();
        assert!((r - 0.2).abs() < 1e-6);
    }
}
