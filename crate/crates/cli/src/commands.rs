use std::fs;
use std::io::{self, Write};
use std::path::Path;

use workshare_core::mdp::{sweep, MdpConfig, MdpError, Metric, SweepRow};
use workshare_core::protocol::extract_ledger;
use workshare_core::rewards::allocate_all;
use workshare_core::sampling::{achievable_inaccuracy, kilobytes, sampling_row, storage_overhead, BYTES_PER_SHARE};
use workshare_core::sim::{evaluate, run_execution, PropertyReport, SimConfig};

use crate::config::{self, ConfigError, ExperimentConfig};
use crate::output::{emit_plot_data, write_csv, write_json, Curve, OutputError};
use crate::CliError;

/// Computed results, held back until every point has succeeded.
pub enum Results {
    Mdp(Vec<(Metric, Vec<SweepRow>)>),
    Sim(Vec<(PropertyReport, Option<Vec<u8>>)>),
    Sampling(ExperimentConfig),
    Rewards(RewardsDemo),
}

pub struct RewardsDemo {
    ledger: Vec<u64>,
    csv: Vec<u8>,
    summary: serde_json::Value,
}

fn mdp_configs(cfg: &ExperimentConfig) -> Result<Vec<(Metric, Vec<MdpConfig<f64>>)>, ConfigError> {
    config::validate_mdp(cfg)?;
    let m = &cfg.mdp;
    let mut out = Vec::new();
    for metric in config::parse_metrics(cfg)? {
        let mut bases = Vec::new();
        for mech in config::parse_mechanisms(cfg)? {
            let mut base = MdpConfig::new(mech, 0.0)
                .with_windows(m.omega, m.wfork)
                .with_max_fork(m.max_fork);
            if let Some(g) = m.gamma {
                base = base.with_gamma(g);
            }
            base.double_spend_value = m.double_spend_value;
            base.confirmations = m.confirmations;
            for &alpha in &m.alpha_grid {
                MdpConfig { alpha, ..base.clone() }
                    .validate()
                    .map_err(|e| ConfigError::Field {
                        field: "mdp".into(),
                        message: e.to_string(),
                    })?;
            }
            bases.push(base);
        }
        out.push((metric, bases));
    }
    Ok(out)
}

fn sim_for(cfg: &ExperimentConfig, seed: u64, rounds: Option<u64>) -> SimConfig {
    SimConfig {
        seed,
        rounds: rounds.unwrap_or(cfg.sim.rounds),
        ..cfg.sim.clone()
    }
}

/// Checks everything the command needs before any work starts.
pub fn validate(command: &str, cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    config::validate_common(cfg)?;
    match command {
        "mdp-eval" => mdp_configs(cfg).map(|_| ()),
        "sim" => cfg
            .seeds
            .iter()
            .try_for_each(|&s| config::validate_sim(&sim_for(cfg, s, None))),
        "sampling" => config::validate_sampling(cfg),
        "rewards-demo" => {
            if !(cfg.rewards.reward_per_height > 0.0) {
                return Err(ConfigError::Field {
                    field: "rewards.reward_per_height".into(),
                    message: "must be positive".into(),
                });
            }
            config::validate_sim(&sim_for(cfg, cfg.seeds[0], Some(cfg.rewards.rounds)))
        }
        other => unreachable!("unknown command {other}"),
    }
}

pub fn compute(command: &str, cfg: &ExperimentConfig) -> Result<Results, CliError> {
    match command {
        "mdp-eval" => {
            let mut out = Vec::new();
            for (metric, bases) in mdp_configs(cfg)? {
                let mut rows = Vec::new();
                for base in bases {
                    let r = sweep(metric, &base, &cfg.mdp.alpha_grid, &cfg.mdp.solver).map_err(
                        |e| match e {
                            MdpError::Nonconvergence { .. } => CliError::Solver(e.to_string()),
                            other => CliError::Config(ConfigError::Field {
                                field: "mdp".into(),
                                message: other.to_string(),
                            }),
                        },
                    )?;
                    rows.extend(r);
                }
                out.push((metric, rows));
            }
            Ok(Results::Mdp(out))
        }
        "sim" => {
            let mut out = Vec::new();
            for &seed in &cfg.seeds {
                let sc = sim_for(cfg, seed, None);
                let trace = run_execution(&sc).map_err(|e| CliError::Sim(e.to_string()))?;
                let jsonl = if cfg.trace {
                    let mut buf = Vec::new();
                    trace.write_jsonl(&mut buf).map_err(OutputError::from)?;
                    Some(buf)
                } else {
                    None
                };
                out.push((evaluate(&trace), jsonl));
            }
            Ok(Results::Sim(out))
        }
        "sampling" => Ok(Results::Sampling(cfg.clone())),
        "rewards-demo" => {
            let sc = sim_for(cfg, cfg.seeds[0], Some(cfg.rewards.rounds));
            let trace = run_execution(&sc).map_err(|e| CliError::Sim(e.to_string()))?;
            let chain = &trace.final_chains[0];
            let ledger = extract_ledger(chain, sc.protocol.safety)
                .into_iter()
                .map(|t| t.0)
                .collect();
            let alloc = allocate_all(chain, cfg.rewards.reward_per_height, &sc.protocol)
                .map_err(|e| CliError::Sim(e.to_string()))?;
            let mut csv = Vec::new();
            alloc.write_csv(&mut csv).map_err(OutputError::from)?;
            let fractions: std::collections::BTreeMap<String, f64> = alloc
                .per_party
                .keys()
                .map(|&p| (p.to_string(), alloc.fraction(p)))
                .collect();
            let summary = serde_json::json!({
                "chain_height": chain.height(),
                "finalized_heights": alloc.per_height.len(),
                "distributed": alloc.distributed,
                "allocated": alloc.total(),
                "fractions": fractions,
            });
            Ok(Results::Rewards(RewardsDemo {
                ledger,
                csv,
                summary,
            }))
        }
        other => unreachable!("unknown command {other}"),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Writes results into `dir` and returns the file names.
pub fn write(dir: &Path, results: &Results) -> Result<Vec<String>, OutputError> {
    let mut files = Vec::new();
    let stdout = io::stdout();
    let mut so = stdout.lock();
    match results {
        Results::Mdp(all) => {
            for (metric, rows) in all {
                let name = format!("{}.csv", metric.name());
                let table: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.mechanism.to_string(),
                            r.metric.name().to_string(),
                            fmt(r.alpha),
                            fmt(r.gamma),
                            r.omega.to_string(),
                            r.wfork.to_string(),
                            fmt(r.value),
                            r.solver_iterations.to_string(),
                        ]
                    })
                    .collect();
                let header = [
                    "mechanism",
                    "metric",
                    "alpha",
                    "gamma",
                    "omega",
                    "wfork",
                    "value",
                    "solver_iterations",
                ];
                write_csv(&dir.join(&name), &header, &table)?;
                files.push(name);
                for r in &table {
                    writeln!(so, "{}", r.join(","))?;
                }
                let mut curves: Vec<Curve> = Vec::new();
                for r in rows {
                    let mech = r.mechanism.to_string();
                    match curves.iter_mut().find(|c| c.mechanism == mech) {
                        Some(c) => c.points.push((r.alpha, r.value)),
                        None => curves.push(Curve {
                            metric: metric.name().to_string(),
                            mechanism: mech,
                            points: vec![(r.alpha, r.value)],
                        }),
                    }
                }
                for p in emit_plot_data(dir, &curves)? {
                    files.push(file_name(&p));
                }
            }
        }
        Results::Sim(reports) => {
            let plain: Vec<&PropertyReport> = reports.iter().map(|(r, _)| r).collect();
            write_json(&dir.join("reports.json"), &plain)?;
            files.push("reports.json".into());
            let header = [
                "seed",
                "final_height",
                "consistency_ok",
                "growth_ok",
                "freshness_violations",
                "coalition_fraction",
                "all_ok",
            ];
            let table: Vec<Vec<String>> = plain
                .iter()
                .map(|r| {
                    vec![
                        r.seed.to_string(),
                        r.final_height.to_string(),
                        r.consistency_ok.to_string(),
                        r.growth_ok.to_string(),
                        r.freshness_violations.to_string(),
                        r.rewards
                            .as_ref()
                            .map_or(String::new(), |x| fmt(x.coalition_fraction)),
                        r.all_ok().to_string(),
                    ]
                })
                .collect();
            write_csv(&dir.join("summary.csv"), &header, &table)?;
            files.push("summary.csv".into());
            writeln!(so, "{}", header.join(","))?;
            for r in &table {
                writeln!(so, "{}", r.join(","))?;
            }
            for (r, trace) in reports {
                if let Some(t) = trace {
                    let name = format!("trace_{}.jsonl", r.seed);
                    fs::write(dir.join(&name), t)?;
                    files.push(name);
                }
            }
        }
        Results::Sampling(cfg) => {
            let s = &cfg.sampling;
            let header = ["p", "delta", "epsilon", "n", "n_rounded", "bytes", "kb"];
            let mut table = Vec::new();
            for &p in &s.ps {
                for &d in &s.deltas {
                    let r = sampling_row(s.epsilon, d, p).expect("validated");
                    table.push(vec![
                        fmt(r.p),
                        fmt(r.delta),
                        fmt(r.epsilon),
                        r.n.to_string(),
                        r.n_rounded.to_string(),
                        r.bytes.to_string(),
                        format!("{:.2}", r.kb),
                    ]);
                }
            }
            write_csv(&dir.join("samples.csv"), &header, &table)?;
            files.push("samples.csv".into());
            writeln!(so, "{}", header.join(","))?;
            for r in &table {
                writeln!(so, "{}", r.join(","))?;
            }
            let mut curve = Vec::new();
            let mut dat = String::from("# n kb");
            for p in &s.ps {
                dat.push_str(&format!(" delta_p{p}"));
            }
            dat.push('\n');
            for &n in &s.sample_grid {
                let kb = kilobytes(storage_overhead(n, BYTES_PER_SHARE));
                dat.push_str(&format!("{n} {kb}"));
                for &p in &s.ps {
                    let d = achievable_inaccuracy(n as f64, s.epsilon, p).expect("validated");
                    dat.push_str(&format!(" {d}"));
                    curve.push(vec![n.to_string(), fmt(p), fmt(d), fmt(kb)]);
                }
                dat.push('\n');
            }
            write_csv(&dir.join("inaccuracy.csv"), &["n", "p", "delta", "kb"], &curve)?;
            fs::write(dir.join("inaccuracy.dat"), dat)?;
            files.push("inaccuracy.csv".into());
            files.push("inaccuracy.dat".into());
        }
        Results::Rewards(demo) => {
            let mut ledger = String::new();
            for t in &demo.ledger {
                ledger.push_str(&format!("{t}\n"));
            }
            fs::write(dir.join("ledger.txt"), ledger)?;
            fs::write(dir.join("allocation.csv"), &demo.csv)?;
            write_json(&dir.join("summary.json"), &demo.summary)?;
            files.extend(["ledger.txt", "allocation.csv", "summary.json"].map(String::from));
            writeln!(so, "ledger: {} transactions", demo.ledger.len())?;
            writeln!(so, "{}", serde_json::to_string_pretty(&demo.summary).map_err(io::Error::from)?)?;
        }
    }
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
