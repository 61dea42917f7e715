use num_traits::Zero;
use proptest::prelude::*;
use workshare_core::protocol::{extract_ledger, maxvalid, validate_chain, Chain};
use workshare_core::rewards::{allocate_all, eligible_objects, finalized_heights};
use workshare_core::scalar::ratio;
use workshare_core::sim::{run_execution, SimConfig};
use workshare_core::{Allocation, ExactAllocation};

fn chains(seed: u64, rounds: u64) -> (SimConfig, Vec<Chain>) {
    let cfg = SimConfig {
        rounds,
        seed,
        ..SimConfig::default()
    };
    let trace = run_execution(&cfg).unwrap();
    (cfg, trace.final_chains)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn final_chains_are_valid_and_agree(seed in any::<u64>()) {
        let (cfg, cs) = chains(seed, 2000);
        for c in &cs {
            prop_assert!(validate_chain(c, &cfg.protocol));
        }
        let k = cfg.protocol.safety;
        for a in &cs {
            for b in &cs {
                let la = extract_ledger(a, k);
                let lb = extract_ledger(b, k);
                let n = la.len().min(lb.len());
                prop_assert_eq!(&la[..n], &lb[..n]);
            }
        }
    }

    #[test]
    fn ledger_of_prefix_is_prefix(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let (cfg, cs) = chains(seed, 1500);
        let c = &cs[0];
        let h = (c.height() as f64 * cut) as u64;
        let p = c.prefix(h).unwrap();
        prop_assert!(p.is_prefix_of(c));
        let lp = extract_ledger(&p, cfg.protocol.safety);
        let lc = extract_ledger(c, cfg.protocol.safety);
        prop_assert_eq!(&lc[..lp.len()], &lp[..]);
    }

    #[test]
    fn allocation_conserves_and_scales(seed in any::<u64>(), reward in 0.5f64..50.0) {
        let (cfg, cs) = chains(seed, 2000);
        let c = &cs[0];
        let a: Allocation = allocate_all(c, reward, &cfg.protocol).unwrap();
        let b: Allocation = allocate_all(c, 1.0, &cfg.protocol).unwrap();
        let heights = finalized_heights(c, &cfg.protocol).count() as f64;
        prop_assert!((a.total() - reward * heights).abs() <= 1e-9 * reward * heights.max(1.0));
        for (p, v) in &a.per_party {
            prop_assert!((v / reward - b.per_party[p]).abs() <= 1e-9 * heights.max(1.0));
        }
    }
}

#[test]
fn maxvalid_prefers_heavier_and_keeps_local_on_ties() {
    let (cfg, cs) = chains(3, 1000);
    let c = &cs[0];
    let short = c.prefix(c.height() / 2).unwrap();
    assert_eq!(maxvalid(&short, [c], &cfg.protocol).tip_id(), c.tip_id());
    assert_eq!(maxvalid(c, [&short], &cfg.protocol).tip_id(), c.tip_id());
    assert_eq!(maxvalid(c, [c], &cfg.protocol).tip_id(), c.tip_id());
}

#[test]
fn exact_allocation_sums_exactly() {
    let (cfg, cs) = chains(5, 2000);
    let c = &cs[0];
    let reward = ratio(7, 3);
    let a: ExactAllocation = allocate_all(c, reward.clone(), &cfg.protocol).unwrap();
    for per in a.per_height.values() {
        let s = per.values().fold(num_rational::BigRational::zero(), |x, y| x + y);
        assert_eq!(s, reward);
    }
    let heights = finalized_heights(c, &cfg.protocol).count() as i64;
    assert_eq!(a.total(), reward * ratio(heights, 1));
}

#[test]
fn eligible_objects_respect_windows() {
    let (cfg, cs) = chains(9, 3000);
    let c = &cs[0];
    let r = cfg.protocol.recency;
    let mut workshares = 0;
    for (h, objs) in eligible_objects(c, &cfg.protocol) {
        for o in objs {
            assert_eq!(o.height, h);
            assert!(o.published_at >= h && o.published_at < h + r, "{o:?}");
            assert!(o.work > cfg.protocol.share_threshold);
            workshares += 1;
        }
    }
    assert!(workshares > c.height());
    assert!(finalized_heights(c, &cfg.protocol).all(|h| h + r <= c.len()));
}
