mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use srcpref_core::results::{ProbeResult, TransportMeta};
use srcpref_gateway::{Gateway, MockModel, ProbCache};

#[test]
fn cache_replay_is_bit_identical() {
    let cache = Arc::new(ProbCache::in_memory());
    let g = Gateway::new(Arc::new(MockModel::source_affinity("Civil", 0.123456789).unwrap())).with_cache(cache.clone());
    let ps = probes();
    let first = g.run(&ps).unwrap();
    let second = g.run(&ps).unwrap();
    for (a, b) in first.iter().zip(&second) {
        assert!(!a.transport.cache_hit);
        assert!(b.transport.cache_hit);
        assert_eq!(a.raw_probs, b.raw_probs);
        assert_eq!(a.normalized, b.normalized);
    }
    let uncached = Gateway::new(Arc::new(MockModel::source_affinity("Civil", 0.123456789).unwrap())).run(&ps).unwrap();
    for (a, b) in first.iter().zip(&uncached) {
        assert_eq!(a.raw_probs, b.raw_probs);
    }
}

#[test]
fn disk_cache_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let ps = probes();
    let model = || Arc::new(MockModel::position_biased(0.37).unwrap());
    let a = Gateway::new(model()).with_cache(Arc::new(ProbCache::on_disk(dir.path()).unwrap())).run(&ps).unwrap();
    let b = Gateway::new(model()).with_cache(Arc::new(ProbCache::on_disk(dir.path()).unwrap())).run(&ps).unwrap();
    assert!(b.iter().all(|r| r.transport.cache_hit));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.raw_probs, y.raw_probs);
    }
}

#[test]
fn parallel_schedule_does_not_change_results() {
    let ps: Vec<_> = (0..6).flat_map(|_| probes()).collect();
    let model = Arc::new(MockModel::table_majority(0.2).unwrap());
    let strip = |rs: Vec<ProbeResult>| rs.into_iter().map(|r| (r.probe_id, r.raw_probs)).collect::<Vec<_>>();
    let serial = strip(Gateway::new(model.clone()).run(&ps).unwrap());
    let parallel = strip(Gateway::new(model).with_parallelism(8).run(&ps).unwrap());
    assert_eq!(serial, parallel);
}

proptest! {
    #[test]
    fn normalization_ignores_common_scale(a in 1e-6f64..1.0, b in 1e-6f64..1.0, c in 0.01f64..1.0) {
        let p = probes().remove(0);
        let raw = |x: f64, y: f64| [("A".to_string(), x), ("B".to_string(), y)].into_iter().collect();
        let r1 = ProbeResult::new(&p, "m", raw(a, b), TransportMeta::default());
        let r2 = ProbeResult::new(&p, "m", raw(a * c, b * c), TransportMeta::default());
        let (n1, n2) = (r1.normalized.unwrap(), r2.normalized.unwrap());
        prop_assert!((n1[0] - n2[0]).abs() < 1e-12);
        prop_assert!((n1[0] - a / (a + b)).abs() < 1e-12);
    }
}

#[test]
fn zero_mass_is_degenerate() {
    let p = probes().remove(0);
    let raw = [("A".to_string(), 0.0), ("B".to_string(), 0.0)].into_iter().collect();
    assert!(ProbeResult::new(&p, "m", raw, TransportMeta::default()).is_degenerate());
}
