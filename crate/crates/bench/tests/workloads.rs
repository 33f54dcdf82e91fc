use gprs_bench::{methods, workloads};

#[test]
fn every_workload_method_pair_samples() {
    let loads = workloads().unwrap();
    assert_eq!(loads.len(), 5);
    for w in &loads {
        for m in methods(w) {
            for seed in 0..20 {
                let r = m
                    .run(&w.stretch, seed)
                    .unwrap_or_else(|e| panic!("{} {}: {e}", w.name, m.name()));
                assert!(r.x.is_finite() && r.steps >= 1, "{} {}", w.name, m.name());
            }
        }
    }
}

#[test]
fn unimodal_bnb_only_where_valid() {
    for w in workloads().unwrap() {
        let has = methods(&w).iter().any(|m| m.name() == "gprs_bnb");
        assert_eq!(has, w.stretch.pair().is_unimodal(), "{}", w.name);
    }
}
