mod common;

use common::{mean_se, seed, uniform_counts_p, variance, Oracle};
use gprs_core::baselines::{geometric_index_entropy, pfr_sample, rejection_sample};
use gprs_core::poisson::arrival_stream;
use gprs_core::samplers::{
    gprs_bnb_general, gprs_bnb_unimodal, gprs_global, gprs_global_with_budget, gprs_parallel,
    sample_steps_moments,
};
use gprs_core::stats::{ks_p_value, ks_statistic, ks_two_sample, ks_two_sample_p_value};
use gprs_core::{
    build_stretch, BspTree, DensityRatioPair, Error, Method, RngKey, SplitFn, TreeNode,
};
use rayon::prelude::*;

#[test]
fn acceptance_geometry_holds_on_every_candidate() {
    let pair = DensityRatioPair::laplace(1.0, 0.5).unwrap();
    let m = build_stretch(&pair).unwrap();
    for s in 0..300 {
        let key = RngKey::new(s, 1);
        let res = gprs_global(&m, key).unwrap();
        for a in arrival_stream(1.0, pair.proposal(), key).take(res.steps as usize) {
            let r = pair.ratio(a.x);
            let phi = if r >= pair.r_star() {
                f64::INFINITY
            } else {
                m.sigma(r).unwrap()
            };
            if a.n == Some(res.steps) {
                assert!(a.t < phi, "accepted above the graph");
                assert_eq!(a.x, res.x);
            } else {
                assert!(
                    a.t >= phi * (1.0 - 1e-9),
                    "rejected a point under the graph"
                );
            }
        }
    }
}

#[test]
fn branch_and_bound_matches_global_in_distribution() {
    let pair = DensityRatioPair::gaussian(1.0, 0.25).unwrap();
    let m = build_stretch(&pair).unwrap();
    let n = 100_000u64;
    let g: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| gprs_global(&m, RngKey::new(seed(1, 0, i), 1)).unwrap().x)
        .collect();
    let b: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| gprs_bnb_unimodal(&m, seed(1, 1, i)).unwrap().x)
        .collect();
    let p = ks_two_sample_p_value(ks_two_sample(&g, &b), g.len(), b.len());
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn dyadic_handles_bimodal_target() {
    let probs = vec![0.02, 0.40, 0.02, 0.02, 0.02, 0.02, 0.45, 0.05];
    let widths = vec![0.125; 8];
    let pair = DensityRatioPair::piecewise(probs.clone(), widths.clone()).unwrap();
    assert!(!pair.is_unimodal());
    let m = build_stretch(&pair).unwrap();
    assert!(matches!(
        gprs_bnb_unimodal(&m, 0),
        Err(Error::InvalidParameter(_))
    ));
    let split = SplitFn::dyadic(0.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| gprs_bnb_general(&m, split, seed(2, 0, i)).unwrap().x)
        .collect();
    let oracle = Oracle::Piecewise { probs, widths };
    let p = oracle.p_value(&xs);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn dyadic_gaussian_matches_target() {
    let pair = DensityRatioPair::gaussian(1.0, 0.25).unwrap();
    let m = build_stretch(&pair).unwrap();
    let split = SplitFn::dyadic(-8.0, 8.0).unwrap();
    let xs: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| gprs_bnb_general(&m, split, seed(3, 0, i)).unwrap().x)
        .collect();
    let oracle = Oracle::Gaussian {
        mean: 1.0,
        var: 0.25,
    };
    assert!(oracle.p_value(&xs) > 0.01);
}

#[test]
fn pfr_is_exact() {
    let pair = DensityRatioPair::triangular(0.0, 1.0, 0.3).unwrap();
    let oracle = Oracle::Triangular {
        a: 0.0,
        b: 1.0,
        c: 0.3,
    };
    let xs: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| pfr_sample(&pair, RngKey::new(seed(4, 0, i), 1)).unwrap().x)
        .collect();
    assert!(ks_p_value(ks_statistic(&xs, |x| oracle.cdf(x)), xs.len() as f64) > 0.01);
}

fn subtree_has_point_under_graph(
    tree: &BspTree,
    node: TreeNode,
    max_depth: u32,
    under: &impl Fn(&TreeNode) -> bool,
) -> bool {
    if under(&node) {
        return true;
    }
    if node.depth() >= max_depth {
        return false;
    }
    (0..2).any(|s| match tree.child(&node, s).unwrap() {
        Some(c) => subtree_has_point_under_graph(tree, c, max_depth, under),
        None => false,
    })
}

#[test]
fn unimodal_pruning_is_sound() {
    let pair = DensityRatioPair::gaussian(0.5, 0.1).unwrap();
    let m = build_stretch(&pair).unwrap();
    let under = |n: &TreeNode| m.accepts(n.arrival.t, pair.ratio(n.arrival.x));
    let mut checked = 0;
    for s in 0..100 {
        let res = gprs_bnb_unimodal(&m, s).unwrap();
        let tree = BspTree::new(SplitFn::OnSample, pair.proposal(), s);
        let path = tree.walk_to(res.code.index).unwrap();
        assert_eq!(path.last().unwrap().arrival.x, res.x);
        for (node, next) in path.iter().zip(&path[1..]) {
            assert!(!under(node));
            let pruned = 1 - (next.heap() & 1);
            if let Some(sib) = tree.child(node, pruned).unwrap() {
                checked += 1;
                assert!(
                    !subtree_has_point_under_graph(&tree, sib, sib.depth() + 8, &under),
                    "seed {s}: pruned subtree of node {} holds an acceptable point",
                    node.heap()
                );
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn moments_examples() {
    let half = build_stretch(&DensityRatioPair::uniform(0.5).unwrap()).unwrap();
    let (mean, var) = sample_steps_moments(Method::Global, &half, 100_000, 5).unwrap();
    let se = (var / 1e5).sqrt();
    assert!((mean - 2.0).abs() < 4.0 * se, "{mean}");
    // N is geometric(1/2) here, so the variance bound is tight; its standard error is
    // sqrt((mu4 - var^2) / n) with mu4 = 38 for this law
    let se_var = ((38.0 - 4.0) / 1e5f64).sqrt();
    assert!(var >= 2.0 - 4.0 * se_var, "{var}");
    let quarter = build_stretch(&DensityRatioPair::uniform(0.25).unwrap()).unwrap();
    let (mean, var) = sample_steps_moments(Method::Global, &quarter, 100_000, 6).unwrap();
    assert!((mean - 4.0).abs() < 4.0 * (var / 1e5).sqrt());
}

#[test]
fn parallel_thread_choice_is_uniform() {
    let m = build_stretch(&DensityRatioPair::uniform(0.5).unwrap()).unwrap();
    let runs: Vec<_> = (0..100_000u64)
        .into_par_iter()
        .map(|i| gprs_parallel(&m, 4, seed(7, 0, i)).unwrap())
        .collect();
    let mut counts = [0u64; 4];
    for r in &runs {
        counts[r.code.thread.unwrap() as usize - 1] += 1;
    }
    assert!(uniform_counts_p(&counts) > 0.01, "{counts:?}");
    let per_thread: Vec<f64> = runs.iter().map(|r| r.steps as f64 / 4.0).collect();
    let (mean, se) = mean_se(&per_thread);
    assert!((mean - 1.25).abs() < 4.0 * se, "{mean}");
}

#[test]
fn unimodal_steps_within_kl_bound() {
    let pair = DensityRatioPair::gaussian(1.0, 0.25).unwrap();
    let m = build_stretch(&pair).unwrap();
    let steps: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| gprs_bnb_unimodal(&m, seed(8, 0, i)).unwrap().steps as f64)
        .collect();
    let (mean, se) = mean_se(&steps);
    assert!(mean <= pair.divergences().0 + 3.0 + 4.0 * se, "{mean}");
}

#[test]
fn rejection_steps_are_geometric() {
    let pair = DensityRatioPair::laplace(0.5, 0.6).unwrap();
    let r = pair.r_star();
    let steps: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            rejection_sample(&pair, r, RngKey::new(seed(9, 0, i), 1))
                .unwrap()
                .steps as f64
        })
        .collect();
    let (mean, se) = mean_se(&steps);
    assert!((mean - r).abs() < 4.0 * se);
    // geometric variance (1 - p) / p^2 with p = 1 / r
    let v = variance(&steps);
    assert!((v - (r - 1.0) * r).abs() < 0.05 * r * r);
    assert!(rejection_sample(&pair, r * 0.9, RngKey::new(0, 1)).is_err());
    assert!(geometric_index_entropy(r).unwrap() > 0.0);
}

#[test]
fn budget_exhaustion_is_reported() {
    let m = build_stretch(&DensityRatioPair::uniform(0.01).unwrap()).unwrap();
    let hit = (0..100).any(|s| {
        matches!(
            gprs_global_with_budget(&m, RngKey::new(s, 1), 2),
            Err(Error::Budget { budget: 2, .. })
        )
    });
    assert!(hit);
}

#[test]
fn samplers_are_deterministic() {
    let pair = DensityRatioPair::gaussian(-0.4, 0.3).unwrap();
    let m = build_stretch(&pair).unwrap();
    for method in [
        Method::Global,
        Method::Parallel { threads: 3 },
        Method::BnbUnimodal,
        Method::BnbDyadic { lo: -8.0, hi: 8.0 },
        Method::Rejection,
        Method::Pfr,
    ] {
        for s in 0..20 {
            assert_eq!(method.run(&m, s).unwrap(), method.run(&m, s).unwrap());
        }
    }
}
