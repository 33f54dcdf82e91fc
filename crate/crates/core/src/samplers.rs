//! Greedy Poisson rejection samplers.
//!
//! Every sampler searches a keyed `(1, P)` Poisson process for its first arrival `(T, X)`
//! with `T < sigma(r(X))`. They differ in how the process is explored: in time order, as
//! `J` superposed streams, or along a path of a split-induced search tree.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::codec::SampleCode;
use crate::distributions::Region;
use crate::error::{Error, Result};
use crate::poisson::{
    arrival_stream, depth_of, next_arrival_in, Arrival, BspTree, SplitFn, TreeNode, MAX_DEPTH,
};
use crate::rng::RngKey;
use crate::special::{exp, ln};
use crate::stats::mean_var;
use crate::stretch::StretchMap;

/// Default candidate budget for time-ordered samplers.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Survival masses at or below this floor make the branching probability meaningless.
pub const SURVIVAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub x: f64,
    pub code: SampleCode,
    /// Candidate arrivals simulated (summed over threads for the parallel sampler).
    pub steps: u64,
    /// Arrival time of the accepted point.
    pub accept_time: f64,
    /// Per-thread candidate counts; a single entry for the other samplers.
    pub thread_steps: Vec<u64>,
}

impl SampleResult {
    /// Depth of the accepted node for tree-based samplers.
    pub fn depth(&self) -> Option<u32> {
        (self.code.variant == crate::codec::Variant::Bnb).then(|| depth_of(self.code.index))
    }
}

/// Time-ordered GPRS on the stream `key`.
pub fn gprs_global(stretch: &StretchMap, key: RngKey) -> Result<SampleResult> {
    gprs_global_with_budget(stretch, key, DEFAULT_BUDGET)
}

pub fn gprs_global_with_budget(
    stretch: &StretchMap,
    key: RngKey,
    budget: u64,
) -> Result<SampleResult> {
    let pair = stretch.pair();
    for a in arrival_stream(1.0, pair.proposal(), key) {
        let n = a.n.unwrap();
        if n > budget {
            return Err(Error::Budget { budget, steps: n });
        }
        if stretch.accepts(a.t, pair.ratio(a.x)) {
            return Ok(SampleResult {
                x: a.x,
                code: SampleCode::global(n, key.seed),
                steps: n,
                accept_time: a.t,
                thread_steps: vec![n],
            });
        }
    }
    unreachable!("arrival streams are infinite")
}

/// How the logical workers of the parallel sampler are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Concurrent,
}

/// Parallel GPRS over `threads` superposed `(1/J, P)` streams with ids `1..=J`.
pub fn gprs_parallel(stretch: &StretchMap, threads: u64, seed: u64) -> Result<SampleResult> {
    gprs_parallel_with(stretch, threads, seed, Execution::Serial, DEFAULT_BUDGET)
}

pub fn gprs_parallel_with(
    stretch: &StretchMap,
    threads: u64,
    seed: u64,
    execution: Execution,
    budget: u64,
) -> Result<SampleResult> {
    if threads == 0 {
        return Err(Error::InvalidParameter("need at least one thread".into()));
    }
    let pair = stretch.pair();
    let rate = 1.0 / threads as f64;
    let best = AtomicU64::new(f64::INFINITY.to_bits());

    // first acceptance of worker j, or None if it gave up behind a better one
    let worker = |j: u64| -> Result<Option<(f64, f64, u64)>> {
        for a in arrival_stream(rate, pair.proposal(), RngKey::new(seed, j)) {
            let n = a.n.unwrap();
            if n > budget {
                return Err(Error::Budget { budget, steps: n });
            }
            // non-negative floats order like their bit patterns
            if a.t > f64::from_bits(best.load(Ordering::Relaxed)) {
                return Ok(None);
            }
            if stretch.accepts(a.t, pair.ratio(a.x)) {
                best.fetch_min(a.t.to_bits(), Ordering::Relaxed);
                return Ok(Some((a.t, a.x, n)));
            }
        }
        unreachable!("arrival streams are infinite")
    };

    let (j_star, t_star, x, n_star) = match execution {
        Execution::Serial => merged_first_acceptance(stretch, threads, seed, budget)?,
        Execution::Concurrent => {
            let outcomes: Vec<_> = (1..=threads).into_par_iter().map(worker).collect();
            let mut winner: Option<(u64, f64, f64, u64)> = None;
            for (j, o) in (1..=threads).zip(outcomes) {
                if let Some((t, x, n)) = o? {
                    if winner.is_none_or(|w| t < w.1) {
                        winner = Some((j, t, x, n));
                    }
                }
            }
            winner.expect("some worker accepts")
        }
    };

    // ideal per-thread work: every arrival before T*, plus the one that ends the thread
    let thread_steps: Vec<u64> = (1..=threads)
        .map(|j| {
            if j == j_star {
                return n_star;
            }
            let mut s = arrival_stream(rate, pair.proposal(), RngKey::new(seed, j));
            let mut count = 1;
            while s.next_time() < t_star {
                count += 1;
            }
            count
        })
        .collect();
    Ok(SampleResult {
        x,
        code: SampleCode::parallel(j_star, n_star, threads, seed),
        steps: thread_steps.iter().sum(),
        accept_time: t_star,
        thread_steps,
    })
}

/// Single-threaded schedule of the parallel sampler: visit the superposed streams in
/// time order (ties to the smaller id) and stop at the first acceptance.
fn merged_first_acceptance(
    stretch: &StretchMap,
    threads: u64,
    seed: u64,
    budget: u64,
) -> Result<(u64, f64, f64, u64)> {
    let pair = stretch.pair();
    let rate = 1.0 / threads as f64;
    let mut streams: Vec<_> = (1..=threads)
        .map(|j| arrival_stream(rate, pair.proposal(), RngKey::new(seed, j)))
        .collect();
    let mut heads: Vec<Arrival> = streams.iter_mut().map(|s| s.next().unwrap()).collect();
    loop {
        let (i, a) = heads
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t))
            .map(|(i, a)| (i, *a))
            .unwrap();
        let n = a.n.unwrap();
        if n > budget {
            return Err(Error::Budget { budget, steps: n });
        }
        if stretch.accepts(a.t, pair.ratio(a.x)) {
            return Ok((i as u64 + 1, a.t, a.x, n));
        }
        heads[i] = streams[i].next().unwrap();
    }
}

fn bnb_result(node: &TreeNode, seed: u64) -> SampleResult {
    let steps = node.depth() as u64 + 1;
    SampleResult {
        x: node.arrival.x,
        code: SampleCode::bnb(node.heap(), seed),
        steps,
        accept_time: node.arrival.t,
        thread_steps: vec![steps],
    }
}

/// Branch-and-bound GPRS with on-sample splits for a unimodal ratio.
pub fn gprs_bnb_unimodal(stretch: &StretchMap, seed: u64) -> Result<SampleResult> {
    let pair = stretch.pair();
    if !pair.is_unimodal() {
        return Err(Error::InvalidParameter(
            "unimodal branch-and-bound needs a unimodal density ratio".into(),
        ));
    }
    let mode = pair.mode_x();
    let tree = BspTree::new(SplitFn::OnSample, pair.proposal(), seed);
    let mut node = tree.root();
    loop {
        if stretch.accepts(node.arrival.t, pair.ratio(node.arrival.x)) {
            return Ok(bnb_result(&node, seed));
        }
        let side = if node.arrival.x >= mode { 0 } else { 1 };
        node = tree.child(&node, side)?.ok_or(Error::DegenerateRegion {
            lo: node.region.lo,
            hi: node.region.hi,
        })?;
    }
}

/// Probability of branching right at level `h`, from the children's restricted gaps.
fn right_probability(stretch: &StretchMap, h: f64, children: &[Option<Region>; 2]) -> Result<f64> {
    let pair = stretch.pair();
    let mass =
        |r: &Option<Region>| -> Result<f64> { r.map_or(Ok(0.0), |r| pair.restricted_gap(h, &r)) };
    let s0 = mass(&children[0])?;
    let s1 = mass(&children[1])?;
    let s = s0 + s1;
    if !(s > SURVIVAL_FLOOR) {
        return Err(Error::Underflow { t: h });
    }
    if s1 == 0.0 {
        return Ok(0.0);
    }
    Ok(exp(ln(s1) - ln(s)).min(1.0))
}

/// Branch-and-bound GPRS with an arbitrary splitting function.
///
/// Each node carries a level `h`: the value of the inverse stretch restricted to the
/// node's region. A node draws its waiting time `dt ~ Exp(P(B))` and location
/// `x ~ P|B`, advances the level by the restricted flow over `dt`, and accepts when
/// `r(x)` exceeds the new level. Otherwise it branches right with probability
/// `gap(h | B_1) / gap(h | B)`. Locations depend only on the path, so the decoder walks
/// the same tree without the target.
pub fn gprs_bnb_general(stretch: &StretchMap, split: SplitFn, seed: u64) -> Result<SampleResult> {
    let pair = stretch.pair();
    let tree = BspTree::new(split, pair.proposal(), seed);
    let mut region = pair.proposal().support();
    let mut heap = 1u64;
    let mut level = 0.0;
    let mut clock = 0.0;
    loop {
        let a = next_arrival_in(&region, 0.0, pair.proposal(), tree.node_key(heap))?;
        clock += a.t;
        level = stretch.advance_level(&region, level, a.t)?;
        let steps = depth_of(heap) as u64 + 1;
        if pair.ratio(a.x) > level {
            return Ok(SampleResult {
                x: a.x,
                code: SampleCode::bnb(heap, seed),
                steps,
                accept_time: clock,
                thread_steps: vec![steps],
            });
        }
        if depth_of(heap) >= MAX_DEPTH {
            return Err(Error::Budget {
                budget: MAX_DEPTH as u64,
                steps: steps + 1,
            });
        }
        let children = split
            .split(&region, a.x)
            .map(|r| r.filter(|r| pair.proposal().mass(r) > 0.0));
        let side = match children {
            [None, None] => {
                return Err(Error::DegenerateRegion {
                    lo: region.lo,
                    hi: region.hi,
                })
            }
            [None, Some(_)] => 1,
            [Some(_), None] => 0,
            _ => {
                let rho = right_probability(stretch, level, &children)?;
                let u = tree.node_key(heap).with_counter(2).uniform();
                (u < rho) as u64
            }
        };
        region = children[side as usize].expect("chosen child is live");
        heap = 2 * heap + side;
    }
}

/// A sampler together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Global,
    Parallel { threads: u64 },
    BnbUnimodal,
    BnbDyadic { lo: f64, hi: f64 },
    Rejection,
    Pfr,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Global => "gprs_global".into(),
            Method::Parallel { threads } => format!("gprs_parallel_j{threads}"),
            Method::BnbUnimodal => "gprs_bnb".into(),
            Method::BnbDyadic { .. } => "gprs_bnb_dyadic".into(),
            Method::Rejection => "rejection".into(),
            Method::Pfr => "pfr".into(),
        }
    }

    /// Run on the process with the given seed (time-ordered methods use stream 1).
    pub fn run(&self, stretch: &StretchMap, seed: u64) -> Result<SampleResult> {
        self.run_with_budget(stretch, seed, DEFAULT_BUDGET)
    }

    pub fn run_with_budget(
        &self,
        stretch: &StretchMap,
        seed: u64,
        budget: u64,
    ) -> Result<SampleResult> {
        let key = RngKey::new(seed, 1);
        match *self {
            Method::Global => gprs_global_with_budget(stretch, key, budget),
            Method::Parallel { threads } => {
                gprs_parallel_with(stretch, threads, seed, Execution::Serial, budget)
            }
            Method::BnbUnimodal => gprs_bnb_unimodal(stretch, seed),
            Method::BnbDyadic { lo, hi } => {
                gprs_bnb_general(stretch, SplitFn::dyadic(lo, hi)?, seed)
            }
            Method::Rejection => {
                let pair = stretch.pair();
                baselines::rejection_sample_with_budget(pair, pair.r_star(), key, budget)
            }
            Method::Pfr => baselines::pfr_sample_with_budget(stretch.pair(), key, budget),
        }
    }
}

/// Monte-Carlo mean and variance of `steps` over `reps` runs with derived seeds.
pub fn sample_steps_moments(
    method: Method,
    stretch: &StretchMap,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let steps: Result<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            method
                .run(stretch, crate::rng::derive_seed(seed, i, 0))
                .map(|r| r.steps as f64)
        })
        .collect();
    Ok(mean_var(&steps?))
}
