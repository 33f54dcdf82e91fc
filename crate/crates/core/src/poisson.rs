//! Poisson process simulation: time-ordered arrival streams and split-induced search trees.
//!
//! Keying: a time-ordered stream with id `j` reads its `n`-th inter-arrival time at counter
//! `2(n-1)` and its `n`-th location at counter `2(n-1)+1`. A tree node with heap index `H`
//! owns stream `H`: counter 0 is its time draw, 1 its location draw and 2 is reserved for
//! the branching coin of the general branch-and-bound sampler. With the same seed the tree
//! root is therefore the first arrival of stream 1.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::distributions::{Proposal, Region};
use crate::error::{Error, Result};
use crate::rng::{KeyedStream, RngKey, UniformSource};
use crate::special::ln;

/// Deepest heap index that fits in 64 bits.
pub const MAX_DEPTH: u32 = 62;

/// One point of a Poisson process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub t: f64,
    pub x: f64,
    /// Time index within its stream.
    pub n: Option<u64>,
    /// Heap index within a search tree.
    pub heap: Option<u64>,
}

/// `floor(log2 h)` for a heap index.
pub fn depth_of(heap: u64) -> u32 {
    63 - heap.leading_zeros()
}

/// Time-ordered arrivals of a `(rate, P)` process.
pub struct ArrivalStream<S: UniformSource> {
    rate: f64,
    proposal: Proposal,
    support: Region,
    source: S,
    t: f64,
    n: u64,
}

/// Keyed arrival stream; fully determined by `key` (its counter is ignored).
pub fn arrival_stream(rate: f64, proposal: Proposal, key: RngKey) -> ArrivalStream<KeyedStream> {
    ArrivalStream::from_source(rate, proposal, key.with_counter(0).stream())
}

impl<S: UniformSource> ArrivalStream<S> {
    pub fn from_source(rate: f64, proposal: Proposal, source: S) -> Self {
        assert!(rate > 0.0, "rate must be positive");
        Self {
            rate,
            proposal,
            support: proposal.support(),
            source,
            t: 0.0,
            n: 0,
        }
    }

    /// Time of the next arrival only; its location draw is skipped.
    pub fn next_time(&mut self) -> f64 {
        self.t += -ln(self.source.next_uniform()) / self.rate;
        self.source.next_uniform();
        self.n += 1;
        self.t
    }
}

impl<S: UniformSource> Iterator for ArrivalStream<S> {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        self.t += -ln(self.source.next_uniform()) / self.rate;
        let u = self.source.next_uniform();
        let x = self
            .proposal
            .truncated_sample(&self.support, u)
            .expect("support has positive mass");
        self.n += 1;
        Some(Arrival {
            t: self.t,
            x,
            n: Some(self.n),
            heap: None,
        })
    }
}

/// Location of the `n`-th arrival of stream `key`, without simulating its predecessors.
pub fn stream_location(proposal: Proposal, key: RngKey, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("time index starts at 1".into()));
    }
    let u = key.with_counter(2 * (n - 1) + 1).uniform();
    proposal.truncated_sample(&proposal.support(), u)
}

/// First arrival of the process restricted to `region`, strictly after `after`.
/// Uses counters 0 (time) and 1 (location) of `key`.
pub fn next_arrival_in(
    region: &Region,
    after: f64,
    proposal: Proposal,
    key: RngKey,
) -> Result<Arrival> {
    let mass = proposal.mass(region);
    if !(mass > 0.0) {
        return Err(Error::DegenerateRegion {
            lo: region.lo,
            hi: region.hi,
        });
    }
    let mut s = key.with_counter(0).stream();
    let u1 = s.next_uniform();
    let u2 = s.next_uniform();
    Ok(Arrival {
        t: after - ln(u1) / mass,
        x: proposal.truncated_sample(region, u2)?,
        n: None,
        heap: None,
    })
}

/// Splitting function inducing a binary space partition tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitFn {
    /// `{B, empty}`.
    Trivial,
    /// `{B ∩ (-inf, X), B ∩ (X, inf)}` at the node's own sample.
    OnSample,
    /// Midpoint of `B ∩ (lo, hi)`; unbounded tails stay attached to the edge cells.
    Dyadic { lo: f64, hi: f64 },
}

impl SplitFn {
    pub fn dyadic(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "dyadic split needs a finite interval, got ({lo}, {hi})"
            )));
        }
        Ok(SplitFn::Dyadic { lo, hi })
    }

    /// The two children of `region` (whose node sample is `x`). `None` marks an empty child.
    pub fn split(&self, region: &Region, x: f64) -> [Option<Region>; 2] {
        let cut = |m: f64| -> [Option<Region>; 2] {
            [
                Region::interval(region.lo, m).ok(),
                Region::interval(m, region.hi).ok(),
            ]
        };
        match *self {
            SplitFn::Trivial => [Some(*region), None],
            SplitFn::OnSample => cut(x),
            SplitFn::Dyadic { lo, hi } => {
                let a = region.lo.max(lo);
                let b = region.hi.min(hi);
                if a < b {
                    cut(0.5 * (a + b))
                } else {
                    // cell lies wholly in a tail: keep it whole
                    [Some(*region), None]
                }
            }
        }
    }
}

/// A node of the extended tree: its arrival and its bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub arrival: Arrival,
    pub region: Region,
}

impl TreeNode {
    pub fn heap(&self) -> u64 {
        self.arrival.heap.expect("tree nodes carry a heap index")
    }

    pub fn depth(&self) -> u32 {
        depth_of(self.heap())
    }
}

/// The extended BSP tree of a split function over one keyed process.
#[derive(Debug, Clone, Copy)]
pub struct BspTree {
    pub split: SplitFn,
    pub proposal: Proposal,
    pub seed: u64,
}

impl BspTree {
    pub fn new(split: SplitFn, proposal: Proposal, seed: u64) -> Self {
        Self {
            split,
            proposal,
            seed,
        }
    }

    pub fn node_key(&self, heap: u64) -> RngKey {
        RngKey::new(self.seed, heap)
    }

    pub fn root(&self) -> TreeNode {
        let region = self.proposal.support();
        let mut arrival = next_arrival_in(&region, 0.0, self.proposal, self.node_key(1))
            .expect("support has positive mass");
        arrival.heap = Some(1);
        TreeNode { arrival, region }
    }

    /// Regions of the two children of `node`, with zero-mass children marked dead.
    pub fn child_regions(&self, node: &TreeNode) -> [Option<Region>; 2] {
        self.split
            .split(&node.region, node.arrival.x)
            .map(|r| r.filter(|r| self.proposal.mass(r) > 0.0))
    }

    /// Child `side` (0 = left, 1 = right) of `node`; `Ok(None)` for a dead child.
    pub fn child(&self, node: &TreeNode, side: u64) -> Result<Option<TreeNode>> {
        let region = match self.child_regions(node)[side as usize] {
            Some(r) => r,
            None => return Ok(None),
        };
        self.node_in(node, region, side).map(Some)
    }

    /// Child of `node` occupying `region` on side `side`.
    pub fn node_in(&self, parent: &TreeNode, region: Region, side: u64) -> Result<TreeNode> {
        let depth = parent.depth() + 1;
        if depth > MAX_DEPTH {
            return Err(Error::Budget {
                budget: MAX_DEPTH as u64,
                steps: depth as u64,
            });
        }
        let heap = 2 * parent.heap() + side;
        let mut arrival = next_arrival_in(
            &region,
            parent.arrival.t,
            self.proposal,
            self.node_key(heap),
        )?;
        arrival.heap = Some(heap);
        Ok(TreeNode { arrival, region })
    }

    /// Walk from the root along the path encoded by `heap`.
    pub fn walk_to(&self, heap: u64) -> Result<Vec<TreeNode>> {
        if heap == 0 {
            return Err(Error::InvalidParameter("heap index starts at 1".into()));
        }
        let k = depth_of(heap);
        let mut path = vec![self.root()];
        for level in (0..k).rev() {
            let side = (heap >> level) & 1;
            let node = path.last().unwrap();
            match self.child(node, side)? {
                Some(c) => path.push(c),
                None => {
                    return Err(Error::Malformed(format!(
                        "heap index {heap} passes through an empty region"
                    )))
                }
            }
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued(TreeNode);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // min-heap on (time, heap index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .arrival
            .t
            .total_cmp(&self.0.arrival.t)
            .then_with(|| other.0.heap().cmp(&self.0.heap()))
    }
}

/// Find the arrival with heap index `h_target` in the tree of `split_target` while
/// simulating the process with the tree of `split_sim`. Returns the arrival (with its
/// target heap index) and its heap index in the simulating tree.
pub fn simulate_by_heap_index(
    split_target: SplitFn,
    split_sim: SplitFn,
    h_target: u64,
    proposal: Proposal,
    seed: u64,
) -> Result<(Arrival, u64)> {
    if h_target == 0 {
        return Err(Error::InvalidParameter("heap index starts at 1".into()));
    }
    let sim = BspTree::new(split_sim, proposal, seed);
    let k = depth_of(h_target);
    let mut bounds = proposal.support();
    let mut queue = BinaryHeap::new();
    queue.push(Queued(sim.root()));
    let mut found = None;
    for level in 0..=k {
        let node = loop {
            let Queued(node) = queue.pop().ok_or_else(|| {
                Error::Malformed("simulation queue exhausted before reaching target".into())
            })?;
            for (side, child) in sim.child_regions(&node).into_iter().enumerate() {
                if let Some(region) = child {
                    if region.intersect(&bounds).is_some() {
                        queue.push(Queued(sim.node_in(&node, region, side as u64)?));
                    }
                }
            }
            if bounds.contains(node.arrival.x) {
                break node;
            }
        };
        if level < k {
            let side = (h_target >> (k - level - 1)) & 1;
            bounds =
                split_target.split(&bounds, node.arrival.x)[side as usize].ok_or_else(|| {
                    Error::Malformed(format!("heap index {h_target} enters an empty region"))
                })?;
        }
        found = Some(node);
    }
    let node = found.expect("loop runs at least once");
    let mut arrival = node.arrival;
    let h_sim = node.heap();
    arrival.heap = Some(h_target);
    Ok((arrival, h_sim))
}

/// Monte-Carlo estimate of `E[P(B)]` at `depth` along fair-coin random descents, with its
/// standard error.
pub fn measure_contraction_probe(
    split: SplitFn,
    proposal: Proposal,
    depth: u32,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut masses = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let tree = BspTree::new(split, proposal, crate::rng::derive_seed(seed, rep, 0));
        let mut coins = RngKey::new(crate::rng::derive_seed(seed, rep, 1), 0).stream();
        let mut node = tree.root();
        let mut mass = 1.0;
        for _ in 0..depth {
            let side = (coins.next_uniform() < 0.5) as u64;
            match tree.child(&node, side)? {
                Some(c) => {
                    mass = proposal.mass(&c.region);
                    node = c;
                }
                None => {
                    mass = 0.0;
                    break;
                }
            }
        }
        masses.push(mass);
    }
    Ok((
        crate::stats::mean_var(&masses).0,
        crate::stats::std_error(&masses),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::FixedUniforms;

    #[test]
    fn forced_times() {
        let src = FixedUniforms::new(vec![(-0.3f64).exp(), 0.5, (-0.5f64).exp(), 0.5]);
        let mut s = ArrivalStream::from_source(1.0, Proposal::Uniform, src);
        let a = s.next().unwrap();
        let b = s.next().unwrap();
        assert!((a.t - 0.3).abs() < 1e-15 && (b.t - 0.8).abs() < 1e-15);
        assert_eq!((a.n, b.n), (Some(1), Some(2)));
        let src = FixedUniforms::new(vec![(-0.3f64).exp(), 0.5]);
        let mut s = ArrivalStream::from_source(2.0, Proposal::Uniform, src);
        assert!((s.next().unwrap().t - 0.15).abs() < 1e-15);
    }

    #[test]
    fn random_access_location() {
        let key = RngKey::new(9, 3);
        let xs: Vec<f64> = arrival_stream(1.0, Proposal::Normal, key)
            .take(20)
            .map(|a| a.x)
            .collect();
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(
                stream_location(Proposal::Normal, key, i as u64 + 1).unwrap(),
                *x
            );
        }
    }

    #[test]
    fn root_is_first_arrival() {
        for p in [Proposal::Normal, Proposal::Laplace, Proposal::Uniform] {
            let tree = BspTree::new(SplitFn::OnSample, p, 77);
            let first = arrival_stream(1.0, p, RngKey::new(77, 1)).next().unwrap();
            let root = tree.root();
            assert_eq!((root.arrival.t, root.arrival.x), (first.t, first.x));
        }
    }

    #[test]
    fn heap_path() {
        let tree = BspTree::new(SplitFn::OnSample, Proposal::Normal, 5);
        let path = tree.walk_to(6).unwrap();
        let hs: Vec<u64> = path.iter().map(|n| n.heap()).collect();
        assert_eq!(hs, vec![1, 3, 6]);
        let r = path[0].arrival.x;
        assert_eq!(path[1].region.lo, r);
        for w in path.windows(2) {
            assert!(w[1].arrival.t > w[0].arrival.t);
            assert!(w[1].region.contains(w[1].arrival.x));
        }
    }

    #[test]
    fn dyadic_split_keeps_tails() {
        let s = SplitFn::dyadic(-8.0, 8.0).unwrap();
        let [l, r] = s.split(&Region::FULL, 0.3);
        assert_eq!(
            l.unwrap(),
            Region {
                lo: f64::NEG_INFINITY,
                hi: 0.0
            }
        );
        let [rl, rr] = s.split(&r.unwrap(), 0.3);
        assert_eq!(rl.unwrap(), Region { lo: 0.0, hi: 4.0 });
        assert_eq!(
            rr.unwrap(),
            Region {
                lo: 4.0,
                hi: f64::INFINITY
            }
        );
    }

    #[test]
    fn same_split_conversion_is_identity() {
        let tree = BspTree::new(SplitFn::OnSample, Proposal::Normal, 11);
        for h in [1u64, 2, 3, 5, 12, 29] {
            let node = *tree.walk_to(h).unwrap().last().unwrap();
            let (a, hs) = simulate_by_heap_index(
                SplitFn::OnSample,
                SplitFn::OnSample,
                h,
                Proposal::Normal,
                11,
            )
            .unwrap();
            assert_eq!(hs, h);
            assert_eq!((a.t, a.x), (node.arrival.t, node.arrival.x));
        }
    }

    #[test]
    fn dyadic_probe_is_exact() {
        let s = SplitFn::dyadic(0.0, 1.0).unwrap();
        assert_eq!(
            measure_contraction_probe(s, Proposal::Uniform, 4, 100, 3).unwrap(),
            (0.0625, 0.0)
        );
        assert_eq!(
            measure_contraction_probe(s, Proposal::Uniform, 0, 10, 3).unwrap(),
            (1.0, 0.0)
        );
    }
}
