#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod codec;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod poisson;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod stats;
pub mod stretch;

pub use codec::{ProtocolConfig, SampleCode, Variant};
pub use distributions::{DensityRatioPair, Family, Proposal, Region, RegionKind};
pub use error::{Error, Result};
pub use harness::{BenchConfig, Experiment, RunRecord};
pub use poisson::{Arrival, BspTree, SplitFn, TreeNode};
pub use rng::RngKey;
pub use samplers::{Method, SampleResult};
pub use stretch::{build_stretch, StretchKind, StretchMap};
