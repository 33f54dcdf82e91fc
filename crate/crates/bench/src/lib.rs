//! Fixed workloads shared by the criterion benches and their smoke tests.

use gprs_core::{build_stretch, DensityRatioPair, Method, Result, StretchMap};

/// A named pair with its stretch map prebuilt.
pub struct Workload {
    pub name: &'static str,
    pub stretch: StretchMap,
}

/// Pairs spanning closed-form and tabulated stretch maps, ordered by `r*`.
pub fn workloads() -> Result<Vec<Workload>> {
    let pairs = [
        ("uniform_r8", DensityRatioPair::uniform(0.125)?),
        ("triangular", DensityRatioPair::triangular(0.2, 0.6, 0.3)?),
        (
            "piecewise8",
            DensityRatioPair::piecewise(
                vec![0.02, 0.05, 0.10, 0.20, 0.30, 0.18, 0.10, 0.05],
                vec![0.125; 8],
            )?,
        ),
        ("gaussian", DensityRatioPair::gaussian(1.0, 0.25)?),
        ("laplace", DensityRatioPair::laplace(-0.5, 0.5)?),
    ];
    pairs
        .into_iter()
        .map(|(name, pair)| {
            Ok(Workload {
                name,
                stretch: build_stretch(&pair)?,
            })
        })
        .collect()
}

/// Samplers compared per workload; branch-and-bound on a dyadic grid over the support.
pub fn methods(w: &Workload) -> Vec<Method> {
    let s = w.stretch.pair().proposal().support();
    let (lo, hi) = if s.lo.is_finite() {
        (s.lo, s.hi)
    } else {
        (-8.0, 8.0)
    };
    let mut out = vec![
        Method::Global,
        Method::Parallel { threads: 4 },
        Method::BnbDyadic { lo, hi },
        Method::Rejection,
        Method::Pfr,
    ];
    if w.stretch.pair().is_unimodal() {
        out.insert(2, Method::BnbUnimodal);
    }
    out
}
