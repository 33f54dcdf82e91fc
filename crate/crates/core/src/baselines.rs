//! Comparison samplers: standard rejection sampling and the Poisson functional
//! representation (global-bound A* coding).

use crate::codec::SampleCode;
use crate::distributions::DensityRatioPair;
use crate::error::{Error, Result};
use crate::poisson::arrival_stream;
use crate::rng::RngKey;
use crate::samplers::{SampleResult, DEFAULT_BUDGET};

// acceptance coins live on a stream disjoint from every arrival stream
const COIN_STREAM_BIT: u64 = 1 << 63;

/// Rejection sampling with bound `m >= r_star`, proposals from stream `key`.
pub fn rejection_sample(pair: &DensityRatioPair, m: f64, key: RngKey) -> Result<SampleResult> {
    rejection_sample_with_budget(pair, m, key, DEFAULT_BUDGET)
}

pub fn rejection_sample_with_budget(
    pair: &DensityRatioPair,
    m: f64,
    key: RngKey,
    budget: u64,
) -> Result<SampleResult> {
    if !(m >= pair.r_star()) {
        return Err(Error::InvalidBound {
            bound: m,
            r_star: pair.r_star(),
        });
    }
    let coin_key = RngKey::new(key.seed, key.stream_id ^ COIN_STREAM_BIT);
    let mut coins = coin_key.stream();
    use crate::rng::UniformSource;
    for a in arrival_stream(1.0, pair.proposal(), key) {
        let n = a.n.unwrap();
        if n > budget {
            return Err(Error::Budget { budget, steps: n });
        }
        if coins.next_uniform() < pair.ratio(a.x) / m {
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

/// The arrival minimising `T_n / r(X_n)`. The search stops at the first arrival with
/// `T_n >= best * r_star`, which no later arrival can beat; that arrival is not counted.
pub fn pfr_sample(pair: &DensityRatioPair, key: RngKey) -> Result<SampleResult> {
    pfr_sample_with_budget(pair, key, DEFAULT_BUDGET)
}

pub fn pfr_sample_with_budget(
    pair: &DensityRatioPair,
    key: RngKey,
    budget: u64,
) -> Result<SampleResult> {
    let r_star = pair.r_star();
    let mut best = f64::INFINITY;
    let mut best_arrival = None;
    for a in arrival_stream(1.0, pair.proposal(), key) {
        let n = a.n.unwrap();
        if a.t >= best * r_star {
            let (x, t, idx) = best_arrival.expect("a finite best implies a candidate");
            return Ok(SampleResult {
                x,
                code: SampleCode::global(idx, key.seed),
                steps: n - 1,
                accept_time: t,
                thread_steps: vec![n - 1],
            });
        }
        if n > budget {
            return Err(Error::Budget { budget, steps: n });
        }
        let r = pair.ratio(a.x);
        if r > 0.0 {
            let score = a.t / r;
            if score < best {
                best = score;
                best_arrival = Some((a.x, a.t, n));
            }
        }
    }
    unreachable!("arrival streams are infinite")
}

/// Entropy in bits of a geometric index with mean `m`.
pub fn geometric_index_entropy(m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::InvalidParameter(format!("need M >= 1, got {m}")));
    }
    if m == 1.0 {
        return Ok(0.0);
    }
    Ok(-(m - 1.0) * (1.0 - 1.0 / m).log2() + m.log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(geometric_index_entropy(1.0).unwrap(), 0.0);
        assert!((geometric_index_entropy(2.0).unwrap() - 2.0).abs() < 1e-15);
        let h4 = -3.0 * 0.75f64.log2() + 2.0;
        assert!((geometric_index_entropy(4.0).unwrap() - h4).abs() < 1e-15);
        assert!((h4 - 3.2451).abs() < 1e-4);
        for m in [1.5, 3.0, 100.0] {
            assert!(geometric_index_entropy(m).unwrap() >= m.log2());
        }
    }

    #[test]
    fn identity_target() {
        let p = DensityRatioPair::uniform(1.0).unwrap();
        for seed in 0..100 {
            let key = RngKey::new(seed, 1);
            assert_eq!(rejection_sample(&p, 1.0, key).unwrap().steps, 1);
            assert_eq!(pfr_sample(&p, key).unwrap().code.index, 1);
        }
    }

    #[test]
    fn rejects_small_bound() {
        let p = DensityRatioPair::uniform(0.5).unwrap();
        assert!(matches!(
            rejection_sample(&p, 1.5, RngKey::new(0, 1)),
            Err(Error::InvalidBound { .. })
        ));
    }
}
