//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gprs_core::rng::derive_seed;
use gprs_core::stats::{ks_p_value, ks_statistic};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Target families with a CDF written out independently of the library.
#[derive(Debug, Clone)]
pub enum Oracle {
    Uniform { lo: f64, hi: f64 },
    Triangular { a: f64, b: f64, c: f64 },
    Piecewise { probs: Vec<f64>, widths: Vec<f64> },
    Gaussian { mean: f64, var: f64 },
    Laplace { mean: f64, scale: f64 },
}

impl Oracle {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Oracle::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            &Oracle::Triangular { a, b, c } => {
                if x <= a {
                    0.0
                } else if x <= c {
                    (x - a).powi(2) / ((b - a) * (c - a))
                } else if x < b {
                    1.0 - (b - x).powi(2) / ((b - a) * (b - c))
                } else {
                    1.0
                }
            }
            Oracle::Piecewise { probs, widths } => {
                let mut lo = 0.0;
                let mut acc = 0.0;
                for (p, w) in probs.iter().zip(widths) {
                    if x < lo + w {
                        return acc + p * ((x - lo) / w).max(0.0);
                    }
                    acc += p;
                    lo += w;
                }
                1.0
            }
            &Oracle::Gaussian { mean, var } => Normal::new(mean, var.sqrt()).unwrap().cdf(x),
            &Oracle::Laplace { mean, scale } => {
                let z = (x - mean) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
        }
    }

    /// Inverse CDF, for drawing target samples without the library.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Oracle::Uniform { lo, hi } => lo + u * (hi - lo),
            &Oracle::Triangular { a, b, c } => {
                let fc = (c - a) / (b - a);
                if u < fc {
                    a + (u * (b - a) * (c - a)).sqrt()
                } else {
                    b - ((1.0 - u) * (b - a) * (b - c)).sqrt()
                }
            }
            Oracle::Piecewise { probs, widths } => {
                let mut lo = 0.0;
                let mut acc = 0.0;
                for (p, w) in probs.iter().zip(widths) {
                    if u < acc + p {
                        return lo + w * (u - acc) / p;
                    }
                    acc += p;
                    lo += w;
                }
                lo
            }
            &Oracle::Gaussian { mean, var } => {
                Normal::new(mean, var.sqrt()).unwrap().inverse_cdf(u)
            }
            &Oracle::Laplace { mean, scale } => {
                if u < 0.5 {
                    mean + scale * (2.0 * u).ln()
                } else {
                    mean - scale * (2.0 * (1.0 - u)).ln()
                }
            }
        }
    }

    /// Bin edges for a chi-square test: each piece cut into `per_piece` equal cells.
    pub fn piece_edges(&self, per_piece: usize) -> Option<Vec<f64>> {
        let Oracle::Piecewise { widths, .. } = self else {
            return None;
        };
        let mut edges = vec![0.0];
        let mut lo = 0.0;
        for w in widths {
            for k in 1..=per_piece {
                edges.push(lo + w * k as f64 / per_piece as f64);
            }
            lo += w;
        }
        Some(edges)
    }

    /// Goodness-of-fit p-value: chi-square on piecewise targets, KS otherwise.
    pub fn p_value(&self, xs: &[f64]) -> f64 {
        match self.piece_edges(4) {
            Some(edges) => chi_square_p(xs, &edges, |x| self.cdf(x)),
            None => ks_p_value(ks_statistic(xs, |x| self.cdf(x)), xs.len() as f64),
        }
    }
}

/// Pearson chi-square p-value of `xs` over the cells between consecutive `edges`.
pub fn chi_square_p(xs: &[f64], edges: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let cells = edges.len() - 1;
    let mut counts = vec![0u64; cells];
    for &x in xs {
        let i = edges.partition_point(|&e| e <= x).clamp(1, cells) - 1;
        counts[i] += 1;
    }
    let n = xs.len() as f64;
    let mut stat = 0.0;
    let mut dof = 0;
    for (i, &c) in counts.iter().enumerate() {
        let e = n * (cdf(edges[i + 1]) - cdf(edges[i]));
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
}

/// Chi-square p-value of categorical counts against equal probabilities.
pub fn uniform_counts_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .cdf(stat)
}

/// Proposal with an independent inverse CDF.
pub fn proposal_oracle(p: gprs_core::Proposal) -> Oracle {
    match p {
        gprs_core::Proposal::Normal => Oracle::Gaussian {
            mean: 0.0,
            var: 1.0,
        },
        gprs_core::Proposal::Laplace => Oracle::Laplace {
            mean: 0.0,
            scale: 1.0,
        },
        gprs_core::Proposal::Uniform => Oracle::Uniform { lo: 0.0, hi: 1.0 },
    }
}

/// `n` uniforms in `(0, 1)` from a keyed stream.
pub fn uniforms(seed: u64, n: usize) -> Vec<f64> {
    use gprs_core::rng::UniformSource;
    let mut s = gprs_core::RngKey::new(seed, 1).stream();
    (0..n).map(|_| s.next_uniform()).collect()
}

/// Independent per-sample seeds.
pub fn seed(base: u64, case: u64, i: u64) -> u64 {
    derive_seed(base, case, i)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// One representative pair per family with its oracle.
pub fn families() -> Vec<(&'static str, gprs_core::DensityRatioPair, Oracle)> {
    use gprs_core::DensityRatioPair as D;
    let probs = vec![0.02, 0.05, 0.10, 0.20, 0.30, 0.18, 0.10, 0.05];
    let widths = vec![0.125; 8];
    vec![
        (
            "uniform",
            D::uniform(0.25).unwrap(),
            Oracle::Uniform { lo: 0.0, hi: 0.25 },
        ),
        (
            "triangular",
            D::triangular(0.0, 1.0, 0.5).unwrap(),
            Oracle::Triangular {
                a: 0.0,
                b: 1.0,
                c: 0.5,
            },
        ),
        (
            "piecewise",
            D::piecewise(probs.clone(), widths.clone()).unwrap(),
            Oracle::Piecewise { probs, widths },
        ),
        (
            "gaussian",
            D::gaussian(1.0, 0.25).unwrap(),
            Oracle::Gaussian {
                mean: 1.0,
                var: 0.25,
            },
        ),
        (
            "laplace",
            D::laplace(1.0, 0.5).unwrap(),
            Oracle::Laplace {
                mean: 1.0,
                scale: 0.5,
            },
        ),
    ]
}
