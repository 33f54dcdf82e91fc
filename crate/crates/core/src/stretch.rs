//! The stretch function `sigma` and its inverse.
//!
//! `sigma^{-1}` solves the autonomous ODE `y' = w_Q(y) - y * w_P(y)`, `y(0) = 0`, whose
//! right-hand side is the pair's gap function. Uniform, triangular and piecewise-constant
//! pairs have closed forms; the Gaussian and Laplace pairs are integrated numerically and
//! stored as a monotone cubic Hermite table.

use crate::distributions::{DensityRatioPair, Family, Region};
use crate::error::{Error, Result};
use crate::special::{exp_m1, ln, ln_1p};

/// Default per-step tolerance for the tabulated path.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Integration stops once `sigma_inv` is this close (relatively) to `r_star`.
const STOP_GAP: f64 = 1e-9;
const T_CAP: f64 = 1e9;
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StretchKind {
    ClosedForm,
    Tabulated,
}

// One closed-form segment: on [t0, t1) the gap is linear in h with slope -b,
// so sigma_inv(t) = h0 - g0 * expm1(-b (t - t0)) / b.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h0: f64,
    h1: f64,
    b: f64,
    g0: f64,
}

#[derive(Debug, Clone)]
enum Repr {
    Segments(Vec<Segment>),
    Triangular {
        l: f64,
    },
    Table {
        t: Vec<f64>,
        y: Vec<f64>,
        d: Vec<f64>,
    },
}

/// Monotone bijection between time and density-ratio level.
#[derive(Debug, Clone)]
pub struct StretchMap {
    pair: DensityRatioPair,
    kind: StretchKind,
    repr: Repr,
    t_max: f64,
    r_star: f64,
    tol: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must lie in (0, 1e-3], got {tol}"
        )));
    }
    Ok(())
}

impl StretchMap {
    /// Closed form when the family has one, otherwise the tabulated ODE solution.
    pub fn build(pair: &DensityRatioPair, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let r_star = pair.r_star();
        let repr = match pair.family() {
            Family::Uniform { .. } | Family::Piecewise { .. } => Repr::Segments(segments(pair)?),
            &Family::Triangular { a, b, .. } => Repr::Triangular { l: b - a },
            Family::Gaussian { .. } | Family::Laplace { .. } => {
                return Self::build_tabulated(pair, tol)
            }
        };
        Ok(Self {
            pair: pair.clone(),
            kind: StretchKind::ClosedForm,
            repr,
            t_max: f64::INFINITY,
            r_star,
            tol,
        })
    }

    /// Integrate the ODE regardless of family.
    pub fn build_tabulated(pair: &DensityRatioPair, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let (t, y, d) = integrate(pair, tol)?;
        let t_max = *t.last().expect("table has at least one node");
        Ok(Self {
            pair: pair.clone(),
            kind: StretchKind::Tabulated,
            repr: Repr::Table { t, y, d },
            t_max,
            r_star: pair.r_star(),
            tol,
        })
    }

    pub fn pair(&self) -> &DensityRatioPair {
        &self.pair
    }

    pub fn kind(&self) -> StretchKind {
        self.kind
    }

    /// Largest tabulated time; infinite for closed forms.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    /// Number of table nodes (zero for closed forms).
    pub fn table_len(&self) -> usize {
        match &self.repr {
            Repr::Table { t, .. } => t.len(),
            _ => 0,
        }
    }

    /// `(t, sigma_inv(t))` nodes of the table, or `n` evenly spaced samples up to `t_end`
    /// for closed forms.
    pub fn table(&self, n: usize, t_end: f64) -> Vec<(f64, f64)> {
        match &self.repr {
            Repr::Table { t, y, .. } => t.iter().copied().zip(y.iter().copied()).collect(),
            _ => (0..=n)
                .map(|i| {
                    let t = t_end * i as f64 / n.max(1) as f64;
                    (t, self.sigma_inv(t))
                })
                .collect(),
        }
    }

    /// `sigma^{-1}(t)`; clamps to `r_star` past the end of the table.
    pub fn sigma_inv(&self, t: f64) -> f64 {
        if t.is_nan() || t <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Segments(segs) => {
                let k = segs.partition_point(|s| s.t0 <= t).saturating_sub(1);
                let s = &segs[k];
                let h = s.h0 - s.g0 * exp_m1(-s.b * (t - s.t0)) / s.b;
                h.min(s.h1)
            }
            &Repr::Triangular { l } => 2.0 * t / (2.0 + l * t),
            Repr::Table { t: ts, y, d } => {
                if t >= self.t_max {
                    return if t > self.t_max {
                        self.r_star
                    } else {
                        *y.last().unwrap()
                    };
                }
                let i = ts.partition_point(|&s| s <= t) - 1;
                hermite(ts[i], ts[i + 1], y[i], y[i + 1], d[i], d[i + 1], t)
            }
        }
    }

    /// `sigma(h)`, infinite at `r_star`.
    pub fn sigma(&self, h: f64) -> Result<f64> {
        if h.is_nan() || h > self.r_star {
            return Err(Error::Domain(format!(
                "sigma({h}) outside [0, r_star = {}]",
                self.r_star
            )));
        }
        if h <= 0.0 {
            return Ok(0.0);
        }
        if h == self.r_star {
            return Ok(f64::INFINITY);
        }
        Ok(match &self.repr {
            Repr::Segments(segs) => {
                let k = segs.partition_point(|s| s.h0 < h).saturating_sub(1);
                let s = &segs[k];
                s.t0 - ln_1p(-s.b * (h - s.h0) / s.g0) / s.b
            }
            &Repr::Triangular { l } => 2.0 * h / (2.0 - l * h),
            Repr::Table { t, y, d } => {
                if h > *y.last().unwrap() {
                    return Ok(self.t_max);
                }
                // left-continuous: first node with y >= h
                let j = y.partition_point(|&v| v < h);
                if y[j] == h {
                    return Ok(t[j]);
                }
                let i = j - 1;
                let (mut lo, mut hi) = (t[i], t[j]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if hermite(t[i], t[j], y[i], y[j], d[i], d[j], mid) < h {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        })
    }

    /// Whether an arrival at time `t` with ratio `r` lies under the graph of `sigma o r`,
    /// i.e. `t < sigma(r)`.
    pub fn accepts(&self, t: f64, r: f64) -> bool {
        r >= self.r_star || self.sigma_inv(t) < r
    }

    /// `P[T >= t, X in A]` for the first arrival `(T, X)` under the graph.
    pub fn survival_mass(&self, t: f64, region: &Region) -> f64 {
        let h = self.sigma_inv(t.max(0.0)).min(self.r_star);
        self.pair.restricted_gap(h, region).unwrap_or(0.0).min(1.0)
    }

    /// `d/dt sigma^{-1}(t)`, i.e. the unrestricted survival mass.
    pub fn slope(&self, t: f64) -> f64 {
        self.survival_mass(t, &Region::FULL)
    }
}

impl StretchMap {
    /// Advance the restricted level flow `y' = w_Q(y | A) - y * w_P(y | A)` from `y(0) = h0`
    /// for a duration `dt` and return `y(dt)`.
    ///
    /// This is the inverse stretch of the process restricted to `A`, started at level `h0`
    /// instead of zero; the general branch-and-bound sampler runs it at every node.
    pub fn advance_level(&self, region: &Region, h0: f64, dt: f64) -> Result<f64> {
        if !(dt >= 0.0) || !(h0 >= 0.0) {
            return Err(Error::Domain(format!(
                "advance_level(h0 = {h0}, dt = {dt})"
            )));
        }
        let top = self.pair.sup_ratio(region);
        if h0 >= top || dt == 0.0 {
            return Ok(h0.min(self.r_star));
        }
        if let Some(pieces) = self.pair.flat_pieces(region) {
            return Ok(advance_flat(&pieces, h0, dt));
        }
        let pair = &self.pair;
        let f = |y: f64| {
            pair.restricted_gap(y.clamp(0.0, top), region)
                .unwrap_or(0.0)
        };
        let (mut t, mut y) = (0.0f64, h0);
        let mut k = f(y);
        let mut h = dt.min(0.1 * (1.0 + top) / k.max(1e-300));
        for _ in 0..MAX_STEPS {
            let remaining = dt - t;
            if remaining <= 0.0 || k == 0.0 {
                return Ok(y.min(top));
            }
            let step = h.min(remaining);
            let (y1, k1, err) = dp_step(&f, y, k, step);
            let scale = self.tol * (1.0 + y.abs());
            if err <= scale && y1 >= y {
                t = if step == remaining { dt } else { t + step };
                y = y1.min(top);
                k = k1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * libm::pow(scale / err, 0.2)).clamp(0.2, 5.0)
            };
            h = step * factor;
            if h < 1e-14 * (1.0 + t) {
                return Err(Error::Integration {
                    last_t: t,
                    reason: "step size underflow in restricted flow".into(),
                });
            }
        }
        Err(Error::Integration {
            last_t: t,
            reason: "restricted flow did not finish".into(),
        })
    }
}

// Exact flow for a piecewise-constant ratio: between consecutive levels the gap is
// linear in y, so the flow is a shifted exponential.
fn advance_flat(pieces: &[(f64, f64)], h0: f64, dt: f64) -> f64 {
    let mut levels: Vec<f64> = pieces.iter().map(|p| p.0).filter(|&r| r > h0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut h, mut left) = (h0, dt);
    for &next in &levels {
        let (mut g, mut b) = (0.0, 0.0);
        let mut g_next = 0.0;
        for &(r, w) in pieces.iter().filter(|p| p.0 >= next) {
            g += w * (r - h);
            g_next += w * (r - next);
            b += w;
        }
        let t_seg = if g_next > 0.0 {
            ln(g / g_next) / b
        } else {
            f64::INFINITY
        };
        if left < t_seg {
            return (h - g * exp_m1(-b * left) / b).min(next);
        }
        left -= t_seg;
        h = next;
    }
    h
}

fn segments(pair: &DensityRatioPair) -> Result<Vec<Segment>> {
    let (probs, widths) = match pair.family() {
        &Family::Uniform { c, .. } => (vec![1.0], vec![c]),
        Family::Piecewise { probs, widths } => (probs.clone(), widths.clone()),
        _ => unreachable!("segments only for flat families"),
    };
    let mut levels: Vec<f64> = probs.iter().zip(&widths).map(|(q, w)| q / w).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut segs = Vec::with_capacity(levels.len());
    let (mut t0, mut h0) = (0.0, 0.0);
    for &h1 in &levels {
        let b: f64 = probs
            .iter()
            .zip(&widths)
            .filter(|(q, w)| *q / *w >= h1)
            .map(|(_, w)| w)
            .sum();
        let g0 = pair.gap(h0)?;
        let g1 = pair.gap(h1)?;
        segs.push(Segment { t0, h0, h1, b, g0 });
        t0 = if g1 > 0.0 {
            t0 + ln(g0 / g1) / b
        } else {
            f64::INFINITY
        };
        h0 = h1;
    }
    Ok(segs)
}

#[inline]
fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One DP5 step from `y` (slope `k1`) with step `h`; returns `(y_new, slope_new, error)`.
fn dp_step(f: &impl Fn(f64) -> f64, y: f64, k1: f64, h: f64) -> (f64, f64, f64) {
    let k2 = f(y + h * A21 * k1);
    let k3 = f(y + h * (A31 * k1 + A32 * k2));
    let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
    let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
    let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = f(y_new);
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    (y_new, k7, err.abs())
}

type Table = (Vec<f64>, Vec<f64>, Vec<f64>);

fn integrate(pair: &DensityRatioPair, tol: f64) -> Result<Table> {
    let r_star = pair.r_star();
    let f = |y: f64| pair.gap(y.clamp(0.0, r_star)).unwrap_or(0.0);
    let target = r_star * (1.0 - STOP_GAP);
    let (mut t, mut y) = (0.0f64, 0.0f64);
    let mut k = f(0.0);
    let mut ts = vec![0.0];
    let mut ys = vec![0.0];
    let mut ds = vec![k];
    let mut h = (libm::pow(tol, 0.2) * r_star.max(1.0)).min(0.1);
    for _ in 0..MAX_STEPS {
        if y >= target || t >= T_CAP {
            break;
        }
        if h < 1e-14 * (1.0 + t) {
            return Err(Error::Integration {
                last_t: t,
                reason: "step size underflow".into(),
            });
        }
        let (y1, k1, err_rk) = dp_step(&f, y, k, h);
        // the table interpolates with a cubic Hermite spline, so also bound its
        // midpoint error against a half step
        let (ym, _, _) = dp_step(&f, y, k, 0.5 * h);
        let err_interp = (hermite(0.0, h, y, y1, k, k1, 0.5 * h) - ym).abs();
        let scale = tol * (1.0 + y.abs());
        let err = err_rk.max(err_interp);
        if err <= scale && y1 >= y {
            t += h;
            y = y1.min(r_star);
            k = k1;
            ts.push(t);
            ys.push(y);
            ds.push(k);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * libm::pow(scale / err, 0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    if !(y >= target || t >= T_CAP) {
        return Err(Error::Integration {
            last_t: t,
            reason: format!("no convergence after {MAX_STEPS} steps"),
        });
    }
    fritsch_carlson(&ts, &ys, &mut ds);
    Ok((ts, ys, ds))
}

/// Limit node slopes so that the Hermite interpolant is monotone on every interval.
fn fritsch_carlson(t: &[f64], y: &[f64], d: &mut [f64]) {
    for i in 0..t.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
        if delta <= 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let a = d[i] / delta;
        let b = d[i + 1] / delta;
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            d[i] = tau * a * delta;
            d[i + 1] = tau * b * delta;
        }
    }
}

/// Build with [`DEFAULT_TOL`].
pub fn build_stretch(pair: &DensityRatioPair) -> Result<StretchMap> {
    StretchMap::build(pair, DEFAULT_TOL)
}
