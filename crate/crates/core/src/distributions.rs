//! Target/proposal pairs over the real line.
//!
//! A [`DensityRatioPair`] couples a target `Q` with one of three fixed proposals and exposes
//! the density ratio `r = dQ/dP`, the survival functions `w_P(h) = P[r(Z) >= h]` and
//! `w_Q(h) = Q[r(Z) >= h]`, and their restrictions to an interval. All of them are computed
//! from the super-level set `{x : r(x) >= h}`, which is a finite union of intervals for
//! every family here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{exp, ln, norm_cdf, norm_pdf, norm_quantile, norm_upper_quantile};

const LN_2: f64 = std::f64::consts::LN_2;

/// An open interval `(lo, hi)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    FullLine,
    Interval,
}

impl Region {
    pub const FULL: Region = Region {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn full_line() -> Self {
        Self::FULL
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "region requires lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn kind(&self) -> RegionKind {
        if self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY {
            RegionKind::FullLine
        } else {
            RegionKind::Interval
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Intersection; `None` when empty.
    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Region { lo, hi })
    }

    /// The complement within the real line, as up to two intervals.
    pub fn complement(&self) -> Vec<Region> {
        let mut out = Vec::with_capacity(2);
        if self.lo > f64::NEG_INFINITY {
            out.push(Region {
                lo: f64::NEG_INFINITY,
                hi: self.lo,
            });
        }
        if self.hi < f64::INFINITY {
            out.push(Region {
                lo: self.hi,
                hi: f64::INFINITY,
            });
        }
        out
    }
}

/// Mass of `(lo, hi)` under a standard normal, evaluated on the tail that avoids cancellation.
fn std_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo >= 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else if hi <= 0.0 {
        norm_cdf(hi) - norm_cdf(lo)
    } else {
        1.0 - norm_cdf(lo) - norm_cdf(-hi)
    }
}

fn std_laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * exp(x)
    } else {
        1.0 - 0.5 * exp(-x)
    }
}

fn std_laplace_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo >= 0.0 {
        // difference of upper tails
        0.5 * (exp(-lo) - exp(-hi))
    } else if hi <= 0.0 {
        0.5 * (exp(hi) - exp(lo))
    } else {
        1.0 - 0.5 * exp(lo) - 0.5 * exp(-hi)
    }
}

/// The proposal distribution `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposal {
    /// N(0, 1)
    Normal,
    /// Laplace(0, 1)
    Laplace,
    /// Unif(0, 1)
    Uniform,
}

impl Proposal {
    pub fn support(&self) -> Region {
        match self {
            Proposal::Uniform => Region { lo: 0.0, hi: 1.0 },
            _ => Region::FULL,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Proposal::Normal => norm_pdf(x),
            Proposal::Laplace => 0.5 * exp(-x.abs()),
            Proposal::Uniform => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Proposal::Normal => norm_cdf(x),
            Proposal::Laplace => std_laplace_cdf(x),
            Proposal::Uniform => x.clamp(0.0, 1.0),
        }
    }

    /// `P((lo, hi))`.
    pub fn mass(&self, region: &Region) -> f64 {
        match self {
            Proposal::Normal => std_normal_mass(region.lo, region.hi),
            Proposal::Laplace => std_laplace_mass(region.lo, region.hi),
            Proposal::Uniform => (region.hi.min(1.0) - region.lo.max(0.0)).max(0.0),
        }
    }

    /// Inverse-CDF draw from `P` restricted to `region`, driven by `u` in `[0, 1)`.
    ///
    /// Regions on the positive half-line are inverted through the upper tail so that
    /// far-tail regions keep full relative precision.
    pub fn truncated_sample(&self, region: &Region, u: f64) -> Result<f64> {
        let support = self.support();
        let b = region.intersect(&support).ok_or(Error::DegenerateRegion {
            lo: region.lo,
            hi: region.hi,
        })?;
        if self.mass(&b) <= 0.0 {
            return Err(Error::DegenerateRegion {
                lo: region.lo,
                hi: region.hi,
            });
        }
        let x = match self {
            Proposal::Uniform => b.lo + u * (b.hi - b.lo),
            Proposal::Normal => {
                if b.lo >= 0.0 {
                    let (sa, sb) = (norm_cdf(-b.lo), norm_cdf(-b.hi));
                    norm_upper_quantile(sa - u * (sa - sb))
                } else {
                    let (ca, cb) = (norm_cdf(b.lo), norm_cdf(b.hi));
                    norm_quantile(ca + u * (cb - ca))
                }
            }
            Proposal::Laplace => {
                if b.lo >= 0.0 {
                    // upper tail S(x) = exp(-x)/2
                    let (sa, sb) = (0.5 * exp(-b.lo), 0.5 * exp(-b.hi));
                    -ln(2.0 * (sa - u * (sa - sb)))
                } else {
                    let (ca, cb) = (std_laplace_cdf(b.lo), std_laplace_cdf(b.hi));
                    laplace_quantile(ca + u * (cb - ca))
                }
            }
        };
        Ok(x.clamp(b.lo, b.hi))
    }
}

fn laplace_quantile(p: f64) -> f64 {
    if p < 0.5 {
        ln(2.0 * p)
    } else {
        -ln(2.0 * (1.0 - p))
    }
}

/// Parameters of a target/proposal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Family {
    /// `Q = Unif(offset, offset + c)` against `P = Unif(0, 1)`.
    Uniform {
        c: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Triangular `Q` on `(a, b)` with mode `c`, against `P = Unif(0, 1)`.
    Triangular { a: f64, b: f64, c: f64 },
    /// Piecewise-constant `Q` on `[0, 1]`: piece `k` has width `widths[k]` and mass
    /// `probs[k]`; `P = Unif(0, 1)`.
    Piecewise { probs: Vec<f64>, widths: Vec<f64> },
    /// `Q = N(mean, var)` against `P = N(0, 1)`; requires `var < 1`.
    Gaussian { mean: f64, var: f64 },
    /// `Q = Laplace(mean, scale)` against `P = Laplace(0, 1)`; requires `scale < 1`.
    Laplace { mean: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    prob: f64,
    ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Derived {
    Uniform,
    Triangular,
    Piecewise { pieces: Vec<Piece> },
    // ln r(x) = ln_r_star - (x - m)^2 / (2 s2)
    Gaussian { sd: f64, s2: f64, ln_r_star: f64 },
    Laplace { ln_r_star: f64 },
}

/// A validated target/proposal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioPair {
    family: Family,
    proposal: Proposal,
    r_star: f64,
    mode_x: f64,
    derived: Derived,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

impl DensityRatioPair {
    pub fn new(family: Family) -> Result<Self> {
        let finite = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be finite"))
            }
        };
        let (proposal, r_star, mode_x, derived) = match &family {
            &Family::Uniform { c, offset } => {
                finite(c, "c")?;
                finite(offset, "offset")?;
                if !(c > 0.0 && c <= 1.0) || offset < 0.0 || offset + c > 1.0 {
                    return invalid(
                        "uniform target needs 0 < c <= 1 and [offset, offset + c] in [0, 1]",
                    );
                }
                (
                    Proposal::Uniform,
                    1.0 / c,
                    offset + 0.5 * c,
                    Derived::Uniform,
                )
            }
            &Family::Triangular { a, b, c } => {
                for (v, n) in [(a, "a"), (b, "b"), (c, "c")] {
                    finite(v, n)?;
                }
                if !(0.0 <= a && a < c && c < b && b <= 1.0) {
                    return invalid("triangular target needs 0 <= a < c < b <= 1");
                }
                (Proposal::Uniform, 2.0 / (b - a), c, Derived::Triangular)
            }
            Family::Piecewise { probs, widths } => {
                if probs.is_empty() || probs.len() != widths.len() {
                    return invalid("piecewise target needs equally many probs and widths");
                }
                if probs
                    .iter()
                    .chain(widths)
                    .any(|v| !(v.is_finite() && *v > 0.0))
                {
                    return invalid("piecewise probs and widths must be positive");
                }
                let sp: f64 = probs.iter().sum();
                let sw: f64 = widths.iter().sum();
                if (sp - 1.0).abs() > 1e-12 || (sw - 1.0).abs() > 1e-12 {
                    return invalid(format!(
                        "piecewise probs and widths must each sum to 1 (got {sp}, {sw})"
                    ));
                }
                let mut lo = 0.0;
                let mut pieces = Vec::with_capacity(probs.len());
                for (i, (&q, &w)) in probs.iter().zip(widths).enumerate() {
                    let hi = if i + 1 == widths.len() { 1.0 } else { lo + w };
                    pieces.push(Piece {
                        lo,
                        hi,
                        prob: q,
                        ratio: q / w,
                    });
                    lo = hi;
                }
                let (best, r_star) =
                    pieces
                        .iter()
                        .enumerate()
                        .fold((0, f64::MIN), |acc, (i, p)| {
                            if p.ratio > acc.1 {
                                (i, p.ratio)
                            } else {
                                acc
                            }
                        });
                let mode = 0.5 * (pieces[best].lo + pieces[best].hi);
                (
                    Proposal::Uniform,
                    r_star,
                    mode,
                    Derived::Piecewise { pieces },
                )
            }
            &Family::Gaussian { mean, var } => {
                finite(mean, "mean")?;
                finite(var, "var")?;
                if !(var > 0.0 && var < 1.0) {
                    return invalid(format!("gaussian target needs 0 < var < 1, got {var}"));
                }
                let m = mean / (1.0 - var);
                let s2 = var / (1.0 - var);
                let ln_r_star = mean * mean / (2.0 * (1.0 - var)) - 0.5 * ln(var);
                (
                    Proposal::Normal,
                    exp(ln_r_star),
                    m,
                    Derived::Gaussian {
                        sd: var.sqrt(),
                        s2,
                        ln_r_star,
                    },
                )
            }
            &Family::Laplace { mean, scale } => {
                finite(mean, "mean")?;
                finite(scale, "scale")?;
                if !(scale > 0.0 && scale < 1.0) {
                    return invalid(format!("laplace target needs 0 < scale < 1, got {scale}"));
                }
                let ln_r_star = mean.abs() - ln(scale);
                (
                    Proposal::Laplace,
                    exp(ln_r_star),
                    mean,
                    Derived::Laplace { ln_r_star },
                )
            }
        };
        if !r_star.is_finite() {
            return invalid("density ratio supremum overflows f64");
        }
        Ok(Self {
            family,
            proposal,
            r_star,
            mode_x,
            derived,
        })
    }

    pub fn uniform(c: f64) -> Result<Self> {
        Self::new(Family::Uniform { c, offset: 0.0 })
    }

    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(Family::Triangular { a, b, c })
    }

    pub fn piecewise(probs: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        Self::new(Family::Piecewise { probs, widths })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        Self::new(Family::Gaussian { mean, var })
    }

    pub fn laplace(mean: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Laplace { mean, scale })
    }

    /// Parse a pair from a key-value (TOML) description such as
    /// `family = "gaussian"`, `mean = 1.0`, `var = 0.25`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let family: Family = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(family)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn proposal(&self) -> Proposal {
        self.proposal
    }

    /// Essential supremum of `r`.
    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    /// Location of the maximum of `r`.
    pub fn mode_x(&self) -> f64 {
        self.mode_x
    }

    /// Whether `r` is unimodal (non-decreasing left of `mode_x`, non-increasing right of it).
    pub fn is_unimodal(&self) -> bool {
        match &self.derived {
            Derived::Piecewise { pieces } => {
                let mut descending = false;
                pieces.windows(2).all(|w| {
                    if w[1].ratio > w[0].ratio {
                        !descending
                    } else {
                        if w[1].ratio < w[0].ratio {
                            descending = true;
                        }
                        true
                    }
                })
            }
            _ => true,
        }
    }

    /// `r(x)` with a domain check on `x`.
    pub fn density_ratio(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!(
                "density ratio at non-finite x = {x}"
            )));
        }
        Ok(self.ratio(x))
    }

    /// `r(x)`; zero outside the support of `Q`.
    pub fn ratio(&self, x: f64) -> f64 {
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, offset }, _) => {
                if x >= offset && x <= offset + c {
                    self.r_star
                } else {
                    0.0
                }
            }
            (&Family::Triangular { a, b, c }, _) => {
                let l = b - a;
                if x <= a || x >= b {
                    0.0
                } else if x < c {
                    2.0 * (x - a) / (l * (c - a))
                } else if x == c {
                    self.r_star
                } else {
                    2.0 * (b - x) / (l * (b - c))
                }
            }
            (_, Derived::Piecewise { pieces }) => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let idx = pieces.partition_point(|p| p.hi < x);
                pieces[idx.min(pieces.len() - 1)].ratio
            }
            (_, &Derived::Gaussian { s2, ln_r_star, .. }) => {
                let d = x - self.mode_x;
                exp(ln_r_star - d * d / (2.0 * s2))
            }
            (&Family::Laplace { mean, scale }, _) => {
                exp(-ln(scale) - (x - mean).abs() / scale + x.abs())
            }
            _ => unreachable!("family/derived mismatch"),
        }
    }

    /// The super-level set `{x : r(x) >= h}` as disjoint intervals, for `0 < h <= r_star`.
    fn level_set(&self, h: f64) -> Vec<Region> {
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, offset }, _) => vec![Region {
                lo: offset,
                hi: offset + c,
            }],
            (&Family::Triangular { a, b, c }, _) => {
                let l = b - a;
                let lo = a + h * (c - a) * l / 2.0;
                let hi = b - h * (b - c) * l / 2.0;
                if lo < hi {
                    vec![Region { lo, hi }]
                } else {
                    Vec::new()
                }
            }
            (_, Derived::Piecewise { pieces }) => {
                let mut out: Vec<Region> = Vec::new();
                for p in pieces.iter().filter(|p| p.ratio >= h) {
                    match out.last_mut() {
                        Some(last) if last.hi == p.lo => last.hi = p.hi,
                        _ => out.push(Region { lo: p.lo, hi: p.hi }),
                    }
                }
                out
            }
            (_, &Derived::Gaussian { s2, ln_r_star, .. }) => {
                let tau = 2.0 * s2 * (ln_r_star - ln(h)).max(0.0);
                let half = tau.sqrt();
                if half > 0.0 {
                    vec![Region {
                        lo: self.mode_x - half,
                        hi: self.mode_x + half,
                    }]
                } else {
                    Vec::new()
                }
            }
            (&Family::Laplace { mean, scale }, _) => {
                let mu = mean.abs();
                let l = ln(h) + ln(scale);
                if l > mu {
                    return Vec::new();
                }
                let right = (mu - scale * l) / (1.0 - scale);
                let left = if scale * l + mu >= 0.0 {
                    (scale * l + mu) / (1.0 + scale)
                } else {
                    (scale * l + mu) / (1.0 - scale)
                };
                if left >= right {
                    return Vec::new();
                }
                if mean >= 0.0 {
                    vec![Region {
                        lo: left,
                        hi: right,
                    }]
                } else {
                    vec![Region {
                        lo: -right,
                        hi: -left,
                    }]
                }
            }
            _ => unreachable!("family/derived mismatch"),
        }
    }

    /// `Q((lo, hi))`.
    pub fn target_mass(&self, region: &Region) -> f64 {
        match (&self.family, &self.derived) {
            (&Family::Gaussian { mean, .. }, &Derived::Gaussian { sd, .. }) => {
                std_normal_mass((region.lo - mean) / sd, (region.hi - mean) / sd)
            }
            (&Family::Laplace { mean, scale }, _) => {
                std_laplace_mass((region.lo - mean) / scale, (region.hi - mean) / scale)
            }
            (_, Derived::Piecewise { pieces }) => pieces
                .iter()
                .map(|p| {
                    let w = (region.hi.min(p.hi) - region.lo.max(p.lo)).max(0.0);
                    w * p.ratio
                })
                .sum(),
            _ => (self.target_cdf(region.hi) - self.target_cdf(region.lo)).max(0.0),
        }
    }

    /// CDF of the target `Q`.
    pub fn target_cdf(&self, x: f64) -> f64 {
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, offset }, _) => ((x - offset) / c).clamp(0.0, 1.0),
            (&Family::Triangular { a, b, c }, _) => {
                let l = b - a;
                if x <= a {
                    0.0
                } else if x <= c {
                    (x - a) * (x - a) / (l * (c - a))
                } else if x < b {
                    1.0 - (b - x) * (b - x) / (l * (b - c))
                } else {
                    1.0
                }
            }
            (_, Derived::Piecewise { pieces }) => pieces
                .iter()
                .map(|p| (x.min(p.hi) - p.lo).max(0.0) * p.ratio)
                .sum::<f64>()
                .min(1.0),
            (&Family::Gaussian { mean, .. }, &Derived::Gaussian { sd, .. }) => {
                norm_cdf((x - mean) / sd)
            }
            (&Family::Laplace { mean, scale }, _) => std_laplace_cdf((x - mean) / scale),
            _ => unreachable!("family/derived mismatch"),
        }
    }

    /// Inverse CDF of the target `Q` (used by tests and Monte-Carlo checks).
    pub fn target_quantile(&self, u: f64) -> f64 {
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, offset }, _) => offset + u * c,
            (&Family::Triangular { a, b, c }, _) => {
                let l = b - a;
                if u < (c - a) / l {
                    a + (u * l * (c - a)).sqrt()
                } else {
                    b - ((1.0 - u) * l * (b - c)).sqrt()
                }
            }
            (_, Derived::Piecewise { pieces }) => {
                let mut acc = 0.0;
                for p in pieces {
                    if u < acc + p.prob {
                        return p.lo + (u - acc) / p.ratio;
                    }
                    acc += p.prob;
                }
                1.0
            }
            (&Family::Gaussian { mean, .. }, &Derived::Gaussian { sd, .. }) => {
                mean + sd * norm_quantile(u)
            }
            (&Family::Laplace { mean, scale }, _) => mean + scale * laplace_quantile(u),
            _ => unreachable!("family/derived mismatch"),
        }
    }

    fn check_level(&self, h: f64) -> Result<()> {
        if h.is_nan() || h < 0.0 || h > self.r_star {
            return Err(Error::Domain(format!(
                "level h = {h} outside [0, r_star = {}]",
                self.r_star
            )));
        }
        Ok(())
    }

    /// `(w_P(h), w_Q(h))`.
    pub fn w_pair(&self, h: f64) -> Result<(f64, f64)> {
        self.restricted_w_pair(h, &Region::FULL)
    }

    /// `(w_P(h | A), w_Q(h | A))`: the `P`- and `Q`-mass of `A ∩ {r >= h}`.
    pub fn restricted_w_pair(&self, h: f64, region: &Region) -> Result<(f64, f64)> {
        self.check_level(h)?;
        if h == 0.0 {
            return Ok((self.proposal.mass(region), self.target_mass(region)));
        }
        let mut wp = 0.0;
        let mut wq = 0.0;
        for piece in self.level_set(h) {
            if let Some(i) = piece.intersect(region) {
                wp += self.proposal.mass(&i);
                wq += self.target_mass(&i);
            }
        }
        Ok((wp.min(1.0), wq.min(1.0)))
    }

    /// `w_Q(h | A) - h * w_P(h | A)`, clamped at zero. Exact for the piecewise families.
    pub fn restricted_gap(&self, h: f64, region: &Region) -> Result<f64> {
        self.check_level(h)?;
        let gap = match &self.derived {
            Derived::Piecewise { pieces } => pieces
                .iter()
                .filter(|p| p.ratio >= h)
                .map(|p| (region.hi.min(p.hi) - region.lo.max(p.lo)).max(0.0) * (p.ratio - h))
                .sum(),
            Derived::Uniform if h > 0.0 => {
                let (wp, _) = self.restricted_w_pair(h, region)?;
                wp * (self.r_star - h)
            }
            _ => {
                let (wp, wq) = self.restricted_w_pair(h, region)?;
                wq - h * wp
            }
        };
        Ok(gap.max(0.0))
    }

    /// For flat families: `(ratio, width)` of every piece of `Q` intersected with `region`.
    pub(crate) fn flat_pieces(&self, region: &Region) -> Option<Vec<(f64, f64)>> {
        let overlap = |lo: f64, hi: f64| (region.hi.min(hi) - region.lo.max(lo)).max(0.0);
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, offset }, _) => {
                Some(vec![(self.r_star, overlap(offset, offset + c))])
            }
            (_, Derived::Piecewise { pieces }) => Some(
                pieces
                    .iter()
                    .map(|p| (p.ratio, overlap(p.lo, p.hi)))
                    .filter(|&(_, w)| w > 0.0)
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Supremum of `r` over `region`.
    pub fn sup_ratio(&self, region: &Region) -> f64 {
        if let Some(pieces) = self.flat_pieces(region) {
            return pieces
                .iter()
                .filter(|p| p.1 > 0.0)
                .map(|p| p.0)
                .fold(0.0, f64::max);
        }
        match &self.family {
            Family::Triangular { .. } | Family::Gaussian { .. } | Family::Laplace { .. } => {
                // unimodal: the sup is at the mode or at the nearer edge
                let m = self.mode_x;
                if region.contains(m) {
                    self.r_star
                } else if region.hi <= m {
                    self.ratio(region.hi)
                } else {
                    self.ratio(region.lo)
                }
            }
            _ => unreachable!("flat families handled above"),
        }
    }

    /// `w_Q(h) - h * w_P(h)`: the right-hand side of the ODE for the inverse stretch.
    pub fn gap(&self, h: f64) -> Result<f64> {
        self.restricted_gap(h, &Region::FULL)
    }

    /// `(D_KL(Q || P), D_inf(Q || P))` in bits.
    pub fn divergences(&self) -> (f64, f64) {
        (self.kl_nats() / LN_2, self.r_star.log2())
    }

    pub fn kl_nats(&self) -> f64 {
        match (&self.family, &self.derived) {
            (&Family::Uniform { c, .. }, _) => -ln(c),
            (&Family::Triangular { a, b, .. }, _) => ln(2.0 / (b - a)) - 0.5,
            (_, Derived::Piecewise { pieces }) => pieces.iter().map(|p| p.prob * ln(p.ratio)).sum(),
            (&Family::Gaussian { mean, var }, _) => 0.5 * (mean * mean + var - ln(var) - 1.0),
            (&Family::Laplace { mean, scale }, _) => {
                let mu = mean.abs();
                -ln(scale) - 1.0 + mu + scale * exp(-mu / scale)
            }
            _ => unreachable!("family/derived mismatch"),
        }
    }
}
