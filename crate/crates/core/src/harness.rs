//! Runtime and codelength experiments on one-dimensional Gaussian problems.
//!
//! Two sweeps are supported. The mutual-information sweep simulates a Gaussian channel:
//! the encoder sees `y ~ N(0, 4^I - 1)` and must send one draw of `x | y`, with the
//! standardized marginal `N(0, 1)` as shared proposal. The infinity-divergence sweep
//! fixes `D_KL(Q||P)` and grows `D_inf(Q||P)` through a Lambert-W parameterization.
//!
//! Results are aggregated into long-format CSV rows
//! `experiment,method,param_bits,stat,metric,value`.

use std::f64::consts::{LN_2, LOG2_E};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{thread_bits, zeta_ideal_codelength, LambdaRule};
use crate::distributions::DensityRatioPair;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngKey};
use crate::samplers::{Method, SampleResult, DEFAULT_BUDGET};
use crate::special::{lambert_w0, norm_quantile};
use crate::stats::Summary;
use crate::stretch::{build_stretch, StretchMap};

/// Default candidate budget for the PFR baseline; longer runs are reported as censored.
pub const DEFAULT_PFR_BUDGET: u64 = 1 << 17;

/// Offsets `c` of the reference curves `I + log2(I + 1) + c`.
pub const REFERENCE_OFFSETS: [f64; 4] = [2.0, 6.0, 7.0, 8.0];

const Y_DOMAIN: u64 = 0x7961; // key domain for the channel inputs
const RUN_DOMAIN: u64 = 0x7275;

/// Gaussian channel carrying `mi_bits` of mutual information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChannel {
    pub mi_bits: f64,
    /// Variance of the encoder's input `y`.
    pub input_var: f64,
}

/// Build the channel with `I[x; y] = mi_bits`.
pub fn gaussian_channel(mi_bits: f64) -> Result<GaussianChannel> {
    if !(mi_bits > 0.0 && mi_bits.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mutual information must be positive, got {mi_bits}"
        )));
    }
    Ok(GaussianChannel {
        mi_bits,
        input_var: (2.0 * mi_bits * LN_2).exp_m1(),
    })
}

impl GaussianChannel {
    /// Scale of the standardized target mean and its variance, `2^-I` and `4^-I`.
    fn scale(&self) -> (f64, f64) {
        let v = 1.0 / (1.0 + self.input_var);
        (v.sqrt(), v)
    }

    /// Target `x | y` against the standardized proposal `N(0, 1)`.
    pub fn pair(&self, y: f64) -> Result<DensityRatioPair> {
        let (s, v) = self.scale();
        DensityRatioPair::gaussian(y * s, v)
    }

    /// Input `y` from a uniform variate in `(0, 1)`.
    pub fn input(&self, u: f64) -> f64 {
        self.input_var.sqrt() * norm_quantile(u)
    }

    /// The `rep`-th input of a sweep point; shared by every method.
    pub fn input_for(&self, seed: u64, point: u64, rep: u64) -> f64 {
        self.input(RngKey::new(derive_seed(seed, Y_DOMAIN, point), rep).uniform())
    }

    /// Closed-form mutual information of the constructed joint, in bits.
    pub fn mutual_information_bits(&self) -> f64 {
        // x = s y + e with var(e) = v: I = -1/2 log2 v
        -0.5 * self.scale().1.log2()
    }
}

/// Solve `w + ln w = l` for `w > 0` (principal Lambert W of `e^l`) without forming `e^l`.
fn lambert_w0_of_exp(l: f64) -> f64 {
    let mut w = if l > 1.0 { l - l.ln() } else { 0.5 };
    for _ in 0..100 {
        let f = w + w.ln() - l;
        let step = f / (1.0 + 1.0 / w);
        w = (w - step).max(w * 1e-3);
        if step.abs() <= 1e-16 * w {
            break;
        }
    }
    w
}

/// Gaussian target against `N(0, 1)` with `D_KL = k_nats` and `ln sup r = r_log`.
pub fn fixed_kl_pair(k_nats: f64, r_log: f64) -> Result<DensityRatioPair> {
    if !(k_nats > 0.0 && r_log > 0.0 && k_nats.is_finite() && r_log.is_finite()) {
        return Err(Error::Domain(format!(
            "divergences must be positive and finite, got K={k_nats}, ln R={r_log}"
        )));
    }
    let a = 2.0 * r_log - 2.0 * k_nats - 1.0;
    let b = 2.0 * r_log - 1.0;
    let w = if a > 0.0 && (a.ln() + b) > 700.0 {
        lambert_w0_of_exp(a.ln() + b)
    } else {
        lambert_w0(a * b.exp())?
    };
    let var = (w - b).exp();
    let mu_sq = 2.0 * k_nats - var + var.ln() + 1.0;
    if !(var > 0.0 && var < 1.0) || !(mu_sq >= 0.0) {
        return Err(Error::Domain(format!(
            "no Gaussian target with K={k_nats} nats and ln R={r_log}"
        )));
    }
    DensityRatioPair::gaussian(mu_sq.sqrt(), var)
}

/// Gaussian target with variance `var` and `D_KL = kl_bits` against `N(0, 1)`.
pub fn gaussian_pair_with_kl(kl_bits: f64, var: f64) -> Result<DensityRatioPair> {
    let mu_sq = 2.0 * kl_bits * LN_2 - var + var.ln() + 1.0;
    if !(mu_sq >= 0.0) {
        return Err(Error::Domain(format!(
            "variance {var} already exceeds {kl_bits} bits of divergence"
        )));
    }
    DensityRatioPair::gaussian(mu_sq.sqrt(), var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MiSweep,
    InfDivSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MiSweep => "mi_sweep",
            Experiment::InfDivSweep => "inf_div_sweep",
        }
    }
}

/// How repetitions are scheduled. Output does not depend on the choice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    #[default]
    Parallel,
    Serial,
}

fn default_kl_bits() -> f64 {
    2.0
}

fn default_pfr_budget() -> u64 {
    DEFAULT_PFR_BUDGET
}

fn default_dyadic() -> [f64; 2] {
    [-8.0, 8.0]
}

fn default_lambda() -> LambdaRule {
    LambdaRule::Inverse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub experiment: Experiment,
    /// Mutual information (MI sweep) or `D_inf` (divergence sweep), in bits.
    pub grid: Vec<f64>,
    pub reps: u64,
    /// Method tags, see [`parse_method`].
    pub methods: Vec<String>,
    pub seed: u64,
    /// Thread count for `gprs_parallel`.
    #[serde(default)]
    pub threads: Option<u64>,
    /// Fixed `D_KL` for the divergence sweep, in bits.
    #[serde(default = "default_kl_bits")]
    pub kl_bits: f64,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaRule,
    #[serde(default = "default_pfr_budget")]
    pub pfr_budget: u64,
    /// Finite domain of the dyadic split.
    #[serde(default = "default_dyadic")]
    pub dyadic: [f64; 2],
    #[serde(default)]
    pub schedule: Schedule,
}

impl BenchConfig {
    pub fn new(
        experiment: Experiment,
        grid: Vec<f64>,
        reps: u64,
        methods: &[&str],
        seed: u64,
    ) -> Self {
        Self {
            experiment,
            grid,
            reps,
            methods: methods.iter().map(|m| m.to_string()).collect(),
            seed,
            threads: None,
            kl_bits: default_kl_bits(),
            lambda: default_lambda(),
            pfr_budget: default_pfr_budget(),
            dyadic: default_dyadic(),
            schedule: Schedule::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 100 {
            return Err(Error::Config(format!(
                "need at least 100 reps, got {}",
                self.reps
            )));
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Config("grid must be non-empty and positive".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !(self.kl_bits > 0.0) || self.pfr_budget == 0 {
            return Err(Error::Config(
                "kl_bits and pfr_budget must be positive".into(),
            ));
        }
        self.resolved_methods().map(|_| ())
    }

    fn resolved_methods(&self) -> Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| parse_method(m, self.threads, self.dyadic))
            .collect()
    }
}

/// Resolve a method tag. `gprs_parallel` takes its thread count from `threads`;
/// `gprs_parallel_j<J>` names it inline.
pub fn parse_method(tag: &str, threads: Option<u64>, dyadic: [f64; 2]) -> Result<Method> {
    let m = match tag {
        "gprs_global" => Method::Global,
        "gprs_bnb" | "gprs_bnb_unimodal" => Method::BnbUnimodal,
        "gprs_bnb_dyadic" => Method::BnbDyadic {
            lo: dyadic[0],
            hi: dyadic[1],
        },
        "rejection" => Method::Rejection,
        "pfr" => Method::Pfr,
        "gprs_parallel" => Method::Parallel {
            threads: threads
                .ok_or_else(|| Error::Config("gprs_parallel needs `threads`".into()))?,
        },
        other => match other.strip_prefix("gprs_parallel_j").map(str::parse::<u64>) {
            Some(Ok(j)) => Method::Parallel { threads: j },
            _ => return Err(Error::Config(format!("unknown method `{other}`"))),
        },
    };
    if let Method::Parallel { threads: 0 } = m {
        return Err(Error::Config(
            "gprs_parallel needs at least one thread".into(),
        ));
    }
    Ok(m)
}

/// Telemetry of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub param: f64,
    pub steps: u64,
    /// Mean candidates per worker; equals `steps` for single-stream methods.
    pub thread_steps: f64,
    pub ideal_codelength_bits: f64,
    pub depth: Option<u32>,
}

/// Outcome of one run: a record, a budget-capped run, or another failure.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Done(RunRecord),
    Censored { budget: u64 },
    Failed(String),
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: &'static str,
    pub method: String,
    pub param_bits: f64,
    pub stat: String,
    pub metric: &'static str,
    pub value: f64,
}

fn ideal_codelength(result: &SampleResult, method: &Method, lam: f64) -> Result<f64> {
    let base = zeta_ideal_codelength(result.code.index, lam)?;
    Ok(match method {
        Method::Parallel { threads } => base + thread_bits(*threads) as f64,
        _ => base,
    })
}

fn run_one(
    method: &Method,
    stretch: &StretchMap,
    seed: u64,
    param: f64,
    lam: f64,
    pfr_budget: u64,
) -> RunOutcome {
    let budget = match method {
        Method::Pfr => pfr_budget,
        _ => DEFAULT_BUDGET,
    };
    let result = match method.run_with_budget(stretch, seed, budget) {
        Ok(r) => r,
        Err(Error::Budget { budget, .. }) => return RunOutcome::Censored { budget },
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let codelength = match ideal_codelength(&result, method, lam) {
        Ok(c) => c,
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    RunOutcome::Done(RunRecord {
        method: method.name(),
        param,
        steps: result.steps,
        thread_steps: result.steps as f64 / result.thread_steps.len() as f64,
        ideal_codelength_bits: codelength,
        depth: result.depth(),
    })
}

/// Run every method on every grid point; returns the outcomes per `(method, point)` in
/// config order.
pub fn run_records(cfg: &BenchConfig) -> Result<Vec<(Method, f64, Vec<RunOutcome>)>> {
    cfg.validate()?;
    let methods = cfg.resolved_methods()?;
    let mut out = Vec::new();
    for (gi, &param) in cfg.grid.iter().enumerate() {
        let gi = gi as u64;
        let (lam_bits, fixed) = match cfg.experiment {
            Experiment::MiSweep => (param, None),
            Experiment::InfDivSweep => {
                let pair = fixed_kl_pair(cfg.kl_bits * LN_2, param * LN_2)?;
                (cfg.kl_bits, Some(build_stretch(&pair)?))
            }
        };
        let lam = cfg.lambda.lambda(lam_bits);
        let channel = match cfg.experiment {
            Experiment::MiSweep => Some(gaussian_channel(param)?),
            Experiment::InfDivSweep => None,
        };

        // one stretch per rep, shared across methods
        let rep = |i: u64| -> Vec<RunOutcome> {
            let owned;
            let stretch = match (&fixed, &channel) {
                (Some(s), _) => s,
                (None, Some(ch)) => {
                    let y = ch.input_for(cfg.seed, gi, i);
                    match ch.pair(y).and_then(|p| build_stretch(&p)) {
                        Ok(s) => {
                            owned = s;
                            &owned
                        }
                        Err(e) => {
                            return methods
                                .iter()
                                .map(|_| RunOutcome::Failed(e.to_string()))
                                .collect()
                        }
                    }
                }
                (None, None) => unreachable!(),
            };
            let seed = derive_seed(cfg.seed, RUN_DOMAIN ^ (gi << 16), i);
            methods
                .iter()
                .map(|m| run_one(m, stretch, seed, param, lam, cfg.pfr_budget))
                .collect()
        };
        let per_rep: Vec<Vec<RunOutcome>> = match cfg.schedule {
            Schedule::Serial => (0..cfg.reps).map(rep).collect(),
            Schedule::Parallel => (0..cfg.reps).into_par_iter().map(rep).collect(),
        };
        for (mi, m) in methods.iter().enumerate() {
            let outcomes = per_rep.iter().map(|r| r[mi].clone()).collect();
            out.push((*m, param, outcomes));
        }
    }
    Ok(out)
}

fn push_summary(rows: &mut Vec<Row>, base: &Row, metric: &'static str, xs: &[f64]) {
    if xs.is_empty() {
        return;
    }
    let s = Summary::of(xs);
    for (stat, value) in [
        ("mean", s.mean),
        ("median", s.median),
        ("q25", s.q25),
        ("q75", s.q75),
    ] {
        rows.push(Row {
            stat: stat.into(),
            metric,
            value,
            ..base.clone()
        });
    }
}

/// Aggregate runs into CSV rows.
///
/// Per method and grid point: mean, median and quartiles of `steps`, `thread_steps` and
/// `codelength`, plus `count` rows for `runs`, `censored` and `failed`. Censored runs enter
/// the step statistics at their budget (a lower bound) and are left out of the codelength
/// statistics. Reference rows carry the information budget `I` and the curves
/// `I + log2(I + 1) + c`.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<Row>> {
    let experiment = cfg.experiment.name();
    let mut rows = Vec::new();
    for (param, _) in cfg.grid.iter().zip(0..) {
        let info = match cfg.experiment {
            Experiment::MiSweep => *param,
            Experiment::InfDivSweep => cfg.kl_bits,
        };
        let base = Row {
            experiment,
            method: "reference".into(),
            param_bits: *param,
            stat: "info".into(),
            metric: "codelength",
            value: info,
        };
        rows.push(base.clone());
        for c in REFERENCE_OFFSETS {
            rows.push(Row {
                stat: format!("ub_c{c}"),
                value: info + (info + 1.0).log2() + c,
                ..base.clone()
            });
        }
        if cfg.experiment == Experiment::InfDivSweep {
            rows.push(Row {
                stat: "dinf".into(),
                metric: "steps",
                value: 2f64.powf(*param),
                ..base.clone()
            });
        }
    }
    for (method, param, outcomes) in run_records(cfg)? {
        let base = Row {
            experiment,
            method: method.name(),
            param_bits: param,
            stat: String::new(),
            metric: "",
            value: 0.0,
        };
        let mut steps = Vec::new();
        let mut thread_steps = Vec::new();
        let mut codelength = Vec::new();
        let (mut censored, mut failed) = (0u64, 0u64);
        for o in &outcomes {
            match o {
                RunOutcome::Done(r) => {
                    steps.push(r.steps as f64);
                    thread_steps.push(r.thread_steps);
                    codelength.push(r.ideal_codelength_bits);
                }
                RunOutcome::Censored { budget } => {
                    censored += 1;
                    steps.push(*budget as f64);
                    thread_steps.push(*budget as f64);
                }
                RunOutcome::Failed(_) => failed += 1,
            }
        }
        push_summary(&mut rows, &base, "steps", &steps);
        if matches!(method, Method::Parallel { .. }) {
            push_summary(&mut rows, &base, "thread_steps", &thread_steps);
        }
        push_summary(&mut rows, &base, "codelength", &codelength);
        for (metric, n) in [
            ("runs", outcomes.len() as u64),
            ("censored", censored),
            ("failed", failed),
        ] {
            rows.push(Row {
                stat: "count".into(),
                metric,
                value: n as f64,
                ..base.clone()
            });
        }
    }
    Ok(rows)
}

/// Write rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Rows rendered to a CSV string.
pub fn csv_string(rows: &[Row]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Expected `log2 N` bound of the global index, `D_KL + 2 log2 e`, in bits.
pub fn global_index_log_bound(kl_bits: f64) -> f64 {
    kl_bits + 2.0 * LOG2_E
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_information() {
        for i in [0.5, 1.0, 3.0, 8.0] {
            let ch = gaussian_channel(i).unwrap();
            assert!((ch.mutual_information_bits() - i).abs() < 1e-12);
            // marginal of the standardized target mean plus its variance is one
            let (s, v) = ch.scale();
            assert!((s * s * ch.input_var + v - 1.0).abs() < 1e-12);
        }
        assert!(gaussian_channel(0.0).is_err());
    }

    #[test]
    fn lambert_log_form_agrees() {
        for l in [0.5f64, 2.0, 10.0, 300.0] {
            let direct = lambert_w0(l.exp()).unwrap();
            assert!((lambert_w0_of_exp(l) - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn method_tags() {
        let d = default_dyadic();
        assert_eq!(
            parse_method("gprs_parallel_j4", None, d).unwrap(),
            Method::Parallel { threads: 4 }
        );
        assert_eq!(
            parse_method("gprs_parallel", Some(8), d).unwrap(),
            Method::Parallel { threads: 8 }
        );
        assert!(parse_method("gprs_parallel", None, d).is_err());
        assert!(parse_method("gprs_parallel_j0", None, d).is_err());
        assert!(parse_method("astar", None, d).is_err());
        for m in [
            "gprs_global",
            "gprs_bnb",
            "gprs_bnb_dyadic",
            "rejection",
            "pfr",
        ] {
            let parsed = parse_method(m, None, d).unwrap();
            assert_eq!(parse_method(&parsed.name(), None, d).unwrap(), parsed);
        }
    }

    #[test]
    fn config_validation() {
        let ok = "experiment = \"mi-sweep\"\ngrid = [1.0, 2.0]\nreps = 100\nmethods = [\"gprs_global\"]\nseed = 3\n";
        let cfg = BenchConfig::from_toml_str(ok).unwrap();
        assert_eq!(cfg.kl_bits, 2.0);
        assert_eq!(cfg.pfr_budget, DEFAULT_PFR_BUDGET);
        for bad in [
            ok.replace("reps = 100", "reps = 99"),
            ok.replace("[1.0, 2.0]", "[2.0, 1.0]"),
            ok.replace("gprs_global", "nope"),
            format!("{ok}extra = 1\n"),
        ] {
            assert!(BenchConfig::from_toml_str(&bad).is_err(), "{bad}");
        }
    }
}
