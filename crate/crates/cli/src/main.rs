//! `gprs`: sample, encode, decode, benchmark and inspect stretch functions from the shell.
//!
//! Exit codes: 0 success, 1 I/O failure on outputs, 2 bad arguments or config,
//! 3 sampler budget exhausted, 4 truncated or malformed bitstream.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gprs_core::codec::{
    channel_decode, channel_encode, from_bytes, thread_bits, zeta_ideal_codelength, LambdaRule,
};
use gprs_core::harness::{run_bench, write_csv, BenchConfig, Schedule};
use gprs_core::samplers::{Method, SampleResult, DEFAULT_BUDGET};
use gprs_core::{
    build_stretch, DensityRatioPair, Error, Proposal, ProtocolConfig, SplitFn, StretchMap, Variant,
};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Stream(String),
    #[error("{0}")]
    Output(String),
    /// The reader hung up; not an error for a filter.
    #[error("broken pipe")]
    Closed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Closed => 0,
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Stream(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { .. } => CliError::Budget(e.to_string()),
            Error::Truncated(_) | Error::Malformed(_) => CliError::Stream(e.to_string()),
            Error::Io(_) => CliError::Output(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gprs",
    version,
    about = "Greedy Poisson rejection sampling and channel coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples; prints `x,steps,index,ideal_bits` per sample.
    Sample(SampleArgs),
    /// Encode one sample of the target in PAIR to a bitstream file.
    Encode(EncodeArgs),
    /// Decode a bitstream file; prints the sample.
    Decode(DecodeArgs),
    /// Run a benchmark sweep and write CSV.
    Bench(BenchArgs),
    /// Dump `t,sigma_inv` for the stretch function of PAIR.
    StretchTable(StretchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleVariant {
    Global,
    Parallel,
    Bnb,
    Rejection,
    Pfr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodecVariant {
    Global,
    Parallel,
    Bnb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    OnSample,
    Dyadic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProposalArg {
    Normal,
    Laplace,
    Uniform,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LambdaArg {
    Inverse,
    Shifted,
}

/// Settings shared by encoder and decoder.
#[derive(Args, Clone)]
struct Protocol {
    /// Shared seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of superposed streams for the parallel variant.
    #[arg(long, default_value_t = 1)]
    threads: u64,
    /// Splitting function for branch-and-bound (on-sample needs a unimodal ratio).
    #[arg(long, value_enum, default_value_t = SplitArg::OnSample)]
    split: SplitArg,
    /// Finite domain `LO,HI` of the dyadic split; defaults to 0,1 for uniform
    /// proposals and -8,8 otherwise.
    #[arg(long, value_parser = parse_domain, allow_hyphen_values = true)]
    domain: Option<(f64, f64)>,
}

impl Protocol {
    fn split(&self, proposal: Proposal) -> Result<SplitFn, CliError> {
        match self.split {
            SplitArg::OnSample => Ok(SplitFn::OnSample),
            SplitArg::Dyadic => {
                let (lo, hi) = match (self.domain, proposal) {
                    (Some(d), _) => d,
                    (None, Proposal::Uniform) => (0.0, 1.0),
                    (None, _) => (-8.0, 8.0),
                };
                Ok(SplitFn::dyadic(lo, hi)?)
            }
        }
    }

    fn config(&self, proposal: Proposal) -> Result<ProtocolConfig, CliError> {
        let mut cfg = ProtocolConfig::new(self.seed, proposal);
        cfg.threads = self.threads;
        cfg.split = self.split(proposal)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Target/proposal pair (TOML).
    #[arg(long)]
    pair: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleVariant::Global)]
    variant: SampleVariant,
    #[command(flatten)]
    protocol: Protocol,
    /// Number of samples; sample `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Candidate budget for the time-ordered samplers.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Zeta exponent rule for `ideal_bits`.
    #[arg(long, value_enum, default_value_t = LambdaArg::Inverse)]
    lambda: LambdaArg,
    /// Information budget in bits for the Zeta exponent; defaults to the pair's KL.
    #[arg(long)]
    info_bits: Option<f64>,
    /// Print a header line first.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    pair: PathBuf,
    #[arg(long, value_enum, default_value_t = CodecVariant::Global)]
    variant: CodecVariant,
    #[command(flatten)]
    protocol: Protocol,
    /// Output bitstream file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input bitstream file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Shared proposal distribution.
    #[arg(long, value_enum)]
    proposal: ProposalArg,
    #[command(flatten)]
    protocol: Protocol,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    /// Comma-separated grid in bits.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Comma-separated method tags.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Run repetitions on one thread (output is identical).
    #[arg(long)]
    serial: bool,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StretchArgs {
    #[arg(long)]
    pair: PathBuf,
    /// Grid intervals for closed forms (tabulated maps print their own nodes).
    #[arg(long, default_value_t = 200)]
    rows: usize,
    /// Last time for closed forms; defaults to sigma(0.999 r*).
    #[arg(long)]
    t_end: Option<f64>,
    /// Force numerical integration even when a closed form exists.
    #[arg(long)]
    tabulated: bool,
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo = lo.trim().parse::<f64>().map_err(|e| format!("LO: {e}"))?;
    let hi = hi.trim().parse::<f64>().map_err(|e| format!("HI: {e}"))?;
    Ok((lo, hi))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_pair(path: &Path) -> Result<DensityRatioPair, CliError> {
    Ok(DensityRatioPair::from_toml_str(&read_text(path)?)?)
}

fn ideal_bits(res: &SampleResult, lam: f64) -> Result<f64, CliError> {
    let base = zeta_ideal_codelength(res.code.index, lam)?;
    Ok(base + res.code.threads.map_or(0, thread_bits) as f64)
}

fn index_field(res: &SampleResult) -> String {
    match res.code.thread {
        Some(j) => format!("{j}:{}", res.code.index),
        None => res.code.index.to_string(),
    }
}

fn sample(args: SampleArgs, out: &mut impl Write) -> Result<(), CliError> {
    let pair = load_pair(&args.pair)?;
    let stretch = build_stretch(&pair)?;
    let split = args.protocol.split(pair.proposal())?;
    let method = match args.variant {
        SampleVariant::Global => Method::Global,
        SampleVariant::Parallel => Method::Parallel {
            threads: args.protocol.threads,
        },
        SampleVariant::Bnb => match split {
            SplitFn::Dyadic { lo, hi } => Method::BnbDyadic { lo, hi },
            _ => Method::BnbUnimodal,
        },
        SampleVariant::Rejection => Method::Rejection,
        SampleVariant::Pfr => Method::Pfr,
    };
    let rule = match args.lambda {
        LambdaArg::Inverse => LambdaRule::Inverse,
        LambdaArg::Shifted => LambdaRule::Shifted,
    };
    let lam = rule.lambda(args.info_bits.unwrap_or_else(|| pair.divergences().0));
    if args.header {
        writeln!(out, "x,steps,index,ideal_bits").map_err(io_err)?;
    }
    for i in 0..args.reps {
        let res =
            method.run_with_budget(&stretch, args.protocol.seed.wrapping_add(i), args.budget)?;
        writeln!(
            out,
            "{},{},{},{}",
            res.x,
            res.steps,
            index_field(&res),
            ideal_bits(&res, lam)?
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn encode(args: EncodeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let pair = load_pair(&args.pair)?;
    let stretch: StretchMap = build_stretch(&pair)?;
    let cfg = args.protocol.config(pair.proposal())?;
    let variant = match args.variant {
        CodecVariant::Global => Variant::Global,
        CodecVariant::Parallel => Variant::Parallel,
        CodecVariant::Bnb => Variant::Bnb,
    };
    let (res, bytes) = channel_encode(&stretch, variant, &cfg)?;
    fs::write(&args.out, &bytes)
        .map_err(|e| CliError::Output(format!("{}: {e}", args.out.display())))?;
    writeln!(
        out,
        "{},{},{},{}",
        res.x,
        res.steps,
        index_field(&res),
        bytes.len()
    )
    .map_err(io_err)
}

fn decode(args: DecodeArgs, out: &mut impl Write) -> Result<(), CliError> {
    let bytes = fs::read(&args.input)
        .map_err(|e| CliError::Stream(format!("{}: {e}", args.input.display())))?;
    let proposal = match args.proposal {
        ProposalArg::Normal => Proposal::Normal,
        ProposalArg::Laplace => Proposal::Laplace,
        ProposalArg::Uniform => Proposal::Uniform,
    };
    let cfg = args.protocol.config(proposal)?;
    // parse first so stream errors are not masked by decoder errors
    from_bytes(&bytes, cfg.seed, Some(cfg.threads))?;
    let dec = channel_decode(&bytes, &cfg)?;
    writeln!(out, "{}", dec.x).map_err(io_err)
}

fn bench(args: BenchArgs, out: &mut impl Write) -> Result<(), CliError> {
    let mut cfg = BenchConfig::from_toml_str(&read_text(&args.config)?)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(m) = args.methods {
        cfg.methods = m;
    }
    if args.serial {
        cfg.schedule = Schedule::Serial;
    }
    cfg.validate()?;
    let rows = run_bench(&cfg)?;
    match args.out {
        Some(path) => {
            let file = fs::File::create(&path)
                .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
            write_csv(&rows, io::BufWriter::new(file))?;
        }
        None => write_csv(&rows, out)?,
    }
    Ok(())
}

fn stretch_table(args: StretchArgs, out: &mut impl Write) -> Result<(), CliError> {
    let pair = load_pair(&args.pair)?;
    let map = if args.tabulated {
        StretchMap::build_tabulated(&pair, gprs_core::stretch::DEFAULT_TOL)?
    } else {
        build_stretch(&pair)?
    };
    let t_end = match args.t_end {
        Some(t) => t,
        None => map.sigma(0.999 * pair.r_star())?,
    };
    writeln!(out, "t,sigma_inv").map_err(io_err)?;
    for (t, y) in map.table(args.rows, t_end) {
        writeln!(out, "{t},{y}").map_err(io_err)?;
    }
    Ok(())
}

fn io_err(e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::BrokenPipe {
        CliError::Closed
    } else {
        CliError::Output(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = match cli.command {
        Command::Sample(a) => sample(a, &mut out),
        Command::Encode(a) => encode(a, &mut out),
        Command::Decode(a) => decode(a, &mut out),
        Command::Bench(a) => bench(a, &mut out),
        Command::StretchTable(a) => stretch_table(a, &mut out),
    }
    .and_then(|()| out.flush().map_err(io_err));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            drop(out);
            eprintln!("gprs: {e}");
            ExitCode::from(e.code())
        }
    }
}
