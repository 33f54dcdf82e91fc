//! Index codes for channel simulation.
//!
//! Byte format of an encoded sample:
//!
//! ```text
//! byte 0      variant tag: 0 = Global, 1 = Parallel, 2 = BnB
//! bytes 1..   payload bits, MSB first, zero padded to a whole byte
//! payload     Global:   delta(N)
//!             Parallel: (j* - 1) in ceil(log2 J) raw bits, then delta(N_j*)
//!             BnB:      delta(H)
//! ```
//!
//! `delta` is the Elias delta code. It is self-delimiting, so trailing padding is ignored.
//! The seed, the proposal, `J` and the splitting function are shared out of band.

use serde::{Deserialize, Serialize};

use crate::distributions::{DensityRatioPair, Proposal};
use crate::error::{Error, Result};
use crate::poisson::{stream_location, BspTree, SplitFn};
use crate::rng::RngKey;
use crate::samplers::{self, SampleResult};
use crate::special::zeta;
use crate::stretch::StretchMap;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Global,
    Parallel,
    Bnb,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Global => 0,
            Variant::Parallel => 1,
            Variant::Bnb => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Variant::Global),
            1 => Ok(Variant::Parallel),
            2 => Ok(Variant::Bnb),
            t => Err(Error::Malformed(format!("unknown variant tag {t}"))),
        }
    }
}

/// The transmissible index of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCode {
    pub variant: Variant,
    /// `N`, `N_j*` or `H`.
    pub index: u64,
    /// `j*` (1-based), parallel only.
    pub thread: Option<u64>,
    pub seed: u64,
    /// Number of threads, parallel only.
    pub threads: Option<u64>,
}

impl SampleCode {
    pub fn global(index: u64, seed: u64) -> Self {
        Self {
            variant: Variant::Global,
            index,
            thread: None,
            seed,
            threads: None,
        }
    }

    pub fn parallel(thread: u64, index: u64, threads: u64, seed: u64) -> Self {
        Self {
            variant: Variant::Parallel,
            index,
            thread: Some(thread),
            seed,
            threads: Some(threads),
        }
    }

    pub fn bnb(heap: u64, seed: u64) -> Self {
        Self {
            variant: Variant::Bnb,
            index: heap,
            thread: None,
            seed,
            threads: None,
        }
    }
}

/// A growable bit sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    len: usize,
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len_bits(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Append the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    /// Padded payload bytes (no header).
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Interpret every bit of `bytes` as payload.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.get(i).unwrap() { '1' } else { '0' })
            .collect()
    }
}

struct BitReader<'a> {
    bits: &'a Bitstream,
    pos: usize,
}

impl BitReader<'_> {
    fn bit(&mut self) -> Result<bool> {
        let b = self.bits.get(self.pos).ok_or(Error::Truncated(self.pos))?;
        self.pos += 1;
        Ok(b)
    }

    fn bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }
}

fn bit_len(n: u64) -> u32 {
    64 - n.leading_zeros()
}

/// Append the Elias delta code of `n >= 1`.
pub fn elias_delta_encode(n: u64, out: &mut Bitstream) {
    assert!(n >= 1, "Elias delta codes positive integers");
    let l = bit_len(n);
    let ll = bit_len(l as u64);
    for _ in 1..ll {
        out.push(false);
    }
    out.push_bits(l as u64, ll);
    out.push_bits(n, l - 1);
}

fn elias_delta_read(r: &mut BitReader) -> Result<u64> {
    let mut zeros = 0u32;
    while !r.bit()? {
        zeros += 1;
        if zeros > 6 {
            return Err(Error::Malformed("Elias delta prefix too long".into()));
        }
    }
    let l = ((1u64 << zeros) | r.bits(zeros)?) as u32;
    if l > 64 {
        return Err(Error::Malformed(format!(
            "index of {l} bits does not fit 64 bits"
        )));
    }
    Ok((1u64 << (l - 1)) | r.bits(l - 1)?)
}

/// Length of the Elias delta code of `n`.
pub fn elias_delta_len(n: u64) -> u32 {
    let l = bit_len(n);
    l - 1 + 2 * bit_len(l as u64) - 1
}

/// `ceil(log2 j)`: raw bits used for the thread index.
pub fn thread_bits(threads: u64) -> u32 {
    if threads <= 1 {
        0
    } else {
        bit_len(threads - 1)
    }
}

/// Payload bits of a code (without the header byte).
pub fn encode_index(code: &SampleCode) -> Result<Bitstream> {
    if code.index == 0 {
        return Err(Error::InvalidParameter("indices start at 1".into()));
    }
    let mut out = Bitstream::new();
    if code.variant == Variant::Parallel {
        let (j, threads) = match (code.thread, code.threads) {
            (Some(j), Some(t)) if j >= 1 && j <= t => (j, t),
            _ => {
                return Err(Error::InvalidParameter(
                    "parallel code needs 1 <= thread <= threads".into(),
                ))
            }
        };
        out.push_bits(j - 1, thread_bits(threads));
    }
    elias_delta_encode(code.index, &mut out);
    Ok(out)
}

/// Inverse of [`encode_index`]; `threads` is required for the parallel variant.
pub fn decode_index(
    variant: Variant,
    bits: &Bitstream,
    seed: u64,
    threads: Option<u64>,
) -> Result<SampleCode> {
    let mut r = BitReader { bits, pos: 0 };
    match variant {
        Variant::Parallel => {
            let t = threads.ok_or_else(|| Error::Config("parallel decode needs J".into()))?;
            let j = r.bits(thread_bits(t))? + 1;
            if j > t {
                return Err(Error::Malformed(format!("thread {j} exceeds J = {t}")));
            }
            Ok(SampleCode::parallel(j, elias_delta_read(&mut r)?, t, seed))
        }
        Variant::Global => Ok(SampleCode::global(elias_delta_read(&mut r)?, seed)),
        Variant::Bnb => Ok(SampleCode::bnb(elias_delta_read(&mut r)?, seed)),
    }
}

/// Header byte followed by the padded payload.
pub fn to_bytes(code: &SampleCode) -> Result<Vec<u8>> {
    let bits = encode_index(code)?;
    let mut out = Vec::with_capacity(1 + bits.as_bytes().len());
    out.push(code.variant.tag());
    out.extend_from_slice(bits.as_bytes());
    Ok(out)
}

/// Parse a byte buffer produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8], seed: u64, threads: Option<u64>) -> Result<SampleCode> {
    let (&tag, payload) = bytes.split_first().ok_or(Error::Truncated(0))?;
    let variant = Variant::from_tag(tag)?;
    decode_index(variant, &Bitstream::from_bytes(payload), seed, threads)
}

/// `-log2` of the Zeta probability `n^{-lam} / zeta(lam)`.
pub fn zeta_ideal_codelength(n: u64, lam: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("indices start at 1".into()));
    }
    Ok(lam * (n as f64).log2() + zeta(lam)?.log2())
}

/// Choice of the Zeta exponent from an information budget `i` in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `1 + 1/i`.
    Inverse,
    /// `1 + 1/(i + 2 log2 e)`.
    Shifted,
}

impl LambdaRule {
    pub fn lambda(self, info_bits: f64) -> f64 {
        let i = info_bits.max(1e-9);
        match self {
            LambdaRule::Inverse => 1.0 + 1.0 / i,
            LambdaRule::Shifted => 1.0 + 1.0 / (i + 2.0 * LOG2_E),
        }
    }
}

/// Everything encoder and decoder share besides the payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub proposal: Proposal,
    /// Threads for the parallel variant.
    pub threads: u64,
    /// Splitting function for the branch-and-bound variant; `OnSample` selects the
    /// unimodal sampler.
    pub split: SplitFn,
}

impl ProtocolConfig {
    pub fn new(seed: u64, proposal: Proposal) -> Self {
        Self {
            seed,
            proposal,
            threads: 1,
            split: SplitFn::OnSample,
        }
    }
}

/// Run the sampler for `variant` and return its result and serialized code.
pub fn channel_encode(
    stretch: &StretchMap,
    variant: Variant,
    config: &ProtocolConfig,
) -> Result<(SampleResult, Vec<u8>)> {
    let pair: &DensityRatioPair = stretch.pair();
    if pair.proposal() != config.proposal {
        return Err(Error::Config(
            "pair proposal differs from protocol proposal".into(),
        ));
    }
    let result = match variant {
        Variant::Global => samplers::gprs_global(stretch, RngKey::new(config.seed, 1))?,
        Variant::Parallel => samplers::gprs_parallel(stretch, config.threads, config.seed)?,
        Variant::Bnb => match config.split {
            SplitFn::OnSample => samplers::gprs_bnb_unimodal(stretch, config.seed)?,
            split => samplers::gprs_bnb_general(stretch, split, config.seed)?,
        },
    };
    let bytes = to_bytes(&result.code)?;
    Ok((result, bytes))
}

/// Decoded sample and the number of keyed nodes or arrivals regenerated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub x: f64,
    pub code: SampleCode,
    pub regenerated: u64,
}

/// Reproduce the encoder's sample from its bytes. Needs no knowledge of the target.
pub fn channel_decode(bytes: &[u8], config: &ProtocolConfig) -> Result<Decoded> {
    let code = from_bytes(bytes, config.seed, Some(config.threads))?;
    match code.variant {
        Variant::Global => Ok(Decoded {
            x: stream_location(config.proposal, RngKey::new(config.seed, 1), code.index)?,
            code,
            regenerated: 1,
        }),
        Variant::Parallel => {
            let j = code.thread.expect("parallel code has a thread");
            Ok(Decoded {
                x: stream_location(config.proposal, RngKey::new(config.seed, j), code.index)?,
                code,
                regenerated: 1,
            })
        }
        Variant::Bnb => {
            let tree = BspTree::new(config.split, config.proposal, config.seed);
            let path = tree.walk_to(code.index)?;
            Ok(Decoded {
                x: path.last().unwrap().arrival.x,
                code,
                regenerated: path.len() as u64,
            })
        }
    }
}
