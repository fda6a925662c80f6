//! Flow keys, packet traces, trace files and the synthetic Zipf generator.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::num::NonZeroU32;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value substituted for zero keys read from a trace file. Zero marks an
/// empty cell inside the sketches.
pub const REMAPPED_ZERO_KEY: u32 = u32::MAX;

/// A 32-bit flow identifier (a source IPv4 address in the reference traces).
///
/// Zero is reserved as the empty-cell marker and is never a valid key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FlowKey(NonZeroU32);

impl FlowKey {
    /// Returns `None` for the reserved zero value.
    #[inline]
    pub const fn new(raw: u32) -> Option<Self> {
        match NonZeroU32::new(raw) {
            Some(v) => Some(FlowKey(v)),
            None => None,
        }
    }

    /// Maps zero onto [`REMAPPED_ZERO_KEY`]; every other value is kept.
    #[inline]
    pub const fn from_raw_remapped(raw: u32) -> Self {
        match NonZeroU32::new(raw) {
            Some(v) => FlowKey(v),
            None => FlowKey(NonZeroU32::MAX),
        }
    }

    #[inline]
    pub const fn get(self) -> u32 {
        self.0.get()
    }
}

impl TryFrom<u32> for FlowKey {
    type Error = Error;

    fn try_from(raw: u32) -> Result<Self> {
        FlowKey::new(raw).ok_or_else(|| Error::param("key", "0 is the reserved empty-cell key"))
    }
}

impl From<FlowKey> for u32 {
    fn from(key: FlowKey) -> u32 {
        key.get()
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.get().fmt(f)
    }
}

/// An ordered packet stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<FlowKey>,
    /// Number of zero keys that were rewritten to [`REMAPPED_ZERO_KEY`].
    remapped_zeros: u64,
}

impl Trace {
    pub fn new(records: Vec<FlowKey>) -> Self {
        Self {
            records,
            remapped_zeros: 0,
        }
    }

    /// Builds a trace from raw keys, remapping zeros.
    pub fn from_raw(raw: impl IntoIterator<Item = u32>) -> Self {
        let mut remapped_zeros = 0;
        let records = raw
            .into_iter()
            .map(|v| {
                remapped_zeros += u64::from(v == 0);
                FlowKey::from_raw_remapped(v)
            })
            .collect();
        Self {
            records,
            remapped_zeros,
        }
    }

    pub fn records(&self) -> &[FlowKey] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn remapped_zeros(&self) -> u64 {
        self.remapped_zeros
    }

    pub fn iter(&self) -> impl Iterator<Item = FlowKey> + '_ {
        self.records.iter().copied()
    }
}

impl FromIterator<FlowKey> for Trace {
    fn from_iter<I: IntoIterator<Item = FlowKey>>(iter: I) -> Self {
        Trace::new(iter.into_iter().collect())
    }
}

/// On-disk trace encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    /// Little-endian 32-bit keys, no header.
    BinaryU32,
    /// One unsigned decimal key per LF-terminated line.
    Csv,
}

impl TraceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceFormat::BinaryU32 => "binary-u32",
            TraceFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-u32" | "bin" => Ok(TraceFormat::BinaryU32),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(Error::param(
                "trace_format",
                format!("unknown format `{other}` (expected binary-u32 or csv)"),
            )),
        }
    }
}

pub fn load_trace(path: impl AsRef<Path>, format: TraceFormat) -> Result<Trace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        TraceFormat::BinaryU32 => decode_binary(path, &bytes),
        TraceFormat::Csv => decode_csv(path, &bytes),
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Trace> {
    let tail = bytes.len() % 4;
    if tail != 0 {
        return Err(Error::TraceBytes {
            path: path.to_owned(),
            offset: (bytes.len() - tail) as u64,
            message: format!("file length {} is not a multiple of 4", bytes.len()),
        });
    }
    Ok(Trace::from_raw(
        bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])),
    ))
}

fn decode_csv(path: &Path, bytes: &[u8]) -> Result<Trace> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::TraceBytes {
        path: path.to_owned(),
        offset: e.valid_up_to() as u64,
        message: "invalid UTF-8".into(),
    })?;
    let mut raw = Vec::with_capacity(text.len() / 4);
    let mut lines = text.split('\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() && lines.peek().is_none() {
            break;
        }
        let value = line.trim().parse::<u32>().map_err(|e| Error::TraceLine {
            path: path.to_owned(),
            line: i as u64 + 1,
            message: format!("`{line}` is not an unsigned 32-bit decimal: {e}"),
        })?;
        raw.push(value);
    }
    Ok(Trace::from_raw(raw))
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let written = trace.iter().try_for_each(|k| match format {
        TraceFormat::BinaryU32 => out.write_all(&k.get().to_le_bytes()),
        TraceFormat::Csv => writeln!(out, "{}", k.get()),
    });
    written
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parameters of a synthetic Zipf trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub packets: usize,
    pub distinct: usize,
    pub skew: f64,
    pub seed: u64,
}

impl Default for ZipfSpec {
    fn default() -> Self {
        Self {
            packets: 1_000_000,
            distinct: 100_000,
            skew: 1.0,
            seed: 1,
        }
    }
}

/// Key assigned to the flow of popularity `rank` (1-based) by
/// [`generate_zipf`].
///
/// Ranks go through the murmur3 32-bit finalizer, a bijection on `u32`
/// fixing zero, so distinct ranks get distinct non-zero keys that look
/// unstructured to the sketches.
pub fn zipf_rank_key(rank: u32) -> FlowKey {
    let mut h = rank;
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    FlowKey::new(h).expect("rank must be at least 1")
}

/// Draws `packets` i.i.d. records from a Zipf(`skew`) law over `distinct`
/// ranked flows by inverse-CDF sampling.
pub fn generate_zipf(spec: &ZipfSpec) -> Result<Trace> {
    let ZipfSpec {
        packets,
        distinct,
        skew,
        seed,
    } = *spec;
    if packets == 0 {
        return Err(Error::param("packets", "must be at least 1"));
    }
    if distinct == 0 || distinct > u32::MAX as usize {
        return Err(Error::param("distinct", "must be in 1..=2^32-1"));
    }
    if !(skew > 0.0 && skew.is_finite()) {
        return Err(Error::param(
            "skew",
            format!("must be a positive real, got {skew}"),
        ));
    }

    let mut cumulative = Vec::with_capacity(distinct);
    let mut total = 0.0f64;
    for rank in 1..=distinct {
        total += (rank as f64).powf(-skew);
        cumulative.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..packets)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(distinct - 1);
            zipf_rank_key(idx as u32 + 1)
        })
        .collect();
    Ok(Trace::new(records))
}
