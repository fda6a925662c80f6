//! The interface shared by all heavy-hitter sketches, plus the eviction
//! parameter and report types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::FlowKey;

/// A streaming frequency summary that can enumerate its heavy hitters.
///
/// Implementations are single-writer: `insert` takes `&mut self`, reads may
/// run concurrently only while no insert is in flight.
pub trait HeavyHitterSketch {
    /// Records one packet of `key`.
    fn insert(&mut self, key: FlowKey);

    /// Estimated packet count of `key`; 0 when the sketch holds nothing for it.
    fn query(&self, key: FlowKey) -> u64;

    /// Every tracked flow whose estimate is at least `threshold`.
    fn report(&self, threshold: u64) -> HeavyHitterReport;

    fn name(&self) -> &'static str;
}

impl<S: HeavyHitterSketch + ?Sized> HeavyHitterSketch for Box<S> {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        (**self).insert(key)
    }

    fn query(&self, key: FlowKey) -> u64 {
        (**self).query(key)
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        (**self).report(threshold)
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// A sketch that does nothing; used to calibrate trace-iteration overhead.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopSketch;

impl HeavyHitterSketch for NoopSketch {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        std::hint::black_box(key);
    }

    fn query(&self, _key: FlowKey) -> u64 {
        0
    }

    fn report(&self, _threshold: u64) -> HeavyHitterReport {
        HeavyHitterReport::default()
    }

    fn name(&self) -> &'static str {
        "noop"
    }
}

/// Non-negative rational eviction parameter, compared without division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lambda {
    num: u32,
    den: u32,
}

impl Lambda {
    pub const ONE: Lambda = Lambda { num: 1, den: 1 };
    pub const EIGHT: Lambda = Lambda { num: 8, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::param("lambda", "denominator must be positive"));
        }
        let g = gcd(num, den);
        Ok(Lambda {
            num: num / g,
            den: den / g,
        })
    }

    pub fn from_integer(value: u32) -> Self {
        Lambda { num: value, den: 1 }
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// `votes > lambda * min_votes`
    #[inline]
    pub fn exceeded_by(self, votes: u32, min_votes: u32) -> bool {
        u64::from(votes) * u64::from(self.den) > u64::from(self.num) * u64::from(min_votes)
    }

    /// `votes >= lambda * min_votes`
    #[inline]
    pub fn reached_by(self, votes: u32, min_votes: u32) -> bool {
        u64::from(votes) * u64::from(self.den) >= u64::from(self.num) * u64::from(min_votes)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts `8`, `0.25` or `1/4`.
impl FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("lambda", format!("`{s}` is not a non-negative rational"));
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num = n.trim().parse().map_err(|_| bad())?;
            let den = d.trim().parse().map_err(|_| bad())?;
            return Lambda::new(num, den);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
            || frac.len() > 9
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        let g = {
            let (mut a, mut b) = (num, den);
            while b != 0 {
                (a, b) = (b, a % b);
            }
            a.max(1)
        };
        let (num, den) = (num / g, den / g);
        Lambda::new(
            u32::try_from(num).map_err(|_| bad())?,
            u32::try_from(den).map_err(|_| bad())?,
        )
    }
}

impl TryFrom<String> for Lambda {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Lambda> for String {
    fn from(l: Lambda) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub key: FlowKey,
    pub estimate: u64,
}

/// Flows reported above a threshold, in the reporting sketch's traversal order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyHitterReport {
    entries: Vec<ReportEntry>,
}

impl HeavyHitterReport {
    pub fn new(entries: Vec<ReportEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[ReportEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter()
    }

    pub fn estimate(&self, key: FlowKey) -> Option<u64> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.estimate)
    }

    pub(crate) fn push(&mut self, key: FlowKey, estimate: u64) {
        self.entries.push(ReportEntry { key, estimate });
    }
}

impl FromIterator<(FlowKey, u64)> for HeavyHitterReport {
    fn from_iter<I: IntoIterator<Item = (FlowKey, u64)>>(iter: I) -> Self {
        HeavyHitterReport::new(
            iter.into_iter()
                .map(|(key, estimate)| ReportEntry { key, estimate })
                .collect(),
        )
    }
}
