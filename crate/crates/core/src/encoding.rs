//! Bijections between search-space points and fixed-length bitstrings.
//!
//! Three-body points are triples of per-stage list positions inside a
//! [`ReducedSpace`]; they can be written as one flat binary number (basic),
//! as three Gray-coded fields (gray), or as three Gray-coded production
//! guided ranks (pggray). Twelve-body points use a field-wise Gray layout.
//! Bits are big-endian everywhere.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::catalog::{ProblemCatalog, SHOPS, STAGES};
use crate::error::{Error, Result};
use crate::freestage::{closeness_order, PgKey, ReducedSpace};

/// Reflected binary Gray code.
#[inline]
pub fn gray(n: u64) -> u64 {
    n ^ (n >> 1)
}

#[inline]
pub fn gray_inverse(mut g: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

/// Bits needed to address `n` values: ceil(log2(n)), 0 for n <= 1.
pub fn bit_width(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    fn push_value(&mut self, value: u64, width: usize) {
        for i in (0..width).rev() {
            self.0.push(((value >> i) & 1) as u8);
        }
    }

    fn read_value(&self, offset: usize, width: usize) -> u64 {
        self.0[offset..offset + width]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::parse("bitstring", format!("unexpected {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitString)
    }
}

/// A bijection between points (vectors of field values) and bitstrings.
pub trait Codec: Send + Sync {
    fn n_bits(&self) -> usize;
    /// Fails with [`Error::InvalidState`] for points outside the space.
    fn try_encode(&self, point: &[u32]) -> Result<BitString>;
    /// Like [`Codec::try_encode`] but panics on points outside the space.
    fn encode(&self, point: &[u32]) -> BitString {
        self.try_encode(point).expect("point outside the encoded space")
    }
    /// Fails with [`Error::InvalidState`] for codes outside the space or of
    /// the wrong length; never panics.
    fn decode(&self, bits: &BitString) -> Result<Vec<u32>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Basic,
    Gray,
    Pggray,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Basic, SchemeKind::Gray, SchemeKind::Pggray];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Basic => "basic",
            SchemeKind::Gray => "gray",
            SchemeKind::Pggray => "pggray",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(SchemeKind::Basic),
            "gray" => Ok(SchemeKind::Gray),
            "pggray" => Ok(SchemeKind::Pggray),
            other => Err(Error::parse("scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

/// One production-guided ordering: `order[rank]` is a list position and
/// `rank_of[position]` its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgOrder {
    pub order: Vec<u32>,
    pub rank_of: Vec<u32>,
}

impl PgOrder {
    fn new(order: Vec<u32>) -> Self {
        let mut rank_of = vec![0; order.len()];
        for (rank, &pos) in order.iter().enumerate() {
            rank_of[pos as usize] = rank as u32;
        }
        Self { order, rank_of }
    }
}

/// Production-guided orderings of a reduced space. Stage-1 states are
/// ranked by closeness to the annual target; the stage-2 ranking depends on
/// the chosen stage-1 state and the stage-3 ranking on stage 1 (default) or
/// stage 2 (chained). Conditional tables are built on first use.
#[derive(Debug)]
pub struct PgTables {
    space: Arc<ReducedSpace>,
    key: PgKey,
    first: PgOrder,
    second: Vec<OnceLock<PgOrder>>,
    third: Vec<OnceLock<PgOrder>>,
}

pub fn build_pg_order(space: Arc<ReducedSpace>, key: PgKey) -> PgTables {
    let first = PgOrder::new(closeness_order(space.stage(0), space.annual_target()));
    let [s1, s2, _] = space.stage_sizes();
    let third_len = match key {
        PgKey::FirstStage => s1,
        PgKey::Chained => s2,
    };
    PgTables {
        first,
        second: (0..s1).map(|_| OnceLock::new()).collect(),
        third: (0..third_len).map(|_| OnceLock::new()).collect(),
        space,
        key,
    }
}

impl PgTables {
    pub fn first(&self) -> &PgOrder {
        &self.first
    }

    /// Stage-2 ordering given the stage-1 list position.
    pub fn second(&self, first_pos: u32) -> &PgOrder {
        self.second[first_pos as usize].get_or_init(|| {
            let key = self.space.stage(0)[first_pos as usize].annual_estimate;
            PgOrder::new(closeness_order(self.space.stage(1), key))
        })
    }

    /// Stage-3 ordering given the stage-1 and stage-2 list positions.
    pub fn third(&self, first_pos: u32, second_pos: u32) -> &PgOrder {
        let (slot, estimate) = match self.key {
            PgKey::FirstStage => (
                first_pos,
                self.space.stage(0)[first_pos as usize].annual_estimate,
            ),
            PgKey::Chained => (
                second_pos,
                self.space.stage(1)[second_pos as usize].annual_estimate,
            ),
        };
        self.third[slot as usize].get_or_init(|| {
            PgOrder::new(closeness_order(self.space.stage(2), estimate))
        })
    }
}

/// Encoding of three-body points in a reduced space.
#[derive(Debug)]
pub struct TripleCodec {
    kind: SchemeKind,
    sizes: [u64; STAGES],
    widths: [usize; STAGES],
    total: u64,
    pg: Option<PgTables>,
}

impl TripleCodec {
    pub fn new(space: Arc<ReducedSpace>, kind: SchemeKind, key: PgKey) -> Self {
        let sizes = space.stage_sizes().map(|s| s as u64);
        let widths = sizes.map(bit_width);
        let total = space.total_size();
        let pg = (kind == SchemeKind::Pggray).then(|| build_pg_order(space, key));
        Self {
            kind,
            sizes,
            widths,
            total,
            pg,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn field_widths(&self) -> [usize; STAGES] {
        self.widths
    }

    pub fn pg_tables(&self) -> Option<&PgTables> {
        self.pg.as_ref()
    }

    /// Production-guided ranks of a triple of list positions.
    pub fn pg_ranks(&self, triple: [u32; STAGES]) -> [u32; STAGES] {
        let pg = self.pg.as_ref().expect("pggray codec");
        [
            pg.first().rank_of[triple[0] as usize],
            pg.second(triple[0]).rank_of[triple[1] as usize],
            pg.third(triple[0], triple[1]).rank_of[triple[2] as usize],
        ]
    }

    fn triple_of_pg_ranks(&self, ranks: [u32; STAGES]) -> [u32; STAGES] {
        let pg = self.pg.as_ref().expect("pggray codec");
        let a = pg.first().order[ranks[0] as usize];
        let b = pg.second(a).order[ranks[1] as usize];
        let c = pg.third(a, b).order[ranks[2] as usize];
        [a, b, c]
    }

    fn encode_fields(&self, fields: [u32; STAGES]) -> BitString {
        let mut out = BitString(Vec::with_capacity(self.n_bits()));
        for (&v, &width) in fields.iter().zip(&self.widths) {
            out.push_value(gray(v as u64), width);
        }
        out
    }

    fn decode_fields(&self, bits: &BitString) -> Result<[u32; STAGES]> {
        let mut fields = [0u32; STAGES];
        let mut offset = 0;
        for ((field, &width), &size) in fields.iter_mut().zip(&self.widths).zip(&self.sizes) {
            let v = gray_inverse(bits.read_value(offset, width));
            if v >= size {
                return Err(Error::InvalidState);
            }
            *field = v as u32;
            offset += width;
        }
        Ok(fields)
    }
}

impl Codec for TripleCodec {
    fn n_bits(&self) -> usize {
        match self.kind {
            SchemeKind::Basic => bit_width(self.total),
            SchemeKind::Gray | SchemeKind::Pggray => self.widths.iter().sum(),
        }
    }

    fn try_encode(&self, point: &[u32]) -> Result<BitString> {
        let triple: [u32; STAGES] = point.try_into().map_err(|_| Error::InvalidState)?;
        if (0..STAGES).any(|k| triple[k] as u64 >= self.sizes[k]) {
            return Err(Error::InvalidState);
        }
        Ok(match self.kind {
            SchemeKind::Basic => {
                let flat = (triple[0] as u64 * self.sizes[1] + triple[1] as u64) * self.sizes[2]
                    + triple[2] as u64;
                let mut out = BitString(Vec::new());
                out.push_value(flat, self.n_bits());
                out
            }
            SchemeKind::Gray => self.encode_fields(triple),
            SchemeKind::Pggray => self.encode_fields(self.pg_ranks(triple)),
        })
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<u32>> {
        if bits.len() != self.n_bits() {
            return Err(Error::InvalidState);
        }
        let triple = match self.kind {
            SchemeKind::Basic => {
                let flat = bits.read_value(0, bits.len());
                if flat >= self.total {
                    return Err(Error::InvalidState);
                }
                let c = flat % self.sizes[2];
                let rest = flat / self.sizes[2];
                [(rest / self.sizes[1]) as u32, (rest % self.sizes[1]) as u32, c as u32]
            }
            SchemeKind::Gray => self.decode_fields(bits)?,
            SchemeKind::Pggray => self.triple_of_pg_ranks(self.decode_fields(bits)?),
        };
        Ok(triple.to_vec())
    }
}

/// Twelve-body layout: six Gray-coded shift fields followed by six
/// Gray-coded rate fields, 0-based values. A point holds one value per shop:
/// `shift_index * n_rates + rate_index`.
#[derive(Debug, Clone)]
pub struct TwelveBodyCodec {
    n_shifts: u64,
    n_rates: u64,
    shift_width: usize,
    rate_width: usize,
}

impl TwelveBodyCodec {
    pub fn new(catalog: &ProblemCatalog) -> Self {
        Self::with_counts(catalog.n_shifts(), catalog.n_rates())
    }

    pub fn with_counts(n_shifts: usize, n_rates: usize) -> Self {
        Self {
            n_shifts: n_shifts as u64,
            n_rates: n_rates as u64,
            shift_width: bit_width(n_shifts as u64),
            rate_width: bit_width(n_rates as u64),
        }
    }
}

impl Codec for TwelveBodyCodec {
    fn n_bits(&self) -> usize {
        SHOPS * (self.shift_width + self.rate_width)
    }

    fn try_encode(&self, point: &[u32]) -> Result<BitString> {
        let limit = self.n_shifts * self.n_rates;
        if point.len() != SHOPS || point.iter().any(|&v| v as u64 >= limit) {
            return Err(Error::InvalidState);
        }
        let mut out = BitString(Vec::with_capacity(self.n_bits()));
        for &v in point {
            out.push_value(gray(v as u64 / self.n_rates), self.shift_width);
        }
        for &v in point {
            out.push_value(gray(v as u64 % self.n_rates), self.rate_width);
        }
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<u32>> {
        if bits.len() != self.n_bits() {
            return Err(Error::InvalidState);
        }
        let mut point = vec![0u32; SHOPS];
        for (j, p) in point.iter_mut().enumerate() {
            let s = gray_inverse(bits.read_value(j * self.shift_width, self.shift_width));
            let r = gray_inverse(bits.read_value(
                SHOPS * self.shift_width + j * self.rate_width,
                self.rate_width,
            ));
            if s >= self.n_shifts || r >= self.n_rates {
                return Err(Error::InvalidState);
            }
            *p = (s * self.n_rates + r) as u32;
        }
        Ok(point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::freestage::{reduce_space, DevMode};

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn fixed_space(sizes: [usize; 3]) -> Arc<ReducedSpace> {
        let c = default_catalog();
        let full = reduce_space(&c, 1.0, DevMode::No).unwrap();
        let stages = std::array::from_fn(|k| full.stage(k)[..sizes[k]].to_vec());
        Arc::new(ReducedSpace::from_lists(1.0, DevMode::No, 360000.0, stages).unwrap())
    }

    #[test]
    fn gray_examples() {
        assert_eq!(gray(0), 0);
        assert_eq!(gray(3), 2);
        assert_eq!(gray(4), 6);
        for n in 0..(1u64 << 13) {
            assert_eq!(gray_inverse(gray(n)), n);
            assert_eq!((gray(n) ^ gray(n + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn widths() {
        assert_eq!(bit_width(1), 0);
        assert_eq!(bit_width(2), 1);
        assert_eq!(bit_width(4), 2);
        assert_eq!(bit_width(5), 3);
        assert_eq!(bit_width(225), 8);
        assert_eq!(bit_width(5625), 13);
    }

    #[test]
    fn basic_examples() {
        let codec = TripleCodec::new(fixed_space([4, 4, 4]), SchemeKind::Basic, PgKey::FirstStage);
        assert_eq!(codec.encode(&[1, 2, 3]), bits("011011"));
        assert_eq!(codec.encode(&[0, 0, 0]), bits("000000"));
        assert_eq!(codec.decode(&bits("111111")).unwrap(), vec![3, 3, 3]);
        let odd = TripleCodec::new(fixed_space([3, 3, 3]), SchemeKind::Basic, PgKey::FirstStage);
        assert_eq!(odd.n_bits(), 5);
        assert!(matches!(odd.decode(&bits("11011")), Err(Error::InvalidState)));
        assert!(matches!(odd.decode(&bits("1101")), Err(Error::InvalidState)));
    }

    #[test]
    fn gray_field_examples() {
        let codec = TripleCodec::new(fixed_space([225, 225, 225]), SchemeKind::Gray, PgKey::FirstStage);
        assert_eq!(codec.n_bits(), 24);
        assert_eq!(codec.encode(&[0, 0, 0]), BitString::zeros(24));
        let a = codec.encode(&[10, 77, 3]);
        let b = codec.encode(&[10, 78, 3]);
        assert_eq!(a.hamming(&b), 1);
        // 225..255 in the first field is unused
        let g = gray(230);
        let mut raw: Vec<u8> = (0..8).rev().map(|i| ((g >> i) & 1) as u8).collect();
        raw.extend(vec![0u8; 16]);
        assert!(codec.decode(&BitString::from_bits(raw)).is_err());

        let c = default_catalog();
        let full = Arc::new(reduce_space(&c, 1.0, DevMode::Yes).unwrap());
        let yes = TripleCodec::new(full, SchemeKind::Gray, PgKey::FirstStage);
        assert_eq!(yes.field_widths(), [13, 13, 13]);
        assert_eq!(yes.n_bits(), 39);
    }

    #[test]
    fn pggray_leading_rank_is_closest_to_target() {
        let c = default_catalog();
        let space = Arc::new(reduce_space(&c, 0.05, DevMode::No).unwrap());
        let codec = TripleCodec::new(space.clone(), SchemeKind::Pggray, PgKey::FirstStage);
        let pg = codec.pg_tables().unwrap();
        let best = pg.first().order[0] as usize;
        let d = |i: usize| (space.stage(0)[i].annual_estimate - 360000.0).abs();
        assert!((0..space.stage_sizes()[0]).all(|i| d(best) <= d(i)));
        let b = pg.second(best as u32).order[0];
        let l = pg.third(best as u32, b).order[0];
        let code = codec.encode(&[best as u32, b, l]);
        assert!(code.bits().iter().all(|&x| x == 0));
    }

    #[test]
    fn pg_order_with_equal_estimates_is_identity() {
        let space = fixed_space([3, 4, 5]);
        let stages = std::array::from_fn(|k| {
            space
                .stage(k)
                .iter()
                .map(|a| crate::freestage::AllowedState {
                    annual_estimate: 1.0,
                    ..*a
                })
                .collect()
        });
        let flat = Arc::new(ReducedSpace::from_lists(1.0, DevMode::No, 1.0, stages).unwrap());
        let pg = build_pg_order(flat, PgKey::FirstStage);
        assert_eq!(pg.first().order, vec![0, 1, 2]);
        assert_eq!(pg.second(2).order, vec![0, 1, 2, 3]);
        assert_eq!(pg.third(1, 3).order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn twelve_body_examples() {
        let codec = TwelveBodyCodec::new(&default_catalog());
        assert_eq!(codec.n_bits(), 42);
        assert_eq!(codec.encode(&[0; 6]), BitString::zeros(42));
        let p = vec![74, 3, 12, 40, 0, 55];
        assert_eq!(codec.decode(&codec.encode(&p)).unwrap(), p);
        // shift field value 15 (gray 1000) is outside 0..14
        let mut raw = vec![0u8; 42];
        raw[0] = 1;
        assert!(codec.decode(&BitString::from_bits(raw)).is_err());
    }
}
