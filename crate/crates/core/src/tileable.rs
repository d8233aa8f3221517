//! Tileable and tiled reals, alpha-frequencies, near/far predicates, B/SB
//! membership via partitions, and epsilon-density with constructive
//! threshold witnesses.

use crate::exactnum::{ExactError, Lat, LatCtx, QuadReal};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Errors raised by the tileable layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TileError {
    /// Parameters violate their invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Frequency of the zero vector is undefined.
    #[error("frequency of the zero vector is undefined")]
    ZeroFrequency,
    /// A frequency band is malformed or unusable.
    #[error("invalid frequency band [{0}, {1}]: {2}")]
    InvalidBand(String, String, String),
    /// A density construction failed to certify itself.
    #[error("density witness construction failed: {0}")]
    WitnessFailed(String),
    /// Word text could not be parsed.
    #[error("cannot parse tiled word: {0}")]
    ParseWord(String),
    /// Exact arithmetic failure.
    #[error(transparent)]
    Exact(#[from] ExactError),
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// The two tile lengths and the target alpha-frequency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Short tile length.
    pub alpha: QuadReal,
    /// Long tile length.
    pub beta: QuadReal,
    /// Target frequency of alpha tiles, strictly between 0 and 1.
    #[serde(with = "ratio_text")]
    pub rho: BigRational,
}

impl Params {
    /// Validated constructor.
    pub fn new(alpha: QuadReal, beta: QuadReal, rho: BigRational) -> Result<Self, TileError> {
        let bad = |m: &str| Err(TileError::InvalidParams(m.to_string()));
        if alpha.signum() <= 0 || beta.signum() <= 0 {
            return bad("alpha and beta must be positive");
        }
        if alpha.try_cmp(&beta)? != std::cmp::Ordering::Less {
            return bad("alpha must be smaller than beta");
        }
        if !crate::exactnum::real_gcd(&alpha, &beta).is_zero() {
            return bad("alpha and beta must be rationally independent");
        }
        if !(rho.is_positive() && rho < BigRational::one()) {
            return bad("rho must lie strictly inside (0, 1)");
        }
        Ok(Params { alpha, beta, rho })
    }

    /// alpha = 1, beta = sqrt(2), rho = 1/2.
    pub fn default_params() -> Self {
        Params::new(QuadReal::one(), QuadReal::sqrt(2).unwrap(), rat(1, 2)).unwrap()
    }

    /// Value `p*alpha + q*beta`.
    pub fn value(&self, v: TileVector) -> QuadReal {
        self.alpha.scale_int(v.p as i64) + self.beta.scale_int(v.q as i64)
    }

    /// Value of a signed combination `p*alpha + q*beta`.
    pub fn value_signed(&self, p: i64, q: i64) -> QuadReal {
        self.alpha.scale_int(p) + self.beta.scale_int(q)
    }

    /// Radicand shared by the parameters (0 if both are rational, which
    /// cannot happen for valid parameters).
    pub fn radicand(&self) -> u64 {
        self.alpha.d().max(self.beta.d())
    }

    /// `min{alpha, 1}`.
    pub fn min_alpha_one(&self) -> QuadReal {
        QuadReal::min_of(&self.alpha, &QuadReal::one())
    }

    /// Numerator and denominator of rho as i128.
    pub fn rho_parts(&self) -> (i128, i128) {
        (
            self.rho.numer().to_i128().expect("rho numerator"),
            self.rho.denom().to_i128().expect("rho denominator"),
        )
    }
}

/// A tileable real `p*alpha + q*beta` recorded by its tile counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TileVector {
    /// Number of alpha tiles.
    pub p: u64,
    /// Number of beta tiles.
    pub q: u64,
}

impl TileVector {
    /// Builds `(p, q)`.
    pub fn new(p: u64, q: u64) -> Self {
        TileVector { p, q }
    }

    /// Number of tiles.
    pub fn len(&self) -> u64 {
        self.p + self.q
    }

    /// True for the zero vector.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Componentwise sum.
    pub fn plus(&self, o: TileVector) -> TileVector {
        TileVector::new(self.p + o.p, self.q + o.q)
    }
}

/// Exact alpha-frequency `p / (p + q)`.
pub fn freq_alpha(v: TileVector) -> Result<BigRational, TileError> {
    if v.is_empty() {
        return Err(TileError::ZeroFrequency);
    }
    Ok(BigRational::new(BigInt::from(v.p), BigInt::from(v.len())))
}

/// One tile of a tiled real.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Letter {
    /// A tile of length alpha.
    A,
    /// A tile of length beta.
    B,
}

/// A tiled real: an ordered word over the two tile lengths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TiledWord {
    /// Letters in order.
    pub letters: Vec<Letter>,
}

impl TiledWord {
    /// The empty word (the zero tiled real).
    pub fn empty() -> Self {
        TiledWord { letters: Vec::new() }
    }

    /// Number of letters.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    /// True for the empty word.
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Tile counts.
    pub fn counts(&self) -> TileVector {
        let p = self.letters.iter().filter(|l| **l == Letter::A).count() as u64;
        TileVector::new(p, self.letters.len() as u64 - p)
    }

    /// Value of the word.
    pub fn value(&self, params: &Params) -> QuadReal {
        params.value(self.counts())
    }

    /// Concatenation `self` then `o`.
    pub fn concat(&self, o: &TiledWord) -> TiledWord {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&o.letters);
        TiledWord { letters }
    }

    /// Balanced (Christoffel) arrangement of the given counts: letter `i` is
    /// alpha iff `floor((i+1)p/n) - floor(ip/n) = 1`.
    pub fn balanced(v: TileVector) -> TiledWord {
        let n = v.len() as u128;
        let p = v.p as u128;
        let letters = (0..n)
            .map(|i| {
                if ((i + 1) * p) / n - (i * p) / n == 1 {
                    Letter::A
                } else {
                    Letter::B
                }
            })
            .collect();
        TiledWord { letters }
    }

    /// Sub-word of letters `[i, j)`.
    pub fn slice(&self, i: usize, j: usize) -> TiledWord {
        TiledWord { letters: self.letters[i..j].to_vec() }
    }
}

impl fmt::Display for TiledWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .letters
            .iter()
            .map(|l| if *l == Letter::A { 'a' } else { 'b' })
            .collect();
        f.write_str(&s)
    }
}

impl FromStr for TiledWord {
    type Err = TileError;
    fn from_str(s: &str) -> Result<Self, TileError> {
        let letters = s
            .chars()
            .map(|c| match c {
                'a' => Ok(Letter::A),
                'b' => Ok(Letter::B),
                other => Err(TileError::ParseWord(format!("unexpected letter '{other}'"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(TiledWord { letters })
    }
}

impl Serialize for TiledWord {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TiledWord {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helper: rationals as `p/q` text.
pub mod ratio_text {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    /// Serializes a rational as text.
    pub fn serialize<S: Serializer>(x: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&x.to_string())
    }

    /// Parses a rational from text.
    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(de)?;
        BigRational::from_str(s.trim()).map_err(serde::de::Error::custom)
    }
}

/// Serde helper: vectors of rationals as text.
pub mod ratio_vec_text {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::str::FromStr;

    /// Serializes rationals as text.
    pub fn serialize<S: Serializer>(xs: &[BigRational], ser: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        v.serialize(ser)
    }

    /// Parses rationals from text.
    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(de)?;
        v.iter()
            .map(|s| BigRational::from_str(s.trim()).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A closed frequency interval `[lo, hi]` inside `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqBand {
    /// Lower end.
    #[serde(with = "ratio_text")]
    pub lo: BigRational,
    /// Upper end.
    #[serde(with = "ratio_text")]
    pub hi: BigRational,
}

impl FreqBand {
    /// Validated constructor.
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self, TileError> {
        if lo.is_negative() || hi > BigRational::one() || lo > hi {
            return Err(TileError::InvalidBand(lo.to_string(), hi.to_string(), "need 0 <= lo <= hi <= 1".into()));
        }
        Ok(FreqBand { lo, hi })
    }

    /// The whole interval `[0, 1]`.
    pub fn all() -> Self {
        FreqBand { lo: BigRational::zero(), hi: BigRational::one() }
    }

    /// Closed membership test.
    pub fn contains(&self, f: &BigRational) -> bool {
        &self.lo <= f && f <= &self.hi
    }

    /// Membership of a nonzero vector's frequency.
    pub fn contains_vec(&self, v: TileVector) -> bool {
        match freq_alpha(v) {
            Ok(f) => self.contains(&f),
            Err(_) => false,
        }
    }
}

/// All tile vectors with `lo <= value <= hi` (and frequency in `band` when
/// given), sorted by value.
pub fn enumerate_tileable(params: &Params, lo: &QuadReal, hi: &QuadReal, band: Option<&FreqBand>) -> Vec<TileVector> {
    let mut out = Vec::new();
    if hi.signum() < 0 || lo > hi {
        return out;
    }
    let qmax = (hi / &params.beta).floor().to_u64().unwrap_or(0);
    for q in 0..=qmax {
        let qb = params.beta.scale_int(q as i64);
        let pmin = ((lo - &qb) / &params.alpha).ceil();
        let pmin = if pmin.is_negative() { 0 } else { pmin.to_u64().unwrap_or(u64::MAX) };
        let pmax = ((hi - &qb) / &params.alpha).floor();
        if pmax.is_negative() {
            continue;
        }
        let pmax = pmax.to_u64().unwrap_or(0);
        for p in pmin..=pmax {
            let v = TileVector::new(p, q);
            if band.is_none_or(|b| b.contains_vec(v) || (v.is_empty() && false)) {
                out.push(v);
            }
        }
    }
    sort_by_value(params, &mut out);
    out
}

/// Sorts tile vectors by exact value.
pub fn sort_by_value(params: &Params, vs: &mut [TileVector]) {
    if let Ok(ctx) = LatCtx::covering([&params.alpha, &params.beta]) {
        let a = ctx.lat(&params.alpha).unwrap();
        let b = ctx.lat(&params.beta).unwrap();
        vs.sort_by(|x, y| {
            let vx = a.times(x.p as i128) + b.times(x.q as i128);
            let vy = a.times(y.p as i128) + b.times(y.q as i128);
            ctx.cmp(vx, vy)
        });
    } else {
        vs.sort_by_key(|v| params.value(*v));
    }
}

/// Outcome of an epsilon-density check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Density {
    /// Every admissible subinterval meets the point set.
    Dense,
    /// `U_{eps/2}(witness)` lies inside the interval and misses every point.
    Gap {
        /// Center of an empty subinterval of length eps.
        witness: QuadReal,
    },
}

impl Density {
    /// True when dense.
    pub fn is_dense(&self) -> bool {
        matches!(self, Density::Dense)
    }
}

/// Decides whether `points` is `eps`-dense in `[a, b]`: every `x` with
/// `U_{eps/2}(x)` inside `[a, b]` has a point in `U_{eps/2}(x)`.
///
/// On failure the witness is the midpoint of the largest offending gap,
/// preferring gaps bounded by interior points on both sides, then the leftmost.
pub fn eps_dense(points: &[QuadReal], a: &QuadReal, b: &QuadReal, eps: &QuadReal) -> Density {
    let mut inner: Vec<&QuadReal> = points.iter().filter(|p| *p > a && *p < b).collect();
    inner.sort();
    inner.dedup();
    // (position, strictly interior point)
    let mut seq: Vec<(&QuadReal, bool)> = Vec::with_capacity(inner.len() + 2);
    seq.push((a, false));
    seq.extend(inner.into_iter().map(|p| (p, true)));
    seq.push((b, false));
    let mut best: Option<(QuadReal, bool, usize)> = None;
    for (i, w) in seq.windows(2).enumerate() {
        let gap = w[1].0 - w[0].0;
        if gap < *eps {
            continue;
        }
        let bounded = w[0].1 && w[1].1;
        let better = match &best {
            None => true,
            Some((g, bd, _)) => gap > *g || (gap == *g && bounded && !*bd),
        };
        if better {
            best = Some((gap, bounded, i));
        }
    }
    match best {
        None => Density::Dense,
        Some((_, _, i)) => {
            let mid = (seq[i].0 + seq[i + 1].0).scale(&rat(1, 2));
            Density::Gap { witness: mid }
        }
    }
}

/// Ratio bound `alpha*eps / (2*beta)`: if `x/y` is below it then
/// `|fr(x+y) - fr(y)| < eps`.
pub fn freq_stability_threshold(params: &Params, eps_freq: &BigRational) -> QuadReal {
    params.alpha.scale(eps_freq) / params.beta.scale_int(2)
}

fn fr_cmp_rho(params: &Params, p: u64, q: u64) -> Option<std::cmp::Ordering> {
    if p + q == 0 {
        return None;
    }
    let f = BigRational::new(BigInt::from(p), BigInt::from(p + q));
    Some(f.cmp(&params.rho))
}

/// True when adding `n` tiles of the right type flips the frequency of `v`
/// across rho. The zero vector counts as near for every `n`.
pub fn is_n_near(params: &Params, v: TileVector, n: u64) -> bool {
    use std::cmp::Ordering::*;
    let Some(c) = fr_cmp_rho(params, v.p, v.q) else {
        return true;
    };
    let up = fr_cmp_rho(params, v.p + n, v.q).unwrap();
    let down = fr_cmp_rho(params, v.p, v.q + n).unwrap();
    (c != Greater && up != Less) || (c != Less && down != Greater)
}

/// True when removing `n` tiles of the majority type cannot move the
/// frequency of `v` across rho.
pub fn is_n_far(params: &Params, v: TileVector, n: u64) -> bool {
    use std::cmp::Ordering::*;
    let Some(c) = fr_cmp_rho(params, v.p, v.q) else {
        return false;
    };
    let low_ok = c == Greater
        || (v.q >= n && (fr_cmp_rho(params, v.p, v.q - n) != Some(Greater)));
    let high_ok = c == Less
        || (v.p >= n && (fr_cmp_rho(params, v.p - n, v.q) != Some(Less)));
    low_ok && high_ok
}

/// Checker for pieces of B-sets over one word, using prefix counts.
struct PieceRule<'a> {
    prefix_a: Vec<u32>,
    ctx: Option<(LatCtx, Lat, Lat, Lat)>,
    params: &'a Params,
    limit: &'a QuadReal,
    // |a*rd - rn*n| * ed <= en * rd * n
    rn: i128,
    rd: i128,
    en: i128,
    ed: i128,
}

impl<'a> PieceRule<'a> {
    fn new(params: &'a Params, word: &TiledWord, eta: &BigRational, limit: &'a QuadReal) -> Self {
        let mut prefix_a = Vec::with_capacity(word.len() + 1);
        let mut acc = 0u32;
        prefix_a.push(0);
        for l in &word.letters {
            if *l == Letter::A {
                acc += 1;
            }
            prefix_a.push(acc);
        }
        let ctx = LatCtx::covering([&params.alpha, &params.beta, limit]).ok().map(|c| {
            let a = c.lat(&params.alpha).unwrap();
            let b = c.lat(&params.beta).unwrap();
            let l = c.lat(limit).unwrap();
            (c, a, b, l)
        });
        let (rn, rd) = params.rho_parts();
        PieceRule {
            prefix_a,
            ctx,
            params,
            limit,
            rn,
            rd,
            en: eta.numer().to_i128().unwrap_or(i128::MAX / 4),
            ed: eta.denom().to_i128().unwrap_or(1),
        }
    }

    fn counts(&self, i: usize, j: usize) -> (i128, i128) {
        let a = (self.prefix_a[j] - self.prefix_a[i]) as i128;
        (a, (j - i) as i128 - a)
    }

    fn fits(&self, i: usize, j: usize) -> bool {
        let (a, b) = self.counts(i, j);
        match &self.ctx {
            Some((c, la, lb, ll)) => c.cmp(la.times(a) + lb.times(b), *ll) != std::cmp::Ordering::Greater,
            None => self.params.value(TileVector::new(a as u64, b as u64)) <= *self.limit,
        }
    }

    fn freq_ok(&self, i: usize, j: usize) -> bool {
        let (a, _) = self.counts(i, j);
        let n = (j - i) as i128;
        let dev = (a * self.rd - self.rn * n).abs();
        dev.saturating_mul(self.ed) <= self.en.saturating_mul(self.rd).saturating_mul(n)
    }

    /// Largest `j` such that the piece `(i, j]` fits under the limit.
    fn max_end(&self, i: usize, len: usize) -> usize {
        let (mut lo, mut hi) = (i, len);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.fits(i, mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

/// Cut positions of a partition of `word` into pieces of `B_eta[L]`, longest
/// feasible piece first at every cut. Returns the interior cut offsets plus
/// the final length; `None` when the word is not in `SB_eta[L]`.
pub fn partition_cuts(params: &Params, word: &TiledWord, eta: &BigRational, limit: &QuadReal) -> Option<Vec<usize>> {
    let len = word.len();
    if len == 0 {
        return Some(vec![0]);
    }
    let rule = PieceRule::new(params, word, eta, limit);
    let mut failed = vec![false; len + 1];
    let mut stack: Vec<(usize, usize)> = vec![(0, rule.max_end(0, len))];
    while let Some(&(i, next)) = stack.last() {
        if i == len {
            return Some(stack.iter().skip(1).map(|(p, _)| *p).collect());
        }
        let mut j = next;
        let mut pushed = false;
        while j > i {
            let cand = j;
            j -= 1;
            if !failed[cand] && rule.freq_ok(i, cand) {
                stack.last_mut().unwrap().1 = j;
                stack.push((cand, rule.max_end(cand, len)));
                pushed = true;
                break;
            }
        }
        if !pushed {
            failed[i] = true;
            stack.pop();
        }
    }
    None
}

/// Partition of `word` into consecutive pieces of `B_eta[L]`; `None` when no
/// partition exists. The zero word is a single (empty) piece.
pub fn partition_into_b(params: &Params, word: &TiledWord, eta: &BigRational, limit: &QuadReal) -> Option<Vec<TiledWord>> {
    let cuts = partition_cuts(params, word, eta, limit)?;
    if word.is_empty() {
        return Some(vec![TiledWord::empty()]);
    }
    let mut out = Vec::with_capacity(cuts.len());
    let mut start = 0;
    for c in cuts {
        out.push(word.slice(start, c));
        start = c;
    }
    Some(out)
}

/// True when a single nonempty sub-word is a B-piece.
pub fn is_b_piece(params: &Params, word: &TiledWord, eta: &BigRational, limit: &QuadReal) -> bool {
    if word.is_empty() {
        return true;
    }
    let f = freq_alpha(word.counts()).unwrap();
    word.value(params) <= *limit && (f - &params.rho).abs() <= *eta
}

/// Options for [`density_threshold_witness_with`].
#[derive(Clone, Debug, Default)]
pub struct WitnessOptions {
    /// Require every family member to be this many tiles far from rho.
    pub far: u64,
    /// Require generator words to lie in `SB_eta[L]` for each `(eta, L)`.
    pub sb_levels: Vec<(BigRational, QuadReal)>,
}

/// Constructive family `{k*x + s_i + c : k >= k_min}` of tileable reals with
/// frequencies in a band, epsilon-dense in `[threshold, infinity)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityWitness {
    /// Density scale.
    pub eps: QuadReal,
    /// Frequency band of all members.
    pub band: FreqBand,
    /// Period vector x.
    pub x: TileVector,
    /// Shift coefficients `(p_i, q_i)` with `|p_i|, |q_i| <= m`.
    pub shifts: Vec<(i64, i64)>,
    /// Offset `c = m*(alpha + beta)`.
    pub m: u64,
    /// Smallest admissible multiplier.
    pub k_min: u64,
    /// Members are eps-dense from here on.
    pub threshold: QuadReal,
    /// Far-ness guaranteed for members.
    pub far: u64,
}

impl DensityWitness {
    /// Tile vector of the member with multiplier `k` and shift index `i`.
    pub fn member(&self, k: u64, i: usize) -> TileVector {
        let (sp, sq) = self.shifts[i];
        TileVector::new(
            (k * self.x.p) as i64 as u64 + (sp + self.m as i64) as u64,
            (k * self.x.q) as i64 as u64 + (sq + self.m as i64) as u64,
        )
    }

    /// Members with value in `[lo, hi]`, sorted by value.
    pub fn members_between(&self, params: &Params, lo: &QuadReal, hi: &QuadReal) -> Vec<TileVector> {
        let xv = params.value(self.x);
        let c = params.value_signed(self.m as i64, self.m as i64);
        let mut out = Vec::new();
        for (i, (sp, sq)) in self.shifts.iter().enumerate() {
            let base = &c + params.value_signed(*sp, *sq);
            let kmin = ((lo - &base) / &xv).ceil();
            let kmin = if kmin.is_negative() { 0 } else { kmin.to_u64().unwrap_or(u64::MAX) };
            let kmin = kmin.max(self.k_min);
            let mut k = kmin;
            loop {
                let v = self.member(k, i);
                if params.value(v) > *hi {
                    break;
                }
                out.push(v);
                k += 1;
            }
        }
        sort_by_value(params, &mut out);
        out.dedup();
        out
    }

    /// Re-checks density on `[from, from + width]`.
    pub fn check_window(&self, params: &Params, from: &QuadReal, width: &QuadReal) -> Density {
        let to = from + width;
        let pts: Vec<QuadReal> = self
            .members_between(params, from, &to)
            .into_iter()
            .map(|v| params.value(v))
            .collect();
        eps_dense(&pts, from, &to, &self.eps)
    }
}

/// Density witness without extra constraints.
pub fn density_threshold_witness(params: &Params, eps: &QuadReal, band: &FreqBand) -> Result<DensityWitness, TileError> {
    density_threshold_witness_with(params, eps, band, &WitnessOptions::default())
}

/// Builds a [`DensityWitness`] for `band` at scale `eps`, optionally
/// requiring far-ness and SB membership of the generator words.
pub fn density_threshold_witness_with(
    params: &Params,
    eps: &QuadReal,
    band: &FreqBand,
    opts: &WitnessOptions,
) -> Result<DensityWitness, TileError> {
    let bad = |m: &str| TileError::InvalidBand(band.lo.to_string(), band.hi.to_string(), m.into());
    if band.lo >= band.hi {
        return Err(bad("band must have positive width"));
    }
    if eps.signum() <= 0 {
        return Err(TileError::WitnessFailed("eps must be positive".into()));
    }
    let mid = (&band.lo + &band.hi) / rat(2, 1);
    let zeta = (&band.hi - &band.lo) / rat(4, 1);
    // Shortest x whose frequency is within zeta of the band centre.
    let x = (1u64..)
        .find_map(|n| {
            let nf = BigRational::from_integer(BigInt::from(n));
            let c = (&mid * &nf).floor().to_integer().to_u64().unwrap_or(0);
            [c, c + 1].into_iter().filter(|p| *p <= n).find_map(|p| {
                let f = rat(p as i64, n as i64);
                ((&f - &mid).abs() < zeta).then(|| TileVector::new(p, n - p))
            })
        })
        .unwrap();
    let fx = freq_alpha(x).unwrap();
    if opts.far > 0 && fx == params.rho {
        return Err(bad("far-ness needs a band away from rho"));
    }
    let xv = params.value(x);
    let (m, shifts) = dense_shifts(params, &xv, eps)?;
    let mut w = DensityWitness {
        eps: eps.clone(),
        band: band.clone(),
        x,
        shifts,
        m,
        k_min: 0,
        threshold: QuadReal::zero(),
        far: opts.far,
    };
    let ok_at = |w: &DensityWitness, k: u64| -> bool {
        (0..w.shifts.len()).all(|i| {
            let v = w.member(k, i);
            band.contains_vec(v) && (opts.far == 0 || is_n_far(params, v, opts.far))
        })
    };
    // Frequencies of k -> k*x + t approach fr(x) monotonically, so the
    // admissible multipliers form a ray; find its start.
    let mut hi = 1u64;
    while !ok_at(&w, hi) {
        hi = hi.checked_mul(2).ok_or_else(|| TileError::WitnessFailed("multiplier overflow".into()))?;
    }
    let mut lo = 0u64;
    if ok_at(&w, 0) {
        hi = 0;
    }
    while lo + 1 < hi {
        let midk = (lo + hi) / 2;
        if ok_at(&w, midk) {
            hi = midk;
        } else {
            lo = midk;
        }
    }
    let mut k = hi;
    // SB membership of the generators; longer generators are tried on failure.
    let mut attempts = 0;
    loop {
        let all_ok = opts.sb_levels.iter().all(|(eta, limit)| {
            let xw = TiledWord::balanced(x);
            partition_cuts(params, &xw, eta, limit).is_some()
                && (0..w.shifts.len()).all(|i| {
                    partition_cuts(params, &TiledWord::balanced(w.member(k, i)), eta, limit).is_some()
                })
        });
        if all_ok {
            break;
        }
        attempts += 1;
        if attempts > 12 {
            return Err(TileError::WitnessFailed("generators never entered the SB sets".into()));
        }
        k = (k * 2).max(1);
    }
    w.k_min = k;
    w.threshold = xv.scale_int(k as i64) + params.value_signed(m as i64, m as i64);
    let width = &xv + eps;
    match w.check_window(params, &w.threshold, &width) {
        Density::Dense => Ok(w),
        Density::Gap { witness } => Err(TileError::WitnessFailed(format!(
            "family not dense near {witness} ({})",
            crate::exactnum::approx_text(&witness)
        ))),
    }
}

/// Finds `m` and shifts `s_i = p_i*alpha + q_i*beta` in `[0, x)` with
/// `|p_i|, |q_i| <= m` whose cyclic gaps modulo `x` are all below `eps`.
fn dense_shifts(params: &Params, xv: &QuadReal, eps: &QuadReal) -> Result<(u64, Vec<(i64, i64)>), TileError> {
    let ctx = LatCtx::covering([&params.alpha, &params.beta, xv, eps])?;
    let la = ctx.lat(&params.alpha)?;
    let lb = ctx.lat(&params.beta)?;
    let lx = ctx.lat(xv)?;
    let le = ctx.lat(eps)?;
    let mut m: i64 = 1;
    loop {
        let mut cands: Vec<(f64, i64, i64, Lat)> = Vec::new();
        for q in -m..=m {
            for p in -m..=m {
                let v = la.times(p as i128) + lb.times(q as i128);
                if ctx.signum(v) >= 0 && ctx.cmp(v, lx) == std::cmp::Ordering::Less {
                    cands.push((ctx.approx(v), p, q, v));
                }
            }
        }
        cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        cands.sort_by(|a, b| ctx.cmp(a.3, b.3));
        cands.dedup_by(|a, b| a.3 == b.3);
        if let Some(kept) = thin_cover(&ctx, &cands, lx, le) {
            return Ok((m as u64, kept));
        }
        if m > 4000 {
            return Err(TileError::WitnessFailed("no dense shift set found".into()));
        }
        m += (m / 4).max(1);
    }
}

/// Greedy thinning of sorted candidates keeping cyclic gaps below `eps`.
fn thin_cover(ctx: &LatCtx, cands: &[(f64, i64, i64, Lat)], x: Lat, eps: Lat) -> Option<Vec<(i64, i64)>> {
    if cands.is_empty() {
        return None;
    }
    let lt = |a: Lat, b: Lat| ctx.cmp(a, b) == std::cmp::Ordering::Less;
    for w in cands.windows(2) {
        if !lt(w[1].3 - w[0].3, eps) {
            return None;
        }
    }
    let first = cands[0].3;
    let last = cands[cands.len() - 1].3;
    if !lt(first + x - last, eps) {
        return None;
    }
    // Keep a point only when skipping it would open a gap of eps or more.
    let mut kept = vec![0usize];
    let mut i = 0;
    while i + 1 < cands.len() {
        let base = cands[*kept.last().unwrap()].3;
        let mut j = i + 1;
        while j + 1 < cands.len() && lt(cands[j + 1].3 - base, eps) {
            j += 1;
        }
        kept.push(j);
        i = j;
    }
    // The wrap gap from the last kept point back to the first must stay small.
    let lastk = cands[*kept.last().unwrap()].3;
    if !lt(first + x - lastk, eps) {
        kept.push(cands.len() - 1);
    }
    kept.dedup();
    Some(kept.into_iter().map(|k| (cands[k].1, cands[k].2)).collect())
}
