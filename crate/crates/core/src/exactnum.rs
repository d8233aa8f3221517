//! Exact arithmetic in a real quadratic field Q(sqrt(D)).
//!
//! A [`QuadReal`] is `r + s*sqrt(D)` with rational `r`, `s` and a square-free
//! radicand `D >= 2`. Values with `s = 0` are plain rationals and combine with
//! any radicand. Comparison is exact: the sign of `r + s*sqrt(D)` is decided
//! by comparing `r^2` with `s^2 * D`, never by floating point.
//!
//! [`LatCtx`] and [`Lat`] provide a fixed-denominator integer representation
//! `(x + y*sqrt(D)) / M` used by hot loops; every conversion back to
//! [`QuadReal`] is exact.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;
use thiserror::Error;

/// Errors raised by the exact-number layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    /// Two operands carry different radicands.
    #[error("mismatched radicands: sqrt({0}) vs sqrt({1})")]
    MismatchedRadicand(u64, u64),
    /// The radicand is not a square-free integer >= 2.
    #[error("radicand {0} is not a square-free integer >= 2")]
    InvalidRadicand(u64),
    /// Text could not be parsed as a canonical number.
    #[error("cannot parse '{0}' as an exact number")]
    Parse(String),
    /// Division by zero.
    #[error("division by zero")]
    DivisionByZero,
    /// A value does not fit the fixed-denominator lattice.
    #[error("value {0} does not lie on the lattice with denominator {1}")]
    OffLattice(String, i128),
}

/// Returns true when `d` is a square-free integer at least 2.
pub fn is_valid_radicand(d: u64) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2u64;
    while k.saturating_mul(k) <= d {
        if d.is_multiple_of(k * k) {
            return false;
        }
        k += 1;
    }
    true
}

/// An exact element `r + s*sqrt(d)` of a real quadratic field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadReal {
    r: BigRational,
    s: BigRational,
    d: u64,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn merge_d(a: u64, b: u64) -> u64 {
    match (a, b) {
        (0, x) | (x, 0) => x,
        (x, y) if x == y => x,
        (x, y) => panic!("{}", ExactError::MismatchedRadicand(x, y)),
    }
}

impl QuadReal {
    /// Builds `r + s*sqrt(d)`; `d` is ignored when `s` is zero.
    pub fn new(r: BigRational, s: BigRational, d: u64) -> Result<Self, ExactError> {
        if !s.is_zero() && !is_valid_radicand(d) {
            return Err(ExactError::InvalidRadicand(d));
        }
        Ok(Self::raw(r, s, d))
    }

    fn raw(r: BigRational, s: BigRational, d: u64) -> Self {
        let d = if s.is_zero() { 0 } else { d };
        QuadReal { r, s, d }
    }

    /// The rational number `r`.
    pub fn rational(r: BigRational) -> Self {
        Self::raw(r, BigRational::zero(), 0)
    }

    /// The integer `n`.
    pub fn int(n: i64) -> Self {
        Self::rational(big(n))
    }

    /// The rational `n / m`.
    pub fn frac(n: i64, m: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(n), BigInt::from(m)))
    }

    /// Exactly `sqrt(d)`.
    pub fn sqrt(d: u64) -> Result<Self, ExactError> {
        Self::new(BigRational::zero(), BigRational::one(), d)
    }

    /// Zero.
    pub fn zero() -> Self {
        Self::int(0)
    }

    /// One.
    pub fn one() -> Self {
        Self::int(1)
    }

    /// Rational coefficient.
    pub fn r(&self) -> &BigRational {
        &self.r
    }

    /// Coefficient of `sqrt(D)`.
    pub fn s(&self) -> &BigRational {
        &self.s
    }

    /// Radicand, or 0 for a rational value.
    pub fn d(&self) -> u64 {
        self.d
    }

    /// True when the value is zero.
    pub fn is_zero(&self) -> bool {
        self.r.is_zero() && self.s.is_zero()
    }

    /// True when the value is rational.
    pub fn is_rational(&self) -> bool {
        self.s.is_zero()
    }

    /// The rational value, if the number is rational.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.is_rational() {
            Some(&self.r)
        } else {
            None
        }
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        let sr = sign_of(&self.r);
        let ss = sign_of(&self.s);
        if ss == 0 {
            return sr;
        }
        if sr == 0 || sr == ss {
            return ss;
        }
        // Opposite signs: compare r^2 with s^2 * D.
        let r2 = &self.r * &self.r;
        let s2d = &self.s * &self.s * big(self.d as i64);
        match r2.cmp(&s2d) {
            Ordering::Greater => sr,
            Ordering::Less => ss,
            Ordering::Equal => 0,
        }
    }

    /// Comparison that reports mismatched radicands instead of panicking.
    pub fn try_cmp(&self, other: &Self) -> Result<Ordering, ExactError> {
        if self.d != 0 && other.d != 0 && self.d != other.d {
            return Err(ExactError::MismatchedRadicand(self.d, other.d));
        }
        Ok(match (self - other).signum() {
            -1 => Ordering::Less,
            0 => Ordering::Equal,
            _ => Ordering::Greater,
        })
    }

    /// Absolute value.
    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Multiplies by a rational.
    pub fn scale(&self, k: &BigRational) -> Self {
        Self::raw(&self.r * k, &self.s * k, self.d)
    }

    /// Multiplies by an integer.
    pub fn scale_int(&self, k: i64) -> Self {
        self.scale(&big(k))
    }

    /// Exact floor as an integer.
    pub fn floor(&self) -> BigInt {
        if self.s.is_zero() {
            return self.r.floor().to_integer();
        }
        // Write the value as (p + q*sqrt(D)) / m with integers.
        let m = self.r.denom().lcm(self.s.denom());
        let p = self.r.numer() * (&m / self.r.denom());
        let q = self.s.numer() * (&m / self.s.denom());
        let t = (&q * &q * BigInt::from(self.d)).sqrt();
        let num = if q.is_positive() { p + t } else { p - t - BigInt::one() };
        num.div_floor(&m)
    }

    /// Exact ceiling as an integer.
    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// Floating-point approximation; never used for decisions.
    pub fn to_f64(&self) -> f64 {
        let r = ratio_to_f64(&self.r);
        if self.s.is_zero() {
            return r;
        }
        r + ratio_to_f64(&self.s) * (self.d as f64).sqrt()
    }

    /// Smaller of two values.
    pub fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// Larger of two values.
    pub fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

fn sign_of(x: &BigRational) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

fn ratio_to_f64(x: &BigRational) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let n = x.numer().to_f64().unwrap_or(f64::NAN);
    let d = x.denom().to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Decimal rendering with 12 significant digits, prefixed by `~`.
pub fn approx_text(x: &QuadReal) -> String {
    let v = x.to_f64();
    if v == 0.0 {
        return "~0".to_string();
    }
    let digits = 12i32;
    let mag = v.abs().log10().floor() as i32;
    let decimals = (digits - 1 - mag).max(0) as usize;
    format!("~{:.*}", decimals, v)
}

impl PartialOrd for QuadReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadReal {
    /// Exact total order. Panics on mismatched radicands; use
    /// [`QuadReal::try_cmp`] to get an error instead.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.try_cmp(other) {
            Ok(o) => o,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Neg for &QuadReal {
    type Output = QuadReal;
    fn neg(self) -> QuadReal {
        QuadReal::raw(-&self.r, -&self.s, self.d)
    }
}

impl Neg for QuadReal {
    type Output = QuadReal;
    fn neg(self) -> QuadReal {
        -&self
    }
}

impl Add<&QuadReal> for &QuadReal {
    type Output = QuadReal;
    fn add(self, o: &QuadReal) -> QuadReal {
        let d = merge_d(self.d, o.d);
        QuadReal::raw(&self.r + &o.r, &self.s + &o.s, d)
    }
}

impl Sub<&QuadReal> for &QuadReal {
    type Output = QuadReal;
    fn sub(self, o: &QuadReal) -> QuadReal {
        let d = merge_d(self.d, o.d);
        QuadReal::raw(&self.r - &o.r, &self.s - &o.s, d)
    }
}

impl Mul<&QuadReal> for &QuadReal {
    type Output = QuadReal;
    fn mul(self, o: &QuadReal) -> QuadReal {
        let d = merge_d(self.d, o.d);
        let dd = big(d as i64);
        let r = &self.r * &o.r + &self.s * &o.s * dd;
        let s = &self.r * &o.s + &self.s * &o.r;
        QuadReal::raw(r, s, d)
    }
}

impl Div<&QuadReal> for &QuadReal {
    type Output = QuadReal;
    /// Exact division. Panics on a zero divisor.
    fn div(self, o: &QuadReal) -> QuadReal {
        assert!(!o.is_zero(), "{}", ExactError::DivisionByZero);
        if o.is_rational() {
            return self.scale(&o.r.recip());
        }
        let d = merge_d(self.d, o.d);
        let conj = QuadReal::raw(o.r.clone(), -&o.s, d);
        let norm = &o.r * &o.r - &o.s * &o.s * big(d as i64);
        (self * &conj).scale(&norm.recip())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<QuadReal> for QuadReal {
            type Output = QuadReal;
            fn $m(self, o: QuadReal) -> QuadReal {
                (&self).$m(&o)
            }
        }
        impl $tr<&QuadReal> for QuadReal {
            type Output = QuadReal;
            fn $m(self, o: &QuadReal) -> QuadReal {
                (&self).$m(o)
            }
        }
        impl $tr<QuadReal> for &QuadReal {
            type Output = QuadReal;
            fn $m(self, o: QuadReal) -> QuadReal {
                self.$m(&o)
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&QuadReal> for QuadReal {
    fn add_assign(&mut self, o: &QuadReal) {
        *self = &*self + o;
    }
}

impl SubAssign<&QuadReal> for QuadReal {
    fn sub_assign(&mut self, o: &QuadReal) {
        *self = &*self - o;
    }
}

impl std::iter::Sum for QuadReal {
    fn sum<I: Iterator<Item = QuadReal>>(iter: I) -> QuadReal {
        iter.fold(QuadReal::zero(), |a, b| a + b)
    }
}

impl<'a> std::iter::Sum<&'a QuadReal> for QuadReal {
    fn sum<I: Iterator<Item = &'a QuadReal>>(iter: I) -> QuadReal {
        iter.fold(QuadReal::zero(), |a, b| a + b)
    }
}

fn fmt_ratio(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn fmt_surd(coef: &BigRational, d: u64) -> String {
    if coef.is_one() {
        format!("sqrt({d})")
    } else {
        format!("{}*sqrt({d})", fmt_ratio(coef))
    }
}

impl fmt::Display for QuadReal {
    /// Canonical text: `p/q + r/s*sqrt(D)` with zero terms omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.s.is_zero() {
            return write!(f, "{}", fmt_ratio(&self.r));
        }
        let neg = self.s.is_negative();
        let mag = self.s.abs();
        if self.r.is_zero() {
            let sign = if neg { "-" } else { "" };
            return write!(f, "{sign}{}", fmt_surd(&mag, self.d));
        }
        let op = if neg { "-" } else { "+" };
        write!(f, "{} {op} {}", fmt_ratio(&self.r), fmt_surd(&mag, self.d))
    }
}

impl fmt::Debug for QuadReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn parse_ratio(t: &str) -> Option<BigRational> {
    let t = t.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n, d))
    } else {
        BigInt::from_str(t).ok().map(BigRational::from_integer)
    }
}

fn parse_term(t: &str) -> Option<(BigRational, BigRational, u64)> {
    let t = t.trim();
    if let Some(pos) = t.find("sqrt(") {
        let rest = &t[pos + 5..];
        let close = rest.find(')')?;
        // Optional trailing divisor, as in `sqrt(2)/40`.
        let post = rest[close + 1..].trim();
        let div = if post.is_empty() {
            BigRational::one()
        } else {
            let k: BigInt = post.strip_prefix('/')?.trim().parse().ok()?;
            if k.is_zero() || k.is_negative() {
                return None;
            }
            BigRational::from_integer(k)
        };
        let d: u64 = rest[..close].trim().parse().ok()?;
        let pre = t[..pos].trim();
        let coef = if pre.is_empty() {
            BigRational::one()
        } else {
            parse_ratio(pre.strip_suffix('*')?)?
        };
        Some((BigRational::zero(), coef / div, d))
    } else {
        Some((parse_ratio(t)?, BigRational::zero(), 0))
    }
}

impl FromStr for QuadReal {
    type Err = ExactError;
    /// Parses sums of rational and `c*sqrt(D)` terms, e.g. `3 - 2*sqrt(2)`
    /// or `1 + sqrt(2)/40`.
    fn from_str(text: &str) -> Result<Self, ExactError> {
        let err = || ExactError::Parse(text.to_string());
        let cleaned: String = text.split_whitespace().collect();
        if cleaned.is_empty() {
            return Err(err());
        }
        // Split into signed terms at top-level + and - (not after '/' or '*').
        let bytes = cleaned.as_bytes();
        let mut terms: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        for (i, &c) in bytes.iter().enumerate() {
            let ch = c as char;
            let is_sep = (ch == '+' || ch == '-')
                && !(i > 0 && (bytes[i - 1] == b'/' || bytes[i - 1] == b'*'));
            if is_sep {
                if !cur.is_empty() {
                    terms.push((neg, std::mem::take(&mut cur)));
                } else if i > 0 {
                    return Err(err());
                }
                neg = ch == '-';
            } else {
                cur.push(ch);
            }
        }
        if cur.is_empty() {
            return Err(err());
        }
        terms.push((neg, cur));
        let mut r = BigRational::zero();
        let mut s = BigRational::zero();
        let mut d = 0u64;
        for (neg, t) in terms {
            let (tr, ts, td) = parse_term(&t).ok_or_else(err)?;
            let sign = if neg { -BigRational::one() } else { BigRational::one() };
            r += tr * &sign;
            if !ts.is_zero() {
                if d != 0 && d != td {
                    return Err(ExactError::MismatchedRadicand(d, td));
                }
                if !is_valid_radicand(td) {
                    return Err(ExactError::InvalidRadicand(td));
                }
                d = td;
                s += ts * &sign;
            }
        }
        Ok(QuadReal::raw(r, s, d))
    }
}

impl Serialize for QuadReal {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QuadReal {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        QuadReal::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Greatest `c >= 0` such that `a` and `b` are integer multiples of `c`;
/// zero when `a` and `b` are rationally independent.
pub fn real_gcd(a: &QuadReal, b: &QuadReal) -> QuadReal {
    match (a.is_zero(), b.is_zero()) {
        (true, _) => return b.abs(),
        (_, true) => return a.abs(),
        _ => {}
    }
    let t = a / b;
    match t.as_rational() {
        None => QuadReal::zero(),
        // a = t*b with t = p/q in lowest terms: gcd = |b|/q.
        Some(t) => b.abs().scale(&BigRational::new(BigInt::one(), t.denom().clone())),
    }
}

/// Fixed-denominator lattice context: values `(x + y*sqrt(d)) / m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatCtx {
    /// Common denominator.
    pub m: i128,
    /// Radicand (0 when every value is rational).
    pub d: i128,
}

/// A lattice value `(x + y*sqrt(d)) / m` for a given [`LatCtx`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Lat {
    /// Rational numerator.
    pub x: i128,
    /// Surd numerator.
    pub y: i128,
}

impl Lat {
    /// Zero.
    pub const ZERO: Lat = Lat { x: 0, y: 0 };

    /// Integer multiple.
    pub fn times(self, k: i128) -> Lat {
        Lat {
            x: self.x.checked_mul(k).expect("lattice overflow"),
            y: self.y.checked_mul(k).expect("lattice overflow"),
        }
    }
}

impl Add for Lat {
    type Output = Lat;
    fn add(self, o: Lat) -> Lat {
        Lat {
            x: self.x.checked_add(o.x).expect("lattice overflow"),
            y: self.y.checked_add(o.y).expect("lattice overflow"),
        }
    }
}

impl Sub for Lat {
    type Output = Lat;
    fn sub(self, o: Lat) -> Lat {
        Lat {
            x: self.x.checked_sub(o.x).expect("lattice overflow"),
            y: self.y.checked_sub(o.y).expect("lattice overflow"),
        }
    }
}

impl Neg for Lat {
    type Output = Lat;
    fn neg(self) -> Lat {
        Lat { x: -self.x, y: -self.y }
    }
}

impl LatCtx {
    /// Smallest context containing every given value.
    pub fn covering<'a, I: IntoIterator<Item = &'a QuadReal>>(values: I) -> Result<Self, ExactError> {
        let mut m = BigInt::one();
        let mut d = 0u64;
        for v in values {
            m = m.lcm(v.r.denom()).lcm(v.s.denom());
            d = merge_checked(d, v.d)?;
        }
        let m = m
            .to_i128()
            .filter(|m| *m < (1i128 << 60))
            .ok_or_else(|| ExactError::OffLattice("denominator".into(), i128::MAX))?;
        Ok(LatCtx { m, d: d as i128 })
    }

    /// Converts a value onto the lattice.
    pub fn lat(&self, v: &QuadReal) -> Result<Lat, ExactError> {
        let off = || ExactError::OffLattice(v.to_string(), self.m);
        let m = BigRational::from_integer(BigInt::from(self.m));
        let x = &v.r * &m;
        let y = &v.s * &m;
        if !x.is_integer() || !y.is_integer() || (v.d != 0 && v.d as i128 != self.d) {
            return Err(off());
        }
        Ok(Lat {
            x: x.to_integer().to_i128().ok_or_else(off)?,
            y: y.to_integer().to_i128().ok_or_else(off)?,
        })
    }

    /// Converts back to an exact value.
    pub fn quad(&self, v: Lat) -> QuadReal {
        let m = BigInt::from(self.m);
        QuadReal::raw(
            BigRational::new(BigInt::from(v.x), m.clone()),
            BigRational::new(BigInt::from(v.y), m),
            self.d as u64,
        )
    }

    /// Exact sign of a lattice value.
    pub fn signum(&self, v: Lat) -> i32 {
        let sx = v.x.signum() as i32;
        let sy = v.y.signum() as i32;
        if sy == 0 {
            return sx;
        }
        if sx == 0 || sx == sy {
            return sy;
        }
        let (x2, y2d) = match (
            v.x.checked_mul(v.x),
            v.y.checked_mul(v.y).and_then(|t| t.checked_mul(self.d)),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => return self.signum_big(v),
        };
        match x2.cmp(&y2d) {
            Ordering::Greater => sx,
            Ordering::Less => sy,
            Ordering::Equal => 0,
        }
    }

    fn signum_big(&self, v: Lat) -> i32 {
        let x = BigInt::from(v.x);
        let y = BigInt::from(v.y);
        let x2 = &x * &x;
        let y2d = &y * &y * BigInt::from(self.d);
        let sx = if x.sign() == Sign::Minus { -1 } else { 1 };
        match x2.cmp(&y2d) {
            Ordering::Greater => sx,
            Ordering::Less => -sx,
            Ordering::Equal => 0,
        }
    }

    /// Exact comparison of two lattice values.
    pub fn cmp(&self, a: Lat, b: Lat) -> Ordering {
        self.signum(a - b).cmp(&0)
    }

    /// Strict test `|v| < bound`.
    pub fn abs_lt(&self, v: Lat, bound: Lat) -> bool {
        self.signum(bound - v) > 0 && self.signum(bound + v) > 0
    }

    /// Floating-point approximation of the real value.
    pub fn approx(&self, v: Lat) -> f64 {
        (v.x as f64 + v.y as f64 * (self.d as f64).sqrt()) / self.m as f64
    }
}

fn merge_checked(a: u64, b: u64) -> Result<u64, ExactError> {
    match (a, b) {
        (0, x) | (x, 0) => Ok(x),
        (x, y) if x == y => Ok(x),
        (x, y) => Err(ExactError::MismatchedRadicand(x, y)),
    }
}
