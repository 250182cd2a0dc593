//! Exact nonnegative indices of unbounded size.
//!
//! A value is stored as `mant << shift` with `mant` odd (or zero), so powers of
//! two such as `2^(3^20)` cost a few bytes instead of hundreds of megabytes.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

const LN2: f64 = std::f64::consts::LN_2;

/// Largest bit length that arithmetic helpers will materialize.
pub const MAX_EXACT_BITS: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BigIndex {
    mant: BigUint,
    shift: u64,
}

impl BigIndex {
    pub fn zero() -> Self {
        BigIndex { mant: BigUint::zero(), shift: 0 }
    }

    pub fn one() -> Self {
        BigIndex { mant: BigUint::one(), shift: 0 }
    }

    pub fn from_u64(n: u64) -> Self {
        Self::normalized(BigUint::from(n), 0)
    }

    pub fn from_biguint(n: BigUint) -> Self {
        Self::normalized(n, 0)
    }

    /// `2^e`.
    pub fn pow2(e: u64) -> Self {
        BigIndex { mant: BigUint::one(), shift: e }
    }

    /// `m * 2^e`.
    pub fn mul_pow2(m: u64, e: u64) -> Self {
        Self::normalized(BigUint::from(m), e)
    }

    fn normalized(mut mant: BigUint, mut shift: u64) -> Self {
        if mant.is_zero() {
            return Self::zero();
        }
        let tz = mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            mant >>= tz;
            shift += tz;
        }
        BigIndex { mant, shift }
    }

    /// `floor(e^x)` for `x >= 0`; exact for `x < 43`, 53 significant bits beyond.
    pub fn floor_exp(x: f64) -> Self {
        if !(x > 0.0) {
            return if x == 0.0 { Self::one() } else { Self::zero() };
        }
        if x < 43.0 {
            return Self::from_u64(x.exp().floor() as u64);
        }
        Self::floor_exp2(x / LN2)
    }

    /// `floor(2^y)` for `y >= 0`, with 53 significant bits.
    pub fn floor_exp2(y: f64) -> Self {
        if y < 62.0 {
            return Self::from_u64(y.exp2().floor() as u64);
        }
        let e = y.floor();
        let frac = y - e;
        let mant = (frac.exp2() * (1u64 << 52) as f64).floor() as u64;
        Self::normalized(BigUint::from(mant), e as u64 - 52)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    /// Number of binary digits (0 for zero).
    pub fn bits(&self) -> u64 {
        if self.is_zero() {
            0
        } else {
            self.mant.bits() + self.shift
        }
    }

    /// `floor(log2(self))`; panics on zero.
    pub fn floor_log2(&self) -> u64 {
        assert!(!self.is_zero(), "log2 of zero");
        self.bits() - 1
    }

    /// `floor(log2(self - c))` for `self >= 2c > 0`, without materializing.
    pub fn floor_log2_minus(&self, c: u64) -> u64 {
        let top = self.floor_log2();
        if c == 0 {
            return top;
        }
        match self.excess_over_top() {
            Some(r) if r < c => top - 1,
            _ => top,
        }
    }

    /// `self - 2^floor(log2 self)` when it fits in a `u64`.
    pub fn excess_over_top(&self) -> Option<u64> {
        if self.is_zero() {
            return None;
        }
        let mb = self.mant.bits();
        if mb == 1 {
            return Some(0);
        }
        if self.shift >= 63 {
            return None;
        }
        let mut m = self.mant.clone();
        m.set_bit(mb - 1, false);
        if m.bits() + self.shift > 63 {
            return None;
        }
        Some(m.to_u64().unwrap() << self.shift)
    }

    pub fn is_power_of_two(&self) -> bool {
        self.mant.is_one()
    }

    pub fn trailing_zeros(&self) -> u64 {
        self.shift
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.bits() > 64 {
            return None;
        }
        (self.mant.clone() << self.shift).to_u64()
    }

    pub fn to_biguint(&self) -> BigUint {
        assert!(self.bits() <= MAX_EXACT_BITS, "index too large to materialize");
        self.mant.clone() << self.shift
    }

    /// Top bits of the mantissa as a float and the binary exponent they carry.
    pub fn split(&self) -> (f64, u64) {
        let mb = self.mant.bits();
        if mb <= 64 {
            (self.mant.to_u64().unwrap() as f64, self.shift)
        } else {
            let top = (&self.mant >> (mb - 64)).to_u64().unwrap();
            (top as f64, self.shift + (mb - 64))
        }
    }

    /// Nearest double; `inf` above the double range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.bits() > 1024 {
            return f64::INFINITY;
        }
        let (m, e) = self.split();
        m * (e as f64).exp2()
    }

    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (m, e) = self.split();
        m.log2() + e as f64
    }

    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (m, e) = self.split();
        m.ln() + e as f64 * LN2
    }

    /// `ln(self / other)`, with the binary exponents subtracted exactly.
    pub fn ln_ratio(&self, other: &BigIndex) -> f64 {
        let (ma, ea) = self.split();
        let (mb, eb) = other.split();
        (ma / mb).ln() + (ea as i128 - eb as i128) as f64 * LN2
    }

    /// `self / other` as a double (may under- or overflow).
    pub fn ratio(&self, other: &BigIndex) -> f64 {
        let (ma, ea) = self.split();
        let (mb, eb) = other.split();
        (ma / mb) * ((ea as i128 - eb as i128) as f64).exp2()
    }

    /// `ln(self + k)`, accurate for any magnitude of `self`.
    pub fn ln_offset(&self, k: f64) -> f64 {
        if self.bits() <= 52 {
            return (self.to_f64() + k).ln();
        }
        self.ln() + (k / self.to_f64_scaled()).ln_1p()
    }

    fn to_f64_scaled(&self) -> f64 {
        let v = self.to_f64();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    pub fn add_u64(&self, k: u64) -> BigIndex {
        if k == 0 {
            return self.clone();
        }
        Self::normalized(self.to_biguint() + BigUint::from(k), 0)
    }

    /// `self - k`, or `None` when negative.
    pub fn checked_sub_u64(&self, k: u64) -> Option<BigIndex> {
        if k == 0 {
            return Some(self.clone());
        }
        let v = self.to_biguint();
        let kk = BigUint::from(k);
        if v < kk {
            None
        } else {
            Some(Self::normalized(v - kk, 0))
        }
    }

    pub fn mul_u64(&self, k: u64) -> BigIndex {
        Self::normalized(&self.mant * BigUint::from(k), self.shift)
    }

    /// `floor(lambda * self)` for `lambda > 0`, exact.
    pub fn mul_floor(&self, lambda: f64) -> BigIndex {
        assert!(lambda > 0.0 && lambda.is_finite());
        // lambda = lm * 2^le exactly, lm an odd-or-even 53-bit integer
        let (lm, le) = decompose(lambda);
        let prod = &self.mant * BigUint::from(lm);
        let e = self.shift as i64 + le;
        if e >= 0 {
            Self::normalized(prod, e as u64)
        } else {
            Self::normalized(prod >> ((-e) as u64), 0)
        }
    }

    /// `floor(self / 2^k)`.
    pub fn shr(&self, k: u64) -> BigIndex {
        if k <= self.shift {
            BigIndex { mant: self.mant.clone(), shift: self.shift - k }
        } else {
            Self::normalized(&self.mant >> (k - self.shift), 0)
        }
    }

    pub fn shl(&self, k: u64) -> BigIndex {
        if self.is_zero() {
            return Self::zero();
        }
        BigIndex { mant: self.mant.clone(), shift: self.shift + k }
    }
}

/// Exact decomposition `x = m * 2^e` of a finite positive double.
fn decompose(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

impl From<u64> for BigIndex {
    fn from(n: u64) -> Self {
        BigIndex::from_u64(n)
    }
}

impl Ord for BigIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.bits().cmp(&other.bits()) {
            Ordering::Equal => {}
            o => return o,
        }
        if self.is_zero() {
            return Ordering::Equal;
        }
        let s = self.shift.min(other.shift);
        let a = &self.mant << (self.shift - s);
        let b = &other.mant << (other.shift - s);
        a.cmp(&b)
    }
}

impl PartialOrd for BigIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits() <= 256 {
            write!(f, "{}", self.mant.clone() << self.shift)
        } else if self.shift == 0 {
            write!(f, "~2^{:.6}", self.log2())
        } else {
            write!(f, "{}*2^{}", self.mant, self.shift)
        }
    }
}

impl Serialize for BigIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_round_trip() {
        for n in [0u64, 1, 2, 3, 12, 1 << 40, (1 << 53) - 1, u64::MAX] {
            let b = BigIndex::from_u64(n);
            assert_eq!(b.to_u64(), Some(n));
        }
        assert_eq!(BigIndex::from_u64((1 << 53) - 1).to_f64(), ((1u64 << 53) - 1) as f64);
    }

    #[test]
    fn huge_powers_are_cheap() {
        let k20 = BigIndex::pow2(3u64.pow(20));
        assert_eq!(k20.log2(), 3u64.pow(20) as f64);
        assert!(k20.is_power_of_two());
        let q20 = BigIndex::pow2(2 * 3u64.pow(20));
        assert!((q20.ln_ratio(&k20) - 3u64.pow(20) as f64 * LN2).abs() < 1e-6);
        assert!(k20 < q20);
    }

    #[test]
    fn mul_floor_exact() {
        let p = BigIndex::from_u64(1000);
        assert_eq!(p.mul_floor(2.0).to_u64(), Some(2000));
        assert_eq!(p.mul_floor(0.5).to_u64(), Some(500));
        assert_eq!(BigIndex::from_u64(7).mul_floor(0.5).to_u64(), Some(3));
        assert_eq!(BigIndex::from_u64(10).mul_floor(1.5).to_u64(), Some(15));
        let big = BigIndex::pow2(5000);
        assert_eq!(big.mul_floor(3.0), BigIndex::mul_pow2(3, 5000));
    }

    #[test]
    fn ordering_mixed_shapes() {
        let a = BigIndex::mul_pow2(3, 100);
        let b = BigIndex::pow2(101);
        let c = BigIndex::pow2(102);
        assert!(b < a && a < c);
        assert_eq!(BigIndex::mul_pow2(4, 10), BigIndex::pow2(12));
    }

    #[test]
    fn floor_log2_minus_cases() {
        assert_eq!(BigIndex::from_u64(9).floor_log2_minus(1), 3);
        assert_eq!(BigIndex::from_u64(9).floor_log2_minus(2), 2);
        assert_eq!(BigIndex::pow2(500).floor_log2_minus(1), 499);
        assert_eq!(BigIndex::pow2(500).add_u64(1).floor_log2_minus(1), 500);
        assert_eq!(BigIndex::pow2(500).add_u64(1).floor_log2_minus(2), 499);
        assert_eq!(BigIndex::mul_pow2(3, 500).floor_log2_minus(2), 501);
    }

    #[test]
    fn floor_exp_matches() {
        assert_eq!(BigIndex::floor_exp(1.0).to_u64(), Some(2));
        assert_eq!(BigIndex::floor_exp(10.0).to_u64(), Some(22026));
        let b = BigIndex::floor_exp(1000.0);
        assert!((b.ln() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn ln_offset_large() {
        let p = BigIndex::pow2(200);
        let want = 200.0 * LN2;
        assert!((p.ln_offset(1.0) - want).abs() < 1e-12);
        let q = BigIndex::from_u64(1_000_000);
        assert!((q.ln_offset(1.0) - 1_000_001f64.ln()).abs() < 1e-14);
    }
}
