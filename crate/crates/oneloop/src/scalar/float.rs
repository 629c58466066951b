//! Arbitrary-precision binary floating point on top of `BigInt`.
//!
//! A value is `mant * 2^exp` with `|mant|` normalized to exactly `prec`
//! bits (or zero). This is enough float for the engine: the exact
//! backends do all the proving, the float backend exists for numeric
//! verification at high precision (default 256 bits), so we favour
//! simple round-half-away arithmetic over IEEE semantics.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone)]
pub struct BigFloat {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

impl BigFloat {
    pub fn zero(prec: u32) -> Self {
        BigFloat { mant: BigInt::zero(), exp: 0, prec }
    }

    pub fn from_bigint(v: BigInt, prec: u32) -> Self {
        Self::make(v, 0, prec)
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Self::make(BigInt::from(v), 0, prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        if r.is_zero() {
            return Self::zero(prec);
        }
        let num = r.numer().clone();
        let den = r.denom().clone();
        // Scale the numerator so that the integer quotient holds prec+2 bits.
        let shift = (den.bits() as i64 + prec as i64 + 2) - num.bits() as i64;
        let scaled = if shift >= 0 { num << shift as u64 } else { num >> (-shift) as u64 };
        let q = rounded_div(&scaled, &den);
        Self::make(q, -shift, prec)
    }

    /// Exact rational value of this float (mant * 2^exp).
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(self.mant.clone() << self.exp as u64)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    fn make(mant: BigInt, exp: i64, prec: u32) -> Self {
        let mut f = BigFloat { mant, exp, prec };
        f.normalize();
        f
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        let bits = self.mant.bits() as i64;
        let want = self.prec as i64;
        if bits > want {
            let drop = (bits - want) as u64;
            let half = BigInt::one() << (drop - 1);
            let (q, r) = self.mant.div_rem(&(BigInt::one() << drop));
            let rabs = r.abs();
            self.mant = if rabs >= half {
                if self.mant.is_negative() { q - 1 } else { q + 1 }
            } else {
                q
            };
            self.exp += drop as i64;
            // Rounding can carry into one extra bit.
            if self.mant.bits() as i64 > want {
                self.mant >>= 1u8;
                self.exp += 1;
            }
        } else if bits < want {
            let up = (want - bits) as u64;
            self.mant <<= up;
            self.exp -= up as i64;
        }
    }

    pub fn neg(&self) -> Self {
        BigFloat { mant: -&self.mant, exp: self.exp, prec: self.prec }
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.max(other.prec);
        if self.is_zero() {
            let mut r = other.clone();
            r.prec = prec;
            r.normalize();
            return r;
        }
        if other.is_zero() {
            let mut r = self.clone();
            r.prec = prec;
            r.normalize();
            return r;
        }
        // If magnitudes are too far apart the smaller one is invisible.
        let hi_a = self.exp + self.mant.bits() as i64;
        let hi_b = other.exp + other.mant.bits() as i64;
        let guard = prec as i64 + 4;
        if hi_a - hi_b > guard {
            let mut r = self.clone();
            r.prec = prec;
            r.normalize();
            return r;
        }
        if hi_b - hi_a > guard {
            let mut r = other.clone();
            r.prec = prec;
            r.normalize();
            return r;
        }
        let exp = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - exp) as u64;
        let b = &other.mant << (other.exp - exp) as u64;
        Self::make(a + b, exp, prec)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec.max(other.prec);
        Self::make(&self.mant * &other.mant, self.exp + other.exp, prec)
    }

    pub fn div(&self, other: &Self) -> Self {
        assert!(!other.is_zero(), "BigFloat division by zero");
        let prec = self.prec.max(other.prec);
        if self.is_zero() {
            return Self::zero(prec);
        }
        let shift = prec as u64 + 3;
        let num = &self.mant << shift;
        let q = rounded_div(&num, &other.mant);
        Self::make(q, self.exp - other.exp - shift as i64, prec)
    }

    pub fn abs(&self) -> Self {
        BigFloat { mant: self.mant.abs(), exp: self.exp, prec: self.prec }
    }

    /// Nonnegative square root; `None` for negative input.
    pub fn sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        if self.is_zero() {
            return Some(self.clone());
        }
        // Scale to an integer with ~2*(prec+2) bits and an even exponent.
        let mut m = self.mant.clone();
        let mut e = self.exp;
        let want_bits = 2 * (self.prec as i64 + 2);
        let mut shift = want_bits - m.bits() as i64;
        if (e - shift) % 2 != 0 {
            shift += 1;
        }
        if shift >= 0 {
            m <<= shift as u64;
        } else {
            m >>= (-shift) as u64;
        }
        e -= shift;
        let root = m.sqrt();
        Some(Self::make(root, e / 2, self.prec))
    }

    /// Integer q-th root of a nonnegative float.
    pub fn nth_root(&self, q: u32) -> Option<Self> {
        assert!(q >= 1);
        if q == 1 {
            return Some(self.clone());
        }
        if self.is_negative() {
            // Odd roots of negative numbers are fine.
            if q % 2 == 1 {
                return self.neg().nth_root(q).map(|r| r.neg());
            }
            return None;
        }
        if self.is_zero() {
            return Some(self.clone());
        }
        let mut m = self.mant.clone();
        let mut e = self.exp;
        let want_bits = q as i64 * (self.prec as i64 + 2);
        let mut shift = want_bits - m.bits() as i64;
        let rem = (e - shift).rem_euclid(q as i64);
        shift += rem;
        if shift >= 0 {
            m <<= shift as u64;
        } else {
            m >>= (-shift) as u64;
        }
        e -= shift;
        let root = m.nth_root(q);
        Some(Self::make(root, e / q as i64, self.prec))
    }

    /// Integer power with exact exponent handling.
    pub fn powi(&self, mut e: i64) -> Self {
        if e == 0 {
            return Self::from_i64(1, self.prec);
        }
        let mut base = if e < 0 {
            e = -e;
            Self::from_i64(1, self.prec).div(self)
        } else {
            self.clone()
        };
        let mut acc = Self::from_i64(1, self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// exp(x) by argument halving plus Taylor series.
    pub fn exp(&self) -> Self {
        let prec = self.prec;
        if self.is_zero() {
            return Self::from_i64(1, prec);
        }
        // Halve until |x| < 1/2, then square back up.
        let half = BigFloat::from_rational(&BigRational::new(BigInt::one(), BigInt::from(2)), prec);
        let mut halvings = 0u32;
        let mut x = self.clone();
        while x.abs().cmp_val(&half) == Ordering::Greater {
            x = x.mul(&half);
            halvings += 1;
            assert!(halvings < 128, "exp argument out of supported range");
        }
        let mut term = Self::from_i64(1, prec);
        let mut sum = Self::from_i64(1, prec);
        let cutoff_exp = -(prec as i64) - 8;
        let mut k = 1i64;
        loop {
            term = term.mul(&x).div(&Self::from_i64(k, prec));
            sum = sum.add(&term);
            if term.is_zero() || term.exp + term.mant.bits() as i64 <= sum.exp + cutoff_exp {
                break;
            }
            k += 1;
            assert!(k < 10_000, "exp series failed to converge");
        }
        for _ in 0..halvings {
            sum = sum.mul(&sum);
        }
        sum
    }

    pub fn cmp_val(&self, other: &Self) -> Ordering {
        let sa = self.mant.sign();
        let sb = other.mant.sign();
        match (sa, sb) {
            (Sign::Minus, Sign::NoSign) | (Sign::Minus, Sign::Plus) | (Sign::NoSign, Sign::Plus) => {
                return Ordering::Less
            }
            (Sign::Plus, Sign::NoSign) | (Sign::Plus, Sign::Minus) | (Sign::NoSign, Sign::Minus) => {
                return Ordering::Greater
            }
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            _ => {}
        }
        // Same nonzero sign: compare magnitudes.
        let hi_a = self.exp + self.mant.bits() as i64;
        let hi_b = other.exp + other.mant.bits() as i64;
        let mag = if hi_a != hi_b {
            hi_a.cmp(&hi_b)
        } else {
            let exp = self.exp.min(other.exp);
            let a = self.mant.magnitude() << (self.exp - exp) as u64;
            let b = other.mant.magnitude() << (other.exp - exp) as u64;
            a.cmp(&b)
        };
        if sa == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }

    /// |self - other| <= tol * max(|self|, |other|, 1).
    pub fn approx_eq(&self, other: &Self, tol: &Self) -> bool {
        let diff = self.sub(other).abs();
        let mut scale = self.abs();
        if other.abs().cmp_val(&scale) == Ordering::Greater {
            scale = other.abs();
        }
        let one = Self::from_i64(1, self.prec.max(other.prec));
        if one.cmp_val(&scale) == Ordering::Greater {
            scale = one;
        }
        diff.cmp_val(&tol.mul(&scale)) != Ordering::Greater
    }

    /// 2^e as a float, for building tolerances like 2^-100.
    pub fn pow2(e: i64, prec: u32) -> Self {
        Self::make(BigInt::one(), e, prec)
    }
}

fn rounded_div(num: &BigInt, den: &BigInt) -> BigInt {
    let (q, r) = num.div_rem(den);
    let r2: BigInt = r.abs() << 1u8;
    if r2 >= den.abs() {
        if (num.is_negative()) != (den.is_negative()) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_val(other) == Ordering::Equal
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0.0");
        }
        // Decimal rendering with ~prec*log10(2) digits, trimmed.
        let digits = (self.prec as f64 * 0.30103).ceil() as i64 + 2;
        let r = self.to_rational();
        let neg = r.is_negative();
        let rabs = r.abs();
        let scale = BigInt::from(10u8).pow(digits as u32);
        let scaled = (rabs.numer() * &scale).div_floor(rabs.denom());
        let s = scaled.to_string();
        let (int_part, frac_part) = if s.len() as i64 > digits {
            let cut = s.len() - digits as usize;
            (s[..cut].to_string(), s[cut..].to_string())
        } else {
            ("0".to_string(), format!("{:0>width$}", s, width = digits as usize))
        };
        let frac = frac_part.trim_end_matches('0');
        let frac = if frac.is_empty() { "0" } else { frac };
        write!(f, "{}{}.{}", if neg { "-" } else { "" }, int_part, frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn roundtrip_and_arith() {
        let a = BigFloat::from_rational(&rat(1, 3), 256);
        let b = BigFloat::from_rational(&rat(3, 1), 256);
        let prod = a.mul(&b);
        let one = BigFloat::from_i64(1, 256);
        let tol = BigFloat::pow2(-250, 256);
        assert!(prod.approx_eq(&one, &tol));
    }

    #[test]
    fn sqrt_is_accurate() {
        let two = BigFloat::from_i64(2, 256);
        let r = two.sqrt().unwrap();
        let tol = BigFloat::pow2(-250, 256);
        assert!(r.mul(&r).approx_eq(&two, &tol));
    }

    #[test]
    fn nth_root_and_pow() {
        let x = BigFloat::from_rational(&rat(27, 8), 256);
        let r = x.nth_root(3).unwrap();
        let tol = BigFloat::pow2(-250, 256);
        assert!(r.approx_eq(&BigFloat::from_rational(&rat(3, 2), 256), &tol));
        let neg = BigFloat::from_i64(-8, 256);
        let c = neg.nth_root(3).unwrap();
        assert!(c.approx_eq(&BigFloat::from_i64(-2, 256), &tol));
    }

    #[test]
    fn exp_matches_square() {
        let one = BigFloat::from_i64(1, 256);
        let e1 = one.exp();
        let two = BigFloat::from_i64(2, 256);
        let e2 = two.exp();
        let tol = BigFloat::pow2(-240, 256);
        assert!(e1.mul(&e1).approx_eq(&e2, &tol));
    }

    #[test]
    fn ordering() {
        let a = BigFloat::from_rational(&rat(-5, 2), 64);
        let b = BigFloat::from_rational(&rat(1, 1000), 64);
        assert_eq!(a.cmp_val(&b), Ordering::Less);
        assert_eq!(b.cmp_val(&a), Ordering::Greater);
    }
}
