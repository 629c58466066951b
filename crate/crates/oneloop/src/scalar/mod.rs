//! Scalar coefficient domain: exact rationals, quadratic extension towers,
//! or high-precision binary floats.
//!
//! The rational and extension backends never round; equality there is
//! exact. The float backend records its precision and compares with a
//! tolerance derived from it. Rationals promote silently into either of
//! the other two backends (so integer literals are cheap to write);
//! mixing extension and float values is a programming error and panics,
//! because every public operation validates its backend up front.

pub mod ext;
pub mod float;

use crate::error::{Error, Result};
pub use ext::{rational_nth_root, rational_sqrt, ExtElem, Tower};
pub use float::BigFloat;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_FLOAT_PREC: u32 = 256;

/// Which coefficient domain a computation runs in.
#[derive(Debug, Clone)]
pub enum Backend {
    Rational,
    Extension(Arc<Tower>),
    Float(u32),
}

impl Backend {
    pub fn zero(&self) -> Scalar {
        match self {
            Backend::Rational => Scalar::Rat(BigRational::zero()),
            Backend::Extension(t) => Scalar::Ext(ExtElem::from_rational(t, BigRational::zero())),
            Backend::Float(p) => Scalar::Flt(BigFloat::zero(*p)),
        }
    }

    pub fn from_rational(&self, r: &BigRational) -> Scalar {
        match self {
            Backend::Rational => Scalar::Rat(r.clone()),
            Backend::Extension(t) => Scalar::Ext(ExtElem::from_rational(t, r.clone())),
            Backend::Float(p) => Scalar::Flt(BigFloat::from_rational(r, *p)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Rational => "rational",
            Backend::Extension(_) => "ext",
            Backend::Float(_) => "float",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Scalar {
    Rat(BigRational),
    Ext(ExtElem),
    Flt(BigFloat),
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar::Rat(BigRational::zero())
    }

    pub fn one() -> Scalar {
        Scalar::Rat(BigRational::one())
    }

    pub fn from_int(v: i64) -> Scalar {
        Scalar::Rat(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_frac(n: i64, d: i64) -> Scalar {
        Scalar::Rat(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn backend(&self) -> Backend {
        match self {
            Scalar::Rat(_) => Backend::Rational,
            Scalar::Ext(e) => Backend::Extension(e.tower.clone()),
            Scalar::Flt(f) => Backend::Float(f.precision()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rat(r) => r.is_zero(),
            Scalar::Ext(e) => e.is_zero(),
            Scalar::Flt(f) => f.is_zero(),
        }
    }

    /// Exact rational payload, when the value is (representable as) one.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Scalar::Rat(r) => Some(r.clone()),
            Scalar::Ext(e) => e.is_rational(),
            Scalar::Flt(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let r = match self {
            Scalar::Rat(r) => r.clone(),
            Scalar::Ext(_) => return f64::NAN,
            Scalar::Flt(f) => f.to_rational(),
        };
        let num = r.numer();
        let den = r.denom();
        // Good enough for diagnostics.
        let fnum: f64 = num.to_string().parse().unwrap_or(f64::NAN);
        let fden: f64 = den.to_string().parse().unwrap_or(f64::NAN);
        fnum / fden
    }

    fn promote_pair(a: &Scalar, b: &Scalar) -> (Scalar, Scalar) {
        match (a, b) {
            (Scalar::Rat(r), Scalar::Ext(e)) => (
                Scalar::Ext(ExtElem::from_rational(&e.tower, r.clone())),
                b.clone(),
            ),
            (Scalar::Ext(e), Scalar::Rat(r)) => (
                a.clone(),
                Scalar::Ext(ExtElem::from_rational(&e.tower, r.clone())),
            ),
            (Scalar::Rat(r), Scalar::Flt(f)) => (
                Scalar::Flt(BigFloat::from_rational(r, f.precision())),
                b.clone(),
            ),
            (Scalar::Flt(f), Scalar::Rat(r)) => (
                a.clone(),
                Scalar::Flt(BigFloat::from_rational(r, f.precision())),
            ),
            _ => (a.clone(), b.clone()),
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        let (a, b) = Scalar::promote_pair(self, other);
        match (a, b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => Scalar::Rat(x + y),
            (Scalar::Ext(x), Scalar::Ext(y)) => Scalar::Ext(x.add(&y).expect("tower mismatch")),
            (Scalar::Flt(x), Scalar::Flt(y)) => Scalar::Flt(x.add(&y)),
            _ => panic!("cannot mix extension and float scalars"),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rat(r) => Scalar::Rat(-r),
            Scalar::Ext(e) => Scalar::Ext(e.neg()),
            Scalar::Flt(f) => Scalar::Flt(f.neg()),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        let (a, b) = Scalar::promote_pair(self, other);
        match (a, b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => Scalar::Rat(x * y),
            (Scalar::Ext(x), Scalar::Ext(y)) => Scalar::Ext(x.mul(&y).expect("tower mismatch")),
            (Scalar::Flt(x), Scalar::Flt(y)) => Scalar::Flt(x.mul(&y)),
            _ => panic!("cannot mix extension and float scalars"),
        }
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar> {
        if other.is_zero() {
            return Err(Error::DivisionByNonUnit);
        }
        let (a, b) = Scalar::promote_pair(self, other);
        Ok(match (a, b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => Scalar::Rat(x / y),
            (Scalar::Ext(x), Scalar::Ext(y)) => {
                Scalar::Ext(x.mul(&y.inverse()?).expect("tower mismatch"))
            }
            (Scalar::Flt(x), Scalar::Flt(y)) => Scalar::Flt(x.div(&y)),
            _ => panic!("cannot mix extension and float scalars"),
        })
    }

    pub fn inv(&self) -> Result<Scalar> {
        Scalar::one().div(self)
    }

    pub fn mul_rat(&self, r: &BigRational) -> Scalar {
        self.mul(&Scalar::Rat(r.clone()))
    }

    /// Square root honoring the backend's representability rules.
    pub fn sqrt(&self) -> Result<Scalar> {
        match self {
            Scalar::Rat(r) => {
                if r.is_negative() {
                    return Err(Error::RootNotRepresentable(format!("sqrt({r}) over Q")));
                }
                rational_sqrt(r)
                    .map(Scalar::Rat)
                    .ok_or_else(|| Error::RootNotRepresentable(format!(
                        "sqrt({r}) is irrational; use an extension or float backend"
                    )))
            }
            Scalar::Ext(e) => Ok(Scalar::Ext(e.sqrt()?)),
            Scalar::Flt(f) => f
                .sqrt()
                .map(Scalar::Flt)
                .ok_or_else(|| Error::RootNotRepresentable("sqrt of negative float".into())),
        }
    }

    /// q-th root honoring the backend's representability rules.
    pub fn nth_root(&self, q: u32) -> Result<Scalar> {
        if q == 1 {
            return Ok(self.clone());
        }
        if q == 2 {
            return self.sqrt();
        }
        match self {
            Scalar::Rat(r) => rational_nth_root(r, q).map(Scalar::Rat).ok_or_else(|| {
                Error::RootNotRepresentable(format!("{q}-th root of {r} over Q"))
            }),
            Scalar::Ext(e) => {
                let r = e.is_rational().ok_or_else(|| {
                    Error::RootNotRepresentable("q-th root of tower element".into())
                })?;
                rational_nth_root(&r, q)
                    .map(|v| Scalar::Ext(ExtElem::from_rational(&e.tower, v)))
                    .ok_or_else(|| {
                        Error::RootNotRepresentable(format!("{q}-th root of {r} in tower"))
                    })
            }
            Scalar::Flt(f) => f
                .nth_root(q)
                .map(Scalar::Flt)
                .ok_or_else(|| Error::RootNotRepresentable("even root of negative float".into())),
        }
    }

    pub fn pow_int(&self, e: i64) -> Result<Scalar> {
        if e >= 0 {
            let mut acc = Scalar::one();
            for _ in 0..e {
                acc = acc.mul(self);
            }
            Ok(acc)
        } else {
            self.pow_int(-e)?.inv()
        }
    }

    /// a^(p/q) where the required q-th root must exist in the backend.
    pub fn pow_rational(&self, p: i64, q: u32) -> Result<Scalar> {
        let root = self.nth_root(q)?;
        root.pow_int(p)
    }

    /// Exact equality for exact backends; tolerance-based for floats
    /// (relative 2^(8 - prec)).
    pub fn equals(&self, other: &Scalar) -> bool {
        let (a, b) = Scalar::promote_pair(self, other);
        match (&a, &b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => x == y,
            (Scalar::Ext(x), Scalar::Ext(y)) => x == y,
            (Scalar::Flt(x), Scalar::Flt(y)) => {
                let prec = x.precision().max(y.precision());
                let tol = BigFloat::pow2(8 - prec as i64, prec);
                x.approx_eq(y, &tol)
            }
            _ => false,
        }
    }

    /// Exact structural equality (used for base-point identity).
    pub fn identical(&self, other: &Scalar) -> bool {
        let (a, b) = Scalar::promote_pair(self, other);
        match (&a, &b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => x == y,
            (Scalar::Ext(x), Scalar::Ext(y)) => x == y,
            (Scalar::Flt(x), Scalar::Flt(y)) => x == y,
            _ => false,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rat(r) => write!(f, "{r}"),
            Scalar::Ext(e) => write!(f, "{e}"),
            Scalar::Flt(x) => write!(f, "{x}"),
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.equals(other)
    }
}

/// Convenience: exact rational from a pair of machine integers.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_backend_is_exact() {
        let a = Scalar::from_frac(1, 3);
        let b = Scalar::from_frac(1, 6);
        let s = a.add(&b);
        assert!(s.equals(&Scalar::from_frac(1, 2)));
        assert!(Scalar::from_frac(2, 4).equals(&Scalar::from_frac(1, 2)));
    }

    #[test]
    fn sqrt_rules_per_backend() {
        assert!(Scalar::from_int(9).sqrt().unwrap().equals(&Scalar::from_int(3)));
        assert!(Scalar::from_int(3).sqrt().is_err());
        let t = Tower::new(vec![3]).unwrap();
        let b = Backend::Extension(t);
        let three = b.from_rational(&rat(3, 1));
        let r = three.sqrt().unwrap();
        assert!(r.mul(&r).equals(&three));
        let f = Backend::Float(128).from_rational(&rat(3, 1));
        let rf = f.sqrt().unwrap();
        assert!(rf.mul(&rf).equals(&f));
    }

    #[test]
    fn pow_rational_exactness() {
        let x = Scalar::from_frac(27, 8);
        let r = x.pow_rational(-1, 3).unwrap();
        assert!(r.equals(&Scalar::from_frac(2, 3)));
        assert!(Scalar::from_int(2).pow_rational(1, 3).is_err());
    }
}
