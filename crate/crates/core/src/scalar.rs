//! Number types the oracles and the ellipsoid are generic over.
//!
//! Exact work uses [`Rational`] or `i64`; the ellipsoid runs either on `f64`
//! or on [`Fixed`], a binary fixed-point number backed by a big integer.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::market::Rational;

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_int(v: i64) -> Self;
}

/// A scalar that also supports division and square roots, as the ellipsoid needs.
pub trait Field: Scalar + Div<Output = Self> {
    fn sqrt(&self) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn to_rational(&self) -> Rational;
    fn to_f64(&self) -> f64;
    fn is_finite(&self) -> bool {
        true
    }
}

impl Scalar for i64 {
    fn zero() -> Self {
        0
    }
    fn from_int(v: i64) -> Self {
        v
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
}

impl Field for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn from_rational(r: &Rational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(<Rational as Zero>::zero)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
}

/// Fixed-point number `raw / 2^BITS`. Products and quotients truncate toward
/// negative infinity; sums are exact.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed<const BITS: u32>(pub BigInt);

impl<const BITS: u32> Fixed<BITS> {
    pub fn raw(&self) -> &BigInt {
        &self.0
    }
}

impl<const BITS: u32> Add for Fixed<BITS> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Fixed(self.0 + rhs.0)
    }
}

impl<const BITS: u32> Sub for Fixed<BITS> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Fixed(self.0 - rhs.0)
    }
}

impl<const BITS: u32> Mul for Fixed<BITS> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Fixed((self.0 * rhs.0) >> BITS)
    }
}

impl<const BITS: u32> Div for Fixed<BITS> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let num: BigInt = self.0 << BITS;
        Fixed(num_integer::Integer::div_floor(&num, &rhs.0))
    }
}

impl<const BITS: u32> Neg for Fixed<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Fixed(-self.0)
    }
}

impl<const BITS: u32> Scalar for Fixed<BITS> {
    fn zero() -> Self {
        Fixed(BigInt::zero())
    }
    fn from_int(v: i64) -> Self {
        Fixed(BigInt::from(v) << BITS)
    }
}

impl<const BITS: u32> Field for Fixed<BITS> {
    fn sqrt(&self) -> Self {
        if self.0.is_negative() {
            return Fixed(BigInt::zero());
        }
        Fixed((&self.0 << BITS).sqrt())
    }
    fn from_rational(r: &Rational) -> Self {
        let num: BigInt = r.numer() << BITS;
        Fixed(num_integer::Integer::div_floor(&num, r.denom()))
    }
    fn to_rational(&self) -> Rational {
        Rational::new(self.0.clone(), BigInt::one() << BITS)
    }
    fn to_f64(&self) -> f64 {
        let r = self.to_rational();
        r.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type F = Fixed<64>;

    #[test]
    fn fixed_point_arithmetic_round_trips() {
        let a = F::from_int(3);
        let b = F::from_int(4);
        assert_eq!((a.clone() * b.clone()).to_rational(), Rational::from_integer(12.into()));
        assert_eq!((b / a).to_f64(), 4.0 / 3.0);
        assert_eq!(F::from_int(9).sqrt(), F::from_int(3));
        let third = Rational::new(1.into(), 3.into());
        assert!((F::from_rational(&third).to_f64() - 1.0 / 3.0).abs() < 1e-15);
    }
}
