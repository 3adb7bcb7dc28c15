use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A half-integer, stored as twice its value.
///
/// Angular momenta, spin weights and magnetic quantum numbers on the sphere
/// all live in `½ℤ`; carrying the doubled value keeps parity checks exact.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Returns the integer value when `self` is integral.
    pub fn as_integer(self) -> Option<i32> {
        self.is_integer().then_some(self.0 / 2)
    }

    /// `true` when `self - other` is an integer.
    pub fn same_parity(self, other: HalfInt) -> bool {
        (self.0 - other.0) % 2 == 0
    }

    /// `(-1)^self` for integral `self`.
    pub fn sign_power(self) -> f64 {
        debug_assert!(self.is_integer(), "(-1)^{self} is not real");
        if (self.0 / 2) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Iterates `self, self + 1, ..., hi` (inclusive).
    pub fn up_to(self, hi: HalfInt) -> impl Iterator<Item = HalfInt> {
        let lo = self.0;
        (0..)
            .map(move |k| HalfInt(lo + 2 * k))
            .take_while(move |x| x.0 <= hi.0)
    }

    /// Iterates the magnetic quantum numbers `-self, ..., self`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        (-self).up_to(self)
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        let twice = 2.0 * x;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > i32::MAX as f64 {
            return Err(Error::NotHalfInteger(x));
        }
        Ok(HalfInt(twice.round() as i32))
    }
}

impl From<i32> for HalfInt {
    fn from(n: i32) -> Self {
        HalfInt::int(n)
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_i32(self.0 / 2)
        } else {
            s.serialize_f64(self.value())
        }
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        HalfInt::try_from(x).map_err(serde::de::Error::custom)
    }
}
