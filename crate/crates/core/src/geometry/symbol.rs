use std::f64::consts::PI;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::field::SpinField;
use crate::error::{Error, Result};
use crate::numerics::{HalfInt, QuadratureGrid, C64};

/// A band-limited function on the sphere, expanded in `Y_{lm}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol(SpinField);

impl Symbol {
    pub fn zero() -> Self {
        Symbol(SpinField::zero(HalfInt::ZERO))
    }

    pub fn from_coeffs(coeffs: impl IntoIterator<Item = ((i32, i32), C64)>) -> Result<Self> {
        let f = SpinField::from_coeffs(
            HalfInt::ZERO,
            coeffs.into_iter().map(|((l, m), c)| ((HalfInt::int(l), HalfInt::int(m)), c)),
        )?;
        Ok(Symbol(f))
    }

    pub fn from_field(f: SpinField) -> Result<Self> {
        if f.spin() != HalfInt::ZERO {
            return Err(Error::SpaceMismatch(format!("a symbol has spin 0, not {}", f.spin())));
        }
        Ok(Symbol(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coeffs([((0, 0), C64::new(c * (4.0 * PI).sqrt(), 0.0))]).unwrap()
    }

    /// The harmonic `Y_{lm}`.
    pub fn harmonic(l: i32, m: i32) -> Result<Self> {
        Self::from_coeffs([((l, m), C64::new(1.0, 0.0))])
    }

    /// Real combination of `Y_{l,m}` and `Y_{l,-m}`: `Y_{l0}` for `m = 0`,
    /// `√2 Re Y_{lm}` for `m > 0` and `√2 Im Y_{l|m|}` for `m < 0`.
    pub fn real_harmonic(l: i32, m: i32) -> Result<Self> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let a = m.abs();
        match m.cmp(&0) {
            std::cmp::Ordering::Equal => Self::harmonic(l, 0),
            std::cmp::Ordering::Greater => {
                Self::from_coeffs([((l, a), C64::new(r, 0.0)), ((l, -a), C64::new(sign * r, 0.0))])
            }
            std::cmp::Ordering::Less => {
                Self::from_coeffs([((l, a), C64::new(0.0, -r)), ((l, -a), C64::new(0.0, sign * r))])
            }
        }
    }

    /// The height function `cos θ`.
    pub fn cos_theta() -> Self {
        Self::from_coeffs([((1, 0), C64::new((4.0 * PI / 3.0).sqrt(), 0.0))]).unwrap()
    }

    /// Random real symbol with degrees `1..=band` (plus a constant term when
    /// `with_constant`), coefficients of order one.
    pub fn random_real(rng: &mut impl Rng, band: i32, with_constant: bool) -> Self {
        let mut out = Vec::new();
        if with_constant {
            out.push(((0, 0), C64::new(rng.random_range(-1.0..1.0), 0.0)));
        }
        for l in 1..=band {
            for m in 0..=l {
                let re = rng.random_range(-1.0..1.0);
                let im = if m == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
                let c = C64::new(re, im) / (l as f64);
                out.push(((l, m), c));
                if m > 0 {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    out.push(((l, -m), c.conj() * sign));
                }
            }
        }
        Self::from_coeffs(out).unwrap()
    }

    pub fn field(&self) -> &SpinField {
        &self.0
    }

    pub fn into_field(self) -> SpinField {
        self.0
    }

    pub fn coeff(&self, l: i32, m: i32) -> C64 {
        self.0.coeff(HalfInt::int(l), HalfInt::int(m))
    }

    /// `(l, m, value)` triples.
    pub fn terms(&self) -> impl Iterator<Item = (i32, i32, C64)> + '_ {
        self.0
            .coeffs()
            .iter()
            .map(|(&(l, m), &c)| (l.as_integer().unwrap(), m.as_integer().unwrap(), c))
    }

    pub fn band_limit(&self) -> usize {
        self.0.band_limit().as_integer().unwrap() as usize
    }

    /// Largest violation of `c(l,-m) = (-1)^m conj(c(l,m))`.
    pub fn reality_defect(&self) -> f64 {
        self.terms()
            .map(|(l, m, c)| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                (self.coeff(l, -m) - c.conj() * sign).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.reality_defect() < 1e-12
    }

    pub fn add(&self, other: &Symbol) -> Symbol {
        Symbol(self.0.add(&other.0).unwrap())
    }

    pub fn sub(&self, other: &Symbol) -> Symbol {
        Symbol(self.0.sub(&other.0).unwrap())
    }

    pub fn scale(&self, k: f64) -> Symbol {
        Symbol(self.0.scale(C64::new(k, 0.0)))
    }

    pub fn scale_complex(&self, k: C64) -> Symbol {
        Symbol(self.0.scale(k))
    }

    pub fn mul(&self, other: &Symbol) -> Symbol {
        Symbol(self.0.mul(&other.0))
    }

    pub fn eval(&self, theta: f64, phi: f64) -> C64 {
        self.0.eval(theta, phi)
    }

    pub fn eval_grid(&self, grid: &QuadratureGrid) -> Vec<C64> {
        self.0.eval_grid(grid)
    }

    /// Spectral projection of grid samples onto degrees `≤ lmax`.
    pub fn from_grid_values(lmax: usize, grid: &QuadratureGrid, values: &[C64]) -> Result<Self> {
        Ok(Symbol(SpinField::from_grid_values(HalfInt::ZERO, HalfInt::int(lmax as i32), grid, values)?))
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolJson {
    coeffs: Vec<(i32, i32, f64, f64)>,
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SymbolJson { coeffs: self.terms().map(|(l, m, c)| (l, m, c.re, c.im)).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SymbolJson::deserialize(d)?;
        Symbol::from_coeffs(raw.coeffs.into_iter().map(|(l, m, re, im)| ((l, m), C64::new(re, im))))
            .map_err(D::Error::custom)
    }
}
