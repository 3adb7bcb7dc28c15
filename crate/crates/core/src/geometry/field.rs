//! Spin-weighted fields on the sphere, stored spectrally.
//!
//! Basis: `b_{s,l,m}(θ,φ) = sqrt((2l+1)/4π) e^{imφ} d^l_{m,-s}(θ)`, orthonormal
//! for the unit-sphere measure. At `s = 0` this is the Condon–Shortley `Y_{lm}`.
//! Sections of `O(p)` are fields of spin `p/2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{wigner3j, wigner_d_ladder, HalfInt, QuadratureGrid, C64};

/// `(l, m)` index of a spin-weighted harmonic.
pub type Mode = (HalfInt, HalfInt);

/// Checks that `(l, m)` is a valid harmonic of spin weight `spin`.
pub fn check_mode(spin: HalfInt, l: HalfInt, m: HalfInt) -> Result<()> {
    if l < spin.abs() || m.abs() > l || !l.same_parity(spin) || !m.same_parity(l) {
        return Err(Error::InvalidHarmonic { spin: spin.value(), l: l.value(), m: m.value() });
    }
    Ok(())
}

/// Degrees `|s|, |s| + 1, ..., lmax` admissible for spin `s`.
pub fn degrees(spin: HalfInt, lmax: HalfInt) -> impl Iterator<Item = HalfInt> {
    spin.abs().up_to(lmax)
}

/// `∫ conj(b_{s+w, l', m+M}) b_{w,L,M} b_{s,l,m} dΩ` over the unit sphere.
#[allow(clippy::too_many_arguments)]
pub fn triple_integral(
    out_l: HalfInt,
    out_m: HalfInt,
    w: HalfInt,
    big_l: HalfInt,
    big_m: HalfInt,
    s: HalfInt,
    l: HalfInt,
    m: HalfInt,
) -> f64 {
    let out_s = s + w;
    if out_m != m + big_m {
        return 0.0;
    }
    let a = wigner3j(out_l, big_l, l, out_m, -big_m, -m);
    if a == 0.0 {
        return 0.0;
    }
    let b = wigner3j(out_l, big_l, l, -out_s, w, s);
    if b == 0.0 {
        return 0.0;
    }
    let dims = (out_l.twice() + 1) as f64 * (big_l.twice() + 1) as f64 * (l.twice() + 1) as f64;
    (big_m + m + w + s).sign_power() * (dims / (4.0 * PI)).sqrt() * a * b
}

/// A band-limited spin-weighted function.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinField {
    spin: HalfInt,
    coeffs: BTreeMap<Mode, C64>,
}

impl SpinField {
    pub fn zero(spin: HalfInt) -> Self {
        SpinField { spin, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(spin: HalfInt, coeffs: impl IntoIterator<Item = (Mode, C64)>) -> Result<Self> {
        let mut f = SpinField::zero(spin);
        for ((l, m), c) in coeffs {
            check_mode(spin, l, m)?;
            *f.coeffs.entry((l, m)).or_default() += c;
        }
        Ok(f)
    }

    /// Single basis function `b_{s,l,m}`.
    pub fn basis(spin: HalfInt, l: HalfInt, m: HalfInt) -> Result<Self> {
        Self::from_coeffs(spin, [((l, m), C64::new(1.0, 0.0))])
    }

    pub fn spin(&self) -> HalfInt {
        self.spin
    }

    pub fn coeffs(&self) -> &BTreeMap<Mode, C64> {
        &self.coeffs
    }

    pub fn coeff(&self, l: HalfInt, m: HalfInt) -> C64 {
        self.coeffs.get(&(l, m)).copied().unwrap_or_default()
    }

    /// Largest `l` carrying a coefficient above `1e-300`, or `|s|` if none.
    pub fn band_limit(&self) -> HalfInt {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.norm() > 1e-300)
            .map(|(&(l, _), _)| l)
            .max()
            .unwrap_or(self.spin.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.norm() == 0.0)
    }

    pub fn scale(&self, k: C64) -> SpinField {
        SpinField { spin: self.spin, coeffs: self.coeffs.iter().map(|(&i, &c)| (i, c * k)).collect() }
    }

    pub fn add(&self, other: &SpinField) -> Result<SpinField> {
        self.check_spin(other)?;
        let mut out = self.clone();
        for (&i, &c) in &other.coeffs {
            *out.coeffs.entry(i).or_default() += c;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SpinField) -> Result<SpinField> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    fn check_spin(&self, other: &SpinField) -> Result<()> {
        if self.spin != other.spin {
            return Err(Error::SpaceMismatch(format!("spin {} vs spin {}", self.spin, other.spin)));
        }
        Ok(())
    }

    /// Drops coefficients of modulus at most `tol`.
    pub fn pruned(mut self, tol: f64) -> SpinField {
        self.coeffs.retain(|_, c| c.norm() > tol);
        self
    }

    /// Spin-raising operator: `ð b_{s,l,m} = -sqrt((l-s)(l+s+1)) b_{s+1,l,m}`.
    pub fn edth(&self) -> SpinField {
        let s = self.spin.value();
        let coeffs = self
            .coeffs
            .iter()
            .filter_map(|(&(l, m), &c)| {
                let lv = l.value();
                let k = ((lv - s) * (lv + s + 1.0)).sqrt();
                (k > 0.0).then_some(((l, m), c * -k))
            })
            .collect();
        SpinField { spin: self.spin + HalfInt::ONE, coeffs }
    }

    /// Spin-lowering operator: `ð̄ b_{s,l,m} = sqrt((l+s)(l-s+1)) b_{s-1,l,m}`.
    pub fn edth_bar(&self) -> SpinField {
        let s = self.spin.value();
        let coeffs = self
            .coeffs
            .iter()
            .filter_map(|(&(l, m), &c)| {
                let lv = l.value();
                let k = ((lv + s) * (lv - s + 1.0)).sqrt();
                (k > 0.0).then_some(((l, m), c * k))
            })
            .collect();
        SpinField { spin: self.spin - HalfInt::ONE, coeffs }
    }

    /// Pointwise complex conjugate, a field of spin `-s`.
    pub fn conj(&self) -> SpinField {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&(l, m), &c)| ((l, -m), c.conj() * (m + self.spin).sign_power()))
            .collect();
        SpinField { spin: -self.spin, coeffs }
    }

    /// Pointwise product, a field of spin `s_self + s_other`. Exact.
    pub fn mul(&self, other: &SpinField) -> SpinField {
        let w = self.spin;
        let s = other.spin;
        let out_s = s + w;
        let mut out: BTreeMap<Mode, C64> = BTreeMap::new();
        for (&(big_l, big_m), &a) in &self.coeffs {
            for (&(l, m), &b) in &other.coeffs {
                let out_m = big_m + m;
                let lo = (big_l - l).abs().max(out_s.abs()).max(out_m.abs());
                for out_l in lo.up_to(big_l + l) {
                    let g = triple_integral(out_l, out_m, w, big_l, big_m, s, l, m);
                    if g != 0.0 {
                        *out.entry((out_l, out_m)).or_default() += a * b * g;
                    }
                }
            }
        }
        SpinField { spin: out_s, coeffs: out }
    }

    /// `∫ conj(self)·other` against the unit-sphere measure.
    pub fn dot_unit(&self, other: &SpinField) -> C64 {
        if self.spin != other.spin {
            return C64::default();
        }
        self.coeffs.iter().map(|(i, a)| a.conj() * other.coeffs.get(i).copied().unwrap_or_default()).sum()
    }

    /// Value at one point.
    pub fn eval(&self, theta: f64, phi: f64) -> C64 {
        self.eval_rings(&[theta], &[phi])[0]
    }

    /// Values on the tensor grid `thetas × phis`, ring-major.
    pub fn eval_rings(&self, thetas: &[f64], phis: &[f64]) -> Vec<C64> {
        let mut by_m: BTreeMap<HalfInt, Vec<(HalfInt, C64)>> = BTreeMap::new();
        for (&(l, m), &c) in &self.coeffs {
            by_m.entry(m).or_default().push((l, c));
        }
        let mut out = vec![C64::default(); thetas.len() * phis.len()];
        for (&m, terms) in &by_m {
            let lmax = terms.iter().map(|t| t.0).max().unwrap();
            let j0 = m.abs().max(self.spin.abs());
            let phase: Vec<C64> = phis.iter().map(|&p| C64::from_polar(1.0, m.value() * p)).collect();
            for (i, &t) in thetas.iter().enumerate() {
                let ladder = wigner_d_ladder(m, -self.spin, lmax, t);
                let mut g = C64::default();
                for &(l, c) in terms {
                    let idx = ((l - j0).twice() / 2) as usize;
                    let norm = ((l.twice() + 1) as f64 / (4.0 * PI)).sqrt();
                    g += c * norm * ladder[idx];
                }
                let row = &mut out[i * phis.len()..(i + 1) * phis.len()];
                for (v, ph) in row.iter_mut().zip(&phase) {
                    *v += g * ph;
                }
            }
        }
        out
    }

    pub fn eval_grid(&self, grid: &QuadratureGrid) -> Vec<C64> {
        self.eval_rings(grid.thetas(), grid.phis())
    }

    /// Spectral coefficients of grid values by quadrature, up to degree `lmax`.
    ///
    /// Exact when the sampled function has band limit `≤ lmax` and the grid
    /// integrates degree `2·lmax`.
    pub fn from_grid_values(spin: HalfInt, lmax: HalfInt, grid: &QuadratureGrid, values: &[C64]) -> Result<Self> {
        assert_eq!(values.len(), grid.len());
        grid.check_exact(lmax.twice().max(0) as usize)?;
        let nphi = grid.n_phi();
        let mut coeffs = BTreeMap::new();
        let mut m = -lmax;
        while m <= lmax {
            if !m.same_parity(spin) || m.abs() > lmax {
                m = m + HalfInt::ONE;
                continue;
            }
            let j0 = m.abs().max(spin.abs());
            if j0 > lmax {
                m = m + HalfInt::ONE;
                continue;
            }
            let mut acc = vec![C64::default(); ((lmax - j0).twice() / 2 + 1) as usize];
            for (i, &t) in grid.thetas().iter().enumerate() {
                let row = &values[i * nphi..(i + 1) * nphi];
                let proj: C64 = row
                    .iter()
                    .zip(grid.phis())
                    .map(|(v, &p)| v * C64::from_polar(1.0, -m.value() * p))
                    .sum::<C64>()
                    * grid.ring_weight(i);
                let ladder = wigner_d_ladder(m, -spin, lmax, t);
                for (k, d) in ladder.iter().enumerate() {
                    acc[k] += proj * *d;
                }
            }
            for (k, a) in acc.into_iter().enumerate() {
                let l = j0 + HalfInt::int(k as i32);
                let norm = ((l.twice() + 1) as f64 / (4.0 * PI)).sqrt();
                // Model weights carry half the unit-sphere area.
                coeffs.insert((l, m), a * norm * 2.0);
            }
            m = m + HalfInt::ONE;
        }
        Ok(SpinField { spin, coeffs })
    }

    /// Samples `f(θ, φ)` and projects to degree `lmax`.
    pub fn from_fn(spin: HalfInt, lmax: HalfInt, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let grid = QuadratureGrid::for_degree(lmax.twice().max(0) as usize + 2);
        let vals: Vec<C64> = grid.nodes().map(|(t, p)| f(t, p)).collect();
        Self::from_grid_values(spin, lmax, &grid, &vals)
    }
}
