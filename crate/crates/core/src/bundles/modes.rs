use std::collections::HashMap;

use faer::Mat;

use crate::geometry::SpinField;
use crate::numerics::{HalfInt, C64};

/// Largest degree `≤ lmax + 1/2` with the parity of `spin`.
pub fn top_degree(spin: HalfInt, lmax: HalfInt) -> HalfInt {
    if lmax.same_parity(spin) {
        lmax
    } else {
        lmax + HalfInt::HALF
    }
}

/// Truncated spin-weighted modes of a direct sum: component `c` has spin
/// `spins[c]` and degrees `|spins[c]| ..= top_degree(spins[c], lmax)`.
///
/// Coordinates are taken against the basis `√2·b_{s,l,m}`, orthonormal for the
/// model measure, so the coordinate inner product is the `L²` one.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpace {
    spins: Vec<HalfInt>,
    lmax: HalfInt,
    modes: Vec<(usize, HalfInt, HalfInt)>,
    index: HashMap<(usize, HalfInt, HalfInt), usize>,
}

impl ModeSpace {
    pub fn new(spins: Vec<HalfInt>, lmax: HalfInt) -> Self {
        let mut modes = Vec::new();
        for (c, &s) in spins.iter().enumerate() {
            let top = top_degree(s, lmax);
            for l in s.abs().up_to(top) {
                for m in l.projections() {
                    modes.push((c, l, m));
                }
            }
        }
        let index = modes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        ModeSpace { spins, lmax, modes, index }
    }

    /// Only the lowest multiplet `l = |s|` of each component.
    pub fn lowest(spins: Vec<HalfInt>) -> Self {
        let mut modes = Vec::new();
        for (c, &s) in spins.iter().enumerate() {
            for m in s.abs().projections() {
                modes.push((c, s.abs(), m));
            }
        }
        let index = modes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let lmax = spins.iter().map(|s| s.abs()).max().unwrap_or(HalfInt::ZERO);
        ModeSpace { spins, lmax, modes, index }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn spins(&self) -> &[HalfInt] {
        &self.spins
    }

    pub fn lmax(&self) -> HalfInt {
        self.lmax
    }

    pub fn modes(&self) -> &[(usize, HalfInt, HalfInt)] {
        &self.modes
    }

    pub fn index(&self, component: usize, l: HalfInt, m: HalfInt) -> Option<usize> {
        self.index.get(&(component, l, m)).copied()
    }

    /// Fields (in the unit-normalized basis `b`) of a coordinate vector.
    pub fn to_fields(&self, coords: impl Fn(usize) -> C64) -> Vec<SpinField> {
        let mut out: Vec<Vec<((HalfInt, HalfInt), C64)>> = vec![Vec::new(); self.spins.len()];
        for (i, &(c, l, m)) in self.modes.iter().enumerate() {
            let v = coords(i);
            if v != C64::default() {
                out[c].push(((l, m), v * std::f64::consts::SQRT_2));
            }
        }
        out.into_iter()
            .zip(&self.spins)
            .map(|(terms, &s)| SpinField::from_coeffs(s, terms).expect("modes are valid"))
            .collect()
    }

    /// Coordinates of fields, truncated to this space.
    pub fn from_fields(&self, fields: &[SpinField]) -> Mat<C64> {
        Mat::from_fn(self.len(), 1, |i, _| {
            let (c, l, m) = self.modes[i];
            fields.get(c).map(|f| f.coeff(l, m) * std::f64::consts::FRAC_1_SQRT_2).unwrap_or_default()
        })
    }

    /// Multiplication by `fields[j][i]` (component `i` of `self` into
    /// component `j` of `target`), `None` entries meaning zero.
    pub fn multiplication_matrix(&self, target: &ModeSpace, fields: &[Vec<Option<&SpinField>>]) -> Mat<C64> {
        let mut out = Mat::<C64>::zeros(target.len(), self.len());
        for (col, &(i, l, m)) in self.modes.iter().enumerate() {
            let s = self.spins[i];
            for (j, row_fields) in fields.iter().enumerate() {
                let Some(Some(f)) = row_fields.get(i) else { continue };
                let w = f.spin();
                let out_s = target.spins[j];
                debug_assert_eq!(out_s, s + w, "spin bookkeeping");
                for (&(big_l, big_m), &c) in f.coeffs() {
                    let out_m = m + big_m;
                    let lo = (big_l - l).abs().max(out_s.abs()).max(out_m.abs());
                    for out_l in lo.up_to(big_l + l) {
                        let Some(row) = target.index(j, out_l, out_m) else { continue };
                        let g = crate::geometry::triple_integral(out_l, out_m, w, big_l, big_m, s, l, m);
                        if g != 0.0 {
                            out[(row, col)] += c * g;
                        }
                    }
                }
            }
        }
        out
    }
}
