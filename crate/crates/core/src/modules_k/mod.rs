//! Quantized modules `Ṽ_N = Hom(Ẽ_N^V, H_N)`: ranks against the index
//! polynomial, `K₀` bookkeeping modulo finite corrections, the morphism
//! functor, the comparator between connections, and idempotent lifting.

mod idempotent;

use std::collections::BTreeMap;
use std::ops::Add;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundles::{e_space, BundleSpec, HilbertBasis, ModeSpace, SectionOfV};
use crate::dolbeault::{build_dolbeault, default_lmax, kernel_projector, DolbeaultOperator};
use crate::error::{Error, Result};
use crate::numerics::{max_abs, operator_norm_mat, singular_values, DenseMatrix, HalfInt, C64};
use crate::quantization::toeplitz_module_on;

pub use idempotent::{
    block_diagonal, bott_projector, chern_number, idempotent_trace_check, lift_idempotent, pointwise_idempotency,
    LiftEntry, LiftedIdempotent, SymbolMatrix, TraceCheck,
};

/// Rank of `Ẽ_N^V` as a polynomial in `N`: `c0 + c1·N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPolynomial {
    pub coeffs: [i64; 2],
    /// `(rank, total degree)` of the bundle it was computed from.
    pub chern_input: (i64, i64),
}

/// `∫ ch V ∧ td ∧ e^{Nω/2π}` on `CP¹` with `ch₀ = r`, `ch₁ = -d`, `td = 1 + c₁/2`:
/// `rN + r - d`. The trivial line bundle gives `N + 1`.
pub fn rank_polynomial(r: i64, d: i64) -> RankPolynomial {
    RankPolynomial { coeffs: [r - d, r], chern_input: (r, d) }
}

impl RankPolynomial {
    pub fn for_bundle(bundle: &BundleSpec) -> Self {
        rank_polynomial(bundle.rank() as i64, bundle.total_degree() as i64)
    }

    pub fn value(&self, n: usize) -> i64 {
        self.coeffs[0] + self.coeffs[1] * n as i64
    }
}

impl Add for RankPolynomial {
    type Output = RankPolynomial;
    fn add(self, rhs: RankPolynomial) -> RankPolynomial {
        rank_polynomial(self.chern_input.0 + rhs.chern_input.0, self.chern_input.1 + rhs.chern_input.1)
    }
}

/// Smallest `N` in `ns` (ascending) from which `measured == predicted` holds
/// for the rest of the range.
fn stable_from(rows: &[(usize, i64, i64)]) -> Option<usize> {
    let mut start = None;
    for &(n, measured, predicted) in rows.iter().rev() {
        if measured != predicted {
            break;
        }
        start = Some(n);
    }
    start
}

/// One `N` of a quantized module.
#[derive(Clone, Debug)]
pub struct ModuleEntry {
    pub basis: HilbertBasis,
    pub rank: usize,
}

/// `Ẽ_N^V` over a finite range of `N`.
#[derive(Clone, Debug)]
pub struct QuantizedModule {
    pub bundle: BundleSpec,
    pub polynomial: RankPolynomial,
    pub per_n: BTreeMap<usize, ModuleEntry>,
    /// `N*`: from here on the measured rank is the polynomial value.
    pub threshold: Option<usize>,
}

impl QuantizedModule {
    pub fn ranks(&self) -> Vec<(usize, usize)> {
        self.per_n.iter().map(|(&n, e)| (n, e.rank)).collect()
    }

    /// `(N, measured, predicted)` rows.
    pub fn table(&self) -> Vec<(usize, i64, i64)> {
        self.per_n.iter().map(|(&n, e)| (n, e.rank as i64, self.polynomial.value(n))).collect()
    }

    /// Nonzero `measured - predicted` over the range.
    pub fn deviations(&self) -> BTreeMap<usize, i64> {
        self.table().into_iter().filter(|r| r.1 != r.2).map(|r| (r.0, r.1 - r.2)).collect()
    }

    pub fn k0_class(&self) -> K0Class {
        K0Class { poly: self.polynomial.coeffs, finite: self.deviations() }
    }
}

/// Measured `dim Ẽ_N^V` for each `N` and the threshold `N*`.
pub fn rank_sequence(bundle: &BundleSpec, ns: &[usize]) -> Result<QuantizedModule> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let entries: Vec<(usize, ModuleEntry)> = ns
        .par_iter()
        .map(|&n| {
            let basis = e_space(bundle, n, None)?;
            Ok((n, ModuleEntry { rank: basis.dim(), basis }))
        })
        .collect::<Result<_>>()?;
    let polynomial = RankPolynomial::for_bundle(bundle);
    let per_n: BTreeMap<usize, ModuleEntry> = entries.into_iter().collect();
    let rows: Vec<(usize, i64, i64)> = per_n.iter().map(|(&n, e)| (n, e.rank as i64, polynomial.value(n))).collect();
    Ok(QuantizedModule { bundle: bundle.clone(), polynomial, threshold: stable_from(&rows), per_n })
}

/// `K₀` class of a quantized module: the polynomial plus the finitely many
/// corrections where the measured rank differs from it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Class {
    pub poly: [i64; 2],
    pub finite: BTreeMap<usize, i64>,
}

/// Equal modulo finite-dimensional modules: same polynomial part.
pub fn k0_equal_mod_finite(a: &K0Class, b: &K0Class) -> bool {
    a.poly == b.poly
}

/// A bundle map `φ: V → W` with constant coefficients, `phi[j][i]` from
/// summand `i` of `V` to summand `j` of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMorphism {
    pub phi: Vec<Vec<C64>>,
}

impl BlockMorphism {
    pub fn identity(rank: usize) -> Self {
        BlockMorphism {
            phi: (0..rank).map(|j| (0..rank).map(|i| C64::new((i == j) as u8 as f64, 0.0)).collect()).collect(),
        }
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &BlockMorphism) -> BlockMorphism {
        let inner = first.phi.first().map_or(0, |r| r.len());
        BlockMorphism {
            phi: self
                .phi
                .iter()
                .map(|row| (0..inner).map(|i| row.iter().zip(&first.phi).map(|(a, r)| a * r[i]).sum()).collect())
                .collect(),
        }
    }

    pub fn direct_sum(&self, other: &BlockMorphism) -> BlockMorphism {
        let (ca, cb) = (self.phi.first().map_or(0, |r| r.len()), other.phi.first().map_or(0, |r| r.len()));
        let mut phi = Vec::new();
        for row in &self.phi {
            phi.push(row.iter().copied().chain(std::iter::repeat_n(C64::default(), cb)).collect());
        }
        for row in &other.phi {
            phi.push(std::iter::repeat_n(C64::default(), ca).chain(row.iter().copied()).collect());
        }
        BlockMorphism { phi }
    }

    /// `φ(v)` as a section of `target`.
    pub fn apply(&self, v: &SectionOfV, target: &BundleSpec) -> Result<SectionOfV> {
        let mut components = Vec::with_capacity(self.phi.len());
        for (row, &q) in self.phi.iter().zip(target.degrees()) {
            let mut acc: Option<crate::geometry::SpinField> = None;
            for (c, f) in row.iter().zip(&v.components) {
                if *c == C64::default() {
                    continue;
                }
                let term = f.scale(*c);
                acc = Some(match acc {
                    Some(a) => a.add(&term)?,
                    None => term,
                });
            }
            components.push(acc.unwrap_or_else(|| crate::geometry::SpinField::zero(HalfInt::from_twice(q))));
        }
        Ok(SectionOfV { components })
    }
}

/// `Q(φ): Ṽ_N → W̃_N`, acting on the right by `R = E_V* Φ E_W`.
#[derive(Clone, Debug)]
pub struct Pushforward {
    pub n: usize,
    pub r: DenseMatrix,
    pub basis_v: HilbertBasis,
    pub basis_w: HilbertBasis,
}

impl Pushforward {
    /// `Q(φ)(a) = a R`.
    pub fn apply(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        a.matmul(&self.r)
    }
}

/// Lift of the pointwise transpose `φᵀ: W* → V*` to the ambient mode spaces
/// of both degrees.
fn ambient_lift(phi: &BlockMorphism, dv: &DolbeaultOperator, dw: &DolbeaultOperator) -> Mat<C64> {
    let lift = |to: &ModeSpace, from: &ModeSpace| {
        let mut m = Mat::<C64>::zeros(to.len(), from.len());
        for (col, &(j, l, mm)) in from.modes().iter().enumerate() {
            for (i, &c) in phi.phi[j].iter().enumerate() {
                if c != C64::default() {
                    if let Some(row) = to.index(i, l, mm) {
                        m[(row, col)] = c;
                    }
                }
            }
        }
        m
    };
    let even = lift(dv.even_modes(), dw.even_modes());
    let odd = lift(dv.odd_modes(), dw.odd_modes());
    let (ev, ew) = (even.nrows(), even.ncols());
    Mat::from_fn(dv.dim(), dw.dim(), |r, c| match (r < ev, c < ew) {
        (true, true) => even[(r, c)],
        (false, false) => odd[(r - ev, c - ew)],
        _ => C64::default(),
    })
}

/// `Q(φ)` for a covariantly constant `φ: V → W`. Coefficients between summands
/// of different degree, or a `φ` that does not intertwine the connections, are
/// rejected.
pub fn morphism_pushforward(phi: &BlockMorphism, v: &BundleSpec, w: &BundleSpec, n: usize) -> Result<Pushforward> {
    if phi.phi.len() != w.rank() || phi.phi.iter().any(|r| r.len() != v.rank()) {
        return Err(Error::SpaceMismatch(format!(
            "morphism shape does not match {} -> {}",
            v.label(),
            w.label()
        )));
    }
    for (j, row) in phi.phi.iter().enumerate() {
        for (i, c) in row.iter().enumerate() {
            if *c != C64::default() && v.degrees()[i] != w.degrees()[j] {
                return Err(Error::NotCovariantlyConstant(format!(
                    "coefficient from O({}) to O({}) has nonzero covariant derivative",
                    v.degrees()[i],
                    w.degrees()[j]
                )));
            }
        }
    }
    let lmax = default_lmax(v, n).max(default_lmax(w, n));
    let dv = build_dolbeault(v, n, Some(lmax))?;
    let dw = build_dolbeault(w, n, Some(lmax))?;
    let lift = ambient_lift(phi, &dv, &dw);
    let defect = max_abs((dv.full().mat() * &lift - &lift * dw.full().mat()).as_ref());
    if defect > 1e-10 {
        return Err(Error::NotCovariantlyConstant(format!("‖D_V Φ - Φ D_W‖ = {defect:e}")));
    }
    let basis_v = e_space(v, n, Some(lmax))?;
    let basis_w = e_space(w, n, Some(lmax))?;
    let r = basis_v.vectors.adjoint() * &lift * &basis_w.vectors;
    Ok(Pushforward {
        n,
        r: DenseMatrix::new(r, basis_v.tag.clone(), basis_w.tag.clone())?,
        basis_v,
        basis_w,
    })
}

/// `‖T^W(φ v) - Q(φ)(T^V(v))‖`.
pub fn intertwining_residual(push: &Pushforward, phi: &BlockMorphism, v: &SectionOfV, target: &BundleSpec) -> Result<f64> {
    let lhs = toeplitz_module_on(&phi.apply(v, target)?, &push.basis_w)?;
    let rhs = push.apply(&toeplitz_module_on(v, &push.basis_v)?.matrix)?;
    Ok(lhs.matrix.sub(&rhs)?.operator_norm())
}

/// The map `u_N: Ṽ_N → W̃_N`, `a ↦ a Π^V ι`, between two connections on the
/// same splitting.
#[derive(Clone, Debug)]
pub struct Comparator {
    pub n: usize,
    /// Coordinates of `Π^V` restricted to `Ẽ^W`, in the basis of `Ẽ^V`.
    pub u: DenseMatrix,
    pub sigma_min: f64,
    pub bijective: bool,
    pub projector_distance: f64,
    pub basis_v: HilbertBasis,
    pub basis_w: HilbertBasis,
}

impl Comparator {
    /// `‖T^V(v) u - T^W(v)‖` and its estimate `‖v‖ ‖Π^V - Π^W‖`.
    pub fn residual(&self, v: &SectionOfV) -> Result<(f64, f64)> {
        let tv = toeplitz_module_on(v, &self.basis_v)?;
        let tw = toeplitz_module_on(v, &self.basis_w)?;
        let moved = tv.matrix.matmul(&self.u)?;
        Ok((moved.sub(&tw.matrix)?.operator_norm(), v.sup_norm() * self.projector_distance))
    }
}

/// Smallest singular value that counts as invertible for the comparator.
pub const COMPARATOR_MARGIN: f64 = 0.1;

pub fn comparator(v: &BundleSpec, w: &BundleSpec, n: usize) -> Result<Comparator> {
    if v.degrees() != w.degrees() {
        return Err(Error::SpaceMismatch(format!("{} and {} have different splittings", v.label(), w.label())));
    }
    let lmax = default_lmax(v, n).max(default_lmax(w, n));
    let dv = build_dolbeault(v, n, Some(lmax))?;
    let dw = build_dolbeault(w, n, Some(lmax))?;
    let thr = dw.default_threshold();
    let pv = kernel_projector(&dv, Some(thr))?;
    let pw = kernel_projector(&dw, Some(thr))?;
    let basis_v = crate::dolbeault::kernel_basis(&dv, Some(thr))?;
    let basis_w = crate::dolbeault::kernel_basis(&dw, Some(thr))?;
    let u = basis_v.vectors.adjoint() * pv.matrix.mat() * &basis_w.vectors;
    let sv = singular_values(u.as_ref());
    let square = u.nrows() == u.ncols();
    let sigma_min = if square { sv.last().copied().unwrap_or(f64::INFINITY) } else { 0.0 };
    Ok(Comparator {
        n,
        u: DenseMatrix::new(u, basis_v.tag.clone(), basis_w.tag.clone())?,
        sigma_min,
        bijective: square && sigma_min > COMPARATOR_MARGIN,
        projector_distance: operator_norm_mat((pv.matrix.mat() - pw.matrix.mat()).as_ref()),
        basis_v,
        basis_w,
    })
}

/// Rank gap between the two spinor bundles at one `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinorRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub rank_plus: usize,
    pub rank_minus: usize,
    pub gap: i64,
    /// `|χ| dim H_N`, the lower bound on the kernel of the quantized Dirac operator.
    pub kernel_bound: usize,
}

/// Spinor bundles `S⁺ = O(-1)`, `S⁻ = O(1)` (as `V`, quantized through
/// `V* ⊗ L_N`), so that `rk S⁺_N - rk S⁻_N = χ(S²) = 2`.
pub fn spinor_rank_gap(ns: &[usize]) -> Result<Vec<SpinorRow>> {
    let plus = rank_sequence(&BundleSpec::line(-1), ns)?;
    let minus = rank_sequence(&BundleSpec::line(1), ns)?;
    Ok(plus
        .ranks()
        .into_iter()
        .zip(minus.ranks())
        .map(|((n, a), (_, b))| SpinorRow {
            n,
            rank_plus: a,
            rank_minus: b,
            gap: a as i64 - b as i64,
            kernel_bound: 2 * (n + 1),
        })
        .collect())
}
