//! The `V* ⊗ L_N`-twisted Dolbeault operator in a spin-weighted Galerkin basis.
//!
//! Degree-0 forms in summand `i` are fields of spin `s_i = (N - p_i)/2`,
//! degree-1 forms fields of spin `s_i + 1`. The operator is odd:
//!
//! ```text
//! D₊ = ð + α     : degree 0 → degree 1
//! D₋ = -ð̄ + β    : degree 1 → degree 0
//! ```
//!
//! With the round connection `D₋ = D₊*` and every `(summand, l)` multiplet is
//! an invariant block, so the truncation at `lmax` is exact below the cutoff.

mod weitzenbock;

use std::f64::consts::PI;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundles::{matrix_field_sup, BundleSpec, HilbertBasis, ModeSpace};
use crate::error::{Error, Result};
use crate::geometry::SpinField;
use crate::numerics::{
    hermitian_eigen_mat, hermitian_eigenvalues, hermitian_part, null_space, operator_norm_mat, singular_values,
    DenseMatrix, HalfInt, SpaceTag, C64,
};

pub use weitzenbock::{curvature_fields, weitzenbock, weitzenbock_constant, WeitzenbockReport};

/// Contour nodes for the Riesz projector.
const CONTOUR_NODES: usize = 64;

/// Galerkin matrix of the twisted Dolbeault operator. Immutable once built.
#[derive(Clone, Debug)]
pub struct DolbeaultOperator {
    bundle: BundleSpec,
    n: usize,
    lmax: HalfInt,
    even: ModeSpace,
    odd: ModeSpace,
    round_plus: Mat<C64>,
    potential_plus: Mat<C64>,
    potential_minus: Mat<C64>,
    plus: Mat<C64>,
    minus: Mat<C64>,
    self_adjoint: bool,
    weitzenbock: WeitzenbockReport,
    warning: Option<String>,
}

/// Smallest cutoff that keeps the expected kernel and the potential's reach
/// inside the basis with the default margin of 4.
pub fn default_lmax(bundle: &BundleSpec, n: usize) -> HalfInt {
    HalfInt::int(required_lmax(bundle, n) as i32 + 4)
}

fn required_lmax(bundle: &BundleSpec, n: usize) -> usize {
    let pmax = bundle.degrees().iter().map(|p| p.unsigned_abs() as usize).max().unwrap_or(0);
    (n + pmax).div_ceil(2) + bundle.potential_fields().band_limit()
}

/// Assemble `D_V` on `V* ⊗ L_N` with degrees up to `lmax` (default
/// [`default_lmax`]). A cutoff below the margin heuristic attaches a warning.
pub fn build_dolbeault(bundle: &BundleSpec, n: usize, lmax: Option<HalfInt>) -> Result<DolbeaultOperator> {
    let lmax = lmax.unwrap_or_else(|| default_lmax(bundle, n));
    let spins = bundle.twisted_spins(n);
    let even = ModeSpace::new(spins.clone(), lmax);
    let odd = ModeSpace::new(spins.iter().map(|&s| s + HalfInt::ONE).collect(), lmax);

    let mut round_plus = Mat::<C64>::zeros(odd.len(), even.len());
    for (col, &(c, l, m)) in even.modes().iter().enumerate() {
        let s = spins[c];
        if let Some(row) = odd.index(c, l, m) {
            let k = (l - s).value() * (l + s + HalfInt::ONE).value();
            round_plus[(row, col)] = C64::new(-k.sqrt(), 0.0);
        }
    }

    let fields = bundle.potential_fields();
    let potential_plus = even.multiplication_matrix(&odd, &field_refs(&fields.alpha));
    let potential_minus = odd.multiplication_matrix(&even, &field_refs(&fields.beta));
    let plus = &round_plus + &potential_plus;
    let minus = round_plus.transpose().to_owned() + &potential_minus;

    let required = required_lmax(bundle, n) + 2;
    let warning = (lmax.value() < required as f64)
        .then(|| format!("lmax {lmax} is below the margin heuristic {required} for N={n}"));
    Ok(DolbeaultOperator {
        self_adjoint: fields.is_compatible(1e-13),
        weitzenbock: weitzenbock(bundle),
        bundle: bundle.clone(),
        n,
        lmax,
        even,
        odd,
        round_plus,
        potential_plus,
        potential_minus,
        plus,
        minus,
        warning,
    })
}

fn field_refs(m: &[Vec<Option<SpinField>>]) -> Vec<Vec<Option<&SpinField>>> {
    m.iter().map(|row| row.iter().map(|f| f.as_ref()).collect()).collect()
}

impl DolbeaultOperator {
    pub fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lmax(&self) -> HalfInt {
        self.lmax
    }

    pub fn even_modes(&self) -> &ModeSpace {
        &self.even
    }

    pub fn odd_modes(&self) -> &ModeSpace {
        &self.odd
    }

    pub fn dim(&self) -> usize {
        self.even.len() + self.odd.len()
    }

    /// `D₊`, degree 0 → degree 1.
    pub fn plus(&self) -> faer::MatRef<'_, C64> {
        self.plus.as_ref()
    }

    /// `D₋`, degree 1 → degree 0.
    pub fn minus(&self) -> faer::MatRef<'_, C64> {
        self.minus.as_ref()
    }

    /// The round `ð` part of `D₊`.
    pub fn round_plus(&self) -> faer::MatRef<'_, C64> {
        self.round_plus.as_ref()
    }

    pub fn block01(&self) -> DenseMatrix {
        DenseMatrix::new(self.plus.clone(), SpaceTag::plain(self.odd.len()), SpaceTag::plain(self.even.len()))
            .expect("shape")
    }

    /// Full odd matrix `[[0, D₋], [D₊, 0]]` on degree 0 ⊕ degree 1.
    pub fn full(&self) -> DenseMatrix {
        self.assemble(&self.plus, &self.minus)
    }

    /// Potential contribution to [`Self::full`].
    pub fn potential_part(&self) -> DenseMatrix {
        self.assemble(&self.potential_plus, &self.potential_minus)
    }

    fn assemble(&self, plus: &Mat<C64>, minus: &Mat<C64>) -> DenseMatrix {
        let e = self.even.len();
        DenseMatrix::from_fn(self.dim(), self.dim(), |i, j| match (i < e, j < e) {
            (false, true) => plus[(i - e, j)],
            (true, false) => minus[(i, j - e)],
            _ => C64::default(),
        })
    }

    /// Degree tag (0 or 1) of each basis vector.
    pub fn grading(&self) -> Vec<u8> {
        std::iter::repeat_n(0, self.even.len()).chain(std::iter::repeat_n(1, self.odd.len())).collect()
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn weitzenbock(&self) -> WeitzenbockReport {
        self.weitzenbock
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// `D₋D₊` on degree 0.
    pub fn d2_even(&self) -> Mat<C64> {
        &self.minus * &self.plus
    }

    /// `D₊D₋` on degree 1.
    pub fn d2_odd(&self) -> Mat<C64> {
        &self.plus * &self.minus
    }

    /// `dim ker D₊ - dim ker D₋` of the truncated operator; equals the
    /// holomorphic Euler characteristic `Σ (N - p_i + 1)` exactly.
    pub fn index(&self) -> i64 {
        self.even.len() as i64 - self.odd.len() as i64
    }

    /// `max(0.5, (N - C)/2)`: between the kernel and the gap bound.
    pub fn default_threshold(&self) -> f64 {
        (0.5f64).max((self.n as f64 - self.weitzenbock.constant) / 2.0)
    }
}

/// Eigenvalues of `D²` on both degrees, ascending. In the non-self-adjoint
/// case these are the eigenvalues of the Hermitian part `Re D²`.
pub fn spectrum_d2(d: &DolbeaultOperator) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(d.dim());
    for block in [d.d2_even(), d.d2_odd()] {
        if block.nrows() > 0 {
            out.extend(hermitian_eigenvalues(hermitian_part(block.as_ref()).as_ref())?);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Smallest eigenvalue of `D²` above `threshold`.
pub fn spectral_gap(spectrum: &[f64], threshold: f64) -> Option<f64> {
    spectrum.iter().copied().find(|&x| x >= threshold)
}

fn check_gap(n: usize, threshold: f64, magnitudes: impl IntoIterator<Item = f64>) -> Result<()> {
    let (lo, hi) = (threshold / 3.0, 1.5 * threshold);
    let mut below = 0.0f64;
    let mut above = f64::INFINITY;
    let mut bad = false;
    for x in magnitudes {
        if x < lo {
            below = below.max(x);
        } else if x >= hi {
            above = above.min(x);
        } else {
            bad = true;
            if x < threshold {
                below = below.max(x);
            } else {
                above = above.min(x);
            }
        }
    }
    if bad {
        Err(Error::AmbiguousKernel { n, threshold, below, above })
    } else {
        Ok(())
    }
}

/// Spectral projector of `D` at 0.
#[derive(Clone, Debug)]
pub struct SpectralProjector {
    pub matrix: DenseMatrix,
    pub rank: usize,
    pub orthogonal: bool,
}

impl SpectralProjector {
    pub fn idempotency_defect(&self) -> f64 {
        let p = self.matrix.mat();
        operator_norm_mat((p * p - p).as_ref())
    }
}

/// Projector onto the generalized kernel of `D²` (eigenvalues below
/// `threshold`, default [`DolbeaultOperator::default_threshold`]).
///
/// Self-adjoint operators use a Hermitian eigendecomposition and give an
/// orthogonal projector; otherwise the Riesz integral over the circle of
/// radius `threshold` is evaluated by the trapezoid rule.
pub fn kernel_projector(d: &DolbeaultOperator, threshold: Option<f64>) -> Result<SpectralProjector> {
    let thr = threshold.unwrap_or_else(|| d.default_threshold());
    let blocks = [d.d2_even(), d.d2_odd()];
    let parts: Vec<Mat<C64>> = if d.is_self_adjoint() {
        let mut parts = Vec::new();
        for b in &blocks {
            if b.nrows() == 0 {
                parts.push(Mat::zeros(0, 0));
                continue;
            }
            let (vals, vecs) = hermitian_eigen_mat(b.as_ref())?;
            check_gap(d.n, thr, vals.iter().map(|v| v.abs()))?;
            let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] < thr).collect();
            let k = Mat::from_fn(b.nrows(), keep.len(), |i, j| vecs[(i, keep[j])]);
            parts.push(&k * k.adjoint());
        }
        parts
    } else {
        let mut parts = Vec::new();
        for b in &blocks {
            if b.nrows() == 0 {
                parts.push(Mat::zeros(0, 0));
                continue;
            }
            let ev = b.eigenvalues().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            check_gap(d.n, thr, ev.iter().map(|z| z.norm()))?;
            parts.push(riesz_projector(b, thr));
        }
        parts
    };
    let e = d.even.len();
    let mat = Mat::from_fn(d.dim(), d.dim(), |i, j| match (i < e, j < e) {
        (true, true) => parts[0][(i, j)],
        (false, false) => parts[1][(i - e, j - e)],
        _ => C64::default(),
    });
    let rank = (0..d.dim()).map(|i| mat[(i, i)].re).sum::<f64>().round() as usize;
    Ok(SpectralProjector { matrix: DenseMatrix::from_mat(mat), rank, orthogonal: d.is_self_adjoint() })
}

/// `(1/2πi) ∮_{|z|=r} (z - A)⁻¹ dz` with equispaced nodes.
fn riesz_projector(a: &Mat<C64>, radius: f64) -> Mat<C64> {
    let n = a.nrows();
    let terms: Vec<Mat<C64>> = (0..CONTOUR_NODES)
        .into_par_iter()
        .map(|k| {
            let z = C64::from_polar(radius, 2.0 * PI * (k as f64 + 0.5) / CONTOUR_NODES as f64);
            let shifted = Mat::from_fn(n, n, |i, j| if i == j { z - a[(i, j)] } else { -a[(i, j)] });
            let inv = shifted.partial_piv_lu().inverse();
            inv * faer::Scale(z / CONTOUR_NODES as f64)
        })
        .collect();
    terms.into_iter().fold(Mat::zeros(n, n), |acc, t| acc + t)
}

/// Orthonormal basis of `ker D = ker D₊ ⊕ ker D₋` as a [`HilbertBasis`].
pub fn kernel_basis(d: &DolbeaultOperator, threshold: Option<f64>) -> Result<HilbertBasis> {
    let thr = threshold.unwrap_or_else(|| d.default_threshold());
    let (ke, ko) = kernel_parts(d, thr)?;
    let (e, o) = (d.even.len(), d.odd.len());
    let cols = ke.ncols() + ko.ncols();
    let vectors = Mat::from_fn(e + o, cols, |i, j| match (i < e, j < ke.ncols()) {
        (true, true) => ke[(i, j)],
        (false, false) => ko[(i - e, j - ke.ncols())],
        _ => C64::default(),
    });
    Ok(HilbertBasis {
        tag: SpaceTag::kernel(d.bundle.degrees(), d.n, d.bundle.label(), cols),
        n: d.n,
        degrees: d.bundle.degrees().to_vec(),
        even_modes: d.even.clone(),
        odd_modes: d.odd.clone(),
        even_columns: ke.ncols(),
        vectors,
        orthonormal: true,
    })
}

fn kernel_parts(d: &DolbeaultOperator, thr: f64) -> Result<(Mat<C64>, Mat<C64>)> {
    let mut out = Vec::new();
    for (m, dom) in [(d.plus(), d.even.len()), (d.minus(), d.odd.len())] {
        let sv = singular_values(m);
        // Squared singular values play the role of eigenvalues of D².
        check_gap(d.n, thr, sv.iter().map(|s| s * s))?;
        out.push(if dom == 0 { Mat::zeros(0, 0) } else { null_space(m, thr.sqrt()) });
    }
    let ko = out.pop().expect("two parts");
    let ke = out.pop().expect("two parts");
    Ok((ke, ko))
}

/// Degree structure of `ker D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeSplit {
    pub dim_even: usize,
    pub dim_odd: usize,
    /// Smallest degree-0 norm over unit vectors of the kernel.
    pub min_degree0_norm: f64,
    /// `N > C + ‖B‖²`, where the kernel is guaranteed even.
    pub in_regime: bool,
}

pub fn kernel_degree_split(d: &DolbeaultOperator) -> Result<DegreeSplit> {
    let (ke, ko) = kernel_parts(d, d.default_threshold())?;
    let w = d.weitzenbock;
    let min_degree0_norm = if ko.ncols() > 0 {
        0.0
    } else if ke.ncols() == 0 {
        f64::NAN
    } else {
        singular_values(ke.as_ref()).last().copied().unwrap_or(0.0)
    };
    Ok(DegreeSplit {
        dim_even: ke.ncols(),
        dim_odd: ko.ncols(),
        min_degree0_norm,
        in_regime: d.n as f64 > w.constant + w.skew_norm * w.skew_norm,
    })
}

/// `‖Π^V - Π^W‖` against the resolvent estimates on the circle of radius
/// `r = ½(N-C)^{1/2}`.
///
/// `bound` is `2‖A‖(N-C)^{-1/2} [r - ‖A‖]^{-1}`, the integrand bound without
/// the length of the contour. `contour_bound` keeps the factor `r` from the
/// length and is the one that actually dominates the distance: it decays like
/// `N^{-1/2}` while `bound` decays like `N^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectorDistance {
    pub n: usize,
    pub measured: f64,
    pub bound: f64,
    pub contour_bound: f64,
    /// `N > C + 4‖A‖²`; the bound is meaningless otherwise.
    pub applicable: bool,
    pub a_norm: f64,
    pub c: f64,
}

/// `sup_x ‖A(x)‖` for `A = D_V - D_W`, both blocks.
pub fn potential_difference_norm(v: &BundleSpec, w: &BundleSpec) -> Result<f64> {
    if v.degrees() != w.degrees() {
        return Err(Error::SpaceMismatch(format!("{} and {} have different splittings", v.label(), w.label())));
    }
    let (fv, fw) = (v.potential_fields(), w.potential_fields());
    let diff = |a: &Vec<Vec<Option<SpinField>>>, b: &Vec<Vec<Option<SpinField>>>| {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| {
                ra.iter()
                    .zip(rb)
                    .map(|(x, y)| match (x, y) {
                        (None, None) => None,
                        (Some(x), None) => Some(x.clone()),
                        (None, Some(y)) => Some(y.scale(C64::new(-1.0, 0.0))),
                        (Some(x), Some(y)) => Some(x.sub(y).expect("same spin")),
                    })
                    .collect()
            })
            .collect::<Vec<Vec<_>>>()
    };
    Ok(matrix_field_sup(&diff(&fv.alpha, &fw.alpha)).max(matrix_field_sup(&diff(&fv.beta, &fw.beta))))
}

pub fn projector_distance(v: &BundleSpec, w: &BundleSpec, n: usize, lmax: Option<HalfInt>) -> Result<ProjectorDistance> {
    let a_norm = potential_difference_norm(v, w)?;
    let lmax = lmax.unwrap_or_else(|| default_lmax(v, n).max(default_lmax(w, n)));
    let dv = build_dolbeault(v, n, Some(lmax))?;
    let dw = build_dolbeault(w, n, Some(lmax))?;
    let c = dw.weitzenbock.constant;
    let thr = dw.default_threshold();
    let pv = kernel_projector(&dv, Some(thr))?;
    let pw = kernel_projector(&dw, Some(thr))?;
    let measured = operator_norm_mat((pv.matrix.mat() - pw.matrix.mat()).as_ref());
    let gap = n as f64 - c;
    let applicable = gap > 4.0 * a_norm * a_norm;
    let (bound, contour_bound) = if applicable {
        let r = 0.5 * gap.sqrt();
        let integrand = 2.0 * a_norm / gap.sqrt() / (r - a_norm);
        (integrand, r * integrand)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(ProjectorDistance { n, measured, bound, contour_bound, applicable, a_norm, c })
}

/// One CSV row of spectral diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralRow {
    pub n: usize,
    pub bundle: String,
    pub gap: f64,
    pub c: f64,
    pub kernel_rank: usize,
    pub dim_even: usize,
    pub dim_odd: usize,
}

pub fn spectral_row(d: &DolbeaultOperator) -> Result<SpectralRow> {
    let spec = spectrum_d2(d)?;
    let split = kernel_degree_split(d)?;
    Ok(SpectralRow {
        n: d.n,
        bundle: d.bundle.label().to_string(),
        gap: spectral_gap(&spec, d.default_threshold()).unwrap_or(f64::INFINITY),
        c: d.weitzenbock.constant,
        kernel_rank: split.dim_even + split.dim_odd,
        dim_even: split.dim_even,
        dim_odd: split.dim_odd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::Potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed(degrees: &[i32], amplitude: f64, compatible: bool, seed: u64) -> BundleSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Potential::random(&mut rng, degrees, 2, amplitude, compatible);
        BundleSpec::sum(degrees).with_potential(p, "perturbed").unwrap()
    }

    #[test]
    fn trivial_bundle_spectrum_is_casimir_ladder() {
        for n in 1..=10 {
            let d = build_dolbeault(&BundleSpec::trivial(), n, None).unwrap();
            assert!(d.potential_part().max_abs() == 0.0);
            let spec = spectrum_d2(&d).unwrap();
            let zeros = spec.iter().filter(|x| x.abs() < 1e-10).count();
            assert_eq!(zeros, n + 1);
            // Degree 0, spin s = N/2: (l - s)(l + s + 1) for l = s + k.
            let s = n as f64 / 2.0;
            let mut want: Vec<f64> = Vec::new();
            let top = d.lmax().value() + if d.lmax().same_parity(HalfInt::from_twice(n as i32)) { 0.0 } else { 0.5 };
            let mut l = s;
            while l <= top + 1e-9 {
                let ev = (l - s) * (l + s + 1.0);
                let mult = (2.0 * l + 1.0) as usize;
                want.extend(std::iter::repeat_n(ev, mult));
                if l > s {
                    want.extend(std::iter::repeat_n(ev, mult));
                }
                l += 1.0;
            }
            want.sort_by(f64::total_cmp);
            assert_eq!(want.len(), spec.len());
            assert!(want.iter().zip(&spec).all(|(a, b)| (a - b).abs() < 1e-9));
            assert!(spec[n + 1] >= n as f64 - 1.0);
        }
    }

    #[test]
    fn index_is_euler_characteristic() {
        for degrees in [vec![0], vec![3], vec![-2], vec![1, -1], vec![4, 0, -3]] {
            for n in 0..8usize {
                let d = build_dolbeault(&BundleSpec::sum(&degrees), n, None).unwrap();
                let want: i64 = degrees.iter().map(|&p| n as i64 - p as i64 + 1).sum();
                assert_eq!(d.index(), want);
            }
        }
    }

    #[test]
    fn round_gap_closed_form() {
        for p in -3..=5 {
            let v = BundleSpec::line(p);
            assert_eq!(weitzenbock_constant(&v), (p as f64 - 2.0).max(0.0));
            for n in 2..=12usize {
                let d = build_dolbeault(&v, n, None).unwrap();
                let spec = spectrum_d2(&d).unwrap();
                let gap = spectral_gap(&spec, d.default_threshold()).unwrap();
                let want = if n as i32 >= p { n as i32 - p + 2 } else { p - n as i32 };
                assert!((gap - want as f64).abs() < 1e-9, "p={p} N={n}: {gap}");
                assert!(gap >= n as f64 - weitzenbock_constant(&v) - 1e-9);
            }
        }
    }

    #[test]
    fn odd_operator_and_adjointness() {
        let v = perturbed(&[1, -1], 0.3, true, 4);
        let d = build_dolbeault(&v, 5, None).unwrap();
        assert!(d.is_self_adjoint());
        let full = d.full();
        assert!(full.hermitian_deviation() < 1e-13);
        let g = d.grading();
        let sq = full.matmul(&full).unwrap();
        let cross = (0..sq.rows())
            .flat_map(|i| (0..sq.cols()).map(move |j| (i, j)))
            .filter(|&(i, j)| g[i] != g[j])
            .map(|(i, j)| sq.get(i, j).norm())
            .fold(0.0, f64::max);
        assert_eq!(cross, 0.0);
        let w = perturbed(&[1, -1], 0.3, false, 4);
        assert!(!build_dolbeault(&w, 5, None).unwrap().is_self_adjoint());
    }

    #[test]
    fn perturbed_gap_respects_weitzenbock() {
        for (degrees, seed) in [(vec![0], 1), (vec![1, -1], 2), (vec![2, 0], 3)] {
            let v = perturbed(&degrees, 0.5, true, seed);
            let c = weitzenbock_constant(&v);
            for n in 4..=12usize {
                let d = build_dolbeault(&v, n, None).unwrap();
                let spec = spectrum_d2(&d).unwrap();
                let gap = spectral_gap(&spec, d.default_threshold()).unwrap();
                assert!(gap >= n as f64 - c - 1e-9, "{degrees:?} N={n}: gap {gap} C {c}");
            }
        }
    }

    #[test]
    fn cutoff_stability() {
        let v = BundleSpec::sum(&[1, -1]);
        let a = build_dolbeault(&v, 6, None).unwrap();
        let b = build_dolbeault(&v, 6, Some(a.lmax() + HalfInt::int(4))).unwrap();
        let (sa, sb) = (spectrum_d2(&a).unwrap(), spectrum_d2(&b).unwrap());
        assert!(sa.iter().zip(&sb).take(40).all(|(x, y)| (x - y).abs() < 1e-9));
        let w = perturbed(&[1, -1], 0.3, true, 9);
        let a = build_dolbeault(&w, 6, None).unwrap();
        let b = build_dolbeault(&w, 6, Some(a.lmax() + HalfInt::int(4))).unwrap();
        let (sa, sb) = (spectrum_d2(&a).unwrap(), spectrum_d2(&b).unwrap());
        let ka = kernel_projector(&a, None).unwrap().rank;
        assert_eq!(ka, kernel_projector(&b, None).unwrap().rank);
        assert!((spectral_gap(&sa, 3.0).unwrap() - spectral_gap(&sb, 3.0).unwrap()).abs() < 1e-6);
        let low = build_dolbeault(&w, 6, Some(HalfInt::int(3))).unwrap();
        assert!(low.warning().is_some());
        assert!(a.warning().is_none());
    }

    #[test]
    fn projector_trivial_and_small_potential() {
        let d = build_dolbeault(&BundleSpec::trivial(), 7, None).unwrap();
        let p = kernel_projector(&d, None).unwrap();
        assert_eq!(p.rank, 8);
        assert!(p.orthogonal);
        assert!(p.idempotency_defect() < 1e-9);
        let v = perturbed(&[0], 0.2, true, 11);
        let p = kernel_projector(&build_dolbeault(&v, 7, None).unwrap(), None).unwrap();
        assert_eq!(p.rank, 8);
        assert!(p.idempotency_defect() < 1e-9);
    }

    /// Riesz projector against `K (Y* K)⁻¹ Y*` from right and left null vectors.
    #[test]
    fn oblique_projector_matches_oracle() {
        let v = perturbed(&[1, -1], 0.3, false, 21);
        let d = build_dolbeault(&v, 5, None).unwrap();
        let p = kernel_projector(&d, None).unwrap();
        assert!(!p.orthogonal);
        assert!(p.idempotency_defect() < 1e-9);
        let k = null_space(d.plus(), 1e-6);
        // Left kernel of D₋D₊ is the right kernel of (D₋D₊)*.
        let a = d.d2_even();
        let yl = null_space(a.adjoint().to_owned().as_ref(), 1e-6);
        assert_eq!(k.ncols(), yl.ncols());
        let yk = yl.adjoint() * &k;
        let oracle = &k * yk.partial_piv_lu().inverse() * yl.adjoint();
        let e = d.even_modes().len();
        let block = p.matrix.mat().submatrix(0, 0, e, e).to_owned();
        assert!(operator_norm_mat((block - oracle).as_ref()) < 1e-8);
        assert!((p.matrix.trace().re - p.rank as f64).abs() < 1e-6);
    }

    #[test]
    fn degree_split() {
        let h = kernel_degree_split(&build_dolbeault(&BundleSpec::sum(&[1, -1]), 4, None).unwrap()).unwrap();
        assert_eq!((h.dim_even, h.dim_odd), (4 + 6, 0));
        let v = perturbed(&[1, -1], 0.3, false, 5);
        for n in 4..=8usize {
            let s = kernel_degree_split(&build_dolbeault(&v, n, None).unwrap()).unwrap();
            assert!(s.in_regime);
            assert_eq!(s.dim_odd, 0);
            assert_eq!(s.dim_even, 2 * n + 2);
            assert!(s.min_degree0_norm > 1e-6);
        }
        // Negative degree: ker D₋ nonzero, no even kernel at small N.
        let s = kernel_degree_split(&build_dolbeault(&BundleSpec::line(5), 1, None).unwrap()).unwrap();
        assert_eq!((s.dim_even, s.dim_odd), (0, 3));
    }

    #[test]
    fn projector_distance_within_bound() {
        let w = BundleSpec::line(2);
        let same = projector_distance(&w, &w, 8, None).unwrap();
        assert_eq!(same.measured, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Potential::random(&mut rng, &[2], 1, 0.2, true);
        let v = w.with_potential(p, "perturbed").unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in [8, 16, 32] {
            let r = projector_distance(&v, &w, n, None).unwrap();
            assert!(r.applicable);
            assert!(r.measured <= r.contour_bound, "{r:?}");
            // The estimate without the contour length is overtaken between 16 and 32.
            assert_eq!(r.measured <= r.bound, n <= 16, "{r:?}");
            xs.push(n as f64);
            ys.push(r.measured);
        }
        assert!(crate::numerics::loglog_slope(&xs, &ys) <= -0.4);
    }

    #[test]
    fn ambiguous_threshold_is_reported() {
        let d = build_dolbeault(&BundleSpec::trivial(), 4, None).unwrap();
        // N + 2 = 6 is the first nonzero eigenvalue; a threshold at 5 straddles it.
        assert!(matches!(kernel_projector(&d, Some(5.0)), Err(Error::AmbiguousKernel { .. })));
    }
}
