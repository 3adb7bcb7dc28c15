//! Toeplitz and geometric quantization of functions and of sections of `V`,
//! with the convergence diagnostics built on them.
//!
//! `H_N` is the lowest multiplet `l = N/2` of spin-`N/2` fields, so every
//! matrix element is a Gaunt-type triple integral and no quadrature is needed
//! on the default paths.

mod diagnostics;

use faer::Mat;
use serde::Serialize;

use crate::bundles::{e_space, h_space, BundleSpec, HilbertBasis, ModeSpace, PotentialFields, SectionOfV};
use crate::error::{Error, Result};
use crate::geometry::{laplacian, triple_integral, KahlerModel, SpinField, Symbol};
use crate::numerics::{operator_norm_mat, DenseMatrix, HalfInt, QuadratureGrid, SpaceTag, C64};

pub use diagnostics::{
    commutator_projector_bound, gq_toeplitz_gap, module_covariance_defect, module_covariance_defect_on,
    module_gq_toeplitz_gap, module_tuynman_residual, multiplicativity_defect, norm_convergence, params_hash,
    trace_asymptotics, tuynman_residual, Defect, DiagnosticRow, GqGap, NormTable, TraceFit,
};

/// How a [`QuantOperator`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Toeplitz,
    Geometric,
    Product,
    Lifted,
}

/// A quantized function (`End H_N`) or section (`Hom(Ẽ_N^V, H_N)`).
#[derive(Clone, Debug)]
pub struct QuantOperator {
    pub matrix: DenseMatrix,
    pub n: usize,
    pub provenance: Provenance,
}

impl QuantOperator {
    pub fn mat(&self) -> faer::MatRef<'_, C64> {
        self.matrix.mat()
    }

    pub fn norm(&self) -> f64 {
        self.matrix.operator_norm()
    }

    /// `self ∘ rhs`, checked on the space tags.
    pub fn compose(&self, rhs: &QuantOperator) -> Result<QuantOperator> {
        Ok(QuantOperator { matrix: self.matrix.matmul(&rhs.matrix)?, n: self.n, provenance: Provenance::Product })
    }

    /// `‖self - other‖`.
    pub fn distance(&self, other: &QuantOperator) -> Result<f64> {
        Ok(self.matrix.sub(&other.matrix)?.operator_norm())
    }
}

fn spin_of(n: usize) -> HalfInt {
    HalfInt::from_twice(n as i32)
}

fn holomorphic_matrix(n: usize, mat: Mat<C64>, provenance: Provenance) -> QuantOperator {
    let tag = SpaceTag::holomorphic(n);
    QuantOperator { matrix: DenseMatrix::new(mat, tag.clone(), tag).expect("square"), n, provenance }
}

/// `T_N(f) = Π_N f` in the orthonormal monomial basis of `H_N`.
pub fn toeplitz(f: &Symbol, n: usize) -> QuantOperator {
    holomorphic_matrix(n, toeplitz_mat(f.field(), n), Provenance::Toeplitz)
}

/// Compression of a spin-0 field to the lowest spin-`N/2` multiplet.
fn toeplitz_mat(f: &SpinField, n: usize) -> Mat<C64> {
    let s = spin_of(n);
    let ms: Vec<HalfInt> = s.projections().collect();
    let mut out = Mat::<C64>::zeros(ms.len(), ms.len());
    for (&(big_l, big_m), &c) in f.coeffs() {
        if big_l.value() > 2.0 * s.value() {
            // Beyond 2s the triangle rule kills every element.
            continue;
        }
        for (b, &mb) in ms.iter().enumerate() {
            let ma = mb + big_m;
            if ma.abs() > s {
                continue;
            }
            let a = (ma + s).twice() as usize / 2;
            out[(a, b)] += c * triple_integral(s, ma, HalfInt::ZERO, big_l, big_m, s, s, mb);
        }
    }
    out
}

/// `T_N(f)` by quadrature pairing `⟨e_a, f e_b⟩`; cross-check of [`toeplitz`].
pub fn toeplitz_quadrature(f: &Symbol, n: usize, grid: &QuadratureGrid) -> Result<QuantOperator> {
    grid.check_exact(n + f.band_limit())?;
    let s = spin_of(n);
    let basis: Vec<Vec<C64>> = s
        .projections()
        .map(|m| SpinField::basis(s, s, m).expect("lowest multiplet").eval_grid(grid))
        .collect();
    let fv = f.eval_grid(grid);
    // e = √2 b and the grid integrates over the model area, half of dΩ.
    let mat = Mat::from_fn(n + 1, n + 1, |a, b| {
        let vals: Vec<C64> = (0..grid.len()).map(|p| basis[a][p].conj() * fv[p] * basis[b][p]).collect();
        grid.integrate_values(&vals) * 2.0
    });
    Ok(holomorphic_matrix(n, mat, Provenance::Toeplitz))
}

/// `T_N^V(v) = Π_N v` on `Ẽ_N^V`, built from a fresh [`e_space`].
pub fn toeplitz_module(v: &SectionOfV, bundle: &BundleSpec, n: usize) -> Result<QuantOperator> {
    v.check(bundle)?;
    toeplitz_module_on(v, &e_space(bundle, n, None)?)
}

/// `T_N^V(v)` against an existing basis of `Ẽ_N^V`.
pub fn toeplitz_module_on(v: &SectionOfV, basis: &HilbertBasis) -> Result<QuantOperator> {
    if v.components.len() != basis.degrees.len() {
        return Err(Error::SpaceMismatch(format!("section of rank {} against {}", v.components.len(), basis.tag)));
    }
    for (f, &p) in v.components.iter().zip(&basis.degrees) {
        if f.spin() != HalfInt::from_twice(p) {
            return Err(Error::SpaceMismatch(format!("component of spin {} against summand O({p})", f.spin())));
        }
    }
    let target = ModeSpace::lowest(vec![spin_of(basis.n)]);
    let row: Vec<Option<&SpinField>> = v.components.iter().map(Some).collect();
    let mv = basis.even_modes.multiplication_matrix(&target, &[row]);
    let mat = mv * basis.even_block();
    Ok(QuantOperator {
        matrix: DenseMatrix::new(mat, SpaceTag::holomorphic(basis.n), basis.tag.clone())?,
        n: basis.n,
        provenance: Provenance::Toeplitz,
    })
}

fn require_positive(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("geometric quantization needs N >= 1".into()));
    }
    Ok(())
}

/// `Q_N(f) = T_N(f + Δf / 2N)`.
pub fn geometric(f: &Symbol, n: usize) -> Result<QuantOperator> {
    require_positive(n)?;
    let lap = laplacian(f, &KahlerModel::default());
    let g = f.add(&lap.scale(1.0 / (2.0 * n as f64)));
    Ok(QuantOperator { provenance: Provenance::Geometric, ..toeplitz(&g, n) })
}

/// `Q_N(f)` from the derivative form `Π_N[fψ + (1/N)(ðf)(ð̄ψ)]`.
pub fn geometric_derivative_form(f: &Symbol, n: usize) -> Result<QuantOperator> {
    require_positive(n)?;
    let s = spin_of(n);
    let df = f.field().edth().scale(C64::new(1.0 / n as f64, 0.0));
    let mut mat = Mat::<C64>::zeros(n + 1, n + 1);
    for (b, mb) in s.projections().enumerate() {
        let psi = SpinField::basis(s, s, mb).expect("lowest multiplet");
        let chi = f.field().mul(&psi).add(&df.mul(&psi.edth_bar()))?;
        for (a, ma) in s.projections().enumerate() {
            mat[(a, b)] = chi.coeff(s, ma);
        }
    }
    Ok(holomorphic_matrix(n, mat, Provenance::Geometric))
}

/// `ð_V v = ðv - αᵀv`: components of spin `p_i/2 + 1`.
pub fn covariant_edth(v: &SectionOfV, fields: &PotentialFields) -> SectionOfV {
    let r = v.components.len();
    let components = (0..r)
        .map(|i| {
            let mut acc = v.components[i].edth();
            for j in 0..r {
                if let Some(a) = &fields.alpha[j][i] {
                    acc = acc.sub(&a.mul(&v.components[j])).expect("spins match");
                }
            }
            acc
        })
        .collect();
    SectionOfV { components }
}

/// `ð̄_V w = ð̄w + βᵀw` on components of spin `p_i/2 + 1`.
pub fn covariant_edth_bar(w: &SectionOfV, fields: &PotentialFields) -> SectionOfV {
    let r = w.components.len();
    let components = (0..r)
        .map(|i| {
            let mut acc = w.components[i].edth_bar();
            for j in 0..r {
                if let Some(b) = &fields.beta[j][i] {
                    acc = acc.add(&b.mul(&w.components[j])).expect("spins match");
                }
            }
            acc
        })
        .collect();
    SectionOfV { components }
}

/// `ð̄_V ð_V v`, the second-derivative datum controlling `Q^V - T^V`.
pub fn second_covariant_derivative(v: &SectionOfV, bundle: &BundleSpec) -> SectionOfV {
    let fields = bundle.potential_fields();
    covariant_edth_bar(&covariant_edth(v, &fields), &fields)
}

/// `Q_N^V(v) = T_N^V(v - (1/N) ð̄_V ð_V v)`.
pub fn geometric_module(v: &SectionOfV, bundle: &BundleSpec, n: usize) -> Result<QuantOperator> {
    v.check(bundle)?;
    geometric_module_on(v, bundle, &e_space(bundle, n, None)?)
}

pub fn geometric_module_on(v: &SectionOfV, bundle: &BundleSpec, basis: &HilbertBasis) -> Result<QuantOperator> {
    require_positive(basis.n)?;
    let lap = second_covariant_derivative(v, bundle);
    let w = v.add(&lap.scale(C64::new(-1.0 / basis.n as f64, 0.0)))?;
    Ok(QuantOperator { provenance: Provenance::Geometric, ..toeplitz_module_on(&w, basis)? })
}

/// `Q_N^V(v)` from the derivative form `Π_N[v·ψ + (1/N)(ð_V v)·(ð̄ - β)ψ]`.
pub fn geometric_module_derivative_form(
    v: &SectionOfV,
    bundle: &BundleSpec,
    basis: &HilbertBasis,
) -> Result<QuantOperator> {
    require_positive(basis.n)?;
    let fields = bundle.potential_fields();
    let dv = covariant_edth(v, &fields);
    let s = spin_of(basis.n);
    let inv_n = C64::new(1.0 / basis.n as f64, 0.0);
    let r = v.components.len();
    let mut mat = Mat::<C64>::zeros(basis.n + 1, basis.dim());
    for k in 0..basis.dim() {
        let psi = basis.even_fields(k);
        let mut chi = SpinField::zero(s);
        for j in 0..r {
            let mut grad = psi[j].edth_bar();
            for i in 0..r {
                if let Some(b) = &fields.beta[j][i] {
                    grad = grad.sub(&b.mul(&psi[i]))?;
                }
            }
            chi = chi.add(&v.components[j].mul(&psi[j]))?.add(&dv.components[j].mul(&grad).scale(inv_n))?;
        }
        for (a, ma) in s.projections().enumerate() {
            mat[(a, k)] = chi.coeff(s, ma) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    Ok(QuantOperator {
        matrix: DenseMatrix::new(mat, SpaceTag::holomorphic(basis.n), basis.tag.clone())?,
        n: basis.n,
        provenance: Provenance::Geometric,
    })
}

/// `tr(op) / dim`, so that the identity has normalized trace 1.
pub fn normalized_trace(op: &QuantOperator) -> Result<C64> {
    if op.matrix.rows() != op.matrix.cols() {
        return Err(Error::SpaceMismatch(format!(
            "trace of a {}x{} operator",
            op.matrix.rows(),
            op.matrix.cols()
        )));
    }
    Ok(op.matrix.trace() / op.matrix.rows() as f64)
}

/// Orthonormal basis of `H_N`, re-exported for callers that only need `N`.
pub fn holomorphic_basis(n: usize) -> HilbertBasis {
    h_space(n)
}

/// Operator norm of a matrix difference, used by several diagnostics.
pub(crate) fn diff_norm(a: faer::MatRef<'_, C64>, b: faer::MatRef<'_, C64>) -> f64 {
    operator_norm_mat((a - b).as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gauss_legendre_sphere, hermitian_eigenvalues, singular_values};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unital_and_height_function() {
        for n in 1..=12 {
            let t = toeplitz(&Symbol::constant(1.0), n);
            assert!(diff_norm(t.mat(), Mat::<C64>::identity(n + 1, n + 1).as_ref()) < 1e-13);
            let c = toeplitz(&Symbol::cos_theta(), n);
            for k in 0..=n {
                for j in 0..=n {
                    let want = if j == k { (n as f64 - 2.0 * k as f64) / (n as f64 + 2.0) } else { 0.0 };
                    assert!((c.mat()[(j, k)] - C64::new(want, 0.0)).norm() < 1e-13, "N={n} ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn quadrature_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Symbol::random_real(&mut rng, 4, true);
        let n = 6;
        let grid = gauss_legendre_sphere(8, 12).unwrap();
        let q = toeplitz_quadrature(&f, n, &grid).unwrap();
        assert!(diff_norm(q.mat(), toeplitz(&f, n).mat()) < 1e-12);
        let coarse = gauss_legendre_sphere(3, 5).unwrap();
        assert!(matches!(toeplitz_quadrature(&f, n, &coarse), Err(Error::QuadratureTooCoarse { .. })));
    }

    #[test]
    fn hermitian_contracting_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 3, 8, 15] {
            let f = Symbol::random_real(&mut rng, 4, true);
            let t = toeplitz(&f, n);
            assert!(t.matrix.hermitian_deviation() < 1e-12);
            assert!(t.norm() <= crate::geometry::sup_norm(&f) + 1e-3);
            // |g|² is pointwise nonnegative.
            let g = Symbol::random_real(&mut rng, 3, true);
            let p = toeplitz(&g.mul(&g), n);
            let ev = hermitian_eigenvalues(p.mat()).unwrap();
            assert!(ev[0] >= -1e-9);
        }
    }

    #[test]
    fn surjective_for_small_n() {
        for n in 1..=8usize {
            let mut rows = Vec::new();
            for l in 0..=n as i32 {
                for m in -l..=l {
                    let t = toeplitz(&Symbol::harmonic(l, m).unwrap(), n);
                    rows.push(t.mat().to_owned());
                }
            }
            let d = (n + 1) * (n + 1);
            let stacked = Mat::from_fn(rows.len(), d, |r, k| rows[r][(k / (n + 1), k % (n + 1))]);
            let sv = singular_values(stacked.as_ref());
            assert_eq!(sv.iter().filter(|&&x| x > 1e-10).count(), d, "N={n}");
        }
    }

    #[test]
    fn geometric_examples() {
        let n = 7;
        let q = geometric(&Symbol::constant(1.0), n).unwrap();
        assert!(diff_norm(q.mat(), Mat::<C64>::identity(n + 1, n + 1).as_ref()) < 1e-13);
        let f = Symbol::cos_theta();
        let lam = KahlerModel::default().laplace_eigenvalue(1);
        let want = toeplitz(&f, n).matrix.scale(C64::new(1.0 + lam / (2.0 * n as f64), 0.0));
        assert!(diff_norm(geometric(&f, n).unwrap().mat(), want.mat()) < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Symbol::random_real(&mut rng, 3, false);
        assert!(geometric(&g, n).unwrap().matrix.hermitian_deviation() < 1e-12);
        assert!(geometric(&g, 0).is_err());
    }

    #[test]
    fn tuynman_identity() {
        for n in 1..=12 {
            for (l, m) in [(0, 0), (1, 0), (1, 1), (2, -1), (2, 2), (3, 1)] {
                let f = Symbol::harmonic(l, m).unwrap();
                let a = geometric(&f, n).unwrap();
                let b = geometric_derivative_form(&f, n).unwrap();
                assert!(diff_norm(a.mat(), b.mat()) < 1e-12, "N={n} l={l} m={m}");
            }
        }
    }

    #[test]
    fn module_reduces_to_scalar() {
        let v = BundleSpec::trivial();
        let n = 5;
        let one = SectionOfV::scalar(&Symbol::constant(1.0));
        let t = toeplitz_module(&one, &v, n).unwrap();
        assert!(diff_norm(t.mat(), Mat::<C64>::identity(n + 1, n + 1).as_ref()) < 1e-13);
        let zero = toeplitz_module(&SectionOfV::zero(&v), &v, n).unwrap();
        assert_eq!(zero.matrix.max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Symbol::random_real(&mut rng, 3, true);
        let fv = SectionOfV::scalar(&f);
        assert!(diff_norm(toeplitz_module(&fv, &v, n).unwrap().mat(), toeplitz(&f, n).mat()) < 1e-12);
        let qv = geometric_module(&fv, &v, n).unwrap();
        assert!(diff_norm(qv.mat(), geometric(&f, n).unwrap().mat()) < 1e-12);
    }

    #[test]
    fn module_contracting_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for degrees in [vec![1], vec![1, -1], vec![2, 0]] {
            let bundle = BundleSpec::sum(&degrees);
            let v = SectionOfV::random(&mut rng, &bundle, 2);
            for n in [3, 6] {
                let basis = e_space(&bundle, n, None).unwrap();
                let t = toeplitz_module_on(&v, &basis).unwrap();
                assert!(t.norm() <= v.sup_norm() + 1e-3);
                let q = geometric_module_on(&v, &bundle, &basis).unwrap();
                let d = geometric_module_derivative_form(&v, &bundle, &basis).unwrap();
                assert!(diff_norm(q.mat(), d.mat()) < 1e-12);
            }
        }
        // Perturbed connection: the identity does not need holomorphic ψ.
        let p = crate::bundles::Potential::random(&mut rng, &[1, -1], 2, 0.3, false);
        let bundle = BundleSpec::sum(&[1, -1]).with_potential(p, "perturbed").unwrap();
        let v = SectionOfV::random(&mut rng, &bundle, 2);
        let basis = e_space(&bundle, 6, None).unwrap();
        let q = geometric_module_on(&v, &bundle, &basis).unwrap();
        let d = geometric_module_derivative_form(&v, &bundle, &basis).unwrap();
        assert!(diff_norm(q.mat(), d.mat()) < 1e-12);
    }

    #[test]
    fn covariantly_constant_sections() {
        let bundle = BundleSpec::sum(&[0, 0]);
        let v = SectionOfV {
            components: vec![Symbol::constant(2.0).into_field(), Symbol::constant(-0.5).into_field()],
        };
        let basis = e_space(&bundle, 4, None).unwrap();
        let q = geometric_module_on(&v, &bundle, &basis).unwrap();
        let t = toeplitz_module_on(&v, &basis).unwrap();
        assert!(diff_norm(q.mat(), t.mat()) < 1e-14);
    }

    #[test]
    fn traces() {
        let t = toeplitz(&Symbol::constant(1.0), 9);
        assert!((normalized_trace(&t).unwrap() - 1.0).norm() < 1e-13);
        let bundle = BundleSpec::line(1);
        let v = SectionOfV::random(&mut ChaCha8Rng::seed_from_u64(6), &bundle, 1);
        let rect = toeplitz_module(&v, &bundle, 3).unwrap();
        assert!(normalized_trace(&rect).is_err());
    }
}
