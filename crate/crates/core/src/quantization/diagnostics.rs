use std::f64::consts::{PI, SQRT_2};
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    diff_norm, geometric, geometric_module_derivative_form, geometric_module_on, second_covariant_derivative,
    toeplitz, toeplitz_module_on,
};
use crate::bundles::{e_space, BundleSpec, HilbertBasis, ModeSpace, SectionOfV};
use crate::dolbeault::weitzenbock_constant;
use crate::error::Result;
use crate::geometry::{gradient_sup_norm, integrate_spectral, laplacian, sup_norm, KahlerModel, Symbol};
use crate::numerics::{linear_fit, operator_norm_mat, HalfInt};

/// A measured quantity and the estimate it should stay below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Defect {
    pub n: usize,
    pub defect: f64,
    pub bound: f64,
}

impl Defect {
    pub fn within(&self) -> bool {
        self.defect <= self.bound
    }
}

/// `√2 (N - C)^{-1/2}`, infinite when `N ≤ C`.
fn gradient_factor(n: usize, c: f64) -> f64 {
    let gap = n as f64 - c;
    if gap > 0.0 { SQRT_2 / gap.sqrt() } else { f64::INFINITY }
}

/// `‖T_N(f)T_N(g) - T_N(fg)‖` against `√2 (N - C)^{-1/2} ‖∇f‖ ‖g‖`.
pub fn multiplicativity_defect(f: &Symbol, g: &Symbol, n: usize) -> Defect {
    let model = KahlerModel::default();
    let c = weitzenbock_constant(&BundleSpec::trivial());
    let lhs = toeplitz(f, n).mat() * toeplitz(g, n).mat();
    let defect = diff_norm(lhs.as_ref(), toeplitz(&f.mul(g), n).mat());
    let bound = gradient_factor(n, c) * gradient_sup_norm(f, &model) * sup_norm(g);
    Defect { n, defect, bound }
}

/// `‖T_N(f)T_N^V(v) - T_N^V(fv)‖` against `√2 (N - C)^{-1/2} ‖∇f‖ ‖v‖`.
pub fn module_covariance_defect(f: &Symbol, v: &SectionOfV, bundle: &BundleSpec, n: usize) -> Result<Defect> {
    v.check(bundle)?;
    let basis = e_space(bundle, n, None)?;
    module_covariance_defect_on(f, v, &basis, weitzenbock_constant(bundle))
}

/// As [`module_covariance_defect`] with a precomputed basis and gap constant.
pub fn module_covariance_defect_on(f: &Symbol, v: &SectionOfV, basis: &HilbertBasis, c: f64) -> Result<Defect> {
    let n = basis.n;
    let tv = toeplitz_module_on(v, basis)?;
    let lhs = toeplitz(f, n).compose(&tv)?;
    let defect = lhs.distance(&toeplitz_module_on(&v.mul_symbol(f), basis)?)?;
    let bound = gradient_factor(n, c) * gradient_sup_norm(f, &KahlerModel::default()) * v.sup_norm();
    Ok(Defect { n, defect, bound })
}

/// `‖[f, Π_N]‖` on spin-`N/2` fields, against `√2 (N - C)^{-1/2} ‖∇f‖`.
///
/// Only degrees up to `N/2 + band(f)` couple to `H_N`, so the truncated
/// ambient space gives the exact value.
pub fn commutator_projector_bound(f: &Symbol, n: usize) -> Defect {
    let s = HalfInt::from_twice(n as i32);
    let low = ModeSpace::lowest(vec![s]);
    let amb = ModeSpace::new(vec![s], s + HalfInt::int(f.band_limit() as i32));
    let fields = [vec![Some(f.field())]];
    let out = low.multiplication_matrix(&amb, &fields);
    let back = amb.multiplication_matrix(&low, &fields);
    let k = low.len();
    let leak_out = out.as_ref().subrows(k, amb.len() - k);
    let leak_in = back.as_ref().subcols(k, amb.len() - k);
    let defect = operator_norm_mat(leak_out).max(operator_norm_mat(leak_in));
    let c = weitzenbock_constant(&BundleSpec::trivial());
    Defect { n, defect, bound: gradient_factor(n, c) * gradient_sup_norm(f, &KahlerModel::default()) }
}

/// Distance between the derivative form of `Q_N(f)` and `T_N(f + Δf/2N)`.
pub fn tuynman_residual(f: &Symbol, n: usize) -> Result<f64> {
    let a = super::geometric_derivative_form(f, n)?;
    Ok(a.distance(&geometric(f, n)?)?)
}

/// Module analogue of [`tuynman_residual`].
pub fn module_tuynman_residual(v: &SectionOfV, bundle: &BundleSpec, basis: &HilbertBasis) -> Result<f64> {
    let a = geometric_module_derivative_form(v, bundle, basis)?;
    Ok(a.distance(&geometric_module_on(v, bundle, basis)?)?)
}

/// `‖Q_N(f) - T_N(f)‖ = ‖T_N(Δf)‖ / 2N` with two estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GqGap {
    pub n: usize,
    pub measured: f64,
    /// `λ_max ‖f‖ / 2N` with `λ_max` the Laplace eigenvalue at the band limit.
    pub bound: f64,
    /// `‖Δf‖ / 2N`, which always dominates.
    pub laplacian_bound: f64,
}

pub fn gq_toeplitz_gap(f: &Symbol, n: usize) -> Result<GqGap> {
    let model = KahlerModel::default();
    let measured = geometric(f, n)?.distance(&toeplitz(f, n))?;
    let two_n = 2.0 * n as f64;
    Ok(GqGap {
        n,
        measured,
        bound: model.laplace_eigenvalue(f.band_limit()) * sup_norm(f) / two_n,
        laplacian_bound: sup_norm(&laplacian(f, &model)) / two_n,
    })
}

/// `‖Q_N^V(v) - T_N^V(v)‖` against `‖ð̄_V ð_V v‖ / N`.
pub fn module_gq_toeplitz_gap(v: &SectionOfV, bundle: &BundleSpec, basis: &HilbertBasis) -> Result<Defect> {
    let q = geometric_module_on(v, bundle, basis)?;
    let defect = q.distance(&toeplitz_module_on(v, basis)?)?;
    let bound = second_covariant_derivative(v, bundle).sup_norm() / basis.n as f64;
    Ok(Defect { n: basis.n, defect, bound })
}

/// `‖T_N(f)‖` over a range of `N`, and how far the last one is from `‖f‖`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormTable {
    pub rows: Vec<(usize, f64)>,
    pub sup_norm: f64,
    pub final_gap: f64,
}

pub fn norm_convergence(f: &Symbol, ns: &[usize]) -> NormTable {
    let mut rows: Vec<(usize, f64)> = ns.par_iter().map(|&n| (n, toeplitz(f, n).norm())).collect();
    rows.sort_by_key(|r| r.0);
    let sup = sup_norm(f);
    let final_gap = rows.last().map_or(f64::NAN, |r| (r.1 - sup).abs());
    NormTable { rows, sup_norm: sup, final_gap }
}

/// Linear fit of `tr T_N(f)` in `N` against `(1/2π) ∫ f ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceFit {
    pub leading: f64,
    pub intercept: f64,
    pub target: f64,
    pub relative_error: f64,
}

pub fn trace_asymptotics(f: &Symbol, ns: &[usize]) -> TraceFit {
    let traces: Vec<f64> = ns.par_iter().map(|&n| toeplitz(f, n).matrix.trace().re).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (leading, intercept) = linear_fit(&xs, &traces);
    let target = integrate_spectral(f, &KahlerModel::default()).re / (2.0 * PI);
    TraceFit { leading, intercept, target, relative_error: ((leading - target) / target).abs() }
}

/// CSV row shared by all diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub bound: f64,
    pub params_hash: String,
}

/// Short stable digest of an experiment's parameters.
pub fn params_hash(params: &impl Serialize) -> String {
    let json = serde_json::to_string(params).expect("parameters serialize");
    let mut h = std::collections::hash_map::DefaultHasher::new();
    json.hash(&mut h);
    format!("{:016x}", h.finish())
}
