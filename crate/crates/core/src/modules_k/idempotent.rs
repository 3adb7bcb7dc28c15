use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::Serialize;

use super::{stable_from, RankPolynomial};
use crate::error::{Error, Result};
use crate::geometry::{fine_grid, Symbol};
use crate::numerics::{gauss_legendre, hermitian_deviation, hermitian_eigen_mat, operator_norm_mat, C64};
use crate::quantization::toeplitz;

/// A square matrix of symbols, `e[i][j]`.
pub type SymbolMatrix = Vec<Vec<Symbol>>;

fn check_square(e: &SymbolMatrix) -> Result<usize> {
    let m = e.len();
    if m == 0 || e.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("symbol matrix must be square and nonempty".into()));
    }
    Ok(m)
}

fn eval_at(e: &SymbolMatrix, theta: f64, phi: f64) -> Mat<C64> {
    Mat::from_fn(e.len(), e.len(), |i, j| e[i][j].eval(theta, phi))
}

/// The projector onto the tautological line `x·σ = 1`:
/// `e = (1 + x·σ)/2` with `x` the unit position vector.
pub fn bott_projector() -> SymbolMatrix {
    let c = (8.0 * PI / 3.0).sqrt() / 2.0;
    let harmonic = |m: i32| Symbol::harmonic(1, m).expect("l = 1 harmonic");
    vec![
        vec![Symbol::constant(0.5).add(&Symbol::cos_theta().scale(0.5)), harmonic(-1).scale(c)],
        vec![harmonic(1).scale(-c), Symbol::constant(0.5).sub(&Symbol::cos_theta().scale(0.5))],
    ]
}

pub fn block_diagonal(a: &SymbolMatrix, b: &SymbolMatrix) -> SymbolMatrix {
    let (m, k) = (a.len(), b.len());
    (0..m + k)
        .map(|i| {
            (0..m + k)
                .map(|j| match (i < m, j < m) {
                    (true, true) => a[i][j].clone(),
                    (false, false) => b[i - m][j - m].clone(),
                    _ => Symbol::zero(),
                })
                .collect()
        })
        .collect()
}

/// `sup_x ‖e(x)² - e(x)‖` on the fine grid.
pub fn pointwise_idempotency(e: &SymbolMatrix) -> Result<f64> {
    check_square(e)?;
    let band = e.iter().flatten().map(Symbol::band_limit).max().unwrap_or(0);
    let (thetas, phis) = fine_grid(2 * band);
    let mut worst = 0.0f64;
    for &t in &thetas {
        for &p in &phis {
            let x = eval_at(e, t, p);
            worst = worst.max(operator_norm_mat((&x * &x - &x).as_ref()));
        }
    }
    Ok(worst)
}

/// First Chern number of the image of `e`,
/// `(i/2π) ∫ tr(e [∂_θ e, ∂_φ e]) dθ dφ`.
pub fn chern_number(e: &SymbolMatrix) -> Result<f64> {
    check_square(e)?;
    let band = e.iter().flatten().map(Symbol::band_limit).max().unwrap_or(0);
    let nodes = 3 * band + 8;
    let (xs, ws) = gauss_legendre(nodes);
    let n_phi = 2 * (3 * band + 2);
    let h = 1e-5;
    let mut total = C64::default();
    for (x, w) in xs.iter().zip(&ws) {
        // Map [-1, 1] to θ ∈ [0, π] linearly.
        let theta = PI * (x + 1.0) / 2.0;
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let at = eval_at(e, theta, phi);
            let d_theta = (eval_at(e, theta + h, phi) - eval_at(e, theta - h, phi)) * faer::Scale(C64::new(0.5 / h, 0.0));
            let d_phi = (eval_at(e, theta, phi + h) - eval_at(e, theta, phi - h)) * faer::Scale(C64::new(0.5 / h, 0.0));
            let comm = &d_theta * &d_phi - &d_phi * &d_theta;
            let prod = &at * &comm;
            let tr: C64 = (0..e.len()).map(|i| prod[(i, i)]).sum();
            total += tr * (w * PI / 2.0) * (2.0 * PI / n_phi as f64);
        }
    }
    Ok((C64::new(0.0, 1.0) * total).re / (2.0 * PI))
}

/// Rank polynomial of the module cut out by an idempotent symbol. The image
/// of `e` plays the part of `V*`, so the degree entering the polynomial is
/// `-c₁(image)`: the Bott projector (image `O(-1)`) gives `N`.
pub fn idempotent_polynomial(e: &SymbolMatrix) -> Result<RankPolynomial> {
    let m = check_square(e)?;
    let rank = (0..m).map(|i| e[i][i].coeff(0, 0).re).sum::<f64>() / (4.0 * PI).sqrt();
    let c1 = chern_number(e)?;
    Ok(super::rank_polynomial(rank.round() as i64, -c1.round() as i64))
}

/// One `N` of a lifted idempotent.
#[derive(Clone, Debug, Serialize)]
pub struct LiftEntry {
    #[serde(skip)]
    pub matrix: Mat<C64>,
    pub trace: f64,
    /// `‖ẽ² - ẽ‖`.
    pub idempotency: f64,
    /// `‖T_N(e) - ẽ‖`.
    pub distance: f64,
    /// Distance from `1/2` of the spectrum of `T_N(e)`.
    pub spectral_margin: f64,
}

#[derive(Clone, Debug)]
pub struct LiftedIdempotent {
    pub size: usize,
    pub polynomial: RankPolynomial,
    pub per_n: BTreeMap<usize, LiftEntry>,
}

/// `T_N(e)` as an `m(N+1)` square block matrix.
fn quantized_block(e: &SymbolMatrix, n: usize) -> Mat<C64> {
    let m = e.len();
    let d = n + 1;
    let blocks: Vec<Vec<Mat<C64>>> =
        e.iter().map(|row| row.iter().map(|f| toeplitz(f, n).matrix.into_mat()).collect()).collect();
    Mat::from_fn(m * d, m * d, |r, c| blocks[r / d][c / d][(r % d, c % d)])
}

/// Spectral projection of `T_N(e)` onto eigenvalues with real part above `1/2`.
/// Fails if some eigenvalue sits within `gap_tol` of `1/2`.
pub fn lift_idempotent(e: &SymbolMatrix, ns: &[usize], gap_tol: f64) -> Result<LiftedIdempotent> {
    let m = check_square(e)?;
    let deviation = pointwise_idempotency(e)?;
    if deviation > 1e-10 {
        return Err(Error::NotIdempotent { deviation });
    }
    let polynomial = idempotent_polynomial(e)?;
    let mut per_n = BTreeMap::new();
    for &n in ns {
        let a = quantized_block(e, n);
        let (matrix, margin, worst) = if hermitian_deviation(a.as_ref()) < 1e-12 {
            let (vals, vecs) = hermitian_eigen_mat(a.as_ref())?;
            let (margin, worst) = closest_to_half(vals.iter().copied());
            let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.5).collect();
            let u = Mat::from_fn(a.nrows(), keep.len(), |i, k| vecs[(i, keep[k])]);
            (&u * u.adjoint(), margin, worst)
        } else {
            let eig = a.eigen().map_err(|err| Error::LinearAlgebra(format!("{err:?}")))?;
            let vals: Vec<C64> = (0..a.nrows()).map(|k| eig.S()[k]).collect();
            let (margin, worst) = closest_to_half(vals.iter().map(|z| z.re));
            let u = eig.U().to_owned();
            let inv = u.partial_piv_lu().inverse();
            let mask = Mat::from_fn(a.nrows(), a.nrows(), |i, j| {
                if i == j && vals[i].re > 0.5 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::default()
                }
            });
            (&u * &mask * &inv, margin, worst)
        };
        if margin < gap_tol {
            return Err(Error::NoIdempotentGap { n, eigenvalue: worst, gap_tol });
        }
        let trace = (0..matrix.nrows()).map(|i| matrix[(i, i)].re).sum::<f64>();
        let idempotency = operator_norm_mat((&matrix * &matrix - &matrix).as_ref());
        let distance = operator_norm_mat((&a - &matrix).as_ref());
        per_n.insert(n, LiftEntry { matrix, trace, idempotency, distance, spectral_margin: margin });
    }
    Ok(LiftedIdempotent { size: m, polynomial, per_n })
}

fn closest_to_half(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.map(|v| ((v - 0.5).abs(), v)).fold((f64::INFINITY, 0.5), |acc, x| if x.0 < acc.0 { x } else { acc })
}

/// `tr ẽ_N` against the rank polynomial of the idempotent.
#[derive(Clone, Debug, Serialize)]
pub struct TraceCheck {
    /// `(N, tr ẽ_N, predicted)`.
    pub rows: Vec<(usize, f64, i64)>,
    pub threshold: Option<usize>,
}

pub fn idempotent_trace_check(lift: &LiftedIdempotent) -> TraceCheck {
    let rows: Vec<(usize, f64, i64)> =
        lift.per_n.iter().map(|(&n, entry)| (n, entry.trace, lift.polynomial.value(n))).collect();
    let rounded: Vec<(usize, i64, i64)> = rows
        .iter()
        .map(|&(n, t, p)| (n, if (t - t.round()).abs() < 1e-8 { t.round() as i64 } else { i64::MIN }, p))
        .collect();
    TraceCheck { threshold: stable_from(&rounded), rows }
}
