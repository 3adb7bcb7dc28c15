use std::fmt;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which Hilbert space a matrix index ranges over.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    /// Holomorphic sections `H_N` of `O(N)`.
    Holomorphic { n: usize },
    /// Kernel of the twisted Dolbeault operator for the bundle with these degrees.
    Kernel { degrees: Vec<i32>, n: usize, label: String },
    /// Truncated ambient spin-weighted space.
    Ambient { spin_twice: i32, lmax_twice: i32 },
    /// Untagged coordinate space.
    Plain,
}

/// A space together with its dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceTag {
    pub space: Space,
    pub dim: usize,
}

impl SpaceTag {
    pub fn plain(dim: usize) -> Self {
        SpaceTag { space: Space::Plain, dim }
    }

    pub fn holomorphic(n: usize) -> Self {
        SpaceTag { space: Space::Holomorphic { n }, dim: n + 1 }
    }

    pub fn kernel(degrees: &[i32], n: usize, label: &str, dim: usize) -> Self {
        SpaceTag {
            space: Space::Kernel { degrees: degrees.to_vec(), n, label: label.to_string() },
            dim,
        }
    }

    /// Plain tags are compatible with anything of the right size.
    pub fn compatible(&self, other: &SpaceTag) -> bool {
        self.dim == other.dim && (self.space == other.space || self.space == Space::Plain || other.space == Space::Plain)
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.space {
            Space::Holomorphic { n } => write!(f, "H_{n}"),
            Space::Kernel { label, n, .. } => write!(f, "E_{n}[{label}]"),
            Space::Ambient { spin_twice, lmax_twice } => write!(f, "L2[s={spin_twice}/2, l<={lmax_twice}/2]"),
            Space::Plain => write!(f, "C^{}", self.dim),
        }?;
        if !matches!(self.space, Space::Plain) {
            write!(f, " (dim {})", self.dim)?;
        }
        Ok(())
    }
}

/// A dense complex matrix mapping `col_space` into `row_space`.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    mat: Mat<C64>,
    row_space: SpaceTag,
    col_space: SpaceTag,
}

impl DenseMatrix {
    pub fn new(mat: Mat<C64>, row_space: SpaceTag, col_space: SpaceTag) -> Result<Self> {
        if mat.nrows() != row_space.dim || mat.ncols() != col_space.dim {
            return Err(Error::SpaceMismatch(format!(
                "{}x{} matrix tagged {} <- {}",
                mat.nrows(),
                mat.ncols(),
                row_space,
                col_space
            )));
        }
        Ok(DenseMatrix { mat, row_space, col_space })
    }

    /// Wraps a matrix with plain tags.
    pub fn from_mat(mat: Mat<C64>) -> Self {
        let (r, c) = (mat.nrows(), mat.ncols());
        DenseMatrix { mat, row_space: SpaceTag::plain(r), col_space: SpaceTag::plain(c) }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::from_mat(Mat::from_fn(rows, cols, f))
    }

    pub fn identity(tag: SpaceTag) -> Self {
        let n = tag.dim;
        DenseMatrix { mat: Mat::identity(n, n), row_space: tag.clone(), col_space: tag }
    }

    pub fn zeros(row_space: SpaceTag, col_space: SpaceTag) -> Self {
        DenseMatrix { mat: Mat::zeros(row_space.dim, col_space.dim), row_space, col_space }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn row_space(&self) -> &SpaceTag {
        &self.row_space
    }

    pub fn col_space(&self) -> &SpaceTag {
        &self.col_space
    }

    pub fn mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn retag(mut self, row_space: SpaceTag, col_space: SpaceTag) -> Result<Self> {
        let mat = std::mem::replace(&mut self.mat, Mat::new());
        DenseMatrix::new(mat, row_space, col_space)
    }

    pub fn adjoint(&self) -> DenseMatrix {
        DenseMatrix {
            mat: self.mat.adjoint().to_owned(),
            row_space: self.col_space.clone(),
            col_space: self.row_space.clone(),
        }
    }

    /// Composition `self ∘ rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if !self.col_space.compatible(&rhs.row_space) {
            return Err(Error::SpaceMismatch(format!("cannot compose {} with {}", self.col_space, rhs.row_space)));
        }
        Ok(DenseMatrix {
            mat: &self.mat * &rhs.mat,
            row_space: self.row_space.clone(),
            col_space: rhs.col_space.clone(),
        })
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        Ok(DenseMatrix { mat: &self.mat - &rhs.mat, ..self.clone() })
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        Ok(DenseMatrix { mat: &self.mat + &rhs.mat, ..self.clone() })
    }

    pub fn scale(&self, k: C64) -> DenseMatrix {
        let mat = Mat::from_fn(self.rows(), self.cols(), |i, j| self.mat[(i, j)] * k);
        DenseMatrix { mat, ..self.clone() }
    }

    fn check_same_shape(&self, rhs: &DenseMatrix) -> Result<()> {
        if !self.row_space.compatible(&rhs.row_space) || !self.col_space.compatible(&rhs.col_space) {
            return Err(Error::SpaceMismatch(format!(
                "{} <- {} vs {} <- {}",
                self.row_space, self.col_space, rhs.row_space, rhs.col_space
            )));
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows().min(self.cols())).map(|i| self.mat[(i, i)]).sum()
    }

    /// Largest entrywise modulus of `self - self*`.
    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(self.mat.as_ref())
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm_mat(self.mat.as_ref())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.mat.as_ref())
    }
}

pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn hermitian_deviation(m: MatRef<'_, C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mut dev = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
///
/// Input is accepted when `max |A - A*| ≤ 1e-10 · max(1, max |A|)`; the
/// Hermitian part is what gets decomposed.
pub fn hermitian_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let (vals, vecs) = hermitian_eigen_mat(m.mat())?;
    let tag = m.row_space().clone();
    Ok((vals, DenseMatrix::new(vecs, tag.clone(), SpaceTag::plain(tag.dim))?))
}

pub fn hermitian_eigen_mat(m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let h = hermitian_part(m);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues only; same acceptance rule as [`hermitian_eigen`].
pub fn hermitian_eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    hermitian_part(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
}

/// `(A + A*) / 2`.
pub fn hermitian_part(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> f64 {
    m.operator_norm()
}

pub fn operator_norm_mat(m: MatRef<'_, C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values, nonincreasing.
pub fn singular_values(m: MatRef<'_, C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.singular_values().expect("SVD converges on finite input")
}

/// Orthonormal basis (as columns) of the numerical null space: right singular
/// vectors with singular value at most `tol`.
pub fn null_space(m: MatRef<'_, C64>, tol: f64) -> Mat<C64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let svd = m.svd().expect("SVD converges on finite input");
    let s = svd.S().column_vector();
    let v = svd.V();
    let cols: Vec<usize> = (0..n).filter(|&k| k >= s.nrows() || s[k].re <= tol).collect();
    Mat::from_fn(n, cols.len(), |i, j| v[(i, cols[j])])
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<C64> {
        Mat::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn power_iteration(m: MatRef<'_, C64>) -> f64 {
        let g = m.adjoint() * m;
        let mut v = Mat::<C64>::from_fn(g.nrows(), 1, |i, _| C64::new(1.0 + i as f64 * 0.01, 0.3));
        let mut lam = 0.0;
        for _ in 0..5000 {
            let w = &g * &v;
            let nrm = w.norm_l2();
            lam = nrm;
            v = Mat::from_fn(w.nrows(), 1, |i, _| w[(i, 0)] / nrm);
        }
        lam.sqrt()
    }

    #[test]
    fn trivial_spectra() {
        let (vals, _) = hermitian_eigen(&DenseMatrix::identity(SpaceTag::plain(3))).unwrap();
        assert_eq!(vals.len(), 3);
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let (vals, _) = hermitian_eigen(&DenseMatrix::from_real_diagonal(&[2.0, -1.0])).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&mut rng, 50, 50);
        let h = DenseMatrix::from_mat(&a + a.adjoint());
        let (vals, u) = hermitian_eigen(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lam = Mat::from_fn(50, 50, |i, j| if i == j { C64::new(vals[i], 0.0) } else { C64::new(0.0, 0.0) });
        let resid = h.mat() * u.mat() - u.mat() * &lam;
        assert!(operator_norm_mat(resid.as_ref()) < 1e-9 * h.operator_norm());
        let unit = u.mat().adjoint() * u.mat() - Mat::<C64>::identity(50, 50);
        assert!(operator_norm_mat(unit.as_ref()) < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DenseMatrix::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(hermitian_eigen(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn operator_norm_cases() {
        assert_eq!(DenseMatrix::zeros(SpaceTag::plain(3), SpaceTag::plain(2)).operator_norm(), 0.0);
        assert!((DenseMatrix::from_real_diagonal(&[3.0, -4.0]).operator_norm() - 4.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(&mut rng, 30, 20);
        let got = operator_norm_mat(a.as_ref());
        let want = power_iteration(a.as_ref());
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn space_tags_are_checked() {
        let h = DenseMatrix::identity(SpaceTag::holomorphic(2));
        let e = DenseMatrix::identity(SpaceTag::kernel(&[0], 2, "x", 3));
        assert!(h.matmul(&e).is_err());
        assert!(DenseMatrix::new(Mat::zeros(2, 2), SpaceTag::holomorphic(2), SpaceTag::plain(2)).is_err());
        assert!(h.matmul(&DenseMatrix::identity(SpaceTag::plain(3))).is_ok());
    }

    #[test]
    fn null_space_and_fit() {
        let m = Mat::<C64>::from_fn(2, 3, |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        let k = null_space(m.as_ref(), 1e-12);
        assert_eq!(k.ncols(), 1);
        assert!((k[(2, 0)].norm() - 1.0).abs() < 1e-12);
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn norm_is_submultiplicative(seed in 0u64..1_000, n in 1usize..12, k in 1usize..12, m in 1usize..12) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(&mut rng, n, k);
                let b = random(&mut rng, k, m);
                let ab = &a * &b;
                prop_assert!(operator_norm_mat(ab.as_ref()) <= operator_norm_mat(a.as_ref()) * operator_norm_mat(b.as_ref()) * (1.0 + 1e-12));
            }

            #[test]
            fn eigenvalues_sorted_and_unitary(seed in 0u64..1_000, n in 1usize..16) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(&mut rng, n, n);
                let (vals, u) = hermitian_eigen_mat((&a + a.adjoint()).as_ref()).unwrap();
                prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
                let unit = u.adjoint() * &u - Mat::<C64>::identity(n, n);
                prop_assert!(operator_norm_mat(unit.as_ref()) < 1e-9);
            }
        }
    }
}
