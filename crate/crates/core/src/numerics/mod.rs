//! Numerical kernels: half-integers, Wigner symbols, sphere quadrature and
//! dense linear algebra.

mod halfint;
mod linalg;
mod quadrature;
mod wigner;
mod wigner_d;

pub use halfint::HalfInt;
pub use linalg::{
    hermitian_deviation, hermitian_eigen, hermitian_eigen_mat, hermitian_eigenvalues, hermitian_part, linear_fit,
    loglog_slope, max_abs, null_space, operator_norm, operator_norm_mat, singular_values, DenseMatrix, Space,
    SpaceTag,
};
pub use quadrature::{gauss_legendre, gauss_legendre_sphere, QuadratureGrid, SPHERE_AREA};
pub use wigner::{wigner3j, wigner3j_f64};
pub use wigner_d::{wigner_d, wigner_d_ladder};

pub use num_complex::Complex64 as C64;
