//! The Kähler model of `CP¹`: normalization, scalar symbols and their
//! calculus.
//!
//! The sphere is normalized to total area `2π`, so `∫ω/2π = 1` and the
//! round metric has radius² = 1/2. With that, the Laplacian `Δ = -∇²` has
//! eigenvalue `2l(l+1)` on degree-`l` harmonics.

mod field;
mod symbol;

use std::f64::consts::PI;

pub use field::{check_mode, degrees, triple_integral, Mode, SpinField};
pub use symbol::Symbol;

use crate::error::Result;
use crate::numerics::{QuadratureGrid, C64, SPHERE_AREA};

/// Normalization constants and quadrature of the round `CP¹`.
#[derive(Clone, Debug)]
pub struct KahlerModel {
    /// `∫ ω`.
    pub area: f64,
    /// `ω = symplectic_scale · dA`.
    pub symplectic_scale: f64,
    /// Scale of the Poisson bivector, inverse to `ω`.
    pub poisson_scale: f64,
    quadrature: QuadratureGrid,
}

impl Default for KahlerModel {
    fn default() -> Self {
        Self::cp1()
    }
}

impl KahlerModel {
    /// Round model with a quadrature exact through degree 127.
    pub fn cp1() -> Self {
        Self::with_quadrature(QuadratureGrid::for_degree(127))
    }

    pub fn with_quadrature(quadrature: QuadratureGrid) -> Self {
        KahlerModel { area: SPHERE_AREA, symplectic_scale: 1.0, poisson_scale: 1.0, quadrature }
    }

    pub fn quadrature(&self) -> &QuadratureGrid {
        &self.quadrature
    }

    /// `∫ ω / 2π`, the degree of the prequantum line bundle.
    pub fn line_bundle_degree(&self) -> f64 {
        self.area * self.symplectic_scale / (2.0 * PI)
    }

    /// Squared radius of the round sphere with this area.
    pub fn radius_squared(&self) -> f64 {
        self.area / (4.0 * PI)
    }

    /// Eigenvalue of `Δ = -∇²` on degree-`l` harmonics.
    pub fn laplace_eigenvalue(&self, l: usize) -> f64 {
        (l * (l + 1)) as f64 / self.radius_squared()
    }

    /// Converts `∫ · dΩ` on the unit sphere into `∫ · ω`.
    pub fn unit_to_model(&self) -> f64 {
        self.area * self.symplectic_scale / (4.0 * PI)
    }
}

/// `Δ f`, exactly.
pub fn laplacian(f: &Symbol, model: &KahlerModel) -> Symbol {
    Symbol::from_coeffs(f.terms().map(|(l, m, c)| ((l, m), c * model.laplace_eigenvalue(l as usize))))
        .expect("modes unchanged")
}

/// A grid maximum together with the angular spacing of the grid it was taken on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMax {
    pub value: f64,
    pub resolution: f64,
}

/// Evaluation grid with both poles, four times finer than the smallest exact
/// quadrature for band limit `band`.
pub fn fine_grid(band: usize) -> (Vec<f64>, Vec<f64>) {
    let n_theta = 4 * (band + 2) + 1;
    let n_phi = 8 * (band + 1);
    let thetas = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    let phis = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    (thetas, phis)
}

/// Max over the fine grid of `sqrt(Σ_i |f_i|²)`. All fields are evaluated on
/// the same points.
pub fn pointwise_sup(fields: &[&SpinField]) -> GridMax {
    let band = fields
        .iter()
        .map(|f| f.band_limit().value().ceil() as usize)
        .max()
        .unwrap_or(0);
    pointwise_sup_on(fields, band)
}

/// As [`pointwise_sup`], on the fine grid for an explicit band limit.
pub fn pointwise_sup_on(fields: &[&SpinField], band: usize) -> GridMax {
    let (thetas, phis) = fine_grid(band);
    let mut acc = vec![0.0; thetas.len() * phis.len()];
    for f in fields {
        for (a, v) in acc.iter_mut().zip(f.eval_rings(&thetas, &phis)) {
            *a += v.norm_sqr();
        }
    }
    GridMax {
        value: acc.into_iter().fold(0.0, f64::max).sqrt(),
        resolution: PI / (thetas.len() - 1) as f64,
    }
}

/// `sup |f|` on the fine grid.
pub fn sup_norm(f: &Symbol) -> f64 {
    sup_norm_report(f).value
}

pub fn sup_norm_report(f: &Symbol) -> GridMax {
    pointwise_sup(&[f.field()])
}

/// `sup |∇f|` in the model metric, on the fine grid.
///
/// Uses `|∇f|² = (|ðf|² + |ð̄f|²) / (2 r²)`.
pub fn gradient_sup_norm(f: &Symbol, model: &KahlerModel) -> f64 {
    gradient_sup_norm_report(f, model).value
}

pub fn gradient_sup_norm_report(f: &Symbol, model: &KahlerModel) -> GridMax {
    let up = f.field().edth();
    let down = f.field().edth_bar();
    let raw = pointwise_sup(&[&up, &down]);
    GridMax { value: raw.value / (2.0 * model.radius_squared()).sqrt(), ..raw }
}

/// `∫ f ω` by the model quadrature; errors if `f` exceeds its exactness.
pub fn integrate(f: &Symbol, model: &KahlerModel) -> Result<C64> {
    let q = model.quadrature();
    q.check_exact(f.band_limit())?;
    let vals = f.eval_grid(q);
    Ok(q.integrate_values(&vals) * (model.area * model.symplectic_scale / SPHERE_AREA))
}

/// `∫ f ω` from the constant coefficient alone.
pub fn integrate_spectral(f: &Symbol, model: &KahlerModel) -> C64 {
    f.coeff(0, 0) * (4.0 * PI).sqrt() * model.unit_to_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numerics::gauss_legendre_sphere;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rnd(seed: u64, band: i32) -> Symbol {
        Symbol::random_real(&mut ChaCha8Rng::seed_from_u64(seed), band, true)
    }

    #[test]
    fn model_constants() {
        let m = KahlerModel::cp1();
        assert!((m.area - 2.0 * PI).abs() < 1e-15);
        assert!((m.line_bundle_degree() - 1.0).abs() < 1e-15);
        assert_eq!(m.laplace_eigenvalue(0), 0.0);
        for l in 0..50 {
            assert!((m.laplace_eigenvalue(l) - 2.0 * (l * (l + 1)) as f64).abs() < 1e-9);
            assert!(m.laplace_eigenvalue(l + 1) > m.laplace_eigenvalue(l));
        }
    }

    #[test]
    fn laplacian_examples() {
        let m = KahlerModel::cp1();
        assert!(laplacian(&Symbol::constant(3.0), &m).terms().all(|(_, _, c)| c.norm() == 0.0));
        let y = Symbol::harmonic(1, 0).unwrap();
        let ly = laplacian(&y, &m);
        assert!((ly.coeff(1, 0) - C64::new(m.laplace_eigenvalue(1), 0.0)).norm() < 1e-14);
    }

    /// `∫ f Δf ≥ 0` by quadrature of the pointwise product.
    #[test]
    fn laplacian_is_positive() {
        let m = KahlerModel::cp1();
        for seed in 0..5 {
            let f = rnd(seed, 6);
            let v = integrate(&f.mul(&laplacian(&f, &m)), &m).unwrap();
            assert!(v.re >= -1e-12 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn sup_norms() {
        assert!((sup_norm(&Symbol::constant(-2.5)) - 2.5).abs() < 1e-12);
        let r = sup_norm_report(&Symbol::cos_theta());
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.resolution > 0.0 && r.resolution < 0.3);
    }

    /// `|∇ cos θ|` on the unit sphere is `sin θ`; the model radius is `1/√2`,
    /// so the maximum is `√2`.
    #[test]
    fn gradient_of_height_function() {
        let m = KahlerModel::cp1();
        assert_eq!(gradient_sup_norm(&Symbol::constant(1.0), &m), 0.0);
        assert!((gradient_sup_norm(&Symbol::cos_theta(), &m) - 2f64.sqrt()).abs() < 1e-12);
        // Finite-difference check at one point of a generic symbol.
        let f = rnd(3, 4);
        let (t, p, h) = (1.1, 0.6, 1e-6);
        let dt = (f.eval(t + h, p) - f.eval(t - h, p)) / (2.0 * h);
        let dp = (f.eval(t, p + h) - f.eval(t, p - h)) / (2.0 * h) / t.sin();
        let fd = ((dt.norm_sqr() + dp.norm_sqr()) / m.radius_squared()).sqrt();
        let up = f.field().edth().eval(t, p);
        let down = f.field().edth_bar().eval(t, p);
        let spectral = ((up.norm_sqr() + down.norm_sqr()) / (2.0 * m.radius_squared())).sqrt();
        assert!((fd - spectral).abs() < 1e-6);
    }

    #[test]
    fn integrals() {
        let m = KahlerModel::cp1();
        assert!((integrate(&Symbol::constant(1.0), &m).unwrap() - C64::new(2.0 * PI, 0.0)).norm() < 1e-12);
        for l in 1..6 {
            for mm in -l..=l {
                assert!(integrate(&Symbol::harmonic(l, mm).unwrap(), &m).unwrap().norm() < 1e-13);
            }
        }
        // Parseval: ∫ f² = Σ|c|² · (model area / unit area).
        let f = rnd(11, 7);
        let lhs = integrate(&f.mul(&f), &m).unwrap();
        let rhs: f64 = f.terms().map(|(_, _, c)| c.norm_sqr()).sum::<f64>() * m.unit_to_model();
        assert!((lhs.re - rhs).abs() < 1e-11);
        assert!((integrate_spectral(&f, &m) - integrate(&f, &m).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn integration_rejects_coarse_grid() {
        let m = KahlerModel::with_quadrature(gauss_legendre_sphere(3, 5).unwrap());
        let err = integrate(&Symbol::harmonic(9, 0).unwrap(), &m).unwrap_err();
        assert!(matches!(err, Error::QuadratureTooCoarse { required_theta: 5, required_phi: 10, .. }));
    }

    #[test]
    fn json_shape() {
        let f = Symbol::cos_theta();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with("{\"coeffs\":[[1,0,"));
        let back: Symbol = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Symbol>("{\"coeffs\":[[1,2,1.0,0.0]]}").is_err());
    }

    #[test]
    fn real_harmonics_are_real() {
        for l in 0..4 {
            for mm in -l..=l {
                let f = Symbol::real_harmonic(l, mm).unwrap();
                assert!(f.is_real());
                assert!(f.eval(0.7, 1.3).im.abs() < 1e-14);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_through_grid(seed in 0u64..10_000, band in 0i32..10) {
            let f = rnd(seed, band);
            let grid = QuadratureGrid::for_degree(2 * band as usize);
            let back = Symbol::from_grid_values(band as usize, &grid, &f.eval_grid(&grid)).unwrap();
            for (l, mm, c) in f.terms() {
                prop_assert!((back.coeff(l, mm) - c).norm() < 1e-12);
            }
        }

        #[test]
        fn laplacian_is_symmetric(a in 0u64..10_000, b in 0u64..10_000) {
            let m = KahlerModel::cp1();
            let (f, g) = (rnd(a, 5), rnd(b, 5));
            let x = integrate(&f.mul(&laplacian(&g, &m)), &m).unwrap();
            let y = integrate(&g.mul(&laplacian(&f, &m)), &m).unwrap();
            prop_assert!((x - y).norm() < 1e-10);
        }

        #[test]
        fn gradient_norm_is_homogeneous(seed in 0u64..10_000, k in -3.0f64..3.0) {
            let m = KahlerModel::cp1();
            let f = rnd(seed, 4);
            let a = gradient_sup_norm(&f.scale(k), &m);
            let b = k.abs() * gradient_sup_norm(&f, &m);
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + b));
        }

        #[test]
        fn gradient_norm_triangle(a in 0u64..10_000, b in 0u64..10_000) {
            let m = KahlerModel::cp1();
            let (f, g) = (rnd(a, 4), rnd(b, 3));
            prop_assert!(gradient_sup_norm(&f.add(&g), &m) <= gradient_sup_norm(&f, &m) + gradient_sup_norm(&g, &m) + 1e-12);
        }

        #[test]
        fn sup_norm_submultiplicative(a in 0u64..10_000, b in 0u64..10_000) {
            let (f, g) = (rnd(a, 3), rnd(b, 3));
            let fg = f.mul(&g);
            let sup = |h: &Symbol| pointwise_sup_on(&[h.field()], 6).value;
            prop_assert!(sup(&fg) <= sup(&f) * sup(&g) * (1.0 + 1e-9) + 1e-12);
        }
    }
}
