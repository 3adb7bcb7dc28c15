use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product rule on the sphere: Gauss–Legendre in `cos θ`, uniform in `φ`.
///
/// Weights are scaled so that they sum to the model area `2π`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureGrid {
    thetas: Vec<f64>,
    theta_weights: Vec<f64>,
    phis: Vec<f64>,
    phi_weight: f64,
    exactness_degree: usize,
}

/// Total area of the sphere under the model normalization.
pub const SPHERE_AREA: f64 = 2.0 * PI;

/// Builds the product rule with `n_theta` latitude rings and `n_phi` meridians.
pub fn gauss_legendre_sphere(n_theta: usize, n_phi: usize) -> Result<QuadratureGrid> {
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::EmptyGrid { n_theta, n_phi });
    }
    let (x, w) = gauss_legendre(n_theta);
    // x ascending means θ descending; store rings from the north pole down.
    let thetas: Vec<f64> = x.iter().rev().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
    // dA on the unit sphere is d(cos θ) dφ; the model sphere has half that area.
    let theta_weights: Vec<f64> = w.iter().rev().map(|wi| 0.5 * wi).collect();
    let phis = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    Ok(QuadratureGrid {
        thetas,
        theta_weights,
        phis,
        phi_weight: 2.0 * PI / n_phi as f64,
        exactness_degree: (2 * n_theta - 1).min(n_phi - 1),
    })
}

impl QuadratureGrid {
    /// Smallest grid that integrates products of total degree `degree` exactly.
    pub fn for_degree(degree: usize) -> QuadratureGrid {
        gauss_legendre_sphere(degree / 2 + 1, degree + 1).expect("sizes are positive")
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phis.len()
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    /// Ring weight including the `φ` spacing.
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.theta_weights[i] * self.phi_weight
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    /// Nodes `(θ, φ)` in ring-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thetas.iter().flat_map(move |&t| self.phis.iter().map(move |&p| (t, p)))
    }

    /// Weights in the same order as [`nodes`](Self::nodes).
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_theta()).flat_map(move |i| std::iter::repeat_n(self.ring_weight(i), self.n_phi()))
    }

    /// Errors unless products up to total degree `band_limit` are exact.
    pub fn check_exact(&self, band_limit: usize) -> Result<()> {
        if band_limit <= self.exactness_degree {
            return Ok(());
        }
        Err(Error::QuadratureTooCoarse {
            band_limit,
            exactness: self.exactness_degree,
            required_theta: band_limit / 2 + 1,
            required_phi: band_limit + 1,
        })
    }

    /// Quadrature sum of values given in node order.
    pub fn integrate_values<T>(&self, values: &[T]) -> T
    where
        T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(values.len(), self.len());
        values.iter().zip(self.weights()).map(|(&v, w)| v * w).sum()
    }
}
