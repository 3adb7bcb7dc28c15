//! Line bundles `O(p)` over `CP¹`, their direct sums with connections, and
//! the Hilbert spaces `H_N` and `Ẽ_N^V` built from them.
//!
//! Sections of `O(k)` are spin-weighted functions of spin `k/2`. Holomorphic
//! sections are the lowest multiplet `l = k/2`; the mode with `m = j - k/2`
//! is the monomial `z^j` in the affine coordinate `z = tan(θ/2) e^{iφ}`.

mod modes;
mod potential;

use std::f64::consts::PI;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use modes::{top_degree, ModeSpace};
pub use potential::{adjoint_fields, block_spin, matrix_field_sup, Potential, PotentialBlock, PotentialFields};

use crate::dolbeault::{build_dolbeault, default_lmax, kernel_basis};
use crate::error::{Error, Result};
use crate::geometry::SpinField;
use crate::numerics::{hermitian_eigenvalues, HalfInt, QuadratureGrid, SpaceTag, C64};

/// `V ≅ ⊕ O(p_i)` with an optional perturbation of the round connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BundleSpecJson", into = "BundleSpecJson")]
pub struct BundleSpec {
    degrees: Vec<i32>,
    potential: Option<Potential>,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct BundleSpecJson {
    degrees: Vec<i32>,
    #[serde(default)]
    potential: Option<Potential>,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<BundleSpecJson> for BundleSpec {
    type Error = Error;
    fn try_from(raw: BundleSpecJson) -> Result<Self> {
        let label = raw.label.unwrap_or_else(|| default_label(&raw.degrees));
        BundleSpec::new(raw.degrees, raw.potential, &label)
    }
}

impl From<BundleSpec> for BundleSpecJson {
    fn from(b: BundleSpec) -> Self {
        BundleSpecJson { degrees: b.degrees, potential: b.potential, label: Some(b.label) }
    }
}

fn default_label(degrees: &[i32]) -> String {
    degrees.iter().map(|p| format!("O({p})")).collect::<Vec<_>>().join("+")
}

impl BundleSpec {
    pub fn new(degrees: Vec<i32>, potential: Option<Potential>, label: &str) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidBundle("a bundle needs at least one summand".into()));
        }
        if let Some(p) = &potential {
            p.fields(&degrees)?;
        }
        Ok(BundleSpec { degrees, potential, label: label.to_string() })
    }

    /// `O(p)` with the round connection.
    pub fn line(p: i32) -> Self {
        Self::sum(&[p])
    }

    /// `⊕ O(p_i)` with the round connection.
    pub fn sum(degrees: &[i32]) -> Self {
        BundleSpec::new(degrees.to_vec(), None, &default_label(degrees)).expect("nonempty")
    }

    pub fn trivial() -> Self {
        Self::line(0)
    }

    pub fn with_potential(&self, potential: Potential, label: &str) -> Result<Self> {
        BundleSpec::new(self.degrees.clone(), Some(potential), label)
    }

    pub fn degrees(&self) -> &[i32] {
        &self.degrees
    }

    pub fn potential(&self) -> Option<&Potential> {
        self.potential.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rank(&self) -> usize {
        self.degrees.len()
    }

    /// `c₁(V)·[CP¹] = Σ p_i`.
    pub fn total_degree(&self) -> i32 {
        self.degrees.iter().sum()
    }

    pub fn potential_fields(&self) -> PotentialFields {
        match &self.potential {
            Some(p) => p.fields(&self.degrees).expect("validated on construction"),
            None => PotentialFields::zero(self.rank()),
        }
    }

    /// No potential, or an identically zero one.
    pub fn is_holomorphic_round(&self) -> bool {
        self.potential.is_none() || self.potential_fields().is_zero()
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.potential.as_ref().is_none_or(|p| p.beta.is_none()) || self.potential_fields().is_compatible(1e-13)
    }

    /// Spin of summand `i` of `V* ⊗ L_N`.
    pub fn twisted_spins(&self, n: usize) -> Vec<HalfInt> {
        self.degrees.iter().map(|&p| HalfInt::from_twice(n as i32 - p)).collect()
    }
}

/// Section `v` of `V`: component `i` is a field of spin `p_i / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionOfV {
    pub components: Vec<SpinField>,
}

impl SectionOfV {
    pub fn new(components: Vec<SpinField>, bundle: &BundleSpec) -> Result<Self> {
        let v = SectionOfV { components };
        v.check(bundle)?;
        Ok(v)
    }

    pub fn check(&self, bundle: &BundleSpec) -> Result<()> {
        if self.components.len() != bundle.rank() {
            return Err(Error::SpaceMismatch(format!(
                "section has {} components, bundle {} has rank {}",
                self.components.len(),
                bundle.label(),
                bundle.rank()
            )));
        }
        for (f, &p) in self.components.iter().zip(bundle.degrees()) {
            if f.spin() != HalfInt::from_twice(p) {
                return Err(Error::SpaceMismatch(format!("component of spin {} in a summand O({p})", f.spin())));
            }
        }
        Ok(())
    }

    pub fn zero(bundle: &BundleSpec) -> Self {
        SectionOfV {
            components: bundle.degrees().iter().map(|&p| SpinField::zero(HalfInt::from_twice(p))).collect(),
        }
    }

    /// Section of the trivial line bundle.
    pub fn scalar(f: &crate::geometry::Symbol) -> Self {
        SectionOfV { components: vec![f.field().clone()] }
    }

    /// Random section with the `band` lowest degrees in each component and
    /// coefficients of modulus at most one.
    pub fn random(rng: &mut impl Rng, bundle: &BundleSpec, band: usize) -> Self {
        let components = bundle
            .degrees()
            .iter()
            .map(|&p| {
                let s = HalfInt::from_twice(p);
                let top = s.abs() + HalfInt::int(band.saturating_sub(1) as i32);
                let terms: Vec<_> = crate::geometry::degrees(s, top)
                    .flat_map(|l| l.projections().map(move |m| (l, m)))
                    .map(|(l, m)| ((l, m), C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                    .collect();
                SpinField::from_coeffs(s, terms).expect("admissible")
            })
            .collect();
        SectionOfV { components }
    }

    pub fn band_limit(&self) -> usize {
        self.components.iter().map(|f| f.band_limit().value().ceil() as usize).max().unwrap_or(0)
    }

    pub fn scale(&self, k: C64) -> SectionOfV {
        SectionOfV { components: self.components.iter().map(|f| f.scale(k)).collect() }
    }

    pub fn add(&self, other: &SectionOfV) -> Result<SectionOfV> {
        let components = self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(SectionOfV { components })
    }

    /// `f · v`.
    pub fn mul_symbol(&self, f: &crate::geometry::Symbol) -> SectionOfV {
        SectionOfV { components: self.components.iter().map(|c| f.field().mul(c)).collect() }
    }

    /// `sup_x |v(x)|` for the round fibre metric.
    pub fn sup_norm(&self) -> f64 {
        let refs: Vec<&SpinField> = self.components.iter().collect();
        crate::geometry::pointwise_sup(&refs).value
    }
}

/// A basis of `H_N` or of `Ẽ_N^V`, as coordinate columns in the ambient
/// degree-0 ⊕ degree-1 mode spaces.
#[derive(Clone, Debug)]
pub struct HilbertBasis {
    pub tag: SpaceTag,
    pub n: usize,
    pub degrees: Vec<i32>,
    pub even_modes: ModeSpace,
    pub odd_modes: ModeSpace,
    /// Rows: `even_modes` then `odd_modes`.
    pub vectors: Mat<C64>,
    pub orthonormal: bool,
    /// Number of leading columns supported in degree 0; the rest are degree 1.
    pub even_columns: usize,
}

impl HilbertBasis {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// `(dim in degree 0, dim in degree 1)`.
    pub fn dims_by_degree(&self) -> (usize, usize) {
        (self.even_columns, self.dim() - self.even_columns)
    }

    /// Coordinate Gram matrix `V* V`; the ambient coordinates are orthonormal.
    pub fn gram(&self) -> Mat<C64> {
        self.vectors.adjoint() * &self.vectors
    }

    /// Ratio of extreme Gram eigenvalues.
    pub fn gram_condition(&self) -> f64 {
        let ev = hermitian_eigenvalues(self.gram().as_ref()).expect("Gram is Hermitian");
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Degree-0 rows of the basis.
    pub fn even_block(&self) -> faer::MatRef<'_, C64> {
        self.vectors.as_ref().subrows(0, self.even_modes.len())
    }

    /// Degree-0 part of column `k` as fields, one per summand.
    pub fn even_fields(&self, k: usize) -> Vec<SpinField> {
        let col = self.vectors.col(k);
        self.even_modes.to_fields(|i| col[i])
    }
}

/// Orthonormal basis of holomorphic sections of `O(N)`, ordered by the
/// monomial degree `z^0, z^1, ..., z^N`.
pub fn h_space(n: usize) -> HilbertBasis {
    let s = HalfInt::from_twice(n as i32);
    let even = ModeSpace::lowest(vec![s]);
    HilbertBasis {
        tag: SpaceTag::holomorphic(n),
        n,
        degrees: vec![0],
        vectors: Mat::identity(even.len(), even.len()),
        odd_modes: ModeSpace::new(vec![], HalfInt::ZERO),
        even_columns: even.len(),
        even_modes: even,
        orthonormal: true,
    }
}

/// `Ẽ_N^V = ker D_V`. For round connections this is read off the multiplets:
/// holomorphic sections of `V* ⊗ L_N` in degree 0 and, for summands of
/// negative twisted degree below `-1`, the harmonic forms in degree 1.
/// Otherwise it is the numerical kernel of the twisted Dolbeault operator.
///
/// `lmax` is the Galerkin cutoff used for the ambient mode spaces; `None`
/// picks [`default_lmax`].
pub fn e_space(bundle: &BundleSpec, n: usize, lmax: Option<HalfInt>) -> Result<HilbertBasis> {
    let lmax = lmax.unwrap_or_else(|| default_lmax(bundle, n));
    if bundle.is_holomorphic_round() {
        let spins = bundle.twisted_spins(n);
        let even = ModeSpace::new(spins.clone(), lmax);
        let odd = ModeSpace::new(spins.iter().map(|&s| s + HalfInt::ONE).collect(), lmax);
        let mut cols = Vec::new();
        for (c, &s) in spins.iter().enumerate() {
            if s >= HalfInt::ZERO {
                for m in s.projections() {
                    cols.push(even.index(c, s, m).ok_or_else(|| {
                        Error::InvalidArgument(format!("lmax {lmax} below the holomorphic multiplet l = {s}"))
                    })?);
                }
            }
        }
        let even_columns = cols.len();
        // H¹: when the degree-1 spin s + 1 is not positive, `ð̄` kills its lowest multiplet.
        for (c, &s) in spins.iter().enumerate() {
            let t = s + HalfInt::ONE;
            if t <= HalfInt::ZERO {
                let l = -t;
                for m in l.projections() {
                    let k = odd.index(c, l, m).ok_or_else(|| {
                        Error::InvalidArgument(format!("lmax {lmax} below the degree-1 kernel multiplet l = {l}"))
                    })?;
                    cols.push(even.len() + k);
                }
            }
        }
        let rows = even.len() + odd.len();
        let vectors = Mat::from_fn(rows, cols.len(), |i, j| if i == cols[j] { C64::new(1.0, 0.0) } else { C64::default() });
        return Ok(HilbertBasis {
            tag: SpaceTag::kernel(bundle.degrees(), n, bundle.label(), cols.len()),
            n,
            degrees: bundle.degrees().to_vec(),
            even_modes: even,
            odd_modes: odd,
            even_columns,
            vectors,
            orthonormal: true,
        });
    }
    let d = build_dolbeault(bundle, n, Some(lmax))?;
    kernel_basis(&d, None)
}

/// Closed-form Gram matrix of the monomials `z^j` in `O(N)` with the
/// Fubini–Study fibre metric: `2π j!(N-j)!/(N+1)!` on the diagonal.
pub fn monomial_gram_exact(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            // j!(N-j)!/(N+1)! = 1 / ((N+1) C(N, j))
            let mut binom = 1.0;
            for k in 0..j {
                binom *= (n - k) as f64 / (k + 1) as f64;
            }
            2.0 * PI / ((n + 1) as f64 * binom)
        })
        .collect()
}

/// Gram matrix of the monomials by quadrature of `conj(z^j) z^k / (1 + |z|²)^N`.
pub fn monomial_gram(n: usize, grid: &QuadratureGrid) -> Result<Mat<C64>> {
    grid.check_exact(2 * n)?;
    let nodes: Vec<(f64, f64)> = grid.nodes().collect();
    let weights: Vec<f64> = grid.weights().collect();
    let section = |k: usize, t: f64, p: f64| {
        // z^k · (1+|z|²)^{-N/2} with |z| = tan(θ/2)
        let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
        C64::from_polar(s.powi(k as i32) * c.powi((n - k) as i32), k as f64 * p)
    };
    Ok(Mat::from_fn(n + 1, n + 1, |j, k| {
        nodes
            .iter()
            .zip(&weights)
            .map(|(&(t, p), &w)| section(j, t, p).conj() * section(k, t, p) * w)
            .sum()
    }))
}

/// Pointwise contraction `v · ψ₀` of a section of `V` with the degree-0 part of
/// column `k` of a basis of `Ẽ_N^V`, sampled on `grid`.
pub fn pair_section(v: &SectionOfV, basis: &HilbertBasis, k: usize, grid: &QuadratureGrid) -> Result<Vec<C64>> {
    check_pairing(v, basis)?;
    let psi = basis.even_fields(k);
    let mut out = vec![C64::default(); grid.len()];
    for (vi, pi) in v.components.iter().zip(&psi) {
        for ((o, a), b) in out.iter_mut().zip(vi.eval_grid(grid)).zip(pi.eval_grid(grid)) {
            *o += a * b;
        }
    }
    Ok(out)
}

/// As [`pair_section`], exactly in the spectral basis: a field of spin `N/2`.
pub fn pair_section_field(v: &SectionOfV, basis: &HilbertBasis, k: usize) -> Result<SpinField> {
    check_pairing(v, basis)?;
    let psi = basis.even_fields(k);
    let mut acc = SpinField::zero(HalfInt::from_twice(basis.n as i32));
    for (vi, pi) in v.components.iter().zip(&psi) {
        acc = acc.add(&vi.mul(pi))?;
    }
    Ok(acc)
}

fn check_pairing(v: &SectionOfV, basis: &HilbertBasis) -> Result<()> {
    if v.components.len() != basis.degrees.len() {
        return Err(Error::SpaceMismatch(format!(
            "section with {} components against {}",
            v.components.len(),
            basis.tag
        )));
    }
    for (f, &p) in v.components.iter().zip(&basis.degrees) {
        if f.spin() != HalfInt::from_twice(p) {
            return Err(Error::SpaceMismatch(format!("component of spin {} against summand O({p})", f.spin())));
        }
    }
    Ok(())
}
