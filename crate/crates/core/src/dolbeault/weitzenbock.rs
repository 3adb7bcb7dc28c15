use faer::Mat;

use crate::bundles::{matrix_field_sup, BundleSpec};
use crate::geometry::{fine_grid, SpinField};
use crate::numerics::{hermitian_eigenvalues, operator_norm_mat, C64};

/// Curvature term of `D²` on degree-1 forms and the resulting gap constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeitzenbockReport {
    /// `C = max(0, -inf_x λ_min K̂(x))`, so that `D² ≥ N - C` off the kernel.
    pub constant: f64,
    /// `sup_x ‖K̂(x)‖`, the cruder admissible choice of `C`.
    pub curvature_sup: f64,
    /// `sup_x ‖B(x)‖` for the part `B = (α - β*)/2` that breaks self-adjointness.
    pub skew_norm: f64,
}

/// `K̂` on degree 1 for the compatible part `(α₀, β₀ = α₀*)` of the potential:
/// `diag(2 - p_i) + ð̄α₀ + ðβ₀ + α₀β₀ - β₀α₀`, as fields indexed `[to][from]`
/// (without the constant diagonal).
pub fn curvature_fields(bundle: &BundleSpec) -> Vec<Vec<Option<SpinField>>> {
    let comp = bundle.potential_fields().compatible_part();
    let r = bundle.rank();
    let (a, b) = (&comp.alpha, &comp.beta);
    let mut out: Vec<Vec<Option<SpinField>>> = vec![vec![None; r]; r];
    let push = |slot: &mut Option<SpinField>, f: SpinField| {
        *slot = Some(match slot.take() {
            Some(prev) => prev.add(&f).expect("curvature entries share a spin"),
            None => f,
        });
    };
    for j in 0..r {
        for i in 0..r {
            let slot = &mut out[j][i];
            if let Some(f) = &a[j][i] {
                push(slot, f.edth_bar());
            }
            if let Some(f) = &b[j][i] {
                push(slot, f.edth());
            }
            for k in 0..r {
                if let (Some(x), Some(y)) = (&a[j][k], &b[k][i]) {
                    push(slot, x.mul(y));
                }
                if let (Some(x), Some(y)) = (&b[j][k], &a[k][i]) {
                    push(slot, x.mul(y).scale(C64::new(-1.0, 0.0)));
                }
            }
        }
    }
    out
}

pub fn weitzenbock(bundle: &BundleSpec) -> WeitzenbockReport {
    let fields = curvature_fields(bundle);
    let r = bundle.rank();
    let band = fields
        .iter()
        .flatten()
        .flatten()
        .map(|f| f.band_limit().value().ceil() as usize)
        .max()
        .unwrap_or(0);
    let (thetas, phis) = fine_grid(band);
    let vals: Vec<Vec<Option<Vec<C64>>>> = fields
        .iter()
        .map(|row| row.iter().map(|f| f.as_ref().map(|f| f.eval_rings(&thetas, &phis))).collect())
        .collect();
    let mut min_eig = f64::INFINITY;
    let mut sup = 0.0f64;
    for p in 0..thetas.len() * phis.len() {
        let k = Mat::<C64>::from_fn(r, r, |j, i| {
            let diag = if i == j { C64::new(2.0 - bundle.degrees()[i] as f64, 0.0) } else { C64::default() };
            diag + vals[j][i].as_ref().map_or(C64::default(), |v| v[p])
        });
        let h = crate::numerics::hermitian_part(k.as_ref());
        let ev = hermitian_eigenvalues(h.as_ref()).expect("Hermitian part");
        min_eig = min_eig.min(ev[0]);
        sup = sup.max(operator_norm_mat(k.as_ref()));
    }
    let skew = bundle.potential_fields().skew_part();
    WeitzenbockReport { constant: (-min_eig).max(0.0), curvature_sup: sup, skew_norm: matrix_field_sup(&skew) }
}

/// Gap constant `C` with `spec D² ⊂ {0} ∪ [N - C, ∞)` for compatible connections.
pub fn weitzenbock_constant(bundle: &BundleSpec) -> f64 {
    weitzenbock(bundle).constant
}
