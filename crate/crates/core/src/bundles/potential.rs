use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{degrees as admissible, pointwise_sup_on, SpinField};
use crate::numerics::{operator_norm_mat, HalfInt, C64};

/// One block of an endomorphism-valued form, from summand `from` to summand
/// `to`, as `[l, m, re, im]` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialBlock {
    pub from: usize,
    pub to: usize,
    pub coeffs: Vec<[f64; 4]>,
}

/// Perturbation of the round connection on `V* ⊗ L_N`.
///
/// `alpha` is added to the `(0,1)` part, so the degree-raising half of the
/// Dolbeault operator becomes `ð + α`. `beta` enters the degree-lowering half
/// as `-ð̄ + β`. When `beta` is absent the connection is unitary and
/// `β = α*` pointwise, which makes the operator self-adjoint.
///
/// Block `j ← i` of `α` has spin `1 + (p_i - p_j)/2`, of `β` spin
/// `-1 + (p_i - p_j)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub alpha: Vec<PotentialBlock>,
    #[serde(default)]
    pub beta: Option<Vec<PotentialBlock>>,
}

/// Spin of block `to ← from` of `α` (`shift = 1`) or `β` (`shift = -1`).
pub fn block_spin(degrees: &[i32], to: usize, from: usize, shift: i32) -> HalfInt {
    HalfInt::from_twice(2 * shift + degrees[from] - degrees[to])
}

/// Pointwise matrices of a potential as spin-weighted fields, indexed `[to][from]`.
#[derive(Clone, Debug)]
pub struct PotentialFields {
    pub alpha: Vec<Vec<Option<SpinField>>>,
    pub beta: Vec<Vec<Option<SpinField>>>,
}

impl PotentialFields {
    pub fn zero(rank: usize) -> Self {
        PotentialFields { alpha: vec![vec![None; rank]; rank], beta: vec![vec![None; rank]; rank] }
    }

    pub fn rank(&self) -> usize {
        self.alpha.len()
    }

    pub fn band_limit(&self) -> usize {
        self.alpha
            .iter()
            .chain(&self.beta)
            .flatten()
            .flatten()
            .map(|f| f.band_limit().value().ceil() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().chain(&self.beta).flatten().flatten().all(|f| f.is_zero())
    }

    /// `β_{ji} = conj(α_{ij})` for all blocks, to `tol` in coefficients.
    pub fn is_compatible(&self, tol: f64) -> bool {
        let r = self.rank();
        for j in 0..r {
            for i in 0..r {
                let d = match (&self.beta[j][i], &self.alpha[i][j]) {
                    (None, None) => 0.0,
                    (Some(b), None) => max_coeff(b),
                    (None, Some(a)) => max_coeff(a),
                    (Some(b), Some(a)) => max_coeff(&b.sub(&a.conj()).unwrap()),
                };
                if d > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Fields scaled by a real factor.
    pub fn scaled(&self, t: f64) -> PotentialFields {
        let sc = |m: &Vec<Vec<Option<SpinField>>>| {
            m.iter()
                .map(|row| row.iter().map(|f| f.as_ref().map(|f| f.scale(C64::new(t, 0.0)))).collect())
                .collect()
        };
        PotentialFields { alpha: sc(&self.alpha), beta: sc(&self.beta) }
    }

    /// Compatible part: `α₀ = (α + β*)/2`, `β₀ = α₀*`.
    pub fn compatible_part(&self) -> PotentialFields {
        let r = self.rank();
        let mut alpha = vec![vec![None; r]; r];
        for j in 0..r {
            for i in 0..r {
                let a = self.alpha[j][i].clone();
                let bt = self.beta[i][j].as_ref().map(|b| b.conj());
                alpha[j][i] = half_sum(a, bt);
            }
        }
        let beta = adjoint_fields(&alpha);
        PotentialFields { alpha, beta }
    }

    /// `(α - β*)/2`, the part that spoils self-adjointness.
    pub fn skew_part(&self) -> Vec<Vec<Option<SpinField>>> {
        let r = self.rank();
        let mut out = vec![vec![None; r]; r];
        for j in 0..r {
            for i in 0..r {
                let a = self.alpha[j][i].clone();
                let bt = self.beta[i][j].as_ref().map(|b| b.conj().scale(C64::new(-1.0, 0.0)));
                out[j][i] = half_sum(a, bt);
            }
        }
        out
    }
}

fn max_coeff(f: &SpinField) -> f64 {
    f.coeffs().values().map(|c| c.norm()).fold(0.0, f64::max)
}

fn half_sum(a: Option<SpinField>, b: Option<SpinField>) -> Option<SpinField> {
    let h = C64::new(0.5, 0.0);
    match (a, b) {
        (None, None) => None,
        (Some(a), None) => Some(a.scale(h)),
        (None, Some(b)) => Some(b.scale(h)),
        (Some(a), Some(b)) => Some(a.add(&b).expect("matching spins").scale(h)),
    }
}

/// `[to][from]` pointwise adjoint: entry `(j, i)` is `conj(m[i][j])`.
pub fn adjoint_fields(m: &[Vec<Option<SpinField>>]) -> Vec<Vec<Option<SpinField>>> {
    let r = m.len();
    (0..r).map(|j| (0..r).map(|i| m[i][j].as_ref().map(|f| f.conj())).collect()).collect()
}

/// `sup_x ‖M(x)‖` (pointwise operator norm) on the fine grid.
pub fn matrix_field_sup(m: &[Vec<Option<SpinField>>]) -> f64 {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let band = m
        .iter()
        .flatten()
        .flatten()
        .map(|f| f.band_limit().value().ceil() as usize)
        .max();
    let Some(band) = band else { return 0.0 };
    if rows == 1 && cols == 1 {
        return m[0][0].as_ref().map_or(0.0, |f| pointwise_sup_on(&[f], band).value);
    }
    let (thetas, phis) = crate::geometry::fine_grid(band);
    let npts = thetas.len() * phis.len();
    let vals: Vec<Vec<Option<Vec<C64>>>> = m
        .iter()
        .map(|row| row.iter().map(|f| f.as_ref().map(|f| f.eval_rings(&thetas, &phis))).collect())
        .collect();
    let mut best = 0.0f64;
    for p in 0..npts {
        let a = faer::Mat::<C64>::from_fn(rows, cols, |j, i| vals[j][i].as_ref().map_or(C64::default(), |v| v[p]));
        best = best.max(operator_norm_mat(a.as_ref()));
    }
    best
}

fn block_field(degrees: &[i32], b: &PotentialBlock, shift: i32) -> Result<SpinField> {
    let r = degrees.len();
    if b.from >= r || b.to >= r {
        return Err(Error::InvalidBundle(format!(
            "potential block {} -> {} outside rank {r}",
            b.from, b.to
        )));
    }
    let spin = block_spin(degrees, b.to, b.from, shift);
    let mut terms = Vec::with_capacity(b.coeffs.len());
    for &[l, m, re, im] in &b.coeffs {
        let (l, m) = (HalfInt::try_from(l)?, HalfInt::try_from(m)?);
        terms.push(((l, m), C64::new(re, im)));
    }
    SpinField::from_coeffs(spin, terms).map_err(|e| Error::InvalidBundle(format!("block {} -> {}: {e}", b.from, b.to)))
}

fn collect_blocks(degrees: &[i32], blocks: &[PotentialBlock], shift: i32) -> Result<Vec<Vec<Option<SpinField>>>> {
    let r = degrees.len();
    let mut out: Vec<Vec<Option<SpinField>>> = vec![vec![None; r]; r];
    for b in blocks {
        let f = block_field(degrees, b, shift)?;
        let slot = &mut out[b.to][b.from];
        *slot = Some(match slot.take() {
            Some(prev) => prev.add(&f)?,
            None => f,
        });
    }
    Ok(out)
}

fn to_blocks(m: &[Vec<Option<SpinField>>]) -> Vec<PotentialBlock> {
    let mut out = Vec::new();
    for (to, row) in m.iter().enumerate() {
        for (from, f) in row.iter().enumerate() {
            if let Some(f) = f {
                let coeffs = f
                    .coeffs()
                    .iter()
                    .map(|(&(l, mm), c)| [l.value(), mm.value(), c.re, c.im])
                    .collect();
                out.push(PotentialBlock { from, to, coeffs });
            }
        }
    }
    out
}

impl Potential {
    /// Validates against the bundle degrees and expands to fields.
    pub fn fields(&self, degrees: &[i32]) -> Result<PotentialFields> {
        let alpha = collect_blocks(degrees, &self.alpha, 1)?;
        let beta = match &self.beta {
            Some(b) => collect_blocks(degrees, b, -1)?,
            None => adjoint_fields(&alpha),
        };
        Ok(PotentialFields { alpha, beta })
    }

    pub fn from_fields(fields: &PotentialFields, compatible: bool) -> Potential {
        Potential {
            alpha: to_blocks(&fields.alpha),
            beta: (!compatible).then(|| to_blocks(&fields.beta)),
        }
    }

    pub fn scaled(&self, t: f64) -> Potential {
        let sc = |bs: &Vec<PotentialBlock>| {
            bs.iter()
                .map(|b| PotentialBlock {
                    coeffs: b.coeffs.iter().map(|&[l, m, re, im]| [l, m, re * t, im * t]).collect(),
                    ..b.clone()
                })
                .collect()
        };
        Potential { alpha: sc(&self.alpha), beta: self.beta.as_ref().map(sc) }
    }

    /// Random band-limited potential: every block gets the `band` lowest
    /// admissible degrees with coefficients of modulus up to `amplitude`
    /// divided by the number of terms. `compatible = false` draws `β`
    /// independently.
    pub fn random(rng: &mut impl Rng, degrees: &[i32], band: usize, amplitude: f64, compatible: bool) -> Potential {
        let r = degrees.len();
        let draw = |rng: &mut dyn rand::RngCore, shift: i32| {
            let mut blocks = Vec::new();
            for to in 0..r {
                for from in 0..r {
                    let spin = block_spin(degrees, to, from, shift);
                    let top = spin.abs() + HalfInt::int(band.saturating_sub(1) as i32);
                    let modes: Vec<(HalfInt, HalfInt)> =
                        admissible(spin, top).flat_map(|l| l.projections().map(move |m| (l, m))).collect();
                    let scale = amplitude / (modes.len() as f64).sqrt();
                    let coeffs = modes
                        .iter()
                        .map(|&(l, m)| {
                            let re = rng.random_range(-1.0..1.0) * scale;
                            let im = rng.random_range(-1.0..1.0) * scale;
                            [l.value(), m.value(), re, im]
                        })
                        .collect();
                    blocks.push(PotentialBlock { from, to, coeffs });
                }
            }
            blocks
        };
        let alpha = draw(rng, 1);
        let beta = (!compatible).then(|| draw(rng, -1));
        Potential { alpha, beta }
    }
}
