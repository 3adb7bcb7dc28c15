use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use blab_core::bundles::{BundleSpec, Potential, SectionOfV};
use blab_core::geometry::Symbol;
use blab_core::numerics::HalfInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::experiments::Experiment;

/// A real or complex test function on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    CosTheta,
    Constant { value: f64 },
    Harmonic { l: i32, m: i32 },
    RealHarmonic { l: i32, m: i32 },
    /// Seeded real symbol with the given band limit.
    Random { band: i32 },
    Sum { terms: Vec<SymbolSpec> },
}

impl SymbolSpec {
    pub fn build(&self, rng: &mut ChaCha8Rng) -> Result<Symbol> {
        Ok(match self {
            SymbolSpec::CosTheta => Symbol::cos_theta(),
            SymbolSpec::Constant { value } => Symbol::constant(*value),
            SymbolSpec::Harmonic { l, m } => Symbol::harmonic(*l, *m)?,
            SymbolSpec::RealHarmonic { l, m } => Symbol::real_harmonic(*l, *m)?,
            SymbolSpec::Random { band } => Symbol::random_real(rng, *band, true),
            SymbolSpec::Sum { terms } => {
                let mut acc = Symbol::zero();
                for t in terms {
                    acc = acc.add(&t.build(rng)?);
                }
                acc
            }
        })
    }
}

/// Parameters of a seeded potential added on top of the round connection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub band: usize,
    pub amplitude: f64,
    /// `β = α*`, which keeps the operator self-adjoint.
    #[serde(default = "yes")]
    pub compatible: bool,
}

fn yes() -> bool {
    true
}

fn default_bundle() -> BundleSpec {
    BundleSpec::trivial()
}

fn default_symbol() -> SymbolSpec {
    SymbolSpec::CosTheta
}

fn default_section_band() -> usize {
    2
}

fn default_out() -> PathBuf {
    PathBuf::from("blab-out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(rename = "Ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_bundle")]
    pub bundle: BundleSpec,
    /// Seeded perturbation of `bundle`'s connection, used where an experiment
    /// compares two connections or needs a non-round one.
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default = "default_symbol")]
    pub symbol: SymbolSpec,
    /// Band limit of seeded sections of the bundle.
    #[serde(default = "default_section_band")]
    pub section_band: usize,
    #[serde(default)]
    pub lmax: Option<HalfInt>,
    /// Gauss-Legendre points in `θ` for the quadrature cross-checks; `φ` uses twice as many.
    #[serde(default)]
    pub quadrature: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            bail!("Ns must be nonempty");
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            bail!("Ns must be strictly ascending, got {:?}", self.ns);
        }
        Ok(())
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn symbol(&self) -> Result<Symbol> {
        self.symbol.build(&mut self.rng(1))
    }

    /// The configured bundle with the seeded potential added, if any.
    pub fn perturbed_bundle(&self) -> Result<BundleSpec> {
        match self.potential {
            None => Ok(self.bundle.clone()),
            Some(p) => {
                let pot = Potential::random(&mut self.rng(0), self.bundle.degrees(), p.band, p.amplitude, p.compatible);
                let label = format!("{}+A", self.bundle.label());
                Ok(self.bundle.with_potential(pot, &label)?)
            }
        }
    }

    pub fn section(&self, bundle: &BundleSpec) -> SectionOfV {
        SectionOfV::random(&mut self.rng(3), bundle, self.section_band)
    }
}

/// Parse `"1,2,8"`, `"1..40"` (inclusive) or a mix like `"1..4,8,16"`.
pub fn parse_ns(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().with_context(|| format!("bad range start in {part:?}"))?;
            let b: usize = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad range end in {part:?}"))?;
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad N {part:?}"))?);
        }
    }
    Ok(out)
}

/// Set `path` (dot separated) in a JSON object, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => bail!("cannot set {path}: {key} is inside a non-object"),
        };
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    bail!("empty override path")
}

/// A `key=value` override; the value is read as JSON, falling back to a string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (k, v) = text.split_once('=').with_context(|| format!("override {text:?} is not key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}
