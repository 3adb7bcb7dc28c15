use std::collections::BTreeMap;
use std::fmt;

use anyhow::{bail, Context, Result};
use blab_core::bundles::{e_space, h_space, monomial_gram, monomial_gram_exact, BundleSpec};
use blab_core::dolbeault::{
    build_dolbeault, kernel_basis, kernel_degree_split, projector_distance, spectral_row,
};
use blab_core::modules_k::{
    bott_projector, comparator, idempotent_trace_check, lift_idempotent, rank_sequence, spinor_rank_gap,
};
use blab_core::numerics::{gauss_legendre_sphere, loglog_slope, QuadratureGrid};
use blab_core::quantization::{
    gq_toeplitz_gap, module_covariance_defect_on, module_tuynman_residual, multiplicativity_defect, toeplitz,
    trace_asymptotics, tuynman_residual,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, SymbolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dims,
    ToeplitzConvergence,
    Tuynman,
    GqGap,
    Spectrum,
    KernelDegrees,
    ProjectorDrift,
    Comparator,
    RankGrowth,
    Idempotent,
    Spinor,
    Traces,
}

/// Name, one-line description and documented CSV columns.
pub struct Descriptor {
    pub experiment: Experiment,
    pub name: &'static str,
    pub about: &'static str,
    pub columns: &'static [(&'static str, &'static str)],
}

pub const EXPERIMENTS: &[Descriptor] = &[
    Descriptor {
        experiment: Experiment::Dims,
        name: "dims",
        about: "dim H_N three ways: closed form, Dolbeault kernel, monomial Gram matrix",
        columns: &[
            ("rank", "dim H_N from the lowest multiplet"),
            ("kernel_rank", "dim ker D for the trivial bundle"),
            ("gram_error", "max |quadrature Gram - closed form| for the monomials"),
        ],
    },
    Descriptor {
        experiment: Experiment::ToeplitzConvergence,
        name: "toeplitz-convergence",
        about: "‖T_N(f)‖ → ‖f‖ and the module covariance defect for `symbol` and a seeded section of `bundle`",
        columns: &[
            ("norm", "‖T_N(f)‖"),
            ("norm_gap", "|‖T_N(f)‖ - sup|f||"),
            ("multiplicativity", "‖T_N(f)² - T_N(f²)‖"),
            ("covariance_defect", "‖T_N(f) T_N(v) - T_N(fv)‖"),
            ("covariance_bound", "√2 (N-C)^{-1/2} ‖∇f‖ ‖v‖"),
        ],
    },
    Descriptor {
        experiment: Experiment::Tuynman,
        name: "tuynman",
        about: "derivative form of Q_N against T_N(f + Δf/2N), scalar and module",
        columns: &[
            ("residual", "‖Q_N(f) - T_N(f + Δf/2N)‖ for `symbol`"),
            ("module_residual", "same identity for a seeded section of `bundle`"),
        ],
    },
    Descriptor {
        experiment: Experiment::GqGap,
        name: "gq-gap",
        about: "‖Q_N(f) - T_N(f)‖ against λ_max ‖f‖ / 2N",
        columns: &[
            ("measured", "‖Q_N(f) - T_N(f)‖"),
            ("bound", "λ_max ‖f‖ / 2N with λ_max the Laplace eigenvalue at the band limit"),
            ("laplacian_bound", "‖Δf‖ / 2N"),
        ],
    },
    Descriptor {
        experiment: Experiment::Spectrum,
        name: "spectrum",
        about: "smallest nonzero eigenvalue of D² against N - C",
        columns: &[
            ("gap", "smallest eigenvalue of D² above the kernel threshold"),
            ("c", "Weitzenbock constant C"),
            ("gap_floor", "N - C"),
            ("kernel_rank", "dim ker D"),
            ("dim_even", "kernel dimension in degree 0"),
            ("dim_odd", "kernel dimension in degree 1"),
        ],
    },
    Descriptor {
        experiment: Experiment::KernelDegrees,
        name: "kernel-degrees",
        about: "degree split of ker D, for non-self-adjoint potentials too",
        columns: &[
            ("dim_even", "kernel dimension in degree 0"),
            ("dim_odd", "kernel dimension in degree 1"),
            ("min_degree0_norm", "smallest degree-0 norm of a unit kernel vector"),
            ("in_regime", "1 if N > C + ‖B‖²"),
        ],
    },
    Descriptor {
        experiment: Experiment::ProjectorDrift,
        name: "projector-drift",
        about: "‖Π^V - Π^W‖ for W = `bundle`, V = W plus the seeded `potential`",
        columns: &[
            ("measured", "‖Π^V - Π^W‖"),
            ("bound", "2‖A‖(N-C)^{-1/2} [½(N-C)^{1/2} - ‖A‖]^{-1}"),
            ("contour_bound", "the same with the contour length ½(N-C)^{1/2} included"),
            ("applicable", "1 if N - C > 4‖A‖²"),
        ],
    },
    Descriptor {
        experiment: Experiment::Comparator,
        name: "comparator",
        about: "the map u_N between the quantized modules of two connections",
        columns: &[
            ("projector_distance", "‖Π^V - Π^W‖"),
            ("sigma_min", "smallest singular value of u_N"),
            ("bijective", "1 if u_N is square with sigma_min > 0.1"),
            ("residual", "‖T^V(v) u_N - T^W(v)‖ for a seeded section v"),
            ("residual_bound", "‖v‖ ‖Π^V - Π^W‖"),
        ],
    },
    Descriptor {
        experiment: Experiment::RankGrowth,
        name: "rank-growth",
        about: "dim Ẽ_N^V against the rank polynomial, threshold N* and K₀ class",
        columns: &[
            ("rank", "dim Ẽ_N^V"),
            ("predicted", "rank polynomial rN + r - d"),
            ("deviation", "rank - predicted"),
            ("growth_offset", "rank - r(N+1)"),
        ],
    },
    Descriptor {
        experiment: Experiment::Idempotent,
        name: "idempotent",
        about: "spectral lift of the Bott projector",
        columns: &[
            ("trace", "tr ẽ_N"),
            ("predicted", "rank polynomial of the idempotent"),
            ("idempotency", "‖ẽ_N² - ẽ_N‖"),
            ("distance", "‖T_N(e) - ẽ_N‖"),
        ],
    },
    Descriptor {
        experiment: Experiment::Spinor,
        name: "spinor",
        about: "rank gap of the quantized spinor bundles",
        columns: &[
            ("rank_plus", "rk S⁺_N"),
            ("rank_minus", "rk S⁻_N"),
            ("gap", "rk S⁺_N - rk S⁻_N"),
            ("kernel_bound", "|χ| dim H_N"),
        ],
    },
    Descriptor {
        experiment: Experiment::Traces,
        name: "traces",
        about: "tr T_N(f) and its leading coefficient in N",
        columns: &[("trace", "Re tr T_N(f)"), ("normalized_trace", "Re tr T_N(f) / (N+1)")],
    },
];

pub fn descriptor(e: Experiment) -> &'static Descriptor {
    EXPERIMENTS.iter().find(|d| d.experiment == e).expect("every experiment is described")
}

/// A CSV cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x}"),
        }
    }
}

impl Cell {
    pub fn value(&self) -> f64 {
        match *self {
            Cell::Int(i) => i as f64,
            Cell::Float(x) => x,
        }
    }
}

fn int(x: impl TryInto<i64>) -> Cell {
    Cell::Int(x.try_into().unwrap_or(i64::MAX))
}

fn flag(b: bool) -> Cell {
    Cell::Int(b as i64)
}

/// Everything an experiment produces before it is written out.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    /// `(N, cells)`, sorted by `N`.
    pub rows: Vec<(usize, Vec<Cell>)>,
    pub checks: BTreeMap<String, bool>,
    pub metrics: Map<String, Value>,
    /// Columns drawn in the plot: the measured value and optionally its bound.
    pub plot: Option<(&'static str, Option<&'static str>)>,
}

impl Outcome {
    fn new(e: Experiment, mut rows: Vec<(usize, Vec<Cell>)>) -> Self {
        rows.sort_by_key(|r| r.0);
        Outcome {
            columns: descriptor(e).columns.iter().map(|c| c.0).collect(),
            rows,
            checks: BTreeMap::new(),
            metrics: Map::new(),
            plot: None,
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.values().all(|&b| b)
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let k = self.columns.iter().position(|c| *c == name).expect("known column");
        self.rows.iter().map(|r| r.1[k].value()).collect()
    }

    fn ns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.0 as f64).collect()
    }

    /// Log-log slope of a column over the rows where it is positive.
    fn slope(&self, name: &str) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            self.ns().into_iter().zip(self.column(name)).filter(|&(x, y)| x > 0.0 && y > 0.0).unzip();
        (xs.len() >= 2).then(|| loglog_slope(&xs, &ys))
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.to_string(), ok);
    }

    fn metric(&mut self, name: &str, value: impl Serialize) {
        self.metrics.insert(name.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }
}

/// Run per-`N` work in parallel, attaching the offending `N` to any error.
fn per_n<T: Send>(ns: &[usize], f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<(usize, T)>> {
    ns.par_iter().map(|&n| f(n).map(|t| (n, t)).with_context(|| format!("at N={n}"))).collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let ns = &cfg.ns;
    let e = cfg.experiment;
    let out = match e {
        Experiment::Dims => {
            let rows = per_n(ns, |n| {
                let grid = match cfg.quadrature {
                    Some(q) => gauss_legendre_sphere(q, 2 * q)?,
                    None => QuadratureGrid::for_degree(2 * n),
                };
                let gram = monomial_gram(n, &grid)?;
                let exact = monomial_gram_exact(n);
                let mut err = 0.0f64;
                for j in 0..=n {
                    for k in 0..=n {
                        let want = if j == k { exact[j] } else { 0.0 };
                        err = err.max((gram[(j, k)].re - want).abs().max(gram[(j, k)].im.abs()));
                    }
                }
                let d = build_dolbeault(&BundleSpec::trivial(), n, cfg.lmax)?;
                Ok(vec![int(h_space(n).dim()), int(kernel_basis(&d, None)?.dim()), Cell::Float(err)])
            })?;
            let mut o = Outcome::new(e, rows);
            let expect: Vec<f64> = ns.iter().map(|&n| n as f64 + 1.0).collect();
            o.check("rank_is_n_plus_1", o.column("rank") == expect);
            o.check("kernel_rank_is_n_plus_1", o.column("kernel_rank") == expect);
            o.check("gram_matches_closed_form", o.column("gram_error").iter().all(|&x| x < 1e-10));
            o.plot = Some(("rank", None));
            o
        }
        Experiment::ToeplitzConvergence => {
            let f = cfg.symbol()?;
            let bundle = cfg.perturbed_bundle()?;
            let v = cfg.section(&bundle);
            let c = blab_core::dolbeault::weitzenbock_constant(&bundle);
            let sup = blab_core::geometry::sup_norm(&f);
            let rows = per_n(ns, |n| {
                let norm = toeplitz(&f, n).norm();
                let basis = e_space(&bundle, n, cfg.lmax)?;
                let cov = module_covariance_defect_on(&f, &v, &basis, c)?;
                Ok(vec![
                    Cell::Float(norm),
                    Cell::Float((norm - sup).abs()),
                    Cell::Float(multiplicativity_defect(&f, &f, n).defect),
                    Cell::Float(cov.defect),
                    Cell::Float(cov.bound),
                ])
            })?;
            let mut o = Outcome::new(e, rows);
            let (d, b) = (o.column("covariance_defect"), o.column("covariance_bound"));
            o.check("covariance_within_bound", d.iter().zip(&b).all(|(x, y)| x <= y));
            if let Some(s) = o.slope("covariance_defect") {
                o.metric("covariance_slope", s);
                o.check("covariance_slope", s <= -0.45 + 0.05);
            }
            let gaps = o.column("norm_gap");
            if let Some(k) = ns.iter().position(|&n| n >= 60) {
                o.check("norm_gap_at_60", gaps[k] <= 0.05);
            }
            if cfg.symbol == SymbolSpec::CosTheta {
                let err = ns.iter().zip(&gaps).map(|(&n, g)| (g - 2.0 / (n as f64 + 2.0)).abs()).fold(0.0, f64::max);
                o.metric("closed_form_error", err);
                o.check("norm_gap_closed_form", err < 1e-9);
            }
            o.metric("sup_norm", sup);
            o.metric("weitzenbock_constant", c);
            o.plot = Some(("covariance_defect", Some("covariance_bound")));
            o
        }
        Experiment::Tuynman => {
            let f = cfg.symbol()?;
            let bundle = cfg.perturbed_bundle()?;
            let v = cfg.section(&bundle);
            let rows = per_n(ns, |n| {
                let basis = e_space(&bundle, n, cfg.lmax)?;
                Ok(vec![
                    Cell::Float(tuynman_residual(&f, n)?),
                    Cell::Float(module_tuynman_residual(&v, &bundle, &basis)?),
                ])
            })?;
            let mut o = Outcome::new(e, rows);
            o.check("residual_below_1e-8", o.column("residual").iter().all(|&x| x < 1e-8));
            o.check("module_residual_below_1e-8", o.column("module_residual").iter().all(|&x| x < 1e-8));
            o.plot = Some(("residual", None));
            o
        }
        Experiment::GqGap => {
            let f = cfg.symbol()?;
            let rows = per_n(ns, |n| {
                let g = gq_toeplitz_gap(&f, n)?;
                Ok(vec![Cell::Float(g.measured), Cell::Float(g.bound), Cell::Float(g.laplacian_bound)])
            })?;
            let mut o = Outcome::new(e, rows);
            let (m, b) = (o.column("measured"), o.column("bound"));
            o.check("within_bound", m.iter().zip(&b).all(|(x, y)| x <= y));
            if let Some(s) = o.slope("measured") {
                o.metric("slope", s);
                o.check("slope_minus_one", (s + 1.0).abs() <= 0.1);
            }
            o.plot = Some(("measured", Some("bound")));
            o
        }
        Experiment::Spectrum => {
            let bundle = cfg.perturbed_bundle()?;
            let rows = per_n(ns, |n| {
                let r = spectral_row(&build_dolbeault(&bundle, n, cfg.lmax)?)?;
                Ok(vec![
                    Cell::Float(r.gap),
                    Cell::Float(r.c),
                    Cell::Float(n as f64 - r.c),
                    int(r.kernel_rank),
                    int(r.dim_even),
                    int(r.dim_odd),
                ])
            })?;
            let mut o = Outcome::new(e, rows);
            let (g, fl) = (o.column("gap"), o.column("gap_floor"));
            o.check("gap_above_n_minus_c", g.iter().zip(&fl).all(|(x, y)| *y <= 0.0 || *x >= y - 1e-9));
            if bundle.is_holomorphic_round() && bundle.degrees().iter().all(|&p| p == 0) {
                o.check("c_below_one", o.column("c").iter().all(|&c| c < 1.0));
            }
            o.plot = Some(("gap", Some("gap_floor")));
            o
        }
        Experiment::KernelDegrees => {
            let bundle = cfg.perturbed_bundle()?;
            let w = blab_core::dolbeault::weitzenbock(&bundle);
            let rows = per_n(ns, |n| {
                let s = kernel_degree_split(&build_dolbeault(&bundle, n, cfg.lmax)?)?;
                Ok(vec![int(s.dim_even), int(s.dim_odd), Cell::Float(s.min_degree0_norm), flag(s.in_regime)])
            })?;
            let mut o = Outcome::new(e, rows);
            let ok = o.rows.iter().filter(|r| r.0 >= 4 && r.1[3] == Cell::Int(1)).all(|r| {
                r.1[1] == Cell::Int(0) && r.1[2].value() > 1e-6
            });
            o.check("even_kernel_in_regime", ok);
            o.metric("weitzenbock_constant", w.constant);
            o.metric("skew_norm", w.skew_norm);
            o.metric("self_adjoint", bundle.is_self_adjoint());
            o.plot = Some(("dim_even", None));
            o
        }
        Experiment::ProjectorDrift => {
            if cfg.potential.is_none() {
                bail!("projector-drift compares against a perturbed connection; set `potential`");
            }
            let v = cfg.perturbed_bundle()?;
            let rows = per_n(ns, |n| {
                let r = projector_distance(&v, &cfg.bundle, n, cfg.lmax)?;
                Ok(vec![
                    Cell::Float(r.measured),
                    Cell::Float(r.bound),
                    Cell::Float(r.contour_bound),
                    flag(r.applicable),
                ])
            })?;
            let mut o = Outcome::new(e, rows);
            let applicable: Vec<bool> = o.column("applicable").iter().map(|&x| x > 0.5).collect();
            let within = |col: &str| {
                o.column("measured").iter().zip(o.column(col)).zip(&applicable).all(|((m, b), &a)| !a || *m <= b)
            };
            let (printed, contour) = (within("bound"), within("contour_bound"));
            o.check("within_bound", printed);
            o.metric("within_contour_bound", contour);
            if let Some(s) = o.slope("measured") {
                o.metric("slope", s);
                o.check("decay_slope", s <= -0.45);
            }
            o.plot = Some(("measured", Some("bound")));
            o
        }
        Experiment::Comparator => {
            if cfg.potential.is_none() {
                bail!("comparator needs a second connection; set `potential`");
            }
            let v = cfg.perturbed_bundle()?;
            let section = cfg.section(&cfg.bundle);
            let rows = per_n(ns, |n| {
                let c = comparator(&v, &cfg.bundle, n)?;
                let (res, bound) = c.residual(&section)?;
                Ok(vec![
                    Cell::Float(c.projector_distance),
                    Cell::Float(c.sigma_min),
                    flag(c.bijective),
                    Cell::Float(res),
                    Cell::Float(bound),
                ])
            })?;
            let mut o = Outcome::new(e, rows);
            let ok = o.rows.iter().filter(|r| r.1[0].value() < 0.5).all(|r| r.1[2] == Cell::Int(1));
            o.check("bijective_when_close", ok);
            let res = o.column("residual");
            o.check("residual_decreasing", res.windows(2).all(|w| w[1] < w[0]));
            o.plot = Some(("residual", Some("residual_bound")));
            o
        }
        Experiment::RankGrowth => {
            let bundle = cfg.perturbed_bundle()?;
            let q = rank_sequence(&bundle, ns)?;
            let r = bundle.rank() as i64;
            let rows = q
                .table()
                .into_iter()
                .map(|(n, m, p)| (n, vec![int(m), int(p), int(m - p), int(m - r * (n as i64 + 1))]))
                .collect();
            let mut o = Outcome::new(e, rows);
            let max_p = bundle.degrees().iter().copied().max().unwrap_or(0).max(1) as usize;
            o.check("threshold_within_max_degree", q.threshold.is_some_and(|t| t <= max_p));
            let bound: i64 = bundle.degrees().iter().map(|p| p.abs() as i64).sum();
            let t = q.threshold.unwrap_or(usize::MAX);
            o.check(
                "growth_offset_bounded",
                o.rows.iter().filter(|row| row.0 >= t).all(|row| row.1[3].value().abs() <= bound as f64),
            );
            o.metric("threshold", q.threshold);
            o.metric("k0_class", q.k0_class());
            o.plot = Some(("rank", Some("predicted")));
            o
        }
        Experiment::Idempotent => {
            let lift = lift_idempotent(&bott_projector(), ns, 1e-3)?;
            let check = idempotent_trace_check(&lift);
            let rows = check
                .rows
                .iter()
                .map(|&(n, tr, p)| {
                    let entry = &lift.per_n[&n];
                    (n, vec![Cell::Float(tr), int(p), Cell::Float(entry.idempotency), Cell::Float(entry.distance)])
                })
                .collect();
            let mut o = Outcome::new(e, rows);
            o.check("idempotent", o.column("idempotency").iter().all(|&x| x < 1e-10));
            o.check("trace_threshold", check.threshold.is_some_and(|t| t <= 3));
            if let Some(k) = ns.iter().position(|&n| n >= 40) {
                o.check("distance_at_40", o.column("distance")[k] < 1e-3);
            }
            o.metric("threshold", check.threshold);
            o.metric("polynomial", lift.polynomial.coeffs);
            o.plot = Some(("distance", None));
            o
        }
        Experiment::Spinor => {
            let rows = spinor_rank_gap(ns)?
                .into_iter()
                .map(|r| (r.n, vec![int(r.rank_plus), int(r.rank_minus), int(r.gap), int(r.kernel_bound)]))
                .collect();
            let mut o = Outcome::new(e, rows);
            o.check("gap_is_two", o.column("gap").iter().all(|&g| g == 2.0));
            o.plot = Some(("gap", None));
            o
        }
        Experiment::Traces => {
            let f = cfg.symbol()?;
            let rows = per_n(ns, |n| {
                let tr = toeplitz(&f, n).matrix.trace().re;
                Ok(vec![Cell::Float(tr), Cell::Float(tr / (n as f64 + 1.0))])
            })?;
            let mut o = Outcome::new(e, rows);
            let fit = trace_asymptotics(&f, ns);
            o.metric("leading", fit.leading);
            o.metric("target", fit.target);
            o.metric("relative_error", fit.relative_error);
            o.check("leading_coefficient", fit.relative_error < 0.01);
            o.plot = Some(("trace", None));
            o
        }
    };
    Ok(out)
}

/// Digest of the configuration, for tagging artifacts.
pub fn params_hash(cfg: &ExperimentConfig) -> String {
    blab_core::quantization::params_hash(cfg)
}

pub fn summary(cfg: &ExperimentConfig, o: &Outcome) -> Value {
    json!({
        "experiment": descriptor(cfg.experiment).name,
        "params_hash": params_hash(cfg),
        "config": cfg,
        "checks": o.checks,
        "metrics": o.metrics,
        "pass": o.pass(),
    })
}
