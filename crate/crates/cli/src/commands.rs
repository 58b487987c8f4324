//! Verification pipelines behind each subcommand.

use hypermodel::charfn::{
    alternative_triple, block_unitarity, char_function_eval, coincidence_verify,
    defect_identity_residual, derive_coincidence, key_identity_check, partial_isometry_check,
    purity_identity_residual, triple_unitary, z_grid, CharFunction,
};
use hypermodel::dilation::{general_model, pure_dilation};
use hypermodel::gen::Lcg;
use hypermodel::hyper::{
    equivalence_crosscheck, gamma_monotone_violations, is_gamma_contractive, is_pure,
    is_w_hypercontraction, subtuple_inheritance_check, MAX_SQUARINGS,
};
use hypermodel::series::{associated_series, check_properties, invert_series, quotient_coeffs};
use hypermodel::{
    DilationResult, MatrixText, MultiWeightSpec, OperatorTuple, WeightSpec, LIMIT_TOL,
};

use crate::config::{CaseCommand, CaseConfig, DilateMode, SeriesOp};
use crate::report::{Check, ErrorObject, Report};
use crate::tuple_spec::TupleSpec;

/// Command-line overrides applied on top of a case file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub degrees: Option<Vec<usize>>,
    /// Include the dilation map and model operators in the report.
    pub full: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut CaseConfig) {
        if let Some(t) = self.tol {
            cfg.tolerances.residual = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.degrees {
            cfg.degrees = d.clone();
        }
    }
}

/// Runs one case; never panics on bad input, errors land in the report.
pub fn run_case(cfg: &CaseConfig, ov: &Overrides) -> Report {
    let mut cfg = cfg.clone();
    ov.apply(&mut cfg);
    let name = match cfg.command {
        CaseCommand::Series => "series",
        CaseCommand::Check => "check",
        CaseCommand::Dilate => "dilate",
        CaseCommand::Charfn => "charfn",
    };
    let mut report = Report::new(name, Some(cfg.clone()));
    let outcome = match cfg.command {
        CaseCommand::Series => series(&cfg, &mut report),
        CaseCommand::Check => check(&cfg, ov, &mut report),
        CaseCommand::Dilate => dilate(&cfg, ov, &mut report),
        CaseCommand::Charfn => charfn(&cfg, ov, &mut report),
    };
    if let Err(e) = outcome {
        report.fail_with(e);
    }
    report.finish()
}

type Step = Result<(), ErrorObject>;

/// Drops the sign of negative zeros so reports print `0.0`.
fn tidy(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| x + 0.0).collect()
}

fn m<T>(r: hypermodel::Result<T>) -> Result<T, ErrorObject> {
    r.map_err(|e| ErrorObject::math(&e))
}

fn weights(cfg: &CaseConfig) -> Result<MultiWeightSpec, ErrorObject> {
    cfg.weights().map_err(|e| ErrorObject::config(&e))
}

fn tuple(
    cfg: &CaseConfig,
    ov: &Overrides,
    w: &MultiWeightSpec,
) -> Result<OperatorTuple, ErrorObject> {
    let text = cfg.tuple.as_deref().unwrap_or_default();
    let mut spec = TupleSpec::parse(text, &cfg.base_dir).map_err(|e| ErrorObject::config(&e))?;
    if let Some(s) = ov.seed {
        spec.reseed(s);
    }
    spec.build(w).map_err(|e| ErrorObject::build(&e))
}

fn series(cfg: &CaseConfig, report: &mut Report) -> Step {
    let w = weights(cfg)?;
    let sc = cfg.series.as_ref().ok_or_else(|| {
        ErrorObject::config(&crate::config::ConfigError("missing [series] table".into()))
    })?;
    let n = sc.terms;
    match sc.op {
        SeriesOp::Invert => {
            let k = m(associated_series(&w, &vec![n; w.n()]))?;
            let inv = m(invert_series(&k))?;
            let conv = m(hypermodel::series::convolution_residual(&k, &inv))?;
            report.push(Check::residual("convolution_identity", conv.scaled, 1e-12));
            report.put("degrees", &inv.degrees);
            report.put("coeffs", tidy(&inv.coeffs));
        }
        SeriesOp::Quotient => {
            let [wi] = w.weights() else {
                return Err(ErrorObject::config(&crate::config::ConfigError(
                    "quotient takes a single weight".into(),
                )));
            };
            let (r, s) = (sc.r.unwrap_or(1.0), sc.s.unwrap_or(0.5));
            let a = m(quotient_coeffs(wi, r, s, n))?;
            report.put("r", r);
            report.put("s", s);
            report.put("coeffs", tidy(&a));
        }
        SeriesOp::Props => {
            let grid = cfg.grid.points(w.n());
            let p = m(check_properties(&w, &grid, n))?;
            report.push(
                Check::flag("p1_ok", p.p1_ok).detail(format!("min coefficient {:.3e}", p.p1_min)),
            );
            report.push(Check::flag("p3_finite", p.p3_abs_sum.is_finite()).info());
            report.put("properties", &p);
        }
    }
    Ok(())
}

fn wants(cfg: &CaseConfig, name: &str) -> Option<bool> {
    if cfg.require.is_empty() {
        None
    } else {
        Some(cfg.require.iter().any(|r| r == name))
    }
}

fn require(cfg: &CaseConfig, c: Check, default: bool) -> Check {
    if wants(cfg, &c.name).unwrap_or(default) {
        c
    } else {
        c.info()
    }
}

/// γ when every weight is a Bergman preset.
fn bergman_gamma(w: &MultiWeightSpec) -> Option<Vec<f64>> {
    w.weights()
        .iter()
        .map(|wi| {
            if let WeightSpec::Bergman(b) = wi {
                Some(*b)
            } else {
                None
            }
        })
        .collect()
}

fn check(cfg: &CaseConfig, ov: &Overrides, report: &mut Report) -> Step {
    let w = weights(cfg)?;
    let t = tuple(cfg, ov, &w)?;
    let tol = cfg.tolerances.positivity;
    let terms = cfg.tolerances.terms;
    let grid = cfg.grid.points(t.n());
    let hyper = m(is_w_hypercontraction(&t, &w, &grid, terms, tol))?;
    let worst = hyper
        .members
        .iter()
        .map(|mc| {
            mc.grid_min_eig
                .min(mc.at_e_min_eig.unwrap_or(f64::INFINITY))
        })
        .fold(f64::INFINITY, f64::min);
    report.push(require(
        cfg,
        Check::flag("w_hypercontraction", hyper.verdict).detail(format!(
            "smallest eigenvalue {worst:.3e} over {} members",
            hyper.members.len()
        )),
        true,
    ));
    report.push(require(
        cfg,
        Check::flag("pure", is_pure(&t, LIMIT_TOL, MAX_SQUARINGS)),
        false,
    ));
    if let Some(gamma) = bergman_gamma(&w) {
        let g = m(is_gamma_contractive(&t, &gamma, tol, 200))?;
        report.push(require(
            cfg,
            Check::flag("gamma_contractive", g.verdict),
            true,
        ));
        report.push(require(
            cfg,
            Check::flag(
                "gamma_monotone",
                gamma_monotone_violations(&g, tol).is_empty(),
            ),
            true,
        ));
        if gamma.iter().all(|x| x.fract() == 0.0) {
            let ig: Vec<u32> = gamma.iter().map(|&x| x as u32).collect();
            let agree = match equivalence_crosscheck(&t, &ig, &grid, terms, tol) {
                Ok(r) => r.agree,
                Err(hypermodel::Error::EquivalenceViolation { .. }) => false,
                Err(e) => return Err(ErrorObject::math(&e)),
            };
            report.push(require(cfg, Check::flag("equivalence", agree), true));
        }
    }
    for i in 0..t.n() {
        if t.n() < 2 {
            break;
        }
        let sub = m(subtuple_inheritance_check(&t, &w, &[i], &grid, terms, tol))?;
        report.push(require(
            cfg,
            Check::flag(format!("subtuple_{}", i + 1), sub.holds),
            true,
        ));
    }
    report.put("members", &hyper.members);
    report.put("witnesses", &hyper.witnesses);
    report.put("continuum_certified", hyper.continuum_certified);
    Ok(())
}

/// Budget for a named dilation residual, or None for values that are only recorded.
fn dilation_budget(cfg: &CaseConfig, name: &str) -> Option<f64> {
    let tol = &cfg.tolerances;
    if name.starts_with("tail_") {
        None
    } else if ["isometry", "intertwining", "stage_isometry", "omega_iso"]
        .iter()
        .any(|p| name.starts_with(p))
    {
        Some(tol.residual)
    } else {
        Some(tol.structural)
    }
}

fn dilation_report(cfg: &CaseConfig, ov: &Overrides, d: &DilationResult, report: &mut Report) {
    for (name, &value) in &d.residuals {
        match dilation_budget(cfg, name) {
            Some(b) => report.push(Check::residual(name.clone(), value, b)),
            None => report.push(Check::residual(name.clone(), value, f64::INFINITY).info()),
        }
    }
    report.put("block_layout", &d.block_layout);
    let blocks: Vec<_> = d
        .blocks
        .iter()
        .map(|b| serde_json::json!({ "mask": b.mask, "e_dim": b.e_dim }))
        .collect();
    report.put("blocks", blocks);
    report.put("model_dim", d.map.nrows());
    if ov.full {
        report.put("map", MatrixText::from(&d.map));
        report.put(
            "model_ops",
            d.model_ops.iter().map(MatrixText::from).collect::<Vec<_>>(),
        );
    }
}

fn dilate(cfg: &CaseConfig, ov: &Overrides, report: &mut Report) -> Step {
    let w = weights(cfg)?;
    let t = tuple(cfg, ov, &w)?;
    let tol = cfg.tolerances.residual;
    let d = match cfg.mode {
        DilateMode::Pure => m(pure_dilation(&t, &w, &cfg.degrees, tol))?,
        DilateMode::General => m(general_model(&t, &w, &cfg.degrees, tol))?,
    };
    dilation_report(cfg, ov, &d, report);
    Ok(())
}

fn charfn(cfg: &CaseConfig, ov: &Overrides, report: &mut Report) -> Step {
    let w = weights(cfg)?;
    let [wi] = w.weights() else {
        return Err(ErrorObject::config(&crate::config::ConfigError(
            "charfn takes a single weight".into(),
        )));
    };
    let t = tuple(cfg, ov, &w)?;
    let op = &t.ops()[0];
    let tol = &cfg.tolerances;
    let n = cfg.degrees[0];
    let cf = m(CharFunction::new(op, wi, n, tol.identity))?;
    report.push(Check::residual(
        "block_unitarity",
        block_unitarity(&cf),
        tol.residual,
    ));
    report.push(Check::residual(
        "defect_identity",
        defect_identity_residual(&cf),
        tol.identity,
    ));
    report.push(Check::residual(
        "purity_identity",
        m(purity_identity_residual(&cf))?,
        tol.residual,
    ));

    let grid = z_grid(5, 0.5);
    let mut key = 0.0f64;
    let mut key_full: Option<f64> = None;
    for &zeta in &grid {
        for &eta in &grid {
            let k = m(key_identity_check(&cf, zeta, eta))?;
            key = key.max(k.truncated);
            if let Some(f) = k.full {
                key_full = Some(key_full.unwrap_or(0.0).max(f));
            }
        }
    }
    report.push(Check::residual("key_identity", key, tol.residual).detail("5x5 grid, radius 0.5"));
    if let Some(f) = key_full {
        report.push(Check::residual("key_identity_full_kernel", f, f64::INFINITY).info());
    }
    let pi = m(partial_isometry_check(&cf))?;
    report.push(
        Check::residual("partial_isometry", pi.residual, tol.structural).detail(format!(
            "degrees < {} of {}",
            pi.interior_degrees, pi.target_degrees
        )),
    );

    let mut rng = Lcg::new(cfg.seed);
    let other = m(alternative_triple(&cf, rng.next_u64()))?;
    let rel = m(triple_unitary(&cf.triple, &other))?;
    report.push(Check::residual(
        "triple_uniqueness",
        rel.unitary_residual.max(rel.reconstruction_residual),
        tol.residual,
    ));

    let u = rng.unitary(op.nrows());
    let cf2 = m(CharFunction::new(
        &(&u * op * u.adjoint()),
        wi,
        n,
        tol.identity,
    ))?;
    let co = m(derive_coincidence(&cf, &cf2, &u))?;
    let rep = m(coincidence_verify(
        &cf,
        &cf2,
        &co.tau,
        &co.tau_star,
        &grid,
        tol.residual,
    ))?;
    report.push(Check::residual(
        "coincidence",
        rep.max_residual,
        tol.residual,
    ));

    report.put("e_dim", cf.triple.e_dim);
    report.put("defect_dim", cf.defect_dim());
    let table: Vec<_> = grid
        .iter()
        .map(|&z| {
            let th = char_function_eval(&cf, z).map(|v| MatrixText::from(&v));
            th.map(|v| serde_json::json!({ "z": [z.re, z.im], "theta": v }))
        })
        .collect::<hypermodel::Result<_>>()
        .map_err(|e| ErrorObject::math(&e))?;
    report.put("theta", table);
    if ov.full {
        report.put("b", MatrixText::from(&cf.triple.b));
        report.put("d", MatrixText::from(&cf.triple.stacked()));
    }
    Ok(())
}
