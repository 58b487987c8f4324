//! Acceptance suite: ten criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the output.

use std::process::Command;
use std::time::Instant;

use hypermodel::bergman::{multishift_purity_and_positivity, TruncatedSpace};
use hypermodel::charfn::{
    alternative_triple, block_unitarity, coincidence_verify, defect_identity_residual,
    derive_coincidence, key_identity_check, partial_isometry_check, triple_unitary, z_grid,
};
use hypermodel::dilation::{general_model, one_var_dilation, pure_dilation};
use hypermodel::gen::{self, Lcg};
use hypermodel::hyper::{
    appendix_monotonicity_check, defect_series, dyadic_grid, equivalence_crosscheck,
    gamma_monotone_violations, is_gamma_contractive, is_w_hypercontraction,
    loewner_monotonicity_check, product_grid,
};
use hypermodel::linalg::{dist, identity};
use hypermodel::series::{associated_series, convolution_residual, inverse_kernel_series};
use hypermodel::{c64, CharFunction, MultiWeightSpec, OperatorTuple, WeightSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const PRESETS: [&str; 5] = [
    "hardy",
    "bergman:1",
    "bergman:1.5",
    "bergman:2",
    "bergman:3",
];

fn w(s: &str) -> MultiWeightSpec {
    s.parse().expect("weight spec")
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> String {
    move |err| format!("{ctx}: {err}")
}

fn binomial(m: u64, k: u64) -> f64 {
    (0..k).fold(1u64, |acc, i| acc * (m - i) / (i + 1)) as f64
}

/// Weight lists for one to three variables.
fn weight_lists() -> Vec<String> {
    let mut out: Vec<String> = PRESETS.iter().map(|p| p.to_string()).collect();
    for a in PRESETS {
        for b in PRESETS {
            out.push(format!("{a},{b}"));
        }
    }
    for p in PRESETS {
        out.push(format!("{p},{p},{p}"));
    }
    out.extend(
        [
            "hardy,bergman:1.5,bergman:3",
            "bergman:2,bergman:1.5,bergman:1",
            "bergman:3,bergman:3,hardy",
        ]
        .map(String::from),
    );
    out
}

fn series_inversion() -> Outcome {
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    let lists = weight_lists();
    for spec in &lists {
        let ww = w(spec);
        let degrees = vec![32; ww.n()];
        let k = associated_series(&ww, &degrees).map_err(e(spec))?;
        let inv = k.invert().map_err(e(spec))?;
        worst = worst.max(convolution_residual(&k, &inv).map_err(e(spec))?.absolute);
        // Independent closed form: product of the one-variable reciprocal
        // series. The recursion's forward error grows with the size of the
        // kernel coefficients, so the gap is measured relative to the largest.
        let closed = inverse_kernel_series(&ww, &degrees).map_err(e(spec))?;
        let scale =
            k.coeffs.iter().fold(1.0f64, |m, x| m.max(x.abs())) * k.len() as f64 * f64::EPSILON;
        let gap = inv
            .coeffs
            .iter()
            .zip(&closed.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        oracle = oracle.max(gap / scale);
    }
    let mut exact = true;
    for m in 1..=3u64 {
        let c = WeightSpec::Bergman(m as f64)
            .inverse_coeffs(33)
            .map_err(e(m))?;
        for (k, ck) in c.iter().enumerate() {
            let expect = if k as u64 <= m {
                (-1f64).powi(k as i32) * binomial(m, k as u64)
            } else {
                0.0
            };
            exact &= *ck == expect;
        }
    }
    ensure(
        worst < 1e-12 && oracle < 1.0 && exact,
        format!("{} weight lists, convolution residual {worst:.2e}, closed-form gap {oracle:.2e} of the rounding bound, integer binomials exact: {exact}", lists.len()),
    )
}

fn coisometry_defects() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (i, spec) in weight_lists().iter().enumerate() {
        let ww = w(spec);
        let n = ww.n();
        let t = gen::commuting_unitaries(100 + i as u64, 2 + i % 7, n);
        let grid: Vec<Vec<f64>> = [[0.3, 0.5, 0.2], [0.5, 0.2, 0.6], [0.8, 0.7, 0.4]]
            .iter()
            .map(|r| r[..n].to_vec())
            .collect();
        for (_, member) in ww.family() {
            for r in &grid {
                let d = defect_series(&t, &member, r, 400).map_err(e(spec))?;
                let k = member.inverse_kernel_at(r).ok_or("preset expected")?;
                worst = worst.max(dist(&d, &(identity(t.dim()) * c64(k, 0.0))));
                count += 1;
            }
        }
    }
    ensure(
        worst < 1e-10,
        format!("{count} evaluations, max deviation {worst:.2e}"),
    )
}

fn multishift_classification() -> Outcome {
    let mut worst = 0.0f64;
    for spec in [
        "bergman:2,hardy",
        "bergman:1.5,bergman:3",
        "hardy,hardy",
        "bergman:3,bergman:1",
    ] {
        let space = TruncatedSpace::new(w(spec), vec![6, 6], 1).map_err(e(spec))?;
        let rep =
            multishift_purity_and_positivity(&space, &dyadic_grid(2, 3), 1e-10).map_err(e(spec))?;
        if !(rep.pure && rep.hypercontractive) {
            return Err(format!(
                "{spec}: pure {} hypercontractive {}",
                rep.pure, rep.hypercontractive
            ));
        }
        worst = worst.max(rep.diagonal_error).max(rep.off_diagonal);
    }
    ensure(
        worst < 1e-10,
        format!("diagonal defect vs series oracle {worst:.2e}"),
    )
}

fn equivalence() -> Outcome {
    let grid = dyadic_grid(2, 3);
    let (mut agree, mut yes, mut no) = (0, 0, 0);
    for seed in 0..50u64 {
        let t = gen::polynomial_pair(seed, 2 + seed as usize % 5, 0.3, 0.9);
        for gamma in [[1, 1], [2, 1], [2, 2], [3, 2]] {
            let rep = equivalence_crosscheck(&t, &gamma, &grid, 64, 1e-8)
                .map_err(e(format!("seed {seed} gamma {gamma:?}")))?;
            agree += rep.agree as usize;
            if rep.hyper.verdict {
                yes += 1;
            } else {
                no += 1;
            }
        }
    }
    let mut monotone_violations = 0;
    let mut real_checked = 0;
    for seed in 0..50u64 {
        let t = gen::polynomial_pair(seed, 2 + seed as usize % 5, 0.3, 0.9);
        match is_gamma_contractive(&t, &[1.5, 2.0], 1e-8, 400) {
            Ok(rep) => {
                real_checked += 1;
                monotone_violations += gamma_monotone_violations(&rep, 1e-8).len();
            }
            Err(hypermodel::Error::SeriesTailTooLarge { .. }) => {}
            Err(err) => return Err(format!("seed {seed}: {err}")),
        }
    }
    ensure(
        agree == 200 && monotone_violations == 0 && real_checked > 0,
        format!("200/200 verdicts agree ({yes} true, {no} false); real gamma (1.5,2): {real_checked} tuples, {monotone_violations} monotonicity violations"),
    )
}

fn one_variable_dilation() -> Outcome {
    let (mut iso, mut inter, mut omega) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let dim = 2 + seed as usize % 15;
        let t = gen::nilpotent_tuple(1000 + seed, dim, 1).ops()[0].clone();
        for spec in ["hardy", "bergman:2", "bergman:3"] {
            let ws: WeightSpec = spec.parse().map_err(e(spec))?;
            let d =
                one_var_dilation(&t, &ws, dim, 1e-9).map_err(e(format!("seed {seed} {spec}")))?;
            iso = iso.max(d.residuals["isometry"]);
            inter = inter.max(d.max_residual("intertwining"));
            omega = omega.max(d.residuals["omega_iso"]);
        }
    }
    ensure(
        iso < 1e-9 && inter < 1e-9 && omega < 1e-9,
        format!(
            "150 runs: isometry {iso:.2e}, intertwining {inter:.2e}, norm identity {omega:.2e}"
        ),
    )
}

fn pure_multivariable_dilation() -> Outcome {
    let (mut iso, mut inter, mut comp) = (0.0f64, 0.0f64, 0.0f64);
    let cases: Vec<(u64, usize, &str)> = (0..8)
        .map(|s| {
            (
                200 + s,
                2 + s as usize % 4,
                [
                    "hardy,hardy",
                    "bergman:2,hardy",
                    "bergman:3,bergman:1.5",
                    "bergman:2,bergman:2",
                ][s as usize % 4],
            )
        })
        .chain((0..4).map(|s| {
            (
                300 + s,
                2 + s as usize % 3,
                ["hardy,hardy,hardy", "bergman:2,hardy,bergman:3"][s as usize % 2],
            )
        }))
        .collect();
    for (seed, dim, spec) in &cases {
        let ww = w(spec);
        let t = gen::nilpotent_tuple(*seed, *dim, ww.n());
        let d = pure_dilation(&t, &ww, &vec![*dim; ww.n()], 1e-9)
            .map_err(e(format!("seed {seed} {spec}")))?;
        iso = iso.max(d.residuals["isometry"]);
        inter = inter.max(d.max_residual("intertwining"));
        comp = comp.max(d.max_residual("compression"));
    }
    ensure(
        iso < 1e-9 && inter < 1e-9 && comp < 1e-8,
        format!(
            "{} tuples: isometry {iso:.2e}, intertwining {inter:.2e}, compression {comp:.2e}",
            cases.len()
        ),
    )
}

fn general_model_blocks() -> Outcome {
    let mut tuples: Vec<(String, OperatorTuple)> = (0..4)
        .map(|s| {
            (
                format!("mixed {s}"),
                gen::mixed_pair(400 + s, 2, 2 + s as usize % 2),
            )
        })
        .collect();
    tuples.push(("four-block".into(), gen::four_block_pair(1)));
    let mut worst = [0.0f64; 5];
    let mut full_blocks = 0;
    for (name, t) in &tuples {
        for spec in ["hardy,hardy", "bergman:2,hardy"] {
            let d =
                general_model(t, &w(spec), &[6, 6], 1e-9).map_err(e(format!("{name} {spec}")))?;
            if d.blocks.len() != 4 {
                return Err(format!("{name}: {} blocks", d.blocks.len()));
            }
            full_blocks += d.blocks.iter().all(|b| b.e_dim > 0) as usize;
            for (k, p) in [
                "isometry",
                "intertwining",
                "delta_limit",
                "delta_intertwining",
                "useful_lemma",
            ]
            .iter()
            .enumerate()
            {
                worst[k] = worst[k].max(d.max_residual(p));
            }
        }
    }
    ensure(
        worst.iter().all(|&x| x < 1e-8) && full_blocks > 0,
        format!(
            "isometry {:.2e}, intertwining {:.2e}, double limit {:.2e}, block intertwining {:.2e}, lemma {:.2e}; {full_blocks} runs with all four blocks nonzero",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn characteristic_functions() -> Outcome {
    let grid = z_grid(5, 0.5);
    let mut worst = [0.0f64; 6];
    let mut runs = 0;
    for seed in 0..6u64 {
        let dim = 2 + seed as usize % 4;
        let t = gen::nilpotent_tuple(500 + seed, dim, 1).ops()[0].clone();
        for spec in ["hardy", "bergman:2"] {
            let ws: WeightSpec = spec.parse().map_err(e(spec))?;
            let ctx = format!("seed {seed} {spec}");
            let cf = CharFunction::new(&t, &ws, dim, 1e-10).map_err(e(&ctx))?;
            worst[0] = worst[0].max(block_unitarity(&cf));
            worst[1] = worst[1].max(defect_identity_residual(&cf));
            for &z in &grid {
                for &eta in &grid {
                    worst[2] =
                        worst[2].max(key_identity_check(&cf, z, eta).map_err(e(&ctx))?.truncated);
                }
            }
            worst[3] = worst[3].max(partial_isometry_check(&cf).map_err(e(&ctx))?.residual);
            let other = alternative_triple(&cf, seed).map_err(e(&ctx))?;
            let rel = triple_unitary(&cf.triple, &other).map_err(e(&ctx))?;
            worst[4] = worst[4].max(rel.unitary_residual.max(rel.reconstruction_residual));
            let u = Lcg::new(600 + seed).unitary(dim);
            let cf2 =
                CharFunction::new(&(&u * &t * u.adjoint()), &ws, dim, 1e-10).map_err(e(&ctx))?;
            let co = derive_coincidence(&cf, &cf2, &u).map_err(e(&ctx))?;
            worst[5] = worst[5].max(
                coincidence_verify(&cf, &cf2, &co.tau, &co.tau_star, &grid, 1e-9)
                    .map_err(e(&ctx))?
                    .max_residual,
            );
            runs += 1;
        }
    }
    let budgets = [1e-9, 1e-10, 1e-9, 1e-8, 1e-9, 1e-9];
    ensure(
        worst.iter().zip(budgets).all(|(x, b)| *x < b),
        format!(
            "{runs} runs: unitarity {:.2e}, I-C*C=TT* {:.2e}, key identity {:.2e}, partial isometry {:.2e}, triple unitary {:.2e}, coincidence {:.2e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn monotonicity() -> Outcome {
    let axis = vec![0.2, 0.5, 0.8];
    let r2 = product_grid(&[axis.clone(), axis.clone()]);
    let r1 = product_grid(&[axis]);
    let betas: Vec<Vec<u32>> = (0..3).map(|b| vec![b]).collect();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut tuples = 0;
    for seed in 0..20u64 {
        let (t, spec) = match seed % 3 {
            0 => (
                gen::nilpotent_tuple(700 + seed, 2 + seed as usize % 4, 2),
                "bergman:2,hardy",
            ),
            1 => (
                gen::commuting_unitaries(700 + seed, 3, 2),
                "bergman:1.5,bergman:3",
            ),
            _ => {
                let ww = w("bergman:2,bergman:2");
                (
                    gen::compressed_multishift(700 + seed, &ww, &[3, 3]).map_err(e(seed))?,
                    "bergman:2,bergman:2",
                )
            }
        };
        let ww = w(spec);
        let hyper =
            is_w_hypercontraction(&t, &ww, &dyadic_grid(2, 3), 64, 1e-8).map_err(e(seed))?;
        if !hyper.verdict {
            return Err(format!("seed {seed}: test tuple is not a hypercontraction"));
        }
        tuples += 1;
        let rep = loewner_monotonicity_check(&t, &ww, &r2, 64, 1e-10).map_err(e(seed))?;
        worst = worst.max(rep.max_violation);
        pairs += rep.pairs_checked;
        for lam in [[0usize], [1]] {
            let rep = appendix_monotonicity_check(&t, &ww, &lam, &r1, &betas, 64, 1e-10)
                .map_err(e(seed))?;
            worst = worst.max(rep.max_violation);
            pairs += rep.pairs_checked;
        }
    }
    ensure(
        worst <= 1e-10,
        format!("{tuples} tuples, {pairs} comparable pairs, max violation {worst:.2e}"),
    )
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_hypermodel");
    let start = Instant::now();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let out = Command::new(bin)
            .args(["verify-all", "--format", "json"])
            .output()
            .map_err(|err| err.to_string())?;
        if out.status.code() != Some(0) {
            return Err(format!("verify-all exited with {:?}", out.status.code()));
        }
        outputs.push(out.stdout);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        outputs[0] == outputs[1] && secs < 120.0,
        format!(
            "two runs byte-identical: {}, {secs:.1} s",
            outputs[0] == outputs[1]
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("series inversion", series_inversion),
        ("co-isometry defects", coisometry_defects),
        ("multishift classification", multishift_classification),
        ("equivalence", equivalence),
        ("one-variable dilation", one_variable_dilation),
        ("pure multivariable dilation", pure_multivariable_dilation),
        ("general model", general_model_blocks),
        ("characteristic functions", characteristic_functions),
        ("monotonicity", monotonicity),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg}) [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg}) [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
