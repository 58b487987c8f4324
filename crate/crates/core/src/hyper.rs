//! Hereditary defect operators and positivity classifications.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, dist, hermitian_part, identity, op_norm, power, psd_check, psd_sqrt, serialize_op,
    serialize_ops,
};
use crate::series::{MultiWeightSpec, WeightSpec};
use crate::{c64, Operator};

/// Default number of squarings allowed when computing lim T^k X T^{*k}.
pub const MAX_SQUARINGS: usize = 64;

/// Largest per-variable term count used when approaching r = 1 on a grid.
const GRID_TERM_CAP: usize = 1 << 15;

/// Largest per-variable term count for the tail-corrected sum at r = 1.
const CORRECTED_TERM_CAP: usize = 1 << 12;

/// n commuting contractions on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTuple {
    ops: Vec<Operator>,
    commutation_tol: f64,
}

impl OperatorTuple {
    pub fn new(ops: Vec<Operator>, commutation_tol: f64) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Shape("a tuple needs at least one operator".into()));
        }
        let d = ops[0].nrows();
        for (i, t) in ops.iter().enumerate() {
            if t.nrows() != d || t.ncols() != d {
                return Err(Error::Shape(format!(
                    "operator {i} is {}x{}, expected {d}x{d}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            let norm = op_norm(t);
            if norm > 1.0 + commutation_tol {
                return Err(Error::NotContraction { index: i, norm });
            }
        }
        for i in 0..ops.len() {
            for j in i + 1..ops.len() {
                let residual = dist(&(&ops[i] * &ops[j]), &(&ops[j] * &ops[i]));
                if residual > commutation_tol {
                    return Err(Error::NotCommuting { i, j, residual });
                }
            }
        }
        Ok(OperatorTuple {
            ops,
            commutation_tol,
        })
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn commutation_tol(&self) -> f64 {
        self.commutation_tol
    }

    /// Unitary conjugate U T U*.
    pub fn conjugate(&self, u: &Operator) -> Result<Self> {
        let ops = self.ops.iter().map(|t| u * t * u.adjoint()).collect();
        OperatorTuple::new(ops, self.commutation_tol.max(1e-12))
    }

    fn check_arity(&self, w: &MultiWeightSpec) -> Result<()> {
        if w.n() != self.n() {
            return Err(Error::ArityMismatch {
                expected: w.n(),
                got: self.n(),
            });
        }
        Ok(())
    }
}

/// Σ_k c_k r^k T^k X T^{*k}. Stops early once T^k X T^{*k} vanishes or the
/// remaining coefficients are zero.
pub fn hereditary_sum(t: &Operator, c: &[f64], r: f64, x: &Operator) -> Operator {
    let last = match c.iter().rposition(|&v| v != 0.0) {
        Some(k) => k,
        None => return linalg::zeros(x.nrows(), x.ncols()),
    };
    let mut out = x * c64(c[0], 0.0);
    let mut y = x.clone();
    let mut rk = 1.0;
    for &ck in &c[1..=last] {
        y = t * y * t.adjoint();
        rk *= r;
        if y.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            break;
        }
        if ck != 0.0 {
            out += &y * c64(ck * rk, 0.0);
        }
    }
    out
}

/// D_{W,T}(r) from per-variable coefficient lists, applied to X.
pub fn hereditary_product(
    t: &OperatorTuple,
    coeffs: &[Vec<f64>],
    r: &[f64],
    x: &Operator,
) -> Operator {
    let mut acc = x.clone();
    for i in (0..t.n()).rev() {
        acc = hereditary_sum(&t.ops[i], &coeffs[i], r[i], &acc);
    }
    hermitian_part(&acc)
}

/// D_{W,T}(r) = Σ_{α<N} c_α r^α T^α T^{*α}.
pub fn defect_series(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    r: &[f64],
    terms: usize,
) -> Result<Operator> {
    t.check_arity(w)?;
    if r.len() != t.n() {
        return Err(Error::ArityMismatch {
            expected: t.n(),
            got: r.len(),
        });
    }
    let coeffs = w.inverse_coeffs(terms)?;
    Ok(hereditary_product(t, &coeffs, r, &identity(t.dim())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    DirectSumAtOne,
    TailCorrected,
    MonotoneGrid,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectResult {
    #[serde(serialize_with = "serialize_op")]
    pub value_at_r: Operator,
    #[serde(serialize_with = "serialize_op")]
    pub limit: Operator,
    pub r_trace: Vec<(f64, f64)>,
    pub converged: bool,
    pub method: LimitMethod,
}

/// Upper bound on ‖D_{W,T}(e) - Σ_{α<N} c_α T^α T^{*α}‖.
pub fn truncation_tail_bound(t: &OperatorTuple, w: &MultiWeightSpec, terms: usize) -> Result<f64> {
    t.check_arity(w)?;
    let mut abs = Vec::with_capacity(t.n());
    let mut tails = Vec::with_capacity(t.n());
    for wi in w.weights() {
        let (head, _) = wi.inverse_abs_sum(terms)?;
        let (long, rest) = wi.inverse_abs_sum(16 * terms)?;
        tails.push((long - head) + rest);
        abs.push(long + rest);
    }
    let mut bound = 0.0;
    for (i, &tail) in tails.iter().enumerate() {
        if tail == 0.0 {
            continue;
        }
        let p = op_norm(&power(&t.ops[i], terms));
        let others: f64 = abs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| a)
            .product();
        bound += p * p * tail * others;
    }
    Ok(bound)
}

fn terms_for(r: f64, terms: usize) -> usize {
    if r >= 1.0 {
        return terms;
    }
    let need = (-39.0 / r.ln()).ceil() as usize;
    need.clamp(terms, GRID_TERM_CAP.max(terms))
}

/// D_{W,T}(e) either as a norm-convergent sum or as a monotone limit along
/// r_j = 1 - 2^{-j}.
pub fn defect_limit(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    terms: usize,
    tol: f64,
    max_iters: usize,
) -> Result<DefectResult> {
    let bound = truncation_tail_bound(t, w, terms)?;
    if bound < tol {
        let v = defect_series(t, w, &vec![1.0; t.n()], terms)?;
        return Ok(DefectResult {
            value_at_r: v.clone(),
            limit: v,
            r_trace: vec![(1.0, bound)],
            converged: true,
            method: LimitMethod::DirectSumAtOne,
        });
    }
    if let Some((v, est)) = tail_corrected(t, w, tol) {
        return Ok(DefectResult {
            value_at_r: v.clone(),
            limit: v,
            r_trace: vec![(1.0, est)],
            converged: true,
            method: LimitMethod::TailCorrected,
        });
    }
    let mut prev: Option<Operator> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    for j in 1..=max_iters.max(1) {
        let r = 1.0 - 0.5f64.powi(j as i32);
        let v = defect_series(t, w, &vec![r; t.n()], terms_for(r, terms))?;
        let diff = prev.as_ref().map_or(f64::INFINITY, |p| dist(p, &v));
        trace.push((r, diff));
        prev = Some(v);
        if diff < tol {
            converged = true;
            break;
        }
    }
    let v = prev.expect("at least one grid step");
    Ok(DefectResult {
        value_at_r: v.clone(),
        limit: v,
        r_trace: trace,
        converged,
        method: LimitMethod::MonotoneGrid,
    })
}

/// D_{W,T}(e) with each variable summed as Σ_k c_k (T^k X T^{*k} - L(X)),
/// L(X) = lim T^k X T^{*k}. Presets have Σ c_k = 0, so this equals the Abel
/// sum at r = 1. The unimodular eigenspaces of a contraction reduce every
/// commuting contraction, so T^k X T^{*k} - L(X) decays geometrically and
/// the sum converges even when a unitary part keeps the plain series from
/// doing so. Returns the value and an estimate of the neglected mass, or
/// None when a variable has an explicit weight or does not settle within
/// the term cap.
fn tail_corrected(t: &OperatorTuple, w: &MultiWeightSpec, tol: f64) -> Option<(Operator, f64)> {
    let mut acc = identity(t.dim());
    let mut est = 0.0;
    for i in (0..t.n()).rev() {
        let wi = &w.weights()[i];
        wi.beta()?;
        let ti = &t.ops[i];
        if let Some(m) = wi.integer_beta() {
            let c = wi.inverse_coeffs(m as usize + 1).ok()?;
            acc = hereditary_sum(ti, &c, 1.0, &acc);
            continue;
        }
        let c = wi.inverse_coeffs(CORRECTED_TERM_CAP).ok()?;
        let lim = conjugation_limit(ti, &acc, tol * 1e-3, MAX_SQUARINGS);
        if !lim.converged {
            return None;
        }
        let l = lim.limit;
        let mut out = (&acc - &l) * c64(c[0], 0.0);
        let mut y = acc.clone();
        let mut prev = f64::INFINITY;
        let mut done = None;
        for (k, &ck) in c.iter().enumerate().skip(1) {
            y = hermitian_part(&(ti * &y * ti.adjoint()));
            let e = &y - &l;
            let en = op_norm(&e);
            out += e * c64(ck, 0.0);
            // |c_k| is non-increasing past k = β, so ratio decay bounds the rest.
            let q = en / prev;
            prev = en;
            let rest = if en == 0.0 {
                0.0
            } else if q < 1.0 && k as f64 > wi.beta()? {
                ck.abs() * en * q / (1.0 - q)
            } else {
                f64::INFINITY
            };
            if rest < tol {
                done = Some(rest);
                break;
            }
        }
        est += done?;
        acc = out;
    }
    Some((hermitian_part(&acc), est))
}

/// D_{W,T} = D_{W,T}(e)^{1/2}.
pub fn defect_operator(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    terms: usize,
    tol: f64,
) -> Result<Operator> {
    let lim = defect_limit(t, w, terms, tol, 24)?;
    psd_sqrt(&lim.limit, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct TailResult {
    /// lim T^k X T^{*k}
    #[serde(serialize_with = "serialize_op")]
    pub limit: Operator,
    pub converged: bool,
    pub squarings: usize,
}

/// lim_k T^k X T^{*k} along k = 2^s.
pub fn conjugation_limit(t: &Operator, x: &Operator, tol: f64, max_k: usize) -> TailResult {
    let mut p = t.clone();
    let mut y = hermitian_part(&(t * x * t.adjoint()));
    for s in 0..max_k {
        let next = hermitian_part(&(&p * &y * p.adjoint()));
        let diff = dist(&next, &y);
        y = next;
        if diff < tol {
            return TailResult {
                limit: y,
                converged: true,
                squarings: s + 1,
            };
        }
        p = &p * &p;
    }
    TailResult {
        limit: y,
        converged: false,
        squarings: max_k,
    }
}

/// Q_T² = lim T^k T^{*k}; `limit` holds Q_T², `tail_operator` its root.
pub fn tail_square(t: &Operator, tol: f64, max_k: usize) -> TailResult {
    conjugation_limit(t, &identity(t.nrows()), tol, max_k)
}

pub fn tail_operator(t: &Operator, tol: f64, max_k: usize) -> Result<(Operator, bool)> {
    let r = tail_square(t, tol, max_k);
    Ok((psd_sqrt(&r.limit, tol.max(1e-12))?, r.converged))
}

pub fn is_pure(t: &OperatorTuple, tol: f64, max_k: usize) -> bool {
    t.ops.iter().all(|ti| {
        let r = tail_square(ti, tol, max_k);
        r.converged && op_norm(&r.limit) <= tol
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaReport {
    pub verdict: bool,
    /// (r, smallest eigenvalue of D_{ω,T}(r))
    pub grid: Vec<(f64, f64)>,
    /// Smallest eigenvalue of D_{ω,T}(1) when the sum converges in norm.
    pub at_one: Option<f64>,
    /// Whether the grid verdict and the D(1) verdict agree.
    pub agrees_with_at_one: Option<bool>,
}

/// Positivity of Σ c_k r^k T^k T^{*k} on a grid and, when the series at r = 1
/// converges in norm, at r = 1.
pub fn is_omega_hypercontraction(
    t: &Operator,
    w: &WeightSpec,
    r_grid: &[f64],
    terms: usize,
    tol: f64,
) -> Result<OmegaReport> {
    let tuple = OperatorTuple::new(vec![t.clone()], f64::INFINITY)?;
    let mw = MultiWeightSpec(vec![w.clone()]);
    let mut grid = Vec::with_capacity(r_grid.len());
    let mut grid_ok = true;
    for &r in r_grid {
        let d = defect_series(&tuple, &mw, &[r], terms_for(r, terms))?;
        let c = psd_check(&d, tol)?;
        grid_ok &= c.verdict;
        grid.push((r, c.min_eigenvalue));
    }
    let at_one = if truncation_tail_bound(&tuple, &mw, terms)? < tol {
        let d = defect_series(&tuple, &mw, &[1.0], terms)?;
        Some(psd_check(&d, tol)?.min_eigenvalue)
    } else {
        None
    };
    let one_ok = at_one.map(|m| m >= -tol);
    Ok(OmegaReport {
        verdict: grid_ok && one_ok.unwrap_or(true),
        grid,
        at_one,
        agrees_with_at_one: one_ok.map(|o| o == grid_ok),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub mask: usize,
    pub r: Vec<f64>,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberCertificate {
    pub mask: usize,
    pub weights: String,
    pub grid_min_eig: f64,
    pub at_e_min_eig: Option<f64>,
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperReport {
    pub verdict: bool,
    pub grid_verdict: bool,
    pub at_e_verdict: Option<bool>,
    pub members: Vec<MemberCertificate>,
    pub witnesses: Vec<Witness>,
    /// Always false: a finite grid cannot certify the whole open polydisc.
    pub continuum_certified: bool,
}

/// Checks D_{W',T}(r) ≽ 0 for every W' in S(W) and r in the grid, plus
/// r = e for members whose series converges there in norm.
pub fn is_w_hypercontraction(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    r_grid: &[Vec<f64>],
    terms: usize,
    tol: f64,
) -> Result<HyperReport> {
    t.check_arity(w)?;
    let mut members = Vec::new();
    let mut witnesses = Vec::new();
    let mut grid_verdict = true;
    let mut at_e_verdict: Option<bool> = None;
    for (mask, wp) in w.family() {
        let mut grid_min = f64::INFINITY;
        let mut ok = true;
        for r in r_grid {
            if r.len() != t.n() {
                return Err(Error::ArityMismatch {
                    expected: t.n(),
                    got: r.len(),
                });
            }
            let n_terms = r
                .iter()
                .map(|&x| terms_for(x, terms))
                .max()
                .unwrap_or(terms);
            let d = defect_series(t, &wp, r, n_terms)?;
            let c = psd_check(&d, tol)?;
            grid_min = grid_min.min(c.min_eigenvalue);
            if !c.verdict {
                ok = false;
                witnesses.push(Witness {
                    mask,
                    r: r.clone(),
                    min_eig: c.min_eigenvalue,
                });
            }
        }
        grid_verdict &= ok;
        let at_e = if truncation_tail_bound(t, &wp, terms)? < tol {
            let d = defect_series(t, &wp, &vec![1.0; t.n()], terms)?;
            let c = psd_check(&d, tol)?;
            if !c.verdict {
                ok = false;
                witnesses.push(Witness {
                    mask,
                    r: vec![1.0; t.n()],
                    min_eig: c.min_eigenvalue,
                });
            }
            at_e_verdict = Some(at_e_verdict.unwrap_or(true) && c.verdict);
            Some(c.min_eigenvalue)
        } else {
            None
        };
        members.push(MemberCertificate {
            mask,
            weights: wp.to_string(),
            grid_min_eig: if r_grid.is_empty() { 0.0 } else { grid_min },
            at_e_min_eig: at_e,
            verdict: ok,
        });
    }
    Ok(HyperReport {
        verdict: members.iter().all(|m| m.verdict),
        grid_verdict,
        at_e_verdict,
        members,
        witnesses,
        continuum_certified: false,
    })
}

/// Product grid of the dyadic points 1 - 2^{-j}, j = 1..=k, in n variables.
pub fn dyadic_grid(n: usize, k: usize) -> Vec<Vec<f64>> {
    let pts: Vec<f64> = (1..=k).map(|j| 1.0 - 0.5f64.powi(j as i32)).collect();
    product_grid(&vec![pts; n])
}

pub fn product_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaResult {
    #[serde(serialize_with = "serialize_op")]
    pub value: Operator,
    pub tail_bound: f64,
}

/// b_1..b_n with (1-x)^δ = 1 - Σ b_k x^k.
pub fn fractional_coeffs(delta: f64, n: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(n);
    let mut bk = delta;
    for k in 1..=n {
        b.push(bk);
        bk = bk * (k as f64 - delta) / (k as f64 + 1.0);
    }
    b
}

/// Δ^β_T(X) = (I - C_{T_1})^{β_1}···(I - C_{T_n})^{β_n}(X), C_A(X) = AXA*.
pub fn delta_power(
    t: &OperatorTuple,
    beta: &[f64],
    x: &Operator,
    n_series: usize,
    tol: f64,
) -> Result<DeltaResult> {
    if beta.len() != t.n() {
        return Err(Error::ArityMismatch {
            expected: t.n(),
            got: beta.len(),
        });
    }
    let mut y = x.clone();
    let mut tail_bound = 0.0;
    for (ti, &bi) in t.ops.iter().zip(beta) {
        if !(bi >= 0.0 && bi.is_finite()) {
            return Err(Error::BadBeta(bi));
        }
        let m = bi.floor() as usize;
        for _ in 0..m {
            y = &y - ti * &y * ti.adjoint();
        }
        let delta = bi - m as f64;
        if delta > 0.0 {
            let b = fractional_coeffs(delta, n_series);
            let mut acc = y.clone();
            let mut ck = y.clone();
            for bk in &b {
                ck = ti * ck * ti.adjoint();
                acc -= &ck * c64(*bk, 0.0);
            }
            let leftover = 1.0 - b.iter().sum::<f64>();
            let p = op_norm(&power(ti, n_series + 1));
            tail_bound += leftover.max(0.0) * p * p * op_norm(&y);
            y = acc;
        }
    }
    if tail_bound > tol {
        return Err(Error::SeriesTailTooLarge {
            tail: tail_bound,
            tol,
        });
    }
    Ok(DeltaResult {
        value: hermitian_part(&y),
        tail_bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    pub verdict: bool,
    /// (β, smallest eigenvalue of Δ^β_T(I))
    pub checked: Vec<(Vec<f64>, f64)>,
    pub witness: Option<Vec<f64>>,
}

/// Exponents {β : β_i ∈ {0, 1, …, ⌊γ_i⌋} ∪ {γ_i}} in lexicographic order.
pub fn gamma_lattice(gamma: &[f64]) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = gamma
        .iter()
        .map(|&g| {
            let mut a: Vec<f64> = (0..=g.floor() as usize).map(|k| k as f64).collect();
            if g.fract() != 0.0 {
                a.push(g);
            }
            a
        })
        .collect();
    product_grid(&axes)
}

pub fn is_gamma_contractive(
    t: &OperatorTuple,
    gamma: &[f64],
    tol: f64,
    n_series: usize,
) -> Result<GammaReport> {
    if gamma.len() != t.n() {
        return Err(Error::ArityMismatch {
            expected: t.n(),
            got: gamma.len(),
        });
    }
    if let Some(&g) = gamma.iter().find(|&&g| !(g >= 1.0 && g.is_finite())) {
        return Err(Error::BadBeta(g));
    }
    let id = identity(t.dim());
    let mut checked = Vec::new();
    let mut witness = None;
    for beta in gamma_lattice(gamma) {
        let d = delta_power(t, &beta, &id, n_series, tol)?;
        let c = psd_check(&d.value, tol)?;
        if !c.verdict && witness.is_none() {
            witness = Some(beta.clone());
        }
        checked.push((beta, c.min_eigenvalue));
    }
    Ok(GammaReport {
        verdict: witness.is_none(),
        checked,
        witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub agree: bool,
    pub gamma: GammaReport,
    pub hyper: HyperReport,
}

/// Runs both sides of the γ-contractive / W_γ-hypercontraction equivalence.
pub fn equivalence_crosscheck(
    t: &OperatorTuple,
    gamma: &[u32],
    r_grid: &[Vec<f64>],
    terms: usize,
    tol: f64,
) -> Result<EquivalenceReport> {
    let g: Vec<f64> = gamma.iter().map(|&x| x as f64).collect();
    let gamma_rep = is_gamma_contractive(t, &g, tol, 200)?;
    let w = MultiWeightSpec::bergman(&g)?;
    let hyper = is_w_hypercontraction(t, &w, r_grid, terms, tol)?;
    if gamma_rep.verdict != hyper.verdict {
        return Err(Error::EquivalenceViolation {
            gamma: gamma_rep.verdict,
            hyper: hyper.verdict,
        });
    }
    Ok(EquivalenceReport {
        agree: true,
        gamma: gamma_rep,
        hyper,
    })
}

/// Verdicts of the real-γ criterion are monotone: passing at β' implies
/// passing at every listed β ≤ β'. Returns the offending pairs.
pub fn gamma_monotone_violations(rep: &GammaReport, tol: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for (hi, hi_min) in &rep.checked {
        if *hi_min < -tol {
            continue;
        }
        for (lo, lo_min) in &rep.checked {
            if lo.iter().zip(hi).all(|(a, b)| a <= b) && *lo_min < -tol {
                out.push((lo.clone(), hi.clone()));
            }
        }
    }
    out
}

/// T_Λ for a list of (0-based) coordinates.
pub fn subtuple(t: &OperatorTuple, idx: &[usize]) -> Result<OperatorTuple> {
    if idx.is_empty() || idx.iter().any(|&i| i >= t.n()) {
        return Err(Error::Shape(format!(
            "invalid coordinate subset {idx:?} for arity {}",
            t.n()
        )));
    }
    OperatorTuple::new(
        idx.iter().map(|&i| t.ops[i].clone()).collect(),
        t.commutation_tol,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SubtupleReport {
    pub subset: Vec<usize>,
    pub full_verdict: bool,
    pub sub_verdict: bool,
    /// full ⇒ sub
    pub holds: bool,
}

pub fn subtuple_inheritance_check(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    idx: &[usize],
    r_grid: &[Vec<f64>],
    terms: usize,
    tol: f64,
) -> Result<SubtupleReport> {
    let full = is_w_hypercontraction(t, w, r_grid, terms, tol)?;
    let sub_t = subtuple(t, idx)?;
    let sub_grid: Vec<Vec<f64>> = r_grid
        .iter()
        .map(|r| idx.iter().map(|&i| r[i]).collect())
        .collect();
    let sub = is_w_hypercontraction(&sub_t, &w.restrict(idx), &sub_grid, terms, tol)?;
    Ok(SubtupleReport {
        subset: idx.to_vec(),
        full_verdict: full.verdict,
        sub_verdict: sub.verdict,
        holds: !full.verdict || sub.verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    /// Largest -λ_min(f(smaller) - f(larger)) over comparable pairs.
    pub max_violation: f64,
    pub ok: bool,
}

fn leq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// D_{W,T}(s) ≼ D_{W,T}(r) for componentwise r ≤ s in the supplied points.
pub fn loewner_monotonicity_check(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    r_points: &[Vec<f64>],
    terms: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    let vals = r_points
        .iter()
        .map(|r| {
            defect_series(
                t,
                w,
                r,
                r.iter()
                    .map(|&x| terms_for(x, terms))
                    .max()
                    .unwrap_or(terms),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = MonotonicityReport {
        pairs_checked: 0,
        max_violation: 0.0,
        ok: true,
    };
    for i in 0..r_points.len() {
        for j in 0..r_points.len() {
            if i != j && leq(&r_points[i], &r_points[j]) {
                let gap = linalg::min_eigenvalue(&(&vals[i] - &vals[j]));
                rep.pairs_checked += 1;
                rep.max_violation = rep.max_violation.max(-gap);
            }
        }
    }
    rep.ok = rep.max_violation <= tol;
    Ok(rep)
}

/// f(r', β) = T^β_{Λ^c} D_{W_Λ,T_Λ}(r') T^{*β}_{Λ^c}.
pub fn appendix_value(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    lambda: &[usize],
    r: &[f64],
    beta: &[u32],
    terms: usize,
) -> Result<Operator> {
    let comp: Vec<usize> = (0..t.n()).filter(|i| !lambda.contains(i)).collect();
    if beta.len() != comp.len() {
        return Err(Error::ArityMismatch {
            expected: comp.len(),
            got: beta.len(),
        });
    }
    let sub = subtuple(t, lambda)?;
    let n_terms = r
        .iter()
        .map(|&x| terms_for(x, terms))
        .max()
        .unwrap_or(terms);
    let d = defect_series(&sub, &w.restrict(lambda), r, n_terms)?;
    let mut tb = identity(t.dim());
    for (&j, &b) in comp.iter().zip(beta) {
        tb *= power(&t.ops[j], b as usize);
    }
    Ok(hermitian_part(&(&tb * d * tb.adjoint())))
}

/// f(s', β) ≼ f(r', α) whenever r' ≤ s' and α ≤ β on the supplied grids.
pub fn appendix_monotonicity_check(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    lambda: &[usize],
    r_points: &[Vec<f64>],
    beta_points: &[Vec<u32>],
    terms: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    let mut vals = Vec::new();
    for r in r_points {
        for b in beta_points {
            vals.push((
                r.clone(),
                b.iter().map(|&x| x as f64).collect::<Vec<f64>>(),
                appendix_value(t, w, lambda, r, b, terms)?,
            ));
        }
    }
    let mut rep = MonotonicityReport {
        pairs_checked: 0,
        max_violation: 0.0,
        ok: true,
    };
    for (r1, a1, f1) in &vals {
        for (r2, a2, f2) in &vals {
            if (r1, a1) != (r2, a2) && leq(r1, r2) && leq(a1, a2) {
                let gap = linalg::min_eigenvalue(&(f1 - f2));
                rep.pairs_checked += 1;
                rep.max_violation = rep.max_violation.max(-gap);
            }
        }
    }
    rep.ok = rep.max_violation <= tol;
    Ok(rep)
}

/// Verdict plus the defect and tail operators, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub verdict: bool,
    pub witnesses: Vec<Witness>,
    #[serde(serialize_with = "crate::linalg::serialize_opt_op")]
    pub defect: Option<Operator>,
    #[serde(serialize_with = "serialize_ops")]
    pub q_tail: Vec<Operator>,
    pub pure: bool,
    pub limit_converged: bool,
    pub continuum_certified: bool,
}

pub fn classify(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    r_grid: &[Vec<f64>],
    terms: usize,
    tol: f64,
) -> Result<ClassificationReport> {
    let hyper = is_w_hypercontraction(t, w, r_grid, terms, tol)?;
    let lim = defect_limit(t, w, terms, crate::LIMIT_TOL, 24)?;
    let defect = psd_sqrt(&lim.limit, tol).ok();
    let q_tail = t
        .ops
        .iter()
        .map(|ti| tail_operator(ti, crate::LIMIT_TOL, MAX_SQUARINGS).map(|q| q.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationReport {
        verdict: hyper.verdict,
        witnesses: hyper.witnesses,
        defect,
        q_tail,
        pure: is_pure(t, crate::LIMIT_TOL, MAX_SQUARINGS),
        limit_converged: lim.converged,
        continuum_certified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::linalg::zeros;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn w(s: &str) -> MultiWeightSpec {
        s.parse().unwrap()
    }

    fn scalar(t: f64) -> Operator {
        DMatrix::from_element(1, 1, c64(t, 0.0))
    }

    fn shift(n: usize) -> Operator {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j + 1 {
                c64(1.0, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    #[test]
    fn defect_of_zero_is_identity() {
        let t = OperatorTuple::new(vec![zeros(3, 3), zeros(3, 3)], 1e-10).unwrap();
        let d = defect_series(&t, &w("bergman:2,bergman:1.5"), &[0.5, 0.7], 16).unwrap();
        assert_eq!(d, identity(3));
        let lim = defect_limit(&t, &w("bergman:2,bergman:1.5"), 16, 1e-9, 10).unwrap();
        assert_eq!(lim.limit, identity(3));
        assert_eq!(lim.method, LimitMethod::DirectSumAtOne);
    }

    #[test]
    fn defect_of_coisometries() {
        let t = gen::commuting_unitaries(4, 3, 2);
        let ww = w("bergman:2,bergman:3");
        for r in [[0.3, 0.6], [0.9, 0.2]] {
            let d = defect_series(&t, &ww, &r, 64).unwrap();
            let k = (1.0 - r[0]).powi(2) * (1.0 - r[1]).powi(3);
            assert!(dist(&d, &(identity(3) * c64(k, 0.0))) < 1e-12);
        }
    }

    #[test]
    fn truncated_shift_defect() {
        // I - S S* on the 4-dim truncation: the projection onto e0.
        let t = OperatorTuple::new(vec![shift(4)], 1e-10).unwrap();
        let d = defect_series(&t, &w("hardy"), &[1.0], 4).unwrap();
        let mut oracle = zeros(4, 4);
        oracle[(0, 0)] = c64(1.0, 0.0);
        assert_eq!(d, oracle);
    }

    #[test]
    fn unitary_defect_vanishes_for_fractional_weights() {
        let t = gen::commuting_unitaries(2, 3, 2);
        let lim = defect_limit(&t, &w("bergman:1.5,bergman:2.5"), 32, 1e-11, 8).unwrap();
        assert_eq!(lim.method, LimitMethod::TailCorrected);
        assert!(op_norm(&lim.limit) < 1e-12);
        let m = gen::mixed_pair(49546, 2, 2);
        let lim = defect_limit(&m, &w("bergman:1.5,bergman:2"), 32, 1e-11, 8).unwrap();
        assert_eq!(lim.method, LimitMethod::TailCorrected);
        assert!(op_norm(&lim.limit) < 1e-12);
    }

    #[test]
    fn corrected_sum_matches_closed_form() {
        // Scalar t: Σ c_k |t|^{2k} = (1 - |t|²)^β, and L = 0.
        for (tv, beta) in [(0.6, 1.5), (0.9, 2.5), (0.3, 1.25)] {
            let t = OperatorTuple::new(vec![scalar(tv)], 1e-10).unwrap();
            let ww = MultiWeightSpec(vec![WeightSpec::Bergman(beta)]);
            let (v, _) = tail_corrected(&t, &ww, 1e-13).unwrap();
            assert!((v[(0, 0)].re - (1.0 - tv * tv).powf(beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn slow_contraction_falls_back_to_grid() {
        let t = OperatorTuple::new(vec![scalar(0.9999)], 1e-10).unwrap();
        let lim = defect_limit(&t, &w("bergman:1.5"), 32, 1e-9, 8).unwrap();
        assert_eq!(lim.method, LimitMethod::MonotoneGrid);
        assert!(!lim.converged);
        let diffs: Vec<f64> = lim.r_trace.iter().skip(1).map(|x| x.1).collect();
        assert!(diffs.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn nilpotent_limit_is_exact() {
        let t = gen::nilpotent_tuple(7, 4, 2);
        let ww = w("bergman:2,hardy");
        let lim = defect_limit(&t, &ww, 8, 1e-9, 10).unwrap();
        assert_eq!(lim.method, LimitMethod::DirectSumAtOne);
        // Oracle: the explicit double sum over α < 4.
        let c = [[1.0, -2.0, 1.0, 0.0], [1.0, -1.0, 0.0, 0.0]];
        let mut oracle = zeros(4, 4);
        for a in 0..4 {
            for b in 0..4 {
                let ta = power(&t.ops()[0], a) * power(&t.ops()[1], b);
                oracle += &ta * ta.adjoint() * c64(c[0][a] * c[1][b], 0.0);
            }
        }
        assert!(dist(&lim.limit, &oracle) < 1e-14);
    }

    #[test]
    fn defect_operator_examples() {
        let t = OperatorTuple::new(vec![zeros(2, 2)], 1e-10).unwrap();
        assert!(
            dist(
                &defect_operator(&t, &w("hardy"), 8, 1e-9).unwrap(),
                &identity(2)
            ) < 1e-14
        );
        let g = gen::polynomial_pair(3, 3, 0.3, 0.6);
        let t1 = OperatorTuple::new(vec![g.ops()[0].clone()], 1e-10).unwrap();
        let d = defect_operator(&t1, &w("hardy"), 8, 1e-9).unwrap();
        let classical = identity(3) - &t1.ops()[0] * t1.ops()[0].adjoint();
        assert!(dist(&(&d * &d), &classical) < 1e-12);
        let ts = OperatorTuple::new(vec![scalar(0.6)], 1e-10).unwrap();
        let d = defect_operator(&ts, &w("bergman:2"), 8, 1e-9).unwrap();
        assert!((d[(0, 0)].re.powi(2) - (1.0f64 - 0.36).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn tail_examples() {
        let t = gen::nilpotent_tuple(1, 4, 1);
        assert!(tail_operator(&t.ops()[0], 1e-9, 64).unwrap().0.norm() < 1e-14);
        let u = gen::commuting_unitaries(1, 3, 1);
        assert!(
            dist(
                &tail_operator(&u.ops()[0], 1e-9, 64).unwrap().0,
                &identity(3)
            ) < 1e-12
        );
        let mut dg = zeros(2, 2);
        dg[(0, 0)] = c64(1.0, 0.0);
        dg[(1, 1)] = c64(0.5, 0.0);
        let (q, conv) = tail_operator(&dg, 1e-12, 64).unwrap();
        assert!(conv);
        let mut oracle = zeros(2, 2);
        oracle[(0, 0)] = c64(1.0, 0.0);
        assert!(dist(&(&q * &q), &oracle) < 1e-12);
    }

    #[test]
    fn purity_examples() {
        assert!(is_pure(&gen::nilpotent_tuple(5, 5, 3), 1e-9, 64));
        assert!(!is_pure(&gen::mixed_pair(5, 2, 2), 1e-9, 64));
        let mut a = zeros(2, 2);
        a[(0, 0)] = c64(0.5, 0.0);
        a[(1, 1)] = c64(1.0 / 3.0, 0.0);
        let t = OperatorTuple::new(vec![a.clone(), a], 1e-10).unwrap();
        assert!(is_pure(&t, 1e-9, 64));
    }

    #[test]
    fn omega_examples() {
        let grid = [0.3, 0.6, 0.9];
        assert!(
            is_omega_hypercontraction(&zeros(2, 2), &WeightSpec::Bergman(3.0), &grid, 16, 1e-8)
                .unwrap()
                .verdict
        );
        let space = crate::bergman::TruncatedSpace::new(w("bergman:2"), vec![6], 1).unwrap();
        let m = crate::bergman::shift_matrix(&space, 0).unwrap();
        let rep =
            is_omega_hypercontraction(&m, &WeightSpec::Bergman(2.0), &grid, 16, 1e-8).unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.agrees_with_at_one, Some(true));
        let rep =
            is_omega_hypercontraction(&scalar(0.8), &WeightSpec::Bergman(2.0), &grid, 16, 1e-8)
                .unwrap();
        assert!(rep.verdict);
        assert!((rep.at_one.unwrap() - (1.0f64 - 0.64).powi(2)).abs() < 1e-14);
        // The Hardy shift is not a Bergman-3 hypercontraction.
        let rep = is_omega_hypercontraction(&shift(4), &WeightSpec::Bergman(3.0), &grid, 16, 1e-8)
            .unwrap();
        assert!(!rep.verdict);
    }

    #[test]
    fn w_hyper_examples() {
        let grid = dyadic_grid(2, 3);
        let t = gen::commuting_unitaries(9, 3, 2);
        let rep = is_w_hypercontraction(&t, &w("bergman:2,bergman:1.5"), &grid, 64, 1e-8).unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.members.len(), 4);
        // (co-isometry, W'-hypercontraction) with W = (ω_1, W').
        let m = gen::multishift(&w("bergman:3"), &[5]).unwrap();
        let u = gen::commuting_unitaries(2, 2, 1);
        let r = OperatorTuple::new(
            vec![
                linalg::kron(&u.ops()[0], &identity(5)),
                linalg::kron(&identity(2), &m.ops()[0]),
            ],
            1e-10,
        )
        .unwrap();
        assert!(
            is_w_hypercontraction(&r, &w("bergman:2,bergman:3"), &grid, 64, 1e-8)
                .unwrap()
                .verdict
        );
        let ms = gen::multishift(&w("bergman:2,hardy"), &[4, 4]).unwrap();
        assert!(
            is_w_hypercontraction(&ms, &w("bergman:2,hardy"), &grid, 16, 1e-8)
                .unwrap()
                .verdict
        );
        assert!(is_pure(&ms, 1e-9, 64));
        // A failing case names its witness.
        let sh = OperatorTuple::new(vec![shift(3), zeros(3, 3)], 1e-10).unwrap();
        let rep = is_w_hypercontraction(&sh, &w("bergman:2,hardy"), &grid, 16, 1e-8).unwrap();
        assert!(!rep.verdict);
        assert!(rep.witnesses.iter().all(|x| x.mask & 1 == 1));
    }

    #[test]
    fn delta_power_examples() {
        let t = gen::nilpotent_tuple(3, 4, 2);
        let x = hermitian_part(&gen::Lcg::new(1).gaussian_matrix(4, 4));
        assert_eq!(
            delta_power(&t, &[0.0, 0.0], &x, 200, 1e-9).unwrap().value,
            hermitian_part(&x)
        );
        let s = gen::scalars(&[c64(0.5, 0.0), c64(0.0, 0.3)]).unwrap();
        let v = delta_power(&s, &[1.0, 1.0], &identity(1), 200, 1e-9)
            .unwrap()
            .value;
        assert!((v[(0, 0)].re - 0.75 * 0.91).abs() < 1e-15);
        // β = (2,1) against the explicit alternating binomial sum.
        let v = delta_power(&t, &[2.0, 1.0], &identity(4), 200, 1e-9)
            .unwrap()
            .value;
        let mut oracle = zeros(4, 4);
        for a in 0..=2usize {
            for b in 0..=1usize {
                let coef =
                    [1.0, 2.0, 1.0][a] * [1.0, 1.0][b] * if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                let ta = power(&t.ops()[0], a) * power(&t.ops()[1], b);
                oracle += &ta * ta.adjoint() * c64(coef, 0.0);
            }
        }
        assert!(dist(&v, &oracle) < 1e-14);
        let d = defect_series(&t, &w("bergman:2,hardy"), &[1.0, 1.0], 8).unwrap();
        assert!(dist(&v, &d) < 1e-14);
    }

    #[test]
    fn fractional_delta_matches_scalar_power() {
        let s = gen::scalars(&[c64(0.6, 0.0)]).unwrap();
        let v = delta_power(&s, &[1.5], &identity(1), 200, 1e-9).unwrap();
        assert!((v.value[(0, 0)].re - (1.0f64 - 0.36).powf(1.5)).abs() < 1e-14);
        let u = gen::commuting_unitaries(1, 2, 1);
        assert!(matches!(
            delta_power(&u, &[0.5], &identity(2), 200, 1e-9),
            Err(Error::SeriesTailTooLarge { .. })
        ));
    }

    #[test]
    fn gamma_examples() {
        let s = gen::scalars(&[c64(0.7, 0.0), c64(0.2, 0.4)]).unwrap();
        assert!(
            is_gamma_contractive(&s, &[1.0, 1.0], 1e-8, 200)
                .unwrap()
                .verdict
        );
        let u = gen::commuting_unitaries(3, 2, 2);
        assert!(
            is_gamma_contractive(&u, &[3.0, 2.0], 1e-8, 200)
                .unwrap()
                .verdict
        );
        let sh = OperatorTuple::new(vec![shift(3), zeros(3, 3)], 1e-10).unwrap();
        let rep = is_gamma_contractive(&sh, &[2.0, 1.0], 1e-8, 200).unwrap();
        assert!(!rep.verdict);
        assert_eq!(rep.witness, Some(vec![2.0, 0.0]));
        assert_eq!(gamma_lattice(&[1.5, 2.0]).len(), 9);
    }

    #[test]
    fn equivalence_examples() {
        let grid = dyadic_grid(2, 3);
        for (a, b) in [(0.1, 0.9), (0.5, 0.5), (0.95, 0.3)] {
            let s = gen::scalars(&[c64(a, 0.0), c64(0.0, b)]).unwrap();
            for g in [[1, 1], [2, 1], [3, 2]] {
                let rep = equivalence_crosscheck(&s, &g, &grid, 32, 1e-8).unwrap();
                assert!(rep.gamma.verdict && rep.hyper.verdict);
            }
        }
        let ms = gen::multishift(&w("bergman:2,bergman:2"), &[4, 4]).unwrap();
        let rep = equivalence_crosscheck(&ms, &[2, 2], &grid, 16, 1e-8).unwrap();
        assert!(rep.gamma.verdict);
    }

    #[test]
    fn contraction_precondition() {
        assert!(matches!(
            gen::random_contraction(1, 3, 2, 1.2),
            Err(Error::NotContraction { .. })
        ));
    }

    #[test]
    fn subtuple_examples() {
        let grid = dyadic_grid(2, 2);
        let t = gen::commuting_unitaries(3, 3, 2);
        let ww = w("bergman:2,bergman:3");
        assert!(
            subtuple_inheritance_check(&t, &ww, &[0, 1], &grid, 32, 1e-8)
                .unwrap()
                .holds
        );
        let rep = subtuple_inheritance_check(&t, &ww, &[1], &grid, 32, 1e-8).unwrap();
        assert!(rep.full_verdict && rep.sub_verdict);
        let p = gen::nilpotent_tuple(17, 4, 2);
        let rep = subtuple_inheritance_check(&p, &ww, &[0], &grid, 16, 1e-8).unwrap();
        assert!(rep.full_verdict && rep.sub_verdict);
        let one = subtuple(&p, &[0]).unwrap();
        assert!(
            is_omega_hypercontraction(
                &one.ops()[0],
                &WeightSpec::Bergman(2.0),
                &[0.5, 0.9],
                16,
                1e-8
            )
            .unwrap()
            .verdict
        );
    }

    #[test]
    fn appendix_examples() {
        let t = gen::nilpotent_tuple(21, 4, 2);
        let ww = w("bergman:2,bergman:2");
        let r = vec![vec![0.25], vec![0.5], vec![1.0]];
        let b = vec![vec![0], vec![1], vec![2]];
        let rep = appendix_monotonicity_check(&t, &ww, &[0], &r, &b, 16, 1e-10).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert!(rep.pairs_checked > 0);
        // Scalars: (1 - r|t1|²)² |t2|^{2β} decreases in r and β.
        let s = gen::scalars(&[c64(0.5, 0.0), c64(0.7, 0.0)]).unwrap();
        let v = appendix_value(&s, &ww, &[0], &[0.5], &[2], 16).unwrap();
        assert!((v[(0, 0)].re - (1.0f64 - 0.125).powi(2) * 0.49f64.powi(2)).abs() < 1e-15);
        assert!(
            appendix_monotonicity_check(&s, &ww, &[0], &r, &b, 16, 1e-10)
                .unwrap()
                .ok
        );
    }

    #[test]
    fn telescoping_identity() {
        // D_{W',T_Λ}(r') = Σ_{k≤K} r^k T_2^k D_{W'',T}(r) T_2^{*k} + remainder
        // with W'' = (ω_1, 𝟙); the remainder is bounded by ‖T_2‖^{2(K+1)}‖D‖.
        let t = gen::polynomial_pair(8, 3, 0.3, 0.5);
        let ww = w("bergman:2,hardy");
        let r = [0.7, 1.0];
        let full = defect_series(&t, &ww, &r, 64).unwrap();
        let sub = defect_series(&subtuple(&t, &[0]).unwrap(), &w("bergman:2"), &[0.7], 64).unwrap();
        let k_max = 20;
        let mut acc = zeros(3, 3);
        for k in 0..=k_max {
            let p = power(&t.ops()[1], k);
            acc += &p * &full * p.adjoint();
        }
        let bound = op_norm(&t.ops()[1]).powi(2 * (k_max as i32 + 1)) * op_norm(&sub)
            / (1.0 - op_norm(&t.ops()[1]).powi(2));
        assert!(dist(&acc, &sub) <= bound + 1e-12);
    }

    fn nilpotent_seed() -> impl Strategy<Value = u64> {
        any::<u64>()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn loewner_monotone_in_r(seed in nilpotent_seed(), d in 2usize..6) {
            let t = gen::nilpotent_tuple(seed, d, 2);
            let ww = w("bergman:2,bergman:1.5");
            let pts = product_grid(&[vec![0.2, 0.6, 0.95], vec![0.3, 0.8, 1.0]]);
            let rep = loewner_monotonicity_check(&t, &ww, &pts, 16, 1e-10).unwrap();
            prop_assert!(rep.ok);
        }

        #[test]
        fn integer_delta_matches_binomial_sum(seed in nilpotent_seed(), b1 in 0u32..4, b2 in 0u32..4) {
            let t = gen::nilpotent_tuple(seed, 4, 2);
            let v = delta_power(&t, &[b1 as f64, b2 as f64], &identity(4), 200, 1e-9).unwrap().value;
            // Exponent zero has coefficient list [1, 0, ...].
            let coeffs: Vec<Vec<f64>> = [b1, b2].iter().map(|&b| {
                let mut c = vec![0.0; 8];
                let mut binom = 1.0;
                for (k, ck) in c.iter_mut().enumerate().take(b as usize + 1) {
                    *ck = if k % 2 == 0 { binom } else { -binom };
                    binom = binom * (b as f64 - k as f64) / (k as f64 + 1.0);
                }
                c
            }).collect();
            let oracle = hereditary_product(&t, &coeffs, &[1.0, 1.0], &identity(4));
            prop_assert!(dist(&v, &oracle) < 1e-10);
        }

        #[test]
        fn coisometry_defect_is_scalar(seed in any::<u64>(), r1 in 0.05f64..0.95, r2 in 0.05f64..0.95) {
            let t = gen::commuting_unitaries(seed, 3, 2);
            let ww = w("bergman:1.5,bergman:3");
            for (mask, wp) in ww.family() {
                let d = defect_series(&t, &wp, &[r1, r2], 1024).unwrap();
                let k = wp.inverse_kernel_at(&[r1, r2]).unwrap();
                prop_assert!(dist(&d, &(identity(3) * c64(k, 0.0))) < 1e-10, "mask {}", mask);
            }
        }

        #[test]
        fn family_size(n in 1usize..4) {
            let ww = MultiWeightSpec::uniform(WeightSpec::Bergman(2.0), n);
            let fam = ww.family();
            prop_assert_eq!(fam.len(), 1 << n);
            prop_assert!(fam.iter().any(|(_, x)| *x == ww));
            prop_assert!(fam.iter().any(|(_, x)| *x == MultiWeightSpec::uniform(WeightSpec::Hardy, n)));
        }
    }
}
