//! Characteristic triples and characteristic functions of pure one-variable
//! hypercontractions.
//!
//! C_{ω,T} is stored as N stacked slots √ρ_n D T^{*n}, where D is the minimal
//! factor of D_{ω,T}(1) and ρ_n = 1/ω_n - 1/ω_{n-1}. X = [T*; C] is an
//! isometry once T^N vanishes, and any completion Y = [B; D_0; …; D_{N-1}]
//! gives a triple.

use serde::Serialize;

use crate::bergman::{multiplier_matrix, OperatorSeries, TruncatedSpace};
use crate::dilation::split;
use crate::error::{Error, Result};
use crate::gen::Lcg;
use crate::hyper::{tail_square, MAX_SQUARINGS};
use crate::linalg::{
    complete_to_unitary, complete_with, dist, hstack, identity, op_norm, pinv, power, serialize_op,
    serialize_ops, unitary_residual, vstack, zeros,
};
use crate::series::{MultiWeightSpec, WeightSpec};
use crate::{c64, Complex, Operator, LIMIT_TOL};

/// ρ_0 = 1, ρ_n = 1/ω_n - 1/ω_{n-1}.
pub fn rho_sequence(w: &WeightSpec, n: usize) -> Result<Vec<f64>> {
    let r = w.reciprocals(n)?;
    Ok((0..n)
        .map(|k| if k == 0 { 1.0 } else { r[k] - r[k - 1] })
        .collect())
}

/// Slots √ρ_n D T^{*n}, n < N, stacked into one (N·e)×d matrix, together with
/// the defect factor D.
fn slots(t: &Operator, w: &WeightSpec, n: usize) -> Result<(Operator, Operator)> {
    let tail = tail_square(t, LIMIT_TOL * 1e-2, MAX_SQUARINGS);
    let tail_norm = op_norm(&tail.limit);
    if tail_norm > LIMIT_TOL {
        return Err(Error::NotPure { tail_norm });
    }
    let p = power(t, n);
    let leftover = op_norm(&p).powi(2);
    if leftover > LIMIT_TOL {
        return Err(Error::HorizonTooShort {
            horizon: n,
            leftover,
        });
    }
    let s = split(t, w)?;
    let rho = rho_sequence(w, n)?;
    let mut blocks = Vec::with_capacity(n);
    let mut x = s.dm.clone();
    for r in rho {
        blocks.push(&x * c64(r.sqrt(), 0.0));
        x = &x * t.adjoint();
    }
    Ok((vstack(&blocks, t.ncols()), s.dm))
}

/// C_{ω,T} truncated to N slots.
pub fn contraction_c(t: &Operator, w: &WeightSpec, n: usize) -> Result<Operator> {
    Ok(slots(t, w, n)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CharTriple {
    pub e_dim: usize,
    #[serde(serialize_with = "serialize_op")]
    pub b: Operator,
    #[serde(serialize_with = "serialize_ops")]
    pub d_blocks: Vec<Operator>,
}

impl CharTriple {
    fn from_completion(y: &Operator, d: usize, e: usize, n: usize) -> Self {
        let b = y.rows(0, d).into_owned();
        let d_blocks = (0..n).map(|k| y.rows(d + k * e, e).into_owned()).collect();
        CharTriple {
            e_dim: y.ncols(),
            b,
            d_blocks,
        }
    }

    /// Y = [B; D_0; …; D_{N-1}].
    pub fn stacked(&self) -> Operator {
        let mut parts = vec![self.b.clone()];
        parts.extend(self.d_blocks.iter().cloned());
        vstack(&parts, self.e_dim)
    }
}

/// Everything needed to evaluate θ_T.
#[derive(Debug, Clone, Serialize)]
pub struct CharFunction {
    pub triple: CharTriple,
    pub weight: WeightSpec,
    #[serde(serialize_with = "serialize_op")]
    pub t: Operator,
    pub horizon: usize,
    /// Minimal factor of D_{ω,T}(1); its rows index the defect space.
    #[serde(serialize_with = "serialize_op")]
    pub defect: Operator,
    #[serde(serialize_with = "serialize_op")]
    pub c: Operator,
}

impl CharFunction {
    pub fn new(t: &Operator, w: &WeightSpec, n: usize, tol: f64) -> Result<Self> {
        let (c, defect) = slots(t, w, n)?;
        let x = vstack(&[t.adjoint(), c.clone()], t.ncols());
        let (_, y) = complete_to_unitary(&x, tol)?;
        let triple = CharTriple::from_completion(&y, t.nrows(), defect.nrows(), n);
        Ok(CharFunction {
            triple,
            weight: w.clone(),
            t: t.clone(),
            horizon: n,
            defect,
            c,
        })
    }

    pub fn defect_dim(&self) -> usize {
        self.defect.nrows()
    }

    /// X = [T*; C].
    pub fn x(&self) -> Operator {
        vstack(&[self.t.adjoint(), self.c.clone()], self.t.ncols())
    }

    /// Same data with the triple replaced.
    pub fn with_triple(&self, triple: CharTriple) -> Self {
        CharFunction {
            triple,
            ..self.clone()
        }
    }

    /// Taylor coefficients Θ_0..Θ_N: Θ_0 = D_0 and
    /// Θ_k = √ρ_k D_k + D (1/ω_{k-1}) T^{*(k-1)} B.
    pub fn coefficients(&self) -> Result<Vec<Operator>> {
        let n = self.horizon;
        let rho = rho_sequence(&self.weight, n)?;
        let recip = self.weight.reciprocals(n)?;
        let (e, m) = (self.defect_dim(), self.triple.e_dim);
        let mut out = Vec::with_capacity(n + 1);
        let mut tb = self.triple.b.clone();
        for k in 0..=n {
            let mut th = if k < n {
                &self.triple.d_blocks[k] * c64(rho[k].sqrt(), 0.0)
            } else {
                zeros(e, m)
            };
            if k >= 1 {
                th += &self.defect * &tb * c64(recip[k - 1], 0.0);
                tb = self.t.adjoint() * tb;
            }
            out.push(th);
        }
        Ok(out)
    }

    pub fn series(&self) -> Result<OperatorSeries> {
        Ok(OperatorSeries::one_var(self.coefficients()?))
    }
}

pub fn build_char_triple(t: &Operator, w: &WeightSpec, n: usize, tol: f64) -> Result<CharTriple> {
    Ok(CharFunction::new(t, w, n, tol)?.triple)
}

/// A second completion from projected Gaussian columns.
pub fn alternative_triple(cf: &CharFunction, seed: u64) -> Result<CharTriple> {
    let x = cf.x();
    let g = Lcg::new(seed).gaussian_matrix(x.nrows(), x.nrows());
    let y = complete_with(&x, &g)?;
    Ok(CharTriple::from_completion(
        &y,
        cf.t.nrows(),
        cf.defect_dim(),
        cf.horizon,
    ))
}

/// max of ‖UU* - I‖ and ‖U*U - I‖ for U = [[T*, B], [C, D]].
pub fn block_unitarity(cf: &CharFunction) -> f64 {
    let x = cf.x();
    let u = hstack(&[x.clone(), cf.triple.stacked()], x.nrows());
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    unitary_residual(&u)
}

/// ‖(I - C*C) - TT*‖.
pub fn defect_identity_residual(cf: &CharFunction) -> f64 {
    let d = cf.t.nrows();
    dist(
        &(identity(d) - cf.c.adjoint() * &cf.c),
        &(&cf.t * cf.t.adjoint()),
    )
}

/// max over the standard basis of |‖h‖² - Σ ‖D T^{*n}h‖²/ω_n|.
pub fn purity_identity_residual(cf: &CharFunction) -> Result<f64> {
    let recip = cf.weight.reciprocals(cf.horizon)?;
    let d = cf.t.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        let mut h = zeros(d, 1);
        h[(j, 0)] = c64(1.0, 0.0);
        let mut s = 0.0;
        for r in &recip {
            s += r * (&cf.defect * &h).norm_squared();
            h = cf.t.adjoint() * h;
        }
        worst = worst.max((1.0 - s).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct TripleRelation {
    #[serde(serialize_with = "serialize_op")]
    pub unitary: Operator,
    pub unitary_residual: f64,
    /// max of ‖B_2 - B_1 U‖ and ‖D_2 - D_1 U‖.
    pub reconstruction_residual: f64,
}

/// Solves for U with B_2 = B_1 U and D_2 = D_1 U; U = Y_1* Y_2.
pub fn triple_unitary(t1: &CharTriple, t2: &CharTriple) -> Result<TripleRelation> {
    let (y1, y2) = (t1.stacked(), t2.stacked());
    if y1.nrows() != y2.nrows() {
        return Err(Error::Shape(format!(
            "completions have {} and {} rows",
            y1.nrows(),
            y2.nrows()
        )));
    }
    let u = y1.adjoint() * &y2;
    let unitary_residual = unitary_residual(&u);
    let reconstruction_residual = dist(&(&y1 * &u), &y2);
    Ok(TripleRelation {
        unitary: u,
        unitary_residual,
        reconstruction_residual,
    })
}

/// θ_T(z) = Σ √ρ_n D_n z^n + z D Σ (1/ω_n) z^n T^{*n} B.
pub fn char_function_eval(cf: &CharFunction, z: Complex<f64>) -> Result<Operator> {
    let n = cf.horizon;
    let rho = rho_sequence(&cf.weight, n)?;
    let recip = cf.weight.reciprocals(n)?;
    let mut first = zeros(cf.defect_dim(), cf.triple.e_dim);
    let mut zk = c64(1.0, 0.0);
    for (dk, r) in cf.triple.d_blocks.iter().zip(&rho) {
        first += dk * (zk * r.sqrt());
        zk *= z;
    }
    let d = cf.t.nrows();
    let mut k = zeros(d, d);
    let mut p = identity(d);
    let mut zk = c64(1.0, 0.0);
    for r in &recip {
        k += &p * (zk * *r);
        p = &p * cf.t.adjoint();
        zk *= z;
    }
    Ok(first + &cf.defect * k * &cf.triple.b * z)
}

/// K(z, A) = Σ_{n<N} (1/ω_n) z^n A^n.
fn kernel_of(a: &Operator, z: Complex<f64>, recip: &[f64]) -> Operator {
    let d = a.nrows();
    let mut out = zeros(d, d);
    let mut p = identity(d);
    let mut zk = c64(1.0, 0.0);
    for r in recip {
        out += &p * (zk * *r);
        p = &p * a;
        zk *= z;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyIdentityResidual {
    /// With the scalar Σ_{n<N} x^n/ω_n + x^N/(ω_{N-1}(1-x)) that the
    /// truncated θ satisfies exactly.
    pub truncated: f64,
    /// With the full kernel K_ω(η, ζ), when it has a closed form.
    pub full: Option<f64>,
}

/// Residual of K(η,ζ)I - θ(η)θ(ζ)*/(1 - ηζ̄) = D K(η,T*) K(ζ̄,T) D*.
pub fn key_identity_check(
    cf: &CharFunction,
    zeta: Complex<f64>,
    eta: Complex<f64>,
) -> Result<KeyIdentityResidual> {
    if zeta.norm() >= 1.0 || eta.norm() >= 1.0 {
        return Err(Error::OutsideDisc);
    }
    let n = cf.horizon;
    let recip = cf.weight.reciprocals(n)?;
    let x = eta * zeta.conj();
    let one = c64(1.0, 0.0);
    let mut kn = c64(0.0, 0.0);
    let mut xk = one;
    for r in &recip {
        kn += xk * *r;
        xk *= x;
    }
    let corrected = kn + xk * recip[n - 1] / (one - x);
    let te = char_function_eval(cf, eta)?;
    let tz = char_function_eval(cf, zeta)?;
    let prod = &te * tz.adjoint() / (one - x);
    let rhs = &cf.defect
        * kernel_of(&cf.t.adjoint(), eta, &recip)
        * kernel_of(&cf.t, zeta.conj(), &recip)
        * cf.defect.adjoint();
    let e = cf.defect_dim();
    let truncated = dist(&(identity(e) * corrected - &prod), &rhs);
    let full = cf.weight.beta().map(|beta| {
        let k = (one - x).powf(-beta);
        dist(&(identity(e) * k - &prod), &rhs)
    });
    Ok(KeyIdentityResidual { truncated, full })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialIsometryReport {
    /// ‖ππ* + M_θM_θ* - I‖ on degrees below the horizon.
    pub residual: f64,
    /// ‖π* M_θ‖.
    pub cross_gram: f64,
    pub interior_degrees: usize,
    pub target_degrees: usize,
}

/// π_{ω,T}π_{ω,T}* + M_θ M_θ* = I on truncated A²_ω(D), with M_θ from
/// truncated H²(E). Rows of degree ≥ N are where truncation bites and are
/// left out.
pub fn partial_isometry_check(cf: &CharFunction) -> Result<PartialIsometryReport> {
    let n = cf.horizon;
    let m = n + 1;
    let (e, ed) = (cf.triple.e_dim, cf.defect_dim());
    let target = TruncatedSpace::new(MultiWeightSpec(vec![cf.weight.clone()]), vec![m], ed)?;
    let source = TruncatedSpace::new(MultiWeightSpec(vec![WeightSpec::Hardy]), vec![m], e)?;
    let mt = multiplier_matrix(&cf.series()?, &source, &target)?.matrix;
    let weights = cf.weight.weight_values(m)?;
    let pi = crate::dilation::one_var::bergman_rows(&cf.t, &cf.defect, &weights);
    let total = &pi * pi.adjoint() + &mt * mt.adjoint();
    let k = n * ed;
    let inner = total.view((0, 0), (k, k)).into_owned();
    Ok(PartialIsometryReport {
        residual: dist(&inner, &identity(k)),
        cross_gram: op_norm(&(pi.adjoint() * &mt)),
        interior_degrees: n,
        target_degrees: m,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Coincidence {
    #[serde(serialize_with = "serialize_op")]
    pub tau: Operator,
    #[serde(serialize_with = "serialize_op")]
    pub tau_star: Operator,
}

/// For T_2 = U T_1 U*: τ_* = D_2 U D_1⁺ carries the defect spaces, and τ
/// relates the two completions once the first is moved by diag(U, τ_*).
pub fn derive_coincidence(
    cf1: &CharFunction,
    cf2: &CharFunction,
    u: &Operator,
) -> Result<Coincidence> {
    let tau_star = &cf2.defect * u * pinv(&cf1.defect);
    let mut tau = (u * &cf1.triple.b).adjoint() * &cf2.triple.b;
    for (d1, d2) in cf1.triple.d_blocks.iter().zip(&cf2.triple.d_blocks) {
        tau += (&tau_star * d1).adjoint() * d2;
    }
    Ok(Coincidence { tau, tau_star })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoincidenceReport {
    pub verdict: bool,
    pub max_residual: f64,
    pub tau_residual: f64,
    pub tau_star_residual: f64,
}

/// max over the grid of ‖θ_2(z) - τ_* θ_1(z) τ‖.
pub fn coincidence_verify(
    cf1: &CharFunction,
    cf2: &CharFunction,
    tau: &Operator,
    tau_star: &Operator,
    z_grid: &[Complex<f64>],
    tol: f64,
) -> Result<CoincidenceReport> {
    let tau_residual = if tau.is_square() {
        unitary_residual(tau)
    } else {
        f64::INFINITY
    };
    let tau_star_residual = if tau_star.is_square() {
        unitary_residual(tau_star)
    } else {
        f64::INFINITY
    };
    let worst = tau_residual.max(tau_star_residual);
    if worst > tol {
        return Err(Error::NotUnitaryInput { residual: worst });
    }
    let mut max_residual = 0.0f64;
    for &z in z_grid {
        let a = char_function_eval(cf2, z)?;
        let b = tau_star * char_function_eval(cf1, z)? * tau;
        max_residual = max_residual.max(dist(&a, &b));
    }
    Ok(CoincidenceReport {
        verdict: max_residual <= tol,
        max_residual,
        tau_residual,
        tau_star_residual,
    })
}

/// Square grid of k×k points whose corners have modulus `radius`.
pub fn z_grid(k: usize, radius: f64) -> Vec<Complex<f64>> {
    let h = radius / std::f64::consts::SQRT_2;
    let step = |i: usize| {
        if k == 1 {
            0.0
        } else {
            -h + 2.0 * h * i as f64 / (k - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            out.push(c64(step(i), step(j)));
        }
    }
    out
}
