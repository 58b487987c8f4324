//! Truncated vector-valued weighted Bergman spaces over the polydisc.
//!
//! Vectors are stored in the orthonormal basis e_α ⊗ f_p with
//! e_α = z^α / ‖z^α‖, so adjoints are plain conjugate transposes. Multi-indices
//! run in row-major order (first variable most significant) and the
//! coefficient index varies fastest, which is the Kronecker order.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::{self, OperatorTuple};
use crate::linalg::{identity, kron, psd_check, zeros};
use crate::series::{flat_index, multi_index, quotient_coeffs, MultiWeightSpec, TruncatedSeries};
use crate::{c64, Operator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceText", into = "SpaceText")]
pub struct TruncatedSpace {
    weights: MultiWeightSpec,
    degrees: Vec<usize>,
    coeff_dim: usize,
    /// ω^{(i)}_0..ω^{(i)}_{N_i - 1} per variable.
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SpaceText {
    weights: MultiWeightSpec,
    degrees: Vec<usize>,
    coeff_dim: usize,
}

impl TryFrom<SpaceText> for TruncatedSpace {
    type Error = Error;

    fn try_from(t: SpaceText) -> Result<Self> {
        TruncatedSpace::new(t.weights, t.degrees, t.coeff_dim)
    }
}

impl From<TruncatedSpace> for SpaceText {
    fn from(s: TruncatedSpace) -> Self {
        SpaceText {
            weights: s.weights,
            degrees: s.degrees,
            coeff_dim: s.coeff_dim,
        }
    }
}

impl TruncatedSpace {
    pub fn new(weights: MultiWeightSpec, degrees: Vec<usize>, coeff_dim: usize) -> Result<Self> {
        if degrees.len() != weights.n() {
            return Err(Error::ArityMismatch {
                expected: weights.n(),
                got: degrees.len(),
            });
        }
        if degrees.contains(&0) {
            return Err(Error::Shape("degrees must be positive".into()));
        }
        let values = weights
            .weights()
            .iter()
            .zip(&degrees)
            .map(|(w, &n)| w.weight_values(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(TruncatedSpace {
            weights,
            degrees,
            coeff_dim,
            values,
        })
    }

    pub fn weights(&self) -> &MultiWeightSpec {
        &self.weights
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn coeff_dim(&self) -> usize {
        self.coeff_dim
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Number of multi-indices.
    pub fn monomials(&self) -> usize {
        self.degrees.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.monomials() * self.coeff_dim
    }

    pub fn index(&self, alpha: &[usize], p: usize) -> usize {
        flat_index(&self.degrees, alpha) * self.coeff_dim + p
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(&self.degrees, flat)
    }

    /// ‖z^α‖² = ω^{(1)}_{α_1}···ω^{(n)}_{α_n}.
    pub fn weight(&self, alpha: &[usize]) -> f64 {
        alpha.iter().zip(&self.values).map(|(&a, v)| v[a]).product()
    }

    /// Same space with another coefficient dimension.
    pub fn with_coeff_dim(&self, coeff_dim: usize) -> TruncatedSpace {
        TruncatedSpace {
            coeff_dim,
            ..self.clone()
        }
    }

    /// Diagonal Gram matrix of the monomial basis z^α f_p.
    pub fn monomial_gram(&self) -> Operator {
        let mut g = zeros(self.dim(), self.dim());
        for a in 0..self.monomials() {
            let w = self.weight(&self.multi_index(a));
            for p in 0..self.coeff_dim {
                let i = a * self.coeff_dim + p;
                g[(i, i)] = c64(w, 0.0);
            }
        }
        g
    }

    /// Change of basis from monomial to orthonormal coordinates.
    pub fn to_orthonormal(&self) -> Operator {
        let mut g = self.monomial_gram();
        for i in 0..g.nrows() {
            g[(i, i)] = c64(g[(i, i)].re.sqrt(), 0.0);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    #[serde(serialize_with = "crate::linalg::serialize_complex")]
    pub truncated: Complex<f64>,
    /// Closed form ∏(1 - z_i w̄_i)^{-β_i} for preset weights.
    #[serde(serialize_with = "crate::linalg::serialize_opt_complex")]
    pub closed_form: Option<Complex<f64>>,
    /// Bound on the mass beyond the cutoff, when the closed form exists.
    pub tail_bound: Option<f64>,
    /// Whether the two agree within the tail bound.
    pub consistent: bool,
}

/// K_W(z, w) = Σ_α (z w̄)^α / ω_α, truncated at the given degrees.
pub fn kernel_eval(
    w: &MultiWeightSpec,
    z: &[Complex<f64>],
    wv: &[Complex<f64>],
    degrees: &[usize],
) -> Result<KernelValue> {
    if z.len() != w.n() || wv.len() != w.n() || degrees.len() != w.n() {
        return Err(Error::ArityMismatch {
            expected: w.n(),
            got: z.len(),
        });
    }
    if z.iter().chain(wv).any(|x| x.norm() >= 1.0) {
        return Err(Error::OutsideDisc);
    }
    let mut truncated = c64(1.0, 0.0);
    let mut closed = Some(c64(1.0, 0.0));
    let mut full_abs = 1.0;
    let mut trunc_abs = 1.0;
    for i in 0..w.n() {
        let x = z[i] * wv[i].conj();
        let recip = w.weights()[i].reciprocals(degrees[i])?;
        let mut s = c64(0.0, 0.0);
        let mut xp = c64(1.0, 0.0);
        let mut sa = 0.0;
        for r in &recip {
            s += xp * r;
            sa += xp.norm() * r;
            xp *= x;
        }
        truncated *= s;
        trunc_abs *= sa;
        closed = match (closed, w.weights()[i].beta()) {
            (Some(c), Some(b)) => {
                full_abs *= (1.0 - x.norm()).powf(-b);
                Some(c * (-(c64(1.0, 0.0) - x).ln() * b).exp())
            }
            _ => None,
        };
    }
    let tail_bound = closed.map(|_| full_abs - trunc_abs);
    let consistent = match (closed, tail_bound) {
        (Some(c), Some(t)) => (c - truncated).norm() <= t + 1e-12 * full_abs,
        _ => true,
    };
    Ok(KernelValue {
        truncated,
        closed_form: closed,
        tail_bound,
        consistent,
    })
}

/// Multiplication by z_i in orthonormal coordinates. Top-degree monomials
/// in variable i are sent to zero.
pub fn shift_matrix(space: &TruncatedSpace, i: usize) -> Result<Operator> {
    if i >= space.n() {
        return Err(Error::Shape(format!(
            "variable {i} out of range for {} variables",
            space.n()
        )));
    }
    let mut m = zeros(space.dim(), space.dim());
    let v = &space.values[i];
    for a in 0..space.monomials() {
        let alpha = space.multi_index(a);
        if alpha[i] + 1 >= space.degrees[i] {
            continue;
        }
        let mut beta = alpha.clone();
        beta[i] += 1;
        let ratio = (v[alpha[i] + 1] / v[alpha[i]]).sqrt();
        for p in 0..space.coeff_dim {
            m[(space.index(&beta, p), space.index(&alpha, p))] = c64(ratio, 0.0);
        }
    }
    Ok(m)
}

/// Multiplication by z_i in the monomial basis z^α f_p.
pub fn shift_matrix_monomial(space: &TruncatedSpace, i: usize) -> Result<Operator> {
    let t = space.to_orthonormal();
    let tinv = t.map(|x| if x.re == 0.0 { x } else { c64(1.0 / x.re, 0.0) });
    Ok(&tinv * shift_matrix(space, i)? * &t)
}

/// Adjoint of M_{z_i} for the weighted inner product, in the monomial
/// basis: z^{α+e_i} ↦ (ω_{α+e_i}/ω_α) z^α.
pub fn shift_adjoint_monomial(space: &TruncatedSpace, i: usize) -> Result<Operator> {
    let g = space.monomial_gram();
    let ginv = g.map(|x| if x.re == 0.0 { x } else { c64(1.0 / x.re, 0.0) });
    Ok(&ginv * shift_matrix_monomial(space, i)?.adjoint() * &g)
}

/// Operator-valued polynomial θ(z) = Σ_κ Θ_κ z^κ, stored row-major over κ.
#[derive(Debug, Clone)]
pub struct OperatorSeries {
    pub degrees: Vec<usize>,
    pub coeffs: Vec<Operator>,
}

impl OperatorSeries {
    pub fn one_var(coeffs: Vec<Operator>) -> Self {
        OperatorSeries {
            degrees: vec![coeffs.len()],
            coeffs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiplierMatrix {
    pub matrix: Operator,
    /// Whether some product landed beyond the target cutoff and was dropped.
    pub truncated: bool,
}

/// Matrix of f ↦ θ f from `source` to `target`, orthonormal coordinates.
/// Block (α+κ, α) is √(ω^t_{α+κ}/ω^s_α)·Θ_κ.
pub fn multiplier_matrix(
    theta: &OperatorSeries,
    source: &TruncatedSpace,
    target: &TruncatedSpace,
) -> Result<MultiplierMatrix> {
    let n = target.n();
    if source.n() != n || theta.degrees.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: source.n(),
        });
    }
    for (i, (&d, &cut)) in theta.degrees.iter().zip(&target.degrees).enumerate() {
        let nonzero_top = (0..theta.coeffs.len())
            .filter(|&k| theta.coeffs[k].iter().any(|x| x.norm() > 0.0))
            .map(|k| multi_index(&theta.degrees, k)[i])
            .max()
            .unwrap_or(0);
        if d > cut && nonzero_top >= cut {
            return Err(Error::DegreeOverflow {
                degree: nonzero_top,
                cutoff: cut,
            });
        }
    }
    let (e, f) = (source.coeff_dim, target.coeff_dim);
    for th in &theta.coeffs {
        if th.shape() != (f, e) {
            return Err(Error::Shape(format!(
                "multiplier coefficient is {:?}, expected ({f}, {e})",
                th.shape()
            )));
        }
    }
    let mut m = zeros(target.dim(), source.dim());
    let mut truncated = false;
    for a in 0..source.monomials() {
        let alpha = source.multi_index(a);
        for (k, th) in theta.coeffs.iter().enumerate() {
            let kappa = multi_index(&theta.degrees, k);
            let gamma: Vec<usize> = alpha.iter().zip(&kappa).map(|(x, y)| x + y).collect();
            if gamma.iter().zip(&target.degrees).any(|(g, d)| g >= d) {
                if th.iter().any(|x| x.norm() > 0.0) {
                    truncated = true;
                }
                continue;
            }
            let scale = (target.weight(&gamma) / source.weight(&alpha)).sqrt();
            let (r0, c0) = (target.index(&gamma, 0), source.index(&alpha, 0));
            let mut view = m.view_mut((r0, c0), (f, e));
            view += th * c64(scale, 0.0);
        }
    }
    Ok(MultiplierMatrix {
        matrix: m,
        truncated,
    })
}

/// The multishift tuple on a truncated space.
pub fn multishift(space: &TruncatedSpace) -> Result<OperatorTuple> {
    let ops = (0..space.n())
        .map(|i| shift_matrix(space, i))
        .collect::<Result<Vec<_>>>()?;
    OperatorTuple::new(ops, crate::COMMUTATION_TOL)
}

#[derive(Debug, Clone, Serialize)]
pub struct MultishiftReport {
    pub pure: bool,
    pub hypercontractive: bool,
    /// max over grid and α of |⟨D z^α, z^α⟩ - ω_α² a_α(e, r)|
    pub diagonal_error: f64,
    /// Largest off-diagonal entry of D_{W,M_z}(r).
    pub off_diagonal: f64,
    pub min_eigenvalue: f64,
    pub verdict: bool,
}

/// ⟨D_{W,M_z}(r) z^α, z^α⟩ against ω_α² a_α(e, r), plus positivity over
/// S(W) and purity.
pub fn multishift_purity_and_positivity(
    space: &TruncatedSpace,
    r_grid: &[Vec<f64>],
    tol: f64,
) -> Result<MultishiftReport> {
    let scalar = space.with_coeff_dim(1);
    let t = multishift(&scalar)?;
    let terms = *space.degrees.iter().max().unwrap_or(&1);
    let w = &space.weights;
    let mut diagonal_error: f64 = 0.0;
    let mut off_diagonal: f64 = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    for r in r_grid {
        let d = hyper::defect_series(&t, w, r, terms)?;
        min_eigenvalue = min_eigenvalue.min(psd_check(&d, tol)?.min_eigenvalue);
        let a = w
            .weights()
            .iter()
            .zip(r)
            .zip(&space.degrees)
            .map(|((wi, &ri), &n)| quotient_coeffs(wi, 1.0, ri, n))
            .collect::<Result<Vec<_>>>()?;
        let a = TruncatedSeries::separable(&a)?;
        for i in 0..d.nrows() {
            let alpha = scalar.multi_index(i);
            let om = scalar.weight(&alpha);
            let expect = om * om * a.coeffs[i];
            diagonal_error = diagonal_error.max((om * d[(i, i)].re - expect).abs());
            for j in 0..d.ncols() {
                if i != j {
                    off_diagonal = off_diagonal.max(d[(i, j)].norm());
                }
            }
        }
    }
    let hyperrep = hyper::is_w_hypercontraction(&t, w, r_grid, terms, tol)?;
    let pure = hyper::is_pure(&t, tol, hyper::MAX_SQUARINGS);
    let verdict = pure && hyperrep.verdict && diagonal_error <= tol && off_diagonal <= tol;
    Ok(MultishiftReport {
        pure,
        hypercontractive: hyperrep.verdict,
        diagonal_error,
        off_diagonal,
        min_eigenvalue: if r_grid.is_empty() {
            0.0
        } else {
            min_eigenvalue
        },
        verdict,
    })
}

/// Kernel column K_W(·, w) ⊗ e in orthonormal coordinates.
pub fn kernel_vector(space: &TruncatedSpace, w: &[Complex<f64>], e: &[Complex<f64>]) -> Operator {
    let mut v = zeros(space.dim(), 1);
    for a in 0..space.monomials() {
        let alpha = space.multi_index(a);
        let mut wa = c64(1.0, 0.0);
        for (x, &k) in w.iter().zip(&alpha) {
            wa *= x.conj().powu(k as u32);
        }
        // K(·, w) = Σ w̄^α z^α / ω_α, and z^α = √ω_α e_α.
        let coef = wa / space.weight(&alpha).sqrt();
        for (p, ep) in e.iter().enumerate() {
            v[(space.index(&alpha, p), 0)] = coef * ep;
        }
    }
    v
}

/// Identity on the coefficient space tensored with the monomial part.
pub fn coefficient_lift(space: &TruncatedSpace, v: &Operator) -> Operator {
    kron(&identity(space.monomials()), v)
}
