//! Weight sequences and truncated power series in one or several variables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign tolerance for coefficient tests.
pub const COEFF_TOL: f64 = 1e-10;

/// A single weight sequence ω with ω_0 = 1.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// The constant sequence 1 (Hardy space).
    Hardy,
    /// ω_k = 1 / C(β+k-1, k).
    Bergman(f64),
    /// User supplied values, checked for positivity and monotonicity.
    Explicit(Vec<f64>),
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Hardy => Ok(()),
            WeightSpec::Bergman(beta) => {
                if beta.is_finite() && *beta >= 1.0 {
                    Ok(())
                } else {
                    Err(Error::BadBeta(*beta))
                }
            }
            WeightSpec::Explicit(v) => check_explicit(v),
        }
    }

    /// Integer exponent when the preset is an integer Bergman weight.
    pub fn integer_beta(&self) -> Option<u32> {
        match self {
            WeightSpec::Hardy => Some(1),
            WeightSpec::Bergman(b) if b.fract() == 0.0 && *b <= 64.0 => Some(*b as u32),
            _ => None,
        }
    }

    /// The exponent β for Hardy and Bergman presets.
    pub fn beta(&self) -> Option<f64> {
        match self {
            WeightSpec::Hardy => Some(1.0),
            WeightSpec::Bergman(b) => Some(*b),
            WeightSpec::Explicit(_) => None,
        }
    }

    /// ω_0..ω_{n-1}.
    pub fn weight_values(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            WeightSpec::Hardy => Ok(vec![1.0; n]),
            WeightSpec::Bergman(beta) => Ok(bergman_binomials(*beta, n)
                .iter()
                .map(|b| 1.0 / b)
                .collect()),
            WeightSpec::Explicit(v) => {
                if v.len() < n {
                    return Err(Error::BadWeights(format!(
                        "explicit list has {} entries, {} requested",
                        v.len(),
                        n
                    )));
                }
                Ok(v[..n].to_vec())
            }
        }
    }

    /// 1/ω_0..1/ω_{n-1}, the Taylor coefficients of k_ω.
    ///
    /// For Bergman presets these are the binomials themselves, so integer
    /// exponents give exact integers.
    pub fn reciprocals(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            WeightSpec::Hardy => Ok(vec![1.0; n]),
            WeightSpec::Bergman(beta) => Ok(bergman_binomials(*beta, n)),
            WeightSpec::Explicit(_) => Ok(self.weight_values(n)?.iter().map(|w| 1.0 / w).collect()),
        }
    }

    /// Taylor coefficients c_0..c_{n-1} of 1/k_ω.
    ///
    /// Bergman presets give (1-z)^β: integer exponents are exact alternating
    /// binomials, fractional ones follow c_{k+1} = c_k (k-β)/(k+1). Explicit
    /// weights go through series division.
    pub fn inverse_coeffs(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(m) = self.integer_beta() {
            let mut c = vec![0.0; n];
            let mut binom = 1.0;
            for (k, slot) in c.iter_mut().enumerate().take(m as usize + 1) {
                *slot = if k % 2 == 0 { binom } else { -binom };
                binom = binom * (m as f64 - k as f64) / (k as f64 + 1.0);
            }
            return Ok(c);
        }
        if let Some(beta) = self.beta() {
            let mut c = Vec::with_capacity(n);
            let mut ck = 1.0;
            for k in 0..n {
                c.push(ck);
                ck = ck * (k as f64 - beta) / (k as f64 + 1.0);
            }
            return Ok(c);
        }
        let s = TruncatedSeries::from_coeffs(vec![n], self.reciprocals(n)?)?;
        Ok(s.invert()?.coeffs)
    }

    /// Σ |c_k| over k < n together with an estimate of the remaining mass.
    ///
    /// For integer exponents the tail is exactly zero. For fractional
    /// exponents c_k has constant sign past a small index and Σ c_k = 0, so
    /// the tail is |Σ_{k<n} c_k|. Explicit weights fall back to the same
    /// estimate, which assumes k_ω(1) diverges.
    pub fn inverse_abs_sum(&self, n: usize) -> Result<(f64, f64)> {
        let c = self.inverse_coeffs(n)?;
        let abs: f64 = c.iter().map(|x| x.abs()).sum();
        if self.integer_beta().is_some_and(|m| (m as usize) < n) {
            return Ok((abs, 0.0));
        }
        Ok((abs, c.iter().sum::<f64>().abs()))
    }
}

fn check_explicit(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::BadWeights("empty list".into()));
    }
    if (v[0] - 1.0).abs() > 1e-14 {
        return Err(Error::BadWeights(format!(
            "first weight must be 1, got {}",
            v[0]
        )));
    }
    for (k, w) in v.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::BadWeights(format!(
                "weight {k} is not positive: {w}"
            )));
        }
    }
    for k in 1..v.len() {
        if v[k] > v[k - 1] {
            return Err(Error::NonDecreasingWeights {
                index: k,
                prev: v[k - 1],
                next: v[k],
            });
        }
    }
    Ok(())
}

/// C(β+k-1, k) for k < n by the product recurrence. Integer β stays exact
/// while the numerators fit in 53 bits.
fn bergman_binomials(beta: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 1.0f64;
    for k in 0..n {
        out.push(c);
        let j = k as f64 + 1.0;
        c = c * (beta + k as f64) / j;
    }
    out
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Hardy => write!(f, "hardy"),
            WeightSpec::Bergman(b) => write!(f, "bergman:{b}"),
            WeightSpec::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                write!(f, "explicit:[{}]", parts.join(","))
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if s == "hardy" {
            WeightSpec::Hardy
        } else if let Some(b) = s.strip_prefix("bergman:") {
            let beta: f64 = b
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad Bergman exponent '{b}'")))?;
            WeightSpec::Bergman(beta)
        } else if let Some(rest) = s.strip_prefix("explicit:") {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| Error::Parse(format!("explicit weights need brackets: '{rest}'")))?;
            let vals = inner
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad weight '{x}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            WeightSpec::Explicit(vals)
        } else {
            return Err(Error::Parse(format!("unknown weight spec '{s}'")));
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A multi-weight W = (ω_1, …, ω_n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiWeightSpec(pub Vec<WeightSpec>);

impl MultiWeightSpec {
    pub fn new(weights: Vec<WeightSpec>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadWeights(
                "a multi-weight needs at least one entry".into(),
            ));
        }
        for w in &weights {
            w.validate()?;
        }
        Ok(MultiWeightSpec(weights))
    }

    pub fn uniform(w: WeightSpec, n: usize) -> Self {
        MultiWeightSpec(vec![w; n])
    }

    /// W_γ = (bergman:γ_1, …).
    pub fn bergman(gamma: &[f64]) -> Result<Self> {
        Self::new(gamma.iter().map(|g| WeightSpec::Bergman(*g)).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[WeightSpec] {
        &self.0
    }

    /// Member of S(W) for a mask: bit i set keeps ω_i, cleared uses the
    /// constant weight.
    pub fn member(&self, mask: usize) -> MultiWeightSpec {
        MultiWeightSpec(
            self.0
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    if mask >> i & 1 == 1 {
                        w.clone()
                    } else {
                        WeightSpec::Hardy
                    }
                })
                .collect(),
        )
    }

    /// All 2^n members of S(W) in ascending mask order.
    pub fn family(&self) -> Vec<(usize, MultiWeightSpec)> {
        (0..1usize << self.n())
            .map(|m| (m, self.member(m)))
            .collect()
    }

    pub fn restrict(&self, idx: &[usize]) -> MultiWeightSpec {
        MultiWeightSpec(idx.iter().map(|&i| self.0[i].clone()).collect())
    }

    /// True when some entry is an explicit list. Presets satisfy
    /// liminf ω_k^{1/k} = 1 by construction, explicit lists are taken on trust.
    pub fn liminf_assumed(&self) -> bool {
        self.0.iter().any(|w| matches!(w, WeightSpec::Explicit(_)))
    }

    /// 1/k_W evaluated in closed form for Hardy and Bergman presets.
    pub fn inverse_kernel_at(&self, r: &[f64]) -> Option<f64> {
        let mut p = 1.0;
        for (w, ri) in self.0.iter().zip(r) {
            p *= (1.0 - ri).powf(w.beta()?);
        }
        Some(p)
    }

    pub fn inverse_coeffs(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        self.0.iter().map(|w| w.inverse_coeffs(n)).collect()
    }
}

impl fmt::Display for MultiWeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for MultiWeightSpec {
    type Err = Error;

    /// Comma separated list; commas inside brackets belong to explicit lists.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (i, ch) in s.char_indices() {
            match ch {
                '[' => depth += 1,
                ']' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        parts.push(&s[start..]);
        MultiWeightSpec::new(
            parts
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Dense truncated power series, row-major over multi-indices (the last
/// variable varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    pub n_vars: usize,
    pub degrees: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn zeros(degrees: Vec<usize>) -> Result<Self> {
        if degrees.is_empty() || degrees.contains(&0) {
            return Err(Error::Shape(format!(
                "degrees must be positive, got {degrees:?}"
            )));
        }
        let len = degrees.iter().product();
        Ok(TruncatedSeries {
            n_vars: degrees.len(),
            degrees,
            coeffs: vec![0.0; len],
        })
    }

    pub fn one(degrees: Vec<usize>) -> Result<Self> {
        let mut s = Self::zeros(degrees)?;
        s.coeffs[0] = 1.0;
        Ok(s)
    }

    pub fn from_coeffs(degrees: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        let s = Self::zeros(degrees)?;
        if coeffs.len() != s.coeffs.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                s.coeffs.len(),
                coeffs.len()
            )));
        }
        Ok(TruncatedSeries { coeffs, ..s })
    }

    /// Product of one-variable series f_1(z_1)···f_n(z_n).
    pub fn separable(factors: &[Vec<f64>]) -> Result<Self> {
        let degrees: Vec<usize> = factors.iter().map(Vec::len).collect();
        let mut s = Self::zeros(degrees)?;
        for flat in 0..s.coeffs.len() {
            let alpha = s.multi_index(flat);
            s.coeffs[flat] = alpha.iter().zip(factors).map(|(&a, f)| f[a]).product();
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn flat_index(&self, alpha: &[usize]) -> usize {
        flat_index(&self.degrees, alpha)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(&self.degrees, flat)
    }

    pub fn get(&self, alpha: &[usize]) -> f64 {
        self.coeffs[self.flat_index(alpha)]
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(TruncatedSeries {
            coeffs,
            ..self.clone()
        })
    }

    /// Truncated product; terms beyond the cutoff are discarded.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = Self::zeros(self.degrees.clone())?;
        for a in 0..self.len() {
            if self.coeffs[a] == 0.0 {
                continue;
            }
            let alpha = self.multi_index(a);
            for b in 0..other.len() {
                let beta = other.multi_index(b);
                if let Some(g) = add_within(&self.degrees, &alpha, &beta) {
                    out.coeffs[g] += self.coeffs[a] * other.coeffs[b];
                }
            }
        }
        Ok(out)
    }

    /// Reciprocal series by recursive convolution division.
    ///
    /// Row-major order lists every β ≤ α before α, so each coefficient only
    /// needs earlier ones.
    pub fn invert(&self) -> Result<Self> {
        let s0 = self.coeffs[0];
        if s0 == 0.0 {
            return Err(Error::ZeroConstantTerm);
        }
        let mut out = Self::zeros(self.degrees.clone())?;
        out.coeffs[0] = 1.0 / s0;
        for a in 1..self.len() {
            let alpha = self.multi_index(a);
            let mut acc = Neumaier::default();
            for_each_split(&self.degrees, &alpha, |beta_flat, rest_flat| {
                if beta_flat != 0 {
                    acc.add(self.coeffs[beta_flat] * out.coeffs[rest_flat]);
                }
            });
            out.coeffs[a] = -acc.sum() / s0;
        }
        Ok(out)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.degrees != other.degrees {
            return Err(Error::Shape(format!(
                "series shapes differ: {:?} vs {:?}",
                self.degrees, other.degrees
            )));
        }
        Ok(())
    }
}

pub(crate) fn flat_index(degrees: &[usize], alpha: &[usize]) -> usize {
    alpha
        .iter()
        .zip(degrees)
        .fold(0, |acc, (&a, &n)| acc * n + a)
}

pub(crate) fn multi_index(degrees: &[usize], mut flat: usize) -> Vec<usize> {
    let mut alpha = vec![0; degrees.len()];
    for i in (0..degrees.len()).rev() {
        alpha[i] = flat % degrees[i];
        flat /= degrees[i];
    }
    alpha
}

fn add_within(degrees: &[usize], a: &[usize], b: &[usize]) -> Option<usize> {
    let mut flat = 0;
    for i in 0..degrees.len() {
        let s = a[i] + b[i];
        if s >= degrees[i] {
            return None;
        }
        flat = flat * degrees[i] + s;
    }
    Some(flat)
}

/// Calls f(flat(β), flat(α-β)) for every 0 ≤ β ≤ α.
fn for_each_split(degrees: &[usize], alpha: &[usize], mut f: impl FnMut(usize, usize)) {
    let n = alpha.len();
    // The flat index is linear, so flat(α - β) = flat(α) - flat(β).
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * degrees[i + 1];
    }
    let top = flat_index(degrees, alpha);
    let mut beta = vec![0usize; n];
    let mut flat = 0usize;
    loop {
        f(flat, top - flat);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if beta[i] < alpha[i] {
                beta[i] += 1;
                flat += strides[i];
                break;
            }
            flat -= beta[i] * strides[i];
            beta[i] = 0;
        }
    }
}

/// Compensated summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// How far s ⊛ c is from the unit series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionResidual {
    /// max_α |(s⊛c)_α - δ_α|
    pub absolute: f64,
    /// The same, divided by max(1, Σ_β |s_β c_{α-β}|) at each α.
    pub scaled: f64,
}

pub fn convolution_residual(
    s: &TruncatedSeries,
    c: &TruncatedSeries,
) -> Result<ConvolutionResidual> {
    s.same_shape(c)?;
    let mut res = ConvolutionResidual {
        absolute: 0.0,
        scaled: 0.0,
    };
    for a in 0..s.len() {
        let alpha = s.multi_index(a);
        let mut acc = Neumaier::default();
        let mut mass = 0.0;
        for_each_split(&s.degrees, &alpha, |b, rest| {
            let t = s.coeffs[b] * c.coeffs[rest];
            acc.add(t);
            mass += t.abs();
        });
        let target = if a == 0 { 1.0 } else { 0.0 };
        let err = (acc.sum() - target).abs();
        res.absolute = res.absolute.max(err);
        res.scaled = res.scaled.max(err / mass.max(1.0));
    }
    Ok(res)
}

/// k_W truncated at the given per-variable degrees.
pub fn associated_series(w: &MultiWeightSpec, degrees: &[usize]) -> Result<TruncatedSeries> {
    if degrees.len() != w.n() {
        return Err(Error::ArityMismatch {
            expected: w.n(),
            got: degrees.len(),
        });
    }
    let factors =
        w.0.iter()
            .zip(degrees)
            .map(|(wi, &n)| wi.reciprocals(n))
            .collect::<Result<Vec<_>>>()?;
    TruncatedSeries::separable(&factors)
}

/// 1/k_W as the product of the one-variable reciprocals.
pub fn inverse_kernel_series(w: &MultiWeightSpec, degrees: &[usize]) -> Result<TruncatedSeries> {
    if degrees.len() != w.n() {
        return Err(Error::ArityMismatch {
            expected: w.n(),
            got: degrees.len(),
        });
    }
    let factors =
        w.0.iter()
            .zip(degrees)
            .map(|(wi, &n)| wi.inverse_coeffs(n))
            .collect::<Result<Vec<_>>>()?;
    TruncatedSeries::separable(&factors)
}

pub fn invert_series(s: &TruncatedSeries) -> Result<TruncatedSeries> {
    s.invert()
}

/// Coefficients a_0..a_{n-1} of k_ω(rz)/k_ω(sz).
pub fn quotient_coeffs(spec: &WeightSpec, r: f64, s: f64, n: usize) -> Result<Vec<f64>> {
    for x in [r, s] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::OutsideDisc);
        }
    }
    let recip = spec.reciprocals(n)?;
    let c = spec.inverse_coeffs(n)?;
    let rp: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
    let sp: Vec<f64> = (0..n).map(|k| s.powi(k as i32)).collect();
    Ok((0..n)
        .map(|m| {
            let mut acc = Neumaier::default();
            for k in 0..=m {
                acc.add(rp[k] * recip[k] * c[m - k] * sp[m - k]);
            }
            acc.sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertiesReport {
    pub p1_ok: bool,
    /// Smallest product coefficient a_α(e, r) seen on the grid.
    pub p1_min: f64,
    pub p2_bound: f64,
    pub p3_abs_sum: f64,
    /// True when explicit weights are present and liminf ω_k^{1/k} = 1 is
    /// taken on trust.
    pub liminf_assumed: bool,
}

/// Truncated checks of the positivity and boundedness properties of W.
pub fn check_properties(
    w: &MultiWeightSpec,
    r_grid: &[Vec<f64>],
    n: usize,
) -> Result<PropertiesReport> {
    let mut p1_min = if r_grid.is_empty() {
        0.0
    } else {
        f64::INFINITY
    };
    let mut p2_bound: f64 = 0.0;
    for r in r_grid {
        if r.len() != w.n() {
            return Err(Error::ArityMismatch {
                expected: w.n(),
                got: r.len(),
            });
        }
        let a_er =
            w.0.iter()
                .zip(r)
                .map(|(wi, &ri)| quotient_coeffs(wi, 1.0, ri, n))
                .collect::<Result<Vec<_>>>()?;
        let a_re =
            w.0.iter()
                .zip(r)
                .map(|(wi, &ri)| quotient_coeffs(wi, ri, 1.0, n))
                .collect::<Result<Vec<_>>>()?;
        let low = TruncatedSeries::separable(&a_er)?
            .coeffs
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let high = TruncatedSeries::separable(&a_re)?
            .coeffs
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max);
        p1_min = p1_min.min(low);
        p2_bound = p2_bound.max(high);
    }
    let p3_abs_sum: f64 =
        w.0.iter()
            .map(|wi| {
                wi.inverse_coeffs(n)
                    .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .product();
    Ok(PropertiesReport {
        p1_ok: p1_min >= -COEFF_TOL,
        p1_min,
        p2_bound,
        p3_abs_sum,
        liminf_assumed: w.liminf_assumed(),
    })
}
