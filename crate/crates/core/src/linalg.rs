//! Dense complex linear algebra used everywhere else.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{c64, Operator};

/// Relative rank threshold for eigenvalue and singular value cuts.
pub const RANK_TOL: f64 = 1e-9;

pub fn zeros(rows: usize, cols: usize) -> Operator {
    DMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> Operator {
    DMatrix::identity(n, n)
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

/// Spectral norm, the largest singular value.
pub fn op_norm(a: &Operator) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    to_faer(a)
        .singular_values()
        .map(|s| s.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

fn to_faer(a: &Operator) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, faer::c64>) -> Operator {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// ‖A - B‖ in operator norm.
pub fn dist(a: &Operator, b: &Operator) -> f64 {
    op_norm(&(a - b))
}

pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn hermitian_eigen(a: &Operator) -> (Vec<f64>, Operator) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = to_faer(&hermitian_part(a));
    let eig = h
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigensolver converges");
    let s = eig.S().column_vector();
    let raw: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let u = from_faer(eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| raw[i]).collect();
    let mut vecs = zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &u.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(a: &Operator) -> f64 {
    hermitian_eigen(a).0.first().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdCertificate {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

fn check_square(a: &Operator) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_hermitian(a: &Operator, tol: f64) -> Result<()> {
    let asym = dist(a, &a.adjoint());
    if asym > tol * op_norm(a).max(1.0) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(())
}

pub fn psd_check(a: &Operator, tol: f64) -> Result<PsdCertificate> {
    check_square(a)?;
    check_hermitian(a, tol)?;
    let min_eigenvalue = min_eigenvalue(a);
    Ok(PsdCertificate {
        min_eigenvalue,
        tolerance: tol,
        verdict: min_eigenvalue >= -tol,
    })
}

/// Hermitian square root, clamping eigenvalues in [-tol, 0) to zero.
pub fn psd_sqrt(a: &Operator, tol: f64) -> Result<Operator> {
    let cert = psd_check(a, tol)?;
    if !cert.verdict {
        return Err(Error::NotPsd {
            min_eigenvalue: cert.min_eigenvalue,
        });
    }
    let (vals, vecs) = hermitian_eigen(a);
    let d = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c64(v.max(0.0).sqrt(), 0.0)),
    );
    Ok(&vecs * DMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// Minimal factor F (k×d) with F*F = A, keeping eigenvalues above
/// `RANK_TOL`·λ_max. The rows of F span ran A.
pub fn psd_factor(a: &Operator, tol: f64) -> Result<Operator> {
    psd_factor_floor(a, tol, 0.0)
}

/// As `psd_factor`, also dropping eigenvalues at or below `floor`. Limits
/// that should vanish come out at rounding level, and a purely relative cut
/// would keep them.
pub fn psd_factor_floor(a: &Operator, tol: f64, floor: f64) -> Result<Operator> {
    let cert = psd_check(a, tol)?;
    if !cert.verdict {
        return Err(Error::NotPsd {
            min_eigenvalue: cert.min_eigenvalue,
        });
    }
    let (vals, vecs) = hermitian_eigen(a);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..vals.len())
        .rev()
        .filter(|&i| top > 0.0 && vals[i] > RANK_TOL * top && vals[i] > floor)
        .collect();
    let d = a.nrows();
    let mut f = zeros(keep.len(), d);
    for (row, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for j in 0..d {
            f[(row, j)] = vecs[(j, i)].conj() * s;
        }
    }
    Ok(f)
}

/// Moore-Penrose pseudo-inverse with a relative singular value cut.
pub fn pinv(a: &Operator) -> Operator {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return zeros(n, m);
    }
    let svd = to_faer(a).thin_svd().expect("SVD converges");
    let (u, v) = (from_faer(svd.U()), from_faer(svd.V()));
    let s = svd.S().column_vector();
    let k = s.nrows();
    let top = (0..k).map(|i| s[i].re).fold(0.0, f64::max);
    let mut out = zeros(n, m);
    for i in 0..k {
        let si = s[i].re;
        if si > RANK_TOL * top && si > 0.0 {
            out += v.column(i) * u.column(i).adjoint() * c64(1.0 / si, 0.0);
        }
    }
    out
}

/// Douglas factorization: find A with A*G = F.
///
/// G and F share their column space H. The solution is A = (F G⁺)*, which
/// vanishes on (ran G)^⊥. Solvable iff F*F ≼ G*G, checked within `tol`.
pub fn douglas_solve(g: &Operator, f: &Operator, tol: f64) -> Result<Operator> {
    if g.ncols() != f.ncols() {
        return Err(Error::Shape(format!(
            "Douglas solve needs a shared domain, got {} and {} columns",
            g.ncols(),
            f.ncols()
        )));
    }
    let gap = g.adjoint() * g - f.adjoint() * f;
    let lo = min_eigenvalue(&gap);
    if lo < -tol {
        return Err(Error::NotSubordinate { min_eigenvalue: lo });
    }
    let x = f * pinv(g);
    Ok(x.adjoint())
}

/// Columns spanning the orthogonal complement of ran X, for an isometry X.
pub fn complete_to_unitary(x: &Operator, tol: f64) -> Result<(usize, Operator)> {
    let (m, n) = x.shape();
    if m < n {
        return Err(Error::Shape(format!(
            "isometry needs rows >= cols, got {m}x{n}"
        )));
    }
    let residual = dist(&(x.adjoint() * x), &identity(n));
    if residual > tol {
        return Err(Error::NotIsometry { residual });
    }
    let e = m - n;
    if e == 0 {
        return Ok((0, zeros(m, 0)));
    }
    let proj = identity(m) - x * x.adjoint();
    let (_, vecs) = hermitian_eigen(&proj);
    // The complement projector has eigenvalue 1 on exactly m - n directions.
    let mut y = zeros(m, e);
    for c in 0..e {
        y.set_column(c, &vecs.column(m - 1 - c));
    }
    Ok((e, y))
}

/// Orthonormal basis for the complement of ran X, built by projecting the
/// columns of `seed` and orthonormalizing. Gives a second completion that is
/// independent of the eigenvector route.
pub fn complete_with(x: &Operator, seed: &Operator) -> Result<Operator> {
    let (m, n) = x.shape();
    let e = m - n;
    if seed.nrows() != m || seed.ncols() < e {
        return Err(Error::Shape(
            "seed matrix too small for the completion".into(),
        ));
    }
    let proj = identity(m) - x * x.adjoint();
    let mut basis: Vec<DVector<nalgebra::Complex<f64>>> = Vec::with_capacity(e);
    for c in 0..seed.ncols() {
        if basis.len() == e {
            break;
        }
        let mut v = &proj * seed.column(c);
        for _ in 0..2 {
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
            v = &proj * v;
        }
        let nv = v.norm();
        if nv > 1e-6 {
            basis.push(v / c64(nv, 0.0));
        }
    }
    if basis.len() < e {
        return Err(Error::Shape(
            "seed columns do not span the complement".into(),
        ));
    }
    let mut y = zeros(m, e);
    for (c, b) in basis.iter().enumerate() {
        y.set_column(c, b);
    }
    Ok(y)
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Block-diagonal sum of square or rectangular blocks.
pub fn direct_sum(blocks: &[Operator]) -> Operator {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stack blocks with equal column counts on top of each other.
pub fn vstack(blocks: &[Operator], cols: usize) -> Operator {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[Operator], rows: usize) -> Operator {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// A^k, with A^0 = I.
pub fn power(a: &Operator, k: usize) -> Operator {
    let mut out = identity(a.nrows());
    let mut base = a.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            out = &out * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    out
}

/// ‖A*A - I‖.
pub fn isometry_residual(a: &Operator) -> f64 {
    dist(&(a.adjoint() * a), &identity(a.ncols()))
}

/// max(‖A*A - I‖, ‖AA* - I‖).
pub fn unitary_residual(a: &Operator) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    isometry_residual(a).max(dist(&(a * a.adjoint()), &identity(a.nrows())))
}

/// Row-major interchange form of a complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixText {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&Operator> for MatrixText {
    fn from(a: &Operator) -> Self {
        let (rows, cols) = a.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(a[(i, j)].re);
                im.push(a[(i, j)].im);
            }
        }
        MatrixText { rows, cols, re, im }
    }
}

impl TryFrom<&MatrixText> for Operator {
    type Error = Error;

    fn try_from(t: &MatrixText) -> Result<Operator> {
        let n = t.rows * t.cols;
        if t.re.len() != n || t.im.len() != n {
            return Err(Error::Parse(format!(
                "matrix text needs {n} entries in re and im"
            )));
        }
        if t.re.iter().chain(&t.im).any(|x| !x.is_finite()) {
            return Err(Error::Parse("matrix entries must be finite".into()));
        }
        Ok(DMatrix::from_fn(t.rows, t.cols, |i, j| {
            c64(t.re[i * t.cols + j], t.im[i * t.cols + j])
        }))
    }
}

/// Complex scalars serialize as [re, im].
pub fn serialize_complex<S: serde::Serializer>(
    z: &nalgebra::Complex<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn serialize_opt_complex<S: serde::Serializer>(
    z: &Option<nalgebra::Complex<f64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    z.map(|z| [z.re, z.im]).serialize(s)
}

/// Serializes an operator in its interchange form.
pub fn serialize_op<S: serde::Serializer>(
    a: &Operator,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    MatrixText::from(a).serialize(s)
}

pub fn serialize_ops<S: serde::Serializer>(
    a: &[Operator],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    a.iter()
        .map(MatrixText::from)
        .collect::<Vec<_>>()
        .serialize(s)
}

pub fn serialize_opt_op<S: serde::Serializer>(
    a: &Option<Operator>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    a.as_ref().map(MatrixText::from).serialize(s)
}
