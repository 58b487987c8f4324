//! Seeded generators for test tuples.
//!
//! The random source is a 64-bit linear congruential generator with the MMIX
//! constants, so seeds mean the same thing in any implementation.

use nalgebra::DMatrix;

use crate::bergman::TruncatedSpace;
use crate::error::Result;
use crate::hyper::OperatorTuple;
use crate::linalg::{identity, kron, op_norm, zeros};
use crate::series::MultiWeightSpec;
use crate::{c64, Operator, COMMUTATION_TOL};

const MUL: u64 = 6364136223846793005;
const INC: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        let mut g = Lcg { state: seed };
        g.next_u64();
        g
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(MUL).wrapping_add(INC);
        self.state
    }

    /// Uniform in [0, 1) from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal by Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Operator {
        let mut m = zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re = self.gaussian();
                let im = self.gaussian();
                m[(i, j)] = c64(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        m
    }

    /// Haar-distributed unitary from the QR factorization of a Gaussian
    /// matrix with the phases of R's diagonal removed.
    pub fn unitary(&mut self, n: usize) -> Operator {
        if n == 0 {
            return zeros(0, 0);
        }
        let g = self.gaussian_matrix(n, n);
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c64(1.0, 0.0)
            };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        q
    }
}

fn scale_to(a: &Operator, target: f64) -> Operator {
    let n = op_norm(a);
    if n == 0.0 {
        a.clone()
    } else {
        a * c64(target / n, 0.0)
    }
}

/// Random polynomial in `base` without constant term.
fn polynomial(rng: &mut Lcg, base: &Operator, degree: usize) -> Operator {
    let mut out = zeros(base.nrows(), base.ncols());
    let mut p = base.clone();
    for _ in 0..degree.max(1) {
        out += &p * c64(rng.gaussian(), rng.gaussian());
        p = &p * base;
    }
    out
}

fn strictly_upper(rng: &mut Lcg, dim: usize) -> Operator {
    let mut n = rng.gaussian_matrix(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            n[(i, j)] = c64(0.0, 0.0);
        }
    }
    n
}

/// Jointly nilpotent commuting tuple: polynomials without constant term in
/// one strictly upper triangular matrix, each scaled to a norm in
/// [0.1, 0.25] and conjugated by a common random unitary.
pub fn nilpotent_tuple(seed: u64, dim: usize, n: usize) -> OperatorTuple {
    let mut rng = Lcg::new(seed);
    let base = strictly_upper(&mut rng, dim);
    let v = rng.unitary(dim);
    let ops = (0..n)
        .map(|_| {
            let p = polynomial(&mut rng, &base, dim.saturating_sub(1));
            let t = scale_to(&p, rng.range(0.1, 0.25));
            &v * t * v.adjoint()
        })
        .collect();
    OperatorTuple::new(ops, COMMUTATION_TOL).expect("nilpotent generator builds a valid tuple")
}

/// Commuting pair of polynomials in one random matrix with spectral radius
/// below one. Norms land in [lo, hi], so the pair is pure and sits on both
/// sides of most positivity tests.
pub fn polynomial_pair(seed: u64, dim: usize, lo: f64, hi: f64) -> OperatorTuple {
    let mut rng = Lcg::new(seed);
    let a = rng.gaussian_matrix(dim, dim);
    let a = scale_to(&a, 0.9);
    let ops = (0..2)
        .map(|_| {
            let p = polynomial(&mut rng, &a, 2) + identity(dim) * c64(rng.range(-0.3, 0.3), 0.0);
            scale_to(&p, rng.range(lo, hi))
        })
        .collect();
    OperatorTuple::new(ops, COMMUTATION_TOL).expect("polynomial pair commutes")
}

/// Polynomials in one random matrix, each scaled to operator norm `radius`.
/// A radius above one gives a tuple that fails validation.
pub fn random_contraction(seed: u64, dim: usize, n: usize, radius: f64) -> Result<OperatorTuple> {
    let mut rng = Lcg::new(seed);
    let a = rng.gaussian_matrix(dim, dim);
    let ops = (0..n)
        .map(|_| {
            let p =
                polynomial(&mut rng, &a, 2) + identity(dim) * c64(rng.gaussian(), rng.gaussian());
            scale_to(&p, radius)
        })
        .collect();
    OperatorTuple::new(ops, COMMUTATION_TOL)
}

/// Commuting unitaries V diag(e^{iθ}) V*.
pub fn commuting_unitaries(seed: u64, dim: usize, n: usize) -> OperatorTuple {
    let mut rng = Lcg::new(seed);
    let v = rng.unitary(dim);
    let ops = (0..n)
        .map(|_| {
            let d = DMatrix::from_fn(dim, dim, |i, j| {
                if i == j {
                    let t = rng.range(0.0, std::f64::consts::TAU);
                    c64(t.cos(), t.sin())
                } else {
                    c64(0.0, 0.0)
                }
            });
            &v * d * v.adjoint()
        })
        .collect();
    OperatorTuple::new(ops, COMMUTATION_TOL).expect("commuting unitaries")
}

/// (U ⊗ I, I ⊗ J) with U unitary and J nilpotent.
pub fn mixed_pair(seed: u64, u_dim: usize, j_dim: usize) -> OperatorTuple {
    let mut rng = Lcg::new(seed);
    let u = rng.unitary(u_dim);
    let j = nilpotent_tuple(rng.next_u64(), j_dim, 1).ops()[0].clone();
    let ops = vec![kron(&u, &identity(j_dim)), kron(&identity(u_dim), &j)];
    OperatorTuple::new(ops, COMMUTATION_TOL).expect("mixed pair commutes")
}

/// Direct sum of a mixed pair, its mirror, a nilpotent pair and a unitary
/// pair. Every block of the general model is nonzero for this tuple.
pub fn four_block_pair(seed: u64) -> OperatorTuple {
    let mut rng = Lcg::new(seed);
    let a = mixed_pair(rng.next_u64(), 2, 2);
    let b = mixed_pair(rng.next_u64(), 2, 2);
    let c = nilpotent_tuple(rng.next_u64(), 3, 2);
    let d = commuting_unitaries(rng.next_u64(), 2, 2);
    let first = [&a.ops()[0], &b.ops()[1], &c.ops()[0], &d.ops()[0]];
    let second = [&a.ops()[1], &b.ops()[0], &c.ops()[1], &d.ops()[1]];
    let sum = |xs: [&Operator; 4]| crate::linalg::direct_sum(&xs.map(|x| x.clone()));
    OperatorTuple::new(vec![sum(first), sum(second)], COMMUTATION_TOL)
        .expect("direct sum of commuting pairs")
}

pub fn scalars(ts: &[nalgebra::Complex<f64>]) -> Result<OperatorTuple> {
    OperatorTuple::new(
        ts.iter().map(|&t| DMatrix::from_element(1, 1, t)).collect(),
        COMMUTATION_TOL,
    )
}

/// Truncated multishift on A²_W.
pub fn multishift(w: &MultiWeightSpec, degrees: &[usize]) -> Result<OperatorTuple> {
    crate::bergman::multishift(&TruncatedSpace::new(w.clone(), degrees.to_vec(), 1)?)
}

/// Compression of the truncated multishift to the smallest co-invariant
/// subspace containing a random vector. Hypercontractive for the weight it
/// was built from, whatever that weight is.
pub fn compressed_multishift(
    seed: u64,
    w: &MultiWeightSpec,
    degrees: &[usize],
) -> Result<OperatorTuple> {
    let mut rng = Lcg::new(seed);
    let full = multishift(w, degrees)?;
    let dim = full.dim();
    let v = rng.gaussian_matrix(dim, 1);
    // Krylov space of the adjoints, orthonormalized as it grows.
    let mut basis: Vec<Operator> = Vec::new();
    let mut queue = vec![v];
    while let Some(mut x) = queue.pop() {
        for _ in 0..2 {
            for b in &basis {
                let p = (b.adjoint() * &x)[(0, 0)];
                x -= b * p;
            }
        }
        let nx = x.norm();
        if nx < 1e-8 {
            continue;
        }
        let x = x / c64(nx, 0.0);
        for op in full.ops() {
            queue.push(op.adjoint() * &x);
        }
        basis.push(x);
    }
    let mut q = zeros(dim, basis.len());
    for (c, b) in basis.iter().enumerate() {
        q.set_column(c, &b.column(0));
    }
    let ops = full.ops().iter().map(|t| q.adjoint() * t * &q).collect();
    OperatorTuple::new(ops, 1e-9)
}
