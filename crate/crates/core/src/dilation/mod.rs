//! Isometric embeddings of tuples into truncated weighted Bergman models.

mod general;
mod lift;
pub(crate) mod one_var;
mod pure;

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::bergman::TruncatedSpace;
use crate::error::{Error, Result};
use crate::hyper::{conjugation_limit, defect_limit, tail_square, OperatorTuple, MAX_SQUARINGS};
use crate::linalg::{
    douglas_solve, identity, op_norm, psd_factor_floor, serialize_op, serialize_ops, zeros,
    MatrixText,
};
use crate::series::{MultiWeightSpec, WeightSpec};
use crate::{Operator, LIMIT_TOL, POSITIVITY_TOL};

pub use general::{
    general_model, general_model_with_cap, model_colift, useful_lemma_check, DEFAULT_BLOCK_CAP,
};
pub use lift::{commutant_lift, Lift};
pub use one_var::{isometry_identity_check, one_var_dilation};
pub use pure::pure_dilation;

/// Terms used for defect operators at r = e.
pub(crate) const DEFECT_TERMS: usize = 64;

/// Eigenvalues of a defect or tail below this (relative to max(‖A‖, 1)) are
/// treated as zero when factoring.
pub(crate) const FACTOR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct BlockLayout {
    pub label: String,
    pub mask: Option<usize>,
    pub offset: usize,
    pub dim: usize,
    pub e_dim: usize,
    pub space: Option<TruncatedSpace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaBlock {
    pub mask: usize,
    #[serde(serialize_with = "serialize_op")]
    pub delta: Operator,
    pub e_dim: usize,
    /// V_i^Λ for every coordinate i outside Λ.
    #[serde(serialize_with = "serialize_op_map")]
    pub v: BTreeMap<usize, Operator>,
}

impl LambdaBlock {
    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationResult {
    #[serde(serialize_with = "serialize_op")]
    pub map: Operator,
    #[serde(serialize_with = "serialize_ops")]
    pub model_ops: Vec<Operator>,
    pub block_layout: Vec<BlockLayout>,
    pub residuals: BTreeMap<String, f64>,
    pub blocks: Vec<LambdaBlock>,
}

impl DilationResult {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    /// Largest residual whose name starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.residuals
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

fn serialize_op_map<S: Serializer>(
    m: &BTreeMap<usize, Operator>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let t: BTreeMap<usize, MatrixText> = m.iter().map(|(k, v)| (*k, MatrixText::from(v))).collect();
    t.serialize(s)
}

/// One-variable data for a single contraction: the defect factor D (e×d),
/// the tail factor Q (q×d) and the co-isometry U on ran Q with U*Q = QT*.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub dm: Operator,
    pub qm: Operator,
    pub u: Operator,
    pub tail_converged: bool,
}

fn floor_for(a: &Operator) -> f64 {
    FACTOR_FLOOR * op_norm(a).max(1.0)
}

pub(crate) fn split(t: &Operator, w: &WeightSpec) -> Result<Split> {
    let d = t.nrows();
    if d == 0 {
        return Ok(Split {
            dm: zeros(0, 0),
            qm: zeros(0, 0),
            u: zeros(0, 0),
            tail_converged: true,
        });
    }
    let dd = defect_at_one(
        std::slice::from_ref(t),
        &MultiWeightSpec(vec![w.clone()]),
        d,
    )?;
    let dm = psd_factor_floor(&dd, POSITIVITY_TOL, floor_for(&dd)).map_err(|e| match e {
        Error::NotPsd { min_eigenvalue } => {
            Error::NotHypercontractive(format!("defect at r = 1 has eigenvalue {min_eigenvalue:e}"))
        }
        other => other,
    })?;
    let tail = tail_square(t, LIMIT_TOL * 1e-2, MAX_SQUARINGS);
    let qm = psd_factor_floor(&tail.limit, POSITIVITY_TOL, floor_for(&tail.limit))?;
    let u = douglas_solve(&qm, &(&qm * t.adjoint()), POSITIVITY_TOL).map_err(|e| {
        Error::DouglasPreconditionFailed {
            stage: "tail co-isometry".into(),
            source: Box::new(e),
        }
    })?;
    Ok(Split {
        dm,
        qm,
        u,
        tail_converged: tail.converged,
    })
}

/// D_{W,T}(e) for a possibly empty list of operators on a d-dimensional
/// space. The empty product is the identity.
pub(crate) fn defect_at_one(ops: &[Operator], w: &MultiWeightSpec, d: usize) -> Result<Operator> {
    if ops.is_empty() {
        return Ok(identity(d));
    }
    if d == 0 {
        return Ok(zeros(0, 0));
    }
    let t = OperatorTuple::new(ops.to_vec(), f64::INFINITY)?;
    let r = defect_limit(&t, w, DEFECT_TERMS, LIMIT_TOL * 1e-2, 30)?;
    Ok(r.limit)
}

/// A* with A*G = F, labelled for error reporting.
pub(crate) fn intertwiner(g: &Operator, t: &Operator, stage: String) -> Result<Operator> {
    douglas_solve(g, &(g * t.adjoint()), POSITIVITY_TOL).map_err(|e| {
        Error::DouglasPreconditionFailed {
            stage,
            source: Box::new(e),
        }
    })
}

/// lim over every β of T_J^β X T_J^{*β}, one coordinate at a time.
pub(crate) fn iterated_tail(ops: &[&Operator], x: &Operator) -> Operator {
    let mut y = x.clone();
    for t in ops {
        y = conjugation_limit(t, &y, LIMIT_TOL * 1e-2, MAX_SQUARINGS).limit;
    }
    y
}

/// T^{*α} for a multi-index over the listed operators.
pub(crate) fn adjoint_power(ops: &[&Operator], alpha: &[usize], d: usize) -> Operator {
    let mut p = identity(d);
    for (t, &k) in ops.iter().zip(alpha) {
        for _ in 0..k {
            p = &p * t.adjoint();
        }
    }
    p
}
