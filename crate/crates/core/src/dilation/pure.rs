use std::collections::BTreeMap;

use super::one_var::bergman_rows;
use super::{intertwiner, split, BlockLayout, DilationResult, DEFECT_TERMS};
use crate::bergman::{shift_matrix, TruncatedSpace};
use crate::error::{Error, Result};
use crate::hyper::{dyadic_grid, is_w_hypercontraction, tail_square, OperatorTuple, MAX_SQUARINGS};
use crate::linalg::{dist, identity, kron, op_norm};
use crate::series::MultiWeightSpec;
use crate::{Operator, LIMIT_TOL, POSITIVITY_TOL};

/// Π_T = Π_n ∘ ··· ∘ Π_1 into truncated A²_W(E), each stage the one-variable
/// map of the current lifted operator tensored with the identity on the
/// variables already used.
pub fn pure_dilation(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    degrees: &[usize],
    tol: f64,
) -> Result<DilationResult> {
    let n = t.n();
    if w.n() != n || degrees.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: w.n().min(degrees.len()),
        });
    }
    for ti in t.ops() {
        let tail = tail_square(ti, LIMIT_TOL * 1e-2, MAX_SQUARINGS);
        let tail_norm = op_norm(&tail.limit);
        if tail_norm > LIMIT_TOL {
            return Err(Error::NotPure { tail_norm });
        }
    }
    let rep = is_w_hypercontraction(t, w, &dyadic_grid(n, 2), DEFECT_TERMS, POSITIVITY_TOL)?;
    if !rep.verdict {
        return Err(Error::NotHypercontractive(format!(
            "positivity fails for weights {w}"
        )));
    }

    let d = t.dim();
    let mut residuals = BTreeMap::new();
    let mut map = identity(d);
    let mut cur: Vec<Operator> = t.ops().to_vec();
    let mut used = 1usize;
    let mut e = d;
    for (j, (wj, &deg)) in w.weights().iter().zip(degrees).enumerate() {
        let s = split(&cur[0], wj)?;
        if s.qm.nrows() > 0 {
            return Err(Error::NotPure {
                tail_norm: op_norm(&(s.qm.adjoint() * &s.qm)),
            });
        }
        let stage = bergman_rows(&cur[0], &s.dm, &wj.weight_values(deg)?);
        residuals.insert(
            format!("stage_isometry_{}", j + 1),
            dist(&(stage.adjoint() * &stage), &identity(cur[0].nrows())),
        );
        map = kron(&identity(used), &stage) * map;
        used *= deg;
        let mut next = Vec::with_capacity(cur.len() - 1);
        for (k, ti) in cur.iter().enumerate().skip(1) {
            next.push(intertwiner(
                &s.dm,
                ti,
                format!("stage {} lift of coordinate {}", j + 1, j + k + 1),
            )?);
        }
        e = s.dm.nrows();
        cur = next;
    }
    let space = TruncatedSpace::new(w.clone(), degrees.to_vec(), e)?;
    debug_assert_eq!(map.nrows(), space.dim());
    let model_ops = (0..n)
        .map(|i| shift_matrix(&space, i))
        .collect::<Result<Vec<_>>>()?;

    let iso = dist(&(map.adjoint() * &map), &identity(d));
    residuals.insert("isometry".to_string(), iso);
    for (i, (ti, m)) in t.ops().iter().zip(&model_ops).enumerate() {
        residuals.insert(
            format!("intertwining_{}", i + 1),
            dist(&(&map * ti.adjoint()), &(m.adjoint() * &map)),
        );
        residuals.insert(
            format!("compression_{}", i + 1),
            dist(&(map.adjoint() * m * &map), ti),
        );
    }
    if iso > tol {
        return Err(Error::IsometryResidualTooLarge {
            residual: iso,
            budget: tol,
        });
    }
    let block_layout = vec![BlockLayout {
        label: "bergman".into(),
        mask: Some((1 << n) - 1),
        offset: 0,
        dim: space.dim(),
        e_dim: e,
        space: Some(space),
    }];
    Ok(DilationResult {
        map,
        model_ops,
        block_layout,
        residuals,
        blocks: Vec::new(),
    })
}
