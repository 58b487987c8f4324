use std::collections::BTreeMap;

use super::{split, BlockLayout, DilationResult, Split};
use crate::bergman::{shift_matrix, TruncatedSpace};
use crate::error::{Error, Result};
use crate::hyper::is_omega_hypercontraction;
use crate::linalg::{direct_sum, dist, identity, op_norm, power, vstack};
use crate::series::{MultiWeightSpec, WeightSpec};
use crate::{c64, Operator, POSITIVITY_TOL};

/// Rows (1/√ω_k)·D T^{*k} for k < n, the orthonormal coordinates of π_{ω,T}.
pub(crate) fn bergman_rows(t: &Operator, dm: &Operator, weights: &[f64]) -> Operator {
    let d = t.nrows();
    let mut blocks = Vec::with_capacity(weights.len());
    let mut p = dm.clone();
    for &wk in weights {
        blocks.push(&p * c64(1.0 / wk.sqrt(), 0.0));
        p = &p * t.adjoint();
    }
    vstack(&blocks, d)
}

/// ‖T^N T^{*N} - Q_T²‖, what the first N powers have not yet resolved.
pub(crate) fn tail_gap(t: &Operator, qm: &Operator, n: usize) -> f64 {
    let p = power(t, n);
    op_norm(&(&p * p.adjoint() - qm.adjoint() * qm))
}

/// The map h ↦ (π_{ω,T} h, Q_T h) into truncated A²_ω(D) ⊕ ran Q_T with
/// model operator M_z ⊕ U.
pub fn one_var_dilation(
    t: &Operator,
    w: &WeightSpec,
    n: usize,
    tol: f64,
) -> Result<DilationResult> {
    let rep = is_omega_hypercontraction(t, w, &[0.5, 0.9], super::DEFECT_TERMS, POSITIVITY_TOL)?;
    if !rep.verdict {
        return Err(Error::NotHypercontractive(format!(
            "positivity fails for weight {w}"
        )));
    }
    let d = t.nrows();
    let Split {
        dm,
        qm,
        u,
        tail_converged,
    } = split(t, w)?;
    let e = dm.nrows();
    let space = TruncatedSpace::new(MultiWeightSpec(vec![w.clone()]), vec![n], e)?;
    let weights = w.weight_values(n)?;
    let top = bergman_rows(t, &dm, &weights);
    let map = vstack(&[top, qm.clone()], d);
    let model = direct_sum(&[shift_matrix(&space, 0)?, u.clone()]);

    let mut residuals = BTreeMap::new();
    let iso = dist(&(map.adjoint() * &map), &identity(d));
    residuals.insert("isometry".to_string(), iso);
    residuals.insert(
        "intertwining".to_string(),
        dist(&(&map * t.adjoint()), &(model.adjoint() * &map)),
    );
    residuals.insert(
        "omega_iso".to_string(),
        identity_residual(t, &dm, &qm, &weights),
    );
    if u.nrows() > 0 {
        residuals.insert(
            "u_coisometry".to_string(),
            dist(&(&u * u.adjoint()), &identity(u.nrows())),
        );
        residuals.insert(
            "u_relation".to_string(),
            dist(&(u.adjoint() * &qm), &(&qm * t.adjoint())),
        );
    }
    residuals.insert("tail_gap".to_string(), tail_gap(t, &qm, n));
    residuals.insert(
        "tail_converged".to_string(),
        if tail_converged { 1.0 } else { 0.0 },
    );
    if iso > tol {
        return Err(Error::IsometryResidualTooLarge {
            residual: iso,
            budget: tol,
        });
    }
    let block_layout = vec![
        BlockLayout {
            label: "bergman".into(),
            mask: Some(1),
            offset: 0,
            dim: space.dim(),
            e_dim: e,
            space: Some(space.clone()),
        },
        BlockLayout {
            label: "tail".into(),
            mask: Some(0),
            offset: space.dim(),
            dim: qm.nrows(),
            e_dim: qm.nrows(),
            space: None,
        },
    ];
    Ok(DilationResult {
        map,
        model_ops: vec![model],
        block_layout,
        residuals,
        blocks: Vec::new(),
    })
}

fn identity_residual(t: &Operator, dm: &Operator, qm: &Operator, weights: &[f64]) -> f64 {
    let d = t.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        let mut h = crate::linalg::zeros(d, 1);
        h[(j, 0)] = c64(1.0, 0.0);
        let mut rhs = (qm * &h).norm_squared();
        let mut x = h.clone();
        for &wk in weights {
            rhs += (dm * &x).norm_squared() / wk;
            x = t.adjoint() * x;
        }
        worst = worst.max((1.0 - rhs).abs());
    }
    worst
}

/// max over the standard basis of |‖h‖² - Σ_{k<N} ‖D T^{*k}h‖²/ω_k - ‖Q_T h‖²|.
pub fn isometry_identity_check(t: &Operator, w: &WeightSpec, n: usize) -> Result<f64> {
    let s = split(t, w)?;
    Ok(identity_residual(t, &s.dm, &s.qm, &w.weight_values(n)?))
}
