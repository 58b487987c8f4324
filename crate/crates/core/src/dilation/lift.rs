use std::collections::BTreeMap;

use super::{intertwiner, one_var_dilation, DilationResult, DEFECT_TERMS};
use crate::error::Result;
use crate::hyper::{dyadic_grid, is_w_hypercontraction, OperatorTuple};
use crate::linalg::{direct_sum, dist, identity, kron};
use crate::series::MultiWeightSpec;
use crate::{Operator, POSITIVITY_TOL};

/// Output of the commutant lift through the first coordinate.
#[derive(Debug, Clone)]
pub struct Lift {
    /// Dilation of T_1 alone.
    pub first: DilationResult,
    /// A_i on the defect space of T_1, i = 2..n.
    pub a: Vec<Operator>,
    /// X_i on ran Q_{T_1}, i = 2..n.
    pub x: Vec<Operator>,
    /// V_i = (I ⊗ A_i) ⊕ X_i on the model of T_1.
    pub v: Vec<Operator>,
    pub a_hyper: Option<bool>,
    pub x_hyper: Option<bool>,
    pub residuals: BTreeMap<String, f64>,
}

fn hyper_verdict(ops: &[Operator], w: &MultiWeightSpec) -> Result<Option<bool>> {
    if ops.is_empty() || ops[0].nrows() == 0 {
        return Ok(None);
    }
    let t = OperatorTuple::new(ops.to_vec(), 1e-8)?;
    let rep = is_w_hypercontraction(&t, w, &dyadic_grid(t.n(), 2), DEFECT_TERMS, POSITIVITY_TOL)?;
    Ok(Some(rep.verdict))
}

/// Lifts T_2..T_n through the dilation of T_1 with N slots.
pub fn commutant_lift(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    n_slots: usize,
    tol: f64,
) -> Result<Lift> {
    let ops = t.ops();
    let first = one_var_dilation(&ops[0], &w.weights()[0], n_slots, tol)?;
    let e = first.block_layout[0].e_dim;
    let split = super::split(&ops[0], &w.weights()[0])?;
    let mut residuals = first.residuals.clone();
    let (mut a, mut x, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (i, ti) in ops.iter().enumerate().skip(1) {
        let ai = intertwiner(&split.dm, ti, format!("A_{}", i + 1))?;
        let xi = intertwiner(&split.qm, ti, format!("X_{}", i + 1))?;
        residuals.insert(
            format!("intertwining_a_{}", i + 1),
            dist(&(&split.dm * ti.adjoint()), &(ai.adjoint() * &split.dm)),
        );
        residuals.insert(
            format!("intertwining_x_{}", i + 1),
            dist(&(&split.qm * ti.adjoint()), &(xi.adjoint() * &split.qm)),
        );
        let vi = direct_sum(&[kron(&identity(n_slots), &ai), xi.clone()]);
        residuals.insert(
            format!("lift_intertwining_{}", i + 1),
            dist(&(&first.map * ti.adjoint()), &(vi.adjoint() * &first.map)),
        );
        debug_assert_eq!(ai.nrows(), e);
        a.push(ai);
        x.push(xi);
        v.push(vi);
    }
    let rest: Vec<usize> = (1..t.n()).collect();
    let (a_hyper, x_hyper) = if rest.is_empty() {
        (None, None)
    } else {
        let wr = w.restrict(&rest);
        (hyper_verdict(&a, &wr)?, hyper_verdict(&x, &wr)?)
    };
    Ok(Lift {
        first,
        a,
        x,
        v,
        a_hyper,
        x_hyper,
        residuals,
    })
}
