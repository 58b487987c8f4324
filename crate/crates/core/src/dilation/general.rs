use std::collections::BTreeMap;

use super::{
    adjoint_power, defect_at_one, intertwiner, iterated_tail, split, BlockLayout, DilationResult,
    LambdaBlock, DEFECT_TERMS,
};
use crate::bergman::{shift_matrix, TruncatedSpace};
use crate::error::{Error, Result};
use crate::hyper::{dyadic_grid, is_w_hypercontraction, OperatorTuple};
use crate::linalg::{direct_sum, dist, douglas_solve, identity, kron, op_norm, vstack, zeros};
use crate::series::{MultiWeightSpec, WeightSpec};
use crate::{c64, Operator, POSITIVITY_TOL};

/// Largest 2^n·dim accepted by `general_model`.
pub const DEFAULT_BLOCK_CAP: usize = 4096;

/// A block produced by the recursion, in coordinates local to its level.
struct Node {
    mask: usize,
    delta: Operator,
    v: BTreeMap<usize, Operator>,
}

fn bits(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// Blocks with every Δ empty, used once a branch has no space left.
fn empty_nodes(n: usize, d: usize) -> Vec<Node> {
    (0..1usize << n)
        .map(|mask| Node {
            mask,
            delta: zeros(0, d),
            v: (0..n)
                .filter(|i| mask >> i & 1 == 0)
                .map(|i| (i, zeros(0, 0)))
                .collect(),
        })
        .collect()
}

fn recurse(
    ops: &[Operator],
    d: usize,
    w: &[WeightSpec],
    tol: f64,
    log: &mut BTreeMap<String, f64>,
    path: &str,
) -> Result<Vec<Node>> {
    let n = ops.len();
    if n == 0 {
        return Ok(vec![Node {
            mask: 0,
            delta: identity(d),
            v: BTreeMap::new(),
        }]);
    }
    if d == 0 {
        return Ok(empty_nodes(n, 0));
    }
    let s = split(&ops[0], &w[0])?;
    let mut a = Vec::with_capacity(n - 1);
    let mut x = Vec::with_capacity(n - 1);
    for ti in &ops[1..] {
        a.push(intertwiner(&s.dm, ti, format!("{path}A"))?);
        x.push(intertwiner(&s.qm, ti, format!("{path}X"))?);
    }
    let sub_a = recurse(&a, s.dm.nrows(), &w[1..], tol, log, &format!("{path}A"))?;
    let sub_x = recurse(&x, s.qm.nrows(), &w[1..], tol, log, &format!("{path}X"))?;
    let mut out = Vec::with_capacity(1 << n);
    for node in sub_a {
        out.push(Node {
            mask: node.mask << 1 | 1,
            delta: &node.delta * &s.dm,
            v: node.v.into_iter().map(|(i, v)| (i + 1, v)).collect(),
        });
    }
    for node in sub_x {
        let mask = node.mask << 1;
        let (wl, cond) = model_colift(&s.u, &node.delta, mask, tol)?;
        log.insert(
            format!("colift_condition_{path}{mask:0width$b}", width = n),
            cond,
        );
        let mut v: BTreeMap<usize, Operator> =
            node.v.into_iter().map(|(i, v)| (i + 1, v)).collect();
        for (i, vi) in &v {
            log.insert(
                format!("colift_commutation_{path}{mask:0width$b}_{}", i, width = n),
                dist(&(&wl * vi), &(vi * &wl)),
            );
        }
        v.insert(0, wl);
        out.push(Node {
            mask,
            delta: &node.delta * &s.qm,
            v,
        });
    }
    out.sort_by_key(|b| b.mask);
    Ok(out)
}

/// Lifts a co-isometry U through a block with defect Δ: returns W with
/// W*Δ = ΔU* and the residual of the lift condition UΔ*ΔU* = Δ*Δ.
pub fn model_colift(
    u: &Operator,
    delta: &Operator,
    mask: usize,
    tol: f64,
) -> Result<(Operator, f64)> {
    let g = delta.adjoint() * delta;
    let residual = dist(&(u * &g * u.adjoint()), &g);
    if residual > tol.max(POSITIVITY_TOL) {
        return Err(Error::LiftConditionFailed { mask, residual });
    }
    if delta.nrows() == 0 {
        return Ok((zeros(0, 0), residual));
    }
    let wl = douglas_solve(delta, &(delta * u.adjoint()), POSITIVITY_TOL).map_err(|e| {
        Error::DouglasPreconditionFailed {
            stage: format!("co-lift for mask {mask:b}"),
            source: Box::new(e),
        }
    })?;
    Ok((wl, residual))
}

pub fn general_model(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    degrees: &[usize],
    tol: f64,
) -> Result<DilationResult> {
    general_model_with_cap(t, w, degrees, tol, DEFAULT_BLOCK_CAP)
}

/// The 2^n-block model ⊕_Λ Π_Λ with R_i^Λ = M_{z_i} for i ∈ Λ and I ⊗ V_i^Λ
/// otherwise, built by splitting on the first coordinate and recursing on
/// the lifted tuples.
pub fn general_model_with_cap(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    degrees: &[usize],
    tol: f64,
    cap: usize,
) -> Result<DilationResult> {
    let n = t.n();
    if w.n() != n || degrees.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: w.n().min(degrees.len()),
        });
    }
    let d = t.dim();
    let needed = (1usize << n).saturating_mul(d);
    if needed > cap {
        return Err(Error::BlockBudgetExceeded { needed, cap });
    }
    let rep = is_w_hypercontraction(t, w, &dyadic_grid(n, 2), DEFECT_TERMS, POSITIVITY_TOL)?;
    if !rep.verdict {
        return Err(Error::NotHypercontractive(format!(
            "positivity fails for weights {w}"
        )));
    }
    let mut residuals = BTreeMap::new();
    let nodes = recurse(t.ops(), d, w.weights(), tol, &mut residuals, "")?;

    let mut blocks = Vec::with_capacity(nodes.len());
    let mut layout = Vec::with_capacity(nodes.len());
    let mut maps = Vec::with_capacity(nodes.len());
    let mut model: Vec<Vec<Operator>> = vec![Vec::new(); n];
    let mut offset = 0;
    for node in nodes {
        let lam = bits(node.mask, n);
        let e = node.delta.nrows();
        let space = TruncatedSpace::new(
            w.restrict(&lam),
            lam.iter().map(|&i| degrees[i]).collect(),
            e,
        )?;
        let sub: Vec<&Operator> = lam.iter().map(|&i| &t.ops()[i]).collect();
        let mut rows = Vec::with_capacity(space.monomials());
        for a in 0..space.monomials() {
            let alpha = space.multi_index(a);
            let scale = 1.0 / space.weight(&alpha).sqrt();
            rows.push(&node.delta * adjoint_power(&sub, &alpha, d) * c64(scale, 0.0));
        }
        maps.push(vstack(&rows, d));
        for (i, slot) in model.iter_mut().enumerate() {
            let r = match lam.iter().position(|&j| j == i) {
                Some(pos) => shift_matrix(&space, pos)?,
                None => kron(&identity(space.monomials()), &node.v[&i]),
            };
            slot.push(r);
        }
        let label = if lam.is_empty() {
            "tail".to_string()
        } else {
            format!("bergman{:?}", lam.iter().map(|i| i + 1).collect::<Vec<_>>())
        };
        layout.push(BlockLayout {
            label,
            mask: Some(node.mask),
            offset,
            dim: space.dim(),
            e_dim: e,
            space: Some(space.clone()),
        });
        offset += space.dim();
        blocks.push(LambdaBlock {
            mask: node.mask,
            delta: node.delta,
            e_dim: e,
            v: node.v,
        });
    }
    let map = vstack(&maps, d);
    let model_ops: Vec<Operator> = model.iter().map(|parts| direct_sum(parts)).collect();

    let iso = dist(&(map.adjoint() * &map), &identity(d));
    residuals.insert("isometry".to_string(), iso);
    for (i, (ti, r)) in t.ops().iter().zip(&model_ops).enumerate() {
        residuals.insert(
            format!("intertwining_{}", i + 1),
            dist(&(&map * ti.adjoint()), &(r.adjoint() * &map)),
        );
        residuals.insert(
            format!("model_norm_excess_{}", i + 1),
            (op_norm(r) - 1.0).max(0.0),
        );
    }
    for b in &blocks {
        let tag = format!("{:0width$b}", b.mask, width = n);
        let lam = bits(b.mask, n);
        residuals.insert(
            format!("delta_limit_{tag}"),
            dist(&(b.delta.adjoint() * &b.delta), &double_limit(t, w, &lam)?),
        );
        for (i, vi) in &b.v {
            let ti = &t.ops()[*i];
            residuals.insert(
                format!("delta_intertwining_{tag}_{}", i + 1),
                dist(&(&b.delta * ti.adjoint()), &(vi.adjoint() * &b.delta)),
            );
            if vi.nrows() > 0 {
                residuals.insert(
                    format!("v_coisometry_{tag}_{}", i + 1),
                    dist(&(vi * vi.adjoint()), &identity(vi.nrows())),
                );
            }
        }
    }
    for mask in 0..1usize << (n - 1) {
        let lam: Vec<usize> = bits(mask, n - 1).into_iter().map(|i| i + 1).collect();
        let (p1, p2) = useful_lemma_check(t, w, &lam, tol)?;
        let tag = format!("{mask:0width$b}", width = n.max(2) - 1);
        residuals.insert(format!("useful_lemma_i_{tag}"), p1);
        residuals.insert(format!("useful_lemma_ii_{tag}"), p2);
    }
    if iso > tol {
        return Err(Error::IsometryResidualTooLarge {
            residual: iso,
            budget: tol,
        });
    }
    Ok(DilationResult {
        map,
        model_ops,
        block_layout: layout,
        residuals,
        blocks,
    })
}

/// lim_β T_{Λ^c}^β D_{W_Λ,T_Λ}(e) T_{Λ^c}^{*β}, computed straight from T.
fn double_limit(t: &OperatorTuple, w: &MultiWeightSpec, lam: &[usize]) -> Result<Operator> {
    let d = t.dim();
    let sub: Vec<Operator> = lam.iter().map(|&i| t.ops()[i].clone()).collect();
    let core = defect_at_one(&sub, &w.restrict(lam), d)?;
    let rest: Vec<&Operator> = (0..t.n())
        .filter(|i| !lam.contains(i))
        .map(|i| &t.ops()[i])
        .collect();
    Ok(iterated_tail(&rest, &core))
}

/// Residuals of D·D_{W_Λ,A_Λ}(e)·D = D_{W_{Λ∪1},T_{Λ∪1}}(e) and
/// Q·D_{W_Λ,X_Λ}(e)·Q = lim T_1^k D_{W_Λ,T_Λ}(e) T_1^{*k}, for Λ among the
/// coordinates after the first.
pub fn useful_lemma_check(
    t: &OperatorTuple,
    w: &MultiWeightSpec,
    lam: &[usize],
    _tol: f64,
) -> Result<(f64, f64)> {
    if lam.contains(&0) || lam.iter().any(|&i| i >= t.n()) {
        return Err(Error::Shape(format!(
            "subset {lam:?} must lie in the coordinates after the first"
        )));
    }
    let d = t.dim();
    let t1 = &t.ops()[0];
    let s = split(t1, &w.weights()[0])?;
    let wl = w.restrict(lam);
    let mut a = Vec::new();
    let mut x = Vec::new();
    for &i in lam {
        a.push(intertwiner(&s.dm, &t.ops()[i], format!("A_{}", i + 1))?);
        x.push(intertwiner(&s.qm, &t.ops()[i], format!("X_{}", i + 1))?);
    }
    let da = defect_at_one(&a, &wl, s.dm.nrows())?;
    let mut with_one = vec![0];
    with_one.extend_from_slice(lam);
    let ops1: Vec<Operator> = with_one.iter().map(|&i| t.ops()[i].clone()).collect();
    let rhs1 = defect_at_one(&ops1, &w.restrict(&with_one), d)?;
    let part1 = dist(&(s.dm.adjoint() * da * &s.dm), &rhs1);

    let dx = defect_at_one(&x, &wl, s.qm.nrows())?;
    let ops_l: Vec<Operator> = lam.iter().map(|&i| t.ops()[i].clone()).collect();
    let dt = defect_at_one(&ops_l, &wl, d)?;
    let rhs2 = iterated_tail(&[t1], &dt);
    let part2 = dist(&(s.qm.adjoint() * dx * &s.qm), &rhs2);
    Ok((part1, part2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::pure_dilation;
    use crate::gen;

    fn w(s: &str) -> MultiWeightSpec {
        s.parse().unwrap()
    }

    fn block(r: &DilationResult, mask: usize) -> &LambdaBlock {
        r.blocks.iter().find(|b| b.mask == mask).unwrap()
    }

    #[test]
    fn one_variable_base_case() {
        let u = gen::commuting_unitaries(4, 2, 1).ops()[0].clone();
        let j = gen::nilpotent_tuple(4, 3, 1).ops()[0].clone();
        let single = OperatorTuple::new(vec![direct_sum(&[u, j])], 1e-10).unwrap();
        let r = general_model(&single, &w("hardy"), &[8], 1e-9).unwrap();
        assert_eq!(r.blocks.len(), 2);
        let s = split(&single.ops()[0], &WeightSpec::Hardy).unwrap();
        assert!(
            dist(
                &(block(&r, 1).delta.adjoint() * &block(&r, 1).delta),
                &(s.dm.adjoint() * &s.dm)
            ) < 1e-12
        );
        assert!(
            dist(
                &(block(&r, 0).delta.adjoint() * &block(&r, 0).delta),
                &(s.qm.adjoint() * &s.qm)
            ) < 1e-12
        );
        // The lifted co-isometry is the tail co-isometry itself.
        assert!(dist(&block(&r, 0).v[&0], &s.u) < 1e-12);
    }

    #[test]
    fn pure_tuples_only_keep_the_full_block() {
        let t = gen::nilpotent_tuple(9, 4, 2);
        let r = general_model(&t, &w("bergman:2,hardy"), &[4, 4], 1e-9).unwrap();
        for b in &r.blocks {
            if b.mask != 3 {
                assert_eq!(b.e_dim, 0, "mask {}", b.mask);
            }
        }
        let p = pure_dilation(&t, &w("bergman:2,hardy"), &[4, 4], 1e-9).unwrap();
        let g = &block(&r, 3).delta;
        let full: Operator = r
            .map
            .rows(r.block_layout[3].offset, r.block_layout[3].dim)
            .into_owned();
        // Both are isometric with the same Gram data.
        assert!(dist(&(full.adjoint() * &full), &(p.map.adjoint() * &p.map)) < 1e-12);
        assert!(g.nrows() > 0);
    }

    #[test]
    fn unitaries_only_keep_the_tail() {
        let t = gen::commuting_unitaries(6, 3, 2);
        let r = general_model(&t, &w("hardy,bergman:2"), &[3, 3], 1e-9).unwrap();
        for b in &r.blocks {
            assert_eq!(b.e_dim, if b.mask == 0 { 3 } else { 0 });
        }
        assert!(r.residuals["isometry"] < 1e-12);
        assert!(r.max_residual("intertwining") < 1e-12);
    }

    #[test]
    fn four_block_pair_fills_every_block() {
        let t = gen::four_block_pair(1);
        let r = general_model(&t, &w("hardy,hardy"), &[6, 6], 1e-9).unwrap();
        assert!(r.blocks.iter().all(|b| b.e_dim > 0));
        assert!(r.residuals["isometry"] < 1e-10);
        assert!(r.max_residual("intertwining") < 1e-10);
        assert!(r.max_residual("delta_limit") < 1e-8);
        assert!(r.max_residual("delta_intertwining") < 1e-8);
        assert!(r.max_residual("useful_lemma") < 1e-8);
        assert!(r.max_residual("model_norm_excess") < 1e-10);
    }

    #[test]
    fn colift_of_identity_is_identity() {
        let delta = gen::Lcg::new(3).gaussian_matrix(2, 3);
        let (wl, cond) = model_colift(&identity(3), &delta, 0, 1e-9).unwrap();
        assert!(cond < 1e-12);
        // W acts as the identity on ran Δ.
        assert!(dist(&(wl.adjoint() * &delta), &delta) < 1e-12);
        let (wz, _) = model_colift(&identity(3), &zeros(0, 3), 0, 1e-9).unwrap();
        assert_eq!(wz.nrows(), 0);
    }

    #[test]
    fn colift_condition_is_checked() {
        let u = gen::Lcg::new(5).unitary(2);
        let mut delta = zeros(1, 2);
        delta[(0, 0)] = c64(1.0, 0.0);
        assert!(matches!(
            model_colift(&u, &delta, 2, 1e-9),
            Err(Error::LiftConditionFailed { mask: 2, .. })
        ));
    }

    #[test]
    fn useful_lemma_trivial_and_nilpotent() {
        let t = gen::nilpotent_tuple(4, 4, 3);
        let ww = w("bergman:2,hardy,bergman:3");
        for lam in [vec![], vec![1], vec![2], vec![1, 2]] {
            let (a, b) = useful_lemma_check(&t, &ww, &lam, 1e-9).unwrap();
            assert!(a < 1e-10 && b < 1e-12, "{lam:?}: {a} {b}");
        }
    }

    #[test]
    fn budget_cap() {
        let t = gen::nilpotent_tuple(1, 4, 2);
        assert!(matches!(
            general_model_with_cap(&t, &w("hardy,hardy"), &[3, 3], 1e-9, 10),
            Err(Error::BlockBudgetExceeded {
                needed: 16,
                cap: 10
            })
        ));
    }
}
