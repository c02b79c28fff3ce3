use nalgebra::{DMatrix, DVector};

use super::family::{Family, McContext};
use super::Measures;
use crate::distributions::rng::mc_mean;
use crate::error::Result;
use crate::hypothesis::ConstraintMatrices;
use crate::linalg;
use crate::lp;

/// All distinct order rows of the given hypotheses stacked into one
/// hypothesis. Used to centre and scale the prior of the complement.
pub fn complement_anchor(orders: &[&ConstraintMatrices], p: usize) -> ConstraintMatrices {
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for h in orders {
        for i in 0..h.n_orders() {
            let row: Vec<f64> = h.ro.row(i).iter().copied().collect();
            let rhs = h.r_o[i];
            if !rows.iter().any(|(r, c)| *r == row && *c == rhs) {
                rows.push((row, rhs));
            }
        }
    }
    ConstraintMatrices::from_rows(p, &[], &rows).with_source("complement")
}

fn pairwise_disjoint(orders: &[&ConstraintMatrices]) -> bool {
    orders
        .iter()
        .enumerate()
        .all(|(i, a)| orders[i + 1..].iter().all(|b| lp::cones_disjoint(&a.ro, &a.r_o, &b.ro, &b.r_o)))
}

/// Measures of the complement of the order-only hypotheses among `hyps`.
/// Hypotheses with equality constraints have prior probability zero and do
/// not shrink the complement. `own` holds the already computed measures of
/// `hyps` (each under its own prior).
pub fn complement_measures(
    family: &dyn Family,
    hyps: &[ConstraintMatrices],
    own: &[Measures],
    ctx: &McContext,
) -> Result<Measures> {
    let p = family.space().len();
    let idx: Vec<usize> = (0..hyps.len()).filter(|&i| hyps[i].is_order_only()).collect();
    let orders: Vec<&ConstraintMatrices> = idx.iter().map(|&i| &hyps[i]).collect();
    match orders.len() {
        0 => return Ok(Measures::unit()),
        1 => {
            let m = own[idx[0]];
            return Ok(Measures {
                comp_o: (1.0 - m.comp_o).max(0.0),
                fit_o: (1.0 - m.fit_o).max(0.0),
                ..m.with_unit_equalities()
            });
        }
        _ => {}
    }
    let anchor = complement_anchor(&orders, p);
    if pairwise_disjoint(&orders) {
        let (mut comp, mut fit, mut comp_var, mut fit_var) = (0.0, 0.0, 0.0, 0.0);
        for (k, h) in orders.iter().enumerate() {
            let sub = McContext { stream: ctx.stream.child(100 + k as u64), ..*ctx };
            let m = family.measures(h, &anchor, &sub)?;
            comp += m.comp_o;
            fit += m.fit_o;
            comp_var += m.comp_o_se * m.comp_o_se;
            fit_var += m.fit_o_se * m.fit_o_se;
        }
        return Ok(Measures {
            log_comp_e: 0.0,
            log_fit_e: 0.0,
            comp_o: (1.0 - comp).max(0.0),
            fit_o: (1.0 - fit).max(0.0),
            comp_o_se: comp_var.sqrt(),
            fit_o_se: fit_var.sqrt(),
        });
    }
    // overlapping cones: estimate the union directly
    let a = linalg::vstack(&orders.iter().map(|h| &h.ro).collect::<Vec<&DMatrix<f64>>>(), p);
    let b = linalg::vstack_vec(&orders.iter().map(|h| &h.r_o).collect::<Vec<&DVector<f64>>>());
    let bounds: Vec<(usize, usize)> = orders
        .iter()
        .scan(0, |start, h| {
            let s = *start;
            *start += h.n_orders();
            Some((s, *start))
        })
        .collect();
    let outside = |theta: &DVector<f64>| -> f64 {
        let v = &a * theta - &b;
        let inside_any = bounds.iter().any(|&(s, e)| (s..e).all(|r| v[r] > 0.0));
        if inside_any {
            0.0
        } else {
            1.0
        }
    };
    let prior = family.sampler(&anchor, false, ctx)?;
    let post = family.sampler(&anchor, true, ctx)?;
    let comp = mc_mean(ctx.stream.child(0), ctx.n_draws, |rng| outside(&prior(rng)));
    let fit = mc_mean(ctx.stream.child(1), ctx.n_draws, |rng| outside(&post(rng)));
    Ok(Measures {
        log_comp_e: 0.0,
        log_fit_e: 0.0,
        comp_o: comp.mean(),
        fit_o: fit.mean(),
        comp_o_se: comp.se(),
        fit_o_se: fit.se(),
    })
}
