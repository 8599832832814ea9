//! Family-specific loss terms: the linear discrepancy penalty of the
//! counterfactual-regression network and the targeted regulariser.

use ndarray::{Array1, Array2};

use super::model::PROPENSITY_CLIP;
use crate::autograd::{Matrix, NodeId, Tape};
use crate::error::{Error, Result};

/// Squared Euclidean distance between the treated and control group means.
pub fn mmd_linear(rep_treated: &Matrix, rep_control: &Matrix) -> Result<f64> {
    if rep_treated.nrows() == 0 || rep_control.nrows() == 0 {
        return Err(Error::InvalidConfig("discrepancy needs both groups non-empty".into()));
    }
    if rep_treated.ncols() != rep_control.ncols() {
        return Err(Error::Shape {
            op: "mmd_linear",
            lhs: rep_treated.dim(),
            rhs: rep_control.dim(),
        });
    }
    let mt = rep_treated.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let mc = rep_control.mean_axis(ndarray::Axis(0)).expect("non-empty");
    Ok((&mt - &mc).mapv(|v| v * v).sum())
}

/// Differentiable linear discrepancy over a batch representation split by `t`.
/// Returns `None` when the batch lacks one of the groups; the caller logs it.
pub fn mmd_linear_node(tape: &mut Tape, rep: NodeId, t: &Array1<f64>) -> Result<Option<NodeId>> {
    let n1 = t.iter().filter(|&&v| v > 0.5).count();
    let n0 = t.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Ok(None);
    }
    // (1/n1) t - (1/n0) (1 - t), as a 1 x b row: one matmul gives the mean difference
    let weights = Array2::from_shape_fn((1, t.len()), |(_, i)| {
        if t[i] > 0.5 {
            1.0 / n1 as f64
        } else {
            -1.0 / n0 as f64
        }
    });
    let w = tape.constant(weights);
    let diff = tape.matmul(w, rep)?;
    let sq = tape.square(diff);
    Ok(Some(tape.sum(sq)))
}

fn clip(g: f64) -> f64 {
    g.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
}

/// Mean squared error of the epsilon-perturbed factual prediction
/// `q + eps * (t/g - (1-t)/(1-g))`.
pub fn targeted_regularisation(y: &[f64], t: &[f64], q_t: &[f64], g: &[f64], epsilon: f64) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(t)
        .zip(q_t)
        .zip(g)
        .map(|(((&y, &t), &q), &g)| {
            let g = clip(g);
            let h = t / g - (1.0 - t) / (1.0 - g);
            let y_tilde = q + epsilon * h;
            (y - y_tilde).powi(2)
        })
        .sum::<f64>()
        / n
}

pub fn targeted_regularisation_node(
    tape: &mut Tape,
    y: NodeId,
    t: &Array1<f64>,
    q_t: NodeId,
    g: NodeId,
    epsilon: NodeId,
) -> Result<NodeId> {
    let t1 = tape.constant(t.clone().insert_axis(ndarray::Axis(1)));
    let t0 = tape.constant(t.mapv(|v| 1.0 - v).insert_axis(ndarray::Axis(1)));
    let inv_g = tape.recip(g);
    let neg_g = tape.scale(g, -1.0);
    let one_minus_g = tape.add_scalar(neg_g, 1.0);
    let inv_1mg = tape.recip(one_minus_g);
    let a = tape.mul(t1, inv_g)?;
    let b = tape.mul(t0, inv_1mg)?;
    let h = tape.sub(a, b)?;
    let perturb = tape.matmul(h, epsilon)?;
    let y_tilde = tape.add(q_t, perturb)?;
    let resid = tape.sub(y, y_tilde)?;
    let sq = tape.square(resid);
    Ok(tape.mean(sq))
}
