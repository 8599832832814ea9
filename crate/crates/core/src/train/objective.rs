use ndarray::Axis;

use super::config::TrainConfig;
use crate::autograd::{NodeId, ParamKind, Tape};
use crate::data::ObservationalDataset;
use crate::disentangle::disentanglement_penalty;
use crate::error::{Error, Result};
use crate::zoo::{mmd_linear_node, targeted_regularisation_node, Family, ForwardNodes, Model, PROPENSITY_CLIP};

/// Mean squared error of each unit against the head for its observed arm.
pub fn factual_loss(y: &[f64], t: &[f64], mu0_hat: &[f64], mu1_hat: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(t)
        .zip(mu0_hat.iter().zip(mu1_hat))
        .map(|((&y, &t), (&m0, &m1))| {
            let pred = if t == 1.0 { m1 } else { m0 };
            (y - pred).powi(2)
        })
        .sum::<f64>()
        / n
}

/// Mean binary cross-entropy of clipped propensities.
pub fn propensity_loss(t: &[f64], pi_hat: &[f64]) -> f64 {
    let n = t.len() as f64;
    t.iter()
        .zip(pi_hat)
        .map(|(&t, &p)| {
            let p = p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

fn bce_node(tape: &mut Tape, t: &ndarray::Array1<f64>, pi: NodeId) -> Result<NodeId> {
    let t1 = tape.constant(t.clone().insert_axis(Axis(1)));
    let t0 = tape.constant(t.mapv(|v| 1.0 - v).insert_axis(Axis(1)));
    let log_p = tape.ln(pi);
    let neg = tape.scale(pi, -1.0);
    let one_minus = tape.add_scalar(neg, 1.0);
    let log_q = tape.ln(one_minus);
    let a = tape.mul(t1, log_p)?;
    let b = tape.mul(t0, log_q)?;
    let ll = tape.add(a, b)?;
    let m = tape.mean(ll);
    Ok(tape.scale(m, -1.0))
}

/// Every term of the training objective recorded on one tape.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParts {
    pub total: NodeId,
    pub outcome: NodeId,
    pub propensity: Option<NodeId>,
    pub l2: Option<NodeId>,
    pub disentangle: Option<NodeId>,
    pub mmd: Option<NodeId>,
    /// The batch held only one treatment group, so the discrepancy was dropped.
    pub mmd_skipped: bool,
    pub targeted: Option<NodeId>,
    pub forward: ForwardNodes,
}

/// Records the full objective for a batch. `lambda_t` only scales the
/// gradient reversal; it never multiplies a loss term.
pub fn total_objective(
    tape: &mut Tape,
    model: &Model,
    batch: &ObservationalDataset,
    lambda_t: f64,
    config: &TrainConfig,
) -> Result<ObjectiveParts> {
    let family = model.family();
    let x = tape.constant(batch.x.clone());
    let fwd = model.forward_tape(tape, x, lambda_t, Some(&batch.t))?;
    let factual = fwd.factual.expect("treatment supplied");
    let y = tape.constant(batch.y.clone().insert_axis(Axis(1)));

    let resid = tape.sub(y, factual)?;
    let sq = tape.square(resid);
    let outcome = tape.mean(sq);

    let (w_y, w_t) = config.supervised_weights();
    let mut total = tape.scale(outcome, w_y);

    let propensity = match fwd.pi {
        Some(pi) => {
            let lt = bce_node(tape, &batch.t, pi)?;
            let weighted = tape.scale(lt, w_t);
            total = tape.add(total, weighted)?;
            Some(lt)
        }
        None => None,
    };

    let l2 = if config.l2_lambda1 > 0.0 {
        let mut acc: Option<NodeId> = None;
        let weights: Vec<_> = model
            .params
            .iter()
            .filter(|(_, p)| p.kind == ParamKind::Weight)
            .map(|(id, _)| id)
            .collect();
        for id in weights {
            let w = tape.param(&model.params, id);
            let s = tape.square(w);
            let s = tape.sum(s);
            acc = Some(match acc {
                Some(a) => tape.add(a, s)?,
                None => s,
            });
        }
        match acc {
            Some(r2) => {
                let weighted = tape.scale(r2, config.l2_lambda1);
                total = tape.add(total, weighted)?;
                Some(r2)
            }
            None => None,
        }
    } else {
        None
    };

    let disentangle = if family.is_disentangled() && config.ortho_lambda2 > 0.0 {
        let nodes: Vec<NodeId> = model.contribution_nodes(tape)?.into_iter().map(|(_, n)| n).collect();
        let pen = disentanglement_penalty(tape, &nodes)?;
        let weighted = tape.scale(pen, config.ortho_lambda2);
        total = tape.add(total, weighted)?;
        Some(pen)
    } else {
        None
    };

    let mut mmd = None;
    let mut mmd_skipped = false;
    if family == Family::Cfrnet && model.spec().mmd_weight > 0.0 {
        let rep = fwd.shared_rep.expect("cfrnet records its representation");
        match mmd_linear_node(tape, rep, &batch.t)? {
            Some(m) => {
                let weighted = tape.scale(m, model.spec().mmd_weight);
                total = tape.add(total, weighted)?;
                mmd = Some(m);
            }
            None => mmd_skipped = true,
        }
    }

    let targeted = if family == Family::DragonnetTr {
        let eps = fwd
            .epsilon
            .ok_or_else(|| Error::InvalidSpec("dragonnet_tr is missing its epsilon".into()))?;
        let g = fwd.pi.expect("dragonnet_tr has a propensity head");
        let tr = targeted_regularisation_node(tape, y, &batch.t, factual, g, eps)?;
        let weighted = tape.scale(tr, model.spec().tr_weight);
        total = tape.add(total, weighted)?;
        Some(tr)
    } else {
        None
    };

    Ok(ObjectiveParts {
        total,
        outcome,
        propensity,
        l2,
        disentangle,
        mmd,
        mmd_skipped,
        targeted,
        forward: fwd,
    })
}

/// Model-selection criterion: the weighted supervised losses on held-out rows.
pub fn validation_loss(model: &Model, data: &ObservationalDataset, config: &TrainConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(data.x.clone());
    let fwd = model.forward_tape(&mut tape, x, 0.0, Some(&data.t))?;
    let factual = tape.value(fwd.factual.expect("treatment supplied"));
    let n = data.len() as f64;
    let ly = data
        .y
        .iter()
        .zip(factual.column(0))
        .map(|(y, f)| (y - f).powi(2))
        .sum::<f64>()
        / n;
    let (w_y, w_t) = config.supervised_weights();
    let mut score = w_y * ly;
    if let Some(pi) = fwd.pi {
        let pi: Vec<f64> = tape.value(pi).column(0).to_vec();
        score += w_t * propensity_loss(data.t.as_slice().expect("contiguous"), &pi);
    }
    Ok(score)
}
