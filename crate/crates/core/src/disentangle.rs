//! Variable-contribution vectors and the orthogonality penalty that pushes
//! each representation network to draw on a disjoint subset of covariates.
//!
//! The contribution of input variable `i` to a representation is approximated
//! by the linear product of the network's weight matrices, ignoring biases and
//! activations. Entries of the product are taken in absolute value before
//! averaging across output units, so opposite-signed paths cannot cancel.

use std::fmt;

use crate::autograd::{Matrix, NodeId, ParamId, ParamStore, Tape};
use crate::error::{Error, Result};

/// Latent factor a representation network is meant to capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    /// Instruments: drive treatment only.
    Instrument,
    /// Confounders: drive treatment and outcome.
    Confounder,
    /// Adjustment variables for both outcome surfaces.
    Adjustment,
    /// Adjustment variables for the control outcome only.
    ControlAdjustment,
    /// Adjustment variables for the treated outcome only.
    TreatedAdjustment,
}

impl Factor {
    pub fn label(self) -> &'static str {
        match self {
            Factor::Instrument => "I",
            Factor::Confounder => "C",
            Factor::Adjustment => "A",
            Factor::ControlAdjustment => "A0",
            Factor::TreatedAdjustment => "A1",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionVector {
    pub factor: Factor,
    pub wbar: Vec<f64>,
}

impl ContributionVector {
    pub fn dim(&self) -> usize {
        self.wbar.len()
    }
}

fn chain_product(layers: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = layers
        .split_first()
        .ok_or_else(|| Error::InvalidSpec("contribution chain is empty".into()))?;
    let mut prod = (*first).clone();
    for w in rest {
        if prod.ncols() != w.nrows() {
            return Err(Error::Shape {
                op: "contribution_vector",
                lhs: prod.dim(),
                rhs: w.dim(),
            });
        }
        prod = prod.dot(*w);
    }
    Ok(prod)
}

/// Row-mean of `|W_1 W_2 ... W_l|`, one entry per input variable.
pub fn contribution_vector(factor: Factor, layers: &[&Matrix]) -> Result<ContributionVector> {
    let prod = chain_product(layers)?;
    let cols = prod.ncols() as f64;
    let wbar = prod
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>() / cols)
        .collect();
    Ok(ContributionVector { factor, wbar })
}

fn check_lengths(contribs: &[ContributionVector]) -> Result<usize> {
    let d = contribs
        .first()
        .map(ContributionVector::dim)
        .ok_or_else(|| Error::InvalidSpec("no contribution vectors".into()))?;
    if let Some(bad) = contribs.iter().find(|c| c.dim() != d) {
        return Err(Error::Shape {
            op: "orthogonality_loss",
            lhs: (d, 1),
            rhs: (bad.dim(), 1),
        });
    }
    Ok(d)
}

/// Sum of dot products over every unordered pair of contribution vectors.
pub fn orthogonality_loss(contribs: &[ContributionVector]) -> Result<f64> {
    check_lengths(contribs)?;
    if contribs.len() < 2 {
        return Err(Error::InvalidSpec(
            "orthogonality needs at least two representations".into(),
        ));
    }
    let mut total = 0.0;
    for (i, a) in contribs.iter().enumerate() {
        for b in &contribs[i + 1..] {
            total += a.wbar.iter().zip(&b.wbar).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    Ok(total)
}

/// Soft constraint pulling every contribution vector to unit total mass.
pub fn ortho_regulariser(contribs: &[ContributionVector]) -> Result<f64> {
    check_lengths(contribs)?;
    Ok(contribs
        .iter()
        .map(|c| (c.wbar.iter().sum::<f64>() - 1.0).powi(2))
        .sum())
}

/// Differentiable contribution vector (d x 1) for the weight chain of one network.
pub fn contribution_node(tape: &mut Tape, store: &ParamStore, weights: &[ParamId]) -> Result<NodeId> {
    let (&first, rest) = weights
        .split_first()
        .ok_or_else(|| Error::InvalidSpec("contribution chain is empty".into()))?;
    let mut prod = tape.param(store, first);
    for &w in rest {
        let node = tape.param(store, w);
        prod = tape.matmul(prod, node)?;
    }
    let abs = tape.abs(prod);
    Ok(tape.row_mean(abs))
}

/// Differentiable `L_O + R_O` over the given contribution nodes.
pub fn disentanglement_penalty(tape: &mut Tape, contribs: &[NodeId]) -> Result<NodeId> {
    if contribs.len() < 2 {
        return Err(Error::InvalidSpec(
            "orthogonality needs at least two representations".into(),
        ));
    }
    let mut terms = Vec::new();
    for (i, &a) in contribs.iter().enumerate() {
        for &b in &contribs[i + 1..] {
            let prod = tape.mul(a, b)?;
            terms.push(tape.sum(prod));
        }
    }
    for &c in contribs {
        let s = tape.sum(c);
        let shifted = tape.add_scalar(s, -1.0);
        terms.push(tape.square(shifted));
    }
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    Ok(total)
}

/// Contribution vectors read straight from parameter values, for reporting.
pub fn contributions_from_store(
    store: &ParamStore,
    chains: &[(Factor, Vec<ParamId>)],
) -> Result<Vec<ContributionVector>> {
    chains
        .iter()
        .map(|(factor, ids)| {
            let mats: Vec<&Matrix> = ids.iter().map(|&id| &store.get(id).value).collect();
            contribution_vector(*factor, &mats)
        })
        .collect()
}
