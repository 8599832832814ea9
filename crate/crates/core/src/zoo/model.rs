use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};

use super::spec::{Activation, EstimatorSpec, Family, LayerSpec, Role};
use crate::autograd::{glorot_uniform, Matrix, NodeId, ParamId, ParamKind, ParamStore, Tape};
use crate::disentangle::{contribution_node, Factor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Propensity outputs are clipped into this range before any log-loss.
pub const PROPENSITY_CLIP: f64 = 1e-7;

#[derive(Debug, Clone)]
struct Dense {
    weight: ParamId,
    bias: ParamId,
    activation: Activation,
}

#[derive(Debug, Clone)]
struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    fn build(
        role: Role,
        input: usize,
        layers: &[LayerSpec],
        store: &mut ParamStore,
        rng: &mut SeededRng,
    ) -> Self {
        let mut fan_in = input;
        let layers = layers
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let w = glorot_uniform(fan_in, spec.width, rng);
                let weight = store.add(format!("{}.{i}.w", role.key()), w, ParamKind::Weight);
                let bias = store.add(
                    format!("{}.{i}.b", role.key()),
                    Array2::zeros((1, spec.width)),
                    ParamKind::Bias,
                );
                fan_in = spec.width;
                Dense {
                    weight,
                    bias,
                    activation: spec.activation,
                }
            })
            .collect();
        Self { layers }
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for layer in &self.layers {
            let w = tape.param(store, layer.weight);
            let b = tape.param(store, layer.bias);
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = match layer.activation {
                Activation::Elu => tape.elu(z),
                Activation::Identity => z,
                Activation::Sigmoid => tape.sigmoid(z),
            };
        }
        Ok(h)
    }

    fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weight, l.bias])
    }

    fn weights(&self) -> Vec<ParamId> {
        self.layers.iter().map(|l| l.weight).collect()
    }
}

/// Outputs of one forward pass recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    /// Control outcome, absent when only the factual arm was requested from an S-learner.
    pub mu0: Option<NodeId>,
    pub mu1: Option<NodeId>,
    /// Outcome prediction for the observed arm, present when treatments were supplied.
    pub factual: Option<NodeId>,
    /// Clipped propensity.
    pub pi: Option<NodeId>,
    /// Shared (confounder) representation, used by the discrepancy penalty.
    pub shared_rep: Option<NodeId>,
    pub epsilon: Option<NodeId>,
}

/// Predictions for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PredBundle {
    pub mu0_hat: Array1<f64>,
    pub mu1_hat: Array1<f64>,
    pub pi_hat: Option<Array1<f64>>,
}

impl PredBundle {
    pub fn len(&self) -> usize {
        self.mu0_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu0_hat.is_empty()
    }

    pub fn cate(&self) -> Array1<f64> {
        &self.mu1_hat - &self.mu0_hat
    }
}

/// An estimator architecture together with its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    spec: EstimatorSpec,
    input_dim: usize,
    pub params: ParamStore,
    nets: BTreeMap<Role, Mlp>,
    groups: BTreeMap<Role, Vec<ParamId>>,
}

fn column(values: &Array1<f64>) -> Matrix {
    values.clone().insert_axis(Axis(1))
}

impl Model {
    /// Allocates and initialises every parameter group for the family wiring.
    /// Groups are created in a fixed role order, so a "+" variant and its base
    /// family get identical initial weights from the same generator.
    pub fn build(spec: &EstimatorSpec, input_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input dimension must be positive".into()));
        }
        let mut store = ParamStore::new();
        let mut nets = BTreeMap::new();

        for (&role, layers) in &spec.rep_layers {
            nets.insert(role, Mlp::build(role, input_dim, layers, &mut store, rng));
        }
        let width = |role: Role| spec.rep_width(role).unwrap_or(0);
        for (&role, layers) in &spec.head_layers {
            let fan_in = head_input_width(spec, role, input_dim, &width)?;
            nets.insert(role, Mlp::build(role, fan_in, layers, &mut store, rng));
        }

        let mut groups: BTreeMap<Role, Vec<ParamId>> = nets
            .iter()
            .map(|(&role, net)| (role, net.params().collect()))
            .collect();
        if spec.family == Family::DragonnetTr {
            let eps = store.add(
                Role::TrEpsilon.key(),
                Array2::from_elem((1, 1), spec.tr_epsilon_init),
                ParamKind::Scalar,
            );
            groups.insert(Role::TrEpsilon, vec![eps]);
        }

        Ok(Self {
            spec: spec.clone(),
            input_dim,
            params: store,
            nets,
            groups,
        })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn groups(&self) -> &BTreeMap<Role, Vec<ParamId>> {
        &self.groups
    }

    pub fn group(&self, role: Role) -> &[ParamId] {
        self.groups.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Input width of the first layer of a network.
    pub fn first_layer_inputs(&self, role: Role) -> Option<usize> {
        let net = self.nets.get(&role)?;
        Some(self.params.get(net.layers[0].weight).shape().0)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    fn net(&self, role: Role) -> Result<&Mlp> {
        self.nets
            .get(&role)
            .ok_or_else(|| Error::InvalidSpec(format!("{} missing {}", self.spec.family, role.key())))
    }

    fn run(&self, tape: &mut Tape, role: Role, x: NodeId) -> Result<NodeId> {
        self.net(role)?.forward(tape, &self.params, x)
    }

    /// Records a forward pass. When `treatment` is given the factual prediction
    /// is also recorded; for an S-learner only the factual arm is evaluated.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        lambda: f64,
        treatment: Option<&Array1<f64>>,
    ) -> Result<ForwardNodes> {
        let (rows, cols) = tape.shape(x);
        if cols != self.input_dim {
            return Err(Error::Shape {
                op: "forward",
                lhs: (rows, cols),
                rhs: (rows, self.input_dim),
            });
        }
        if let Some(t) = treatment {
            if t.len() != rows {
                return Err(Error::Shape {
                    op: "forward",
                    lhs: (rows, cols),
                    rhs: (t.len(), 1),
                });
            }
        }
        if !(lambda >= 0.0) {
            return Err(Error::NegativeLambda(lambda));
        }

        let mut out = ForwardNodes {
            mu0: None,
            mu1: None,
            factual: None,
            pi: None,
            shared_rep: None,
            epsilon: None,
        };

        match self.spec.family {
            Family::Slearner => {
                let with_arm = |tape: &mut Tape, arm: Matrix| -> Result<NodeId> {
                    let t_col = tape.constant(arm);
                    let xt = tape.concat(&[x, t_col])?;
                    self.run(tape, Role::Outcome, xt)
                };
                match treatment {
                    Some(t) => out.factual = Some(with_arm(tape, column(t))?),
                    None => {
                        out.mu0 = Some(with_arm(tape, Array2::zeros((rows, 1)))?);
                        out.mu1 = Some(with_arm(tape, Array2::ones((rows, 1)))?);
                    }
                }
                return Ok(out);
            }
            Family::Tlearner => {
                out.mu0 = Some(self.run(tape, Role::HeadMu0, x)?);
                out.mu1 = Some(self.run(tape, Role::HeadMu1, x)?);
            }
            Family::Tarnet | Family::Cfrnet | Family::Dragonnet | Family::DragonnetTr => {
                let phi = self.run(tape, Role::RepC, x)?;
                out.shared_rep = Some(phi);
                out.mu0 = Some(self.run(tape, Role::HeadMu0, phi)?);
                out.mu1 = Some(self.run(tape, Role::HeadMu1, phi)?);
                if self.spec.family.has_propensity_head() {
                    let into_pi = self.reverse_if_adversarial(tape, phi, lambda)?;
                    out.pi = Some(self.propensity(tape, into_pi)?);
                }
            }
            Family::Drcfr => {
                let phi_i = self.run(tape, Role::RepI, x)?;
                let phi_c = self.run(tape, Role::RepC, x)?;
                let phi_a = self.run(tape, Role::RepA, x)?;
                out.shared_rep = Some(phi_c);
                let h = tape.concat(&[phi_c, phi_a])?;
                out.mu0 = Some(self.run(tape, Role::HeadMu0, h)?);
                out.mu1 = Some(self.run(tape, Role::HeadMu1, h)?);
                let c_pi = self.reverse_if_adversarial(tape, phi_c, lambda)?;
                let g = tape.concat(&[phi_i, c_pi])?;
                out.pi = Some(self.propensity(tape, g)?);
            }
            Family::Snet => {
                let phi_c = self.run(tape, Role::RepC, x)?;
                let phi_i = self.run(tape, Role::RepI, x)?;
                let phi_a = self.run(tape, Role::RepA, x)?;
                let phi_a1 = self.run(tape, Role::RepA1, x)?;
                let phi_a0 = self.run(tape, Role::RepA0, x)?;
                out.shared_rep = Some(phi_c);
                let h0 = tape.concat(&[phi_c, phi_a, phi_a0])?;
                let h1 = tape.concat(&[phi_c, phi_a, phi_a1])?;
                out.mu0 = Some(self.run(tape, Role::HeadMu0, h0)?);
                out.mu1 = Some(self.run(tape, Role::HeadMu1, h1)?);
                let c_pi = self.reverse_if_adversarial(tape, phi_c, lambda)?;
                let g = tape.concat(&[phi_i, c_pi])?;
                out.pi = Some(self.propensity(tape, g)?);
            }
        }

        if let Some(eps) = self.groups.get(&Role::TrEpsilon) {
            out.epsilon = Some(tape.param(&self.params, eps[0]));
        }
        if let (Some(t), Some(mu0), Some(mu1)) = (treatment, out.mu0, out.mu1) {
            let t1 = tape.constant(column(t));
            let t0 = tape.constant(column(&t.mapv(|v| 1.0 - v)));
            let a = tape.mul(t1, mu1)?;
            let b = tape.mul(t0, mu0)?;
            out.factual = Some(tape.add(a, b)?);
        }
        Ok(out)
    }

    fn reverse_if_adversarial(&self, tape: &mut Tape, rep: NodeId, lambda: f64) -> Result<NodeId> {
        if self.spec.adversarial {
            tape.grad_reverse(rep, lambda)
        } else {
            Ok(rep)
        }
    }

    fn propensity(&self, tape: &mut Tape, input: NodeId) -> Result<NodeId> {
        let raw = self.run(tape, Role::HeadPi, input)?;
        Ok(tape.clamp(raw, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP))
    }

    /// Differentiable contribution vectors of every representation network,
    /// for the disentangled families.
    pub fn contribution_nodes(&self, tape: &mut Tape) -> Result<Vec<(Factor, NodeId)>> {
        let mut out = Vec::new();
        for (&role, net) in &self.nets {
            if let Some(factor) = role.factor() {
                out.push((factor, contribution_node(tape, &self.params, &net.weights())?));
            }
        }
        Ok(out)
    }

    /// Weight chains of each representation network.
    pub fn contribution_chains(&self) -> Vec<(Factor, Vec<ParamId>)> {
        self.nets
            .iter()
            .filter_map(|(&role, net)| role.factor().map(|f| (f, net.weights())))
            .collect()
    }

    /// Evaluates both outcome surfaces and the propensity for a batch.
    pub fn forward(&self, x: &Matrix, lambda: f64) -> Result<PredBundle> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite covariates".into()));
        }
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let nodes = self.forward_tape(&mut tape, xn, lambda, None)?;
        let col = |id: Option<NodeId>| id.map(|n| tape.value(n).column(0).to_owned());
        Ok(PredBundle {
            mu0_hat: col(nodes.mu0).expect("both arms evaluated"),
            mu1_hat: col(nodes.mu1).expect("both arms evaluated"),
            pi_hat: col(nodes.pi),
        })
    }
}

fn head_input_width(
    spec: &EstimatorSpec,
    role: Role,
    input_dim: usize,
    width: &dyn Fn(Role) -> usize,
) -> Result<usize> {
    use Family::*;
    let w = match (spec.family, role) {
        (Slearner, Role::Outcome) => input_dim + 1,
        (Tlearner, Role::HeadMu0 | Role::HeadMu1) => input_dim,
        (Tarnet | Cfrnet | Dragonnet | DragonnetTr, Role::HeadMu0 | Role::HeadMu1 | Role::HeadPi) => {
            width(Role::RepC)
        }
        (Drcfr, Role::HeadMu0 | Role::HeadMu1) => width(Role::RepC) + width(Role::RepA),
        (Drcfr | Snet, Role::HeadPi) => width(Role::RepI) + width(Role::RepC),
        (Snet, Role::HeadMu0) => width(Role::RepC) + width(Role::RepA) + width(Role::RepA0),
        (Snet, Role::HeadMu1) => width(Role::RepC) + width(Role::RepA) + width(Role::RepA1),
        (family, role) => {
            return Err(Error::InvalidSpec(format!("{family} has no {} head", role.key())));
        }
    };
    if w == 0 {
        return Err(Error::InvalidSpec(format!(
            "{} head input for {} resolves to zero width",
            spec.family,
            role.key()
        )));
    }
    Ok(w)
}
