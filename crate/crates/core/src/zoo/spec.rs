use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::disentangle::Factor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Slearner,
    Tlearner,
    Tarnet,
    Cfrnet,
    Dragonnet,
    DragonnetTr,
    Drcfr,
    Snet,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Slearner,
        Family::Tlearner,
        Family::Tarnet,
        Family::Cfrnet,
        Family::Dragonnet,
        Family::DragonnetTr,
        Family::Drcfr,
        Family::Snet,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Family::Slearner => "slearner",
            Family::Tlearner => "tlearner",
            Family::Tarnet => "tarnet",
            Family::Cfrnet => "cfrnet",
            Family::Dragonnet => "dragonnet",
            Family::DragonnetTr => "dragonnet_tr",
            Family::Drcfr => "drcfr",
            Family::Snet => "snet",
        }
    }

    /// Families with a treatment classifier fed by a confounder representation.
    pub fn has_propensity_head(self) -> bool {
        matches!(
            self,
            Family::Dragonnet | Family::DragonnetTr | Family::Drcfr | Family::Snet
        )
    }

    pub fn is_disentangled(self) -> bool {
        matches!(self, Family::Drcfr | Family::Snet)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.key() == norm || (norm == "dragonnettr" && *f == Family::DragonnetTr))
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Identity,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn elu(width: usize) -> Self {
        Self {
            width,
            activation: Activation::Elu,
        }
    }

    pub fn linear_out() -> Self {
        Self {
            width: 1,
            activation: Activation::Identity,
        }
    }

    pub fn sigmoid_out() -> Self {
        Self {
            width: 1,
            activation: Activation::Sigmoid,
        }
    }
}

/// Parameter group. Representation groups correspond to the latent factors;
/// `Outcome` is the single joint network of the S-learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    RepI,
    RepC,
    RepA,
    RepA0,
    RepA1,
    Outcome,
    HeadMu0,
    HeadMu1,
    HeadPi,
    TrEpsilon,
}

impl Role {
    pub fn key(self) -> &'static str {
        match self {
            Role::RepI => "rep_I",
            Role::RepC => "rep_C",
            Role::RepA => "rep_A",
            Role::RepA0 => "rep_A0",
            Role::RepA1 => "rep_A1",
            Role::Outcome => "outcome",
            Role::HeadMu0 => "head_mu0",
            Role::HeadMu1 => "head_mu1",
            Role::HeadPi => "head_pi",
            Role::TrEpsilon => "tr_epsilon",
        }
    }

    pub fn factor(self) -> Option<Factor> {
        match self {
            Role::RepI => Some(Factor::Instrument),
            Role::RepC => Some(Factor::Confounder),
            Role::RepA => Some(Factor::Adjustment),
            Role::RepA0 => Some(Factor::ControlAdjustment),
            Role::RepA1 => Some(Factor::TreatedAdjustment),
            _ => None,
        }
    }
}

fn stack(widths: &[usize], out: LayerSpec) -> Vec<LayerSpec> {
    widths
        .iter()
        .map(|&w| LayerSpec::elu(w))
        .chain(std::iter::once(out))
        .collect()
}

fn reps(widths: &[usize]) -> Vec<LayerSpec> {
    widths.iter().map(|&w| LayerSpec::elu(w)).collect()
}

/// Declarative estimator architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub family: Family,
    /// Gradient reversal between the confounder representation and the
    /// treatment classifier (the "+" variants).
    pub adversarial: bool,
    pub rep_layers: BTreeMap<Role, Vec<LayerSpec>>,
    /// Head stacks, each ending in its output layer.
    pub head_layers: BTreeMap<Role, Vec<LayerSpec>>,
    pub mmd_weight: f64,
    pub tr_weight: f64,
    pub tr_epsilon_init: f64,
}

impl EstimatorSpec {
    /// Default architecture for a family.
    pub fn new(family: Family, adversarial: bool) -> Result<Self> {
        let mut rep_layers = BTreeMap::new();
        let mut head_layers = BTreeMap::new();
        match family {
            Family::Slearner => {
                head_layers.insert(Role::Outcome, stack(&[200, 200, 200, 100, 100], LayerSpec::linear_out()));
            }
            Family::Tlearner => {
                for role in [Role::HeadMu0, Role::HeadMu1] {
                    head_layers.insert(role, stack(&[100, 100, 100, 50, 50], LayerSpec::linear_out()));
                }
            }
            Family::Tarnet | Family::Cfrnet | Family::Dragonnet | Family::DragonnetTr => {
                rep_layers.insert(Role::RepC, reps(&[200, 200, 200]));
                for role in [Role::HeadMu0, Role::HeadMu1] {
                    head_layers.insert(role, stack(&[100, 100], LayerSpec::linear_out()));
                }
                if family.has_propensity_head() {
                    head_layers.insert(Role::HeadPi, vec![LayerSpec::sigmoid_out()]);
                }
            }
            Family::Drcfr => {
                rep_layers.insert(Role::RepC, reps(&[150]));
                rep_layers.insert(Role::RepA, reps(&[50]));
                rep_layers.insert(Role::RepI, reps(&[50]));
                for role in [Role::HeadMu0, Role::HeadMu1] {
                    head_layers.insert(role, stack(&[100, 100], LayerSpec::linear_out()));
                }
                head_layers.insert(Role::HeadPi, stack(&[100, 100], LayerSpec::sigmoid_out()));
            }
            Family::Snet => {
                rep_layers.insert(Role::RepC, reps(&[100]));
                rep_layers.insert(Role::RepI, reps(&[100]));
                rep_layers.insert(Role::RepA, reps(&[50]));
                rep_layers.insert(Role::RepA1, reps(&[50]));
                rep_layers.insert(Role::RepA0, reps(&[50]));
                for role in [Role::HeadMu0, Role::HeadMu1] {
                    head_layers.insert(role, stack(&[100, 100], LayerSpec::linear_out()));
                }
                head_layers.insert(Role::HeadPi, stack(&[100, 100], LayerSpec::sigmoid_out()));
            }
        }
        let spec = Self {
            family,
            adversarial,
            rep_layers,
            head_layers,
            mmd_weight: 1.0,
            tr_weight: 1.0,
            tr_epsilon_init: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses estimator names like `snet`, `snet+`, `DragonNetTR+`.
    pub fn from_name(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        let (base, adversarial) = match trimmed.strip_suffix('+') {
            Some(base) => (base, true),
            None => (trimmed, false),
        };
        let family: Family = base
            .parse()
            .map_err(|_| Error::UnknownEstimator(name.to_string()))?;
        Self::new(family, adversarial)
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.family.key(), if self.adversarial { "+" } else { "" })
    }

    pub fn validate(&self) -> Result<()> {
        if self.adversarial && !self.family.has_propensity_head() {
            return Err(Error::InvalidSpec(format!(
                "{} has no treatment classifier to attach gradient reversal to",
                self.family
            )));
        }
        for (role, layers) in self.rep_layers.iter().chain(&self.head_layers) {
            if layers.is_empty() {
                return Err(Error::InvalidSpec(format!("{} has no layers", role.key())));
            }
            if layers.iter().any(|l| l.width == 0) {
                return Err(Error::InvalidSpec(format!("{} has a zero-width layer", role.key())));
            }
        }
        for role in [Role::HeadMu0, Role::HeadMu1, Role::Outcome, Role::HeadPi] {
            if let Some(last) = self.head_layers.get(&role).and_then(|l| l.last()) {
                if last.width != 1 {
                    return Err(Error::InvalidSpec(format!("{} must end in a width-1 output", role.key())));
                }
            }
        }
        let has_pi = self.head_layers.contains_key(&Role::HeadPi);
        if has_pi != self.family.has_propensity_head() {
            return Err(Error::InvalidSpec(format!(
                "{} propensity head presence does not match the family",
                self.family
            )));
        }
        if self.mmd_weight < 0.0 || self.tr_weight < 0.0 {
            return Err(Error::InvalidSpec("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn rep_width(&self, role: Role) -> Option<usize> {
        self.rep_layers.get(&role).and_then(|l| l.last()).map(|l| l.width)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
