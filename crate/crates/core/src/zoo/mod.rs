//! Estimator architectures: meta-learner baselines, shared-representation
//! networks and the disentangled networks, with optional gradient reversal
//! in front of the treatment classifier.

mod losses;
mod model;
mod spec;

pub use losses::{mmd_linear, mmd_linear_node, targeted_regularisation, targeted_regularisation_node};
pub use model::{ForwardNodes, Model, PredBundle, PROPENSITY_CLIP};
pub use spec::{Activation, EstimatorSpec, Family, LayerSpec, Role};
