//! Joint objective, adversarial schedule, and the training loop.

mod config;
mod objective;
mod schedule;
mod search;
mod trainer;

pub use config::{AlphaMode, TrainConfig};
pub use objective::{factual_loss, propensity_loss, total_objective, validation_loss, ObjectiveParts};
pub use schedule::lambda_schedule;
pub use search::{coefficient_search, step_down, step_up, AlphaSearch};
pub use trainer::{train, EarlyStopState, EpochRecord, StopDecision, TrainReport};
