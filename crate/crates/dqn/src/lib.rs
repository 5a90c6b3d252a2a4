//! Dueling double deep Q-learning with noisy layers, weight normalization,
//! prioritized replay and RMSprop, written for small control problems.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod loss;
pub mod net;
pub mod optim;
pub mod replay;
pub mod sumtree;
pub mod tensor;
pub mod train;

pub use config::{Problem, Schedule, TrainConfig, Tracking};
pub use error::DqnError;
pub use net::{argmax, ConvSpec, NetworkSpec, NoiseDraw, Normalizer, QNetwork, Variant};
pub use optim::{RmsProp, RmsPropConfig};
pub use replay::{PriorityConfig, ReplayBuffer, Transition};
pub use sumtree::SumTree;
pub use tensor::{ParamSet, Real, Tensor};
pub use train::{derive_seed, play_episode, train, train_threaded, Agent, Environment, EpisodeStats, StepResult, TrainOptions, TrainOutcome};
