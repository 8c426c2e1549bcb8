//! A small dense-network engine with reverse-mode gradients.

pub mod activation;
pub mod checkpoint;
pub mod net;
pub mod optim;

pub use activation::Activation;
pub use net::{DiscriminatorNet, Gradients, Layer, NetConfig, NetMode, Tape};
pub use optim::{Optimizer, OptimizerKind};
