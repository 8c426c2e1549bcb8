pub mod bottom_up;
pub mod channel;
pub mod divergence;
pub mod error;
pub mod nn;
pub mod mixture;
pub mod objectives;
pub mod par;
pub mod posterior;
pub mod rng;
pub mod toy;
pub mod train;
pub mod verify;

pub use divergence::{Divergence, DivergenceSpec, Form};
pub use error::{Error, Result};
