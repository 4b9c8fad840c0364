pub mod ambiguity;
pub mod baselines;
pub mod bigamp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod parafac;
pub mod scene;

pub use error::{Error, Result};
