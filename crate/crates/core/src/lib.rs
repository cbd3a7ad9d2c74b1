//! Bayesian belief dynamics for in-context learning and activation steering.
//!
//! Behavior is modeled as the posterior belief in a latent concept whose log
//! odds are additive in steering magnitude and in a sub-linear function of the
//! number of in-context shots. The crate evaluates that model, fits it to
//! behavioral grids, predicts phase boundaries, and checks the steering
//! mechanism in a toy linear-representation world.

pub mod belief;
pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod lrh;

pub use belief::{BeliefParams, InterventionPoint};
pub use data::{BehaviorGrid, BehaviorRecord, GridAxes};
pub use error::{Error, Result};
pub use fit::{FitConfig, FitResult};
