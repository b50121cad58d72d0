//! Rule-based critique, perturbation synthesis and critic-guided refinement
//! of driving trajectories, with a small closed-loop simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod critique;
pub mod error;
pub mod geom;
pub mod perturb;
pub mod refine;
pub mod risk;
pub mod sceneio;
pub mod sim;
pub mod traj;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
