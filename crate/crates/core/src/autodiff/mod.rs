//! Reverse-mode automatic differentiation over 2-D arrays.
//!
//! Build a computation on a [`Tape`], call [`Tape::backward`] on a scalar,
//! and read gradients back by [`Var`]. Parameters live in a [`ParamStore`]
//! and are updated with [`adam_step`].

mod adam;
mod checkpoint;
mod gradcheck;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use gradcheck::{all_coords, analytic_gradient, compare_gradient, grad_check, Coord, GradCheck, GradReport};
pub use params::{normal, uniform_fan_in, Bound, ParamStore};
pub use tape::{Gradients, Real, Tape, Var};
