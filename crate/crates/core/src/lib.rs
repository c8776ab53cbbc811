//! Action ground-states of the stationary NLS `-u'' + lambda u = |u|^(p-2) u`
//! on the T-graph and the tadpole graph, computed from their phase-plane
//! representation, together with Vakhitov-Kolokolov stability classification
//! and an independent ODE shooting oracle.

mod error;
mod roots;
mod series;

pub mod model;
pub mod quadrature;
pub mod ground_state;
pub mod stability;
pub mod oracle;
pub mod asymptotics;
pub mod selftest;

pub use error::{Error, Result};
pub use model::{Branch, Graph, HamiltonianLevel, ModelParams, Nonlinearity};
