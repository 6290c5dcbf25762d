//! Radially symmetric solutions of the weighted Lane-Emden system
//! `-Δu = |x|^a |v|^{p-2} v`, `-Δv = |x|^b |u|^{q-2} u` on the critical
//! hyperbola `(a+n)/p + (b+n)/q = n - 2`.
//!
//! The Emden-Fowler substitution turns radial pairs into trajectories of an
//! autonomous Hamiltonian system on the line. Solutions are computed as
//! minimizers of a Rayleigh-type quotient ([`variational`]), cross-checked by
//! integrating the Hamiltonian flow ([`flow`]) and mapped back to the radial
//! variable ([`radial`]). [`rellich`] holds the closed forms for the weighted
//! Rellich constants.

pub mod cli;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod operators;
pub mod params;
pub mod radial;
pub mod rellich;
pub mod variational;

pub use error::{Error, Result};
pub use operators::{HamiltonianState, LineGrid, TrajectoryPair};
pub use params::{ReducedParams, Regime, RegimeTag, SystemParams};
