//! Controllability analysis for one-dimensional multi-particle acoustic
//! manipulation under multi-modal actuation.
//!
//! * [`dynamics`]: the scaled mode dynamics, exact flow map and RK4 check.
//! * [`equilibria`]: assignable stable equilibria and their regions of attraction.
//! * [`graph`]: controllability graphs, SCCs, route planning, refinement probe.
//! * [`localctrl`]: positive-spanning test, grid and sampled sweeps, Wilson intervals.
//! * [`relax`]: mode mixing and fast-switching approximation.
//! * [`export`]: DOT, JSON, CSV and SVG writers.

pub mod dynamics;
pub mod equilibria;
pub mod export;
pub mod error;
pub mod graph;
pub mod localctrl;
pub mod relax;
pub mod simplex;

pub use error::{Error, Result};
