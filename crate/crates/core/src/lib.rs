//! Finite-difference solvers and diagnostics for order-reconstruction states
//! of the Landau-de Gennes model on squares and hexagons.
//!
//! * [`tensor`]: Q-tensor and P-tensor algebra.
//! * [`grid`], [`boundary`]: masked Cartesian grids and Dirichlet data.
//! * [`scalar_flow`], [`full_flow`]: gradient flows for the reduced scalar
//!   problem and the five-component tensor problem.
//! * [`stability`], [`sweep`]: second variation, its lowest eigenvalue and
//!   bifurcation sweeps.
//! * [`sharp_interface`]: the large-size limit functional.
//! * [`config`], [`io`], [`cli`]: the command-line front end.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod flow;
pub mod full_flow;
pub mod grid;
pub mod io;
pub mod scalar_flow;
pub mod sharp_interface;
pub mod stability;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
