//! Analysis of piecewise-smooth continuous maps near a codimension-two point
//! where a border-collision and a period-doubling bifurcation coincide.
//!
//! The crate is organized bottom-up:
//!
//! - [`pws_map`]: polynomial half-maps and their continuous union.
//! - [`linalg_bc`]: fixed points, the adjugate row, Feigin's classification.
//! - [`unfolding1d`]: normalization and the unfolding of a scalar map.
//! - [`second_iterate`]: two-cycles and the local form of the second iterate.
//! - [`orbit_lab`]: periodic-orbit enumeration, Lyapunov exponents, chaos certificates.
//! - [`center_manifold`]: reduction of an N-dimensional map to a scalar one.
//! - [`continuation`]: curve tracing in the parameter plane and parameter sweeps.

pub mod center_manifold;
pub mod continuation;
pub mod error;
pub mod fixtures;
pub mod linalg_bc;
pub mod mapfile;
pub mod numerics;
pub mod orbit_lab;
pub mod poly;
pub mod pws_map;
pub mod second_iterate;
pub mod series;
pub mod unfolding1d;

pub use error::{Error, ErrorKind, Result};
pub use poly::Poly2;
pub use pws_map::{HalfMap, PwsMap, Side, State};
