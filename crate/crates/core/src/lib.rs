//! Closed geodesics on surfaces of revolution and their relatives: geodesic
//! flow, broken-geodesic loop spaces, energy descent, minimax searches,
//! Morse index theory of the normal Jacobi equation, and a census driver.
//!
//! Numeric types are generic over [`scalar::Real`]; the aliases below fix
//! `f64` and `f32`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod census;
pub mod error;
pub mod geodesic_flow;
pub mod index;
pub mod linalg;
pub mod loop_space;
pub mod minimax;
pub mod scalar;
pub mod surface;

pub use error::{Error, Result};
pub use scalar::{Real, V2};

pub type Metric64 = surface::Metric<f64>;
pub type Metric32 = surface::Metric<f32>;
pub type Profile64 = surface::Profile<f64>;
pub type Profile32 = surface::Profile<f32>;
pub type BrokenLoop64 = loop_space::BrokenLoop<f64>;
pub type BrokenLoop32 = loop_space::BrokenLoop<f32>;
pub type DescentParams64 = loop_space::DescentParams<f64>;
pub type DescentParams32 = loop_space::DescentParams<f32>;
pub type ConnectOptions64 = geodesic_flow::ConnectOptions<f64>;
pub type ConnectOptions32 = geodesic_flow::ConnectOptions<f32>;
pub type MinimaxParams64 = minimax::MinimaxParams<f64>;
pub type MinimaxParams32 = minimax::MinimaxParams<f32>;
pub type IndexOptions64 = index::IndexOptions<f64>;
pub type IndexOptions32 = index::IndexOptions<f32>;
