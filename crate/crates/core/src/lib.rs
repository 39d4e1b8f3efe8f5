//! Numerics for constant-mean-curvature surfaces of revolution in
//! conformally Euclidean balls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convexity;
pub mod curvature;
pub mod error;
pub mod gap;
pub mod metric;
pub mod numerics;
pub mod profile;
pub mod shooting;

pub use error::{Error, Result};
pub use metric::{AmbientPoint, ConformalFactor, MetricKind, MetricSpec};
