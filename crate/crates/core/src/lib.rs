//! Two-sided Gaussian chance constraints.
//!
//! A two-sided chance constraint `P(a(x) <= xi . x <= b(x)) >= 1 - eps` is
//! convex in its natural lifting. This crate provides exact oracles for the
//! underlying planar set, certified polyhedral and second-order-cone
//! approximations, a cutting-plane solver, quadratic and distributionally
//! robust variants, and a chance-constrained DC optimal power flow model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod distrobust;
pub mod error;
pub mod formulation;
pub mod gauss;
pub mod json;
pub mod opf;
pub mod polyapprox;
pub mod quadcc;
pub mod seps;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use seps::{ConePoint3, Halfplane2, Point2, RiskLevel};
