//! Strong convertible nonconvex (SCN) forms: an expression engine, the form
//! data model and its composition algebra, a catalog of ready-made forms,
//! exact and smoothed penalties, an alternating penalty solver, and grid
//! oracles that audit the min-max identity.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod audit;
pub mod catalog;
pub mod cli;
pub mod domain;
pub mod error;
pub mod expr;
pub mod form;
pub mod penalty;
pub mod problem;
pub mod solver;

pub use catalog::{make_catalog_form, make_structured, CatalogId, CatalogParams, StructuredKind};
pub use domain::{Block, BoxDomain, SaddlePoint, VarPartition};
pub use error::{ExprError, ScnError};
pub use expr::{Curvature, Expr};
pub use form::{Claims, ScnForm, ValueSign};
