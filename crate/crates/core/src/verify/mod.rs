//! Numerical validation of the privacy and robustness bounds.
//!
//! Each verifier returns [`BoundCheck`] verdicts; batch drivers live in
//! [`crate::suites`].

mod check;
pub mod estimation;
pub mod pac;
pub mod privacy;

pub use check::{BoundCheck, SuiteSummary};
