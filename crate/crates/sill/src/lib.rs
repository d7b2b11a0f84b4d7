//! Shared and linear session types with subtyping across modalities.
//!
//! The crate provides a typechecker for process definitions and a
//! multiset-rewriting runtime whose monitors check that every step keeps the
//! configuration well typed.

pub mod diag;
pub mod process;
pub mod runtime;
pub mod subtype;
pub mod synchro;
pub mod syntax;
pub mod typecheck;
pub mod types;
