//! Command-line companion to the [`bvqft`] engine.
//!
//! The engine crate is pure computation; everything that touches the outside
//! world lives here:
//!
//! * [`poly`] — a small text grammar for polynomials in model files;
//! * [`modelfile`] — TOML model descriptions (variables, action, options);
//! * [`complexfile`] — JSON descriptions of finite ħ-linear complexes;
//! * [`bundle`] — the deterministic JSON reports every command emits;
//! * [`cli`] — argument parsing, dispatch, and the exit-code contract;
//! * [`par`] — a scoped-thread helper for sampled check batches.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod bundle;
pub mod cli;
pub mod complexfile;
pub mod modelfile;
pub mod par;
pub mod poly;
