//! Odd form rings, odd-dimensional unitary groups U_{2n+1}(R, Delta), their
//! congruence subgroups and the conjugation action on relative odd form
//! parameters, over finite base rings. Every structural fact the library
//! relies on is either certified at construction time or re-checkable by an
//! exhaustive or sampled sweep.

pub mod action;
pub mod congruence;
pub mod error;
pub mod formparam;
pub mod linalg;
pub mod sandwich;
pub mod unitary;
pub mod rings;

pub use error::{Error, Result};
