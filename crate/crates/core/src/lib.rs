//! Verification and evaluation toolkit for binary deletion/substitution
//! channels: pattern algebra, channel models, exact brute-force oracles for
//! the combinatorial lemmas, and closed-form capacity bounds.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod oracles;
pub mod patterns;

pub use error::{Error, Result};
