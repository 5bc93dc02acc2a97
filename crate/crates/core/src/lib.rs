//! Tokenizer-free hierarchical autoregressive generator over continuous latent patches.
//!
//! Each generation step runs a local encoder over past patches, a causal
//! text-semantic transformer, a finite scalar quantizer, a residual acoustic
//! transformer and a stop head; a small bidirectional diffusion transformer then
//! decodes the next patch by flow matching with classifier-free guidance.
//!
//! Everything runs on the crate's own reverse-mode autodiff in [`numerics`].

pub mod error;
pub mod locdit;
pub mod model;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
