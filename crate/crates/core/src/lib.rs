//! Training-free observation guidance for vision-language-action policies.
//!
//! Two soft masks rewrite the camera frame before it reaches the policy:
//!
//! * an attention mask, built from the last query token's attention over the
//!   image patches at one layer, head-averaged, z-scored and squashed through
//!   a sigmoid ([`attention`], [`mask`]);
//! * an action mask, a conic sector around the end-effector's projected tool
//!   axis ([`roi`]).
//!
//! Masks are blended against a neutral background ([`compositor`]) at steps
//! chosen by the [`scheduler`]. The [`toy`] module provides a deterministic
//! tabletop scene and a two-layer attention policy so the whole loop can run
//! and be benchmarked ([`bench`]) without an external model.

pub mod atn1;
pub mod bench;
pub mod attention;
pub mod compositor;
pub mod config;
pub mod error;
pub mod mask;
pub mod roi;
pub mod scheduler;
pub mod toy;

pub use error::{AtaError, Result};
