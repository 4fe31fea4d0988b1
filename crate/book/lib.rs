//! Every chapter of the guide is a module here so that `cargo test` runs its
//! code listings as doctests.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("src/viewpoints.md")]
pub mod viewpoints {}
#[doc = include_str!("src/simulator.md")]
pub mod simulator {}
#[doc = include_str!("src/synthesis.md")]
pub mod synthesis {}
#[doc = include_str!("src/filtering.md")]
pub mod filtering {}
#[doc = include_str!("src/augmentation.md")]
pub mod augmentation {}
#[doc = include_str!("src/policies.md")]
pub mod policies {}
#[doc = include_str!("src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("src/formats.md")]
pub mod formats {}
