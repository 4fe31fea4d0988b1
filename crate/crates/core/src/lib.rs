//! Viewpoint augmentation for imitation learning on a simulated tabletop task.
//!
//! Demonstrations recorded from one fixed camera are re-rendered from sampled
//! camera poses with a novel-view synthesis backend, filtered by perceptual
//! distance, and used to train a policy that is then evaluated from unseen
//! viewpoints.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod geometry;
pub mod imaging;
pub mod nvs;
pub mod policy;
pub mod posesample;
pub mod rng;
pub mod scenesim;

pub use error::{Result, VistaError};
