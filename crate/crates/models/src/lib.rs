//! Trainable stages of the talking-face pipeline: speech to landmark
//! motion, noise to eye blinks, and landmarks to face texture.

pub mod blink;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod speech;
pub mod texture;

pub use error::{Error, Result};
pub use params::{Checkpoint, ParamStore};
