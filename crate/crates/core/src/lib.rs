//! Numerical core of the talking-face pipeline: landmark geometry and
//! retargeting, audio feature windowing, PCA, blink statistics, image
//! metrics and corpus preparation. Everything here is a pure function of
//! its inputs.

pub mod audio;
pub mod blink;
pub mod data_prep;
pub mod error;
pub mod geometry;
pub mod image;
pub mod landmark_io;
pub mod landmarks;
pub mod metrics;
pub mod pca;
pub mod raster;
pub mod synthetic;

pub use error::{Error, Result};
pub use landmarks::{CanonicalDisplacement, LandmarkSet, Point};
