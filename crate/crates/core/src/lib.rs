//! Online handwriting modeling and text-independent writer identification.
//!
//! The pipeline decomposes pen trajectories into beta strokes (velocity
//! pulses riding on a cubic drag term, each paired with two curvature-tied
//! elliptic arcs), turns consecutive stroke pairs into feature vectors with
//! optional fuzzy perceptual-code memberships, routes them through a
//! position/shape taxonomy, and trains one stacked sparse autoencoder +
//! softmax network per subgroup. Writer identity is the argmax of summed
//! per-segment network outputs.
//!
//! A generative module synthesizes velocity profiles, trajectories, and whole
//! corpora from known parameters so every numeric stage can be verified by
//! round-trip.

pub mod beta;
pub mod ellipse;
pub mod error;
pub mod features;
pub mod filter;
pub mod identify;
pub mod ink;
pub mod linalg;
pub mod model;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod segmentation;
pub mod synth;
pub mod taxonomy;

pub use error::{Error, Result};
