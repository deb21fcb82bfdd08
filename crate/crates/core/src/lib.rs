//! Single-branch multimodal recommendation.
//!
//! One embedding network is shared across every modality of an entity
//! (audio, text, images, categorical side information, or the interaction
//! profile itself). Each modality first passes through a shallow projector,
//! then through the shared branch; the entity embedding is the average over
//! whatever modalities are present. Entities without interactions (cold start)
//! or with missing side information are therefore embedded from the
//! modalities they do have.
//!
//! The crate is organised as:
//!
//! - [`data`]: interaction matrices, modality tables, split protocols and a
//!   synthetic generator.
//! - [`numerics`]: dense layers with hand-written backprop, Adam, finite
//!   difference checks, PCA and a stable seeded RNG.
//! - [`losses`]: BPR, symmetric InfoNCE and the composite batch loss.
//! - [`model`]: the single-branch model plus MF, DeepMF, popularity and
//!   random baselines.
//! - [`training`]: the epoch loop with early stopping and random search.
//! - [`evaluation`]: ranking metrics, split protocols, missing-modality sweeps
//!   and paired significance tests.
//! - [`analysis`]: modality-gap statistics and PCA exports.
//! - [`cli`]: the command implementations behind the `sibrar` binary.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod fingerprint;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
