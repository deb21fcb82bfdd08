//! Interactions, modality tables, split protocols and synthetic data.

pub mod interactions;
pub mod io;
pub mod modality;
pub mod split;
pub mod synth;

pub use interactions::{IdMap, InteractionMatrix, Side};
pub use io::{load_interactions, load_modality, read_split, write_split, LoadedInteractions};
pub use modality::{profile_modality, FeatureStore, ModalityKind, ModalityTable, PROFILE};
pub use split::{split, split_cold, split_warm, Partition, Ratios, SplitBundle, SplitKind};
pub use synth::{synth_generate, SyntheticData, SyntheticModality, SyntheticSpec};
