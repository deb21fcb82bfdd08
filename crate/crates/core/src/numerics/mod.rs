//! Dense numerical core: layers, backprop, Adam, gradient checks, PCA and
//! the seeded RNG.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod params;
pub mod pca;
pub mod rng;

pub use adam::{AdamConfig, OptimizerState};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport};
pub use layer::{dot, Activation, DenseLayer, GradientTape, LayerGrads, Network, NetworkGrads};
pub use params::{BlockInfo, Parameterized};
pub use pca::{pca, Pca};
pub use rng::{derive_seed, SeededRng};
