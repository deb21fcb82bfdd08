//! Training loop, early stopping and random search.

pub mod config;
pub mod fit;
pub mod negatives;
pub mod search;

pub use config::{model_features, ModelKind, TrainConfig};
pub use fit::{
    build_model, fit, fit_config, EarlyStopping, EpochRecord, FitOutcome, FitResult, Observation,
    VALIDATION_K,
};
pub use negatives::{sample_negatives, sample_negatives_from};
pub use search::{
    random_search, sort_leaderboard, write_leaderboard_csv, Domain, LeaderboardEntry,
    ModalityPolicy, SearchResult, SearchSpace,
};
