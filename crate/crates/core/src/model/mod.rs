//! Models, scorers and checkpoints.

pub mod baseline;
pub mod checkpoint;
pub mod sibrar;
pub mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use baseline::{DeepMf, Mf, Popularity, RandomScorer};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use sibrar::{
    sample_modalities, CounterpartKind, SiBraR, SiBraRConfig, SiBraRGrads, TrainView,
};
pub use table::EmbeddingTable;

use crate::data::{FeatureStore, InteractionMatrix, Side};
use crate::losses::BatchLossConfig;
use crate::numerics::{dot, Parameterized, SeededRng};
use crate::Result;

/// Anything that assigns a relevance score to `(user, item)`.
pub trait Scorer: Sync {
    fn n_users(&self) -> usize;
    fn n_items(&self) -> usize;
    fn score(&self, user: usize, item: usize) -> f64;
}

/// Dot-product scorer over precomputed user and item embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingScorer {
    dim: usize,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl EmbeddingScorer {
    /// Row-major `n x dim` buffers.
    pub fn new(dim: usize, users: Vec<f64>, items: Vec<f64>) -> Self {
        assert!(dim > 0 && users.len() % dim == 0 && items.len() % dim == 0);
        Self { dim, users, items }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user(&self, u: usize) -> &[f64] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }
}

impl Scorer for EmbeddingScorer {
    fn n_users(&self) -> usize {
        self.users.len() / self.dim
    }

    fn n_items(&self) -> usize {
        self.items.len() / self.dim
    }

    fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user(user), self.item(item))
    }
}

/// The `k` highest-scoring `candidates` for `user`, best first. Ties go to the
/// lower item index. `exclude` must be sorted.
pub fn recommend_top_k<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    candidates: &[usize],
    exclude: &[usize],
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|i| exclude.binary_search(i).is_err())
        .map(|&i| (scorer.score(user, i), i))
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.sort_by(by_rank);
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// A model trained by gradient descent on sampled batches.
pub trait Trainable: Parameterized + Clone + Send + Sync {
    type Grads: Parameterized;

    /// Orientation of the training view; `Item` means users are anchors.
    fn view_side(&self) -> Side;

    /// Modalities a negative must have at least one of, if any.
    fn view_modalities(&self) -> Option<Vec<String>>;

    fn new_grads(&self) -> Self::Grads;

    fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut Self::Grads,
    ) -> Result<f64>;

    /// Inference embeddings with every training modality.
    fn embeddings(&self, train: &InteractionMatrix, features: &FeatureStore) -> Result<EmbeddingScorer>;
}

impl Trainable for SiBraR {
    type Grads = SiBraRGrads;

    fn view_side(&self) -> Side {
        self.side()
    }

    fn view_modalities(&self) -> Option<Vec<String>> {
        Some(self.modalities.clone())
    }

    fn new_grads(&self) -> SiBraRGrads {
        self.zero_grads()
    }

    fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut SiBraRGrads,
    ) -> Result<f64> {
        SiBraR::batch_loss(self, batch, view, cfg, rng, grads)
    }

    fn embeddings(&self, train: &InteractionMatrix, features: &FeatureStore) -> Result<EmbeddingScorer> {
        self.scorer(train, features, None)
    }
}

impl Trainable for Mf {
    type Grads = baseline::MfGrads;

    fn view_side(&self) -> Side {
        Side::Item
    }

    fn view_modalities(&self) -> Option<Vec<String>> {
        None
    }

    fn new_grads(&self) -> Self::Grads {
        self.zero_grads()
    }

    fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut Self::Grads,
    ) -> Result<f64> {
        Mf::batch_loss(self, batch, view, cfg, rng, grads)
    }

    fn embeddings(&self, _train: &InteractionMatrix, _features: &FeatureStore) -> Result<EmbeddingScorer> {
        Ok(self.scorer())
    }
}

impl Trainable for DeepMf {
    type Grads = baseline::DeepMfGrads;

    fn view_side(&self) -> Side {
        Side::Item
    }

    fn view_modalities(&self) -> Option<Vec<String>> {
        None
    }

    fn new_grads(&self) -> Self::Grads {
        self.zero_grads()
    }

    fn batch_loss(
        &self,
        batch: &[(usize, usize)],
        view: &TrainView<'_>,
        cfg: &BatchLossConfig,
        rng: &mut SeededRng,
        grads: &mut Self::Grads,
    ) -> Result<f64> {
        DeepMf::batch_loss(self, batch, view, cfg, rng, grads)
    }

    fn embeddings(&self, train: &InteractionMatrix, _features: &FeatureStore) -> Result<EmbeddingScorer> {
        self.scorer(train)
    }
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Sibrar {
        config: SiBraRConfig,
        modality_dims: BTreeMap<String, usize>,
        n_anchors: usize,
        n_targets: usize,
    },
    Mf {
        n_users: usize,
        n_items: usize,
        d_emb: usize,
    },
    Deepmf {
        n_users: usize,
        n_items: usize,
        hidden: Vec<usize>,
        d_emb: usize,
    },
    Pop {
        model: Popularity,
    },
    Rand {
        model: RandomScorer,
    },
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    SiBraR(SiBraR),
    Mf(Mf),
    DeepMf(DeepMf),
    Pop(Popularity),
    Rand(RandomScorer),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::SiBraR(_) => "sibrar",
            TrainedModel::Mf(_) => "mf",
            TrainedModel::DeepMf(_) => "deepmf",
            TrainedModel::Pop(_) => "pop",
            TrainedModel::Rand(_) => "rand",
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            TrainedModel::SiBraR(m) => ModelSpec::Sibrar {
                config: m.config.clone(),
                modality_dims: m.modality_dims(),
                n_anchors: m.n_anchors,
                n_targets: m.n_targets,
            },
            TrainedModel::Mf(m) => ModelSpec::Mf {
                n_users: m.users.n_rows(),
                n_items: m.items.n_rows(),
                d_emb: m.d_emb(),
            },
            TrainedModel::DeepMf(m) => ModelSpec::Deepmf {
                n_users: m.item_net.d_in(),
                n_items: m.user_net.d_in(),
                hidden: m.user_net.layers[..m.user_net.layers.len() - 1]
                    .iter()
                    .map(|l| l.d_out())
                    .collect(),
                d_emb: m.user_net.d_out(),
            },
            TrainedModel::Pop(m) => ModelSpec::Pop { model: m.clone() },
            TrainedModel::Rand(m) => ModelSpec::Rand { model: *m },
        }
    }

    /// Freshly initialised model with the layout of `spec`.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Sibrar {
                config,
                modality_dims,
                n_anchors,
                n_targets,
            } => TrainedModel::SiBraR(SiBraR::from_dims(
                config.clone(),
                modality_dims,
                *n_anchors,
                *n_targets,
                seed,
            )?),
            ModelSpec::Mf {
                n_users,
                n_items,
                d_emb,
            } => TrainedModel::Mf(Mf::new(*n_users, *n_items, *d_emb, seed)),
            ModelSpec::Deepmf {
                n_users,
                n_items,
                hidden,
                d_emb,
            } => TrainedModel::DeepMf(DeepMf::new(*n_users, *n_items, hidden, *d_emb, seed)?),
            ModelSpec::Pop { model } => TrainedModel::Pop(model.clone()),
            ModelSpec::Rand { model } => TrainedModel::Rand(*model),
        })
    }

    pub fn params(&self) -> Option<&dyn Parameterized> {
        match self {
            TrainedModel::SiBraR(m) => Some(m),
            TrainedModel::Mf(m) => Some(m),
            TrainedModel::DeepMf(m) => Some(m),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut dyn Parameterized> {
        match self {
            TrainedModel::SiBraR(m) => Some(m),
            TrainedModel::Mf(m) => Some(m),
            TrainedModel::DeepMf(m) => Some(m),
            _ => None,
        }
    }

    /// Scorer for evaluation. `subset` restricts the single-branch model's
    /// inference modalities and is ignored by the other kinds.
    pub fn scorer(
        &self,
        train: &InteractionMatrix,
        features: &FeatureStore,
        subset: Option<&[String]>,
    ) -> Result<Box<dyn Scorer + Send>> {
        Ok(match self {
            TrainedModel::SiBraR(m) => Box::new(m.scorer(train, features, subset)?),
            TrainedModel::Mf(m) => Box::new(m.scorer()),
            TrainedModel::DeepMf(m) => Box::new(m.scorer(train)?),
            TrainedModel::Pop(m) => Box::new(m.clone()),
            TrainedModel::Rand(m) => Box::new(*m),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl Scorer for Fixed {
        fn n_users(&self) -> usize {
            1
        }
        fn n_items(&self) -> usize {
            self.0.len()
        }
        fn score(&self, _: usize, i: usize) -> f64 {
            self.0[i]
        }
    }

    #[test]
    fn top_k_orders_by_score_then_index() {
        let s = Fixed(vec![0.5, 0.9, 0.5, 0.1, 0.9]);
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(recommend_top_k(&s, 0, &all, &[], 3), vec![1, 4, 0]);
        assert_eq!(recommend_top_k(&s, 0, &all, &[1], 3), vec![4, 0, 2]);
        assert_eq!(recommend_top_k(&s, 0, &all, &[], 10).len(), 5);
        assert!(recommend_top_k(&s, 0, &all, &[], 0).is_empty());
    }
}
