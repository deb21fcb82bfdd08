use serde::{Deserialize, Serialize};

use crate::data::{FeatureStore, InteractionMatrix, Side, PROFILE};
use crate::fingerprint::fingerprint;
use crate::losses::BatchLossConfig;
use crate::model::{CounterpartKind, SiBraRConfig};
use crate::numerics::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Sibrar,
    Mf,
    Deepmf,
    Pop,
    Rand,
}

impl ModelKind {
    pub fn is_trainable(self) -> bool {
        matches!(self, ModelKind::Sibrar | ModelKind::Mf | ModelKind::Deepmf)
    }
}

/// Everything that determines a training run. Unknown JSON fields are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Multimodal side of the single-branch model.
    pub side: Side,
    pub training_modalities: Vec<String>,
    pub d_emb: usize,
    pub projector_dim: usize,
    pub projector_activation: Activation,
    pub projector_bias: bool,
    pub branch_hidden: Vec<usize>,
    pub shared_branch: bool,
    pub counterpart: CounterpartKind,
    /// Hidden sizes of profile networks: the counterpart and both DeepMF
    /// towers.
    pub counterpart_hidden: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub n_neg: usize,
    pub ctr_embs: bool,
    pub lambda: f64,
    pub tau: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let arch = SiBraRConfig::default();
        Self {
            model: ModelKind::Sibrar,
            side: arch.side,
            training_modalities: vec![PROFILE.to_string()],
            d_emb: arch.d_emb,
            projector_dim: arch.projector_dim,
            projector_activation: arch.projector_activation,
            projector_bias: arch.projector_bias,
            branch_hidden: arch.branch_hidden,
            shared_branch: arch.shared_branch,
            counterpart: arch.counterpart,
            counterpart_hidden: arch.counterpart_hidden,
            lr: 1e-3,
            weight_decay: 0.0,
            batch_size: 256,
            n_neg: 10,
            ctr_embs: false,
            lambda: 0.0,
            tau: 1.0,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 || self.patience < 1 || self.batch_size < 1 {
            return Err(Error::invalid(
                "max_epochs, patience and batch_size must all be at least 1",
            ));
        }
        if self.model == ModelKind::Sibrar && self.training_modalities.is_empty() {
            return Err(Error::invalid("training_modalities must not be empty"));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "need lr > 0 and weight_decay >= 0, got {} and {}",
                self.lr, self.weight_decay
            )));
        }
        if self.d_emb == 0 {
            return Err(Error::invalid("d_emb must be positive"));
        }
        self.loss_config().validate()
    }

    pub fn sibrar_config(&self) -> SiBraRConfig {
        SiBraRConfig {
            side: self.side,
            d_emb: self.d_emb,
            projector_dim: self.projector_dim,
            projector_activation: self.projector_activation,
            projector_bias: self.projector_bias,
            branch_hidden: self.branch_hidden.clone(),
            shared_branch: self.shared_branch,
            counterpart: self.counterpart,
            counterpart_hidden: self.counterpart_hidden.clone(),
        }
    }

    pub fn loss_config(&self) -> BatchLossConfig {
        BatchLossConfig {
            n_neg: self.n_neg,
            ctr_embs: self.ctr_embs,
            lambda: self.lambda,
            tau: self.tau,
        }
    }

    /// Digest of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// The feature store a single-branch model trains and infers with: `base`
/// plus, when requested, the profile modality derived from `train`. Every
/// requested modality must exist.
pub fn model_features(
    base: &FeatureStore,
    train: &InteractionMatrix,
    side: Side,
    modalities: &[String],
) -> Result<FeatureStore> {
    let mut store = base.clone();
    if modalities.iter().any(|m| m == PROFILE) {
        store = store.with_profile(train, side)?;
    }
    for m in modalities {
        let table = store.get(m)?;
        if table.side != side {
            return Err(Error::invalid(format!(
                "modality '{m}' describes {}s, expected {}s",
                table.side.as_str(),
                side.as_str()
            )));
        }
    }
    Ok(store)
}
